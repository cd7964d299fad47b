import numpy as np
import pytest

from qgamp.channels import TAU_MIN, GaussBernoulliPrior, GaussianPrior, OutputChannel
from qgamp.gamp import GampConfig, GampDivergenceError, MixingMatrix, gamp_init, gamp_run, gamp_step
from qgamp.harness.baselines import lmmse_estimate
from qgamp.quantizer import GaussianSource, ScalarQuantizer, measurement_distortion


def _instance(n, m, q, seed=0, prior=GaussianPrior()):
    rng = np.random.default_rng(seed)
    x = prior.sample(rng, n)
    A = rng.standard_normal((m, n)) / np.sqrt(m)
    return x, A, q.encode(A @ x)


def test_init_examples():
    s = gamp_init(GaussianPrior(), 3, 2)
    np.testing.assert_array_equal(s.x_hat, np.zeros(3))
    np.testing.assert_array_equal(s.tau_hat, np.ones(3))
    np.testing.assert_array_equal(s.u, np.zeros(2))
    assert s.iter == 0
    s = gamp_init(GaussBernoulliPrior(1 / 32, 32.0), 4, 2)
    np.testing.assert_allclose(s.tau_hat, 1.0)
    with pytest.raises(ValueError):
        gamp_init(GaussianPrior(), 0, 2)


def test_config_validation():
    with pytest.raises(ValueError):
        GampConfig(max_iters=0)
    with pytest.raises(ValueError):
        GampConfig(damping=0.0)
    with pytest.raises(ValueError):
        GampConfig(damping=1.5)


def test_uninformative_channel_keeps_prior():
    ch = OutputChannel(ScalarQuantizer.regular([]))
    s0 = gamp_init(GaussianPrior(), 1, 1)
    s1 = gamp_step(s0, np.array([[1.0]]), np.array([1]), ch, GaussianPrior())
    assert s1.u[0] == 0.0
    assert s1.tau[0] == TAU_MIN
    assert s1.x_hat[0] == pytest.approx(0.0, abs=1e-12)
    assert s1.tau_hat[0] == pytest.approx(1.0, rel=1e-9)
    assert s1.iter == 1
    # two identical consecutive estimates stop the run immediately
    res = gamp_run(np.array([[1.0]]), np.array([1]), ch, GaussianPrior())
    assert res.converged and res.iterations == 1


def test_four_products_per_step():
    q = ScalarQuantizer.uniform(8, 2.0)
    x, A, y = _instance(20, 40, q)
    mix = MixingMatrix(A)
    ch = OutputChannel(q)
    res = gamp_run(mix, y, ch, GaussianPrior(), GampConfig(max_iters=7, stop_tol=0.0))
    assert res.iterations == 7
    assert mix.products == 4 * 7


def test_max_iters_one():
    q = ScalarQuantizer.uniform(8, 2.0)
    x, A, y = _instance(10, 20, q)
    res = gamp_run(A, y, OutputChannel(q), GaussianPrior(), GampConfig(max_iters=1))
    assert res.iterations == 1 and len(res.history) == 1


def test_deterministic():
    q = ScalarQuantizer.uniform(16, 2.0)
    x, A, y = _instance(50, 100, q, seed=4)
    ch = OutputChannel(q)
    a = gamp_run(A, y, ch, GaussianPrior(), GampConfig(keep_snapshots=True))
    b = gamp_run(A, y, ch, GaussianPrior(), GampConfig(keep_snapshots=True))
    for sa, sb in zip(a.snapshots, b.snapshots):
        assert sa.tobytes() == sb.tobytes()


def test_permutation_equivariance():
    q = ScalarQuantizer.uniform(8, 2.0)
    x, A, y = _instance(30, 60, q, seed=2)
    ch = OutputChannel(q)
    rng = np.random.default_rng(9)
    pc, pr = rng.permutation(30), rng.permutation(60)
    cfg = GampConfig(max_iters=15, stop_tol=0.0)
    base = gamp_run(A, y, ch, GaussianPrior(), cfg).x_hat
    perm = gamp_run(A[pr][:, pc], y[pr], ch, GaussianPrior(), cfg).x_hat
    np.testing.assert_allclose(perm, base[pc], rtol=1e-9, atol=1e-12)


def test_fine_quantizer_matches_linear_mmse():
    # With 1024 levels the quantization error is nearly an independent
    # uniform perturbation, and for a Gaussian prior the MMSE estimate is
    # then essentially linear.
    n, m = 50, 100
    src = GaussianSource(0.0, n / m)
    q = ScalarQuantizer.uniform(1024, 6 * src.std)
    errs_g, errs_l = [], []
    for seed in range(5):
        x, A, y = _instance(n, m, q, seed=seed)
        xg = gamp_run(A, y, OutputChannel(q), GaussianPrior(), GampConfig(max_iters=100, stop_tol=1e-10)).x_hat
        xl = lmmse_estimate(A, q.decode(y), measurement_distortion(q, src), GaussianPrior())
        errs_g.append(np.mean((xg - x) ** 2))
        errs_l.append(np.mean((xl - x) ** 2))
    assert np.mean(errs_g) == pytest.approx(np.mean(errs_l), rel=0.1)


def test_gamp_improves_on_prior_and_records_history():
    q = ScalarQuantizer.uniform(16, 3 * np.sqrt(0.5))
    x, A, y = _instance(100, 200, q, seed=1)
    res = gamp_run(A, y, OutputChannel(q), GaussianPrior(), GampConfig(max_iters=50, stop_tol=1e-6), x_true=x)
    mses = [h.mse for h in res.history]
    assert mses[-1] < 0.05
    assert res.converged
    assert all(np.isfinite(h.tau_mean) for h in res.history)


def test_divergence_is_reported():
    q = ScalarQuantizer.uniform(4, 1.0)
    A = np.array([[np.nan]])
    with pytest.raises(GampDivergenceError):
        gamp_run(A, np.array([1]), OutputChannel(q), GaussianPrior())


def test_label_count_mismatch():
    q = ScalarQuantizer.uniform(4, 1.0)
    with pytest.raises(ValueError):
        gamp_run(np.ones((3, 2)), np.array([1, 2]), OutputChannel(q), GaussianPrior())
