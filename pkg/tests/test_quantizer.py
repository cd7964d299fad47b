import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgamp.quantizer import (
    CellSet,
    ConfigurationError,
    GaussianSource,
    Interval,
    InvalidLabelError,
    QuantizerError,
    ScalarQuantizer,
    measurement_distortion,
)
from conftest import quad_truncnorm


def test_encode_examples():
    q = ScalarQuantizer.regular([-1.0, 0.0, 1.0])
    assert q.encode(0.5) == 3
    assert ScalarQuantizer.modulo(1.0, 4).encode(5.3) == 2
    assert ScalarQuantizer.regular([0.0]).encode(0.0) == 2


def test_encode_vector_and_negative_modulo():
    q = ScalarQuantizer.modulo(1.0, 4)
    # floor(-0.5) = -1, -1 mod 4 = 3
    np.testing.assert_array_equal(q.encode(np.array([-0.5, 0.0, 3.99, 4.0])), [4, 1, 4, 1])


def test_encode_rejects_nonfinite():
    with pytest.raises(QuantizerError):
        ScalarQuantizer.regular([0.0]).encode(np.nan)
    with pytest.raises(QuantizerError):
        ScalarQuantizer.modulo(1.0, 2).encode(np.inf)


def test_cell_set_examples():
    q = ScalarQuantizer.regular([-1.0, 0.0, 1.0])
    assert q.cell_set(2) == CellSet.from_bounds([(-1, 0)])
    b = ScalarQuantizer.binned([-1.0, 0.0, 1.0], [1, 2, 1, 2])
    assert b.cell_set(1) == CellSet.from_bounds([(-np.inf, -1), (0, 1)])
    m = ScalarQuantizer.modulo(1.0, 2)
    ctx = GaussianSource(0.0, 0.25)  # window = +/- 8 * 0.5 = [-4, 4]
    assert m.cell_set(1, ctx) == CellSet.from_bounds([(-4, -3), (-2, -1), (0, 1), (2, 3)])


def test_cell_set_merges_adjacent_fine_cells():
    b = ScalarQuantizer.binned([-1.0, 0.0, 1.0], [1, 1, 2, 2])
    assert b.cell_set(1) == CellSet.from_bounds([(-np.inf, 0)])


def test_cell_set_errors():
    q = ScalarQuantizer.regular([0.0])
    with pytest.raises(InvalidLabelError):
        q.cell_set(3)
    with pytest.raises(ConfigurationError):
        ScalarQuantizer.modulo(1.0, 2).cell_set(1)


def test_invariants_rejected():
    with pytest.raises(QuantizerError):
        ScalarQuantizer.regular([0.0, 0.0])
    with pytest.raises(QuantizerError):
        ScalarQuantizer.binned([0.0, 1.0], [1, 3, 1])
    with pytest.raises(QuantizerError):
        ScalarQuantizer.modulo(0.0, 2)
    with pytest.raises(QuantizerError):
        Interval(1.0, 1.0)
    with pytest.raises(QuantizerError):
        CellSet.from_bounds([(0, 2), (1, 3)])
    with pytest.raises(QuantizerError):
        GaussianSource(0.0, 0.0)


def test_uniform_layout():
    q = ScalarQuantizer.uniform(4, 2.0)
    np.testing.assert_allclose(q.thresholds, [-1.0, 0.0, 1.0])
    np.testing.assert_allclose(q.levels, [-1.5, -0.5, 0.5, 1.5])


def test_distortion_examples():
    src = GaussianSource()
    assert measurement_distortion(ScalarQuantizer.regular([], [0.0]), src) == pytest.approx(1.0, rel=1e-14)
    r = math.sqrt(2 / math.pi)
    d = measurement_distortion(ScalarQuantizer.regular([0.0], [-r, r]), src)
    assert d == pytest.approx(1 - 2 / math.pi, rel=1e-12)


def test_distortion_uniform16_vs_quadrature():
    q = ScalarQuantizer.uniform(16, 3.0)
    lo = [-np.inf, *q.thresholds]
    hi = [*q.thresholds, np.inf]
    ref = 0.0
    for a, b, lv in zip(lo, hi, q.levels):
        mass, mean, var = quad_truncnorm([(a, b)], 0.0, 1.0)
        ref += mass * (var + (mean - lv) ** 2)
    assert measurement_distortion(q, GaussianSource()) == pytest.approx(ref, rel=1e-8)


def test_distortion_needs_levels():
    with pytest.raises(ConfigurationError):
        measurement_distortion(ScalarQuantizer.regular([0.0]), GaussianSource())


def test_decode_requires_regular_with_levels():
    with pytest.raises(ConfigurationError):
        ScalarQuantizer.regular([0.0]).decode([1])
    with pytest.raises(ConfigurationError):
        ScalarQuantizer.binned([0.0, 1.0], [1, 2, 1], [0, 1, 2]).decode([1])
    with pytest.raises(InvalidLabelError):
        ScalarQuantizer.uniform(4, 1.0).decode([5])


@pytest.mark.parametrize(
    "q",
    [
        ScalarQuantizer.uniform(8, 2.5),
        ScalarQuantizer.binned([-1.0, 0.0, 1.0], [1, 2, 1, 2], [-2, -0.5, 0.5, 2]),
        ScalarQuantizer.modulo(0.3, 5),
        ScalarQuantizer.regular([0.5]),
    ],
)
def test_dict_roundtrip(q):
    assert ScalarQuantizer.from_dict(q.to_dict()) == q


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(QuantizerError):
        ScalarQuantizer.from_dict({"kind": "regular", "thresholds": [0.0], "colour": 1})
    with pytest.raises(QuantizerError):
        ScalarQuantizer.from_dict({"kind": "weird"})


# -- properties ----------------------------------------------------------------

finite = st.floats(-50, 50, allow_nan=False)


@st.composite
def binned_quantizers(draw):
    t = sorted(set(draw(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=8))))
    k = draw(st.integers(1, len(t) + 1))
    binning = list(range(1, k + 1)) + draw(
        st.lists(st.integers(1, k), min_size=len(t) + 1 - k, max_size=len(t) + 1 - k)
    )
    binning = draw(st.permutations(binning))
    return ScalarQuantizer.binned(t, binning)


@settings(max_examples=200, deadline=None)
@given(binned_quantizers(), finite)
def test_encoded_point_lies_in_its_cell(q, s):
    assert s in q.cell_set(q.encode(s))


@settings(max_examples=200, deadline=None)
@given(binned_quantizers())
def test_cells_partition_the_line(q):
    sets = [q.cell_set(k) for k in range(1, q.n_labels + 1)]
    total = sum(len(c) for c in sets)
    lo = np.concatenate([c.bounds()[0] for c in sets])
    hi = np.concatenate([c.bounds()[1] for c in sets])
    order = np.argsort(lo)
    lo, hi = lo[order], hi[order]
    assert lo[0] == -np.inf and hi[-1] == np.inf
    np.testing.assert_array_equal(hi[:-1], lo[1:])
    assert total == len(lo)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 3.0), st.integers(1, 6), st.floats(-20, 20, allow_nan=False))
def test_modulo_point_in_cell(step, n, s):
    q = ScalarQuantizer.modulo(step, n)
    ctx = GaussianSource(s, 1.0)
    assert s in q.cell_set(q.encode(s), ctx)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 32), st.floats(0.1, 10.0), finite)
def test_uniform_decode_within_half_step(k, half, s):
    q = ScalarQuantizer.uniform(k, half)
    if abs(s) <= half:
        assert abs(q.decode(q.encode(s)) - s) <= half / k * (1 + 1e-12)
