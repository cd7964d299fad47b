import math

import mpmath as mp
import pytest


def quad_truncnorm_log(intervals, mean, variance, dps=40):
    """Adaptive-quadrature oracle: (log_mass, mean, variance) of N(mean, variance) on a union.

    Works in extended precision on the standardized variable.  The density is
    rescaled by its value at the point of the union nearest the centre, and
    each interval is split on the local decay scale so the adaptive rule never
    sees an integrand spanning hundreds of orders of magnitude.
    """
    with mp.workdps(dps):
        mu = mp.mpf(mean)
        sd = mp.sqrt(mp.mpf(variance))

        def conv(v):
            return (mp.mpf(v) - mu) / sd if math.isfinite(v) else (mp.inf if v > 0 else -mp.inf)

        std = [(conv(lo), conv(hi)) for lo, hi in intervals]
        ref = min(mp.mpf(0) if a <= 0 <= b else min(abs(a), abs(b)) for a, b in std)

        def g(t):
            return mp.exp(-(t * t - ref * ref) / 2)

        def pieces(a, b):
            step = 1 / (ref + 1)
            lo = a if mp.isfinite(a) else min(b, -ref) - 12
            hi = b if mp.isfinite(b) else max(a, ref) + 12
            n = int(min(400, mp.ceil((hi - lo) / step)))
            pts = [lo + (hi - lo) * k / n for k in range(n + 1)]
            if not mp.isfinite(a):
                pts = [a] + pts
            if not mp.isfinite(b):
                pts = pts + [b]
            return pts

        def integral(f):
            return mp.fsum(mp.quad(f, pieces(a, b)) for a, b in std)

        z = integral(g)
        m = integral(lambda t: t * g(t)) / z
        v = integral(lambda t: (t - m) ** 2 * g(t)) / z
        log_mass = mp.log(z) - ref * ref / 2 - mp.log(mp.sqrt(2 * mp.pi))
        return float(log_mass), float(mu + sd * m), float(sd * sd * v)


def quad_truncnorm(intervals, mean, variance, dps=40):
    """Same as :func:`quad_truncnorm_log` with the mass itself (may underflow)."""
    lm, m, v = quad_truncnorm_log(intervals, mean, variance, dps)
    return math.exp(lm), m, v


@pytest.fixture
def quad_oracle():
    return quad_truncnorm
