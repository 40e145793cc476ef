import mpmath as mp
import numpy as np
from hypothesis import given, settings, strategies as st

from stallbound import _sums

mp.mp.dps = 40


def geom0_ref(ell, n):
    return mp.fsum(mp.e ** (mp.mpf(ell) * k) for k in range(n))


def tandem_ref(l1, l2, n):
    l1, l2 = mp.mpf(l1), mp.mpf(l2)
    return mp.fsum(mp.e ** (l1 * a + l2 * b) for b in range(1, n + 1) for a in range(n - b + 1))


def rel(a, b):
    return abs(a - float(b)) / max(abs(float(b)), 1e-300)


ells = st.one_of(st.floats(-3, 3), st.floats(-1e-6, 1e-6), st.just(0.0))


@given(ells, st.integers(0, 30))
def test_geom0_matches_extended_precision(ell, n):
    got = float(_sums.geom0(np, np.float64(ell), float(n)))
    if n == 0:
        assert got == 0.0
    else:
        assert rel(got, geom0_ref(ell, n)) < 1e-12


@given(ells, ells, st.integers(0, 25))
@settings(max_examples=300)
def test_tandem_sum_matches_extended_precision(l1, l2, n):
    got = float(_sums.tandem_sum(np, np.float64(l1), np.float64(l2), float(n)))
    ref = tandem_ref(l1, l2, n)
    if n == 0:
        assert got == 0.0
    else:
        assert rel(got, ref) < 1e-10


def test_tandem_sum_near_coincident_exponents():
    for l1 in (0.2, -0.7, 1e-3):
        for gap in (1e-4, 1e-7, 1e-10, 0.0):
            got = float(_sums.tandem_sum(np, np.float64(l1), np.float64(l1 + gap), 9.0))
            assert rel(got, tandem_ref(l1, l1 + gap, 9)) < 1e-10


def test_exprel_continuity():
    xs = np.array([-1e-3, -1e-9, 0.0, 1e-9, 1e-3])
    got = _sums.exprel(np, xs)
    ref = [float(mp.expm1(mp.mpf(x)) / x) if x else 1.0 for x in xs]
    np.testing.assert_allclose(got, ref, rtol=1e-14)


def test_tandem_sum_across_scales_and_long_files():
    rng = np.random.default_rng(0)
    for _ in range(150):
        n = int(rng.integers(1, 120))
        l1, l2 = rng.uniform(-1, 1, 2) * 10 ** rng.uniform(-9, 0)
        got = float(_sums.tandem_sum(np, np.float64(l1), np.float64(l2), float(n)))
        assert rel(got, tandem_ref(l1, l2, n)) < 1e-11
