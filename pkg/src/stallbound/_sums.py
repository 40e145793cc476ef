"""Finite exponential sums with cancellation-free closed forms.

All helpers take the array namespace ``xp`` (``numpy`` or ``jax.numpy``) so the
same formulas serve the numpy reporting path and the differentiable optimizer
path. Segment counts ``n`` may be real-valued (relaxed cache placement); the
closed forms are the analytic continuation of the integer sums.

Notation: ``S0(l, n) = sum_{k=0}^{n-1} e^{k l}`` and
``D(l1, l2, n) = sum_{a>=1, b>=0, a+b<=n} e^{a l2 + b l1}``.
"""

from __future__ import annotations

# exprel switches to its Taylor polynomial below this |x|
_EXPREL_SWITCH = 1e-3
# D uses its bivariate Taylor expansion when n * (largest singular variable) is below
# this: the closed forms then lose about eps / 1e-3 and the series about 1e-3**4 / 120
_CORNER = 1e-3


def exprel(xp, x):
    """``expm1(x) / x`` with the removable singularity at 0 filled in."""
    small = xp.abs(x) < _EXPREL_SWITCH
    xs = xp.where(small, 1.0, x)
    direct = xp.expm1(xs) / xs
    series = 1.0 + x * (1.0 / 2 + x * (1.0 / 6 + x * (1.0 / 24 + x / 120)))
    return xp.where(small, series, direct)


def geom0(xp, ell, n):
    """``S0(ell, n)``; equals ``n`` at ``ell = 0`` and ``0`` at ``n = 0``."""
    return n * exprel(xp, n * ell) / exprel(xp, ell)


def geom1(xp, ell, n):
    """``sum_{k=1}^{n} e^{k ell}``."""
    return xp.exp(ell) * geom0(xp, ell, n)


def _triangle_sums(n):
    # sum over {a>=1, b>=0, a+b<=n} of a^p b^q, keyed by (p, q)
    return {
        (0, 0): n * (n + 1) / 2,
        (0, 1): n * (n - 1) * (n + 1) / 6,
        (0, 2): n**2 * (n - 1) * (n + 1) / 12,
        (0, 3): n * (n - 1) * (n + 1) * (3 * n**2 - 2) / 60,
        (1, 0): n * (n + 1) * (n + 2) / 6,
        (1, 1): n * (n - 1) * (n + 1) * (n + 2) / 24,
        (1, 2): n * (n - 1) * (n + 1) * (n + 2) * (2 * n + 1) / 120,
        (2, 0): n * (n + 1) ** 2 * (n + 2) / 12,
        (2, 1): n * (n - 1) * (n + 1) * (n + 2) * (2 * n + 1) / 120,
        (3, 0): n * (n + 1) * (n + 2) * (3 * n**2 + 6 * n + 1) / 60,
    }


def tandem_sum(xp, ell1, ell2, n):
    """``D(ell1, ell2, n)``, the double sum behind the origin-path terms.

    Three algebraically equivalent closed forms exist, each singular in one of
    ``ell1 - ell2``, ``ell2`` or ``ell1``; the form whose singular variable is
    largest in magnitude is used, which bounds the relative cancellation error
    by roughly ``eps / (n max(|ell1 - ell2|, |ell2|, |ell1|))``. When that
    product is tiny a cubic Taylor expansion around the origin takes over.
    """
    diff = ell1 - ell2
    a_diff, a2, a1 = xp.abs(diff), xp.abs(ell2), xp.abs(ell1)
    use_f1 = (a_diff >= a2) & (a_diff >= a1)
    use_f2 = ~use_f1 & (a2 >= a1)
    use_f3 = ~use_f1 & ~use_f2
    corner = n * xp.maximum(a_diff, xp.maximum(a2, a1)) < _CORNER

    # F1: [S1(l1) - S1(l2)] / expm1(l1 - l2)
    d1 = xp.where(use_f1 & ~corner, diff, 1.0)
    f1 = (geom1(xp, ell1, n) - geom1(xp, ell2, n)) / xp.expm1(d1)

    # F2: e^{l2} [e^{n l2} S0(l1 - l2) - S0(l1)] / expm1(l2)
    s2 = xp.where(use_f2 & ~corner, ell2, 1.0)
    f2 = xp.exp(ell2) * (
        xp.exp(n * ell2) * geom0(xp, diff, n) - geom0(xp, ell1, n)
    ) / xp.expm1(s2)

    # F3: [e^{(n+1) l1} S1(l2 - l1) - S1(l2)] / expm1(l1)
    s3 = xp.where(use_f3 & ~corner, ell1, 1.0)
    f3 = (
        xp.exp((n + 1) * ell1) * geom1(xp, -diff, n) - geom1(xp, ell2, n)
    ) / xp.expm1(s3)

    tri = _triangle_sums(n)
    series = tri[(0, 0)]
    series = series + ell2 * tri[(1, 0)] + ell1 * tri[(0, 1)]
    series = series + 0.5 * (
        ell2**2 * tri[(2, 0)] + 2 * ell2 * ell1 * tri[(1, 1)] + ell1**2 * tri[(0, 2)]
    )
    series = series + (
        ell2**3 * tri[(3, 0)]
        + 3 * ell2**2 * ell1 * tri[(2, 1)]
        + 3 * ell2 * ell1**2 * tri[(1, 2)]
        + ell1**3 * tri[(0, 3)]
    ) / 6

    out = xp.where(use_f1, f1, xp.where(use_f2, f2, f3))
    return xp.where(corner, series, out)
