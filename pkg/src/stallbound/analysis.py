"""Closed-form queueing quantities and the stall-duration tail bound.

Three layers live here:

* scalar operations (``shifted_exp_mgf``, ``pk_waiting_mgf`` and friends) that
  mirror the textbook formulas one stream at a time;
* a vectorised kernel, ``bound_arrays``, shared by numpy reporting and the JAX
  objective used for gradients;
* a brute-force oracle (``noncached_download_mgf_bruteforce``) that sums the
  per-segment MGFs before any geometric-series collapse.

Bound for file ``i`` with Chernoff parameter ``t``::

    Pr(stall >= sigma) <= sum_j pi_ij [ e^{-t sigma}
                                        + sum_nu p_ij,nu delta1
                                        + sum_beta q_ij,beta (delta2 + delta3 + delta4) ]

where each delta term already contains the per-segment playback discount
``exp(-t (sigma + d_s + (v - 1) tau))``.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from . import _sums
from .errors import (BoundUndefinedError, DomainError, InfeasibleStreamError,
                     InstabilityError, UndefinedMixtureError)
from .model import (STRICT_MARGIN, AuxVars, ControlPoint, SystemTopology, VideoCatalog,
                    aggregate_arrivals, check_dimensions, constraint_margins, queue_tables,
                    stream_rates)

__all__ = [
    "MgfValue", "QueueStats", "BoundReport", "shifted_exp_mgf", "stream_rates",
    "aggregate_arrivals", "load_intensity_e", "load_intensity_d", "load_intensity_dbar",
    "batch_service_mgf", "pk_waiting_mgf", "queue_stats", "cached_download_mgf",
    "noncached_download_mgf_bruteforce", "delta_terms", "sdtp_bound", "bound_report",
    "weighted_objective", "constraint_curvature_probe", "bound_arrays",
]


@dataclass(frozen=True)
class MgfValue:
    value: float
    defined: bool

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class QueueStats:
    rho: float
    B_at_t: MgfValue
    pk_at_t: MgfValue


@dataclass(frozen=True)
class BoundReport:
    """Per-file bound decomposition.

    ``delta*`` arrays are per stream: ``delta1`` has shape ``(r, m, emax)``, the
    others ``(r, m, dmax)``. The ``*_agg`` vectors are the routing-weighted sums
    that enter each file's bound.
    """

    sigma: float
    bound: np.ndarray
    raw_bound: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    delta3: np.ndarray
    delta4: np.ndarray
    delta1_agg: np.ndarray
    delta2_agg: np.ndarray
    delta3_agg: np.ndarray
    delta4_agg: np.ndarray
    objective: float
    raw_objective: float
    feasible: bool


# ---------------------------------------------------------------------------
# scalar operations


def shifted_exp_mgf(alpha, eta, t) -> MgfValue:
    """MGF of ``eta + Exp(alpha)`` at ``t``."""
    if alpha <= t:
        return MgfValue(float("inf"), False)
    return MgfValue(float(np.exp(-np.log1p(-t / alpha) + eta * t)), True)


def _load_intensity(table, j, k):
    work = float(np.dot(table.arr[:, j, k], table.seg[:, j]))
    if work <= 0:
        return 0.0
    alpha = float(table.alpha[j, k])
    if alpha <= 0:
        raise InfeasibleStreamError(
            f"traffic routed to zero-rate stream ({table.name}, {j}, {k})")
    return work * (float(table.eta[j]) + 1.0 / alpha)


def _tables_from(catalog, placement, schedule, rates):
    routed = catalog.lam[:, None] * schedule.pi
    cached = placement.counts.T.astype(float)
    origin = catalog.L[:, None] - cached
    arr_d = routed[:, :, None] * schedule.q
    arr_e = routed[:, :, None] * schedule.p
    from .model import QueueTable  # local to keep the public namespace small
    return {
        "e": QueueTable("e", rates.alpha_e, rates.eta_e, arr_e, cached, None),
        "d": QueueTable("d", rates.alpha_d, rates.eta_d, arr_d, origin, None),
        "dbar": QueueTable("dbar", rates.alpha_dbar, rates.eta_dbar, arr_d, origin, None),
    }


def load_intensity_e(catalog, placement, schedule, rates, j, nu) -> float:
    return _load_intensity(_tables_from(catalog, placement, schedule, rates)["e"], j, nu)


def load_intensity_d(catalog, placement, schedule, rates, j, beta) -> float:
    return _load_intensity(_tables_from(catalog, placement, schedule, rates)["d"], j, beta)


def load_intensity_dbar(catalog, placement, schedule, rates, j, beta) -> float:
    return _load_intensity(_tables_from(catalog, placement, schedule, rates)["dbar"], j, beta)


def _batch_minus_one(table, j, k, t):
    lam = table.arr[:, j, k].sum()
    if lam <= 0:
        raise UndefinedMixtureError(f"stream ({table.name}, {j}, {k}) has no arrivals")
    mgf = shifted_exp_mgf(float(table.alpha[j, k]), float(table.eta[j]), t)
    if not mgf.defined:
        return float("inf"), False
    log_m = np.log(mgf.value)
    mix = table.arr[:, j, k] / lam
    return float(np.dot(mix, np.expm1(table.seg[:, j] * log_m))), True


def batch_service_mgf(queue_class, catalog, placement, schedule, rates, j, k, t) -> MgfValue:
    """Mixture over files of the stream MGF raised to each file's segment count."""
    table = _tables_from(catalog, placement, schedule, rates)[queue_class]
    bm1, ok = _batch_minus_one(table, j, k, t)
    return MgfValue(1.0 + bm1, ok)


def pk_waiting_mgf(Lambda, rho, B_at_t, t) -> MgfValue:
    """Pollaczek-Khinchine transform ``(1-rho) t B / (t - Lambda (B - 1))``.

    The numerator keeps the batch factor ``B``, so the value is the transform of
    the queueing delay plus one batch service.
    """
    if rho >= 1:
        raise InstabilityError(f"load intensity {rho} >= 1")
    B = float(B_at_t.value if isinstance(B_at_t, MgfValue) else B_at_t)
    if isinstance(B_at_t, MgfValue) and not B_at_t.defined:
        return MgfValue(float("inf"), False)
    if t == 0:
        return MgfValue(1.0, True)
    den = t - Lambda * (B - 1.0)
    if den <= 0:
        return MgfValue(float("inf"), False)
    return MgfValue((1.0 - rho) * t * B / den, True)


def _file_t(point, i, t):
    return float(point.aux.t[i] if t is None else t)


def _stream_terms(topology, catalog, point, cls, j, k, t):
    """(log M, PK) for one stream at exponent ``t``; PK is None when undefined."""
    table = queue_tables(topology, catalog, point)[cls]
    mgf = shifted_exp_mgf(float(table.alpha[j, k]), float(table.eta[j]), t)
    if not mgf.defined:
        return None, None
    rho = _load_intensity(table, j, k)
    lam = float(table.Lambda[j, k])
    if lam <= 0:
        return float(np.log(mgf.value)), 1.0
    bm1, _ = _batch_minus_one(table, j, k, t)
    pk = pk_waiting_mgf(lam, rho, 1.0 + bm1, t)
    return float(np.log(mgf.value)), (pk.value if pk.defined else None)


def queue_stats(topology, catalog, point, cls, j, k, t) -> QueueStats:
    table = queue_tables(topology, catalog, point)[cls]
    rho = _load_intensity(table, j, k)
    bm1, ok = _batch_minus_one(table, j, k, t)
    B = MgfValue(1.0 + bm1, ok)
    return QueueStats(rho=rho, B_at_t=B,
                      pk_at_t=pk_waiting_mgf(float(table.Lambda[j, k]), rho, B, t))


def cached_download_mgf(topology, catalog, point, i, j, nu, g, t=None) -> MgfValue:
    """Transform of the completion time of cached segment ``g`` (g = 0 gives PK alone)."""
    t = _file_t(point, i, t)
    cached = int(point.placement.counts[j, i])
    if g < 0 or g > cached:
        raise DomainError(f"segment {g} is not cached for file {i} at server {j}")
    if t == 0:
        return MgfValue(1.0, True)
    log_m, pk = _stream_terms(topology, catalog, point, "e", j, nu, t)
    if pk is None:
        return MgfValue(float("inf"), False)
    return MgfValue(pk * np.exp(g * log_m), True)


def noncached_download_mgf_bruteforce(topology, catalog, point, i, j, beta, v, t=None):
    """Sum over split points ``y`` of the origin-path segment MGFs for segment ``v``.

    Term ``y = Lc`` covers the case where segment ``v`` waits only at the
    cache-to-edge stream; every ``y > Lc`` charges the origin stream's
    queueing for segment ``y`` plus the edge services from ``y`` to ``v``.
    """
    t = _file_t(point, i, t)
    cached = int(point.placement.counts[j, i])
    if not cached < v <= catalog.L[i]:
        raise DomainError(f"segment {v} of file {i} is not fetched from the origin")
    if t == 0:
        return MgfValue(float(v - cached + 1), True)
    log_d, pk_d = _stream_terms(topology, catalog, point, "d", j, beta, t)
    log_db, pk_db = _stream_terms(topology, catalog, point, "dbar", j, beta, t)
    if pk_d is None or pk_db is None:
        return MgfValue(float("inf"), False)
    total = pk_db * np.exp((v - cached) * log_db)
    for y in range(cached + 1, v + 1):
        total += pk_d * np.exp((y - cached - 1) * log_d + (v - y + 1) * log_db)
    return MgfValue(float(total), True)


def delta_terms(topology, catalog, point, i, j, beta, nu, t=None, v=None, sigma=None):
    """Closed-form (delta1, delta2, delta3, delta4) for one stream triple.

    ``v`` truncates the segment sum at segment ``v`` (default: all segments).
    Returns a tuple of floats, or ``None`` entries when an MGF is undefined.
    """
    t = _file_t(point, i, t)
    L = int(catalog.L[i])
    v = L if v is None else int(v)
    if not 0 <= v <= L:
        raise DomainError(f"v={v} outside 0..{L}")
    sigma = catalog.sigma if sigma is None else sigma
    cached = float(point.placement.counts[j, i])
    n_cached = min(v, cached)
    n_origin = max(v - cached, 0.0)
    tau = catalog.tau
    c0 = np.exp(-t * (sigma + catalog.d_s))
    c1 = c0 * np.exp(-t * tau * cached)

    d1 = 0.0
    if n_cached > 0:
        log_e, pk_e = _stream_terms(topology, catalog, point, "e", j, nu, t)
        if pk_e is None:
            return (None, None, None, None)
        d1 = c0 * pk_e * np.exp(log_e) * _sums.geom0(np, log_e - t * tau, n_cached)
    if n_origin <= 0:
        return (float(d1), 0.0, 0.0, 0.0)
    log_d, pk_d = _stream_terms(topology, catalog, point, "d", j, beta, t)
    log_db, pk_db = _stream_terms(topology, catalog, point, "dbar", j, beta, t)
    if pk_d is None or pk_db is None:
        return (float(d1), None, None, None)
    ell_d, ell_db = log_d - t * tau, log_db - t * tau
    m_db = np.exp(log_db)
    d2 = c1 * pk_db * m_db * _sums.geom0(np, ell_db, n_origin)
    d3 = c1 * pk_d * m_db * _sums.geom0(np, ell_d, n_origin)
    d4 = c1 * pk_d * m_db * _sums.tandem_sum(np, ell_d, ell_db, max(n_origin - 1, 0.0))
    return tuple(float(x) for x in (d1, d2, d3, d4))


# ---------------------------------------------------------------------------
# vectorised kernel


def _lam_bm1_numpy(arr, seg, log_m, chunk=256):
    r = log_m.shape[0]
    out = np.empty_like(log_m)
    for s in range(0, r, chunk):
        powered = np.expm1(seg[None, :, :, None] * log_m[s:s + chunk, None])
        out[s:s + chunk] = np.einsum("fjk,ifjk->ijk", arr, powered)
    return out


def _lam_bm1_jax(xp, arr, seg, log_m):
    powered = xp.expm1(seg[None, :, :, None] * log_m[:, None])
    return xp.einsum("fjk,ifjk->ijk", arr, powered)


def _queue_terms(xp, t, alpha, eta, arr, seg):
    """Per-(file exponent, server, stream) log M, PK factor and validity."""
    tcol = t[:, None, None]
    ok = alpha[None] > tcol
    a_safe = xp.where(ok, alpha[None], tcol + 1.0)
    log_m = -xp.log1p(-tcol / a_safe) + eta[None, :, None] * tcol
    log_m = xp.where(ok, log_m, 0.0)
    if xp is np:
        lam_bm1 = _lam_bm1_numpy(arr, seg, log_m)
    else:
        lam_bm1 = _lam_bm1_jax(xp, arr, seg, log_m)
    lam = arr.sum(axis=0)
    busy = lam > 0
    lam_safe = xp.where(busy, lam, 1.0)
    inv_alpha = 1.0 / xp.where(alpha > 0, alpha, 1.0)
    rho = xp.einsum("fjk,fj->jk", arr, seg) * (eta[:, None] + inv_alpha)
    den = tcol - lam_bm1
    valid = ok & (den > 0) & (rho[None] < 1)
    B = 1.0 + xp.where(busy[None], lam_bm1 / lam_safe[None], 0.0)
    pk = (1.0 - rho[None]) * tcol * B / xp.where(valid, den, 1.0)
    pk = xp.where(valid, pk, 1.0)
    return log_m, pk, valid


def bound_arrays(xp, *, pi, p, q, alpha_d, alpha_dbar, alpha_e, eta_d, eta_dbar, eta_e,
                 cached, t, L, lam, tau, d_s, sigma):
    """Raw per-file bounds and per-stream delta arrays.

    ``cached`` is ``(m, r)`` and may be fractional (relaxed placement). Entries
    whose MGFs do not exist are zeroed in the delta arrays and reported in the
    returned validity masks; callers decide whether that is an error.
    """
    routed = lam[:, None] * pi
    arr_e = routed[:, :, None] * p
    arr_d = routed[:, :, None] * q
    seg_e = cached.T
    seg_o = L[:, None] - seg_e

    log_e, pk_e, ok_e = _queue_terms(xp, t, alpha_e, eta_e, arr_e, seg_e)
    log_d, pk_d, ok_d = _queue_terms(xp, t, alpha_d, eta_d, arr_d, seg_o)
    log_db, pk_db, ok_db = _queue_terms(xp, t, alpha_dbar, eta_dbar, arr_d, seg_o)

    tcol = t[:, None, None]
    step = tcol * tau
    c0 = xp.exp(-t * (sigma + d_s))
    c1 = (c0[:, None] * xp.exp(-t[:, None] * tau * seg_e))[:, :, None]
    n_c = seg_e[:, :, None]
    n_o = seg_o[:, :, None]

    d1 = c0[:, None, None] * pk_e * xp.exp(log_e) * _sums.geom0(xp, log_e - step, n_c)
    m_db = xp.exp(log_db)
    ell_d, ell_db = log_d - step, log_db - step
    d2 = c1 * pk_db * m_db * _sums.geom0(xp, ell_db, n_o)
    d3 = c1 * pk_d * m_db * _sums.geom0(xp, ell_d, n_o)
    d4 = c1 * pk_d * m_db * _sums.tandem_sum(xp, ell_d, ell_db, xp.maximum(n_o - 1.0, 0.0))

    ok_o = ok_d & ok_db
    d1 = xp.where(ok_e, d1, 0.0)
    d2, d3, d4 = (xp.where(ok_o, x, 0.0) for x in (d2, d3, d4))

    a1 = xp.einsum("ij,ijk->i", pi, p * d1)
    a2 = xp.einsum("ij,ijk->i", pi, q * d2)
    a3 = xp.einsum("ij,ijk->i", pi, q * d3)
    a4 = xp.einsum("ij,ijk->i", pi, q * d4)
    raw = pi.sum(axis=1) * xp.exp(-t * sigma) + a1 + a2 + a3 + a4
    return {
        "raw": raw, "delta1": d1, "delta2": d2, "delta3": d3, "delta4": d4,
        "agg": (a1, a2, a3, a4), "ok_e": ok_e, "ok_o": ok_o,
    }


def kernel_inputs(topology: SystemTopology, catalog: VideoCatalog, point: ControlPoint):
    """Array arguments for ``bound_arrays`` (everything except ``sigma``)."""
    rates = stream_rates(topology, point.bandwidth)
    return dict(
        pi=point.schedule.pi, p=point.schedule.p, q=point.schedule.q,
        alpha_d=rates.alpha_d, alpha_dbar=rates.alpha_dbar, alpha_e=rates.alpha_e,
        eta_d=topology.eta_d, eta_dbar=topology.eta_dbar, eta_e=topology.eta_e,
        cached=point.placement.counts.astype(float), t=point.aux.t,
        L=catalog.L.astype(float), lam=catalog.lam, tau=catalog.tau, d_s=catalog.d_s,
    )


# ---------------------------------------------------------------------------
# public bound API


def _require_feasible(topology, catalog, point, files=None):
    margins, violations, bad_file = constraint_margins(topology, catalog, point)
    global_fams = ("simplex", "weight_sum", "placement_bounds", "capacity")
    broken = [f for f in global_fams if margins[f] < 0]
    if margins["stability"] <= 0 or margins["aux_positive"] <= 0:
        broken.append("stability" if margins["stability"] <= 0 else "aux_positive")
    files = range(catalog.r) if files is None else files
    bad = [i for i in files if bad_file[i]]
    if broken or bad:
        raise BoundUndefinedError(
            "bound undefined at infeasible point: " + (violations[0] if violations else
                                                       ", ".join(broken)),
            violations)


def bound_report(topology, catalog, point, sigma=None, check=True) -> BoundReport:
    sigma = catalog.sigma if sigma is None else float(sigma)
    check_dimensions(topology, catalog, point)
    if check:
        _require_feasible(topology, catalog, point)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = bound_arrays(np, sigma=sigma, **kernel_inputs(topology, catalog, point))
    raw = out["raw"]
    clipped = np.minimum(raw, 1.0)
    w = catalog.weight / catalog.weight.sum()
    return BoundReport(
        sigma=sigma, bound=clipped, raw_bound=raw,
        delta1=out["delta1"], delta2=out["delta2"], delta3=out["delta3"],
        delta4=out["delta4"],
        delta1_agg=out["agg"][0], delta2_agg=out["agg"][1],
        delta3_agg=out["agg"][2], delta4_agg=out["agg"][3],
        objective=float(np.dot(w, clipped)), raw_objective=float(np.dot(w, raw)),
        feasible=True,
    )


def sdtp_bound(topology, catalog, point, i, sigma=None):
    """Clipped bound for file ``i`` and its report row as a dict."""
    _require_feasible(topology, catalog, point, files=[i])
    rep = bound_report(topology, catalog, point, sigma, check=False)
    row = {
        "file_id": i, "sigma": rep.sigma, "raw_bound": float(rep.raw_bound[i]),
        "clipped_bound": float(rep.bound[i]),
        "delta1": float(rep.delta1_agg[i]), "delta2": float(rep.delta2_agg[i]),
        "delta3": float(rep.delta3_agg[i]), "delta4": float(rep.delta4_agg[i]),
        "feasible": True,
    }
    return float(rep.bound[i]), row


def weighted_objective(topology, catalog, point, sigma=None) -> float:
    """Normalised weighted sum of raw (unclipped) per-file bounds."""
    return bound_report(topology, catalog, point, sigma).raw_objective


# ---------------------------------------------------------------------------
# convexity witnesses


def constraint_curvature_probe(topology, catalog, point, constraint_id, variable_block,
                               grid, t=None):
    """Minimum central second difference of an MGF-existence constraint.

    ``constraint_id = (cls, j, k)`` names the stream. For ``variable_block="t"``
    the function is ``t -> sum_f arr_f M(t)^{seg_f} - (Lambda + t)``; for
    ``"alpha"`` the stream rate varies with ``t`` held fixed (default: the
    largest file exponent). ``grid`` must be evenly spaced.
    """
    cls, j, k = constraint_id
    table = queue_tables(topology, catalog, point)[cls]
    arr, seg = table.arr[:, j, k], table.seg[:, j]
    eta = float(table.eta[j])
    grid = np.asarray(grid, float)
    if grid.ndim != 1 or grid.size < 3:
        raise DomainError("grid needs at least three points")
    h = np.diff(grid)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise DomainError("grid must be evenly spaced")

    if variable_block == "t":
        alpha = float(table.alpha[j, k])
        if grid.max() >= alpha or grid.min() < 0:
            raise DomainError("t grid leaves the interval [0, alpha)")
        log_m = -np.log1p(-grid / alpha) + eta * grid
        ts = grid
    elif variable_block == "alpha":
        tt = float(point.aux.t.max() if t is None else t)
        if grid.min() <= tt:
            raise DomainError("alpha grid must stay above t")
        log_m = -np.log1p(-tt / grid) + eta * tt
        ts = np.full_like(grid, tt)
    else:
        raise DomainError(f"unknown variable block {variable_block!r}")
    values = np.exp(np.outer(log_m, seg)) @ arr - (arr.sum() + ts)
    second = (values[2:] - 2 * values[1:-1] + values[:-2]) / h[0] ** 2
    return float(second.min())


# ---------------------------------------------------------------------------
# differentiable objective


_JAX_CACHE = {}


def _jax_core():
    """Module-level jitted objective and gradient, compiled once per array shape."""
    if not _JAX_CACHE:
        from ._jax import jax, jnp

        def objective(params, const):
            out = bound_arrays(
                jnp, pi=params["pi"], p=params["p"], q=params["q"],
                alpha_d=params["w_d"] * const["alpha_d_base"][:, None],
                alpha_dbar=params["w_dbar"] * const["alpha_f_base"][:, None],
                alpha_e=params["w_e"] * const["alpha_f_base"][:, None],
                cached=params["cached"], t=params["t"], eta_d=const["eta_d"],
                eta_dbar=const["eta_dbar"], eta_e=const["eta_e"], L=const["L"],
                lam=const["lam"], tau=const["tau"], d_s=const["d_s"], sigma=const["sigma"])
            return jnp.dot(const["weight"], out["raw"])

        _JAX_CACHE["jnp"] = jnp
        _JAX_CACHE["value"] = jax.jit(objective)
        _JAX_CACHE["value_and_grad"] = jax.jit(jax.value_and_grad(objective))
    return _JAX_CACHE


def jax_constants(topology: SystemTopology, catalog: VideoCatalog, sigma=None):
    jnp = _jax_core()["jnp"]
    sigma = catalog.sigma if sigma is None else float(sigma)
    return {
        "alpha_d_base": jnp.asarray(topology.alpha_d_base),
        "alpha_f_base": jnp.asarray(topology.alpha_f_base),
        "eta_d": jnp.asarray(topology.eta_d), "eta_dbar": jnp.asarray(topology.eta_dbar),
        "eta_e": jnp.asarray(topology.eta_e), "L": jnp.asarray(catalog.L, dtype=float),
        "lam": jnp.asarray(catalog.lam), "tau": jnp.asarray(catalog.tau),
        "d_s": jnp.asarray(catalog.d_s), "sigma": jnp.asarray(sigma),
        "weight": jnp.asarray(catalog.weight / catalog.weight.sum()),
    }


def make_jax_objective(topology: SystemTopology, catalog: VideoCatalog, sigma=None):
    """Return ``f(params) -> weighted raw bound`` over the decision variables.

    ``params`` holds ``pi, p, q, w_d, w_dbar, w_e, cached, t`` as arrays.
    """
    core = _jax_core()
    const = jax_constants(topology, catalog, sigma)
    return lambda params: core["value"](params, const)


def make_jax_value_and_grad(topology: SystemTopology, catalog: VideoCatalog, sigma=None):
    core = _jax_core()
    const = jax_constants(topology, catalog, sigma)
    return lambda params: core["value_and_grad"](params, const)


def point_params(point: ControlPoint) -> dict:
    return {
        "pi": np.asarray(point.schedule.pi), "p": np.asarray(point.schedule.p),
        "q": np.asarray(point.schedule.q), "w_d": np.asarray(point.bandwidth.w_d),
        "w_dbar": np.asarray(point.bandwidth.w_dbar), "w_e": np.asarray(point.bandwidth.w_e),
        "cached": point.placement.counts.astype(float), "t": np.asarray(point.aux.t),
    }


def numpy_file_bounds(topology, catalog, params, sigma=None):
    """Per-file raw bounds for a parameter dict (no feasibility checks)."""
    sigma = catalog.sigma if sigma is None else float(sigma)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = bound_arrays(
            np, pi=params["pi"], p=params["p"], q=params["q"],
            alpha_d=params["w_d"] * topology.alpha_d_base[:, None],
            alpha_dbar=params["w_dbar"] * topology.alpha_f_base[:, None],
            alpha_e=params["w_e"] * topology.alpha_f_base[:, None],
            eta_d=topology.eta_d, eta_dbar=topology.eta_dbar, eta_e=topology.eta_e,
            cached=params["cached"], t=params["t"], L=catalog.L.astype(float),
            lam=catalog.lam, tau=catalog.tau, d_s=catalog.d_s, sigma=sigma)
    return out["raw"]


def numpy_objective(topology, catalog, params, sigma=None):
    """Same function as ``make_jax_objective`` evaluated with numpy (no checks)."""
    w = catalog.weight / catalog.weight.sum()
    return float(np.dot(w, numpy_file_bounds(topology, catalog, params, sigma)))


def with_t(point: ControlPoint, t) -> ControlPoint:
    from dataclasses import replace
    return replace(point, aux=AuxVars(np.asarray(t, float)))

