"""Domain types, feasibility checking and projection onto the feasible set.

Per-server stream counts may differ, so stream-indexed arrays are padded to the
largest count across servers; padded entries must be zero and are ignored.
Stream classes are ``"d"`` (datacenter to cache), ``"dbar"`` (cache to edge,
non-cached traffic) and ``"e"`` (cache to edge, cached traffic).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatchError, InfeasibleInstanceError

SIMPLEX_TOL = 1e-9
STRICT_MARGIN = 1e-6
DEFAULT_CACHE_FRACTION = 0.35


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SystemTopology:
    """Cache servers, their stream counts, link rates (1/s) and shifts (s)."""

    d: np.ndarray
    e: np.ndarray
    alpha_d_base: np.ndarray
    alpha_f_base: np.ndarray
    eta_d: np.ndarray
    eta_dbar: np.ndarray
    eta_e: np.ndarray

    def __post_init__(self):
        for name in ("d", "e"):
            object.__setattr__(self, name, _frozen(getattr(self, name), int))
        for name in ("alpha_d_base", "alpha_f_base", "eta_d", "eta_dbar", "eta_e"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        m = self.d.shape[0]
        if m < 1 or self.d.ndim != 1:
            raise ValueError("topology needs at least one server")
        for name in ("e", "alpha_d_base", "alpha_f_base", "eta_d", "eta_dbar", "eta_e"):
            if getattr(self, name).shape != (m,):
                raise DimensionMismatchError(f"{name} must have shape ({m},)")
        if (self.d < 1).any() or (self.e < 1).any():
            raise ValueError("every server needs d_j >= 1 and e_j >= 1")
        if not ((self.alpha_d_base > 0).all() and (self.alpha_f_base > 0).all()):
            raise ValueError("base rates must be positive")
        for name in ("eta_d", "eta_dbar", "eta_e"):
            if (getattr(self, name) < 0).any():
                raise ValueError(f"{name} must be nonnegative")

    @property
    def m(self) -> int:
        return int(self.d.shape[0])

    @property
    def dmax(self) -> int:
        return int(self.d.max())

    @property
    def emax(self) -> int:
        return int(self.e.max())

    @property
    def f(self) -> np.ndarray:
        return self.d + self.e

    @property
    def d_mask(self) -> np.ndarray:
        return np.arange(self.dmax)[None, :] < self.d[:, None]

    @property
    def e_mask(self) -> np.ndarray:
        return np.arange(self.emax)[None, :] < self.e[:, None]

    @classmethod
    def uniform(cls, m, d, e, alpha_d, alpha_f, eta=0.0):
        """Homogeneous stream counts; rates may be scalars or per-server."""
        return cls(
            d=np.full(m, d),
            e=np.full(m, e),
            alpha_d_base=np.broadcast_to(np.asarray(alpha_d, float), (m,)),
            alpha_f_base=np.broadcast_to(np.asarray(alpha_f, float), (m,)),
            eta_d=np.full(m, float(eta)),
            eta_dbar=np.full(m, float(eta)),
            eta_e=np.full(m, float(eta)),
        )


@dataclass(frozen=True)
class VideoCatalog:
    """Per-file segment counts, Poisson rates and weights plus playback globals."""

    L: np.ndarray
    lam: np.ndarray
    weight: np.ndarray
    tau: float
    d_s: float
    sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "L", _frozen(self.L, int))
        object.__setattr__(self, "lam", _frozen(self.lam))
        object.__setattr__(self, "weight", _frozen(self.weight))
        for name in ("tau", "d_s", "sigma"):
            object.__setattr__(self, name, float(getattr(self, name)))
        r = self.L.shape[0]
        if r < 1 or self.L.ndim != 1:
            raise ValueError("catalog needs at least one file")
        if self.lam.shape != (r,) or self.weight.shape != (r,):
            raise DimensionMismatchError("lam and weight must match L")
        if (self.L < 1).any():
            raise ValueError("every file needs at least one segment")
        if not (self.lam > 0).all():
            raise ValueError("arrival rates must be positive")
        if (self.weight < 0).any() or self.weight.sum() <= 0:
            raise ValueError("weights must be nonnegative with a positive sum")
        if self.tau <= 0 or self.d_s < 0 or self.sigma < 0:
            raise ValueError("need tau > 0, d_s >= 0, sigma >= 0")

    @property
    def r(self) -> int:
        return int(self.L.shape[0])


@dataclass(frozen=True)
class CachePlacement:
    """``counts[j, i]``: leading segments of file ``i`` cached at server ``j``."""

    counts: np.ndarray
    capacity: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.size and not np.array_equal(counts, np.round(counts)):
            raise ValueError("cache placement counts must be integers")
        object.__setattr__(self, "counts", _frozen(counts, int))
        object.__setattr__(self, "capacity", _frozen(self.capacity, int))
        if self.counts.ndim != 2 or self.capacity.shape != (self.counts.shape[0],):
            raise DimensionMismatchError("counts must be (m, r) and capacity (m,)")


def default_capacity(topology: SystemTopology, catalog: VideoCatalog,
                     fraction: float = DEFAULT_CACHE_FRACTION) -> np.ndarray:
    return np.full(topology.m, int(np.floor(fraction * catalog.L.sum())))


@dataclass(frozen=True)
class ScheduleMatrices:
    """Server choice ``pi (r, m)``, cached-stream choice ``p (r, m, emax)``,
    origin-stream choice ``q (r, m, dmax)``."""

    pi: np.ndarray
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        for name in ("pi", "p", "q"):
            arr = _frozen(getattr(self, name))
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class BandwidthWeights:
    w_d: np.ndarray
    w_dbar: np.ndarray
    w_e: np.ndarray

    def __post_init__(self):
        for name in ("w_d", "w_dbar", "w_e"):
            arr = _frozen(getattr(self, name))
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class AuxVars:
    t: np.ndarray

    def __post_init__(self):
        t = _frozen(self.t)
        if not (np.isfinite(t).all() and (t > 0).all()):
            raise ValueError("auxiliary variables must be finite and positive")
        object.__setattr__(self, "t", t)


@dataclass(frozen=True)
class ControlPoint:
    schedule: ScheduleMatrices
    bandwidth: BandwidthWeights
    placement: CachePlacement
    aux: AuxVars


@dataclass(frozen=True)
class StreamRates:
    """Effective per-stream rates (1/s) with the per-server shifts carried along."""

    alpha_d: np.ndarray
    alpha_dbar: np.ndarray
    alpha_e: np.ndarray
    eta_d: np.ndarray
    eta_dbar: np.ndarray
    eta_e: np.ndarray


@dataclass(frozen=True)
class AggregateArrivals:
    Lambda_d: np.ndarray
    Lambda_dbar: np.ndarray
    Lambda_e: np.ndarray


@dataclass
class FeasibilityReport:
    feasible: bool
    margins: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.feasible


# ---------------------------------------------------------------------------
# shape checks and queue tables


def check_dimensions(topology: SystemTopology, catalog: VideoCatalog, point: ControlPoint):
    r, m, D, E = catalog.r, topology.m, topology.dmax, topology.emax
    expected = {
        "pi": (point.schedule.pi, (r, m)),
        "p": (point.schedule.p, (r, m, E)),
        "q": (point.schedule.q, (r, m, D)),
        "w_d": (point.bandwidth.w_d, (m, D)),
        "w_dbar": (point.bandwidth.w_dbar, (m, D)),
        "w_e": (point.bandwidth.w_e, (m, E)),
        "placement": (point.placement.counts, (m, r)),
        "t": (point.aux.t, (r,)),
    }
    for name, (arr, shape) in expected.items():
        if arr.shape != shape:
            raise DimensionMismatchError(f"{name} has shape {arr.shape}, expected {shape}")
    pads = [
        ("p", point.schedule.p, topology.e_mask[None]),
        ("q", point.schedule.q, topology.d_mask[None]),
        ("w_d", point.bandwidth.w_d, topology.d_mask),
        ("w_dbar", point.bandwidth.w_dbar, topology.d_mask),
        ("w_e", point.bandwidth.w_e, topology.e_mask),
    ]
    for name, arr, mask in pads:
        if np.any(np.broadcast_to(~mask, arr.shape) & (arr != 0)):
            raise DimensionMismatchError(f"{name} has nonzero entries on padded streams")


def stream_rates(topology: SystemTopology, bandwidth: BandwidthWeights) -> StreamRates:
    return StreamRates(
        alpha_d=bandwidth.w_d * topology.alpha_d_base[:, None],
        alpha_dbar=bandwidth.w_dbar * topology.alpha_f_base[:, None],
        alpha_e=bandwidth.w_e * topology.alpha_f_base[:, None],
        eta_d=topology.eta_d,
        eta_dbar=topology.eta_dbar,
        eta_e=topology.eta_e,
    )


def aggregate_arrivals(catalog: VideoCatalog, schedule: ScheduleMatrices) -> AggregateArrivals:
    routed = catalog.lam[:, None] * schedule.pi
    lam_d = np.einsum("ij,ijb->jb", routed, schedule.q)
    lam_e = np.einsum("ij,ijn->jn", routed, schedule.p)
    return AggregateArrivals(Lambda_d=lam_d, Lambda_dbar=lam_d.copy(), Lambda_e=lam_e)


@dataclass(frozen=True)
class QueueTable:
    """One stream class flattened for vectorised evaluation.

    ``arr[f, j, k]`` is file ``f``'s arrival rate at stream ``(j, k)`` and
    ``seg[f, j]`` the number of segments that file sends through this class at
    server ``j``.
    """

    name: str
    alpha: np.ndarray
    eta: np.ndarray
    arr: np.ndarray
    seg: np.ndarray
    mask: np.ndarray

    @property
    def Lambda(self):
        return self.arr.sum(axis=0)

    @property
    def used(self):
        """``used[i, j, k]``: file ``i`` sends work through stream ``(j, k)``."""
        return (self.arr > 0) & (self.seg[:, :, None] > 0)

    def rho(self):
        work = np.einsum("fjk,fj->jk", self.arr, self.seg)
        with np.errstate(divide="ignore", invalid="ignore"):
            mean = self.eta[:, None] + np.where(self.alpha > 0, 1.0 / self.alpha, np.inf)
            return np.where(work > 0, work * mean, 0.0)

    def batch_mgf_minus_one(self, t, chunk=2048):
        """``B(t_i) - 1`` for each file's exponent, shape ``(r, m, K)``.

        Entries where ``t_i >= alpha`` are returned as ``inf``; streams with no
        arrivals return 0.
        """
        r = t.shape[0]
        lam = self.Lambda
        with np.errstate(divide="ignore", invalid="ignore"):
            mix = np.where(lam > 0, self.arr / np.where(lam > 0, lam, 1.0), 0.0)
        out = np.empty((r,) + self.alpha.shape)
        for start in range(0, r, chunk):
            ti = t[start:start + chunk, None, None]
            ok = self.alpha[None] > ti
            a_safe = np.where(ok, self.alpha[None], ti + 1.0)
            log_m = -np.log1p(-ti / a_safe) + self.eta[None, :, None] * ti
            # (i, f, j, k)
            powered = np.expm1(self.seg[None, :, :, None] * log_m[:, None])
            bm1 = np.einsum("fjk,ifjk->ijk", mix, powered)
            out[start:start + chunk] = np.where(ok, bm1, np.inf)
        return out


def queue_tables(topology: SystemTopology, catalog: VideoCatalog, point: ControlPoint):
    rates = stream_rates(topology, point.bandwidth)
    sched = point.schedule
    routed = catalog.lam[:, None] * sched.pi
    cached = point.placement.counts.T.astype(float)
    origin = catalog.L[:, None] - cached
    arr_d = routed[:, :, None] * sched.q
    arr_e = routed[:, :, None] * sched.p
    return {
        "e": QueueTable("e", rates.alpha_e, rates.eta_e, arr_e, cached, topology.e_mask),
        "d": QueueTable("d", rates.alpha_d, rates.eta_d, arr_d, origin, topology.d_mask),
        "dbar": QueueTable("dbar", rates.alpha_dbar, rates.eta_dbar, arr_d, origin,
                           topology.d_mask),
    }


# ---------------------------------------------------------------------------
# feasibility


def _min_or(values, default=np.inf):
    values = np.asarray(values, float)
    return float(values.min()) if values.size else float(default)


def constraint_margins(topology, catalog, point):
    """Worst margin per constraint family; negative means violated.

    Also returns the list of human-readable violations and, per file, whether
    any rate or MGF-existence constraint fails (used when shrinking ``t``).
    """
    check_dimensions(topology, catalog, point)
    sched, bw, pl, t = point.schedule, point.bandwidth, point.placement, point.aux.t
    margins, violations = {}, []

    dev = [np.abs(sched.pi.sum(1) - 1),
           np.abs(sched.p.sum(2) - 1).ravel(),
           np.abs(sched.q.sum(2) - 1).ravel()]
    neg = min(sched.pi.min(), sched.p.min(), sched.q.min())
    margins["simplex"] = min(SIMPLEX_TOL - max(float(x.max()) for x in dev),
                             float(neg) + SIMPLEX_TOL)

    dsum = bw.w_d.sum(1)
    fsum = bw.w_dbar.sum(1) + bw.w_e.sum(1)
    wneg = min(bw.w_d.min(), bw.w_dbar.min(), bw.w_e.min())
    margins["weight_sum"] = min(float((1 - dsum).min()), float((1 - fsum).min()),
                                float(wneg)) + SIMPLEX_TOL

    counts = pl.counts
    margins["placement_bounds"] = min(float(counts.min()),
                                      float((catalog.L[None, :] - counts).min()))
    margins["capacity"] = float((pl.capacity - counts.sum(1)).min())
    margins["aux_positive"] = float(t.min())

    bad_file = np.zeros(catalog.r, bool)
    stab, rate, mgf = [], [], []
    for name, qt in queue_tables(topology, catalog, point).items():
        rho = qt.rho()
        busy = rho > 0
        stab.append(np.where(busy, 1 - STRICT_MARGIN - rho, np.inf).ravel())
        for j, k in zip(*np.nonzero(busy & (rho >= 1 - STRICT_MARGIN))):
            violations.append(f"stability: rho={rho[j, k]:.6g} at stream ({name}, {j}, {k})")

        used = qt.used
        rate_gap = qt.alpha[None] - t[:, None, None] - STRICT_MARGIN
        rate.append(rate_gap[used])
        bm1 = qt.batch_mgf_minus_one(t)
        with np.errstate(invalid="ignore"):
            mgf_gap = t[:, None, None] - qt.Lambda[None] * bm1 - STRICT_MARGIN
        mgf_gap = np.where(np.isnan(mgf_gap), -np.inf, mgf_gap)
        mgf.append(mgf_gap[used])
        rate_bad = used & (rate_gap <= 0)
        mgf_bad = used & (mgf_gap <= 0)
        bad_file |= (rate_bad | mgf_bad).any(axis=(1, 2))
        for i, j, k in zip(*np.nonzero(rate_bad)):
            violations.append(f"rate: t exceeds rate for file {i} at stream ({name}, {j}, {k})")
        for i, j, k in zip(*np.nonzero(mgf_bad & ~rate_bad)):
            violations.append(f"mgf: waiting-time MGF undefined for file {i} at stream "
                              f"({name}, {j}, {k})")

    margins["stability"] = _min_or(np.concatenate(stab))
    margins["rate"] = _min_or(np.concatenate(rate))
    margins["mgf"] = _min_or(np.concatenate(mgf))

    for fam in ("simplex", "weight_sum", "placement_bounds", "capacity"):
        if margins[fam] < 0:
            violations.insert(0, f"{fam}: margin {margins[fam]:.6g}")
    if margins["aux_positive"] <= 0:
        violations.insert(0, "aux_positive: t must be positive")
    return margins, violations, bad_file


def check_feasibility(topology: SystemTopology, catalog: VideoCatalog,
                      point: ControlPoint) -> FeasibilityReport:
    margins, violations, _ = constraint_margins(topology, catalog, point)
    strict = ("stability", "rate", "mgf", "aux_positive")
    feasible = all(margins[k] > 0 if k in strict else margins[k] >= 0 for k in margins)
    return FeasibilityReport(feasible=feasible, margins=margins, violations=violations)


# ---------------------------------------------------------------------------
# projections


def project_simplex(v, total=1.0):
    """Euclidean projection of a vector onto ``{x >= 0, sum(x) = total}``."""
    v = np.asarray(v, float)
    return project_simplex_rows(v[None], np.ones((1, v.size), bool), total)[0]


def project_simplex_rows(v, mask, total=1.0):
    """Row-wise simplex projection over the entries where ``mask`` is true.

    Masked-out entries come back as zero; rows with no valid entry are zero.
    """
    v = np.asarray(v, float)
    mask = np.broadcast_to(mask, v.shape)
    flat_v = v.reshape(-1, v.shape[-1])
    flat_m = mask.reshape(-1, v.shape[-1])
    u = np.where(flat_m, flat_v, -np.inf)
    u = -np.sort(-u, axis=1)
    valid = np.isfinite(u)
    css = np.cumsum(np.where(valid, u, 0.0), axis=1)
    k = np.arange(1, u.shape[1] + 1)
    with np.errstate(invalid="ignore"):
        cond = valid & (u - (css - total) / k > 0)
    rho = np.where(cond.any(1), u.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1), 0)
    theta = (css[np.arange(len(rho)), rho] - total) / (rho + 1)
    out = np.where(flat_m, np.maximum(flat_v - theta[:, None], 0.0), 0.0)
    out[~flat_m.any(1)] = 0.0
    return out.reshape(v.shape)


def project_capped_simplex_rows(v, mask, lower=None, total=1.0):
    """Projection onto ``{x >= lower, sum(x) <= total}`` row-wise over ``mask``."""
    v = np.asarray(v, float)
    mask = np.broadcast_to(mask, v.shape)
    lo = np.zeros_like(v) if lower is None else np.broadcast_to(lower, v.shape)
    lo = np.where(mask, lo, 0.0)
    room = total - lo.sum(-1)
    y = np.where(mask, v - lo, 0.0)
    pos = np.maximum(y, 0.0)
    inside = pos.sum(-1) <= room
    scale = np.maximum(room, 0.0)
    projected = project_simplex_rows(y / np.where(scale > 0, scale, 1.0)[..., None], mask)
    projected = projected * scale[..., None]
    out = np.where(inside[..., None], pos, projected) + lo
    return np.where(mask, out, 0.0)


def project_box_budget(v, upper, budget, iters=200):
    """Projection of each row onto ``{0 <= x <= upper, sum(x) <= budget}``."""
    v = np.asarray(v, float)
    upper = np.broadcast_to(upper, v.shape)
    budget = np.asarray(budget, float).reshape(-1)
    x = np.clip(v, 0.0, upper)
    over = x.sum(1) > budget
    if not over.any():
        return x
    lo = np.zeros(v.shape[0])
    hi = np.maximum(v.max(1), 0.0) + 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        s = np.clip(v - mid[:, None], 0.0, upper).sum(1)
        lo = np.where(s > budget, mid, lo)
        hi = np.where(s > budget, hi, mid)
    shifted = np.clip(v - hi[:, None], 0.0, upper)
    return np.where(over[:, None], shifted, x)


def project_schedule(topology, schedule):
    m = topology.m
    return ScheduleMatrices(
        pi=project_simplex_rows(schedule.pi, np.ones(m, bool)),
        p=project_simplex_rows(schedule.p, topology.e_mask[None]),
        q=project_simplex_rows(schedule.q, topology.d_mask[None]),
    )


def project_bandwidth(topology, bandwidth):
    w_d = project_capped_simplex_rows(bandwidth.w_d, topology.d_mask)
    D = topology.dmax
    joint = np.concatenate([bandwidth.w_dbar, bandwidth.w_e], axis=1)
    jmask = np.concatenate([topology.d_mask, topology.e_mask], axis=1)
    joint = project_capped_simplex_rows(joint, jmask)
    return BandwidthWeights(w_d=w_d, w_dbar=joint[:, :D], w_e=joint[:, D:])


def project_placement(catalog, placement):
    counts = placement.counts
    upper = np.broadcast_to(catalog.L[None, :], counts.shape)
    inside = (counts >= 0).all() and (counts <= upper).all() and \
        (counts.sum(1) <= placement.capacity).all()
    if inside:
        return placement
    relaxed = project_box_budget(counts, upper, placement.capacity)
    return CachePlacement(np.floor(relaxed + 1e-9), placement.capacity)


def closest_feasible(point: ControlPoint, topology: SystemTopology,
                     catalog: VideoCatalog, max_shrinks: int = 64) -> ControlPoint:
    """Nearest point of the convex constraint set, then halve ``t`` until the
    MGF-existence and rate constraints hold."""
    report = check_feasibility(topology, catalog, point)
    if report.feasible:
        return point
    base = ControlPoint(
        schedule=project_schedule(topology, point.schedule),
        bandwidth=project_bandwidth(topology, point.bandwidth),
        placement=project_placement(catalog, point.placement),
        aux=point.aux,
    )
    t = np.array(point.aux.t, float)
    for _ in range(max_shrinks + 1):
        cand = replace(base, aux=AuxVars(t))
        margins, violations, bad_file = constraint_margins(topology, catalog, cand)
        if margins["stability"] <= 0:
            first = next(v for v in violations if v.startswith("stability"))
            raise InfeasibleInstanceError("unstable after projection: " + first)
        if not bad_file.any():
            rep = check_feasibility(topology, catalog, cand)
            if rep.feasible:
                return cand
            raise InfeasibleInstanceError("; ".join(rep.violations[:3]))
        t = np.where(bad_file, 0.5 * t, t)
    raise InfeasibleInstanceError(
        f"no feasible t after {max_shrinks} halvings: {violations[0]}")


def uniform_point(topology: SystemTopology, catalog: VideoCatalog, t0: float = 0.01,
                  capacity=None, placement_counts=None) -> ControlPoint:
    """Uniform scheduling and bandwidth initialisation (possibly infeasible)."""
    r, m = catalog.r, topology.m
    d_mask, e_mask = topology.d_mask, topology.e_mask
    p = np.broadcast_to(e_mask / topology.e[:, None], (r, m, topology.emax))
    q = np.broadcast_to(d_mask / topology.d[:, None], (r, m, topology.dmax))
    w_d = d_mask / topology.d[:, None]
    w_e = e_mask / topology.e[:, None]
    if capacity is None:
        capacity = default_capacity(topology, catalog)
    counts = np.zeros((m, r), int) if placement_counts is None else placement_counts
    return ControlPoint(
        schedule=ScheduleMatrices(pi=np.full((r, m), 1.0 / m), p=p, q=q),
        bandwidth=BandwidthWeights(w_d=w_d, w_dbar=w_d.copy(), w_e=w_e),
        placement=CachePlacement(counts, capacity),
        aux=AuxVars(np.full(r, float(t0))),
    )
