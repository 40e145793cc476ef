"""Block-alternating minimisation of the weighted tail bound.

Every block update is an inner loop of convex-approximation steps: linearise
the objective at the current iterate, add a proximal term, minimise that
surrogate over the block's convex set (a Euclidean projection), then move a
fraction ``gamma`` towards the minimiser. A step is accepted only if the new
point keeps every queue stable, every MGF defined and the objective no larger;
otherwise ``gamma`` is halved. Non-convex constraints (stability, MGF
existence) are therefore enforced by backtracking, and linear ones by the
projection.

Cache placement is optimised as a continuous relaxation and rounded at the end
of its block (floor, then greedy re-add of fractional units), keeping the
rounded placement only if it is feasible and no worse than the block's input.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import (make_jax_value_and_grad, numpy_file_bounds, numpy_objective,
                       point_params)
from .errors import InfeasibleInstanceError
from .model import (STRICT_MARGIN, AuxVars, BandwidthWeights, CachePlacement, ControlPoint,
                    QueueTable, ScheduleMatrices, SystemTopology, VideoCatalog,
                    check_feasibility, closest_feasible, default_capacity,
                    project_box_budget, project_capped_simplex_rows, project_simplex,
                    project_simplex_rows, uniform_point)

__all__ = [
    "OptimizerSettings", "OptimizationTrace", "Problem", "project_simplex",
    "optimize_scheduling", "optimize_aux", "optimize_bandwidth", "optimize_placement",
    "alternate", "baseline", "BASELINES", "BLOCKS", "solve", "solve_sweep",
    "compare_strategies",
]

BLOCKS = ("schedule", "aux", "bandwidth", "placement")
BLOCK_VARS = {
    "schedule": ("pi", "p", "q"),
    "aux": ("t",),
    "bandwidth": ("w_d", "w_dbar", "w_e"),
    "placement": ("cached",),
}
BASELINES = ("PEA", "PEB", "PSP", "PEC", "CHF", "FIXED_T")
FIXED_T_VALUE = 0.01
_T_FLOOR = 1e-9
_GAP = 2 * STRICT_MARGIN


@dataclass(frozen=True)
class OptimizerSettings:
    """Tolerances and step control.

    ``frozen`` lists variable names (``pi``, ``p``, ``q``, ``t``, ``w_d``,
    ``w_dbar``, ``w_e``, ``cached``) held fixed; a block whose variables are
    all frozen is skipped.
    """

    epsilon: float = 1e-6
    gamma0: float = 1.0
    gamma_decay: float = 0.01
    constant_step: bool = False
    max_outer: int = 300
    max_inner: int = 50
    placement_max_inner: int = 10
    lazy_skip_cap: int = 8
    prox_weight: float = 1.0
    max_backoff: int = 20
    block_order: tuple = BLOCKS
    frozen: frozenset = frozenset()
    fd_gradients: bool = False
    fd_step: float = 1e-6
    sigma: float | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.gamma0 <= 1:
            raise ValueError("gamma0 must lie in (0, 1]")
        if self.gamma_decay < 0:
            raise ValueError("gamma_decay must be nonnegative")
        if self.max_outer < 1 or self.max_inner < 1 or self.placement_max_inner < 1:
            raise ValueError("iteration caps must be at least 1")
        if not self.prox_weight > 0:
            raise ValueError("prox_weight must be positive")
        unknown = set(self.block_order) - set(BLOCKS)
        if unknown:
            raise ValueError(f"unknown blocks {sorted(unknown)}")
        object.__setattr__(self, "frozen", frozenset(self.frozen))

    def gamma(self, k):
        return self.gamma0 if self.constant_step else self.gamma0 / (1.0 + self.gamma_decay * k)


@dataclass
class TraceRow:
    iteration: int
    block: str
    objective: float
    inner_iterations: int
    max_violation: float


@dataclass
class OptimizationTrace:
    initial_objective: float
    rows: list = field(default_factory=list)
    converged: bool = False
    outer_iterations: int = 0

    @property
    def objectives(self):
        return np.array([self.initial_objective] + [r.objective for r in self.rows])

    def is_monotone(self, slack=1e-9):
        obj = self.objectives
        return bool(np.all(np.diff(obj) <= slack * np.maximum(1.0, np.abs(obj[:-1]))))

    def write_csv(self, path, header_comment=None):
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(header_comment + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "block", "objective", "max_constraint_violation"])
            w.writerow([0, "init", repr(self.initial_objective), repr(0.0)])
            for row in self.rows:
                w.writerow([row.iteration, row.block, repr(row.objective),
                            repr(row.max_violation)])


# ---------------------------------------------------------------------------
# problem wrapper


class Problem:
    """Objective, gradients and relaxed feasibility for one instance."""

    def __init__(self, topology: SystemTopology, catalog: VideoCatalog, settings=None):
        self.topology = topology
        self.catalog = catalog
        self.settings = settings or OptimizerSettings()
        self.sigma = catalog.sigma if self.settings.sigma is None else self.settings.sigma
        self._jax_value_and_grad = None
        # adapted proximal weights, carried from one call of a block to the next
        self.prox = {}

    # -- objective -----------------------------------------------------------
    def value(self, params) -> float:
        return numpy_objective(self.topology, self.catalog, params, self.sigma)

    def file_bounds(self, params) -> np.ndarray:
        raw = numpy_file_bounds(self.topology, self.catalog, params, self.sigma)
        return np.where(np.isnan(raw), np.inf, raw)

    def value_and_grad(self, params, names):
        if self.settings.fd_gradients:
            return self.value(params), {n: self._fd_grad(params, n) for n in names}
        if self._jax_value_and_grad is None:
            from ._jax import jnp
            self._jnp = jnp
            self._jax_value_and_grad = make_jax_value_and_grad(self.topology, self.catalog,
                                                               self.sigma)
        jnp = self._jnp
        val, grad = self._jax_value_and_grad({k: jnp.asarray(v) for k, v in params.items()})
        grads = {n: np.nan_to_num(np.asarray(grad[n]), nan=0.0, posinf=0.0, neginf=0.0)
                 for n in names}
        return float(val), grads

    def _fd_grad(self, params, name):
        x = params[name]
        g = np.zeros_like(x)
        h = self.settings.fd_step * max(1.0, float(np.abs(x).max()))
        for idx in np.ndindex(x.shape):
            up, dn = x.copy(), x.copy()
            up[idx] += h
            dn[idx] -= h
            g[idx] = (self.value({**params, name: up}) - self.value({**params, name: dn})) / (2 * h)
        return g

    # -- feasibility of relaxed parameters ------------------------------------
    def tables(self, params):
        topo, cat = self.topology, self.catalog
        routed = cat.lam[:, None] * params["pi"]
        seg_e = params["cached"].T
        seg_o = cat.L[:, None] - seg_e
        arr_e = routed[:, :, None] * params["p"]
        arr_d = routed[:, :, None] * params["q"]
        return {
            "e": QueueTable("e", params["w_e"] * topo.alpha_f_base[:, None], topo.eta_e,
                            arr_e, seg_e, topo.e_mask),
            "d": QueueTable("d", params["w_d"] * topo.alpha_d_base[:, None], topo.eta_d,
                            arr_d, seg_o, topo.d_mask),
            "dbar": QueueTable("dbar", params["w_dbar"] * topo.alpha_f_base[:, None],
                               topo.eta_dbar, arr_d, seg_o, topo.d_mask),
        }

    def violation_parts(self, params, files=None):
        """``(stability, per_file)``: worst load excess and per-file rate/MGF excess.

        Values ``< 0`` mean satisfied with the strict margin. ``files`` limits
        the per-file part to a subset (the load part is always global).
        """
        t_all = params["t"]
        idx = np.arange(t_all.shape[0]) if files is None else np.asarray(files)
        t = t_all[idx]
        stab = -np.inf
        per_file = np.full(t.shape, -np.inf)
        for qt in self.tables(params).values():
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                rho = qt.rho()
                stab = max(stab, float(np.max(np.where(rho > 0, rho - 1 + STRICT_MARGIN,
                                                       -np.inf), initial=-np.inf)))
                used = (qt.used & (qt.seg[:, :, None] > 1e-12))[idx]
                if not used.any():
                    continue
                gap = t[:, None, None] + STRICT_MARGIN - qt.alpha[None]
                bm1 = qt.batch_mgf_minus_one(t)
                mgf_gap = qt.Lambda[None] * bm1 + STRICT_MARGIN - t[:, None, None]
                mgf_gap = np.where(np.isnan(mgf_gap), np.inf, mgf_gap)
                worst = np.where(used, np.maximum(gap, mgf_gap), -np.inf)
                per_file = np.maximum(per_file, worst.reshape(t.shape[0], -1).max(1))
        if (t <= 0).any():
            per_file = np.where(t <= 0, 1.0 - t, per_file)
        return stab, per_file

    def violation(self, params) -> float:
        """Largest violation of the strict constraints (< 0 means feasible)."""
        stab, per_file = self.violation_parts(params)
        return float(max(stab, per_file.max()))

    def restore_t(self, params, steps=25):
        """Pull the exponents of files whose MGFs fail back to the feasible boundary.

        Each offending ``t_i`` is bisected on ``(0, t_i)``; files are independent
        because a file's rate and MGF constraints involve only its own exponent.
        Returns a feasible parameter set, or None when a queue is unstable.
        """
        stab, per_file = self.violation_parts(params)
        if stab >= 0:
            return None
        bad = np.nonzero(per_file >= 0)[0]
        if bad.size == 0:
            return params
        t = params["t"].copy()
        lo = np.zeros(bad.size)
        hi = t[bad].copy()
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            t[bad] = mid
            _, pf = self.violation_parts(dict(params, t=t), files=bad)
            ok = pf < 0
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        if (lo <= 0).any():
            return None
        t[bad] = lo
        return dict(params, t=t)

    def feasible(self, params) -> bool:
        return self.violation(params) < 0


def _params_to_point(params, placement_capacity):
    counts = np.rint(params["cached"]).astype(int)
    return ControlPoint(
        schedule=ScheduleMatrices(params["pi"], params["p"], params["q"]),
        bandwidth=BandwidthWeights(params["w_d"], params["w_dbar"], params["w_e"]),
        placement=CachePlacement(counts, placement_capacity),
        aux=AuxVars(params["t"]),
    )


# ---------------------------------------------------------------------------
# block projections


def _usable_rates(problem, params):
    topo = problem.topology
    a_e = params["w_e"] * topo.alpha_f_base[:, None]
    a_d = params["w_d"] * topo.alpha_d_base[:, None]
    a_db = params["w_dbar"] * topo.alpha_f_base[:, None]
    tmax = float(params["t"].max())
    e_ok = topo.e_mask & (a_e > tmax + _GAP)
    d_ok = topo.d_mask & (np.minimum(a_d, a_db) > tmax + _GAP)
    # keep at least the structurally valid streams when nothing qualifies
    e_ok = np.where(e_ok.any(1, keepdims=True), e_ok, topo.e_mask)
    d_ok = np.where(d_ok.any(1, keepdims=True), d_ok, topo.d_mask)
    return e_ok, d_ok


def _project_schedule(problem, params, cand):
    e_ok, d_ok = _usable_rates(problem, params)
    out = {}
    if "pi" in cand:
        out["pi"] = project_simplex_rows(cand["pi"], np.ones(problem.topology.m, bool))
    if "p" in cand:
        out["p"] = project_simplex_rows(cand["p"], e_ok[None])
    if "q" in cand:
        out["q"] = project_simplex_rows(cand["q"], d_ok[None])
    return out


def _t_upper(problem, params):
    """Per-file cap ``min alpha - gap`` over the streams the file uses."""
    r = problem.catalog.r
    upper = np.full(r, np.inf)
    for qt in problem.tables(params).values():
        used = qt.used & (qt.seg[:, :, None] > 1e-12)
        alpha = np.broadcast_to(qt.alpha[None], used.shape)
        cap = np.where(used, alpha, np.inf).reshape(r, -1).min(1)
        upper = np.minimum(upper, cap - _GAP)
    return upper


def _project_aux(problem, params, cand):
    upper = _t_upper(problem, params)
    return {"t": np.clip(cand["t"], _T_FLOOR, np.maximum(upper, _T_FLOOR))}


def _bandwidth_lower(problem, params):
    """Smallest weights keeping every used stream's rate above the largest t using it."""
    topo = problem.topology
    t = params["t"]
    lows = {}
    for name, qt, base in (("w_e", "e", topo.alpha_f_base), ("w_d", "d", topo.alpha_d_base),
                           ("w_dbar", "dbar", topo.alpha_f_base)):
        table = problem.tables(params)[qt]
        used = table.used & (table.seg[:, :, None] > 1e-12)
        need = np.where(used, t[:, None, None], 0.0).max(0)
        lows[name] = np.where(need > 0, (need + _GAP) / base[:, None], 0.0)
    return lows


def _project_bandwidth(problem, params, cand):
    topo = problem.topology
    lows = _bandwidth_lower(problem, params)
    D = topo.dmax
    out = {}
    frozen = problem.settings.frozen

    def capped(v, mask, lo):
        room_ok = lo.sum(-1) <= 1.0
        lo = np.where(room_ok[..., None], lo, 0.0)
        return project_capped_simplex_rows(v, mask, lo)

    if "w_d" in cand:
        out["w_d"] = capped(cand["w_d"], topo.d_mask, lows["w_d"])
    if "w_dbar" in cand or "w_e" in cand:
        w_db = cand.get("w_dbar", params["w_dbar"])
        w_e = cand.get("w_e", params["w_e"])
        joint = np.concatenate([w_db, w_e], axis=1)
        mask = np.concatenate([topo.d_mask & ("w_dbar" not in frozen),
                               topo.e_mask & ("w_e" not in frozen)], axis=1)
        lo = np.concatenate([lows["w_dbar"], lows["w_e"]], axis=1)
        fixed = np.where(mask, 0.0, joint).sum(1)
        budget = np.maximum(1.0 - fixed, 0.0)
        lo = np.where(mask, lo, 0.0)
        room_ok = lo.sum(1) <= budget
        lo = np.where(room_ok[:, None], lo, 0.0)
        proj = project_capped_simplex_rows(joint, mask, lo, total=1.0) if (budget == 1).all() \
            else _capped_budget(joint, mask, lo, budget)
        proj = np.where(mask, proj, joint)
        if "w_dbar" in cand:
            out["w_dbar"] = proj[:, :D]
        if "w_e" in cand:
            out["w_e"] = proj[:, D:]
    return out


def _capped_budget(v, mask, lo, budget):
    rows = [project_capped_simplex_rows(v[j:j + 1], mask[j:j + 1], lo[j:j + 1],
                                        total=float(budget[j]))
            for j in range(v.shape[0])]
    return np.concatenate(rows, axis=0)


def _project_placement(problem, params, cand, capacity):
    upper = np.broadcast_to(problem.catalog.L[None, :].astype(float), cand["cached"].shape)
    return {"cached": project_box_budget(cand["cached"], upper, capacity.astype(float))}


# ---------------------------------------------------------------------------
# generic block solver


@dataclass
class BlockResult:
    params: dict
    objective: float
    inner_iterations: int
    accepted_steps: int


def _block_scale(problem, params, names):
    if "t" in names:
        return float(params["t"].max())
    if "cached" in names:
        return float(problem.catalog.L.mean())
    return 1.0


def _run_block(problem, params, names, project, f0=None, max_inner=None):
    """Inner convex-approximation loop over the variables ``names``."""
    s = problem.settings
    max_inner = s.max_inner if max_inner is None else max_inner
    names = [n for n in names if n not in s.frozen]
    # other blocks may pull t back inside its feasible interval
    restore = "t" not in names and "t" not in s.frozen
    if not names:
        f = problem.value(params) if f0 is None else f0
        return BlockResult(params, f, 0, 0)
    f = problem.value(params) if f0 is None else f0
    key = tuple(names)
    c = problem.prox.get(key)
    accepted = 0
    it = 0
    for it in range(1, max_inner + 1):
        f_lin, grads = problem.value_and_grad(params, names)
        if c is None:
            # first trial step moves the largest coordinate by about ``scale``
            g_max = max(float(np.abs(grads[n]).max(initial=0.0)) for n in names)
            c = s.prox_weight * max(g_max / _block_scale(problem, params, names), 1e-300)
        target = {n: params[n] - grads[n] / c for n in names}
        hat = project(problem, params, target)
        direction = {n: hat[n] - params[n] for n in names}
        if max(float(np.abs(d).max(initial=0.0)) for d in direction.values()) == 0.0:
            break
        gamma = s.gamma(it - 1)
        halvings = 0
        new_params, f_new = None, None
        while halvings <= s.max_backoff:
            trial = dict(params)
            for n in names:
                trial[n] = params[n] + gamma * direction[n]
            trial = problem.restore_t(trial) if restore else \
                (trial if problem.feasible(trial) else None)
            if trial is not None:
                f_trial = problem.value(trial)
                if np.isfinite(f_trial) and f_trial <= f:
                    new_params, f_new = trial, f_trial
                    break
            gamma *= 0.5
            halvings += 1
        # adapt the proximal weight: step lengths that needed halving were too long
        c = c * 2.0 ** min(halvings, 8) if halvings else c * 0.5
        if new_params is None:
            break
        accepted += 1
        decrease = f - f_new
        params, f = new_params, f_new
        # a shortened step says little about stationarity, so only full steps may stop the loop
        if not halvings and decrease <= s.epsilon * max(abs(f), 1e-300):
            break
    if c is not None:
        problem.prox[key] = c
    return BlockResult(params, f, it, accepted)


# ---------------------------------------------------------------------------
# rounding


def _feasible_or_none(problem, params):
    if "t" in problem.settings.frozen:
        return params if problem.feasible(params) else None
    return problem.restore_t(params)


def _round_placement(problem, params, capacity, reference_params, reference_value):
    """Floor the relaxed placement, then re-add units by predicted improvement.

    Each round evaluates the gradient once and adds, on every server with
    room left, the fractional entry with the most negative derivative. The
    exact objective is checked once at the end; the result is kept only if it
    is no worse than the block input.
    """
    relaxed = params["cached"]
    base = np.minimum(np.floor(relaxed + 1e-9), problem.catalog.L[None, :])
    cand = _feasible_or_none(problem, dict(params, cached=base))
    if cand is None:
        return reference_params, reference_value
    frac = (relaxed - base) > 1e-9
    room = capacity - base.sum(1)
    rows = np.arange(base.shape[0])
    while True:
        open_ = frac & (room[:, None] >= 1)
        if not open_.any():
            break
        _, grads = problem.value_and_grad(cand, ["cached"])
        score = np.where(open_, grads["cached"], np.inf)
        pick = np.argmin(score, axis=1)
        take = score[rows, pick] < 0
        if not take.any():
            break
        trial = cand["cached"].copy()
        trial[rows[take], pick[take]] += 1
        tp = _feasible_or_none(problem, dict(cand, cached=trial))
        if tp is None:
            break
        cand = tp
        frac[rows[take], pick[take]] = False
        room[take] -= 1
    f_cur = problem.value(cand)
    if np.isfinite(f_cur) and f_cur <= reference_value:
        return cand, f_cur
    return reference_params, reference_value


# ---------------------------------------------------------------------------
# public block operations


def _start(topology, catalog, point, settings):
    problem = settings if isinstance(settings, Problem) else Problem(topology, catalog, settings)
    return problem, point_params(point)


def optimize_scheduling(topology, catalog, point, settings=None):
    """Update ``pi, p, q``; returns the new ControlPoint and its objective."""
    problem, params = _start(topology, catalog, point, settings)
    res = _run_block(problem, params, BLOCK_VARS["schedule"], _project_schedule)
    return _params_to_point(res.params, point.placement.capacity), res


_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def _t_feasible_end(problem, params, steps=40):
    """Largest feasible exponent per file (the feasible set in each t_i is an interval)."""
    lo = params["t"].copy()
    cap = _t_upper(problem, params)
    hi = np.where(np.isfinite(cap), np.maximum(cap, lo), 1e3 * lo)
    _, pf = problem.violation_parts(dict(params, t=hi))
    open_ = pf >= 0
    for _ in range(steps):
        if not open_.any():
            break
        mid = np.where(open_, 0.5 * (lo + hi), hi)
        _, pf = problem.violation_parts(dict(params, t=mid))
        ok = pf < 0
        lo = np.where(open_ & ok, mid, lo)
        hi = np.where(open_ & ~ok, mid, hi)
    return np.where(open_, lo, hi)


def _aux_search(problem, params, grid_points=25, refine=30):
    """Exact per-file minimisation over t: log grid, then golden section.

    Each file's bound depends on its own exponent only, so all files are
    searched at once with one vectorised evaluation per probe.
    """
    t0 = params["t"]
    f0 = problem.file_bounds(params)
    end = _t_feasible_end(problem, params)
    scale = np.geomspace(1e-6, 1.0, grid_points)
    vals = np.stack([problem.file_bounds(dict(params, t=end * s)) for s in scale])
    k = np.argmin(vals, axis=0)
    cols = np.arange(t0.size)
    best_t, best_f = end * scale[k], vals[k, cols]
    a = end * scale[np.maximum(k - 1, 0)]
    b = end * scale[np.minimum(k + 1, grid_points - 1)]
    x1, x2 = b - _INV_PHI * (b - a), a + _INV_PHI * (b - a)
    f1 = problem.file_bounds(dict(params, t=x1))
    f2 = problem.file_bounds(dict(params, t=x2))
    for _ in range(refine):
        left = f1 <= f2
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        x2n = np.where(left, x1, a + _INV_PHI * (b - a))
        x1n = np.where(left, b - _INV_PHI * (b - a), x2)
        f2n = np.where(left, f1, np.nan)
        f1n = np.where(left, np.nan, f2)
        fresh = problem.file_bounds(dict(params, t=np.where(left, x1n, x2n)))
        x1, x2 = x1n, x2n
        f1 = np.where(left, fresh, f1n)
        f2 = np.where(left, f2n, fresh)
    for x, fx in ((x1, f1), (x2, f2)):
        better = fx < best_f
        best_t = np.where(better, x, best_t)
        best_f = np.where(better, fx, best_f)
    keep = best_f < f0
    t_new = np.where(keep, best_t, t0)
    trial = dict(params, t=t_new)
    if not problem.feasible(trial):
        return params, problem.value(params)
    return trial, problem.value(trial)


def optimize_aux(topology, catalog, point, settings=None):
    """Minimise over ``t`` exactly, file by file; never increases the objective."""
    problem, params = _start(topology, catalog, point, settings)
    if "t" in problem.settings.frozen:
        res = BlockResult(params, problem.value(params), 0, 0)
    else:
        new, f = _aux_search(problem, params)
        changed = not np.array_equal(new["t"], params["t"])
        res = BlockResult(new, f, 1, int(changed))
    return _params_to_point(res.params, point.placement.capacity), res


def optimize_bandwidth(topology, catalog, point, settings=None):
    problem, params = _start(topology, catalog, point, settings)
    res = _run_block(problem, params, BLOCK_VARS["bandwidth"], _project_bandwidth)
    return _params_to_point(res.params, point.placement.capacity), res


def optimize_placement(topology, catalog, point, settings=None):
    problem, params = _start(topology, catalog, point, settings)
    capacity = np.asarray(point.placement.capacity, float)
    if (capacity < 0).any():
        raise InfeasibleInstanceError("negative cache capacity")
    f0 = problem.value(params)
    res = _run_block(problem, params, BLOCK_VARS["placement"],
                     lambda pb, pr, cd: _project_placement(pb, pr, cd, capacity), f0,
                     max_inner=problem.settings.placement_max_inner)
    rounded, f_round = _round_placement(problem, res.params, capacity, params, f0)
    res = BlockResult(rounded, f_round, res.inner_iterations, res.accepted_steps)
    return _params_to_point(rounded, point.placement.capacity), res


_BLOCK_FUNCS = {
    "schedule": optimize_scheduling,
    "aux": optimize_aux,
    "bandwidth": optimize_bandwidth,
    "placement": optimize_placement,
}


def alternate(topology, catalog, point, settings=None, block_order=None):
    """Cycle the blocks until a full cycle improves by less than ``epsilon`` (relative).

    A block whose last call left the objective unchanged is skipped for 1, 3,
    7 cycles (capped at ``lazy_skip_cap``) after successive idle calls.
    Convergence is only declared on a cycle in which every block ran; a small
    decrease on a partial cycle forces the next cycle to run all blocks.
    """
    settings = settings or OptimizerSettings()
    problem = Problem(topology, catalog, settings)
    order = tuple(block_order or settings.block_order)
    if not check_feasibility(topology, catalog, point):
        raise InfeasibleInstanceError("alternate() needs a feasible start; use closest_feasible")
    f = problem.value(point_params(point))
    trace = OptimizationTrace(initial_objective=f)
    active = [b for b in order if not set(BLOCK_VARS[b]) <= settings.frozen]
    idle = dict.fromkeys(active, 0)
    next_run = dict.fromkeys(active, 1)
    force = True
    for outer in range(1, settings.max_outer + 1):
        f_cycle = f
        ran_all = True
        for block in active:
            if not force and outer < next_run[block]:
                ran_all = False
                continue
            f_before = f
            point, res = _BLOCK_FUNCS[block](topology, catalog, point, problem)
            f = res.objective
            trace.rows.append(TraceRow(outer, block, f, res.inner_iterations,
                                       max(problem.violation(res.params), 0.0)))
            idle[block] = idle[block] + 1 if f >= f_before else 0
            wait = min(2 ** idle[block] - 1, settings.lazy_skip_cap) if idle[block] else 0
            next_run[block] = outer + 1 + wait
        trace.outer_iterations = outer
        small = f_cycle - f <= settings.epsilon * max(abs(f_cycle), 1e-300)
        if small and ran_all:
            trace.converged = True
            break
        force = small
    return point, trace


# ---------------------------------------------------------------------------
# initialisations and baselines


def equal_share_placement(catalog, capacity):
    """Integer water-filling: each server splits its capacity evenly over files."""
    m = len(capacity)
    counts = np.zeros((m, catalog.r), int)
    L = catalog.L
    for j in range(m):
        room = int(capacity[j])
        alloc = np.zeros(catalog.r, int)
        while room > 0:
            open_files = np.nonzero(alloc < L)[0]
            if open_files.size == 0:
                break
            share = room // open_files.size
            if share == 0:
                alloc[open_files[:room]] += 1
                room = 0
                break
            add = np.minimum(share, L[open_files] - alloc[open_files])
            alloc[open_files] += add
            room -= int(add.sum())
        counts[j] = alloc
    return counts


def hottest_first_placement(catalog, capacity):
    """Fill each server with whole files by decreasing rate (ties: lower index)."""
    order = np.lexsort((np.arange(catalog.r), -catalog.lam))
    counts = np.zeros((len(capacity), catalog.r), int)
    for j, cap in enumerate(capacity):
        room = int(cap)
        for i in order:
            take = min(room, int(catalog.L[i]))
            counts[j, i] = take
            room -= take
            if room == 0:
                break
    return counts


def initial_point(topology, catalog, capacity=None, t0=FIXED_T_VALUE, placement="equal"):
    capacity = default_capacity(topology, catalog) if capacity is None else np.asarray(capacity)
    counts = (equal_share_placement(catalog, capacity) if placement == "equal"
              else hottest_first_placement(catalog, capacity) if placement == "hottest"
              else np.zeros((topology.m, catalog.r), int))
    raw = uniform_point(topology, catalog, t0=t0, capacity=capacity, placement_counts=counts)
    return closest_feasible(raw, topology, catalog)


def _with_frozen(settings, extra):
    return replace(settings, frozen=frozenset(settings.frozen) | frozenset(extra))


def baseline(name, topology, catalog, settings=None, capacity=None):
    """Run one baseline strategy; returns ``(point, objective, trace)``."""
    settings = settings or OptimizerSettings()
    name = name.upper()
    if name not in BASELINES:
        raise ValueError(f"unknown baseline {name!r}; choose from {BASELINES}")
    capacity = default_capacity(topology, catalog) if capacity is None else np.asarray(capacity)
    placement = {"CHF": "hottest"}.get(name, "equal")
    point = initial_point(topology, catalog, capacity, placement=placement)
    frozen = {
        "PEA": ("pi", "p", "q"),
        "PEB": ("w_d", "w_dbar", "w_e"),
        "PSP": ("pi",),
        "PEC": ("cached",),
        "CHF": ("cached",),
        "FIXED_T": ("t",),
    }[name]
    if name == "PSP":
        mu = topology.alpha_d_base + topology.alpha_f_base
        pi = np.broadcast_to(mu / mu.sum(), point.schedule.pi.shape)
        point = replace(point, schedule=replace(point.schedule, pi=pi))
        point = closest_feasible(point, topology, catalog)
    if name == "FIXED_T":
        point = replace(point, aux=AuxVars(np.full(catalog.r, FIXED_T_VALUE)))
        if not check_feasibility(topology, catalog, point):
            raise InfeasibleInstanceError("t = 0.01 is infeasible for this instance")
    point, trace = alternate(topology, catalog, point, _with_frozen(settings, frozen))
    return point, trace.objectives[-1], trace


def solve(topology, catalog, settings=None, capacity=None, starts=()):
    """Optimise from the default start and from any extra feasible starts; keep the best."""
    settings = settings or OptimizerSettings()
    candidates = [initial_point(topology, catalog, capacity)] + list(starts)
    best = None
    for start in candidates:
        point, trace = alternate(topology, catalog, start, settings)
        if best is None or trace.objectives[-1] < best[1].objectives[-1]:
            best = (point, trace)
    return best


def compare_strategies(topology, catalog, settings=None, capacity=None, names=BASELINES):
    """Run the named baselines and the full optimiser.

    The full optimiser runs from the default start and from the best baseline
    solution. Alternation from that point is monotone, so the optimum is never
    worse than any baseline. Returns ``{name: (point, objective)}``, OPT first.
    """
    baselines = {}
    for name in names:
        point, obj, _ = baseline(name, topology, catalog, settings, capacity)
        baselines[name.upper()] = (point, float(obj))
    starts = []
    if baselines:
        starts.append(min(baselines.values(), key=lambda pv: pv[1])[0])
    point, trace = solve(topology, catalog, settings, capacity, starts=starts)
    return {"OPT": (point, float(trace.objectives[-1])), **baselines}


def embed_point(point, topology):
    """Pad a point to a topology with more streams; new streams get no weight or traffic."""
    r, m = point.schedule.pi.shape
    D, E = topology.dmax, topology.emax

    def pad(a, width):
        out = np.zeros(a.shape[:-1] + (width,))
        out[..., :a.shape[-1]] = a
        return out

    return replace(
        point,
        schedule=ScheduleMatrices(point.schedule.pi, pad(point.schedule.p, E),
                                  pad(point.schedule.q, D)),
        bandwidth=BandwidthWeights(pad(point.bandwidth.w_d, D), pad(point.bandwidth.w_dbar, D),
                                   pad(point.bandwidth.w_e, E)),
    )


def solve_sweep(instances, settings=None, warm_order="forward", cold="all"):
    """Solve a list of instances, warm-starting each from its neighbour's solution.

    ``warm_order`` is ``"forward"`` (solve in list order) or ``"reverse"``.
    With ``cold="all"`` each instance keeps the better of its warm and cold
    solutions; with ``cold="first"`` only the first instance solved starts cold.
    Returns the list of ``(point, objective, trace)`` in the original order.
    """
    if cold not in ("all", "first"):
        raise ValueError("cold must be 'all' or 'first'")
    settings = settings or OptimizerSettings()
    idx = list(range(len(instances)))
    if warm_order == "reverse":
        idx.reverse()
    results = [None] * len(instances)
    prev = None
    for k in idx:
        inst = instances[k]
        starts = []
        if prev is not None:
            warm = prev
            if warm.schedule.p.shape[-1] != inst.topology.emax or \
                    warm.schedule.q.shape[-1] != inst.topology.dmax:
                warm = embed_point(warm, inst.topology)
            if check_feasibility(inst.topology, inst.catalog, warm):
                starts.append(warm)
        if starts and cold == "first":
            point, trace = alternate(inst.topology, inst.catalog, starts[0], settings)
        else:
            point, trace = solve(inst.topology, inst.catalog, settings, inst.capacity, starts)
        results[k] = (point, float(trace.objectives[-1]), trace)
        prev = point
    return results


def objective_of(topology, catalog, point, sigma=None):
    return numpy_objective(topology, catalog, point_params(point), sigma)

