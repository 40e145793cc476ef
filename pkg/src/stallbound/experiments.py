"""Reusable experiment drivers: instances, bound validation, queue checks, sweeps.

The acceptance suite and the scripts in ``scripts/`` call these functions, so a
number reported by a script is the number the tests check.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .analysis import bound_report, constraint_curvature_probe, queue_stats
from .model import (AuxVars, BandwidthWeights, CachePlacement, ControlPoint,
                    ScheduleMatrices, SystemTopology, VideoCatalog, closest_feasible,
                    default_capacity, queue_tables)
from .optimizer import OptimizerSettings, optimize_aux, solve_sweep
from .simulator import SimConfig, empirical_sdtp, run_sim, second_queue_arrival_check
from .workload import Instance, WorkloadSpec, generate_catalog, sweep

DESK_ALPHA = (82.0, 76.53, 71.06, 65.6)
SWEEP_FACTORS = {
    "arrival_scale": (0.25, 0.5, 1.0, 1.5, 2.0),
    "rate_scale": (1.0, 1.25, 1.5, 1.75, 2.0),
    "stream_scale": (1.0, 1.25, 1.5, 1.75, 2.0),
}
# direction in which the optimum may only rise as the factor grows
SWEEP_DIRECTION = {"arrival_scale": +1, "rate_scale": -1, "stream_scale": -1}


def random_instance(seed, m=None, r=None, max_L=8, max_streams=3, max_rho=0.8,
                    sigma=None, eta_scale=0.02, t_frac=0.2, int_cache=True,
                    equal_streams=False, max_r=5):
    """Random small instance whose busiest stream of each class sits at a load <= ``max_rho``.

    Returns ``(topology, catalog, point)``; the point may still violate the
    MGF-existence constraints, so pass it through ``closest_feasible``.
    """
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 4)) if m is None else m
    r = int(rng.integers(1, max_r + 1)) if r is None else r
    d = rng.integers(1, max_streams + 1, m)
    e = rng.integers(1, max_streams + 1, m)
    if equal_streams:
        e = d.copy()
    L = rng.integers(1, max_L + 1, r)
    tau = float(rng.uniform(0.5, 2.0))
    lam = rng.uniform(0.02, 0.2, r)

    pi = rng.dirichlet(np.ones(m), r)
    D, E = d.max(), e.max()
    p = np.zeros((r, m, E))
    q = np.zeros((r, m, D))
    w_d = np.zeros((m, D))
    w_db = np.zeros((m, D))
    w_e = np.zeros((m, E))
    for j in range(m):
        p[:, j, :e[j]] = rng.dirichlet(np.ones(e[j]), r)
        q[:, j, :d[j]] = rng.dirichlet(np.ones(d[j]), r)
        w_d[j, :d[j]] = rng.dirichlet(np.ones(d[j])) * rng.uniform(0.8, 1.0)
        share = rng.dirichlet(np.ones(d[j] + e[j])) * rng.uniform(0.8, 1.0)
        w_db[j, :d[j]] = share[:d[j]]
        w_e[j, :e[j]] = share[d[j]:]
    if int_cache:
        counts = np.stack([rng.integers(0, L + 1) for _ in range(m)])
    else:
        counts = rng.uniform(0, 1, (m, r)) * L[None]
    capacity = np.ceil(counts.sum(1)).astype(int) + int(rng.integers(0, 3))

    # choose base rates so that the busiest stream of each class sits at max_rho
    eta = rng.uniform(0, eta_scale, (3, m))
    routed = lam[:, None] * pi
    work_e = np.einsum("ij,ijk,ji->jk", routed, p, counts)
    work_o = np.einsum("ij,ijk,ij->jk", routed, q, L[:, None] - counts.T)
    target = rng.uniform(0.3, max_rho)
    need_d = np.zeros(m)
    need_f = np.zeros(m)
    for j in range(m):
        for k in range(d[j]):
            if work_o[j, k] > 0:
                need_d[j] = max(need_d[j], 1.0 / (w_d[j, k] * (target / work_o[j, k] - eta[0, j])))
                need_f[j] = max(need_f[j], 1.0 / (w_db[j, k] * (target / work_o[j, k] - eta[1, j])))
        for k in range(e[j]):
            if work_e[j, k] > 0:
                need_f[j] = max(need_f[j], 1.0 / (w_e[j, k] * (target / work_e[j, k] - eta[2, j])))
    # a tiny work term with large eta can make the denominator negative; fall back
    need_d = np.where(np.isfinite(need_d) & (need_d > 0), need_d, 1.0)
    need_f = np.where(np.isfinite(need_f) & (need_f > 0), need_f, 1.0)
    topo = SystemTopology(d=d, e=e, alpha_d_base=need_d, alpha_f_base=need_f,
                          eta_d=eta[0], eta_dbar=eta[1], eta_e=eta[2])
    sigma = float(rng.uniform(0, 5)) if sigma is None else sigma
    cat = VideoCatalog(L=L, lam=lam, weight=rng.uniform(0.1, 1, r), tau=tau,
                       d_s=float(rng.uniform(0, 2)), sigma=sigma)
    min_rate = min(np.min((w_d * need_d[:, None])[w_d > 0]),
                   np.min((w_db * need_f[:, None])[w_db > 0]),
                   np.min((w_e * need_f[:, None])[w_e > 0]))
    t = np.full(r, t_frac * min_rate) * rng.uniform(0.5, 1.0, r)
    point = ControlPoint(ScheduleMatrices(pi, p, q), BandwidthWeights(w_d, w_db, w_e),
                         CachePlacement(np.round(counts) if int_cache else np.floor(counts),
                                        capacity),
                         AuxVars(t))
    return topo, cat, point


def desk_instance(r=50, workload_seed=7, d_s=5.0, sigma=20.0) -> Instance:
    """Four heterogeneous servers with a Pareto catalog; mirrors ``configs/desk.json``."""
    alpha = np.array(DESK_ALPHA)
    topo = SystemTopology(d=[2, 2, 3, 3], e=[4, 4, 6, 6], alpha_d_base=alpha,
                          alpha_f_base=alpha, eta_d=[0.014] * 4, eta_dbar=[0.014] * 4,
                          eta_e=[0.014] * 4)
    cat = replace(generate_catalog(WorkloadSpec(r=r, seed=workload_seed)), d_s=d_s,
                  sigma=sigma)
    return Instance(topo, cat, default_capacity(topo, cat), {"name": f"desk-r{r}"})


# ---------------------------------------------------------------------------
# bound validity


@dataclass
class ValidityResult:
    seed: int
    requests: int
    sigma: np.ndarray
    p_hat: np.ndarray      # (files, sigmas)
    stderr: np.ndarray
    bound: np.ndarray      # clipped bound with t tuned per sigma
    n: np.ndarray

    @property
    def slack(self):
        """Smallest ``bound + 3 stderr - p_hat`` over files with traffic."""
        seen = self.n > 0
        return float((self.bound + 3 * self.stderr - self.p_hat)[seen].min())


def validity_instance(seed):
    """Random instance with m <= 3, r <= 10, L <= 10, d_j = e_j <= 3 and loads below 0.8."""
    topo, cat, pt = random_instance(seed, max_L=10, max_r=10, equal_streams=True,
                                    max_rho=0.79)
    return topo, cat, closest_feasible(pt, topo, cat)


def bound_validity(seed, n_requests=100_000, n_sigma=10, warmup_fraction=0.1):
    """Simulate one random instance and compare every file's tail with its bound."""
    topo, cat, pt = validity_instance(seed)
    rate = float(cat.lam.sum())
    horizon = 1.05 * n_requests / rate / (1 - warmup_fraction)
    while True:
        trace = run_sim(SimConfig(topo, cat, pt, horizon, warmup_fraction * horizon, seed))
        if len(trace) >= n_requests:
            break
        horizon *= 1.2 * n_requests / max(len(trace), 1)
    top = max(float(np.quantile(trace.gamma, 0.999)), cat.tau)
    grid = np.linspace(0.0, top, n_sigma)
    emp = empirical_sdtp(trace, grid)
    bound = np.empty((cat.r, n_sigma))
    for k, s in enumerate(grid):
        tuned, _ = optimize_aux(topo, cat, pt, OptimizerSettings(sigma=float(s)))
        bound[:, k] = bound_report(topo, cat, tuned, float(s)).bound
    return ValidityResult(seed, len(trace), grid, emp.p_hat, emp.stderr, bound, emp.n)


# ---------------------------------------------------------------------------
# single-queue checks


def single_stream(L, lam, alpha, eta, cached=None, w_dbar=0.0, alpha_d=None):
    """One server, one stream per class, one file; fully cached unless ``cached`` says otherwise."""
    cached = L if cached is None else cached
    alpha_d = alpha if alpha_d is None else alpha_d
    topo = SystemTopology(d=[1], e=[1], alpha_d_base=[alpha_d], alpha_f_base=[alpha],
                          eta_d=[eta], eta_dbar=[eta], eta_e=[eta])
    cat = VideoCatalog(L=[L], lam=[lam], weight=[1.0], tau=1.0, d_s=0.0)
    pt = ControlPoint(ScheduleMatrices([[1.0]], [[[1.0]]], [[[1.0]]]),
                      BandwidthWeights([[1.0]], [[w_dbar]], [[1.0 - w_dbar]]),
                      CachePlacement([[cached]], [cached]), AuxVars([1e-3]))
    return topo, cat, pt


def pk_mean_wait(topo, cat, pt, h=1e-3):
    """Mean waiting time from the transform: Richardson-extrapolated slope at ``t = 0``.

    Steps much below 1e-3 lose digits to the cancellation in ``B(t) - 1``.
    """

    def wait_mgf(t):
        stats = queue_stats(topo, cat, pt, "e", 0, 0, t)
        return stats.pk_at_t.value / stats.B_at_t.value

    slope = lambda step: (wait_mgf(step) - 1.0) / step  # noqa: E731
    return 2 * slope(h / 2) - slope(h)


def pk_fidelity(load, n_requests=400_000, seed=0, L=2, alpha=5.0, eta=0.05):
    """``(simulated, analytical)`` mean wait of a cached-path FIFO queue at ``load``."""
    lam = load / (L * (eta + 1.0 / alpha))
    topo, cat, pt = single_stream(L, lam, alpha, eta)
    horizon = 1.1 * n_requests / lam
    trace = run_sim(SimConfig(topo, cat, pt, horizon, 0.1 * horizon / 1.1, seed))
    return float(trace.wait_e.mean()), float(pk_mean_wait(topo, cat, pt))


def tandem_dispersion(load, seed, L=3, horizon=40_000.0):
    """Dispersion of arrivals at the second queue of the uncached path at ``load``.

    The file is never cached, so every request crosses both origin-path queues;
    ``load`` is the utilisation of each of them.
    """
    alpha, eta = 20.0, 0.0
    lam = load * alpha / (2 * L)  # dbar stream gets half of alpha_f
    topo, cat, pt = single_stream(L, lam, alpha, eta, cached=0, w_dbar=0.5,
                                  alpha_d=alpha / 2)
    trace = run_sim(SimConfig(topo, cat, pt, horizon, 0.05 * horizon, seed))
    return second_queue_arrival_check(trace)


# ---------------------------------------------------------------------------
# convexity witnesses


def curvature_axes(family, count=50, seed=0, points=60):
    """Probe minima on ``count`` random (instance, stream) axes for the ``t`` or ``alpha`` family."""
    rng = np.random.default_rng(seed)
    results = []
    inst_seed = 0
    while len(results) < count:
        topo, cat, pt = random_instance(inst_seed)
        pt = closest_feasible(pt, topo, cat)
        inst_seed += 1
        tables = queue_tables(topo, cat, pt)
        streams = [(cls, j, k) for cls, tb in tables.items() for j in range(topo.m)
                   for k in range(tb.arr.shape[2])
                   if tb.arr[:, j, k].sum() > 0 and tb.seg[:, j].max() > 0]
        if not streams:
            continue
        cls, j, k = streams[rng.integers(len(streams))]
        alpha = float(tables[cls].alpha[j, k])
        if family == "t":
            grid = np.linspace(0.0, rng.uniform(0.5, 0.99) * alpha, points)
            value = constraint_curvature_probe(topo, cat, pt, (cls, j, k), "t", grid)
        else:
            t = float(pt.aux.t.max())
            lo = t * rng.uniform(1.01, 1.5)
            grid = np.linspace(lo, lo * rng.uniform(2.0, 20.0), points)
            value = constraint_curvature_probe(topo, cat, pt, (cls, j, k), "alpha", grid)
        results.append(((inst_seed - 1, cls, j, k), value))
    return results


# ---------------------------------------------------------------------------
# sweeps


def sweep_base_instance():
    """Smaller desk-style instance used for the parameter sweeps."""
    return desk_instance(r=15)


def monotone_sweep(base, scenario, factors=None, settings=None, cold="all"):
    """Optimise every sweep point; returns ``(factors, objectives)``.

    Points are warm-started from their neighbour in the direction where the
    neighbour's optimum is feasible and no better than this point's optimum
    (higher load first for arrival scaling, fewer or slower streams first
    otherwise). Each point also keeps its cold-start solution when that is better;
    ``cold="first"`` skips those extra solves.
    """
    factors = SWEEP_FACTORS[scenario] if factors is None else tuple(factors)
    order = "reverse" if SWEEP_DIRECTION[scenario] > 0 else "forward"
    results = solve_sweep(sweep(base, scenario, factors), settings, warm_order=order,
                          cold=cold)
    return factors, [obj for _, obj, _ in results]


def is_monotone(values, direction, rel=1e-9):
    """Non-decreasing (``direction=+1``) or non-increasing (``-1``) up to ``rel``."""
    v = np.asarray(values, float) * direction
    return bool(np.all(np.diff(v) >= -rel * np.maximum(np.abs(v[:-1]), 1e-300)))
