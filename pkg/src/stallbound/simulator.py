"""Ground-truth simulation of dispatch, tandem stream queues and playback.

Each stream is a FIFO server at request granularity: a request's segments are
served back to back once the request reaches the head of the queue. Because
routing is fixed at arrival and streams never interact except through the
origin-to-edge tandem, every stream can be processed independently in arrival
order. Completion times follow the Lindley recursion
``c_k = max(a_k, c_{k-1}) + S_k``, evaluated in closed form as
``c = cumsum(S) + maximum.accumulate(a - cumsum(S)_{k-1})``.

The edge stage of the origin path runs the same recursion at segment level:
segment ``g`` starts once it has left the origin stream and the previous
segment (of this or the preceding request) has finished.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .model import ControlPoint, SystemTopology, VideoCatalog, queue_tables, stream_rates

# spawn-key purposes for independent random streams
_ARRIVALS, _DISPATCH, _SERVICE = 0, 1, 2
_CLASS_CODE = {"e": 0, "d": 1, "dbar": 2}


class SaturationWarning(RuntimeWarning):
    """A simulated stream has load intensity at or above one."""


@dataclass(frozen=True)
class SimConfig:
    topology: SystemTopology
    catalog: VideoCatalog
    point: ControlPoint
    horizon: float
    warmup: float | None = None
    seed: int = 0

    def __post_init__(self):
        warmup = 0.2 * self.horizon if self.warmup is None else self.warmup
        object.__setattr__(self, "warmup", float(warmup))
        if not self.horizon > self.warmup >= 0:
            raise ConfigurationError("need horizon > warmup >= 0")


@dataclass
class SimTrace:
    """Post-warmup requests, one row each, plus flattened per-segment times.

    Times in ``completion`` are measured from the request's arrival; request
    ``k`` owns segments ``offsets[k]:offsets[k + 1]``. Waits are NaN for a path
    the request does not use. ``dbar_entry`` is the absolute epoch at which a
    request's first origin segment reaches the edge stream.
    """

    file: np.ndarray
    server: np.ndarray
    beta: np.ndarray
    nu: np.ndarray
    arrival: np.ndarray
    gamma: np.ndarray
    wait_e: np.ndarray
    wait_d: np.ndarray
    sojourn: np.ndarray
    dbar_entry: np.ndarray
    offsets: np.ndarray
    completion: np.ndarray
    tau: float
    d_s: float
    horizon: float
    warmup: float
    n_files: int
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.file.shape[0])

    def segment_completions(self, k):
        return self.completion[self.offsets[k]:self.offsets[k + 1]]

    def available(self, k):
        """In-order availability: segment ``g`` is playable once 1..g have arrived."""
        return np.maximum.accumulate(self.segment_completions(k))

    def play_starts(self, k):
        """Playback start of every segment of request ``k`` (relative to arrival)."""
        D = self.segment_completions(k)
        T = np.empty_like(D)
        prev = None
        for g, dg in enumerate(D):
            T[g] = max(self.d_s, dg) if prev is None else max(prev + self.tau, dg)
            prev = T[g]
        return T


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _choice(rng, probs, n):
    """Inverse-CDF categorical draws; robust to rows summing to 1 within 1e-9."""
    cdf = np.cumsum(probs)
    u = rng.random(n) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(probs) - 1)


def _lindley(arrivals, work):
    """Completion times of a FIFO single server fed in arrival order."""
    cum = np.cumsum(work)
    prev = cum - work
    return cum + np.maximum.accumulate(arrivals - prev)


def _check_saturation(topology, catalog, point):
    worst = 0.0
    for qt in queue_tables(topology, catalog, point).values():
        with np.errstate(divide="ignore", invalid="ignore"):
            worst = max(worst, float(np.max(qt.rho(), initial=0.0)))
    if worst >= 1:
        warnings.warn(f"simulated load intensity {worst:.3g} >= 1; queues will grow",
                      SaturationWarning, stacklevel=3)
    return worst


def run_sim(config: SimConfig) -> SimTrace:
    topo, cat, point = config.topology, config.catalog, config.point
    sched, counts = point.schedule, point.placement.counts
    seed = int(config.seed)
    rho_max = _check_saturation(topo, cat, point)
    rates = stream_rates(topo, point.bandwidth)

    # arrivals and dispatch, drawn per file
    files, arrivals, servers, betas, nus = [], [], [], [], []
    for i in range(cat.r):
        rng = _rng(seed, _ARRIVALS, i)
        n = int(rng.poisson(cat.lam[i] * config.horizon))
        arr = np.sort(rng.uniform(0.0, config.horizon, n))
        drng = _rng(seed, _DISPATCH, i)
        j = _choice(drng, sched.pi[i], n)
        nu = np.empty(n, int)
        beta = np.empty(n, int)
        for s in range(topo.m):
            sel = j == s
            nu[sel] = _choice(drng, sched.p[i, s, :topo.e[s]], int(sel.sum()))
            beta[sel] = _choice(drng, sched.q[i, s, :topo.d[s]], int(sel.sum()))
        files.append(np.full(n, i))
        arrivals.append(arr)
        servers.append(j)
        betas.append(beta)
        nus.append(nu)
    file = np.concatenate(files)
    arrival = np.concatenate(arrivals)
    server = np.concatenate(servers)
    beta = np.concatenate(betas)
    nu = np.concatenate(nus)
    order = np.lexsort((file, arrival))
    file, arrival, server, beta, nu = (x[order] for x in (file, arrival, server, beta, nu))
    n_req = file.shape[0]

    L = cat.L[file]
    n_cached = counts[server, file]
    n_origin = L - n_cached
    offsets = np.concatenate([[0], np.cumsum(L)])
    completion = np.empty(offsets[-1])
    wait_e = np.full(n_req, np.nan)
    wait_d = np.full(n_req, np.nan)
    dbar_entry = np.full(n_req, np.nan)
    # per-segment position inside its request, 0-based
    seg_pos = np.arange(offsets[-1]) - np.repeat(offsets[:-1], L)
    seg_req = np.repeat(np.arange(n_req), L)
    seg_cached = seg_pos < np.repeat(n_cached, L)

    def service(cls, j, k, size):
        alpha = {"e": rates.alpha_e, "d": rates.alpha_d, "dbar": rates.alpha_dbar}[cls][j, k]
        eta = {"e": topo.eta_e, "d": topo.eta_d, "dbar": topo.eta_dbar}[cls][j]
        if size and alpha <= 0:
            raise ConfigurationError(f"request dispatched to zero-rate stream ({cls}, {j}, {k})")
        rng = _rng(seed, _SERVICE, _CLASS_CODE[cls], j, k)
        return eta + rng.exponential(1.0 / alpha, size) if size else np.empty(0)

    # cached path
    for j in range(topo.m):
        for k in range(topo.e[j]):
            reqs = np.nonzero((server == j) & (nu == k) & (n_cached > 0))[0]
            if reqs.size == 0:
                continue
            segs = np.nonzero(seg_cached & np.isin(seg_req, reqs))[0]
            y = service("e", j, k, segs.size)
            per_req = np.add.reduceat(y, np.searchsorted(seg_req[segs], reqs))
            done = _lindley(arrival[reqs], per_req)
            start = done - per_req
            wait_e[reqs] = start - arrival[reqs]
            # segment completion = request start + running service inside the request
            cum = np.cumsum(y)
            first = np.searchsorted(seg_req[segs], reqs)
            base = np.repeat(cum[first] - y[first], n_cached[reqs])
            completion[segs] = np.repeat(start, n_cached[reqs]) + cum - base \
                - arrival[seg_req[segs]]

    # origin path: origin stream then edge stream of the same index
    for j in range(topo.m):
        for k in range(topo.d[j]):
            reqs = np.nonzero((server == j) & (beta == k) & (n_origin > 0))[0]
            if reqs.size == 0:
                continue
            segs = np.nonzero(~seg_cached & np.isin(seg_req, reqs))[0]
            counts_k = n_origin[reqs]
            first = np.searchsorted(seg_req[segs], reqs)
            y_d = service("d", j, k, segs.size)
            per_req = np.add.reduceat(y_d, first)
            done = _lindley(arrival[reqs], per_req)
            start = done - per_req
            wait_d[reqs] = start - arrival[reqs]
            cum = np.cumsum(y_d)
            base = np.repeat(cum[first] - y_d[first], counts_k)
            left_origin = np.repeat(start, counts_k) + cum - base
            y_b = service("dbar", j, k, segs.size)
            edge_done = _lindley(left_origin, y_b)
            dbar_entry[reqs] = left_origin[first]
            completion[segs] = edge_done - arrival[seg_req[segs]]

    # stall duration: max over segments of D_g - (g - 1) tau, minus the startup delay
    lateness = completion - seg_pos * cat.tau
    worst = np.maximum.reduceat(lateness, offsets[:-1]) if n_req else np.empty(0)
    gamma = np.maximum(0.0, worst - cat.d_s)
    sojourn = np.maximum.reduceat(completion, offsets[:-1]) if n_req else np.empty(0)

    keep = arrival >= config.warmup
    kept_len = L[keep]
    seg_keep = np.repeat(keep, L)
    return SimTrace(
        file=file[keep], server=server[keep], beta=beta[keep], nu=nu[keep],
        arrival=arrival[keep], gamma=gamma[keep], wait_e=wait_e[keep],
        wait_d=wait_d[keep], sojourn=sojourn[keep], dbar_entry=dbar_entry[keep],
        offsets=np.concatenate([[0], np.cumsum(kept_len)]),
        completion=completion[seg_keep], tau=cat.tau, d_s=cat.d_s,
        horizon=config.horizon, warmup=config.warmup, n_files=cat.r,
        meta={"seed": seed, "rho_max": rho_max, "requests_total": int(n_req)},
    )


# ---------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class EmpiricalSdtp:
    """``p_hat[i, s]`` = fraction of file ``i`` requests with stall >= sigma_grid[s]."""

    sigma: np.ndarray
    p_hat: np.ndarray
    stderr: np.ndarray
    n: np.ndarray
    excluded: tuple

    def rows(self):
        for i in range(self.p_hat.shape[0]):
            if self.n[i] == 0:
                continue
            for s, sig in enumerate(self.sigma):
                yield i, float(sig), float(self.p_hat[i, s]), float(self.stderr[i, s]), \
                    int(self.n[i])


def empirical_sdtp(trace: SimTrace, sigma_grid) -> EmpiricalSdtp:
    sigma = np.asarray(sigma_grid, float)
    r = trace.n_files
    n = np.bincount(trace.file, minlength=r)
    hits = np.zeros((r, sigma.size))
    for s, sig in enumerate(sigma):
        hits[:, s] = np.bincount(trace.file, weights=trace.gamma >= sig, minlength=r)
    with np.errstate(invalid="ignore", divide="ignore"):
        p_hat = hits / n[:, None]
        stderr = np.sqrt(p_hat * (1 - p_hat) / n[:, None])
    p_hat[n == 0] = np.nan
    stderr[n == 0] = np.nan
    return EmpiricalSdtp(sigma, p_hat, stderr, n, tuple(np.nonzero(n == 0)[0].tolist()))


@dataclass(frozen=True)
class DispersionResult:
    statistic: float
    n_windows: int
    inconclusive: bool
    per_stream: dict


def dispersion_index(epochs, window, start, stop):
    """Variance-to-mean ratio of counts in consecutive windows of ``[start, stop)``."""
    n_win = int((stop - start) // window)
    if n_win < 2:
        return float("nan"), n_win
    counts = np.bincount(((np.asarray(epochs) - start) // window).astype(int)
                         [(epochs >= start) & (epochs < start + n_win * window)],
                         minlength=n_win)
    mean = counts.mean()
    if mean == 0:
        return float("nan"), n_win
    return float(counts.var(ddof=1) / mean), n_win


def second_queue_arrival_check(trace: SimTrace, window=None, min_windows=100,
                               mean_per_window=10.0) -> DispersionResult:
    """Index of dispersion of request arrivals at each edge stream of the origin path.

    The reported statistic is the one of the busiest stream; each stream's
    window defaults to ``mean_per_window`` expected arrivals.
    """
    has = ~np.isnan(trace.dbar_entry)
    start, stop = trace.warmup, trace.horizon
    per_stream = {}
    keys = sorted(set(zip(trace.server[has].tolist(), trace.beta[has].tolist())))
    for j, b in keys:
        sel = has & (trace.server == j) & (trace.beta == b)
        epochs = np.sort(trace.dbar_entry[sel])
        rate = sel.sum() / (stop - start)
        w = window if window is not None else mean_per_window / rate
        stat, n_win = dispersion_index(epochs, w, start, stop)
        per_stream[(j, b)] = (stat, n_win, int(sel.sum()))
    if not per_stream:
        return DispersionResult(float("nan"), 0, True, per_stream)
    busiest = max(per_stream, key=lambda key: per_stream[key][2])
    stat, n_win, _ = per_stream[busiest]
    return DispersionResult(stat, n_win, bool(n_win < min_windows or np.isnan(stat)),
                            per_stream)


def trace_rows(trace: SimTrace):
    """Rows for the request-level trace CSV."""
    for k in range(len(trace)):
        yield (k, int(trace.file[k]), int(trace.server[k]), int(trace.beta[k]),
               int(trace.nu[k]), float(trace.arrival[k]), float(trace.gamma[k]))


def segment_rows(trace: SimTrace):
    """Long-format per-segment rows: request, segment, completion, playback start."""
    for k in range(len(trace)):
        D = trace.segment_completions(k)
        T = trace.play_starts(k)
        for g in range(D.size):
            yield (k, g + 1, float(D[g]), float(T[g]))
