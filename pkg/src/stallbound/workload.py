"""Synthetic catalogs and scenario sweeps."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import WorkloadSpecError
from .model import SystemTopology, VideoCatalog


@dataclass(frozen=True)
class WorkloadSpec:
    """Pareto video lengths truncated by rejection at ``max_length``.

    ``lambda_rule`` is a list of ``(fraction, rate)`` pieces: the first
    ``round(fraction * r)`` files get ``rate``, the next piece continues from
    there, and the last piece absorbs rounding.
    """

    r: int = 1000
    pareto_shape: float = 2.0
    pareto_scale: float = 300.0
    max_length: float = 3600.0
    tau: float = 4.0
    lambda_rule: tuple = ((0.5, 0.002), (0.5, 0.003))
    seed: int = 0
    d_s: float = 0.0
    sigma: float = 0.0
    weights: tuple | None = None

    def __post_init__(self):
        if self.r < 1:
            raise WorkloadSpecError("r must be positive")
        if not self.pareto_shape > 1:
            raise WorkloadSpecError("pareto_shape must exceed 1")
        if not self.pareto_scale > 0:
            raise WorkloadSpecError("pareto_scale must be positive")
        if self.max_length < self.pareto_scale:
            raise WorkloadSpecError("max_length must be at least pareto_scale")
        if not self.tau > 0:
            raise WorkloadSpecError("tau must be positive")
        if not self.lambda_rule or any(rate <= 0 or frac < 0 for frac, rate in self.lambda_rule):
            raise WorkloadSpecError("lambda_rule needs nonnegative fractions and positive rates")


def piecewise_rates(r, rule):
    rates = np.empty(r)
    start = 0
    for idx, (frac, rate) in enumerate(rule):
        stop = r if idx == len(rule) - 1 else min(r, start + int(round(frac * r)))
        rates[start:stop] = rate
        start = stop
    return rates


def segments_for_length(length, tau):
    """Length rounded up to a whole number of segments (small float slack)."""
    return np.ceil(np.asarray(length, float) / tau - 1e-9).astype(int)


def truncated_pareto_mean(shape, scale, upper):
    """Mean of a Pareto(shape, scale) conditioned on being below ``upper``."""
    a, s, M = shape, scale, upper
    mass = 1.0 - (s / M) ** a
    if a == 1:
        return s * np.log(M / s) / mass
    return a * s ** a * (s ** (1 - a) - M ** (1 - a)) / ((a - 1) * mass)


def draw_lengths(spec: WorkloadSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    accepted = []
    drawn = 0
    budget = 100 * spec.r
    while len(accepted) < spec.r:
        batch = min(budget - drawn, 2 * (spec.r - len(accepted)) + 16)
        if batch <= 0:
            raise WorkloadSpecError(
                f"only {len(accepted)} of {spec.r} lengths accepted in {budget} draws")
        x = spec.pareto_scale * (rng.pareto(spec.pareto_shape, batch) + 1.0)
        drawn += batch
        accepted.extend(x[x < spec.max_length].tolist())
    return np.asarray(accepted[:spec.r])


def generate_catalog(spec: WorkloadSpec) -> VideoCatalog:
    lengths = draw_lengths(spec)
    weights = np.ones(spec.r) if spec.weights is None else np.asarray(spec.weights, float)
    return VideoCatalog(L=segments_for_length(lengths, spec.tau),
                        lam=piecewise_rates(spec.r, spec.lambda_rule), weight=weights,
                        tau=spec.tau, d_s=spec.d_s, sigma=spec.sigma)


@dataclass(frozen=True)
class Instance:
    topology: SystemTopology
    catalog: VideoCatalog
    capacity: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


SCENARIOS = ("arrival_scale", "rate_scale", "stream_scale", "file_count")


def _scaled_counts(counts, factor):
    return np.maximum(1, np.floor(np.asarray(counts) * factor + 0.5).astype(int))


def scale_instance(base: Instance, scenario: str, factor: float) -> Instance:
    if factor <= 0:
        raise WorkloadSpecError("sweep factors must be positive")
    topo, cat = base.topology, base.catalog
    meta = dict(base.meta, scenario=scenario, factor=factor)
    if scenario == "arrival_scale":
        return replace(base, catalog=replace(cat, lam=cat.lam * factor), meta=meta)
    if scenario == "rate_scale":
        topo = replace(topo, alpha_d_base=topo.alpha_d_base * factor,
                       alpha_f_base=topo.alpha_f_base * factor)
        return replace(base, topology=topo, meta=meta)
    if scenario == "stream_scale":
        topo = replace(topo, d=_scaled_counts(topo.d, factor), e=_scaled_counts(topo.e, factor))
        return replace(base, topology=topo, meta=meta)
    if scenario == "file_count":
        # cyclic replication keeps the per-file mix and grows capacity in proportion
        r_new = max(1, int(np.floor(cat.r * factor + 0.5)))
        idx = np.arange(r_new) % cat.r
        cat = replace(cat, L=cat.L[idx], lam=cat.lam[idx], weight=cat.weight[idx])
        cap = None if base.capacity is None else \
            np.floor(np.asarray(base.capacity) * r_new / base.catalog.r).astype(int)
        return replace(base, catalog=cat, capacity=cap, meta=meta)
    raise WorkloadSpecError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")


def sweep(base: Instance, scenario: str, factors) -> list:
    return [scale_instance(base, scenario, float(f)) for f in factors]
