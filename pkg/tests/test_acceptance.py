"""Acceptance criteria 1-9, each reported as one pass/fail line.

Runtime: a few seconds for most criteria; the optimiser criteria (4, 5, 6)
take several minutes on one core.
"""

import json
import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from stallbound import experiments as X
from stallbound.analysis import delta_terms
from stallbound.cli import main
from stallbound.model import closest_feasible
from stallbound.optimizer import alternate, compare_strategies, initial_point

from conftest import ACCEPTANCE_LINES
from test_analysis import per_v_reference

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def report(number, ok, detail, seconds):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({seconds:.1f}s) {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def desk():
    return X.desk_instance()


def test_criterion_1_bound_validity():
    start = time.time()
    results = [X.bound_validity(seed) for seed in range(20)]
    worst = min(results, key=lambda r: r.slack)
    informative = sum(int(((r.bound < 1) & (r.n[:, None] > 0)).sum()) for r in results)
    elapsed = time.time() - start
    ok = (all(r.requests >= 100_000 and r.sigma.size == 10 for r in results)
          and worst.slack >= 0 and elapsed < 600)
    report(1, ok, f"20 instances, min(bound + 3se - p_hat) = {worst.slack:.3g} "
                  f"(seed {worst.seed}), {informative} unclipped comparisons", elapsed)


def test_criterion_2_delta_closed_form():
    start = time.time()
    rng = np.random.default_rng(0)
    worst, draws, checks = 0.0, 0, 0
    seed = 0
    while draws < 100:
        topo, cat, pt = X.random_instance(seed, max_L=8)
        pt = closest_feasible(pt, topo, cat)
        seed += 1
        for i in range(cat.r):
            for j in range(topo.m):
                if pt.schedule.pi[i, j] == 0:
                    continue
                beta, nu = int(rng.integers(topo.d[j])), int(rng.integers(topo.e[j]))
                for v in range(1, int(cat.L[i]) + 1):
                    got = sum(delta_terms(topo, cat, pt, i, j, beta, nu, v=v))
                    ref = per_v_reference(topo, cat, pt, i, j, beta, nu, v)
                    worst = max(worst, abs(got - ref) / abs(ref))
                    checks += 1
        draws += 1
    elapsed = time.time() - start
    report(2, worst <= 1e-9 and elapsed < 60,
           f"{draws} draws, {checks} comparisons, max relative error {worst:.2e}", elapsed)


def test_criterion_3_pk_fidelity():
    start = time.time()
    errors = {}
    for load in (0.1, 0.3, 0.5, 0.7):
        simulated, analytic = X.pk_fidelity(load)
        errors[load] = abs(simulated / analytic - 1)
    elapsed = time.time() - start
    detail = ", ".join(f"load {k}: {v:.2%}" for k, v in errors.items())
    report(3, max(errors.values()) <= 0.05 and elapsed < 120, detail, elapsed)


def test_criterion_4_convergence(desk):
    start = time.time()
    point = initial_point(desk.topology, desk.catalog, desk.capacity)
    _, trace = alternate(desk.topology, desk.catalog, point)
    elapsed = time.time() - start
    ok = trace.converged and trace.outer_iterations < 300 and trace.is_monotone() \
        and elapsed < 300
    report(4, ok, f"converged={trace.converged} after {trace.outer_iterations} cycles, "
                  f"monotone={trace.is_monotone()}, objective {trace.objectives[-1]:.5g}",
           elapsed)


def test_criterion_5_baseline_dominance(desk):
    start = time.time()
    results = compare_strategies(desk.topology, desk.catalog, capacity=desk.capacity)
    elapsed = time.time() - start
    objective = {name: obj for name, (_, obj) in results.items()}
    baselines = {k: v for k, v in objective.items() if k != "OPT"}
    best = min(baselines, key=baselines.get)
    ok = all(objective["OPT"] <= v for v in baselines.values()) and best != "FIXED_T"
    detail = ", ".join(f"{k} {v:.4g}" for k, v in objective.items())
    report(5, ok, f"{detail}; best baseline {best}", elapsed)


def test_criterion_6_monotone_sweeps():
    start = time.time()
    base = X.sweep_base_instance()
    parts, ok = [], True
    for scenario, direction in X.SWEEP_DIRECTION.items():
        _, values = X.monotone_sweep(base, scenario)
        good = X.is_monotone(values, direction)
        ok &= good
        parts.append(f"{scenario} {'ok' if good else 'NOT monotone'} "
                     f"[{', '.join(f'{v:.4g}' for v in values)}]")
    elapsed = time.time() - start
    report(6, ok and elapsed < 1200, "; ".join(parts), elapsed)


def test_criterion_7_curvature():
    start = time.time()
    minima = {fam: min(v for _, v in X.curvature_axes(fam, count=50, seed=1))
              for fam in ("t", "alpha")}
    elapsed = time.time() - start
    ok = all(v >= -1e-6 for v in minima.values()) and elapsed < 60
    report(7, ok, f"50 axes per family, min second difference t: {minima['t']:.3g}, "
                  f"alpha: {minima['alpha']:.3g}", elapsed)


def test_criterion_8_tandem_dispersion():
    start = time.time()
    results = [X.tandem_dispersion(load, seed) for load, seed in ((0.3, 0), (0.4, 1), (0.5, 2))]
    elapsed = time.time() - start
    ok = all(not r.inconclusive and 0.8 <= r.statistic <= 1.2 for r in results)
    report(8, ok, "dispersion " + ", ".join(f"{r.statistic:.3f}" for r in results), elapsed)


def test_criterion_9_determinism(tmp_path):
    start = time.time()
    tiny = tmp_path / "tiny.json"
    shutil.copy(CONFIGS / "tiny.json", tiny)
    workload = tmp_path / "workload.json"
    workload.write_text(json.dumps({"workload": {"r": 200, "seed": 4}, "d_s": 5.0}))
    runs = [("gen-workload", workload), ("eval-bound", tiny), ("simulate", tiny),
            ("optimize", tiny), ("compare", tiny)]
    mismatched, files = [], 0
    for command, cfg in runs:
        outs = []
        for k in range(2):
            out = tmp_path / f"{command}-{k}"
            assert main([command, "--config", str(cfg), "--out", str(out), "--seed", "11"]) == 0
            outs.append(out)
        for f in sorted(outs[0].iterdir()):
            files += 1
            if f.read_bytes() != (outs[1] / f.name).read_bytes():
                mismatched.append(f"{command}/{f.name}")
    elapsed = time.time() - start
    report(9, not mismatched and files >= 7,
           f"{files} output files compared across two runs, mismatches: {mismatched or 'none'}",
           elapsed)
