import numpy as np
import pytest
from dataclasses import replace

from stallbound.analysis import point_params
from stallbound.errors import InfeasibleInstanceError
from stallbound.model import (AuxVars, BandwidthWeights, CachePlacement, ControlPoint,
                              ScheduleMatrices, SystemTopology, VideoCatalog,
                              check_feasibility, closest_feasible)
from stallbound.optimizer import (BASELINES, OptimizerSettings, Problem, alternate, baseline,
                                  equal_share_placement, hottest_first_placement,
                                  initial_point, objective_of, optimize_aux,
                                  optimize_scheduling, solve)

from instances import random_instance
from test_analysis import SHAPE_SEEDS

FAST = OptimizerSettings(max_outer=15, epsilon=1e-5)


def two_servers(alpha=(20.0, 20.0), r=2, lam=0.05, L=3):
    topo = SystemTopology(d=[1, 1], e=[1, 1], alpha_d_base=list(alpha),
                          alpha_f_base=list(alpha), eta_d=[0.01] * 2, eta_dbar=[0.01] * 2,
                          eta_e=[0.01] * 2)
    cat = VideoCatalog(L=[L] * r, lam=[lam] * r, weight=[1.0] * r, tau=1.0, d_s=1.0, sigma=1.0)
    return topo, cat


def test_symmetric_servers_split_evenly():
    topo, cat = two_servers()
    pt, trace = solve(topo, cat, FAST, capacity=[3, 3])
    np.testing.assert_allclose(pt.schedule.pi, 0.5, atol=1e-6)
    assert trace.is_monotone()


def test_slow_server_loses_its_traffic():
    topo, cat = two_servers(alpha=(20.0, 0.5))
    start = initial_point(topo, cat, capacity=[0, 0], placement="none")
    start = closest_feasible(start, topo, cat)
    pt, res = optimize_scheduling(topo, cat, start, OptimizerSettings(max_inner=200))
    assert pt.schedule.pi[:, 1].max() < 0.05
    assert res.objective <= objective_of(topo, cat, start)


def test_aux_search_matches_dense_grid():
    topo = SystemTopology.uniform(1, 1, 1, 10.0, 10.0, eta=0.01)
    cat = VideoCatalog(L=[4], lam=[0.3], weight=[1.0], tau=1.0, d_s=2.0, sigma=3.0)
    pt = ControlPoint(ScheduleMatrices([[1.0]], [[[1.0]]], [[[1.0]]]),
                      BandwidthWeights([[1.0]], [[0.5]], [[0.5]]),
                      CachePlacement([[2]], [2]), AuxVars([0.01]))
    best_pt, res = optimize_aux(topo, cat, pt)
    problem = Problem(topo, cat)
    params = point_params(pt)
    grid = np.linspace(1e-4, 10.0, 10_000)
    values = np.array([problem.file_bounds(dict(params, t=np.array([t])))[0]
                       if problem.feasible(dict(params, t=np.array([t]))) else np.inf
                       for t in grid])
    assert np.isfinite(values).sum() > 100
    assert res.objective <= values.min() * (1 + 1e-3)
    assert check_feasibility(topo, cat, best_pt)


@pytest.mark.parametrize("seed", SHAPE_SEEDS[:4])
def test_alternation_is_monotone_and_feasible(seed):
    topo, cat, pt = random_instance(seed, m=2, r=3)
    pt = closest_feasible(pt, topo, cat)
    out, trace = alternate(topo, cat, pt, FAST)
    assert trace.is_monotone()
    assert trace.objectives[-1] <= objective_of(topo, cat, pt) + 1e-12
    assert check_feasibility(topo, cat, out)
    assert np.all(out.placement.counts == np.round(out.placement.counts))
    assert np.all(out.placement.counts.sum(1) <= out.placement.capacity)
    assert np.all(out.placement.counts <= cat.L[None])
    assert max(r.max_violation for r in trace.rows) == 0.0


def test_frozen_variables_do_not_move():
    topo, cat, pt = random_instance(SHAPE_SEEDS[0], m=2, r=3)
    pt = closest_feasible(pt, topo, cat)
    out, _ = alternate(topo, cat, pt, replace(FAST, frozen={"t", "cached"}))
    np.testing.assert_array_equal(out.aux.t, pt.aux.t)
    np.testing.assert_array_equal(out.placement.counts, pt.placement.counts)


def test_opt_no_worse_than_fixed_t():
    topo, cat = two_servers(alpha=(20.0, 12.0), r=3)
    base_pt, base_obj, _ = baseline("FIXED_T", topo, cat, FAST, capacity=[4, 4])
    np.testing.assert_array_equal(base_pt.aux.t, 0.01)
    pt, trace = solve(topo, cat, FAST, capacity=[4, 4], starts=[base_pt])
    assert trace.objectives[-1] <= base_obj


def test_zero_capacity_keeps_empty_cache():
    topo, cat = two_servers()
    pt, _, _ = baseline("PEA", topo, cat, FAST, capacity=[0, 0])
    assert pt.placement.counts.sum() == 0


def test_unknown_baseline_is_rejected():
    topo, cat = two_servers()
    with pytest.raises(ValueError, match="unknown baseline"):
        baseline("NOPE", topo, cat)
    assert len(BASELINES) == 6


def test_placement_initialisations():
    cat = VideoCatalog(L=[3, 5, 2], lam=[0.1, 0.1, 0.3], weight=[1, 1, 1], tau=1.0, d_s=0.0)
    np.testing.assert_array_equal(equal_share_placement(cat, [7]), [[3, 2, 2]])
    np.testing.assert_array_equal(equal_share_placement(cat, [100]), [[3, 5, 2]])
    # hottest first, equal rates break towards the lower index
    np.testing.assert_array_equal(hottest_first_placement(cat, [6]), [[3, 1, 2]])


def test_fixed_t_reports_infeasibility():
    topo = SystemTopology.uniform(1, 1, 1, 0.011, 0.011)
    cat = VideoCatalog(L=[1], lam=[0.001], weight=[1.0], tau=1.0, d_s=0.0)
    with pytest.raises(InfeasibleInstanceError):
        baseline("FIXED_T", topo, cat, FAST, capacity=[0])


def test_settings_validation():
    for bad in (dict(epsilon=0), dict(gamma0=1.5), dict(max_outer=0), dict(prox_weight=0),
                dict(block_order=("schedule", "warp"))):
        with pytest.raises(ValueError):
            OptimizerSettings(**bad)


def test_restore_t_lands_on_feasible_side():
    topo, cat, pt = random_instance(SHAPE_SEEDS[1], m=2, r=3)
    pt = closest_feasible(pt, topo, cat)
    problem = Problem(topo, cat)
    params = point_params(pt)
    too_big = dict(params, t=params["t"] * 1e3)
    assert not problem.feasible(too_big)
    fixed = problem.restore_t(too_big)
    assert fixed is not None and problem.feasible(fixed)
