import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings, strategies as st

from stallbound.errors import WorkloadSpecError
from stallbound.model import SystemTopology
from stallbound.workload import (Instance, WorkloadSpec, draw_lengths, generate_catalog,
                                 piecewise_rates, scale_instance, segments_for_length, sweep,
                                 truncated_pareto_mean)


def test_lengths_respect_pareto_support():
    cat = generate_catalog(WorkloadSpec(r=1000, seed=1))
    assert cat.L.min() >= 75
    assert cat.L.max() <= 900


def test_round_up_to_segments():
    assert segments_for_length(301.2, 4.0) == 76
    assert segments_for_length(304.0, 4.0) == 76
    assert segments_for_length(304.0000001, 4.0) == 77


def test_truncated_mean_matches_closed_form():
    spec = WorkloadSpec(r=100_000, seed=11)
    mean = draw_lengths(spec).mean()
    expected = truncated_pareto_mean(2.0, 300.0, 3600.0)
    assert expected == pytest.approx(553.85, abs=0.05)
    assert mean == pytest.approx(expected, rel=0.02)


def test_default_arrival_rule():
    cat = generate_catalog(WorkloadSpec(r=1000))
    assert np.all(cat.lam[:500] == 0.002) and np.all(cat.lam[500:] == 0.003)
    np.testing.assert_array_equal(piecewise_rates(5, ((0.4, 1.0), (0.6, 2.0))),
                                  [1, 1, 2, 2, 2])


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=20, deadline=None)
def test_generation_is_deterministic(seed):
    a = generate_catalog(WorkloadSpec(r=40, seed=seed))
    b = generate_catalog(WorkloadSpec(r=40, seed=seed))
    np.testing.assert_array_equal(a.L, b.L)
    c = generate_catalog(WorkloadSpec(r=40, seed=seed + 1))
    assert not np.array_equal(a.L, c.L)


def test_spec_validation():
    for bad in (dict(pareto_shape=1.0), dict(pareto_scale=0.0), dict(max_length=10.0),
                dict(tau=0.0), dict(r=0), dict(lambda_rule=((1.0, 0.0),))):
        with pytest.raises(WorkloadSpecError):
            WorkloadSpec(**bad)


def test_rejection_budget_is_enforced():
    # max_length just above the scale accepts almost nothing
    with pytest.raises(WorkloadSpecError):
        draw_lengths(WorkloadSpec(r=50, pareto_shape=50.0, max_length=300.0001))


def base_instance():
    topo = SystemTopology.uniform(2, 20, 40, 82.0, 82.0, eta=0.014)
    cat = generate_catalog(WorkloadSpec(r=10, seed=3))
    return Instance(topo, cat, capacity=np.array([100, 100]))


def test_sweep_scenarios():
    base = base_instance()
    same = scale_instance(base, "arrival_scale", 1.0)
    np.testing.assert_array_equal(same.catalog.lam, base.catalog.lam)
    doubled = scale_instance(base, "rate_scale", 2.0)
    np.testing.assert_allclose(doubled.topology.alpha_d_base, 2 * base.topology.alpha_d_base)
    np.testing.assert_allclose(doubled.topology.alpha_f_base, 2 * base.topology.alpha_f_base)
    streams = scale_instance(base, "stream_scale", 1.25)
    assert list(streams.topology.d) == [25, 25] and list(streams.topology.e) == [50, 50]
    more = scale_instance(base, "file_count", 2.0)
    assert more.catalog.r == 20 and list(more.capacity) == [200, 200]
    np.testing.assert_array_equal(more.catalog.L[10:], base.catalog.L)
    assert [i.meta["factor"] for i in sweep(base, "arrival_scale", [0.5, 1, 2])] == [0.5, 1, 2]


def test_sweep_rejects_bad_input():
    base = base_instance()
    with pytest.raises(WorkloadSpecError):
        scale_instance(base, "arrival_scale", 0.0)
    with pytest.raises(WorkloadSpecError):
        scale_instance(base, "warp_speed", 1.0)


def test_stream_scale_never_drops_below_one():
    base = replace(base_instance(), topology=SystemTopology.uniform(1, 1, 1, 5.0, 5.0))
    shrunk = scale_instance(base, "stream_scale", 0.1)
    assert shrunk.topology.d[0] == 1 and shrunk.topology.e[0] == 1
