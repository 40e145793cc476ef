import warnings

import numpy as np
import pytest

from stallbound.analysis import cached_download_mgf, queue_stats, shifted_exp_mgf
from stallbound.errors import ConfigurationError
from stallbound.model import (AuxVars, BandwidthWeights, CachePlacement, ControlPoint,
                              ScheduleMatrices, SystemTopology, VideoCatalog,
                              closest_feasible)
from stallbound.simulator import (SaturationWarning, SimConfig, dispersion_index,
                                  empirical_sdtp, run_sim, second_queue_arrival_check,
                                  segment_rows, trace_rows)

from instances import random_instance


def one_stream(L=2, cached=2, lam=0.05, alpha=5.0, eta=0.01, t=0.5, d_s=0.0, sigma=0.0,
               w_e=1.0):
    topo = SystemTopology.uniform(1, 1, 1, alpha, alpha, eta=eta)
    cat = VideoCatalog(L=[L], lam=[lam], weight=[1.0], tau=1.0, d_s=d_s, sigma=sigma)
    pt = ControlPoint(ScheduleMatrices([[1.0]], [[[1.0]]], [[[1.0]]]),
                      BandwidthWeights([[1.0]], [[1.0 - w_e]], [[w_e]]),
                      CachePlacement([[cached]], [L]), AuxVars([t]))
    return topo, cat, pt


def test_uncontended_request_has_no_stall():
    topo, cat, pt = one_stream(L=2, cached=2, lam=1e-4, alpha=1e9, eta=0.0, d_s=0.5)
    trace = run_sim(SimConfig(topo, cat, pt, horizon=1e5, warmup=0.0, seed=1))
    assert len(trace) > 0
    assert np.all(trace.gamma < 1e-6)
    np.testing.assert_allclose(trace.play_starts(0)[0], 0.5)


def test_saturation_warns_and_queue_grows():
    topo, cat, pt = one_stream(L=4, cached=4, lam=2.0, alpha=5.0, eta=0.0)
    with pytest.warns(SaturationWarning):
        trace = run_sim(SimConfig(topo, cat, pt, horizon=2000.0, warmup=0.0, seed=0))
    half = trace.arrival < 1000
    assert trace.wait_e[~half].mean() > 2 * trace.wait_e[half].mean()


def test_zero_rate_dispatch_is_rejected():
    topo, cat, pt = one_stream(w_e=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ConfigurationError):
            run_sim(SimConfig(topo, cat, pt, horizon=1000.0, seed=0))


def test_config_validation():
    topo, cat, pt = one_stream()
    with pytest.raises(ConfigurationError):
        SimConfig(topo, cat, pt, horizon=10.0, warmup=20.0)


def test_same_seed_same_trace_and_new_seed_differs():
    topo, cat, pt = random_instance(2)
    pt = closest_feasible(pt, topo, cat)
    a = run_sim(SimConfig(topo, cat, pt, horizon=3000.0, seed=9))
    b = run_sim(SimConfig(topo, cat, pt, horizon=3000.0, seed=9))
    c = run_sim(SimConfig(topo, cat, pt, horizon=3000.0, seed=10))
    assert list(trace_rows(a)) == list(trace_rows(b))
    assert list(segment_rows(a)) == list(segment_rows(b))
    assert list(trace_rows(a)) != list(trace_rows(c))


def test_cached_stream_is_fifo_and_work_conserving():
    for seed in range(5):
        topo, cat, pt = random_instance(seed)
        pt = closest_feasible(pt, topo, cat)
        tr = run_sim(SimConfig(topo, cat, pt, horizon=4000.0, warmup=0.0, seed=seed))
        n_cached = pt.placement.counts[tr.server, tr.file]
        for j in range(topo.m):
            for k in range(topo.e[j]):
                sel = np.nonzero((tr.server == j) & (tr.nu == k) & (n_cached > 0))[0]
                if sel.size < 2:
                    continue
                start = tr.arrival[sel] + tr.wait_e[sel]
                done = np.array([tr.arrival[r] + tr.segment_completions(r)[n_cached[r] - 1]
                                 for r in sel])
                assert np.all(tr.wait_e[sel] >= -1e-9)
                prev_done = np.concatenate([[-np.inf], done[:-1]])
                # each request starts exactly when it arrives or when the previous one ends
                np.testing.assert_allclose(start, np.maximum(tr.arrival[sel], prev_done),
                                           atol=1e-9)


def test_stall_formula_from_segment_times():
    topo, cat, pt = random_instance(7)
    pt = closest_feasible(pt, topo, cat)
    tr = run_sim(SimConfig(topo, cat, pt, horizon=3000.0, seed=3))
    for k in range(0, len(tr), max(1, len(tr) // 50)):
        T = tr.play_starts(k)
        expected = T[-1] - cat.d_s - (len(T) - 1) * cat.tau
        assert tr.gamma[k] == pytest.approx(max(expected, 0.0), abs=1e-9)
        assert np.all(np.diff(tr.available(k)) >= 0)


def test_empirical_sdtp_boundaries():
    topo, cat, pt = random_instance(3)
    pt = closest_feasible(pt, topo, cat)
    tr = run_sim(SimConfig(topo, cat, pt, horizon=3000.0, seed=0))
    emp = empirical_sdtp(tr, [0.0, float(tr.gamma.max()) + 1.0])
    seen = emp.n > 0
    np.testing.assert_array_equal(emp.p_hat[seen, 0], 1.0)
    np.testing.assert_array_equal(emp.p_hat[seen, 1], 0.0)
    rows = list(emp.rows())
    assert len(rows) == 2 * seen.sum()


def test_cached_transform_against_monte_carlo():
    topo, cat, pt = one_stream()
    tr = run_sim(SimConfig(topo, cat, pt, horizon=2e6, seed=4))
    t, g = 0.5, 2
    samples = np.exp(t * np.array([tr.segment_completions(k)[g - 1] for k in range(len(tr))]))
    mc, se = samples.mean(), samples.std(ddof=1) / np.sqrt(samples.size)
    value = cached_download_mgf(topo, cat, pt, 0, 0, 0, g).value
    stats = queue_stats(topo, cat, pt, "e", 0, 0, t)
    pure_wait = stats.pk_at_t.value / stats.B_at_t.value
    m = shifted_exp_mgf(5.0, 0.01, t).value
    assert abs(pure_wait * m ** g - mc) <= 3 * se
    assert mc <= value + 3 * se


def test_dispersion_controls():
    rng = np.random.default_rng(0)
    poisson = np.cumsum(rng.exponential(1.0, 200_000))
    stat, n_win = dispersion_index(poisson, 10.0, 0.0, 100_000.0)
    assert n_win == 10_000 and 0.9 <= stat <= 1.1
    regular = np.arange(0.0, 100_000.0, 1.0)
    stat, _ = dispersion_index(regular, 10.0, 0.0, 100_000.0)
    assert stat < 0.1


def test_tandem_arrivals_look_poisson():
    topo = SystemTopology.uniform(1, 1, 1, 20.0, 40.0, eta=0.0)
    cat = VideoCatalog(L=[3], lam=[1.5], weight=[1.0], tau=1.0, d_s=0.0)
    pt = ControlPoint(ScheduleMatrices([[1.0]], [[[1.0]]], [[[1.0]]]),
                      BandwidthWeights([[1.0]], [[0.5]], [[0.5]]),
                      CachePlacement([[0]], [3]), AuxVars([0.1]))
    tr = run_sim(SimConfig(topo, cat, pt, horizon=20_000.0, seed=2))
    res = second_queue_arrival_check(tr)
    assert not res.inconclusive
    assert 0.8 <= res.statistic <= 1.2
