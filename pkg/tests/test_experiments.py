import json
from pathlib import Path

import numpy as np
import pytest

from stallbound import experiments as X
from stallbound import io
from stallbound.model import check_feasibility, queue_tables
from stallbound.optimizer import solve_sweep
from stallbound.workload import generate_catalog

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_desk_instance_matches_shipped_config():
    doc = json.loads((CONFIGS / "desk.json").read_text())
    inst = X.desk_instance()
    topo = io.topology_from_dict(doc["topology"])
    for name, value in io.topology_to_dict(topo).items():
        np.testing.assert_array_equal(getattr(inst.topology, name), value)
    cat = generate_catalog(io.workload_from_dict(doc["workload"]))
    np.testing.assert_array_equal(inst.catalog.L, cat.L)
    assert (inst.catalog.d_s, inst.catalog.sigma) == (doc["d_s"], doc["sigma"])


@pytest.mark.parametrize("seed", range(20))
def test_validity_instances_respect_their_envelope(seed):
    topo, cat, pt = X.validity_instance(seed)
    assert topo.m <= 3 and cat.r <= 10 and cat.L.max() <= 10
    np.testing.assert_array_equal(topo.d, topo.e)
    assert topo.d.max() <= 3
    assert check_feasibility(topo, cat, pt)
    for table in queue_tables(topo, cat, pt).values():
        assert np.nanmax(table.rho()) < 0.8


def test_pk_slope_matches_mm1():
    # one segment, no shift: plain M/M/1 with mean wait rho / (alpha - lam)
    lam, alpha = 1.2, 4.0
    topo, cat, pt = X.single_stream(1, lam, alpha, 0.0)
    assert X.pk_mean_wait(topo, cat, pt) == pytest.approx((lam / alpha) / (alpha - lam),
                                                         rel=1e-6)


def test_is_monotone():
    assert X.is_monotone([1, 2, 2, 3], +1)
    assert not X.is_monotone([1, 2, 1.5], +1)
    assert X.is_monotone([3, 2, 2 * (1 + 1e-12)], -1)


def test_solve_sweep_rejects_unknown_cold_mode():
    with pytest.raises(ValueError):
        solve_sweep([], cold="sometimes")
