"""Engine tests: flow model, compute charging, damage process, ordering."""

import math
import random

import pytest

from pollsim.effort import EffortParams
from pollsim.netsim import (
    DamageProcess,
    Engine,
    Link,
    SimulationError,
    charge_compute,
    flow_time,
    substream,
)


class Actor:
    def __init__(self):
        self.cpu_free_at = 0.0

    def __repr__(self):
        return "Actor()"


def test_flow_time_minimum_bandwidth():
    slow = Link(1.5e6, 0.010)
    fast = Link(1000e6, 0.020)
    assert flow_time(slow, fast, 1.5e6) == pytest.approx(1.0 + 0.030)


def test_flow_time_zero_size_is_latency_sum():
    a, b = Link(10e6, 0.004), Link(10e6, 0.007)
    assert flow_time(a, b, 0) == pytest.approx(0.011)


def test_flow_time_symmetric():
    rng = random.Random(3)
    for _ in range(50):
        a, b = Link.sample(rng), Link.sample(rng)
        size = rng.uniform(0, 1e9)
        assert flow_time(a, b, size) == flow_time(b, a, size)


def test_flow_time_rejects_negative_size():
    with pytest.raises(ValueError):
        flow_time(Link(10e6, 0.001), Link(10e6, 0.001), -1)


def test_link_sampling_within_model():
    rng = random.Random(9)
    for _ in range(200):
        link = Link.sample(rng)
        assert link.bandwidth in (1.5e6, 10e6, 1000e6)
        assert 0.001 <= link.latency <= 0.030


def test_charge_canonical_scaling():
    engine = Engine()
    actor = Actor()
    params = EffortParams.canonical(16)
    done = []
    charge_compute(engine, actor, params.hash_cost, params,
                   lambda _: done.append(engine.now))
    engine.run(until=1e9)
    assert done == [pytest.approx(120.0)]


def test_charge_poll_effort_is_800_seconds():
    engine = Engine()
    actor = Actor()
    params = EffortParams.canonical(16)
    table = params.cost_table()
    charge_compute(engine, actor, table.poll_effort_construct, params,
                   lambda _: None)
    engine.run(until=1e9)
    assert actor.cpu_free_at == pytest.approx(800.0)


def test_sequential_charges_never_interleave():
    engine = Engine()
    actor = Actor()
    params = EffortParams.canonical(16)
    times = []

    def second(_):
        times.append(engine.now)

    def first(_):
        times.append(engine.now)
        charge_compute(engine, actor, params.hash_cost, params, second)

    charge_compute(engine, actor, params.hash_cost, params, first)
    engine.run(until=1e9)
    assert times == [pytest.approx(120.0), pytest.approx(240.0)]


def test_overlapping_charge_raises():
    engine = Engine()
    actor = Actor()
    params = EffortParams.canonical(16)
    charge_compute(engine, actor, params.hash_cost, params, lambda _: None)
    with pytest.raises(SimulationError):
        charge_compute(engine, actor, params.hash_cost, params,
                       lambda _: None)


def test_event_times_nondecreasing_with_fifo_ties():
    engine = Engine()
    seen = []
    engine.schedule(5.0, seen.append, "a")
    engine.schedule(1.0, seen.append, "b")
    engine.schedule(5.0, seen.append, "c")
    engine.schedule(0.0, seen.append, "d")
    engine.run(until=10.0)
    assert seen == ["d", "b", "a", "c"]
    assert engine.now == 10.0


def test_past_event_rejected():
    engine = Engine()
    with pytest.raises(SimulationError):
        engine.schedule(-1.0, lambda _: None)


def test_empty_event_set_is_empty_run():
    engine = Engine()
    engine.run(until=100.0)
    assert engine.events_processed == 0 and engine.now == 100.0


def test_stop_halts_processing():
    engine = Engine()
    seen = []
    engine.schedule(1.0, lambda _: (seen.append(1), engine.stop()))
    engine.schedule(2.0, seen.append, 2)
    engine.run(until=10.0)
    assert seen == [1]
    assert engine.now == 1.0  # clock frozen at the stopping event


def test_substreams_independent_and_deterministic():
    a1 = substream(42, "peer", 1).random()
    a2 = substream(42, "peer", 1).random()
    b = substream(42, "peer", 2).random()
    c = substream(43, "peer", 1).random()
    assert a1 == a2 and a1 != b and a1 != c


def test_damage_counts_match_poisson_mean():
    year = 365.25 * 86400
    engine = Engine()
    victims = list(range(1000))
    hits = []
    DamageProcess(engine, victims, 5 * year, substream(7, "damage"),
                  hits.append)
    engine.run(until=20 * year)
    # Poisson mean 4000, sd ~63; a 6-sigma band is deterministic here
    assert 3600 <= len(hits) <= 4400


def test_damage_rate_matches_deployed_estimate():
    # MTBF 200y reproduces one undetected error per 200 peer-years
    year = 365.25 * 86400
    engine = Engine()
    hits = []
    DamageProcess(engine, range(1000), 200 * year, substream(8, "damage"),
                  hits.append)
    engine.run(until=20 * year)
    assert 60 <= len(hits) <= 140  # mean 100


def test_damage_disabled_by_infinite_mtbf():
    engine = Engine()
    hits = []
    DamageProcess(engine, range(100), math.inf, random.Random(1),
                  hits.append)
    DamageProcess(engine, range(100), None, random.Random(1), hits.append)
    engine.run(until=1e12)
    assert hits == []


def test_damage_rejects_nonpositive_mtbf():
    with pytest.raises(ValueError):
        DamageProcess(Engine(), range(5), 0.0, random.Random(1),
                      lambda v: None)
