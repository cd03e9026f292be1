"""Adversary tests: vulnerability criteria, CPU pool, strategy scripts."""

import math
import random

import pytest

from pollsim.adversary import (
    Adversary,
    CpuPool,
    Strategy,
    nuisance_vulnerable,
    stealth_vulnerable,
)
from pollsim.experiments import ScenarioConfig, run_single
from pollsim.netsim import Engine
from pollsim.protocol import AlarmKind, YEAR


# --- vulnerability criteria --------------------------------------------------

def test_stealth_vulnerability_examples():
    assert stealth_vulnerable(7, 3, 10, 3)            # all three hold
    assert not stealth_vulnerable(6, 4, 10, 3)        # L > D
    assert stealth_vulnerable(10, 0, 10, 3)           # M = Q boundary
    assert not stealth_vulnerable(5, 4, 10, 3)        # below quorum
    assert not stealth_vulnerable(5, 5, 10, 3)        # no majority


def test_nuisance_vulnerability_examples():
    assert nuisance_vulnerable(6, 4, 10, 3)           # forced inconclusive
    assert not nuisance_vulnerable(3, 7, 10, 3)       # M <= D
    assert not nuisance_vulnerable(0, 10, 10, 3)      # no malign votes
    assert not nuisance_vulnerable(6, 3, 10, 3)       # loyal lose quietly


# --- CPU pool ---------------------------------------------------------------

def test_pool_serializes_on_limited_cpus():
    engine = Engine()
    pool = CpuPool(engine, 2)
    done = []
    for i in range(4):
        pool.submit(100.0, done.append, i)
    engine.run(1e9)
    assert done == [0, 1, 2, 3]
    # two CPUs, four 100s jobs: finished at 100,100,200,200
    assert engine.now == 1e9 and pool.busy_seconds == 400.0


def test_pool_accounting_bounded_by_cpus_times_window():
    engine = Engine()
    pool = CpuPool(engine, 3)
    rng = random.Random(1)
    end = 0.0
    for _ in range(50):
        end = max(end, pool.submit(rng.uniform(1, 50), lambda _: None))
    engine.run(1e9)
    assert pool.busy_seconds <= 3 * end + 1e-9


def test_infinite_pool_runs_everything_concurrently():
    engine = Engine()
    pool = CpuPool(engine, math.inf)
    stamps = []
    for _ in range(5):
        pool.submit(60.0, lambda _: stamps.append(engine.now))
    engine.run(1e9)
    assert stamps == [60.0] * 5


def test_pool_rejects_zero_cpus():
    with pytest.raises(ValueError):
        CpuPool(Engine(), 0)


# --- shared scenario helpers -------------------------------------------------

TINY = dict(peers=60, cluster_size=30, inner_size=10, quorum=5,
            max_minority=2, nominations=5, churn=0.10)


def tiny_config(**kw):
    base = dict(TINY)
    base.update(kw)
    return ScenarioConfig(**base)


# --- subversion arithmetic ---------------------------------------------------

def test_subverted_count_and_cpu_pool_sizing():
    cfg = ScenarioConfig(peers=1000, subversion=0.30, extra_cpus=100,
                         adversary="stealth_lurk")
    assert cfg.subverted_count() == 300
    assert cfg.total_cpus() == 400           # 1000 * 30% + 100
    assert 1000 - cfg.subverted_count() == 700


def test_zero_subversion_is_pure_fault_study():
    cfg = tiny_config(damage_mtbf_years=5.0, horizon_years=1.0)
    s, _ = run_single(cfg, 1, keep_log=False)
    assert s.malign == 0 and s.attacked_polls == 0


def test_foothold_initialization_bernoulli_mean():
    cfg = tiny_config(peers=200, adversary="stealth_attack",
                      subversion=0.10, extra_cpus=math.inf,
                      initial_foothold=0.40, horizon_years=0.01)
    s, _ = run_single(cfg, 3, keep_log=False)
    # per-entry Bernoulli(0.40) replacement: population average near 0.40
    assert 0.33 <= s.final_avg_foothold <= 0.47


def test_foothold_initialization_exact_variant():
    cfg = tiny_config(peers=200, adversary="stealth_attack",
                      subversion=0.10, extra_cpus=math.inf,
                      initial_foothold=0.40, foothold_exact=True,
                      horizon_years=0.01)
    s, _ = run_single(cfg, 3, keep_log=False)
    assert 0.36 <= s.final_avg_foothold <= 0.44


# --- stealth lurk -----------------------------------------------------------

def test_stealth_lurk_grows_foothold_without_damage():
    cfg = tiny_config(adversary="stealth_lurk", subversion=0.20,
                      extra_cpus=math.inf, horizon_years=4.0)
    s, log = run_single(cfg, 2)
    # nominations of malign identities outpace churn dilution
    assert s.max_avg_foothold > 0.28
    # lurk is read-only: no loyal peer ever holds the bad version
    assert all(row[2] == 0 for row in log.census)
    assert s.attacked_polls == 0


def test_stealth_callers_never_invite_malign_peers():
    cfg = tiny_config(adversary="stealth_lurk", subversion=0.20,
                      extra_cpus=math.inf, horizon_years=2.0)
    holder = {}
    from pollsim.experiments.metrics import Metrics
    orig_bind = Metrics.bind

    def bind(self, world):
        holder["world"] = world
        orig_bind(self, world)

    Metrics.bind = bind
    try:
        run_single(cfg, 4, keep_log=False)
    finally:
        Metrics.bind = orig_bind
    adv = holder["world"].adversary
    # a malign NIC invited into a poll records the initiator; none of
    # those initiators may be a malign caller
    assert adv.per_poll
    assert all(plan.initiator not in adv.nic_ids
               for plan in adv.per_poll.values())
    # and lurk votes were all cast on the good version
    for plan in adv.per_poll.values():
        for version in plan.votes_cast.values():
            assert version.version_id == adv.good_au.version_id


def test_adversary_compute_accounting_within_pool_budget():
    cfg = tiny_config(adversary="stealth_lurk", subversion=0.20,
                      cpus=4, horizon_years=1.0)
    s, _ = run_single(cfg, 5, keep_log=False)
    assert s.adversary_effort_seconds <= 4 * s.sim_end_time + 1e-6
    assert s.adversary_effort_seconds > 0


# --- stealth attack ----------------------------------------------------------

def test_stealth_attack_flips_vulnerable_polls_without_alarms():
    cfg = tiny_config(adversary="stealth_attack", subversion=0.25,
                      extra_cpus=math.inf, initial_foothold=0.75,
                      horizon_years=2.0, stop_on_alarm="none",
                      damage_mtbf_years=200.0)
    s, log = run_single(cfg, 7)
    attacked = {r[0] for r in log.polls if r[6] == "stealth"}
    assert attacked, "expected at least one vulnerable poll"
    # an Eq.1-3 attack concludes as a landslide for the bad version:
    # never inconclusive at that poll
    for row in log.polls:
        if row[6] == "stealth":
            assert row[2] in ("win_after_repair", "win", "no_quorum")
    # some loyal replicas now hold the bad version
    assert s.max_bad_replica_fraction > s.malign / s.population


def test_stealth_attack_repairs_supply_the_voted_version():
    cfg = tiny_config(adversary="stealth_attack", subversion=0.25,
                      extra_cpus=math.inf, initial_foothold=0.75,
                      horizon_years=2.0, damage_mtbf_years=200.0)
    s, log = run_single(cfg, 11)
    flipped = [r for r in log.census if r[2] > 0]
    assert flipped, "a victim adopted the bad version via repair"


# --- nuisance ----------------------------------------------------------------

def test_nuisance_calls_no_polls_and_forces_inconclusive():
    cfg = tiny_config(adversary="nuisance", subversion=0.10, cpus=64,
                      horizon_years=3.0, stop_on_alarm="inconclusive",
                      damage_mtbf_years=200.0)
    s, log = run_single(cfg, 9)
    # the nuisance adversary does not call polls: every poll in the log
    # was initiated by a loyal peer
    malign = set(range(60)) - {r[1] for r in log.polls}
    assert all(r[1] < 60 for r in log.polls)
    if s.first_alarm_time is not None:
        attacked_rows = [r for r in log.polls if r[6] == "nuisance"]
        assert attacked_rows
        # the attacked poll is the one that raised the alarm
        alarm = log.alarms[0]
        assert alarm[1] == AlarmKind.INCONCLUSIVE_POLL.value
        assert attacked_rows[-1][0] == pytest.approx(alarm[0], abs=5000)


def test_attrition_declines_all_invitations():
    cfg = tiny_config(adversary="attrition", subversion=0.05, cpus=4,
                      horizon_years=0.5, stop_on_alarm="none")
    s, log = run_single(cfg, 13)
    # attrition peers never vote: no poll ever counts a malign vote
    assert all(r[5] == 0 or r[2] in ("aborted",) for r in log.polls)
    assert s.adversary_effort_seconds > 0
