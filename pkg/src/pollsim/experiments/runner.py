"""Scenario runner: one engine instance per (config, seed), plus batch
execution, the two-phase stealth campaign and aggregation."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from multiprocessing import get_context
from statistics import quantiles
from typing import Optional

from .. import adversary as adversary_mod
from ..adversary import Adversary, Strategy
from ..effort import AuContent
from ..netsim import DamageProcess, Engine, Link, substream
from ..peers import LoyalPeer, World
from ..protocol import AuKind, AuVersion, PeerState, TimerTable
from .config import ConfigError, ScenarioConfig
from .metrics import Metrics, MetricsLog, RunSummary
from .output import Table
from .population import build_population, pick_subverted


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    summaries: list[RunSummary]
    logs: dict[int, MetricsLog]


def run_single(config: ScenarioConfig, seed: int,
               keep_log: bool = True) -> tuple[RunSummary,
                                               Optional[MetricsLog]]:
    """One deterministic run; identical (config, seed) gives identical
    summaries and logs."""
    engine = Engine()
    params = config.protocol_params()
    eparams = config.effort_params()
    timers = TimerTable.derive(params, eparams, config.au_bits)

    friends = build_population(config, substream(seed, "population"))
    subverted = pick_subverted(config, substream(seed, "subversion"))
    malign = set(subverted)
    loyal_ids = [p for p in range(config.peers) if p not in malign]

    metrics = Metrics(config.peers, loyal_ids, len(subverted),
                      config.stop_on_alarm)
    world = World(engine, params, eparams, timers, config.au_bits, metrics,
                  seed)
    good_au = AuVersion(AuContent(b"good-au", config.au_blocks,
                                  config.block_cost), AuKind.GOOD)
    bad_au = AuVersion(AuContent(b"bad-au", config.au_blocks,
                                 config.block_cost), AuKind.BAD)
    world.good_au = good_au

    link_rng = substream(seed, "links")
    links = [Link.sample(link_rng) for _ in range(config.peers)]

    peers: list[LoyalPeer] = []
    for pid in loyal_ids:
        state = PeerState(pid, good_au, friends[pid], links[pid])
        actor = LoyalPeer(world, state, substream(seed, "peer", pid))
        world.actors[pid] = actor
        peers.append(actor)

    adv = None
    if config.adversary != "none":
        adv = Adversary(world, Strategy(config.adversary),
                        config.total_cpus(), subverted,
                        substream(seed, "adversary"), config.nic_cap)
        for nic in subverted:
            adv.register_nic(nic, links[nic], friends[nic])
        adv.good_au = good_au
        adv.bad_au = bad_au
        world.adversary = adv

    metrics.bind(world)
    for actor in peers:
        actor.start()

    if adv is not None:
        if config.adversary == "stealth_attack":
            _seed_foothold(config, peers, adv, substream(seed, "foothold"))
            # a completed lurk phase precedes an attack run: every loyal
            # peer has long since supplied agreeing votes in malign polls
            adv.shared_history.update(loyal_ids)
        for actor in peers:
            metrics.on_ref_update(actor.id, actor.state.reference, None)
        adv.start()

    def on_damage(actor):
        old = actor.state.au
        actor.state.au = world.fresh_damage_au()
        metrics.on_au_changed(actor.id, old, actor.state.au)

    damage = DamageProcess(engine, peers, config.damage_mtbf_seconds,
                           substream(seed, "damage"), on_damage)

    engine.run(config.horizon_seconds)
    summary = metrics.finish(seed, config.horizon_years, damage.events, adv)
    return summary, (metrics.log if keep_log else None)


def _seed_foothold(config: ScenarioConfig, peers, adv: Adversary,
                   rng) -> None:
    """Initialize loyal reference lists at a given foothold ratio.

    Default: per-entry Bernoulli replacement with a fresh malign identity;
    the exact variant replaces round(ratio * size) entries per list.
    """
    ratio = config.initial_foothold
    if ratio <= 0:
        return
    for actor in peers:
        ref = actor.state.reference
        loyal_entries = [p for p in ref if p not in adv.nic_ids]
        have = len(ref) - len(loyal_entries)
        want = ratio * len(ref)
        if config.foothold_exact:
            count = max(0, round(want) - have)
            targets = rng.sample(loyal_entries,
                                 min(count, len(loyal_entries)))
        else:
            p = max(0.0, (want - have) / max(len(loyal_entries), 1))
            targets = [q for q in loyal_entries if rng.random() < p]
        for old in targets:
            stamp = ref.pop(old)
            nic = adv.mint_nics(1)
            ref[nic[0] if nic else old] = stamp


def _run_job(args) -> RunSummary:
    config, seed = args
    summary, _ = run_single(config, seed, keep_log=False)
    return summary


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """One run per seed; stealth campaigns split into lurk and attack runs
    are driven by `stealth_campaign`."""
    logs: dict[int, MetricsLog] = {}
    summaries: list[RunSummary] = []
    if config.workers > 1 and len(config.seeds) > 1:
        with get_context("fork").Pool(config.workers) as pool:
            summaries = pool.map(_run_job,
                                 [(config, s) for s in config.seeds])
    else:
        for seed in config.seeds:
            summary, log = run_single(config, seed)
            summaries.append(summary)
            logs[seed] = log
    return ScenarioResult(config, summaries, logs)


def stealth_campaign(base: ScenarioConfig, lurk_seeds, attack_seeds,
                     attack_foothold: Optional[float] = None,
                     ) -> tuple[ScenarioResult, ScenarioResult, float]:
    """The two-phase stealth split: lurking runs find the adversary's
    achievable foothold; attacking runs start from it."""
    lurk_cfg = base.replace(adversary="stealth_lurk",
                            seeds=tuple(lurk_seeds),
                            initial_foothold=0.0, stop_on_alarm="none")
    lurk = run_scenario(lurk_cfg)
    achieved = attack_foothold
    if achieved is None:
        achieved = max(s.max_avg_foothold for s in lurk.summaries)
    attack_cfg = base.replace(adversary="stealth_attack",
                              seeds=tuple(attack_seeds),
                              initial_foothold=achieved,
                              horizon_years=min(base.horizon_years, 10.0),
                              stop_on_alarm="inconclusive")
    attack = run_scenario(attack_cfg)
    return lurk, attack, achieved


# ---------------------------------------------------------------------------
# Aggregation

SUMMARY_COLUMNS = [f.name for f in dataclasses.fields(RunSummary)
                   if f.name != "outcomes"]


def summaries_table(summaries: list[RunSummary]) -> Table:
    rows = []
    for s in summaries:
        rows.append(tuple(getattr(s, c) for c in SUMMARY_COLUMNS))
    return Table(SUMMARY_COLUMNS, rows)


def aggregate(groups: list[tuple[object, ScenarioConfig,
                                 list[RunSummary]]],
              metric: str) -> Table:
    """Min/avg/max and quartiles of one metric, keyed by swept parameter.

    Runs lacking the metric (e.g. no alarm fired) are excluded from the
    statistics; their share is reported in the no_value_fraction column.
    """
    columns = ["key", "runs", "min", "q1", "median", "q3", "max", "mean",
               "no_value_fraction"]
    rows = []
    for key, config, summaries in groups:
        if not summaries:
            raise ValueError("cannot aggregate an empty group")
        shapes = {(s.population, s.malign, s.horizon_years)
                  for s in summaries}
        if len(shapes) != 1:
            raise ValueError("mixed-config aggregation rejected")
        values = [getattr(s, metric) for s in summaries]
        missing = sum(1 for v in values if v is None)
        present = sorted(v for v in values if v is not None)
        if present:
            if len(present) >= 2:
                q1, med, q3 = quantiles(present, n=4, method="inclusive")
            else:
                q1 = med = q3 = present[0]
            stats = [present[0], q1, med, q3, present[-1],
                     sum(present) / len(present)]
        else:
            stats = [None] * 6
        rows.append(tuple([key, len(summaries)] + stats
                          + [missing / len(values)]))
    return Table(columns, rows)


def sweep(base: ScenarioConfig, param: str, values: list,
          metric: str = "first_alarm_time",
          ) -> tuple[Table, list[ScenarioResult]]:
    """Run the scenario once per parameter value and aggregate."""
    groups = []
    results = []
    for value in values:
        cfg = base.replace(**{param: value})
        result = run_scenario(cfg)
        results.append(result)
        groups.append((value, cfg, result.summaries))
    return aggregate(groups, metric), results
