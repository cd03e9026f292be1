"""Per-run metrics: the append-only event log and its scalar summary."""

from __future__ import annotations

from dataclasses import dataclass, field
from statistics import fmean
from typing import Optional

from ..effort import Verdict
from ..protocol import AlarmKind, AuKind


class MetricsLog:
    """Time-stamped append-only record streams; one instance per run.

    Streams: alarms, poll outcomes, foothold-ratio snapshots, replica
    census snapshots, inter-poll intervals.  Two runs with the same
    (config, seed) produce equal logs.
    """

    def __init__(self):
        self.alarms: list[tuple] = []
        self.polls: list[tuple] = []
        self.foothold: list[tuple] = []
        self.census: list[tuple] = []
        self.intervals: list[tuple] = []

    def streams(self) -> dict[str, list[tuple]]:
        return {"alarms": self.alarms, "polls": self.polls,
                "foothold": self.foothold, "census": self.census,
                "intervals": self.intervals}

    def __eq__(self, other):
        return (isinstance(other, MetricsLog)
                and self.streams() == other.streams())


@dataclass
class RunSummary:
    """Scalar per-run results; everything the figures aggregate."""
    seed: int
    horizon_years: float
    population: int
    malign: int
    first_alarm_time: Optional[float] = None
    alarms_total: int = 0
    alarms_inconclusive: int = 0
    alarms_spoofing: int = 0
    alarms_interpoll: int = 0
    polls_total: int = 0
    polls_quorate: int = 0
    outcomes: dict = field(default_factory=dict)
    mean_interpoll: Optional[float] = None
    max_bad_replica_fraction: float = 0.0    # malign + stealth-damaged
    max_bad_replica_time: float = 0.0
    max_damaged_loyal_fraction: float = 0.0  # loyal holding bad or random
    irrecoverable: bool = False
    irrecoverable_time: Optional[float] = None
    max_avg_foothold: float = 0.0
    final_avg_foothold: float = 0.0
    damage_events: int = 0
    repairs_discarded: int = 0
    attacked_polls: int = 0
    adversary_effort_seconds: float = 0.0
    events_processed: int = 0
    sim_end_time: float = 0.0


_STOP_SETS = {
    "none": frozenset(),
    "inconclusive": frozenset({AlarmKind.INCONCLUSIVE_POLL}),
    "interpoll": frozenset({AlarmKind.INTER_POLL_INTERVAL}),
    "spoofing": frozenset({AlarmKind.LOCAL_SPOOFING}),
    "any": frozenset(AlarmKind),
}


class Metrics:
    """Event hooks wired into the peer actors; maintains O(1) counters."""

    def __init__(self, population: int, loyal_ids, malign_count: int,
                 stop_on_alarm: str = "none"):
        self.population = population
        self.malign = malign_count
        self.log = MetricsLog()
        self.world = None
        self._stop_on = _STOP_SETS[stop_on_alarm]
        # replica census over loyal peers
        self._census = {AuKind.GOOD: len(list(loyal_ids)), AuKind.BAD: 0,
                        AuKind.DAMAGE: 0}
        # foothold accounting: per-peer (malign entries, list size)
        self._foot: dict[int, tuple[int, int]] = {}
        self._frac_sum = 0.0
        self._nonempty = 0
        self.summary_counters = {
            "first_alarm": None, "alarms": {k: 0 for k in AlarmKind},
            "quorate": 0, "polls": 0, "outcomes": {},
            "gaps": [], "max_bad": (0.0, 0.0), "max_damaged": 0.0,
            "irrecoverable": None, "max_foot": 0.0,
            "repairs_discarded": 0,
        }

    def bind(self, world) -> None:
        self.world = world
        self.log.census.append((0.0, self._census[AuKind.GOOD],
                                self._census[AuKind.BAD],
                                self._census[AuKind.DAMAGE], self.malign))

    @property
    def now(self) -> float:
        return self.world.engine.now

    # -- alarms ----------------------------------------------------------

    def on_alarm(self, alarm, rec) -> None:
        c = self.summary_counters
        c["alarms"][alarm.kind] += 1
        if c["first_alarm"] is None:
            c["first_alarm"] = alarm.time
        shared, disagree = self._inconclusive_diagnostics(alarm, rec)
        self.log.alarms.append((alarm.time, alarm.kind.value, alarm.peer,
                                alarm.poll_id, disagree, shared))
        if alarm.kind in self._stop_on:
            self.world.engine.stop()

    def _inconclusive_diagnostics(self, alarm, rec):
        """For inconclusive polls: how many inner votes disagreed, and the
        largest bloc of them sharing one non-initiator version."""
        if rec is None or alarm.kind is not AlarmKind.INCONCLUSIVE_POLL:
            return 0, 0
        actor = self.world.actors.get(alarm.peer)
        my_id = actor.state.au.version_id if actor is not None else None
        counts: dict[bytes, int] = {}
        disagree = 0
        for voter, verdict in rec.valid_inner.items():
            if verdict is Verdict.DISAGREEING:
                disagree += 1
                hint = rec.votes[voter]._content_hint
                if hint is not None and hint != my_id:
                    counts[hint] = counts.get(hint, 0) + 1
        return (max(counts.values()) if counts else 0), disagree

    # -- polls -----------------------------------------------------------

    def on_poll_concluded(self, actor, rec, outcome: str) -> None:
        c = self.summary_counters
        c["polls"] += 1
        c["outcomes"][outcome] = c["outcomes"].get(outcome, 0) + 1
        adv = self.world.adversary
        malign_inner = 0
        attacked = ""
        if adv is not None:
            malign_inner = sum(1 for p in rec.accepted
                               if p in rec.inner and p in adv.nic_ids)
            attacked = adv.attacked_polls.get(rec.poll_id, "")
        valid = len(rec.valid_inner)
        agreeing = sum(1 for v in rec.valid_inner.values()
                       if v is Verdict.AGREEING)
        self.log.polls.append((self.now, actor.id, outcome, valid, agreeing,
                               malign_inner, attacked,
                               rec.repair_adoptions))

    def on_quorate(self, peer_id: int, gap: float) -> None:
        c = self.summary_counters
        c["quorate"] += 1
        c["gaps"].append(gap)
        self.log.intervals.append((self.now, peer_id, gap))

    def on_repair_discarded(self, peer_id: int, supplier: int) -> None:
        self.summary_counters["repairs_discarded"] += 1

    # -- replica census ----------------------------------------------------

    def on_au_changed(self, peer_id: int, old, new) -> None:
        census = self._census
        census[old.kind] -= 1
        census[new.kind] += 1
        t = self.now
        good, bad, dmg = (census[AuKind.GOOD], census[AuKind.BAD],
                          census[AuKind.DAMAGE])
        self.log.census.append((t, good, bad, dmg, self.malign))
        c = self.summary_counters
        bad_frac = (self.malign + bad) / self.population
        if bad_frac > c["max_bad"][0]:
            c["max_bad"] = (bad_frac, t)
        damaged = (bad + dmg) / self.population
        if damaged > c["max_damaged"]:
            c["max_damaged"] = damaged
        if (self.malign + bad + dmg > self.population / 2
                and c["irrecoverable"] is None):
            c["irrecoverable"] = t

    def census_now(self) -> tuple[int, int, int, int]:
        return (self._census[AuKind.GOOD], self._census[AuKind.BAD],
                self._census[AuKind.DAMAGE], self.malign)

    # -- foothold ----------------------------------------------------------

    def on_ref_update(self, peer_id: int, reference: dict, delta) -> None:
        adv = self.world.adversary
        if adv is None:
            return
        nics = adv.nic_ids
        m = sum(1 for p in reference if p in nics)
        size = len(reference)
        old_m, old_size = self._foot.get(peer_id, (0, 0))
        if old_size:
            self._frac_sum -= old_m / old_size
            self._nonempty -= 1
        if size:
            self._frac_sum += m / size
            self._nonempty += 1
        self._foot[peer_id] = (m, size)
        avg = self._frac_sum / self._nonempty if self._nonempty else 0.0
        c = self.summary_counters
        if avg > c["max_foot"]:
            c["max_foot"] = avg
        self.log.foothold.append((self.now, avg))

    def avg_foothold(self) -> float:
        return self._frac_sum / self._nonempty if self._nonempty else 0.0

    # -- summary -----------------------------------------------------------

    def finish(self, seed: int, horizon_years: float, damage_events: int,
               adversary) -> RunSummary:
        c = self.summary_counters
        alarms = c["alarms"]
        gaps = c["gaps"]
        return RunSummary(
            seed=seed,
            horizon_years=horizon_years,
            population=self.population,
            malign=self.malign,
            first_alarm_time=c["first_alarm"],
            alarms_total=sum(alarms.values()),
            alarms_inconclusive=alarms[AlarmKind.INCONCLUSIVE_POLL],
            alarms_spoofing=alarms[AlarmKind.LOCAL_SPOOFING],
            alarms_interpoll=alarms[AlarmKind.INTER_POLL_INTERVAL],
            polls_total=c["polls"],
            polls_quorate=c["quorate"],
            outcomes=dict(c["outcomes"]),
            mean_interpoll=fmean(gaps) if gaps else None,
            max_bad_replica_fraction=c["max_bad"][0],
            max_bad_replica_time=c["max_bad"][1],
            max_damaged_loyal_fraction=c["max_damaged"],
            irrecoverable=c["irrecoverable"] is not None,
            irrecoverable_time=c["irrecoverable"],
            max_avg_foothold=c["max_foot"],
            final_avg_foothold=self.avg_foothold(),
            damage_events=damage_events,
            repairs_discarded=c["repairs_discarded"],
            attacked_polls=len(adversary.attacked_polls) if adversary else 0,
            adversary_effort_seconds=(adversary.pool.busy_seconds
                                      if adversary else 0.0),
            events_processed=self.world.engine.events_processed,
            sim_end_time=self.world.engine.now,
        )
