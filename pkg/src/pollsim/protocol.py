"""Loyal-peer protocol: types, parameters and the pure decision rules.

Peers audit one archival unit by calling opinion polls on it: sample an
inner circle from the reference list, demand provable effort both ways,
tabulate votes into landslide bands, repair on a landslide loss, and
maintain the reference list afterwards.  The event-driven state machines
that drive these rules live in `pollsim.peers`; everything here is pure
given its inputs and an RNG.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from .effort import AuContent, EffortParams, Verdict

DAY = 86400.0
YEAR = 365.25 * DAY
MONTH = YEAR / 12.0

PeerId = int


class AuKind(Enum):
    GOOD = "good"
    BAD = "bad"            # the adversary's replacement version
    DAMAGE = "damage"      # random undetected damage, unique per event


class AuVersion:
    """One version of the preserved AU; versions agree iff ids are equal."""

    __slots__ = ("content", "kind")

    def __init__(self, content: AuContent, kind: AuKind):
        self.content = content
        self.kind = kind

    @property
    def version_id(self) -> bytes:
        return self.content.content_id

    def __eq__(self, other):
        return (isinstance(other, AuVersion)
                and self.content.content_id == other.content.content_id)

    def __hash__(self):
        return hash(self.content.content_id)

    def __repr__(self):
        return f"AuVersion({self.kind.value}, {self.version_id.hex()[:10]})"


@dataclass(frozen=True)
class ProtocolParams:
    """Poll parameters; defaults reflect the simulated deployment."""
    inner_size: int = 20            # N: inner-circle invitees
    quorum: int = 10                # Q: valid inner votes to conclude
    max_minority: int = 3           # D: largest tolerated minority
    max_discredited: int = 3        # A: discredited challenges before alarm
    nominations: int = 10           # I: nominations per inner voter
    entry_max_age: int = 4          # unused reference entries expire (polls)
    poll_interval: float = 3 * MONTH  # R: mean time between own polls
    churn: float = 0.10             # C: friends-list churn fraction
    ref_target_multiplier: int = 3  # target reference size = multiplier * N
    interval_jitter: float = 0.2    # polls at uniform [R(1-j), R(1+j)]

    def __post_init__(self):
        if not 1 <= self.quorum <= self.inner_size:
            raise ValueError("need 1 <= Q <= N")
        if not 0 <= self.max_minority < self.quorum / 2:
            raise ValueError("need D < Q/2 or the landslide bands overlap")
        if not 0.0 <= self.churn <= 1.0:
            raise ValueError("churn factor must be within [0, 1]")
        if self.poll_interval <= 0:
            raise ValueError("poll interval must be positive")

    def next_poll_delay(self, rng: random.Random) -> float:
        """Uniform draw from an interval centered at R."""
        r, j = self.poll_interval, self.interval_jitter
        return rng.uniform(r * (1 - j), r * (1 + j))

    @property
    def ref_target(self) -> int:
        return self.ref_target_multiplier * self.inner_size


# ---------------------------------------------------------------------------
# Messages (star-network datagrams / bulk transfers)

class Poll:
    __slots__ = ("poll_id", "initiator", "dh_key")
    KIND = "poll"

    def __init__(self, poll_id, initiator, dh_key):
        self.poll_id = poll_id
        self.initiator = initiator
        self.dh_key = dh_key


class PollChallenge:
    __slots__ = ("poll_id", "voter", "dh_key", "challenge", "accept")
    KIND = "challenge"

    def __init__(self, poll_id, voter, dh_key, challenge, accept):
        self.poll_id = poll_id
        self.voter = voter
        self.dh_key = dh_key
        self.challenge = challenge
        self.accept = accept


class PollProof:
    __slots__ = ("poll_id", "initiator", "proof")
    KIND = "proof"

    def __init__(self, poll_id, initiator, proof):
        self.poll_id = poll_id
        self.initiator = initiator
        self.proof = proof


class Nominate:
    __slots__ = ("poll_id", "voter", "nominations")
    KIND = "nominate"

    def __init__(self, poll_id, voter, nominations):
        self.poll_id = poll_id
        self.voter = voter
        self.nominations = nominations


class VoteMessage:
    __slots__ = ("poll_id", "voter", "vote")
    KIND = "vote"

    def __init__(self, poll_id, voter, vote):
        self.poll_id = poll_id
        self.voter = voter
        self.vote = vote


class RepairRequest:
    __slots__ = ("poll_id", "requester")
    KIND = "repair_request"

    def __init__(self, poll_id, requester):
        self.poll_id = poll_id
        self.requester = requester


class Repair:
    __slots__ = ("poll_id", "supplier", "au")
    KIND = "repair"

    def __init__(self, poll_id, supplier, au):
        self.poll_id = poll_id
        self.supplier = supplier
        self.au = au


class Release:
    """Session teardown at poll end so committed voters go idle."""
    __slots__ = ("poll_id",)
    KIND = "release"

    def __init__(self, poll_id):
        self.poll_id = poll_id


# ---------------------------------------------------------------------------
# Alarms and poll outcomes

class AlarmKind(Enum):
    INCONCLUSIVE_POLL = "inconclusive_poll"
    LOCAL_SPOOFING = "local_spoofing"
    INTER_POLL_INTERVAL = "inter_poll_interval"


@dataclass(frozen=True)
class Alarm:
    kind: AlarmKind
    peer: PeerId
    time: float
    poll_id: Optional[bytes] = None


class PollOutcome(Enum):
    LANDSLIDE_WIN = "landslide_win"
    LANDSLIDE_LOSS = "landslide_loss"
    INCONCLUSIVE = "inconclusive"
    NO_QUORUM = "no_quorum"


def tabulate(valid: int, agreeing: int, params: ProtocolParams) -> PollOutcome:
    """Three-band tabulation of valid inner-circle votes.

    Below quorum nothing is decided; agreement of at most D is a landslide
    loss, at least V-D a landslide win, anything between is inconclusive
    and raises an alarm.
    """
    if not 0 <= agreeing <= valid:
        raise ValueError(f"agreeing count {agreeing} outside [0, {valid}]")
    if valid < params.quorum:
        return PollOutcome.NO_QUORUM
    if agreeing <= params.max_minority:
        return PollOutcome.LANDSLIDE_LOSS
    if agreeing >= valid - params.max_minority:
        return PollOutcome.LANDSLIDE_WIN
    return PollOutcome.INCONCLUSIVE


class PollPhase(Enum):
    INVITING = "inviting"
    AWAITING_CHALLENGES = "awaiting_challenges"
    COMPUTING_PROOFS = "computing_proofs"
    AWAITING_VOTES = "awaiting_votes"
    TABULATING = "tabulating"
    REPAIRING = "repairing"
    CONCLUDED = "concluded"
    ALARMED = "alarmed"


# ---------------------------------------------------------------------------
# Peer state

class PeerState:
    """One loyal peer's protocol state for the audited AU.

    The reference list is an insertion-ordered mapping of peer id to the
    poll-counter stamp of its last insertion or refresh.  `busy` holds at
    most one commitment: ("init", poll_id) while running an own poll or
    ("vote", poll_id, initiator) while committed to another peer's poll.
    """

    __slots__ = ("id", "au", "reference", "friends", "poll_counter",
                 "refresh_deadline", "busy", "pending_call", "vote_history",
                 "agreed_ever", "last_quorate", "cpu_free_at", "link")

    def __init__(self, peer_id: PeerId, au: AuVersion,
                 friends: Sequence[PeerId], link=None):
        self.id = peer_id
        self.au = au
        self.reference: dict[PeerId, int] = {}
        self.friends = tuple(friends)
        self.poll_counter = 0
        self.refresh_deadline = 0.0
        self.busy = None
        self.pending_call = False
        self.vote_history: list[tuple[bytes, bytes, tuple]] = []
        self.agreed_ever: set[PeerId] = set()
        self.last_quorate = 0.0
        self.cpu_free_at = 0.0
        self.link = link

    @property
    def idle(self) -> bool:
        return self.busy is None

    def __repr__(self):
        return f"PeerState({self.id})"


def bootstrap(state: PeerState, params: ProtocolParams, rng: random.Random,
              now: float = 0.0) -> None:
    """Enter the network: copy the friends list and arm the refresh timer.

    Friends are operator-curated out-of-band relationships, so they start
    out repair-eligible; protocol-earned eligibility accumulates on top.
    Without this a peer damaged before its first vote could never be
    repaired by anyone.
    """
    if not state.friends:
        raise ValueError(f"peer {state.id} has an empty friends list")
    state.reference = {f: state.poll_counter for f in state.friends
                       if f != state.id}
    state.agreed_ever.update(f for f in state.friends if f != state.id)
    state.refresh_deadline = now + params.next_poll_delay(rng)


def record_vote_history(state: PeerState, poll_id: bytes, version_id: bytes,
                        agreeing: Iterable[PeerId]) -> None:
    """Remember who supplied valid agreeing votes in an own poll."""
    voters = tuple(agreeing)
    state.vote_history.append((poll_id, version_id, voters))
    state.agreed_ever.update(voters)


def repair_eligible(state: PeerState, requester: PeerId) -> bool:
    """A repair is supplied only to peers whose past agreement is on file."""
    return requester in state.agreed_ever


def check_interpoll_alarm(state: PeerState, now: float,
                          params: ProtocolParams) -> Optional[Alarm]:
    """Alarm when no own poll has reached quorum for three intervals."""
    if now - state.last_quorate > 3 * params.poll_interval:
        return Alarm(AlarmKind.INTER_POLL_INTERVAL, state.id, now)
    return None


# ---------------------------------------------------------------------------
# Reference-list maintenance

@dataclass
class RefDelta:
    """Reference-list change record, for metrics accounting."""
    added: list = field(default_factory=list)
    removed: list = field(default_factory=list)


def removal_plan(final_verdicts: dict[PeerId, Verdict],
                 params: ProtocolParams,
                 rng: random.Random) -> tuple[list[PeerId], list[PeerId]]:
    """Decide removals after a successful poll: (removed, refreshed).

    All disagreeing inner voters go, plus enough randomly chosen agreeing
    ones to make Q removals in total; surplus agreeing voters beyond the
    bare quorum survive with refreshed stamps, as if they had been outer
    circle.
    """
    disagreeing = [p for p, v in final_verdicts.items()
                   if v is Verdict.DISAGREEING]
    agreeing = [p for p, v in final_verdicts.items()
                if v is Verdict.AGREEING]
    quota = min(max(params.quorum - len(disagreeing), 0), len(agreeing))
    removed_agree = set(rng.sample(agreeing, quota))
    removed = disagreeing + [p for p in agreeing if p in removed_agree]
    refreshed = [p for p in agreeing if p not in removed_agree]
    return removed, refreshed


def apply_success_update(state: PeerState,
                         inner_verdicts: dict[PeerId, Verdict],
                         outer_agreeing: Iterable[PeerId],
                         params: ProtocolParams,
                         rng: random.Random) -> RefDelta:
    """Reference-list update after a landslide win (possibly post-repair).

    Steps: remove the Q votes the decision consumed; restamp surviving
    agreeing inner voters; insert agreeing outer voters; churn in friends
    up to a fraction C of the (pre-churn) list size; expire entries that
    have not voted in the last `entry_max_age` own polls.
    """
    delta = RefDelta()
    ref = state.reference
    stamp = state.poll_counter
    removed, refreshed = removal_plan(inner_verdicts, params, rng)
    for p in removed:
        if ref.pop(p, None) is not None:
            delta.removed.append(p)
    for p in refreshed:
        if p in ref:
            ref[p] = stamp
    for p in outer_agreeing:
        if p != state.id and p not in ref:
            ref[p] = stamp
            delta.added.append(p)
        elif p in ref:
            ref[p] = stamp
    churn_quota = int(params.churn * len(ref))
    candidates = [f for f in state.friends if f not in ref and f != state.id]
    if churn_quota and candidates:
        for p in rng.sample(candidates, min(churn_quota, len(candidates))):
            ref[p] = stamp
            delta.added.append(p)
    cutoff = stamp - params.entry_max_age
    for p in [p for p, t in ref.items() if t <= cutoff]:
        del ref[p]
        delta.removed.append(p)
    return delta


def apply_noquorum_update(state: PeerState,
                          inner_agreeing: Iterable[PeerId],
                          outer_agreeing: Iterable[PeerId]) -> RefDelta:
    """After a poll that failed quorum: refresh or insert agreeing voters
    from both circles, nothing else."""
    delta = RefDelta()
    ref = state.reference
    stamp = state.poll_counter
    for p in list(inner_agreeing) + list(outer_agreeing):
        if p == state.id:
            continue
        if p not in ref:
            delta.added.append(p)
        ref[p] = stamp
    return delta


def remove_reference_entry(state: PeerState, peer: PeerId) -> bool:
    """Drop a misbehaving peer (invalid vote, inconsistent repair)."""
    return state.reference.pop(peer, None) is not None


# ---------------------------------------------------------------------------
# Circles

def select_inner_circle(state: PeerState, params: ProtocolParams,
                        rng: random.Random,
                        exclude: Iterable[PeerId] = ()) -> list[PeerId]:
    """Sample up to N reference-list peers uniformly without replacement."""
    pool = [p for p in state.reference if p not in set(exclude)]
    return rng.sample(pool, min(params.inner_size, len(pool)))


def select_outer_circle(nominations: dict[PeerId, Sequence[PeerId]],
                        excluded: Iterable[PeerId], needed: int,
                        rng: random.Random) -> list[PeerId]:
    """Pick an equal number of fresh nominees from every nomination list.

    Nominees already excluded (reference list, self, current invitees) are
    stripped first.  Every nominator gets a quota of floor(needed / k);
    the remainder goes to nominators chosen by seeded shuffle.  A short
    list is not backfilled from the others, so each nominator's influence
    on the outer circle is capped equally.
    """
    if needed <= 0 or not nominations:
        return []
    excluded = set(excluded)
    fresh: dict[PeerId, list[PeerId]] = {}
    for nominator, names in nominations.items():
        seen: list[PeerId] = []
        for p in names:
            if p not in excluded and p not in seen:
                seen.append(p)
        fresh[nominator] = seen
    nominators = list(fresh)
    rng.shuffle(nominators)
    base, extra = divmod(needed, len(nominators))
    chosen: list[PeerId] = []
    taken: set[PeerId] = set()
    for rank, nominator in enumerate(nominators):
        quota = base + (1 if rank < extra else 0)
        pool = [p for p in fresh[nominator] if p not in taken]
        for p in rng.sample(pool, min(quota, len(pool))):
            chosen.append(p)
            taken.add(p)
    return chosen


# ---------------------------------------------------------------------------
# Poll bookkeeping

class PollRecord:
    """A poll initiator's full per-poll state."""

    __slots__ = (
        "poll_id", "phase", "inner", "outer", "challenges", "accepted",
        "declined", "discredited", "votes", "verdicts", "nominations",
        "proof_queue", "proofed", "junk_proofed", "awaiting", "accept_order",
        "outer_formed", "repair_candidates", "repair_used", "repair_target",
        "repair_adoptions", "timer_gen", "invite_rounds", "valid_inner",
    )

    def __init__(self, poll_id: bytes):
        self.poll_id = poll_id
        self.phase = PollPhase.INVITING
        self.inner: dict[PeerId, bool] = {}    # invitee -> True (membership)
        self.outer: dict[PeerId, bool] = {}
        self.challenges: dict[PeerId, bytes] = {}
        self.accepted: set[PeerId] = set()
        self.declined: set[PeerId] = set()
        self.discredited: set[PeerId] = set()
        self.votes: dict[PeerId, object] = {}
        self.verdicts: dict[PeerId, Verdict] = {}
        self.nominations: dict[PeerId, tuple] = {}
        self.proof_queue: list[PeerId] = []
        self.proofed: set[PeerId] = set()
        self.junk_proofed: set[PeerId] = set()
        self.awaiting: set[PeerId] = set()
        self.accept_order: list[PeerId] = []
        self.outer_formed = False
        self.repair_candidates: list[PeerId] = []
        self.repair_used: set[PeerId] = set()
        self.repair_target: Optional[PeerId] = None
        self.repair_adoptions = 0
        self.timer_gen = 0
        self.invite_rounds = 0
        self.valid_inner: dict[PeerId, Verdict] = {}

    def invitees(self):
        yield from self.inner
        yield from self.outer

    def inner_accepted(self) -> list[PeerId]:
        return [p for p in self.accept_order if p in self.inner]

    def proof_order(self) -> list[PeerId]:
        return list(self.accept_order)


# ---------------------------------------------------------------------------
# Protocol timers

@dataclass(frozen=True)
class TimerTable:
    """Timeouts sized so the slowest plausible machine can finish each step.

    Invitees allow the initiator a memory system `slack` times slower than
    their own; the initiator extends the same courtesy to its voters.
    """
    challenge: float       # wait for PollChallenge responses
    effort: float          # voter waits for its PollProof
    nomination: float      # initiator waits for Nominate messages
    vote: float            # initiator waits for Vote messages
    post_vote_hold: float  # voter stays committed after sending its vote
    repair: float          # initiator waits for one Repair transfer

    @classmethod
    def derive(cls, params: ProtocolParams, effort_params: EffortParams,
               au_bits: float, slack: float = 5.0,
               margin: float = 60.0) -> "TimerTable":
        table = effort_params.cost_table()
        sec = effort_params.seconds
        worst_flow = au_bits / 1.5e6 + 0.060
        return cls(
            challenge=margin,
            effort=slack * params.inner_size * sec(table.poll_effort_construct)
                   + 10 * margin,
            nomination=slack * sec(table.poll_effort_verify) + 2 * margin,
            vote=slack * (sec(table.poll_effort_verify)
                          + sec(table.vote_construct)) + 10 * margin,
            post_vote_hold=slack * params.inner_size
                           * sec(table.vote_verify_agree),
            repair=2 * worst_flow + margin,
        )
