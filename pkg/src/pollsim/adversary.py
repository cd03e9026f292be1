"""Shared-knowledge adversary: stealth, nuisance and attrition strategies.

The adversary is one multi-homed node: a pool of CPUs that can perform any
NIC's work instantaneously on its behalf, incorruptible copies of the good
and bad AU versions, and total information awareness across its identities.
Per-poll behavior follows the strategy scripts: look loyal, except that
nominations push only malign identities, and the vote's AU version is
chosen by delayed commitment when the first malign vote must be computed.
"""

from __future__ import annotations

import heapq
import math
import random
from enum import Enum
from typing import Optional

from . import effort, protocol
from .effort import Verdict
from .netsim import Link
from .peers import CONTROL_BITS, World
from .protocol import (
    AuKind,
    AuVersion,
    Nominate,
    Poll,
    PollChallenge,
    PollProof,
    Release,
    Repair,
    VoteMessage,
)


class Strategy(Enum):
    STEALTH_LURK = "stealth_lurk"
    STEALTH_ATTACK = "stealth_attack"
    NUISANCE = "nuisance"
    ATTRITION = "attrition"


def stealth_vulnerable(malign: int, loyal: int, quorum: int,
                       max_minority: int) -> bool:
    """A poll the stealth adversary can flip without detection.

    Needs a quorum of participants, a malign absolute majority, and few
    enough loyal votes that the loss is a landslide rather than an alarm.
    """
    return (malign + loyal >= quorum and malign > loyal
            and loyal <= max_minority)


def nuisance_vulnerable(malign: int, loyal: int, quorum: int,
                        max_minority: int) -> bool:
    """A poll the nuisance adversary can force inconclusive.

    Needs a quorum, loyal votes too many to lose quietly, and malign votes
    too many to permit a loyal landslide win.
    """
    return (malign + loyal >= quorum and loyal > max_minority
            and malign > max_minority)


class CpuPool:
    """FIFO pool of identical CPUs with perfect work balancing.

    Any NIC's work can be served by any CPU; total concurrent effort never
    exceeds the pool size, and `busy_seconds` accumulates every charged
    second for the accounting invariant.
    """

    def __init__(self, engine, cpus: float):
        self.engine = engine
        self.cpus = cpus
        self._free: Optional[list[float]] = (
            None if math.isinf(cpus) else [0.0] * int(cpus))
        if self._free is not None and not self._free:
            raise ValueError("adversary needs at least one CPU")
        self.busy_seconds = 0.0
        self.pending = 0

    def submit(self, seconds: float, fn, arg=None) -> float:
        now = self.engine.now
        if self._free is None:
            start = now
        else:
            start = max(now, heapq.heappop(self._free))
            heapq.heappush(self._free, start + seconds)
        done = start + seconds
        self.busy_seconds += seconds
        self.pending += 1
        self.engine.schedule(done - now, self._complete, (fn, arg))
        return done

    def backlog_jobs(self) -> int:
        return self.pending

    def _complete(self, job) -> None:
        self.pending -= 1
        fn, arg = job
        fn(arg)


class _Nic:
    """Actor facade for one adversary identity."""

    __slots__ = ("adversary", "nic_id", "link")

    def __init__(self, adversary: "Adversary", nic_id: int, link: Link):
        self.adversary = adversary
        self.nic_id = nic_id
        self.link = link

    def dispatch(self, msg) -> None:
        self.adversary.dispatch(self.nic_id, msg)

    def __repr__(self):
        return f"Nic({self.nic_id})"


class _PollPlan:
    """Adversary-side view of one loyal-initiated poll."""

    __slots__ = ("poll_id", "initiator", "invited", "challenges", "version",
                 "attacked", "votes_cast")

    def __init__(self, poll_id, initiator):
        self.poll_id = poll_id
        self.initiator = initiator
        self.invited: list[int] = []        # NICs that received Poll
        self.challenges: dict[int, bytes] = {}
        self.version: Optional[AuVersion] = None
        self.attacked = False
        self.votes_cast: dict[int, AuVersion] = {}


class Adversary:
    """AdversaryState plus the per-strategy scripts."""

    def __init__(self, world: World, strategy: Strategy, cpus: float,
                 subverted: list[int], rng: random.Random,
                 nic_cap: Optional[int] = None):
        self.world = world
        self.strategy = strategy
        self.rng = rng
        self.pool = CpuPool(world.engine, cpus)
        self.cpus = cpus
        self.subverted = list(subverted)
        self.nic_ids: set[int] = set(subverted)
        self.nic_cap = nic_cap
        self._next_nic = 1_000_000_000
        self.good_au: Optional[AuVersion] = None
        self.bad_au: Optional[AuVersion] = None
        self.per_poll: dict[bytes, _PollPlan] = {}
        self.shared_history: set[int] = set()   # peers owed a repair
        self.attacked_polls: dict[bytes, str] = {}
        self.callers: dict[int, "_Caller"] = {}
        self.nic_friends: dict[int, tuple] = {}
        self._bogus_seq = 0
        self._handlers = {
            "poll": self._on_poll,
            "proof": self._on_proof,
            "repair_request": self._on_repair_request,
            "challenge": self._on_challenge,
            "nominate": self._on_nominate,
            "vote": self._on_vote,
            "repair": self._ignore,
            "release": self._ignore,
        }

    # -- identity management -------------------------------------------

    def register_nic(self, nic_id: int, link: Link,
                     friends: tuple = ()) -> _Nic:
        nic = _Nic(self, nic_id, link)
        self.world.actors[nic_id] = nic
        self.nic_ids.add(nic_id)
        if friends:
            self.nic_friends[nic_id] = tuple(friends)
        return nic

    def mint_nics(self, count: int) -> list[int]:
        """Fresh malign identities (IP addresses are unconstrained)."""
        if self.nic_cap is not None:
            count = min(count, max(0, self.nic_cap - len(self.nic_ids)))
        fresh = []
        for _ in range(count):
            nic_id = self._next_nic
            self._next_nic += 1
            self.register_nic(nic_id, Link.sample(self.rng))
            fresh.append(nic_id)
        return fresh

    def nomination_block(self) -> list[int]:
        """The next slice of malign NICs to push into an outer circle."""
        want = self.world.params.nominations
        fresh = self.mint_nics(want)
        if len(fresh) < want:   # NIC cap reached: recycle identities
            pool = list(self.nic_ids)
            fresh += self.rng.sample(pool, min(want - len(fresh), len(pool)))
        return fresh

    def loyal_ids(self) -> list[int]:
        return [p for p in self.world.actors if p not in self.nic_ids]

    # -- dispatch -------------------------------------------------------

    def dispatch(self, nic_id: int, msg) -> None:
        self._handlers[msg.KIND](nic_id, msg)

    def _ignore(self, nic_id, msg) -> None:
        pass

    # -- invitations (stealth / nuisance voting script) ------------------

    def _on_poll(self, nic_id: int, msg: Poll) -> None:
        link = self.world.actors[nic_id].link
        if self.strategy is Strategy.ATTRITION:
            # attrition peers never vote in others' polls
            self.world.send(link, msg.initiator, PollChallenge(
                msg.poll_id, nic_id, 0, self.rng.randbytes(16), False),
                CONTROL_BITS)
            return
        plan = self.per_poll.get(msg.poll_id)
        if plan is None:
            plan = self.per_poll[msg.poll_id] = _PollPlan(
                msg.poll_id, msg.initiator)
        plan.invited.append(nic_id)
        challenge = self.rng.randbytes(16)
        plan.challenges[nic_id] = challenge
        self.world.send(link, msg.initiator, PollChallenge(
            msg.poll_id, nic_id, 0, challenge, True), CONTROL_BITS)

    def _on_proof(self, nic_id: int, msg: PollProof) -> None:
        plan = self.per_poll.get(msg.poll_id)
        if plan is None or nic_id in plan.votes_cast:
            return
        # wait the appropriate verification time, then nominate and vote
        verify = self.world.effort_params.seconds(
            self.world.cost_table.poll_effort_verify)
        self.pool.submit(verify, self._nominate_and_vote, (nic_id, plan))

    def _nominate_and_vote(self, arg) -> None:
        nic_id, plan = arg
        link = self.world.actors[nic_id].link
        self.world.send(link, plan.initiator, Nominate(
            plan.poll_id, nic_id, self.nomination_block()), CONTROL_BITS)
        if plan.version is None:
            self._commit_version(plan)
        construct = self.world.effort_params.seconds(
            self.world.cost_table.vote_construct)
        self.pool.submit(construct, self._cast_vote, (nic_id, plan))

    def _commit_version(self, plan: _PollPlan) -> None:
        """Delayed commitment at first-vote-construction time."""
        params = self.world.params
        m = len(plan.invited)
        l = self._true_loyal_count(plan)
        if self.strategy is Strategy.STEALTH_ATTACK and stealth_vulnerable(
                m, l, params.quorum, params.max_minority):
            plan.version = self.bad_au
            plan.attacked = True
            self.attacked_polls[plan.poll_id] = "stealth"
        elif self.strategy is Strategy.NUISANCE and nuisance_vulnerable(
                m, l, params.quorum, params.max_minority):
            plan.version = self._fresh_bogus_au()
            plan.attacked = True
            self.attacked_polls[plan.poll_id] = "nuisance"
        else:
            plan.version = self.good_au

    def _true_loyal_count(self, plan: _PollPlan) -> int:
        """Loyal affirmative inner invitees, read off the initiator's poll
        state (the modeled adversary evaluates vulnerability exactly)."""
        actor = self.world.actors.get(plan.initiator)
        rec = getattr(actor, "poll", None)
        if rec is None or rec.poll_id != plan.poll_id:
            return self.world.params.inner_size   # stale: assume the worst
        return sum(1 for p in rec.accepted
                   if p in rec.inner and p not in self.nic_ids)

    def _fresh_bogus_au(self) -> AuVersion:
        self._bogus_seq += 1
        content = effort.AuContent(
            b"bogus:" + self._bogus_seq.to_bytes(8, "big"),
            self.world.effort_params.num_blocks,
            self.world.effort_params.block_cost)
        return AuVersion(content, AuKind.DAMAGE)

    def _cast_vote(self, arg) -> None:
        nic_id, plan = arg
        version = plan.version
        vote, _ = effort.construct_vote(
            plan.challenges[nic_id], plan.poll_id, nic_id, version.content,
            self.world.effort_params)
        plan.votes_cast[nic_id] = version
        link = self.world.actors[nic_id].link
        self.world.send(link, plan.initiator,
                        VoteMessage(plan.poll_id, nic_id, vote),
                        self.world.vote_bits(vote))

    # -- repairs ---------------------------------------------------------

    def _on_repair_request(self, nic_id: int, msg) -> None:
        """Supply the version this NIC voted in the requester's poll, but
        only to requesters with an agreeing vote in the shared history."""
        plan = self.per_poll.get(msg.poll_id)
        if plan is None:
            return
        version = plan.votes_cast.get(nic_id)
        if version is None or msg.requester not in self.shared_history:
            return
        link = self.world.actors[nic_id].link
        self.world.send(link, msg.requester,
                        Repair(msg.poll_id, nic_id, version),
                        self.world.au_bits)

    # -- own polls (stealth callers, attrition driver) -------------------

    def _on_challenge(self, nic_id: int, msg) -> None:
        caller = self.callers.get(nic_id)
        if caller is not None:
            caller.on_challenge(msg)

    def _on_nominate(self, nic_id: int, msg) -> None:
        caller = self.callers.get(nic_id)
        if caller is not None:
            caller.on_nominate(msg)

    def _on_vote(self, nic_id: int, msg) -> None:
        caller = self.callers.get(nic_id)
        if caller is not None:
            caller.on_vote(msg)

    def start(self) -> None:
        """Arm the strategy's autonomous behavior at scenario start."""
        if self.strategy in (Strategy.STEALTH_LURK, Strategy.STEALTH_ATTACK):
            for nic_id in self.subverted:
                caller = _Caller(self, nic_id)
                self.callers[nic_id] = caller
                caller.arm()
        elif self.strategy is Strategy.ATTRITION:
            self.attrition = _AttritionDriver(self)
            self.attrition.arm()
        # the nuisance adversary calls no polls

    def compute_accounting_ok(self, horizon: float) -> bool:
        return self.pool.busy_seconds <= self.cpus * horizon + 1e-6


class _Caller:
    """A stealth NIC calling polls at loyal cadence, never inviting malign
    peers and never verifying the votes it receives; the point is to earn
    repair eligibility and keep up appearances."""

    def __init__(self, adversary: Adversary, nic_id: int):
        self.adv = adversary
        self.world = adversary.world
        self.nic_id = nic_id
        self.rng = random.Random(adversary.rng.getrandbits(64))
        self.link = self.world.actors[nic_id].link
        # reference list bootstrapped like a loyal peer's, minus comrades
        friends = adversary.nic_friends.get(nic_id) or self._seed_friends()
        self.reference: dict[int, int] = {
            p: 0 for p in friends if p not in adversary.nic_ids}
        self.friends = tuple(self.reference)
        self.poll_counter = 0
        self.current: Optional[dict] = None

    def _seed_friends(self) -> list[int]:
        pool = self.adv.loyal_ids()
        size = min(len(pool), self.world.params.ref_target)
        return self.rng.sample(pool, size)

    def arm(self) -> None:
        self.world.engine.schedule(
            self.world.params.next_poll_delay(self.rng), self._refresh, None)

    def _refresh(self, _) -> None:
        if self.current is None:
            self._call_poll()
        else:
            self.arm()

    def _call_poll(self) -> None:
        world, params = self.world, self.world.params
        pool = [p for p in self.reference if p not in self.adv.nic_ids]
        invitees = self.rng.sample(pool, min(params.inner_size, len(pool)))
        if not invitees:
            self.arm()
            return
        self.poll_counter += 1
        poll = {"id": world.fresh_poll_id(), "inner": set(invitees),
                "outer": set(), "awaiting": set(invitees),
                "accepted": [], "challenges": {}, "noms": {},
                "votes": {}, "outer_formed": False, "gen": 0}
        self.current = poll
        for p in invitees:
            world.send(self.link, p, Poll(poll["id"], self.nic_id,
                                          self.rng.getrandbits(32)),
                       CONTROL_BITS)
        self._arm_timer(world.timers.challenge, self._challenge_timer)

    def _arm_timer(self, delay: float, fn) -> None:
        self.current["gen"] += 1
        self.world.engine.schedule(delay, fn,
                                   (self.current["id"], self.current["gen"]))

    def _stale(self, token) -> bool:
        poll = self.current
        return poll is None or (poll["id"], poll["gen"]) != token

    def on_challenge(self, msg) -> None:
        poll = self.current
        if poll is None or msg.poll_id != poll["id"]:
            return
        if msg.voter not in poll["awaiting"]:
            return
        poll["awaiting"].discard(msg.voter)
        if msg.accept:
            poll["accepted"].append(msg.voter)
            poll["challenges"][msg.voter] = msg.challenge
        if not poll["awaiting"]:
            poll["gen"] += 1
            self._challenge_round_done(poll)

    def _challenge_timer(self, token) -> None:
        if not self._stale(token):
            self._challenge_round_done(self.current)

    def _challenge_round_done(self, poll) -> None:
        queue = [p for p in poll["accepted"] if p not in poll.get("proofed",
                                                                  set())]
        poll.setdefault("proofed", set())
        if not queue:
            self._after_proofs(poll)
            return
        poll["queue"] = queue
        self._next_proof(poll)

    def _next_proof(self, poll) -> None:
        if poll is not self.current:
            return
        if not poll["queue"]:
            self._after_proofs(poll)
            return
        target = poll["queue"].pop(0)
        cp = self.world.effort_params.seconds(
            self.world.cost_table.poll_effort_construct)
        self.adv.pool.submit(cp, self._send_proof, (poll, target))

    def _send_proof(self, arg) -> None:
        poll, target = arg
        if poll is not self.current:
            return
        poll["proofed"].add(target)
        proof = effort.poll_effort_proof(poll["challenges"][target],
                                         poll["id"])
        self.world.send(self.link, target,
                        PollProof(poll["id"], self.nic_id, proof),
                        CONTROL_BITS)
        self._next_proof(poll)

    def _after_proofs(self, poll) -> None:
        if not poll["outer_formed"]:
            self._arm_timer(self.world.timers.nomination,
                            self._nomination_timer)
        else:
            self._arm_timer(self.world.timers.vote, self._vote_timer)

    def on_nominate(self, msg) -> None:
        poll = self.current
        if (poll is None or msg.poll_id != poll["id"]
                or msg.voter not in poll["inner"]):
            return
        poll["noms"][msg.voter] = tuple(msg.nominations)
        if (not poll["outer_formed"] and not poll.get("queue")
                and all(p in poll["noms"] or p not in poll["accepted"]
                        for p in poll["inner"])):
            poll["gen"] += 1
            self._form_outer(poll)

    def _nomination_timer(self, token) -> None:
        if not self._stale(token):
            self._form_outer(self.current)

    def _form_outer(self, poll) -> None:
        params = self.world.params
        poll["outer_formed"] = True
        needed = max(0, params.ref_target - len(self.reference))
        excluded = (set(self.reference) | poll["inner"] | poll["outer"]
                    | self.adv.nic_ids | {self.nic_id})
        chosen = protocol.select_outer_circle(poll["noms"], excluded,
                                              needed, self.rng)
        if not chosen:
            self._arm_timer(self.world.timers.vote, self._vote_timer)
            return
        poll["outer"] |= set(chosen)
        poll["awaiting"] = set(chosen)
        for p in chosen:
            self.world.send(self.link, p,
                            Poll(poll["id"], self.nic_id,
                                 self.rng.getrandbits(32)), CONTROL_BITS)
        self._arm_timer(self.world.timers.challenge, self._challenge_timer)

    def on_vote(self, msg) -> None:
        poll = self.current
        if (poll is None or msg.poll_id != poll["id"]
                or msg.voter in poll["votes"]):
            return
        poll["votes"][msg.voter] = msg.vote
        if (poll["outer_formed"] and not poll.get("queue")
                and len(poll["votes"]) >= len(poll["accepted"])):
            poll["gen"] += 1
            self._conclude(poll)

    def _vote_timer(self, token) -> None:
        if not self._stale(token):
            self._conclude(self.current)

    def _conclude(self, poll) -> None:
        """Votes are never verified: the shared knowledge already knows who
        agreed.  Record repair eligibility and maintain the reference list
        exactly as a loyal peer would."""
        good_id = self.adv.good_au.version_id
        verdicts = {}
        agreeing_all = []
        for voter, vote in poll["votes"].items():
            agreed = vote._content_hint == good_id
            verdicts[voter] = Verdict.AGREEING if agreed \
                else Verdict.DISAGREEING
            if agreed:
                agreeing_all.append(voter)
        self.adv.shared_history.update(agreeing_all)
        inner_verdicts = {p: v for p, v in verdicts.items()
                          if p in poll["inner"]}
        state = _CallerStateView(self)
        protocol.apply_success_update(
            state, inner_verdicts,
            [p for p in agreeing_all if p in poll["outer"]],
            self.world.params, self.rng)
        for p in poll["accepted"]:
            self.world.send(self.link, p, Release(poll["id"]), CONTROL_BITS)
        self.current = None
        self.world.engine.schedule(
            self.world.params.next_poll_delay(self.rng), self._refresh, None)


class _CallerStateView:
    """Adapter exposing a caller's bookkeeping to the update rules."""

    __slots__ = ("id", "reference", "friends", "poll_counter")

    def __init__(self, caller: _Caller):
        self.id = caller.nic_id
        self.reference = caller.reference
        self.friends = caller.friends
        self.poll_counter = caller.poll_counter


class _AttritionDriver:
    """Calls useless polls as fast as the CPU pool can compute poll-effort
    proofs, from fresh throw-away identities, inviting only loyal peers."""

    WAVE_SECONDS = 600.0
    BACKLOG_FACTOR = 2.0

    def __init__(self, adversary: Adversary):
        self.adv = adversary
        self.world = adversary.world
        self.rng = random.Random(adversary.rng.getrandbits(64))
        self.yes_rate = 0.9
        self.polls: dict[bytes, dict] = {}
        self.population = adversary.loyal_ids()

    def arm(self) -> None:
        self.world.engine.schedule(1.0, self._wave, None)

    def _wave(self, _) -> None:
        if self.world.engine.stopped:
            return
        cp_seconds = self.world.effort_params.seconds(
            self.world.cost_table.poll_effort_construct)
        capacity = self.adv.cpus * self.WAVE_SECONDS / cp_seconds
        want = max(0.0, self.BACKLOG_FACTOR * capacity
                   - self.adv.pool.backlog_jobs())
        invites = min(int(want / max(self.yes_rate, 0.05)) + 1,
                      int(4 * capacity) + 1, len(self.population))
        if want > 0 and invites > 0:
            self._call_poll(invites)
        self.world.engine.schedule(self.WAVE_SECONDS, self._wave, None)

    def _call_poll(self, invites: int) -> None:
        nic_id = self.adv.mint_nics(1)[0]
        link = self.world.actors[nic_id].link
        poll_id = self.world.fresh_poll_id()
        victims = self.rng.sample(self.population,
                                  min(invites, len(self.population)))
        poll = {"id": poll_id, "nic": nic_id, "link": link,
                "invited": len(victims), "yes": 0}
        self.polls[poll_id] = poll
        self.adv.callers[nic_id] = _AttritionCallerView(self, poll)
        for p in victims:
            self.world.send(link, p, Poll(poll_id, nic_id,
                                          self.rng.getrandbits(32)),
                            CONTROL_BITS)

    def on_challenge(self, poll, msg) -> None:
        if not msg.accept:
            self._update_rate(poll)
            return
        poll["yes"] += 1
        self._update_rate(poll)
        cp = self.world.effort_params.seconds(
            self.world.cost_table.poll_effort_construct)
        self.adv.pool.submit(cp, self._send_proof,
                             (poll, msg.voter, msg.challenge))

    def _send_proof(self, arg) -> None:
        poll, voter, challenge = arg
        proof = effort.poll_effort_proof(challenge, poll["id"])
        self.world.send(poll["link"], voter,
                        PollProof(poll["id"], poll["nic"], proof),
                        CONTROL_BITS)

    def _update_rate(self, poll) -> None:
        responded = poll.setdefault("responded", 0) + 1
        poll["responded"] = responded
        if responded == poll["invited"]:
            rate = poll["yes"] / max(poll["invited"], 1)
            self.yes_rate = 0.5 * self.yes_rate + 0.5 * rate


class _AttritionCallerView:
    """Routes caller-side messages of one throw-away poll to the driver."""

    __slots__ = ("driver", "poll")

    def __init__(self, driver: _AttritionDriver, poll: dict):
        self.driver = driver
        self.poll = poll

    def on_challenge(self, msg) -> None:
        if msg.poll_id == self.poll["id"]:
            self.driver.on_challenge(self.poll, msg)

    def on_nominate(self, msg) -> None:
        pass   # nominations are worthless to the attrition adversary

    def on_vote(self, msg) -> None:
        pass   # votes are never verified, never tallied
