"""Event-driven loyal peer: poll initiator and voter state machines.

A peer commits to at most one poll at a time.  As initiator it walks one
of its own polls through invitation, per-invitee poll-effort proofs, outer
circle formation, vote verification, tabulation, repair and reference-list
update.  As voter it answers invitations, verifies the initiator's effort,
nominates, constructs its vote, and stays committed until released or
timed out.

All randomness comes from per-peer substreams, all timing from the engine,
so a run is a pure function of (config, seed).
"""

from __future__ import annotations

import random
from typing import Optional

from . import effort, protocol
from .effort import Verdict
from .netsim import Engine, flow_time
from .protocol import (
    Alarm,
    AlarmKind,
    AuKind,
    AuVersion,
    Nominate,
    PeerState,
    Poll,
    PollChallenge,
    PollOutcome,
    PollPhase,
    PollProof,
    PollRecord,
    Release,
    Repair,
    RepairRequest,
    VoteMessage,
)

CONTROL_BITS = 8 * 1024          # control datagrams: 1 KB
VOTE_BASE_BYTES = 2048           # votes: 2 KB plus 32 B per round
RETRY_BASE = 3600.0              # backoff after an aborted / undecided poll
RETRY_CAP = 12 * 3600.0


class World:
    """Shared per-run context wiring actors, engine and metrics together."""

    def __init__(self, engine: Engine, params: protocol.ProtocolParams,
                 effort_params: effort.EffortParams,
                 timers: protocol.TimerTable, au_bits: float, metrics,
                 seed: int):
        self.engine = engine
        self.params = params
        self.effort_params = effort_params
        self.cost_table = effort_params.cost_table()
        self.timers = timers
        self.au_bits = au_bits
        self.metrics = metrics
        self.seed = seed
        self.actors: dict[int, object] = {}
        self.adversary = None
        self._poll_seq = 0
        self._damage_seq = 0
        self.good_au: Optional[AuVersion] = None

    def fresh_poll_id(self) -> bytes:
        self._poll_seq += 1
        return self._poll_seq.to_bytes(8, "big")

    def fresh_damage_au(self) -> AuVersion:
        """Unique random-bits version; the damaged peer cannot tell."""
        self._damage_seq += 1
        content = effort.AuContent(
            b"damage:" + self._damage_seq.to_bytes(8, "big"),
            self.effort_params.num_blocks, self.effort_params.block_cost)
        return AuVersion(content, AuKind.DAMAGE)

    def vote_bits(self, vote) -> float:
        return 8 * (VOTE_BASE_BYTES + 32 * len(vote.rounds))

    def send(self, src_link, dst_id: int, msg, bits: float) -> None:
        dst = self.actors.get(dst_id)
        if dst is None:
            return
        self.engine.schedule(flow_time(src_link, dst.link, bits),
                             dst.dispatch, msg)

    def is_malign(self, peer_id: int) -> bool:
        adv = self.adversary
        return adv is not None and peer_id in adv.nic_ids


class LoyalPeer:
    """One loyal peer: actor facade over a PeerState."""

    def __init__(self, world: World, state: PeerState, rng: random.Random):
        self.world = world
        self.state = state
        self.rng = rng
        self.link = state.link
        self.poll: Optional[PollRecord] = None
        self.session: Optional[dict] = None   # committed-voter bookkeeping
        self.refresh_gen = 0
        self.fail_streak = 0
        self._last_interpoll_alarm = 0.0
        self._handlers = {
            "poll": self.on_poll,
            "challenge": self.on_challenge,
            "proof": self.on_poll_proof,
            "nominate": self.on_nominate,
            "vote": self.on_vote,
            "repair_request": self.on_repair_request,
            "repair": self.on_repair,
            "release": self.on_release,
        }

    # -- plumbing ------------------------------------------------------

    @property
    def id(self) -> int:
        return self.state.id

    def dispatch(self, msg) -> None:
        self._handlers[msg.KIND](msg)

    def _send(self, dst_id: int, msg, bits: float = CONTROL_BITS) -> None:
        self.world.send(self.link, dst_id, msg, bits)

    def _charge(self, cost_units: float, fn, arg=None) -> None:
        self.world.engine.charge(
            self.state, self.world.effort_params.seconds(cost_units), fn, arg)

    def start(self, now: float = 0.0) -> None:
        """Bootstrap: copy friends into the reference list, arm timers."""
        protocol.bootstrap(self.state, self.world.params, self.rng, now)
        self.refresh_gen += 1
        self.world.engine.schedule_at(self.state.refresh_deadline,
                                      self.on_refresh, self.refresh_gen)
        self._arm_interpoll_check()

    def _arm_refresh(self, delay: float) -> None:
        self.state.refresh_deadline = self.world.engine.now + delay
        self.refresh_gen += 1
        self.world.engine.schedule(delay, self.on_refresh, self.refresh_gen)

    def on_refresh(self, gen) -> None:
        if gen != self.refresh_gen:
            return
        if not self.state.idle:
            self.state.pending_call = True
            return
        self.start_poll()

    # -- inter-poll interval alarm --------------------------------------

    def _arm_interpoll_check(self) -> None:
        base = max(self.state.last_quorate, self._last_interpoll_alarm)
        due = base + 3 * self.world.params.poll_interval
        self.world.engine.schedule_at(due + 1.0, self._interpoll_check, None)

    def _interpoll_check(self, _) -> None:
        now = self.world.engine.now
        base = max(self.state.last_quorate, self._last_interpoll_alarm)
        if now - base > 3 * self.world.params.poll_interval:
            self.world.metrics.on_alarm(
                Alarm(AlarmKind.INTER_POLL_INTERVAL, self.id, now), None)
            self._last_interpoll_alarm = now
        if not self.world.engine.stopped:
            self._arm_interpoll_check()

    # ==================================================================
    # Initiator role
    # ==================================================================

    def start_poll(self) -> None:
        world, state = self.world, self.state
        state.pending_call = False
        invitees = protocol.select_inner_circle(state, world.params, self.rng)
        if not invitees:
            self._poll_failed(aborted=True)
            return
        rec = PollRecord(world.fresh_poll_id())
        self.poll = rec
        state.busy = ("init", rec.poll_id)
        rec.phase = PollPhase.AWAITING_CHALLENGES
        self._invite(rec, invitees, inner=True)

    def _invite(self, rec: PollRecord, invitees, inner: bool) -> None:
        circle = rec.inner if inner else rec.outer
        for p in invitees:
            circle[p] = True
        rec.invite_rounds += 1
        rec.awaiting = set(invitees)
        for p in invitees:
            self._send(p, Poll(rec.poll_id, self.id,
                               dh_key=self.rng.getrandbits(32)))
        rec.timer_gen += 1
        self.world.engine.schedule(
            self.world.timers.challenge, self._challenge_timer,
            (rec.poll_id, rec.timer_gen))

    def _challenge_timer(self, token) -> None:
        rec = self.poll
        if rec is None or (rec.poll_id, rec.timer_gen) != token:
            return
        self._finish_challenge_round(rec)

    def on_challenge(self, msg: PollChallenge) -> None:
        rec = self.poll
        if rec is None or msg.poll_id != rec.poll_id:
            return
        voter = msg.voter
        prior = rec.challenges.get(voter)
        if prior is not None and prior != msg.challenge:
            # conflicting challenges: cannot tell real from spoofed
            rec.discredited.add(voter)
            rec.accepted.discard(voter)
            rec.declined.discard(voter)
            if voter in getattr(rec, "awaiting", ()):
                rec.awaiting.discard(voter)
            return
        if voter not in getattr(rec, "awaiting", ()):
            return
        rec.awaiting.discard(voter)
        rec.challenges[voter] = msg.challenge
        if msg.accept:
            rec.accepted.add(voter)
            rec.accept_order.append(voter)
        else:
            rec.declined.add(voter)
        if not rec.awaiting:
            rec.timer_gen += 1
            self._finish_challenge_round(rec)

    def _finish_challenge_round(self, rec: PollRecord) -> None:
        world, params = self.world, self.world.params
        rec.awaiting = set()
        if rec.phase is PollPhase.AWAITING_CHALLENGES:       # inner round
            if len(rec.discredited) > params.max_discredited:
                self._raise_alarm(AlarmKind.LOCAL_SPOOFING, rec)
                self._conclude(rec, "spoofing_alarm", alarmed=True)
                return
            yes = rec.inner_accepted()
            if len(yes) < params.quorum:
                unused = [p for p in self.state.reference
                          if p not in rec.inner and p not in rec.outer]
                top_up = max(0, params.inner_size - len(yes))
                if unused and top_up:
                    more = self.rng.sample(unused, min(top_up, len(unused)))
                    self._invite(rec, more, inner=True)
                    return
                self._conclude_no_votes(rec)   # reference list exhausted
                return
            self._begin_proofs(rec, [p for p in rec.proof_order()
                                     if p in rec.inner])
        else:                                                # outer round
            self._begin_proofs(rec, [p for p in rec.proof_order()
                                     if p in rec.outer])

    def _begin_proofs(self, rec: PollRecord, accepted) -> None:
        # decliners still get a PollProof, built from a free random value,
        # so traffic analysis cannot separate them from real voters
        for p in rec.declined:
            if p not in rec.junk_proofed:
                rec.junk_proofed.add(p)
                self._send(p, PollProof(rec.poll_id, self.id,
                                        self.rng.randbytes(32)))
        rec.phase = PollPhase.COMPUTING_PROOFS
        rec.proof_queue = [p for p in accepted if p not in rec.proofed]
        self._charge_next_proof(rec)

    def _charge_next_proof(self, rec: PollRecord) -> None:
        if rec.proof_queue:
            target = rec.proof_queue[0]
            self._charge(self.world.cost_table.poll_effort_construct,
                         self._proof_done, (rec.poll_id, target))
            return
        if not rec.outer_formed:
            # inner proofs done: collect nominations, then invite outward
            rec.timer_gen += 1
            self.world.engine.schedule(
                self.world.timers.nomination, self._nomination_timer,
                (rec.poll_id, rec.timer_gen))
        else:
            self._arm_vote_timer(rec)

    def _proof_done(self, token) -> None:
        rec = self.poll
        if rec is None or rec.poll_id != token[0]:
            return
        target = rec.proof_queue.pop(0)
        assert target == token[1]
        rec.proofed.add(target)
        proof = effort.poll_effort_proof(rec.challenges[target], rec.poll_id)
        self._send(target, PollProof(rec.poll_id, self.id, proof))
        self._charge_next_proof(rec)

    def on_nominate(self, msg: Nominate) -> None:
        rec = self.poll
        if (rec is None or msg.poll_id != rec.poll_id
                or msg.voter not in rec.inner
                or msg.voter not in rec.accepted
                or msg.voter in rec.nominations):
            return   # nominations from the outer circle are ignored
        rec.nominations[msg.voter] = tuple(msg.nominations)
        if (rec.phase is PollPhase.COMPUTING_PROOFS and not rec.proof_queue
                and not rec.outer_formed
                and all(p in rec.nominations for p in rec.inner_accepted())):
            rec.timer_gen += 1
            self._form_outer_circle(rec)

    def _nomination_timer(self, token) -> None:
        rec = self.poll
        if rec is None or (rec.poll_id, rec.timer_gen) != token:
            return
        self._form_outer_circle(rec)

    def _form_outer_circle(self, rec: PollRecord) -> None:
        params, state = self.world.params, self.state
        rec.outer_formed = True
        needed = max(0, params.ref_target - len(state.reference))
        excluded = (set(state.reference) | set(rec.inner) | set(rec.outer)
                    | {self.id})
        chosen = protocol.select_outer_circle(rec.nominations, excluded,
                                              needed, self.rng)
        if chosen:
            self._invite(rec, chosen, inner=False)
        else:
            self._arm_vote_timer(rec)

    def _arm_vote_timer(self, rec: PollRecord) -> None:
        rec.phase = PollPhase.AWAITING_VOTES
        rec.timer_gen += 1
        self.world.engine.schedule(self.world.timers.vote, self._vote_timer,
                                   (rec.poll_id, rec.timer_gen))
        self._maybe_verify(rec)

    def _vote_timer(self, token) -> None:
        rec = self.poll
        if rec is None or (rec.poll_id, rec.timer_gen) != token:
            return
        self._verify_votes(rec)

    def on_vote(self, msg: VoteMessage) -> None:
        rec = self.poll
        if (rec is None or msg.poll_id != rec.poll_id
                or msg.voter not in rec.accepted or msg.voter in rec.votes):
            return   # includes decliners' cover votes: never verified
        rec.votes[msg.voter] = msg.vote
        self._maybe_verify(rec)

    def _maybe_verify(self, rec: PollRecord) -> None:
        if (rec.phase is PollPhase.AWAITING_VOTES
                and len(rec.votes) == len(rec.accepted)):
            rec.timer_gen += 1
            self._verify_votes(rec)

    def _verify_votes(self, rec: PollRecord) -> None:
        """Verify every received vote against the local AU, then tabulate.

        Verdicts and charges come from the effort module; invalid votes
        drop the voter from both the poll and the reference list.
        """
        rec.phase = PollPhase.TABULATING
        state, world = self.state, self.world
        state.poll_counter += 1
        total = 0.0
        for voter, vote in rec.votes.items():
            verdict, cost = effort.verify_vote(
                vote, state.au.content, rec.challenges[voter], rec.poll_id,
                world.effort_params)
            total += cost
            rec.verdicts[voter] = verdict
            if verdict is Verdict.INVALID:
                protocol.remove_reference_entry(state, voter)
        self.world.engine.charge(
            state, world.effort_params.seconds(total), self._tabulate,
            rec.poll_id)

    def _tabulate(self, poll_id) -> None:
        rec = self.poll
        if rec is None or rec.poll_id != poll_id:
            return
        params = self.world.params
        valid_inner = {p: v for p, v in rec.verdicts.items()
                       if p in rec.inner and v is not Verdict.INVALID}
        rec.valid_inner = valid_inner
        v, agreeing = len(valid_inner), sum(
            1 for x in valid_inner.values() if x is Verdict.AGREEING)
        if v >= params.quorum:
            self._note_quorate()
        outcome = protocol.tabulate(v, agreeing, params)
        if outcome is PollOutcome.NO_QUORUM:
            self._apply_noquorum(rec)
            self._conclude(rec, "no_quorum")
            self._poll_failed(aborted=False)
        elif outcome is PollOutcome.LANDSLIDE_WIN:
            self._conclude_success(rec)
        elif outcome is PollOutcome.INCONCLUSIVE:
            self._raise_alarm(AlarmKind.INCONCLUSIVE_POLL, rec)
            self._conclude(rec, "inconclusive", alarmed=True)
        else:
            rec.phase = PollPhase.REPAIRING
            order = [p for p, vd in rec.valid_inner.items()
                     if vd is Verdict.DISAGREEING]
            self.rng.shuffle(order)
            rec.repair_candidates = order
            self._try_next_repair(rec)

    # -- repair --------------------------------------------------------

    def _try_next_repair(self, rec: PollRecord) -> None:
        params = self.world.params
        candidate = None
        if rec.repair_adoptions < params.max_minority:
            for p in rec.repair_candidates:
                if (p not in rec.repair_used
                        and rec.verdicts.get(p) is Verdict.DISAGREEING):
                    candidate = p
                    break
        if candidate is None:
            # repairs exhausted with no decision: treat like quorum failure
            self._apply_noquorum(rec)
            self._conclude(rec, "no_decision")
            self._poll_failed(aborted=True)
            return
        rec.repair_used.add(candidate)
        rec.repair_target = candidate
        self._send(candidate, RepairRequest(rec.poll_id, self.id))
        rec.timer_gen += 1
        self.world.engine.schedule(self.world.timers.repair,
                                   self._repair_timer,
                                   (rec.poll_id, rec.timer_gen))

    def _repair_timer(self, token) -> None:
        rec = self.poll
        if rec is None or (rec.poll_id, rec.timer_gen) != token:
            return
        self._try_next_repair(rec)   # silence: try another voter

    def on_repair(self, msg: Repair) -> None:
        rec = self.poll
        if (rec is None or msg.poll_id != rec.poll_id
                or rec.phase is not PollPhase.REPAIRING
                or msg.supplier != rec.repair_target):
            return
        rec.timer_gen += 1
        # consistency check: re-verify the supplier's vote against the
        # received AU before trusting it
        verdict, cost = effort.verify_vote(
            rec.votes[msg.supplier], msg.au.content,
            rec.challenges[msg.supplier], rec.poll_id,
            self.world.effort_params)
        self.world.engine.charge(
            self.state, self.world.effort_params.seconds(cost),
            self._repair_checked, (rec.poll_id, msg, verdict))

    def _repair_checked(self, arg) -> None:
        poll_id, msg, verdict = arg
        rec = self.poll
        if rec is None or rec.poll_id != poll_id:
            return
        if verdict is not Verdict.AGREEING:
            # the repair disagrees with the supplier's own vote
            protocol.remove_reference_entry(self.state, msg.supplier)
            self.world.metrics.on_repair_discarded(self.id, msg.supplier)
            self._try_next_repair(rec)
            return
        self._adopt_repair(rec, msg.au)

    def _adopt_repair(self, rec: PollRecord, au: AuVersion) -> None:
        world, state = self.world, self.state
        old = state.au
        state.au = au
        world.metrics.on_au_changed(self.id, old, au)
        rec.repair_adoptions += 1
        # re-verify disagreeing votes against the repaired AU; votes that
        # agreed with the replaced version disagree with the new one by
        # construction (the initiator knows the contents differ), at no
        # new hashing cost
        total = 0.0
        new_verdicts = {}
        for voter, vd in rec.verdicts.items():
            if vd is Verdict.AGREEING:
                new_verdicts[voter] = Verdict.DISAGREEING
            elif vd is Verdict.DISAGREEING:
                verdict, cost = effort.verify_vote(
                    rec.votes[voter], au.content, rec.challenges[voter],
                    rec.poll_id, world.effort_params)
                total += cost
                new_verdicts[voter] = verdict
            else:
                new_verdicts[voter] = vd
        world.engine.charge(state, world.effort_params.seconds(total),
                            self._reverified, (rec.poll_id, new_verdicts))

    def _reverified(self, arg) -> None:
        poll_id, new_verdicts = arg
        rec = self.poll
        if rec is None or rec.poll_id != poll_id:
            return
        rec.verdicts = new_verdicts
        rec.valid_inner = {p: v for p, v in new_verdicts.items()
                           if p in rec.inner and v is not Verdict.INVALID}
        params = self.world.params
        v = len(rec.valid_inner)
        agreeing = sum(1 for x in rec.valid_inner.values()
                       if x is Verdict.AGREEING)
        if agreeing >= v - params.max_minority:
            self._conclude_success(rec)
        elif agreeing <= params.max_minority:
            self._try_next_repair(rec)
        else:
            # a landslide win is now out of reach regardless of repairs
            self._raise_alarm(AlarmKind.INCONCLUSIVE_POLL, rec)
            self._conclude(rec, "inconclusive_repair", alarmed=True)

    # -- conclusion ----------------------------------------------------

    def _conclude_success(self, rec: PollRecord) -> None:
        world, state = self.world, self.state
        agreeing_all = [p for p, v in rec.verdicts.items()
                        if v is Verdict.AGREEING]
        protocol.record_vote_history(state, rec.poll_id,
                                     state.au.version_id, agreeing_all)
        outer_agreeing = [p for p in agreeing_all if p in rec.outer]
        delta = protocol.apply_success_update(
            state, rec.valid_inner, outer_agreeing, world.params, self.rng)
        world.metrics.on_ref_update(self.id, state.reference, delta)
        self.fail_streak = 0
        self._conclude(rec, "win" if rec.repair_adoptions == 0
                       else "win_after_repair")
        self._arm_refresh(world.params.next_poll_delay(self.rng))

    def _apply_noquorum(self, rec: PollRecord) -> None:
        state = self.state
        agreeing = [p for p, v in rec.verdicts.items()
                    if v is Verdict.AGREEING]
        if agreeing:
            protocol.record_vote_history(state, rec.poll_id,
                                         state.au.version_id, agreeing)
        delta = protocol.apply_noquorum_update(
            state, [p for p in agreeing if p in rec.inner],
            [p for p in agreeing if p in rec.outer])
        self.world.metrics.on_ref_update(self.id, state.reference, delta)

    def _conclude_no_votes(self, rec: PollRecord) -> None:
        """Abort at the challenge stage: the reference list is exhausted."""
        self._conclude(rec, "aborted")
        self._poll_failed(aborted=True)

    def _conclude(self, rec: PollRecord, outcome: str,
                  alarmed: bool = False) -> None:
        rec.phase = PollPhase.ALARMED if alarmed else PollPhase.CONCLUDED
        for p in rec.accepted:
            self._send(p, Release(rec.poll_id))
        self.world.metrics.on_poll_concluded(self, rec, outcome)
        self.poll = None
        self.state.busy = None
        if alarmed and not self.world.engine.stopped:
            self._arm_refresh(self.world.params.next_poll_delay(self.rng))

    def _poll_failed(self, aborted: bool) -> None:
        """Re-poll after a failure; immediate after a tabulated quorum
        failure, exponentially backed off when no voting happened at all
        (the spacing only matters when the system is saturated)."""
        if self.poll is not None:   # abort before any record existed
            self.poll = None
        self.state.busy = None
        if aborted:
            self.fail_streak += 1
            delay = min(RETRY_BASE * 2 ** min(self.fail_streak - 1, 8),
                        RETRY_CAP)
            delay *= self.rng.uniform(0.5, 1.0)
        else:
            delay = self.rng.uniform(30.0, 90.0)
        self._arm_refresh(delay)

    def _note_quorate(self) -> None:
        now = self.world.engine.now
        gap = now - self.state.last_quorate
        self.state.last_quorate = now
        self.world.metrics.on_quorate(self.id, gap)

    def _raise_alarm(self, kind: AlarmKind, rec: PollRecord) -> None:
        alarm = Alarm(kind, self.id, self.world.engine.now, rec.poll_id)
        self.world.metrics.on_alarm(alarm, rec)

    # ==================================================================
    # Voter role
    # ==================================================================

    def on_poll(self, msg: Poll) -> None:
        state = self.state
        now = self.world.engine.now
        wants_own = state.pending_call or state.refresh_deadline <= now
        if not state.idle or wants_own:
            challenge = self.rng.randbytes(16)
            self._send(msg.initiator, PollChallenge(
                msg.poll_id, self.id, self.rng.getrandbits(32), challenge,
                accept=False))
            return
        challenge = self.rng.randbytes(16)
        state.busy = ("vote", msg.poll_id, msg.initiator)
        self.session = {"poll_id": msg.poll_id, "initiator": msg.initiator,
                        "challenge": challenge, "gen": 0, "voted": False}
        self._send(msg.initiator, PollChallenge(
            msg.poll_id, self.id, self.rng.getrandbits(32), challenge,
            accept=True))
        self.world.engine.schedule(self.world.timers.effort,
                                   self._session_timer,
                                   (msg.poll_id, 0))

    def _session_timer(self, token) -> None:
        ses = self.session
        if ses is None or (ses["poll_id"], ses["gen"]) != token:
            return
        self._end_session()

    def _end_session(self) -> None:
        self.session = None
        self.state.busy = None
        if self.state.pending_call:
            self.start_poll()

    def on_poll_proof(self, msg: PollProof) -> None:
        ses = self.session
        if ses is None or ses["poll_id"] != msg.poll_id:
            # a poll we declined (or gave up on): go through the motions
            # behind the encryption with a free bogus vote
            self._send_bogus_vote(msg)
            return
        if ses["voted"]:
            return
        ses["gen"] += 1   # proof arrived: effort timer is moot
        ok = effort.verify_poll_effort(msg.proof, ses["challenge"],
                                       msg.poll_id)
        self._charge(self.world.cost_table.poll_effort_verify,
                     self._proof_verified if ok else self._proof_rejected,
                     msg.poll_id)

    def _proof_rejected(self, poll_id) -> None:
        ses = self.session
        if ses is not None and ses["poll_id"] == poll_id:
            self._end_session()

    def _send_bogus_vote(self, msg: PollProof) -> None:
        vote = effort.construct_bogus_vote(
            msg.poll_id, self.id, self.world.effort_params.num_blocks,
            self.rng)
        delay = self.rng.uniform(600.0, 1800.0)
        self.world.engine.schedule(
            delay, self._deliver_vote, (msg.initiator, msg.poll_id, vote))

    def _deliver_vote(self, arg) -> None:
        initiator, poll_id, vote = arg
        self._send(initiator, VoteMessage(poll_id, self.id, vote),
                   self.world.vote_bits(vote))

    def _proof_verified(self, poll_id) -> None:
        ses = self.session
        if ses is None or ses["poll_id"] != poll_id:
            return
        pool = [p for p in self.state.reference if p != ses["initiator"]]
        noms = self.rng.sample(
            pool, min(self.world.params.nominations, len(pool)))
        self._send(ses["initiator"], Nominate(poll_id, self.id, noms))
        self._charge(self.world.cost_table.vote_construct,
                     self._vote_constructed, poll_id)

    def _vote_constructed(self, poll_id) -> None:
        ses = self.session
        if ses is None or ses["poll_id"] != poll_id:
            return
        vote, _cost = effort.construct_vote(
            ses["challenge"], poll_id, self.id, self.state.au.content,
            self.world.effort_params)
        self._send(ses["initiator"], VoteMessage(poll_id, self.id, vote),
                   self.world.vote_bits(vote))
        ses["voted"] = True
        ses["gen"] += 1
        self.world.engine.schedule(self.world.timers.post_vote_hold,
                                   self._session_timer,
                                   (poll_id, ses["gen"]))

    def on_release(self, msg: Release) -> None:
        ses = self.session
        if ses is not None and ses["poll_id"] == msg.poll_id:
            self._end_session()

    def on_repair_request(self, msg: RepairRequest) -> None:
        # answered from voting history regardless of current commitments;
        # peers lacking an agreeing vote on file get silence
        if protocol.repair_eligible(self.state, msg.requester):
            self.world.send(self.link, msg.requester,
                            Repair(msg.poll_id, self.id, self.state.au),
                            self.world.au_bits)
