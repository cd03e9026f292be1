"""Provable-effort economics: round-structured votes with chained nonces.

A vote over an archival unit (AU) of B content blocks is built in
r = ceil(log2(B+1)) rounds.  Round i pairs a simulated memory-bound proof
of effort with a hash over a doubling span of content blocks.  All costs
are measured in abstract cost units where hashing the whole AU costs
S = b * B (one unit = hashing one cache line, b units = one block).

The memory-bound walk itself is not simulated; its economics are.  A proof
is a keyed digest that the verifier can recompute, and the construction /
verification cost asymmetry is represented purely by charged cost units.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional


def _h(*parts: bytes) -> bytes:
    """256-bit digest of length-prefixed parts (unambiguous concatenation)."""
    d = hashlib.blake2b(digest_size=32)
    for p in parts:
        d.update(len(p).to_bytes(4, "big"))
        d.update(p)
    return d.digest()


def _canon(value) -> bytes:
    """Canonical byte encoding for challenge / poll id / voter identities."""
    if isinstance(value, bytes):
        return value
    if isinstance(value, int):
        return value.to_bytes(8, "big", signed=True)
    if isinstance(value, str):
        return value.encode()
    raise TypeError(f"cannot encode {type(value).__name__} into a nonce")


# ---------------------------------------------------------------------------
# Round schedule


def num_rounds(num_blocks: int) -> int:
    """Number of vote rounds for an AU of `num_blocks` blocks.

    Equals ceil(log2(B+1)): spans double per round and the union of spans
    covers the AU exactly once.
    """
    if num_blocks < 1:
        raise ValueError("empty AU: need at least one content block")
    return num_blocks.bit_length()


def round_span(i: int, num_blocks: int) -> tuple[int, int]:
    """Half-open block range [start, end) hashed in round i (1-based).

    Round i covers [2**(i-1) - 1, min(2**i - 1, B)); the final round is
    truncated so the spans tile the AU exactly.
    """
    if i < 1:
        raise ValueError("round ordinals start at 1")
    start = (1 << (i - 1)) - 1
    end = min((1 << i) - 1, num_blocks)
    if start >= end:
        raise ValueError(f"round {i} is beyond the schedule for B={num_blocks}")
    return start, end


def round_walk_cost(i: int, num_blocks: int, block_cost: int) -> int:
    """Walk length l_i in cost units: the size of the round-i content span.

    Canonically l_i = 2**(i-1) * b, truncated on the final round so that
    sum(l_i) = S and the closed-form cost identities hold for every B.
    """
    start, end = round_span(i, num_blocks)
    return (end - start) * block_cost


# ---------------------------------------------------------------------------
# AU content

class AuContent:
    """Abstract AU content: `num_blocks` blocks derived from a content id.

    Two contents are bit-identical iff their content ids are equal.  Block
    data is represented by per-span digests; at simulation scale only
    determinism and collision resistance matter.
    """

    __slots__ = ("content_id", "num_blocks", "block_cost", "_spans")

    def __init__(self, content_id: bytes, num_blocks: int, block_cost: int = 1):
        if num_blocks < 1:
            raise ValueError("empty AU: need at least one content block")
        self.content_id = content_id
        self.num_blocks = num_blocks
        self.block_cost = block_cost
        self._spans: dict[int, bytes] = {}

    @property
    def hash_cost(self) -> int:
        """S: cost of hashing the whole AU, in cost units."""
        return self.num_blocks * self.block_cost

    def span_bytes(self, i: int) -> bytes:
        """Representative bytes of the round-i content span."""
        cached = self._spans.get(i)
        if cached is None:
            start, end = round_span(i, self.num_blocks)
            cached = _h(b"au-span", self.content_id,
                        start.to_bytes(4, "big"), end.to_bytes(4, "big"))
            self._spans[i] = cached
        return cached

    def __repr__(self):
        return f"AuContent({self.content_id.hex()[:12]}, B={self.num_blocks})"


# ---------------------------------------------------------------------------
# Parameters and cost algebra


class PollEffort(NamedTuple):
    """Poll-initiation effort sizes derived from S."""
    asymmetry: float        # E_p
    walk_cost: float        # l_p
    construct_cost: float   # C_p = E_p * l_p
    verify_cost: float      # V_p = l_p


def poll_effort_params(hash_cost: float) -> PollEffort:
    """Poll-effort parameters for an AU costing S to hash.

    Chooses E_p = 4 and l_p = (5/3)S, the smallest choice satisfying
    (E_p - 1) * l_p >= 5S, so that the initiator's per-invitee cost covers
    the invitee's verification plus vote construction: C_p >= V_p + C_v.
    """
    if hash_cost <= 0:
        raise ValueError("AU hash cost must be positive")
    asym = 4.0
    walk = 5.0 * hash_cost / 3.0
    eff = PollEffort(asym, walk, asym * walk, walk)
    assert eff.construct_cost >= eff.verify_cost + 5.0 * hash_cost
    return eff


class AsymmetryBounds(NamedTuple):
    """Per-round lower bounds on the MBF asymmetry factor E.

    `invalid_mbf` is None for round 1, where no finite E makes a garbage
    first-round proof unprofitable; the sender has already squandered
    (E+1)S of admission effort, so no extra defense is added.
    """
    valid_agreeing: float
    invalid_mbf: Optional[float]
    invalid_hash: float
    minimum: float


def min_asymmetry(i: int) -> AsymmetryBounds:
    """Minimum admissible asymmetry factor for vote round i.

    Combines the valid-agreeing bound (E >= 1), the invalid-proof bound
    (E >= 1/(2**(i-1) - 1), rounds i > 1 only) and the invalid-hash bound
    (E >= (5*2**(i-1) - 1)/(2*2**(i-1) - 1)).  The invalid-hash bound is
    4 at i = 1 and decreases toward 5/2, so E = 4 satisfies every round.
    """
    if i < 1:
        raise ValueError("round ordinals start at 1")
    half = 1 << (i - 1)
    mbf = None if i == 1 else 1.0 / (half - 1)
    hash_bound = (5.0 * half - 1.0) / (2.0 * half - 1.0)
    minimum = max(1.0, hash_bound, mbf or 0.0)
    return AsymmetryBounds(1.0, mbf, hash_bound, minimum)


@dataclass(frozen=True)
class CostTable:
    """Closed-form costs, in cost units, for one AU shape.

    With E = 4 and the canonical walk schedule these are
    C_v = 5S, V_v = 2S, V_vd ~= S, C_p = (20/3)S, V_p = (5/3)S.
    """
    hash_cost: float            # S
    vote_construct: float       # C_v
    vote_verify_agree: float    # V_v
    vote_verify_disagree: float  # V_vd (round-1 mismatch, b << S limit)
    poll_effort_construct: float  # C_p
    poll_effort_verify: float   # V_p


@dataclass(frozen=True)
class EffortParams:
    """Effort sizing for one AU shape plus the simulation time scale.

    seconds_per_S is the wall-clock charge, in simulated seconds, for S
    cost units (hashing the whole AU once).
    """
    hash_cost: int              # S = b * B
    block_cost: int             # b
    asymmetry: int              # E_mbf
    poll_asymmetry: float       # E_p
    poll_walk_cost: float       # l_p
    seconds_per_S: float

    def __post_init__(self):
        if self.hash_cost < self.block_cost or self.hash_cost % self.block_cost:
            raise ValueError("S must be b * B for an integer B >= 1")
        if self.asymmetry < 4:
            raise ValueError("asymmetry below 4 violates the round-1 "
                             "invalid-hash bound")
        if (self.poll_asymmetry - 1) * self.poll_walk_cost < 5 * self.hash_cost - 1e-9:
            raise ValueError("(E_p - 1) * l_p must cover 5S")

    @classmethod
    def canonical(cls, num_blocks: int, block_cost: int = 1,
                  au_hash_seconds: float = 120.0,
                  asymmetry: int = 4) -> "EffortParams":
        """Canonical scenario parameters: E = 4, S mapped to 120 seconds."""
        s = num_blocks * block_cost
        pe = poll_effort_params(s)
        return cls(s, block_cost, asymmetry, pe.asymmetry, pe.walk_cost,
                   au_hash_seconds)

    @property
    def num_blocks(self) -> int:
        return self.hash_cost // self.block_cost

    def seconds(self, cost_units: float) -> float:
        """Simulated seconds charged for a computation of `cost_units`."""
        return cost_units * self.seconds_per_S / self.hash_cost

    def cost_table(self) -> CostTable:
        s = float(self.hash_cost)
        return CostTable(
            hash_cost=s,
            vote_construct=(self.asymmetry + 1) * s,
            vote_verify_agree=2 * s,
            vote_verify_disagree=s,
            poll_effort_construct=self.poll_asymmetry * self.poll_walk_cost,
            poll_effort_verify=self.poll_walk_cost,
        )


# ---------------------------------------------------------------------------
# Simulated memory-bound proofs


def _mbf_prove(nonce: bytes, walk_cost: int, asymmetry: int) -> tuple[bytes, bytes]:
    """Simulated MBF computation: returns (proof s, output A).

    Stands in for E walks of length l over the public table; the real cost
    E*l is represented by the caller's charge, not by actual cache misses.
    """
    tag = walk_cost.to_bytes(8, "big") + asymmetry.to_bytes(4, "big")
    proof = _h(b"mbf-proof", nonce, tag)
    output = _h(b"mbf-output", nonce, proof, tag)
    return proof, output


def _mbf_verify(nonce: bytes, proof: bytes, output: bytes,
                walk_cost: int, asymmetry: int) -> bool:
    """Recompute the proof walk; also checks the claimed output value."""
    want_proof, want_output = _mbf_prove(nonce, walk_cost, asymmetry)
    return proof == want_proof and output == want_output


# ---------------------------------------------------------------------------
# Votes


class VoteRound:
    """One vote round: effort proof s_i, output A_i, content hash H_i."""

    __slots__ = ("index", "proof", "output", "content_hash")

    def __init__(self, index: int, proof: bytes, output: bytes,
                 content_hash: bytes):
        self.index = index
        self.proof = proof
        self.output = output
        self.content_hash = content_hash

    def __eq__(self, other):
        return (isinstance(other, VoteRound)
                and self.index == other.index and self.proof == other.proof
                and self.output == other.output
                and self.content_hash == other.content_hash)

    def __repr__(self):
        return f"VoteRound({self.index}, s={self.proof.hex()[:8]})"


class Vote:
    """Ordered vote rounds for one (poll, voter) pair.

    `declared_bogus` marks cover-traffic votes sent by decliners and
    `_content_hint` records the content id the vote was built from; both
    are simulation bookkeeping.  An initiator must classify votes via
    verification only and never reads either field.
    """

    __slots__ = ("poll_id", "voter", "rounds", "declared_bogus",
                 "_content_hint")

    def __init__(self, poll_id, voter, rounds, declared_bogus=False,
                 content_hint: Optional[bytes] = None):
        self.poll_id = poll_id
        self.voter = voter
        self.rounds = tuple(rounds)
        self.declared_bogus = declared_bogus
        self._content_hint = content_hint

    def __repr__(self):
        return (f"Vote(poll={self.poll_id!r}, voter={self.voter!r}, "
                f"rounds={len(self.rounds)})")


def round_nonce(i: int, challenge, poll_id, voter,
                prev: Optional[VoteRound] = None) -> bytes:
    """Nonce n_i for vote round i.

    n_1 = h(challenge || pollID || voter); for i > 1 the nonce also folds
    in the previous round's proof, output and content hash, so no round
    can be precomputed before its predecessor completes.
    """
    if i < 1:
        raise ValueError("round ordinals start at 1")
    if (prev is None) != (i == 1):
        raise ValueError("previous round required exactly when i > 1")
    base = (_canon(challenge), _canon(poll_id), _canon(voter))
    if i == 1:
        return _h(b"nonce", *base)
    return _h(b"nonce", prev.proof, prev.output, prev.content_hash, *base)


def construct_vote(challenge, poll_id, voter, au: AuContent,
                   params: EffortParams) -> tuple[Vote, float]:
    """Build a vote over `au` and return it with the charged cost.

    Round i seeds a simulated MBF proof with the chained nonce n_i, then
    hashes the proof and output with the round's content span.  The total
    charge is sum(E*l_i + l_i) = (E+1)*S.
    """
    r = num_rounds(au.num_blocks)
    rounds = []
    cost = 0.0
    prev = None
    for i in range(1, r + 1):
        nonce = round_nonce(i, challenge, poll_id, voter, prev)
        walk = round_walk_cost(i, au.num_blocks, au.block_cost)
        proof, output = _mbf_prove(nonce, walk, params.asymmetry)
        content_hash = _h(b"round-hash", proof, output, au.span_bytes(i))
        prev = VoteRound(i, proof, output, content_hash)
        rounds.append(prev)
        cost += params.asymmetry * walk + walk
    vote = Vote(poll_id, voter, rounds, content_hint=au.content_id)
    return vote, cost


def construct_bogus_vote(poll_id, voter, num_blocks: int, rng) -> Vote:
    """Cover-traffic vote from a decliner: garbage rounds, zero effort.

    Structurally complete (correct round count) so it is indistinguishable
    on the wire, but its first-round proof cannot verify.
    """
    rounds = [VoteRound(i, rng.randbytes(32), rng.randbytes(32),
                        rng.randbytes(32))
              for i in range(1, num_rounds(num_blocks) + 1)]
    return Vote(poll_id, voter, rounds, declared_bogus=True)


def poll_effort_proof(challenge, poll_id) -> bytes:
    """Simulated poll-initiation effort proof for one invitee.

    Cryptographically bound to the invitee's challenge and the poll id so
    it cannot be precomputed or reused; costs C_p to construct and V_p to
    verify, charged by the caller.
    """
    return _h(b"poll-effort", _canon(challenge), _canon(poll_id))


def verify_poll_effort(proof: bytes, challenge, poll_id) -> bool:
    return proof == poll_effort_proof(challenge, poll_id)


class Verdict(Enum):
    INVALID = "invalid"
    AGREEING = "agreeing"
    DISAGREEING = "disagreeing"


def verify_vote(vote: Vote, local_au: AuContent, challenge, poll_id,
                params: EffortParams) -> tuple[Verdict, float]:
    """Verify a vote against the local AU copy; returns (verdict, cost).

    Per round: recompute the nonce from the vote's previous-round fields,
    verify the simulated MBF proof (cost l_i; failure ends verification as
    INVALID), then, while the vote still agrees, hash the local content
    span (cost l_i) and compare.  After the first mismatch the remaining
    rounds get proof verification only.  A wrong round count is INVALID at
    the first structurally bad round.
    """
    r = num_rounds(local_au.num_blocks)
    cost = 0.0
    disagree = False
    prev = None
    for i in range(1, r + 1):
        if i > len(vote.rounds):
            return Verdict.INVALID, cost  # truncated round list
        rd = vote.rounds[i - 1]
        nonce = round_nonce(i, challenge, poll_id, vote.voter, prev)
        walk = round_walk_cost(i, local_au.num_blocks, local_au.block_cost)
        cost += walk
        if not _mbf_verify(nonce, rd.proof, rd.output, walk,
                           params.asymmetry):
            return Verdict.INVALID, cost
        if not disagree:
            cost += walk
            local_hash = _h(b"round-hash", rd.proof, rd.output,
                            local_au.span_bytes(i))
            if local_hash != rd.content_hash:
                disagree = True
        prev = rd
    if len(vote.rounds) != r:
        return Verdict.INVALID, cost  # trailing extra rounds
    return (Verdict.DISAGREEING if disagree else Verdict.AGREEING), cost
