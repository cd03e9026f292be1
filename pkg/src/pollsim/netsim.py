"""Deterministic discrete-event engine with a star-topology flow model.

Nodes hang off an infinite-capacity core via per-node links; a flow's
bandwidth is the minimum of the two link bandwidths and its latency the
sum of the two propagation latencies.  No congestion is modeled, so flow
times are independent of concurrent traffic.

Events are processed in nondecreasing time order with FIFO tie-breaking,
making every run a pure function of (config, seed).
"""

from __future__ import annotations

import hashlib
import heapq
import math
import random
from typing import Callable, Iterable, Optional

BANDWIDTH_CHOICES = (1.5e6, 10e6, 1000e6)   # bits/second
LATENCY_RANGE = (0.001, 0.030)              # seconds


class SimulationError(RuntimeError):
    """A scheduling invariant was violated (exposes protocol bugs)."""


class Link:
    __slots__ = ("bandwidth", "latency")

    def __init__(self, bandwidth: float, latency: float):
        self.bandwidth = bandwidth
        self.latency = latency

    @classmethod
    def sample(cls, rng: random.Random) -> "Link":
        """One link per node, sampled once at scenario start."""
        return cls(rng.choice(BANDWIDTH_CHOICES),
                   rng.uniform(*LATENCY_RANGE))

    def __repr__(self):
        return f"Link({self.bandwidth / 1e6:g}Mbps, {self.latency * 1e3:.1f}ms)"


def flow_time(src: Link, dst: Link, bits: float) -> float:
    """Transfer time: size over the narrower link, plus both latencies."""
    if bits < 0:
        raise ValueError("flow size must be nonnegative")
    return bits / min(src.bandwidth, dst.bandwidth) + (src.latency
                                                       + dst.latency)


def substream(seed: int, *labels) -> random.Random:
    """Independent RNG substream derived from the scenario seed."""
    d = hashlib.blake2b(digest_size=16)
    d.update(repr((seed,) + labels).encode())
    return random.Random(int.from_bytes(d.digest(), "big"))


class Engine:
    """Event queue, simulated clock and serial compute charging."""

    __slots__ = ("now", "_heap", "_seq", "stopped", "events_processed")

    def __init__(self):
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self.stopped = False
        self.events_processed = 0

    def schedule(self, delay: float, fn: Callable, arg=None) -> None:
        if delay < 0:
            raise SimulationError(f"event scheduled {-delay}s in the past")
        self._seq += 1
        heapq.heappush(self._heap, (self.now + delay, self._seq, fn, arg))

    def schedule_at(self, when: float, fn: Callable, arg=None) -> None:
        self.schedule(when - self.now, fn, arg)

    def charge(self, actor, seconds: float, fn: Callable, arg=None) -> float:
        """Charge `seconds` of serial compute to `actor`.

        The actor is compute-busy until completion, when `fn` runs.
        Overlapping charges on one actor are scheduling errors.
        """
        if actor.cpu_free_at > self.now + 1e-9:
            raise SimulationError(
                f"overlapping compute charge on {actor!r} "
                f"(busy until {actor.cpu_free_at}, now {self.now})")
        done = self.now + seconds
        actor.cpu_free_at = done
        self.schedule(seconds, fn, arg)
        return done

    def stop(self) -> None:
        self.stopped = True

    def run(self, until: float) -> None:
        """Process events through `until` or until stopped."""
        heap = self._heap
        pop = heapq.heappop
        n = 0
        while heap and not self.stopped:
            t = heap[0][0]
            if t > until:
                break
            _, _, fn, arg = pop(heap)
            self.now = t
            n += 1
            fn(arg)
        self.events_processed += n
        if not self.stopped:
            self.now = until


def charge_compute(engine: Engine, peer, cost_units: float, params,
                   fn: Callable, arg=None) -> float:
    """Charge `cost_units` of hashing-equivalent work to a peer.

    Completion lands at now + cost_units scaled by the scenario's
    seconds-per-S constant; returns the completion time.
    """
    return engine.charge(peer, params.seconds(cost_units), fn, arg)


class DamageProcess:
    """Per-victim exponential undetected-damage process.

    Each victim's AU is replaced, at mean interval `mtbf_seconds`, by a
    fresh random-content version the victim does not notice.  A mean of
    None or +inf disables the process.
    """

    def __init__(self, engine: Engine, victims: Iterable,
                 mtbf_seconds: Optional[float], rng: random.Random,
                 on_damage: Callable):
        self.engine = engine
        self.rng = rng
        self.on_damage = on_damage
        self.events = 0
        if mtbf_seconds is not None and not math.isinf(mtbf_seconds):
            if mtbf_seconds <= 0:
                raise ValueError("damage MTBF must be positive")
            self.rate = 1.0 / mtbf_seconds
            for victim in victims:
                self._arm(victim)

    def _arm(self, victim) -> None:
        self.engine.schedule(self.rng.expovariate(self.rate),
                             self._fire, victim)

    def _fire(self, victim) -> None:
        self.events += 1
        self.on_damage(victim)
        self._arm(victim)
