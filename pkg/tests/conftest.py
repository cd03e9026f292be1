"""Shared fixtures: hand-built miniature worlds for driving peer actors."""

import random

import pytest

from pollsim.effort import EffortParams
from pollsim.experiments.metrics import Metrics
from pollsim.netsim import Engine, Link, substream
from pollsim.peers import LoyalPeer, World
from pollsim.protocol import (
    AuKind,
    AuVersion,
    PeerState,
    ProtocolParams,
    TimerTable,
)
from pollsim.effort import AuContent

AU_BITS = 1e6


def make_world(n_peers=8, seed=1, au_blocks=4, stop_on_alarm="none",
               **params_kw):
    """A fully wired world of loyal peers, all friends with each other."""
    params = ProtocolParams(**params_kw) if params_kw else ProtocolParams()
    eparams = EffortParams.canonical(au_blocks)
    timers = TimerTable.derive(params, eparams, AU_BITS)
    engine = Engine()
    metrics = Metrics(n_peers, range(n_peers), 0, stop_on_alarm)
    world = World(engine, params, eparams, timers, AU_BITS, metrics, seed)
    good = AuVersion(AuContent(b"good", au_blocks), AuKind.GOOD)
    world.good_au = good
    link_rng = substream(seed, "links")
    peers = []
    for pid in range(n_peers):
        friends = [q for q in range(n_peers) if q != pid]
        state = PeerState(pid, good, friends, Link.sample(link_rng))
        actor = LoyalPeer(world, state, substream(seed, "peer", pid))
        world.actors[pid] = actor
        peers.append(actor)
    metrics.bind(world)
    return world, peers


def bootstrap_all(world, peers):
    """Fill reference lists without arming any engine timers."""
    from pollsim import protocol
    for p in peers:
        protocol.bootstrap(p.state, world.params, p.rng)


# churn=1.0 keeps tiny all-friends worlds alive: the Q entries each poll
# consumes flow straight back in from the friends list
SMALL = dict(inner_size=5, quorum=3, max_minority=1, churn=1.0)


@pytest.fixture
def small_world():
    world, peers = make_world(n_peers=8, **SMALL)
    bootstrap_all(world, peers)
    return world, peers
