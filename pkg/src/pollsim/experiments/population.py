"""Population builder: clustered friends lists and take-over selection."""

from __future__ import annotations

import random

from .config import ConfigError, ScenarioConfig


def build_population(config: ScenarioConfig,
                     rng: random.Random) -> list[list[int]]:
    """Friends lists for every peer, by clustered sampling.

    Peers are randomly assigned to clusters of `cluster_size` (a remainder
    forms one short cluster).  Each peer befriends cluster_size - 1 others,
    `intra_cluster_fraction` of them from its own cluster and the rest from
    outside; a short cluster tops up from outside.
    """
    n, size = config.peers, config.cluster_size
    if size > n:
        raise ConfigError("cluster larger than population")
    ids = list(range(n))
    rng.shuffle(ids)
    clusters = [ids[i:i + size] for i in range(0, n, size)]
    cluster_of = {}
    for c in clusters:
        for p in c:
            cluster_of[p] = c
    total = size - 1
    intra_target = round(config.intra_cluster_fraction * total)
    friends: list[list[int]] = [[] for _ in range(n)]
    for p in range(n):
        own = [q for q in cluster_of[p] if q != p]
        intra = rng.sample(own, min(intra_target, len(own)))
        outside_needed = total - len(intra)
        chosen = set(intra)
        out: list[int] = []
        while len(out) < outside_needed:
            q = rng.randrange(n)
            if q != p and q not in cluster_of[p] and q not in chosen:
                chosen.add(q)
                out.append(q)
        friends[p] = intra + out
    return friends


def pick_subverted(config: ScenarioConfig, rng: random.Random) -> list[int]:
    """The floor(peers * fraction) peers converted at take-over time."""
    count = config.subverted_count()
    return sorted(rng.sample(range(config.peers), count))
