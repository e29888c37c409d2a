"""Second-order biased random walks over the graph and corpus assembly.

A walk alternates entities and relations, ``e1 r1 e2 ... ek``, and is
biased by a return parameter p and an in-out parameter q: stepping back
to the previous node weighs 1/p, stepping to one of its neighbors 1,
and stepping further away 1/q. Each (start entity, walk index) pair
owns an RNG stream derived from the corpus seed, so generation order
and thread count never change the output.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels, seeds

logger = logging.getLogger(__name__)


@dataclass
class WalkConfig:
    p: float = 1.0
    q: float = 1.0
    walks_per_node: int = 20
    walk_length: int = 21
    seed: int = seeds.DEFAULT_SEED

    def __post_init__(self):
        if not self.p > 0 or not self.q > 0:
            raise ValueError("p and q must be positive")
        if self.walk_length < 3 or self.walk_length % 2 == 0:
            raise ValueError("walk_length must be odd and >= 3")
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")

    @property
    def n_steps(self):
        return (self.walk_length - 1) // 2


@dataclass
class Chain:
    """One walk: entity ids and the relation ids between them.

    ``dead_end`` marks chains truncated before reaching the configured
    length because some entity had no outgoing edges.
    """

    entities: np.ndarray
    relations: np.ndarray
    dead_end: bool = False

    def __post_init__(self):
        if len(self.entities) != len(self.relations) + 1:
            raise ValueError("chain must alternate entities and relations")

    @property
    def n_tokens(self):
        return len(self.entities) + len(self.relations)

    def surfaces(self, graph):
        out = []
        for i, e in enumerate(self.entities):
            out.append(graph.entities.items[e])
            if i < len(self.relations):
                out.append(graph.relations.items[self.relations[i]])
        return out


def transition_weight(prev_entity, cur_entity, next_entity, graph, p, q):
    """Unnormalized second-order weight for stepping cur -> next given
    the walk came from prev. ``prev_entity=None`` (no history yet)
    weighs every neighbor 1."""
    if not graph.has_neighbor(cur_entity, next_entity):
        raise ValueError(f"{next_entity} is not a neighbor of {cur_entity}")
    if prev_entity is None:
        return 1.0
    if next_entity == prev_entity:
        return 1.0 / p
    if graph.has_neighbor(prev_entity, next_entity):
        return 1.0
    return 1.0 / q


class StepDistribution(NamedTuple):
    rels: np.ndarray
    nbrs: np.ndarray
    probs: np.ndarray


def next_step_distribution(prev_entity, cur_entity, graph, p, q):
    """Normalized next-step probabilities over the (relation, neighbor)
    edges out of ``cur_entity``. Parallel edges each carry their
    neighbor's full weight and are normalized jointly. Returns empty
    arrays for a dead end."""
    rels, nbrs = graph.out_edges(cur_entity)
    if len(nbrs) == 0:
        return StepDistribution(rels, nbrs, np.empty(0, dtype=np.float64))
    w = np.array(
        [transition_weight(prev_entity, cur_entity, int(x), graph, p, q) for x in nbrs],
        dtype=np.float64,
    )
    return StepDistribution(rels, nbrs, w / w.sum())


def sample_next(prev_entity, cur_entity, graph, p, q, rng):
    """Draw one (relation, neighbor) step using the active kernel."""
    lo = graph.adj_off[cur_entity]
    hi = graph.adj_off[cur_entity + 1]
    if hi == lo:
        raise ValueError(f"entity {cur_entity} has no outgoing edges")
    prev = -1 if prev_entity is None else int(prev_entity)
    k = kernels.step_choice(
        graph.adj_rel,
        graph.adj_nbr,
        lo,
        hi,
        graph.nbr_off,
        graph.nbr_sorted,
        prev,
        1.0 / p,
        1.0 / q,
        rng.random(),
    )
    return int(graph.adj_rel[lo + k]), int(graph.adj_nbr[lo + k])


def sample_walk(start_entity, graph, config, rng):
    """Walk from ``start_entity``; the first step is uniform over its
    out-edges, later steps follow the second-order rule. Dead ends
    truncate the chain (a start with no out-edges yields a single-entity
    chain)."""
    n_steps = config.n_steps
    uniforms = rng.random(n_steps)
    ents, rels, k = kernels.walk_steps(
        graph.adj_off,
        graph.adj_rel,
        graph.adj_nbr,
        graph.nbr_off,
        graph.nbr_sorted,
        np.int64(start_entity),
        n_steps,
        1.0 / config.p,
        1.0 / config.q,
        uniforms,
    )
    return Chain(entities=ents[: k + 1].copy(), relations=rels[:k].copy(), dead_end=k < n_steps)


def _walks_for_entity(entity_id, graph, config):
    out = []
    for w in range(config.walks_per_node):
        rng = seeds.derived_rng(config.seed, seeds.WALKS, entity_id, w)
        out.append(sample_walk(entity_id, graph, config, rng))
    return out


def generate_corpus(graph, config, out_path=None, threads=1):
    """Generate walks_per_node chains per entity in canonical
    (entity id, walk index) order, optionally writing them to
    ``out_path`` (one chain per line, space-separated surfaces)."""
    n = graph.n_entities
    if threads > 1:
        chains_per_entity = [None] * n
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(_walks_for_entity, e, graph, config): e for e in range(n)}
            for fut in futures:
                chains_per_entity[futures[fut]] = fut.result()
        chains = [c for group in chains_per_entity for c in group]
    else:
        chains = []
        for e in range(n):
            chains.extend(_walks_for_entity(e, graph, config))
    truncated = sum(1 for c in chains if c.dead_end)
    if truncated:
        logger.warning("%d of %d chains hit a dead end and were truncated", truncated, len(chains))
    if out_path is not None:
        write_corpus(chains, graph, out_path)
    return chains


def _check_surfaces(graph):
    for voc in (graph.entities, graph.relations):
        for s in voc.items:
            if " " in s or "\t" in s or "\n" in s:
                raise ValueError(f"token {s!r} contains whitespace; cannot serialize")


def write_corpus(chains, graph, path):
    _check_surfaces(graph)
    with open(path, "w", encoding="utf-8") as fh:
        for chain in chains:
            fh.write(" ".join(chain.surfaces(graph)))
            fh.write("\n")


def read_corpus(path, graph):
    """Parse a corpus file back into :class:`Chain` objects."""
    chains = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            toks = line.split(" ")
            if len(toks) % 2 == 0:
                raise ValueError(f"{path}:{lineno}: even token count, not a chain")
            try:
                ents = np.array([graph.entities.id_of(t) for t in toks[0::2]], dtype=np.int64)
                rels = np.array([graph.relations.id_of(t) for t in toks[1::2]], dtype=np.int64)
            except KeyError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            chains.append(Chain(entities=ents, relations=rels))
    return chains
