"""Knowledge graph loading, vocabularies, adjacency, and the filtered
candidate index used for ranking.

Triples live in UTF-8 TSV files (``head<TAB>relation<TAB>tail``). Entity
and relation ids are dense integers assigned in first-appearance order,
so a given input always produces the same vocabulary. Inverse relations
are synthesized (``r`` gains ``r^-1``) so walks can traverse edges
against their direction; an end-of-sequence sentinel relation is
appended last to the relation vocabulary and never appears in a triple.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

EOS_SURFACE = "<eos>"
INVERSE_SUFFIX = "^-1"


class TripleParseError(ValueError):
    """A triple file line that is not head<TAB>relation<TAB>tail."""


class Vocab:
    """Ordered string-to-dense-id mapping."""

    def __init__(self, items=()):
        self.items = list(items)
        self.index = {s: i for i, s in enumerate(self.items)}
        if len(self.index) != len(self.items):
            raise ValueError("duplicate surface in vocabulary")

    def add(self, surface):
        i = self.index.get(surface)
        if i is None:
            i = len(self.items)
            self.items.append(surface)
            self.index[surface] = i
        return i

    def id_of(self, surface):
        try:
            return self.index[surface]
        except KeyError:
            raise KeyError(f"unknown token: {surface!r}") from None

    def __contains__(self, surface):
        return surface in self.index

    def __len__(self):
        return len(self.items)


def load_triples(path):
    """Read a TSV triple file, returning (head, relation, tail) surface
    tuples in file order. Empty lines are skipped; any other line with a
    field count != 3 raises :class:`TripleParseError` with its line
    number. An empty file (no triples) is an error.
    """
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.removesuffix("\n").removesuffix("\r")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise TripleParseError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}"
                )
            triples.append((parts[0], parts[1], parts[2]))
    if not triples:
        raise TripleParseError(f"{path}: no triples found")
    return triples


@dataclass
class KnowledgeGraph:
    """Immutable indexed view of a triple set.

    ``triples`` holds the deduplicated input triples as id rows (n, 3).
    Adjacency is CSR over outgoing edges and, when inverses are enabled,
    contains one ``(t, r^-1, h)`` edge per stored ``(h, r, t)``.
    ``nbr_off``/``nbr_sorted`` index the sorted unique out-neighbors per
    entity, used for the second-order distance test during walks.
    """

    entities: Vocab
    relations: Vocab
    n_base_relations: int
    has_inverses: bool
    triples: np.ndarray
    adj_off: np.ndarray
    adj_rel: np.ndarray
    adj_nbr: np.ndarray
    nbr_off: np.ndarray
    nbr_sorted: np.ndarray

    @property
    def n_entities(self):
        return len(self.entities)

    @property
    def n_relations(self):
        return len(self.relations)

    @property
    def eos_id(self):
        return len(self.relations) - 1

    def inverse_id(self, rel_id):
        if not self.has_inverses:
            raise ValueError("graph was built without inverse relations")
        if rel_id >= self.n_base_relations:
            raise ValueError(f"relation {rel_id} is not a base relation")
        return rel_id + self.n_base_relations

    def is_inverse(self, rel_id):
        return self.has_inverses and self.n_base_relations <= rel_id < 2 * self.n_base_relations

    def out_edges(self, entity_id):
        """(relation ids, neighbor ids) of the outgoing edges."""
        lo, hi = self.adj_off[entity_id], self.adj_off[entity_id + 1]
        return self.adj_rel[lo:hi], self.adj_nbr[lo:hi]

    def out_degree(self, entity_id):
        return int(self.adj_off[entity_id + 1] - self.adj_off[entity_id])

    def neighbors_sorted(self, entity_id):
        lo, hi = self.nbr_off[entity_id], self.nbr_off[entity_id + 1]
        return self.nbr_sorted[lo:hi]

    def has_neighbor(self, entity_id, other_id):
        nbrs = self.neighbors_sorted(entity_id)
        k = np.searchsorted(nbrs, other_id)
        return k < len(nbrs) and nbrs[k] == other_id

    def triple_surfaces(self):
        """Stored triples back as surface tuples, preserving order."""
        ents, rels = self.entities.items, self.relations.items
        return [(ents[h], rels[r], ents[t]) for h, r, t in self.triples]


def _dedupe(triples):
    seen = set()
    out = []
    for t in triples:
        if t in seen:
            continue
        seen.add(t)
        out.append(t)
    dropped = len(triples) - len(out)
    if dropped:
        logger.warning("dropped %d duplicate triples", dropped)
    return out


def build_graph(triples, add_inverses=True):
    """Index surface triples into a :class:`KnowledgeGraph`.

    Ids follow first appearance (head before tail within a triple).
    Inverse relation ids are base id + number of base relations; the EOS
    sentinel takes the final relation id. Duplicate triples are dropped
    with a logged count.
    """
    if not triples:
        raise ValueError("cannot build a graph from an empty triple list")
    triples = _dedupe(triples)

    entities = Vocab()
    relations = Vocab()
    for h, r, t in triples:
        if r == EOS_SURFACE:
            raise ValueError(f"relation surface {EOS_SURFACE!r} is reserved")
        entities.add(h)
        relations.add(r)
        entities.add(t)
    n_base = len(relations)
    if add_inverses:
        for r in list(relations.items[:n_base]):
            inv = r + INVERSE_SUFFIX
            if inv in relations:
                raise ValueError(f"relation surface {inv!r} collides with a synthesized inverse")
            relations.add(inv)
    relations.add(EOS_SURFACE)

    ids = np.array(
        [(entities.index[h], relations.index[r], entities.index[t]) for h, r, t in triples],
        dtype=np.int64,
    )

    n_ent = len(entities)
    deg = np.zeros(n_ent, dtype=np.int64)
    np.add.at(deg, ids[:, 0], 1)
    if add_inverses:
        np.add.at(deg, ids[:, 2], 1)
    adj_off = np.zeros(n_ent + 1, dtype=np.int64)
    np.cumsum(deg, out=adj_off[1:])
    m = int(adj_off[-1])
    adj_rel = np.empty(m, dtype=np.int64)
    adj_nbr = np.empty(m, dtype=np.int64)
    cursor = adj_off[:-1].copy()
    for h, r, t in ids:
        k = cursor[h]
        adj_rel[k] = r
        adj_nbr[k] = t
        cursor[h] += 1
        if add_inverses:
            k = cursor[t]
            adj_rel[k] = r + n_base
            adj_nbr[k] = h
            cursor[t] += 1

    nbr_chunks = []
    nbr_off = np.zeros(n_ent + 1, dtype=np.int64)
    for e in range(n_ent):
        uniq = np.unique(adj_nbr[adj_off[e] : adj_off[e + 1]])
        nbr_chunks.append(uniq)
        nbr_off[e + 1] = nbr_off[e] + len(uniq)
    nbr_sorted = np.concatenate(nbr_chunks) if nbr_chunks else np.empty(0, dtype=np.int64)

    return KnowledgeGraph(
        entities=entities,
        relations=relations,
        n_base_relations=n_base,
        has_inverses=add_inverses,
        triples=ids,
        adj_off=adj_off,
        adj_rel=adj_rel,
        adj_nbr=adj_nbr,
        nbr_off=nbr_off,
        nbr_sorted=nbr_sorted.astype(np.int64),
    )


@dataclass
class FilterIndex:
    """Known-true entity sets over train+valid+test, keyed per query side.

    ``heads[(r, t)]`` holds every entity h with (h, r, t) known true;
    ``tails[(h, r)]`` the symmetric tail sets.
    """

    heads: dict = field(default_factory=dict)
    tails: dict = field(default_factory=dict)

    def known_triples(self):
        return {(h, r, t) for (r, t), hs in self.heads.items() for h in hs}


def build_filter_index(*triple_arrays):
    """Build the filtered-ranking index over any number of splits."""
    heads = defaultdict(set)
    tails = defaultdict(set)
    for arr in triple_arrays:
        for h, r, t in np.asarray(arr):
            heads[(int(r), int(t))].add(int(h))
            tails[(int(h), int(r))].add(int(t))
    return FilterIndex(heads=dict(heads), tails=dict(tails))


@dataclass
class DatasetSplit:
    """Train/valid/test id triples plus the shared filter index."""

    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    filter_index: FilterIndex

    def __post_init__(self):
        seen = set()
        for name, arr in (("train", self.train), ("valid", self.valid), ("test", self.test)):
            s = {tuple(row) for row in np.asarray(arr)}
            if seen & s:
                raise ValueError(f"split {name} overlaps another split")
            seen |= s


def _to_ids(surface_triples, entities, relations):
    return np.array(
        [(entities.id_of(h), relations.id_of(r), entities.id_of(t)) for h, r, t in surface_triples],
        dtype=np.int64,
    ).reshape(-1, 3)


def load_dataset(train_path, valid_path=None, test_path=None, add_inverses=True):
    """Load split files into a graph plus :class:`DatasetSplit`.

    The vocabulary covers every split so evaluation triples always have
    ids, but the graph's stored triples and adjacency come from the
    train split alone: walks and scorer training must not see held-out
    edges.
    """
    train = load_triples(train_path)
    valid = load_triples(valid_path) if valid_path else []
    test = load_triples(test_path) if test_path else []

    graph = build_graph(train, add_inverses=add_inverses)
    for h, r, t in valid + test:
        graph.entities.add(h)
        graph.entities.add(t)
        if r not in graph.relations:
            raise ValueError(f"relation {r!r} appears only outside the train split")
    extra = graph.n_entities - (graph.nbr_off.shape[0] - 1)
    if extra:
        # entities first seen in valid/test are isolated in the train graph
        graph.adj_off = np.concatenate([graph.adj_off, np.full(extra, graph.adj_off[-1])])
        graph.nbr_off = np.concatenate([graph.nbr_off, np.full(extra, graph.nbr_off[-1])])

    train_ids = graph.triples
    valid_ids = _to_ids(valid, graph.entities, graph.relations)
    test_ids = _to_ids(test, graph.entities, graph.relations)
    fidx = build_filter_index(train_ids, valid_ids, test_ids)
    split = DatasetSplit(train=train_ids, valid=valid_ids, test=test_ids, filter_index=fidx)
    return graph, split
