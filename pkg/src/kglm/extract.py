"""Turning the trained model into usable embeddings.

Per-occurrence contextual states are combined as [x_t, sum_i lam_i *
h_{t,i}] (the pair embedding concatenated with a layer-weighted sum of
bidirectional states), then mean-pooled per entity and per relation
into a static table exportable in word2vec text format. A position's
vector is attributed to both members of its pair token. Items never
observed in the corpus fall back to their context-independent embedding
in its slot and zeros elsewhere.
"""

from dataclasses import dataclass

import numpy as np

from .bilm import Batch, BatchStates, _direction_forward, tokenize_chain


def _states_batch(batch, params, config):
    """Eval-mode stack states for a padded batch (no loss, no dropout)."""
    x = np.concatenate([params.ent_emb[batch.ents], params.rel_emb[batch.rels]], axis=2)
    outs_f, _ = _direction_forward(x, batch.mask, params.fwd, config, False, False, None)
    outs_b, _ = _direction_forward(x, batch.mask, params.bwd, config, True, False, None)
    return BatchStates(x=x, fwd=np.stack(outs_f), bwd=np.stack(outs_b), lengths=batch.lengths)


def _single_batch(tokenized, dtype):
    ents, rels = tokenized
    T = len(ents)
    return Batch(
        ents=ents.reshape(T, 1),
        rels=rels.reshape(T, 1),
        lengths=np.array([T], dtype=np.int64),
        mask=np.ones((T, 1), dtype=dtype),
    )


def contextual_reps(chain, params, config):
    """Per-position representations of one chain: the pair embedding
    plus every layer's forward and backward state (2L+1 vectors per
    position)."""
    if np.any(chain.entities >= params.n_entities) or np.any(chain.entities < 0):
        raise ValueError("chain contains an entity outside the model vocabulary")
    if len(chain.relations) and (
        np.any(chain.relations >= params.n_relations) or np.any(chain.relations < 0)
    ):
        raise ValueError("chain contains a relation outside the model vocabulary")
    tokenized = tokenize_chain(chain, params.n_relations - 1)
    states = _states_batch(_single_batch(tokenized, config.dtype), params, config)
    return states.per_sequence(0)


def combine(layer_states, lam):
    """Concatenate x_t with the lam-weighted sum of per-layer
    bidirectional states. Output dim is
    (entity_dim + relation_dim) + 2 * proj_dim."""
    lam = np.asarray(lam, dtype=layer_states.x.dtype)
    if lam.shape != (layer_states.n_layers,):
        raise ValueError(f"lambda must have one weight per layer ({layer_states.n_layers})")
    ctx = np.tensordot(lam, layer_states.layer_concat(), axes=(0, 0))
    return np.concatenate([layer_states.x, ctx], axis=1)


@dataclass
class LayeredStaticTable:
    """Mean x-part and per-layer mean contextual states for every
    vocabulary item; the raw material for any lambda combination.
    Layer blocks of never-observed items are zero and their x block is
    the item's own embedding (zeros in the other slot)."""

    ent_x: np.ndarray  # (|E|, D)
    ent_layers: np.ndarray  # (|E|, L, 2P)
    ent_counts: np.ndarray
    rel_x: np.ndarray
    rel_layers: np.ndarray
    rel_counts: np.ndarray

    @property
    def n_layers(self):
        return self.ent_layers.shape[1]

    @property
    def dim(self):
        return self.ent_x.shape[1] + self.ent_layers.shape[2]

    def flatten(self, lam):
        lam = np.asarray(lam, dtype=np.float64)
        ent = np.concatenate([self.ent_x, np.tensordot(self.ent_layers, lam, axes=(1, 0))], axis=1)
        rel = np.concatenate([self.rel_x, np.tensordot(self.rel_layers, lam, axes=(1, 0))], axis=1)
        return ent, rel


@dataclass
class StaticEmbeddingTable:
    """One fixed vector per entity and relation plus occurrence counts."""

    entity_vecs: np.ndarray
    relation_vecs: np.ndarray
    entity_counts: np.ndarray
    relation_counts: np.ndarray

    @property
    def dim(self):
        return self.entity_vecs.shape[1]


def aggregate_layered(chains, params, config, chunk_size=256):
    """Mean-pool contextual states over every corpus occurrence,
    separately per layer, attributed to both the entity and the
    relation of each pair token."""
    if not chains:
        raise ValueError("cannot aggregate over an empty corpus")
    nE, nR = params.n_entities, params.n_relations
    D = params.ent_emb.shape[1] + params.rel_emb.shape[1]
    L = len(params.fwd)
    P2 = 2 * params.fwd[0].Wp.shape[1]
    eos = nR - 1

    ent_x = np.zeros((nE, D))
    ent_layers = np.zeros((nE, L, P2))
    ent_counts = np.zeros(nE, dtype=np.int64)
    rel_x = np.zeros((nR, D))
    rel_layers = np.zeros((nR, L, P2))
    rel_counts = np.zeros(nR, dtype=np.int64)

    tokenized = [tokenize_chain(c, eos) for c in chains]
    for start in range(0, len(tokenized), chunk_size):
        group = tokenized[start : start + chunk_size]
        T = max(len(e) for e, _ in group)
        B = len(group)
        ents = np.zeros((T, B), dtype=np.int64)
        rels = np.zeros((T, B), dtype=np.int64)
        lengths = np.zeros(B, dtype=np.int64)
        mask = np.zeros((T, B), dtype=config.dtype)
        for b, (e, r) in enumerate(group):
            ents[: len(e), b] = e
            rels[: len(e), b] = r
            lengths[b] = len(e)
            mask[: len(e), b] = 1.0
        states = _states_batch(Batch(ents, rels, lengths, mask), params, config)
        h = np.concatenate([states.fwd, states.bwd], axis=3)  # (L,T,B,2P)
        for b in range(B):
            n = int(lengths[b])
            e_ids = ents[:n, b]
            r_ids = rels[:n, b]
            xv = states.x[:n, b].astype(np.float64)
            hv = h[:, :n, b].transpose(1, 0, 2).astype(np.float64)  # (n, L, 2P)
            np.add.at(ent_x, e_ids, xv)
            np.add.at(ent_layers, e_ids, hv)
            np.add.at(ent_counts, e_ids, 1)
            np.add.at(rel_x, r_ids, xv)
            np.add.at(rel_layers, r_ids, hv)
            np.add.at(rel_counts, r_ids, 1)

    d_e = params.ent_emb.shape[1]
    ent_div = np.maximum(ent_counts, 1)[:, None]
    rel_div = np.maximum(rel_counts, 1)[:, None]
    ent_x /= ent_div
    rel_x /= rel_div
    ent_layers /= ent_div[:, :, None]
    rel_layers /= rel_div[:, :, None]
    # fallback: unobserved items keep their own embedding, zero context
    for e in np.flatnonzero(ent_counts == 0):
        ent_x[e, :d_e] = params.ent_emb[e]
    for r in np.flatnonzero(rel_counts == 0):
        rel_x[r, d_e:] = params.rel_emb[r]
    return LayeredStaticTable(
        ent_x=ent_x,
        ent_layers=ent_layers,
        ent_counts=ent_counts,
        rel_x=rel_x,
        rel_layers=rel_layers,
        rel_counts=rel_counts,
    )


def aggregate_static(chains, params, config, lam=None):
    """Static per-item table from mean-pooled combined vectors; ``lam``
    defaults to uniform weights over layers."""
    layered = aggregate_layered(chains, params, config)
    L = layered.n_layers
    if lam is None:
        lam = np.full(L, 1.0 / L)
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (L,):
        raise ValueError(f"lambda must have one weight per layer ({L})")
    ent, rel = layered.flatten(lam)
    return StaticEmbeddingTable(
        entity_vecs=ent,
        relation_vecs=rel,
        entity_counts=layered.ent_counts,
        relation_counts=layered.rel_counts,
    )


def _write_vec(path, names, vecs):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(names)} {vecs.shape[1]}\n")
        for name, row in zip(names, vecs):
            fh.write(name + " " + " ".join(f"{v:.9g}" for v in row) + "\n")


def export_embeddings(table, entity_names, relation_names, base_path):
    """Write word2vec-style text files ``<base>.entities.vec`` and
    ``<base>.relations.vec`` (header '<count> <dim>', then one line per
    token). Returns the two paths."""
    ent_path = f"{base_path}.entities.vec"
    rel_path = f"{base_path}.relations.vec"
    _write_vec(ent_path, entity_names, table.entity_vecs)
    _write_vec(rel_path, relation_names, table.relation_vecs)
    return ent_path, rel_path


def load_embeddings(path):
    """Read a .vec file back into (names, float64 matrix)."""
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        count, dim = int(head[0]), int(head[1])
        names = []
        vecs = np.empty((count, dim))
        for i in range(count):
            parts = fh.readline().rstrip("\n").split(" ")
            names.append(parts[0])
            vecs[i] = [float(v) for v in parts[1:]]
    return names, vecs
