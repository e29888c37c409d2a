"""Triple scorers and their training.

Two scorer forms: translational (score is the negated L2 distance of
head + relation - tail) and bilinear (trilinear dot product). Higher
score always means more plausible. Tables can start random or from the
static contextual-embedding table; when layered features are supplied
instead, the per-layer mixture weights and the projection are the
trainable parameters and embeddings are rematerialized from them.
Training protocol is identical across initializations: uniform
corruption negatives, margin ranking loss for the translational form,
logistic loss for the bilinear form, Adam updates.
"""

import copy
import logging
from dataclasses import dataclass

import numpy as np

from . import seeds
from .optim import Adam

logger = logging.getLogger(__name__)

SCORER_KINDS = ("translational", "bilinear")


@dataclass
class Scorer:
    kind: str
    ent: np.ndarray  # (|E|, d) float64
    rel: np.ndarray  # (|R|, d)
    lam: np.ndarray | None = None  # per-layer mixture weights (layered mode)
    proj: np.ndarray | None = None  # (feature dim, d) projection (layered mode)
    layered: object | None = None  # LayeredStaticTable source features

    def __post_init__(self):
        if self.kind not in SCORER_KINDS:
            raise ValueError(f"unknown scorer kind {self.kind!r}")

    @property
    def dim(self):
        return self.ent.shape[1]

    def _check(self, h, r, t):
        if not (0 <= h < self.ent.shape[0] and 0 <= t < self.ent.shape[0]):
            raise ValueError(f"unknown entity id in ({h}, {r}, {t})")
        if not 0 <= r < self.rel.shape[0]:
            raise ValueError(f"unknown relation id {r}")

    def score(self, h, r, t):
        self._check(h, r, t)
        if self.kind == "translational":
            return -float(np.linalg.norm(self.ent[h] + self.rel[r] - self.ent[t]))
        return float(np.dot(self.ent[h] * self.rel[r], self.ent[t]))

    def score_all_heads(self, r, t):
        """Scores of (e, r, t) for every entity e."""
        if self.kind == "translational":
            return -np.linalg.norm(self.ent + self.rel[r] - self.ent[t], axis=1)
        return self.ent @ (self.rel[r] * self.ent[t])

    def score_all_tails(self, h, r):
        if self.kind == "translational":
            return -np.linalg.norm(self.ent[h] + self.rel[r] - self.ent, axis=1)
        return self.ent @ (self.ent[h] * self.rel[r])


def score_triple(scorer, h, r, t):
    return scorer.score(h, r, t)


def init_scorer_random(kind, dim, n_entities, n_relations, rng):
    """Uniform +-6/sqrt(d) tables, the usual translational-model init."""
    s = 6.0 / np.sqrt(dim)
    return Scorer(
        kind=kind,
        ent=rng.uniform(-s, s, size=(n_entities, dim)),
        rel=rng.uniform(-s, s, size=(n_relations, dim)),
    )


def _target_std(dim):
    # per-entry std of the uniform(+-6/sqrt(d)) random init
    return 2.0 * np.sqrt(3.0) / np.sqrt(dim)


def _standardize(vecs, dim):
    """Center columns and rescale globally so entries match the random
    init's spread; raw mean-pooled states carry a large common component
    and sit far outside the scale either scorer form trains well at."""
    c = vecs - vecs.mean(axis=0)
    std = c.std()
    if std == 0.0:
        return c
    return c * (_target_std(dim) / std)


def init_scorer_from_table(table, kind, dim=None, rng=None, standardize=True):
    """Materialize scorer tables from a static embedding table: an
    optional random projection when dims differ, then a standardizing
    affine map (disable with ``standardize=False`` to get the raw
    vectors)."""
    dim = dim or table.dim
    if dim != table.dim and rng is None:
        raise ValueError("projection to a different dim needs an rng")
    ent = np.asarray(table.entity_vecs, dtype=np.float64)
    rel = np.asarray(table.relation_vecs, dtype=np.float64)
    if dim != table.dim:
        W = rng.normal(0.0, 1.0 / np.sqrt(table.dim), size=(table.dim, dim))
        ent = ent @ W
        rel = rel @ W
    if standardize:
        ent = _standardize(ent, dim)
        rel = _standardize(rel, dim)
    return Scorer(kind=kind, ent=ent, rel=rel)


def init_scorer_layered(layered, kind, dim=None, rng=None, standardize=True):
    """Scorer whose embeddings are a trainable function of the layered
    features: [x_mean, sum_i lam_i h_mean_i] @ proj. With
    ``standardize`` the feature columns are centered once and the
    projection starts as a scaled identity (or random map) matching the
    random init's spread."""
    dim = dim or layered.dim
    if dim != layered.dim and rng is None:
        raise ValueError("projection to a different dim needs an rng")
    L = layered.n_layers
    if standardize:
        layered = copy.deepcopy(layered)
        for block in (layered.ent_x, layered.rel_x, layered.ent_layers, layered.rel_layers):
            block -= block.mean(axis=0)
    flat_std = np.concatenate(layered.flatten(np.full(L, 1.0 / L)), axis=0).std()
    gain = _target_std(dim) / flat_std if (standardize and flat_std > 0) else 1.0
    if dim == layered.dim:
        proj = np.eye(layered.dim) * gain
    else:
        proj = rng.normal(0.0, gain / np.sqrt(layered.dim), size=(layered.dim, dim))
    scorer = Scorer(
        kind=kind,
        ent=np.zeros((layered.ent_x.shape[0], dim)),
        rel=np.zeros((layered.rel_x.shape[0], dim)),
        lam=np.full(L, 1.0 / L),
        proj=proj,
        layered=layered,
    )
    refresh_layered(scorer)
    return scorer


def refresh_layered(scorer):
    """Rematerialize ent/rel tables from (lam, proj)."""
    ent_flat, rel_flat = scorer.layered.flatten(scorer.lam)
    scorer.ent[:] = ent_flat @ scorer.proj
    scorer.rel[:] = rel_flat @ scorer.proj


@dataclass
class ScorerTrainConfig:
    epochs: int = 100
    lr: float = 0.01
    margin: float = 1.0
    negatives: int = 1
    batch_size: int = 512
    seed: int = seeds.DEFAULT_SEED

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")


def sample_negatives(triples, n_entities, known, rng, max_tries=1000):
    """One corruption per positive: replace head or tail (probability
    0.5 each) with a uniform entity, rejecting known-true triples."""
    negs = np.empty_like(triples)
    for i, (h, r, t) in enumerate(triples):
        for _ in range(max_tries):
            corrupt_head = rng.random() < 0.5
            e = int(rng.integers(n_entities))
            cand = (e, int(r), int(t)) if corrupt_head else (int(h), int(r), e)
            if cand not in known:
                negs[i] = cand
                break
        else:
            raise RuntimeError(f"could not corrupt triple ({h},{r},{t}); graph too dense")
    return negs


def _score_batch(scorer, triples):
    e_h = scorer.ent[triples[:, 0]]
    e_r = scorer.rel[triples[:, 1]]
    e_t = scorer.ent[triples[:, 2]]
    if scorer.kind == "translational":
        v = e_h + e_r - e_t
        norm = np.linalg.norm(v, axis=1)
        return -norm, (v, norm)
    return np.einsum("nd,nd,nd->n", e_h, e_r, e_t), (e_h, e_r, e_t)


def _score_grads(scorer, triples, ds, aux, d_ent, d_rel):
    """Scatter d(loss)/d(score) into embedding-table gradients."""
    if scorer.kind == "translational":
        v, norm = aux
        safe = np.where(norm > 0, norm, 1.0)
        dv = ds[:, None] * (-v / safe[:, None])
        np.add.at(d_ent, triples[:, 0], dv)
        np.add.at(d_rel, triples[:, 1], dv)
        np.add.at(d_ent, triples[:, 2], -dv)
    else:
        e_h, e_r, e_t = aux
        dsc = ds[:, None]
        np.add.at(d_ent, triples[:, 0], dsc * e_r * e_t)
        np.add.at(d_rel, triples[:, 1], dsc * e_h * e_t)
        np.add.at(d_ent, triples[:, 2], dsc * e_h * e_r)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def train_scorer(scorer, train_triples, known, cfg):
    """Train in place; returns (scorer, per-epoch mean loss trace)."""
    train_triples = np.asarray(train_triples, dtype=np.int64)
    n = len(train_triples)
    n_entities = scorer.ent.shape[0]
    layered_mode = scorer.lam is not None
    if layered_mode:
        opt = Adam({"lam": scorer.lam, "proj": scorer.proj}, lr=cfg.lr)
    else:
        opt = Adam({"ent": scorer.ent, "rel": scorer.rel}, lr=cfg.lr)

    trace = []
    for epoch in range(1, cfg.epochs + 1):
        shuffle_rng = seeds.derived_rng(cfg.seed, seeds.SCORER_INIT, epoch)
        neg_rng = seeds.derived_rng(cfg.seed, seeds.NEGATIVES, epoch)
        order = shuffle_rng.permutation(n)
        # each positive is paired with `negatives` corruptions per epoch
        pos_rep = np.repeat(train_triples[order], cfg.negatives, axis=0)
        negatives = sample_negatives(pos_rep, n_entities, known, neg_rng)
        total = 0.0
        bs = cfg.batch_size * cfg.negatives
        for start in range(0, len(pos_rep), bs):
            pos = pos_rep[start : start + bs]
            neg = negatives[start : start + bs]
            s_pos, aux_pos = _score_batch(scorer, pos)
            s_neg, aux_neg = _score_batch(scorer, neg)
            m = len(pos)
            if scorer.kind == "translational":
                viol = cfg.margin - s_pos + s_neg
                active = viol > 0
                total += float(np.where(active, viol, 0.0).sum())
                ds_pos = -active.astype(np.float64) / m
                ds_neg = active.astype(np.float64) / m
            else:
                total += float(np.logaddexp(0.0, -s_pos).sum() + np.logaddexp(0.0, s_neg).sum())
                ds_pos = -_sigmoid(-s_pos) / m
                ds_neg = _sigmoid(s_neg) / m

            d_ent = np.zeros_like(scorer.ent)
            d_rel = np.zeros_like(scorer.rel)
            _score_grads(scorer, pos, ds_pos, aux_pos, d_ent, d_rel)
            _score_grads(scorer, neg, ds_neg, aux_neg, d_ent, d_rel)

            if layered_mode:
                opt.step(_layered_grads(scorer, d_ent, d_rel))
                refresh_layered(scorer)
            else:
                opt.step({"ent": d_ent, "rel": d_rel})
        trace.append(total / len(pos_rep))
        logger.debug("scorer epoch %d loss %.6f", epoch, trace[-1])
    return scorer, trace


def _layered_grads(scorer, d_ent, d_rel):
    """Pull table gradients back onto (lam, proj) through
    emb = [x, sum_i lam_i h_i] @ proj."""
    lay = scorer.layered
    ent_flat, rel_flat = lay.flatten(scorer.lam)
    d_proj = ent_flat.T @ d_ent + rel_flat.T @ d_rel
    D = lay.ent_x.shape[1]
    proj_ctx = scorer.proj[D:]
    L = lay.n_layers
    d_lam = np.empty(L)
    for i in range(L):
        z_e = lay.ent_layers[:, i] @ proj_ctx
        z_r = lay.rel_layers[:, i] @ proj_ctx
        d_lam[i] = float((z_e * d_ent).sum() + (z_r * d_rel).sum())
    return {"lam": d_lam, "proj": d_proj}
