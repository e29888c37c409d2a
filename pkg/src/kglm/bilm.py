"""Bidirectional LSTM language model over (entity, relation) pair tokens.

A chain of k entities becomes k pair tokens; the last entity pairs with
the end-of-sequence relation. The forward stack predicts the next pair
from the prefix, the backward stack the previous pair from the suffix,
and both share the embedding tables and the factorized softmax heads
(independent entity and relation distributions per position). The loss
is the mean negative log likelihood per predicted position across both
directions.
"""

from dataclasses import dataclass

import numpy as np

from .lstm import lstm_layer_backward, lstm_layer_forward


def tokenize_chain(chain, eos_rel_id):
    """Chain -> aligned (entity ids, relation ids) arrays of equal
    length; the terminal entity pairs with the EOS relation. A length-1
    chain yields a single token and cannot be trained on."""
    ents = np.asarray(chain.entities, dtype=np.int64)
    rels = np.concatenate([np.asarray(chain.relations, dtype=np.int64), [eos_rel_id]])
    return ents, rels


def detokenize_pairs(ents, rels, eos_rel_id):
    """Inverse of :func:`tokenize_chain`."""
    from .walker import Chain

    if rels[-1] != eos_rel_id:
        raise ValueError("pair sequence does not end with the EOS relation")
    return Chain(entities=np.asarray(ents, dtype=np.int64), relations=np.asarray(rels[:-1], dtype=np.int64))


@dataclass
class Batch:
    ents: np.ndarray  # (T, B) int64, padded with 0
    rels: np.ndarray
    lengths: np.ndarray  # (B,)
    mask: np.ndarray  # (T, B) float 0/1


def pack_batch(token_pairs, dtype=np.float32):
    """Pad tokenized sequences into a :class:`Batch`, dropping sequences
    shorter than 2 tokens. Returns (batch or None, n_skipped)."""
    usable = [(e, r) for e, r in token_pairs if len(e) >= 2]
    skipped = len(token_pairs) - len(usable)
    if not usable:
        return None, skipped
    B = len(usable)
    T = max(len(e) for e, _ in usable)
    ents = np.zeros((T, B), dtype=np.int64)
    rels = np.zeros((T, B), dtype=np.int64)
    lengths = np.zeros(B, dtype=np.int64)
    mask = np.zeros((T, B), dtype=dtype)
    for b, (e, r) in enumerate(usable):
        n = len(e)
        ents[:n, b] = e
        rels[:n, b] = r
        lengths[b] = n
        mask[:n, b] = 1.0
    return Batch(ents=ents, rels=rels, lengths=lengths, mask=mask), skipped


@dataclass
class LayerStates:
    """The 2L+1 vectors of one sequence position range: the pair
    embedding plus each layer's forward and backward states."""

    x: np.ndarray  # (T, D)
    fwd: np.ndarray  # (L, T, P)
    bwd: np.ndarray  # (L, T, P)

    @property
    def n_layers(self):
        return self.fwd.shape[0]

    def reps_at(self, t):
        """All 2L+1 representations of position t."""
        L = self.n_layers
        return [self.x[t]] + [self.fwd[i, t] for i in range(L)] + [self.bwd[i, t] for i in range(L)]

    def layer_concat(self):
        """(L, T, 2P): per-layer bidirectional states."""
        return np.concatenate([self.fwd, self.bwd], axis=2)


@dataclass
class BatchStates:
    x: np.ndarray  # (T, B, D)
    fwd: np.ndarray  # (L, T, B, P)
    bwd: np.ndarray
    lengths: np.ndarray

    def per_sequence(self, b):
        n = int(self.lengths[b])
        return LayerStates(x=self.x[:n, b], fwd=self.fwd[:, :n, b], bwd=self.bwd[:, :n, b])


@dataclass
class ForwardResult:
    loss: float
    loss_fwd: float
    loss_bwd: float
    n_events: int
    states: BatchStates
    cache: dict | None


def log_softmax(logits):
    m = logits.max(axis=1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _direction_forward(x, mask, layers, config, reverse, train, rng):
    """Run one direction's stack; returns per-layer stack outputs and
    the caches backward needs."""
    inp = x
    lo, hi = config.clip_lo, config.clip_hi
    caches, drop_masks, res_pre, outs = [], [], [], []
    for i, layer in enumerate(layers):
        dm = None
        if i > 0 and train and config.dropout > 0.0:
            keep = 1.0 - config.dropout
            dm = (rng.random(inp.shape) < keep).astype(inp.dtype) / keep
            inp = inp * dm
        drop_masks.append(dm)
        out, cache = lstm_layer_forward(inp, mask, layer, lo, hi, reverse=reverse)
        caches.append(cache)
        if config.residual and i > 0:
            s = out + inp
            res_pre.append(s)
            out = np.clip(s, lo, hi)
        else:
            res_pre.append(None)
        outs.append(out)
        inp = out
    return outs, {"caches": caches, "drop_masks": drop_masks, "res_pre": res_pre}


def _direction_loss(top, batch, params, reverse):
    """Cross-entropy of one direction's top states against the shifted
    targets. Event t of the forward direction predicts token t+1; the
    backward direction predicts token t-1."""
    T, B, P = top.shape
    if reverse:
        states = top[1:]
        tgt_e, tgt_r = batch.ents[:-1], batch.rels[:-1]
    else:
        states = top[:-1]
        tgt_e, tgt_r = batch.ents[1:], batch.rels[1:]
    ev = batch.mask[1:].reshape(-1)
    M = (T - 1) * B
    S = states.reshape(M, P)
    logp_e = log_softmax(S @ params.sm_ent_W + params.sm_ent_b)
    logp_r = log_softmax(S @ params.sm_rel_W + params.sm_rel_b)
    te = tgt_e.reshape(-1)
    tr = tgt_r.reshape(-1)
    rows = np.arange(M)
    nll = -(logp_e[rows, te] + logp_r[rows, tr])
    total = float((nll * ev).sum())
    return total, {
        "probs_e": np.exp(logp_e),
        "probs_r": np.exp(logp_r),
        "tgt_e": te,
        "tgt_r": tr,
        "ev": ev,
        "states_flat": S,
    }


def bilm_forward(batch, params, config, mode="train", rng=None):
    """Full forward pass. In train mode the returned cache supports
    :func:`bilm_backward`; eval mode applies no dropout and keeps no
    cache."""
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    train = mode == "train"
    if train and config.dropout > 0.0 and rng is None:
        raise ValueError("train mode with dropout needs an rng")
    x = np.concatenate(
        [params.ent_emb[batch.ents], params.rel_emb[batch.rels]], axis=2
    )
    outs_f, cache_f = _direction_forward(x, batch.mask, params.fwd, config, False, train, rng)
    outs_b, cache_b = _direction_forward(x, batch.mask, params.bwd, config, True, train, rng)

    sum_f, loss_cache_f = _direction_loss(outs_f[-1], batch, params, reverse=False)
    sum_b, loss_cache_b = _direction_loss(outs_b[-1], batch, params, reverse=True)
    n_dir = float(batch.mask[1:].sum())
    n_events = int(2 * n_dir)
    loss = (sum_f + sum_b) / n_events

    states = BatchStates(
        x=x,
        fwd=np.stack(outs_f),
        bwd=np.stack(outs_b),
        lengths=batch.lengths,
    )
    cache = None
    if train:
        cache = {
            "batch": batch,
            "x": x,
            "fwd": cache_f,
            "bwd": cache_b,
            "outs_f": outs_f,
            "outs_b": outs_b,
            "loss_f": loss_cache_f,
            "loss_b": loss_cache_b,
            "n_events": n_events,
        }
    return ForwardResult(
        loss=loss,
        loss_fwd=sum_f / n_dir,
        loss_bwd=sum_b / n_dir,
        n_events=n_events,
        states=states,
        cache=cache,
    )


def _direction_backward(tag, dtop, dir_cache, layers, config, grads):
    lo, hi = config.clip_lo, config.clip_hi
    dcur = dtop
    for i in range(len(layers) - 1, -1, -1):
        if config.residual and i > 0:
            s = dir_cache["res_pre"][i]
            dsum = dcur * ((s > lo) & (s < hi))
            dcell = dsum
            dres = dsum
        else:
            dcell = dcur
            dres = None
        dinp, lgrads = lstm_layer_backward(dcell, dir_cache["caches"][i], layers[i], lo, hi)
        for k, v in lgrads.items():
            grads[f"{tag}{i}.{k}"] += v
        if dres is not None:
            dinp = dinp + dres
        dm = dir_cache["drop_masks"][i]
        if dm is not None:
            dinp = dinp * dm
        dcur = dinp
    return dcur


def bilm_backward(result, params, config):
    """Gradients of the mean loss for every parameter block; requires a
    train-mode forward result."""
    cache = result.cache
    if cache is None:
        raise RuntimeError("backward requires a train-mode forward pass with cache")
    batch = cache["batch"]
    T, B = batch.ents.shape
    n_events = cache["n_events"]
    grads = {name: np.zeros_like(arr) for name, arr in params.flat().items()}
    dx = np.zeros_like(cache["x"])

    for tag, reverse in (("fwd", False), ("bwd", True)):
        lc = cache["loss_f" if tag == "fwd" else "loss_b"]
        M = lc["probs_e"].shape[0]
        rows = np.arange(M)
        scale = (lc["ev"] / n_events)[:, None].astype(lc["probs_e"].dtype)
        dlog_e = lc["probs_e"].copy()
        dlog_e[rows, lc["tgt_e"]] -= 1.0
        dlog_e *= scale
        dlog_r = lc["probs_r"].copy()
        dlog_r[rows, lc["tgt_r"]] -= 1.0
        dlog_r *= scale

        S = lc["states_flat"]
        grads["sm_ent_W"] += S.T @ dlog_e
        grads["sm_ent_b"] += dlog_e.sum(axis=0)
        grads["sm_rel_W"] += S.T @ dlog_r
        grads["sm_rel_b"] += dlog_r.sum(axis=0)

        dS = dlog_e @ params.sm_ent_W.T + dlog_r @ params.sm_rel_W.T
        P = dS.shape[1]
        dtop = np.zeros((T, B, P), dtype=dS.dtype)
        if reverse:
            dtop[1:] = dS.reshape(T - 1, B, P)
        else:
            dtop[:-1] = dS.reshape(T - 1, B, P)

        layers = params.fwd if tag == "fwd" else params.bwd
        dx += _direction_backward(tag, dtop, cache[tag], layers, config, grads)

    dx *= batch.mask[:, :, None]
    d_e = params.ent_emb.shape[1]
    np.add.at(grads["ent_emb"], batch.ents, dx[:, :, :d_e])
    np.add.at(grads["rel_emb"], batch.rels, dx[:, :, d_e:])
    return grads
