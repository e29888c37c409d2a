"""Finite-difference verification of the analytic gradients.

Runs a small f64 model on random sequences and compares the analytic
gradient of the mean loss against central differences for sampled
coordinates of every parameter block. The forward pass is re-seeded
identically on every evaluation so dropout masks are fixed and the loss
is a deterministic function of the parameters.
"""

import numpy as np

from .bilm import bilm_backward, bilm_forward, pack_batch
from .model import ModelConfig, init_params


def _random_batch(rng, n_entities, n_relations, n_seqs=6, max_len=7):
    pairs = []
    for _ in range(n_seqs):
        n = int(rng.integers(2, max_len + 1))
        ents = rng.integers(n_entities, size=n).astype(np.int64)
        rels = rng.integers(n_relations, size=n).astype(np.int64)
        pairs.append((ents, rels))
    batch, _ = pack_batch(pairs, dtype=np.float64)
    return batch


def run_gradcheck(
    seed=7,
    n_coords=120,
    step=1e-5,
    n_entities=20,
    n_relations=6,
    num_layers=2,
    hidden=8,
    proj=4,
    dropout=0.1,
):
    """Returns (max relative error, per-block max dict)."""
    config = ModelConfig(
        num_layers=num_layers,
        hidden_units=hidden,
        proj_dim=proj,
        entity_dim=5,
        relation_dim=3,
        dropout=dropout,
        residual=True,
        batch_size=8,
        precision="f64",
        seed=seed,
    )
    rng = np.random.default_rng(seed)
    params = init_params(config, n_entities, n_relations, rng=rng)
    batch = _random_batch(rng, n_entities, n_relations)

    def loss_fn():
        # fixed dropout stream: the loss is deterministic in the params
        drop_rng = np.random.default_rng(seed + 1)
        return bilm_forward(batch, params, config, mode="train", rng=drop_rng)

    result = loss_fn()
    grads = bilm_backward(result, params, config)

    blocks = params.flat()
    per_coord = max(1, int(np.ceil(n_coords / len(blocks))))
    coord_rng = np.random.default_rng(seed + 2)
    worst = 0.0
    per_block = {}
    for name, arr in blocks.items():
        flat = arr.reshape(-1)
        gflat = grads[name].reshape(-1)
        idx = coord_rng.choice(flat.size, size=min(per_coord, flat.size), replace=False)
        block_worst = 0.0
        for k in idx:
            orig = flat[k]
            flat[k] = orig + step
            up = loss_fn().loss
            flat[k] = orig - step
            down = loss_fn().loss
            flat[k] = orig
            fd = (up - down) / (2.0 * step)
            rel = abs(gflat[k] - fd) / max(abs(gflat[k]), abs(fd), 1e-6)
            block_worst = max(block_worst, rel)
        per_block[name] = block_worst
        worst = max(worst, block_worst)
    return worst, per_block
