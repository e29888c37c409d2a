"""Training loop for the bidirectional language model."""

import logging

from . import seeds
from .bilm import bilm_backward, bilm_forward, pack_batch, tokenize_chain
from .model import init_params, save_checkpoint
from .optim import Adam

logger = logging.getLogger(__name__)


def train_bilm(chains, graph, config, checkpoint_path=None, checkpoint_interval=0):
    """Train on a chain corpus; returns (params, per-epoch mean loss).

    Chains are reshuffled every epoch from a seeded stream and batched;
    chains shorter than two tokens are skipped with a logged count.
    With epochs=0 the freshly initialized parameters come back with an
    empty trace.
    """
    eos = graph.eos_id
    tokens = [tokenize_chain(c, eos) for c in chains]
    usable = [(e, r) for e, r in tokens if len(e) >= 2]
    skipped = len(tokens) - len(usable)
    if skipped:
        logger.warning("skipped %d untrainable chains (fewer than 2 tokens)", skipped)
    if not usable:
        raise ValueError("corpus has no trainable chains")

    params = init_params(config, graph.n_entities, graph.n_relations)

    def _save(path):
        save_checkpoint(path, params, config, graph.entities.items, graph.relations.items)

    trace = []
    if config.epochs == 0:
        if checkpoint_path:
            _save(checkpoint_path)
        return params, trace

    opt = Adam(params.flat(), lr=config.learning_rate)
    n = len(usable)
    bs = config.batch_size
    for epoch in range(1, config.epochs + 1):
        order = seeds.derived_rng(config.seed, seeds.SHUFFLE, epoch).permutation(n)
        total = 0.0
        events = 0
        for bi, start in enumerate(range(0, n, bs)):
            idx = order[start : start + bs]
            batch, _ = pack_batch([usable[i] for i in idx], dtype=config.dtype)
            rng = seeds.derived_rng(config.seed, seeds.DROPOUT, epoch, bi)
            result = bilm_forward(batch, params, config, mode="train", rng=rng)
            grads = bilm_backward(result, params, config)
            opt.step(grads)
            total += result.loss * result.n_events
            events += result.n_events
        trace.append(total / events)
        logger.info("epoch %d/%d  loss %.6f", epoch, config.epochs, trace[-1])
        if checkpoint_path and checkpoint_interval and epoch % checkpoint_interval == 0:
            _save(checkpoint_path)
    if checkpoint_path:
        _save(checkpoint_path)
    return params, trace
