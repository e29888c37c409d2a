import numpy as np
import pytest

from kglm.bilm import (
    bilm_backward,
    bilm_forward,
    detokenize_pairs,
    log_softmax,
    pack_batch,
    tokenize_chain,
)
from kglm.gradcheck import run_gradcheck
from kglm.model import ModelConfig, init_params
from kglm.walker import Chain


def small_config(**overrides):
    base = dict(
        num_layers=2,
        hidden_units=8,
        proj_dim=4,
        entity_dim=5,
        relation_dim=3,
        dropout=0.0,
        residual=True,
        batch_size=8,
        precision="f64",
        seed=0,
    )
    base.update(overrides)
    return ModelConfig(**base)


def random_batch(rng, n_ent, n_rel, n_seqs=5, max_len=6, dtype=np.float64):
    pairs = []
    for _ in range(n_seqs):
        n = int(rng.integers(2, max_len + 1))
        pairs.append((rng.integers(n_ent, size=n), rng.integers(n_rel, size=n)))
    batch, _ = pack_batch(pairs, dtype=dtype)
    return batch


class TestTokenize:
    def test_simple_chain(self):
        chain = Chain(entities=np.array([3, 7]), relations=np.array([1]))
        ents, rels = tokenize_chain(chain, eos_rel_id=9)
        assert list(ents) == [3, 7]
        assert list(rels) == [1, 9]

    def test_21_token_chain_gives_11_pairs(self):
        chain = Chain(entities=np.arange(11), relations=np.arange(10))
        ents, rels = tokenize_chain(chain, eos_rel_id=99)
        assert len(ents) == 11
        # 10 forward prediction targets (positions 2..11)
        assert len(ents) - 1 == 10

    def test_round_trip(self):
        chain = Chain(entities=np.array([2, 4, 6]), relations=np.array([1, 3]))
        ents, rels = tokenize_chain(chain, eos_rel_id=5)
        back = detokenize_pairs(ents, rels, eos_rel_id=5)
        assert np.array_equal(back.entities, chain.entities)
        assert np.array_equal(back.relations, chain.relations)

    def test_single_entity_chain_untrainable(self):
        chain = Chain(entities=np.array([4]), relations=np.array([], dtype=np.int64))
        ents, rels = tokenize_chain(chain, eos_rel_id=2)
        assert len(ents) == 1 and rels[0] == 2
        batch, skipped = pack_batch([(ents, rels)])
        assert batch is None and skipped == 1


class TestForward:
    def test_uniform_logits_loss(self):
        # zeroed softmax heads force uniform distributions:
        # per-position per-direction loss is ln|E| + ln|R|
        config = small_config()
        params = init_params(config, 3, 2)
        params.sm_ent_W[:] = 0.0
        params.sm_ent_b[:] = 0.0
        params.sm_rel_W[:] = 0.0
        params.sm_rel_b[:] = 0.0
        batch = random_batch(np.random.default_rng(0), 3, 2)
        result = bilm_forward(batch, params, config, mode="eval")
        expected = np.log(3.0) + np.log(2.0)
        assert result.loss == pytest.approx(expected, abs=1e-9)
        assert result.loss_fwd == pytest.approx(expected, abs=1e-9)
        assert result.loss_bwd == pytest.approx(expected, abs=1e-9)

    def test_residual_zero_layer_is_identity(self):
        config = small_config()
        params = init_params(config, 6, 4)
        for layer in (params.fwd[1], params.bwd[1]):
            layer.Wx[:] = 0.0
            layer.Wh[:] = 0.0
            layer.b[:] = 0.0
            layer.Wp[:] = 0.0
        batch = random_batch(np.random.default_rng(1), 6, 4)
        result = bilm_forward(batch, params, config, mode="eval")
        assert np.array_equal(result.states.fwd[1], result.states.fwd[0])
        assert np.array_equal(result.states.bwd[1], result.states.bwd[0])

    def test_states_respect_clip_range(self):
        config = small_config(clip_lo=-3.0, clip_hi=3.0)
        params = init_params(config, 6, 4)
        for layers in (params.fwd, params.bwd):
            for layer in layers:
                layer.Wp *= 100.0  # push projections far past the range
        batch = random_batch(np.random.default_rng(2), 6, 4)
        result = bilm_forward(batch, params, config, mode="eval")
        for arr in (result.states.fwd, result.states.bwd):
            assert arr.min() >= -3.0 and arr.max() <= 3.0

    def test_softmax_normalization(self):
        logits = np.random.default_rng(3).normal(size=(40, 17)) * 8
        probs = np.exp(log_softmax(logits))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)

    def test_eval_mode_has_no_cache(self):
        config = small_config()
        params = init_params(config, 4, 3)
        batch = random_batch(np.random.default_rng(4), 4, 3)
        result = bilm_forward(batch, params, config, mode="eval")
        assert result.cache is None
        with pytest.raises(RuntimeError, match="train-mode"):
            bilm_backward(result, params, config)

    def test_train_with_dropout_requires_rng(self):
        config = small_config(dropout=0.5)
        params = init_params(config, 4, 3)
        batch = random_batch(np.random.default_rng(5), 4, 3)
        with pytest.raises(ValueError, match="rng"):
            bilm_forward(batch, params, config, mode="train")


class TestSharing:
    def test_embedding_perturbation_moves_both_directions(self):
        config = small_config()
        params = init_params(config, 5, 4)
        rng = np.random.default_rng(6)
        batch = random_batch(rng, 5, 4)
        base = bilm_forward(batch, params, config, mode="eval")
        eid = int(batch.ents[0, 0])
        params.ent_emb[eid, 0] += 0.25
        moved = bilm_forward(batch, params, config, mode="eval")
        assert moved.loss_fwd != base.loss_fwd
        assert moved.loss_bwd != base.loss_bwd

    def test_softmax_head_shared_across_directions(self):
        config = small_config()
        params = init_params(config, 5, 4)
        batch = random_batch(np.random.default_rng(7), 5, 4)
        base = bilm_forward(batch, params, config, mode="eval")
        params.sm_ent_b[0] += 1.0
        moved = bilm_forward(batch, params, config, mode="eval")
        assert moved.loss_fwd != base.loss_fwd
        assert moved.loss_bwd != base.loss_bwd

    def test_shared_blocks_accumulate_from_both_directions(self):
        config = small_config()
        params = init_params(config, 5, 4)
        batch = random_batch(np.random.default_rng(8), 5, 4)
        result = bilm_forward(batch, params, config, mode="train")
        grads = bilm_backward(result, params, config)
        # embeddings of used tokens must receive gradient
        used = np.unique(batch.ents[batch.mask > 0])
        assert np.abs(grads["ent_emb"][used]).sum() > 0
        assert np.abs(grads["sm_ent_W"]).sum() > 0


class TestGradients:
    def test_saturated_projection_blocks_gradient(self):
        config = small_config(num_layers=1, residual=False)
        params = init_params(config, 4, 3)
        layer = params.fwd[0]
        layer.b[:] = 20.0  # saturate gates; cell and hc strictly positive
        layer.Wp[:] = np.abs(layer.Wp) * 1000.0 + 1.0  # projection far beyond the clip
        batch = random_batch(np.random.default_rng(9), 4, 3)
        result = bilm_forward(batch, params, config, mode="train")
        grads = bilm_backward(result, params, config)
        assert np.array_equal(grads["fwd0.Wp"], np.zeros_like(layer.Wp))
        assert np.array_equal(grads["fwd0.Wx"], np.zeros_like(layer.Wx))
        assert np.array_equal(grads["fwd0.Wh"], np.zeros_like(layer.Wh))
        assert np.array_equal(grads["fwd0.b"], np.zeros_like(layer.b))

    def test_full_model_finite_differences(self):
        worst, per_block = run_gradcheck(seed=11, n_coords=44)
        assert worst < 1e-4, per_block
