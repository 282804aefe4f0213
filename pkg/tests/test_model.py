import numpy as np
import pytest

from pm2lab.autodiff import ShapeError, Tensor
from pm2lab.model import (
    ModelConfig,
    ModelParams,
    classify,
    encode,
    init_params,
    load_checkpoint,
    predict,
    save_checkpoint,
)

from oracles import mlp_forward_loops


def small_config():
    return ModelConfig(feature_dim=4, n_aus=3, hidden_dims=(6,), embed_dim=5,
                       classifier_hidden=(4,))


def test_init_is_deterministic_and_seed_sensitive():
    cfg = small_config()
    a = init_params(cfg, seed=9)
    b = init_params(cfg, seed=9)
    c = init_params(cfg, seed=10)
    for (_, ta), (_, tb) in zip(a.named_parameters(), b.named_parameters()):
        assert np.array_equal(ta.data, tb.data)
    assert any(not np.array_equal(ta.data, tc.data)
               for (_, ta), (_, tc) in zip(a.named_parameters(), c.named_parameters()))


def test_init_weight_bound_and_zero_biases():
    cfg = ModelConfig(feature_dim=20, n_aus=5)
    params = init_params(cfg, seed=3)
    for group in ModelParams.GROUPS:
        dims = cfg.encoder_dims if group == "encoder" else cfg.classifier_dims
        for (w, b), fan_in, fan_out in zip(params.layers(group), dims[:-1], dims[1:]):
            assert np.all(np.abs(w.data) < np.sqrt(6.0 / (fan_in + fan_out)))
            assert np.array_equal(b.data, np.zeros(fan_out))


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(feature_dim=0, n_aus=3)
    with pytest.raises(ValueError):
        ModelConfig(feature_dim=3, n_aus=3, hidden_dims=(0,))


def test_zero_params_give_zero_embedding():
    cfg = small_config()
    params = init_params(cfg, seed=0)
    for w, b in params.encoder:
        w.data = np.zeros_like(w.data)
        b.data = np.zeros_like(b.data)
    out = encode(params, np.random.default_rng(0).normal(size=(4, 4)))
    assert np.array_equal(out.data, np.zeros((4, 5)))


def test_identity_encoder_layer():
    cfg = ModelConfig(feature_dim=4, n_aus=2, hidden_dims=(), embed_dim=4)
    params = init_params(cfg, seed=0)
    params.encoder[0][0].data = np.eye(4)
    params.encoder[0][1].data = np.zeros(4)
    x = np.random.default_rng(1).normal(size=(6, 4))
    assert np.array_equal(encode(params, x).data, x)


def test_encode_matches_loop_oracle():
    cfg = ModelConfig(feature_dim=4, n_aus=2, hidden_dims=(5,), embed_dim=3)
    params = init_params(cfg, seed=21)
    x = np.random.default_rng(2).normal(size=(3, 4))
    got = encode(params, x).data
    layers = [(w.data.tolist(), b.data.tolist()) for w, b in params.encoder]
    for r in range(3):
        want = mlp_forward_loops(x[r].tolist(), layers)
        assert np.max(np.abs(got[r] - np.array(want))) < 1e-12


def test_classify_matches_loop_oracle_and_range():
    cfg = small_config()
    params = init_params(cfg, seed=5)
    e = np.random.default_rng(3).normal(size=(4, 5)) * 3.0
    got = classify(params, e, 2).data
    assert np.all((got > 0.0) & (got < 1.0))
    layers = [(w.data.tolist(), b.data.tolist()) for w, b in params.classifier2]
    for r in range(4):
        want = mlp_forward_loops(e[r].tolist(), layers, final_sigmoid=True)
        assert np.max(np.abs(got[r] - np.array(want))) < 1e-12


def test_zero_weight_head_outputs_half():
    cfg = small_config()
    params = init_params(cfg, seed=0)
    for w, b in params.classifier1:
        w.data = np.zeros_like(w.data)
        b.data = np.zeros_like(b.data)
    out = classify(params, np.random.default_rng(0).normal(size=(3, 5)), 1)
    assert np.array_equal(out.data, np.full((3, 3), 0.5))


def test_classify_rejects_bad_head_and_width():
    params = init_params(small_config(), seed=0)
    with pytest.raises(ValueError, match="head"):
        classify(params, np.zeros((2, 5)), 3)
    with pytest.raises(ShapeError):
        classify(params, np.zeros((2, 7)), 1)
    with pytest.raises(ShapeError):
        encode(params, np.zeros((2, 9)))


def test_predict_is_exact_head_average():
    cfg = small_config()
    params = init_params(cfg, seed=12)
    x = np.random.default_rng(4).normal(size=(8, 4))
    probs, labels = predict(params, x)
    e = encode(params, x)
    p1 = classify(params, e, 1).data
    p2 = classify(params, e, 2).data
    assert np.max(np.abs(probs - (p1 + p2) / 2.0)) < 1e-12
    assert np.array_equal(labels, (probs > 0.5).astype(np.int64))


def test_predict_matches_given_head_outputs():
    # heads hand-wired to constant outputs via huge biases on a zero-weight net
    cfg = ModelConfig(feature_dim=2, n_aus=2, hidden_dims=(), embed_dim=2,
                      classifier_hidden=())
    params = init_params(cfg, seed=0)
    for layers in (params.encoder, params.classifier1, params.classifier2):
        for w, b in layers:
            w.data = np.zeros_like(w.data)
            b.data = np.zeros_like(b.data)
    # sigmoid(logit) targets: head1 -> (0.6, 0.4), head2 -> (0.8, 0.2)
    params.classifier1[0][1].data = np.log([0.6 / 0.4, 0.4 / 0.6])
    params.classifier2[0][1].data = np.log([0.8 / 0.2, 0.2 / 0.8])
    probs, labels = predict(params, np.zeros((1, 2)))
    assert np.max(np.abs(probs - [[0.7, 0.3]])) < 1e-12
    assert np.array_equal(labels, [[1, 0]])


def test_prob_exactly_half_is_inactive():
    cfg = ModelConfig(feature_dim=2, n_aus=2, hidden_dims=(), embed_dim=2,
                      classifier_hidden=())
    params = init_params(cfg, seed=0)
    for layers in (params.encoder, params.classifier1, params.classifier2):
        for w, b in layers:
            w.data = np.zeros_like(w.data)
            b.data = np.zeros_like(b.data)
    probs, labels = predict(params, np.zeros((2, 2)))
    assert np.array_equal(probs, np.full((2, 2), 0.5))
    assert np.array_equal(labels, np.zeros((2, 2), dtype=np.int64))


def test_equal_heads_average_to_either():
    cfg = small_config()
    params = init_params(cfg, seed=7)
    for (w1, b1), (w2, b2) in zip(params.classifier1, params.classifier2):
        w2.data = w1.data.copy()
        b2.data = b1.data.copy()
    x = np.random.default_rng(5).normal(size=(5, 4))
    probs, _ = predict(params, x)
    head1 = classify(params, encode(params, x), 1).data
    assert np.max(np.abs(probs - head1)) < 1e-15


def test_forward_is_pure():
    params = init_params(small_config(), seed=2)
    x = np.random.default_rng(6).normal(size=(3, 4))
    assert np.array_equal(encode(params, x).data, encode(params, x).data)


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    cfg = ModelConfig(feature_dim=7, n_aus=4, hidden_dims=(9, 6), embed_dim=5,
                      classifier_hidden=(8,))
    params = init_params(cfg, seed=99)
    path = tmp_path / "ck.txt"
    save_checkpoint(params, path)
    loaded = load_checkpoint(path)
    assert loaded.config == cfg
    for (na, ta), (nb, tb) in zip(params.named_parameters(), loaded.named_parameters()):
        assert na == nb
        assert np.array_equal(ta.data, tb.data)
    save_checkpoint(loaded, tmp_path / "ck2.txt")
    assert (tmp_path / "ck.txt").read_bytes() == (tmp_path / "ck2.txt").read_bytes()


def test_checkpoint_rejects_corrupt_files(tmp_path):
    params = init_params(small_config(), seed=1)
    path = tmp_path / "ck.txt"
    save_checkpoint(params, path)
    lines = path.read_text().splitlines()
    (tmp_path / "trunc.txt").write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "trunc.txt")
    (tmp_path / "bad.txt").write_text("not a checkpoint\n")
    with pytest.raises(ValueError, match="pm2-checkpoint"):
        load_checkpoint(tmp_path / "bad.txt")
