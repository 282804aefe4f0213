import dataclasses

import numpy as np
import pytest

from pm2lab.datagen import (
    GenConfig,
    Sample,
    effective_base_rates,
    flatten_triples,
    generate,
    load_dataset,
    save_dataset,
    triples_from_samples,
)

from probe import probe_macro_f1


def small_config(**kw):
    base = dict(n_aus=3, feature_dim=8, n_source=40, n_target=30, seed=5)
    base.update(kw)
    return GenConfig(**base)


def test_generation_is_deterministic():
    cfg = small_config()
    t1, s1 = generate(cfg)
    t2, s2 = generate(cfg)
    for a, b in zip(flatten_triples(t1) + s1, flatten_triples(t2) + s2):
        assert a.id == b.id and a.domain == b.domain and a.group == b.group
        assert a.pair_id == b.pair_id
        assert np.array_equal(a.features, b.features)
        if a.labels is None:
            assert b.labels is None
        else:
            assert np.array_equal(a.labels, b.labels)


def test_seed_changes_the_data():
    _, s1 = generate(small_config(seed=1))
    _, s2 = generate(small_config(seed=2))
    assert not np.array_equal(s1[0].features, s2[0].features)


def test_triples_share_labels_and_split_groups():
    triples, _ = generate(small_config())
    for t in triples:
        assert np.array_equal(t.real.labels, t.syn_f.labels)
        assert np.array_equal(t.real.labels, t.syn_m.labels)
        assert (t.syn_f.group, t.syn_m.group) == (0, 1)
        assert t.real.pair_id == t.syn_f.pair_id == t.syn_m.pair_id
        assert t.real.domain == "source_real"
        assert t.syn_f.domain == "syn_group0"
        assert t.syn_m.domain == "syn_group1"


def test_synthetic_groups_exactly_balanced():
    triples, _ = generate(small_config(n_source=33))
    syn = [s for t in triples for s in (t.syn_f, t.syn_m)]
    groups = np.array([s.group for s in syn])
    assert np.sum(groups == 0) == np.sum(groups == 1) == 33


def test_source_imbalance_and_target_mix():
    triples, targets = generate(small_config(n_source=4000, n_target=4000,
                                             source_group_imbalance=0.25))
    real_frac = np.mean([t.real.group for t in triples])
    assert abs(real_frac - 0.25) < 0.03
    target_frac = np.mean([s.group for s in targets])
    assert abs(target_frac - 0.5) < 0.03


def test_empirical_rates_match_base_rates():
    cfg = small_config(n_source=5000, n_target=5000)
    rates = effective_base_rates(cfg)
    triples, targets = generate(cfg)
    source_rates = np.mean([t.real.labels for t in triples], axis=0)
    target_rates = np.mean([s.labels for s in targets], axis=0)
    assert np.max(np.abs(source_rates - rates)) < 0.03
    assert np.max(np.abs(target_rates - rates)) < 0.03


def test_degenerate_rates_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        generate(small_config(base_rates=(0.0, 1.0, 0.0)))


def test_config_validation():
    with pytest.raises(ValueError, match="base_rates"):
        GenConfig(n_aus=2, base_rates=(0.5, 1.5))
    with pytest.raises(ValueError):
        GenConfig(n_source=0)
    with pytest.raises(ValueError):
        GenConfig(noise_std=-1.0)
    with pytest.raises(ValueError):
        GenConfig(n_aus=3, base_rates=(0.5, 0.5))  # wrong length


def test_explicit_base_rates_are_used():
    cfg = small_config(base_rates=(0.2, 0.3, 0.4))
    assert np.array_equal(effective_base_rates(cfg), [0.2, 0.3, 0.4])


def test_save_load_round_trip(tmp_path):
    triples, targets = generate(small_config())
    samples = flatten_triples(triples) + targets
    path = tmp_path / "data.dat"
    save_dataset(samples, path)
    loaded = load_dataset(path)
    assert len(loaded) == len(samples)
    for a, b in zip(samples, loaded):
        assert (a.id, a.domain, a.pair_id, a.group) == (b.id, b.domain, b.pair_id, b.group)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)
    save_dataset(loaded, tmp_path / "data2.dat")
    assert (tmp_path / "data.dat").read_bytes() == (tmp_path / "data2.dat").read_bytes()


def test_unlabeled_rows_round_trip(tmp_path):
    sample = Sample(0, "target", None, 1, None,
                    np.array([0.25, -1.5]))
    labeled = Sample(1, "source_real", 0, 0, np.array([1, 0]),
                     np.array([0.5, 2.0]))
    path = tmp_path / "mix.dat"
    save_dataset([labeled, sample], path)
    back = load_dataset(path)
    assert back[1].labels is None
    assert np.array_equal(back[0].labels, [1, 0])


def test_truncated_row_names_the_row(tmp_path):
    triples, _ = generate(small_config())
    path = tmp_path / "data.dat"
    save_dataset(flatten_triples(triples), path)
    lines = path.read_text().splitlines()
    lines[3] = lines[3][: len(lines[3]) // 2]
    bad = tmp_path / "trunc.dat"
    bad.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="row 4"):
        load_dataset(bad)


def test_header_row_width_mismatch_rejected(tmp_path):
    triples, _ = generate(small_config())
    path = tmp_path / "data.dat"
    save_dataset(flatten_triples(triples), path)
    lines = path.read_text().splitlines()
    lines[0] = lines[0].replace("n_aus=3", "n_aus=4")
    bad = tmp_path / "badheader.dat"
    bad.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="expected"):
        load_dataset(bad)


def test_missing_header_rejected(tmp_path):
    bad = tmp_path / "noheader.dat"
    bad.write_text("1,target,-1,0,1,0.5\n")
    with pytest.raises(ValueError, match="header"):
        load_dataset(bad)


def test_triples_reassemble_from_flat_samples():
    triples, _ = generate(small_config())
    rebuilt = triples_from_samples(flatten_triples(triples))
    assert len(rebuilt) == len(triples)
    for a, b in zip(triples, rebuilt):
        assert a.real.id == b.real.id
        assert np.array_equal(a.syn_m.features, b.syn_m.features)


def test_probe_learns_within_domain():
    cfg = GenConfig(seed=0)
    triples, _ = generate(cfg)
    x = np.stack([t.real.features for t in triples])
    y = np.stack([t.real.labels for t in triples])
    cut = int(0.8 * len(x))
    score = probe_macro_f1(x[:cut], y[:cut], x[cut:], y[cut:])
    assert score >= 0.8, f"within-domain probe macro-F1 {score:.3f} below 0.8"


def test_zero_shift_outperforms_default_shift_for_direct_transfer():
    scores = {}
    for shift in (0.0, 1.0):
        cfg = GenConfig(seed=3, domain_shift_scale=shift)
        triples, targets = generate(cfg)
        x = np.stack([t.real.features for t in triples])
        y = np.stack([t.real.labels for t in triples])
        xt = np.stack([s.features for s in targets])
        yt = np.stack([s.labels for s in targets])
        scores[shift] = probe_macro_f1(x, y, xt, yt)
    assert scores[0.0] > scores[1.0], scores
