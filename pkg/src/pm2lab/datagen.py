"""Synthetic paired-domain benchmark generator.

Each sample owns a binary latent label vector z (independent Bernoulli per
label). Features are a linear render of z plus a group displacement, a
domain offset and Gaussian noise:

    x = W_d z + group_shift_scale * (2g - 1) * u + offset_d + noise

The real source domain is the reference render (W_source = W_base, zero
offset). Every other domain renders through a perturbed map

    W_d = W_base + domain_shift_scale * dW_d,
    offset_d = domain_shift_scale * delta_d,

so at domain_shift_scale = 0 all render maps coincide with the source.
Each real source sample is re-rendered through both synthetic domains
with the same z, giving one paired triple per sample: the real sample,
a group-0 synthetic counterpart and a group-1 synthetic counterpart.
The synthetic domains are therefore perfectly group balanced, while real
source groups are drawn with a configurable imbalance. The target domain
draws fresh latents with the same base rates, renders through its own
perturbed map and uses a balanced group mix. Target labels are kept on
the samples for evaluation but are never read by training code.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

DOMAINS = ("source_real", "syn_group0", "syn_group1", "target")
DATASET_MAGIC = "pm2-dataset v1"

# Render divergence model, all scaled by domain_shift_scale. Render nuisance
# lives in a small shared pool of perturbation matrices and offsets: every
# synthetic sample draws its own unit-norm mix over the pool (renders vary
# frame to frame), while the target render uses one fixed mix plus a residual
# perturbation of its own. Invariance to the pool, learnable from the
# synthetic spread, therefore transfers to the target's main shift, and the
# residual is left for target-side adaptation. The group displacement
# direction is kept orthogonal to the label map and the pool, so removing it
# costs no label information.
RENDER_POOL_SIZE = 2
RENDER_DELTA_STD = 0.7       # scale of the pooled map perturbations
DOMAIN_OFFSET_STD = 0.5      # scale of the pooled offsets
TARGET_RESIDUAL_STD = 0.1    # target-only map perturbation outside the pool
TARGET_OFFSET_RESIDUAL = 0.75  # length of the target-only offset residual
GROUP_DIR_NORM = 3.0         # length of the group displacement direction
GROUP_LABEL_MIX = 0.6        # fraction of the group direction lying in the
                             # label-evidence span (the confound that makes
                             # group-sensitive models biased)


@dataclass(frozen=True)
class GenConfig:
    n_aus: int = 5
    feature_dim: int = 20
    n_source: int = 2000
    n_target: int = 2000
    base_rates: tuple = ()  # empty tuple: drawn uniformly from [0.1, 0.5]
    source_group_imbalance: float = 0.25
    domain_shift_scale: float = 1.0
    group_shift_scale: float = 1.0
    noise_std: float = 0.4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "base_rates", tuple(float(r) for r in self.base_rates))
        if self.n_aus < 1 or self.feature_dim < 1:
            raise ValueError("GenConfig: n_aus and feature_dim must be >= 1")
        if self.n_source < 1 or self.n_target < 1:
            raise ValueError("GenConfig: n_source and n_target must be >= 1")
        if self.base_rates and len(self.base_rates) != self.n_aus:
            raise ValueError(
                f"GenConfig: base_rates has {len(self.base_rates)} entries, "
                f"expected n_aus={self.n_aus}"
            )
        for r in self.base_rates:
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"GenConfig: base_rates entry {r} outside [0, 1]")
        if not 0.0 <= self.source_group_imbalance <= 1.0:
            raise ValueError("GenConfig: source_group_imbalance outside [0, 1]")
        if self.domain_shift_scale < 0 or self.group_shift_scale < 0 or self.noise_std < 0:
            raise ValueError("GenConfig: scales must be >= 0")


@dataclass
class Sample:
    id: int
    domain: str
    pair_id: int | None
    group: int
    labels: np.ndarray | None  # per-label 0/1 vector; None when unlabeled
    features: np.ndarray


@dataclass
class PairedTriple:
    """One real source sample plus its two same-expression synthetic renders."""

    real: Sample
    syn_f: Sample  # group 0
    syn_m: Sample  # group 1


def effective_base_rates(config: GenConfig) -> np.ndarray:
    """The per-label occurrence rates actually used for a config."""
    if config.base_rates:
        return np.asarray(config.base_rates, dtype=np.float64)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    return rng.uniform(0.1, 0.5, size=config.n_aus)


class _RenderWorld:
    """Base label map, shared nuisance pool and per-domain render recipe."""

    def __init__(self, config: GenConfig, rng: np.random.Generator):
        d, n = config.feature_dim, config.n_aus
        self.scale = config.domain_shift_scale
        self.w_base = rng.normal(0.0, 1.0, size=(d, n))
        self.pool_w = rng.normal(0.0, RENDER_DELTA_STD, size=(RENDER_POOL_SIZE, d, n))
        self.pool_off = rng.normal(0.0, DOMAIN_OFFSET_STD, size=(RENDER_POOL_SIZE, d))
        raw_u = rng.normal(size=d)
        spans = np.hstack([self.w_base] + list(self.pool_w))
        raw_u = raw_u - spans @ np.linalg.lstsq(spans, raw_u, rcond=None)[0]
        norm = np.linalg.norm(raw_u)
        clean = raw_u / norm if norm > 0 else raw_u
        label_dir = self.w_base @ rng.normal(size=n)
        label_dir = label_dir / np.linalg.norm(label_dir)
        mixed = (1.0 - GROUP_LABEL_MIX) * clean + GROUP_LABEL_MIX * label_dir
        self.u_group = GROUP_DIR_NORM * mixed / np.linalg.norm(mixed)
        # the target render: one fixed pool mix plus its own residual
        tmix = rng.normal(size=RENDER_POOL_SIZE)
        tmix = tmix / np.linalg.norm(tmix)
        self.target_dw = (np.tensordot(tmix, self.pool_w, axes=1)
                          + rng.normal(0.0, TARGET_RESIDUAL_STD, size=(d, n)))
        direction = rng.normal(size=d)
        self.target_off = (tmix @ self.pool_off
                           + TARGET_OFFSET_RESIDUAL * direction / np.linalg.norm(direction))

    def group_term(self, config, groups):
        signed = config.group_shift_scale * (2.0 * groups[:, None] - 1.0)
        return signed * self.u_group[None, :]

    def real_features(self, config, z, groups, rng):
        noise = rng.normal(0.0, config.noise_std, size=(z.shape[0], config.feature_dim))
        return z @ self.w_base.T + self.group_term(config, groups) + noise

    def syn_features(self, config, z, groups, rng):
        """Each synthetic sample draws its own unit-norm mix over the pool."""
        b = z.shape[0]
        mix = rng.normal(size=(b, RENDER_POOL_SIZE))
        mix = mix / np.linalg.norm(mix, axis=1, keepdims=True)
        zw = np.stack([z @ m.T for m in self.pool_w], axis=1)  # (b, pool, d)
        render = np.einsum("bj,bjd->bd", mix, zw) + mix @ self.pool_off
        noise = rng.normal(0.0, config.noise_std, size=(b, config.feature_dim))
        return (z @ self.w_base.T + self.scale * render
                + self.group_term(config, groups) + noise)

    def target_features(self, config, z, groups, rng):
        noise = rng.normal(0.0, config.noise_std, size=(z.shape[0], config.feature_dim))
        return (z @ (self.w_base + self.scale * self.target_dw).T
                + self.scale * self.target_off[None, :]
                + self.group_term(config, groups) + noise)


def generate(config: GenConfig):
    """Build the benchmark: (list of PairedTriple, list of target Sample)."""
    rates = effective_base_rates(config)
    if np.all((rates == 0.0) | (rates == 1.0)):
        raise ValueError(
            "generate: degenerate config, every base rate is 0 or 1 "
            "(no learnable signal)"
        )
    ss = np.random.SeedSequence([config.seed, 1])
    rng_maps, rng_src, rng_tgt = (np.random.default_rng(s) for s in ss.spawn(3))
    world = _RenderWorld(config, rng_maps)

    ns = config.n_source
    z_src = (rng_src.random((ns, config.n_aus)) < rates[None, :]).astype(np.int64)
    g_real = (rng_src.random(ns) < config.source_group_imbalance).astype(np.int64)
    g_zero = np.zeros(ns, dtype=np.int64)
    g_one = np.ones(ns, dtype=np.int64)
    x_real = world.real_features(config, z_src, g_real, rng_src)
    x_f = world.syn_features(config, z_src, g_zero, rng_src)
    x_m = world.syn_features(config, z_src, g_one, rng_src)

    triples = []
    for i in range(ns):
        labels = z_src[i]
        triples.append(
            PairedTriple(
                real=Sample(i, "source_real", i, int(g_real[i]), labels.copy(), x_real[i]),
                syn_f=Sample(ns + i, "syn_group0", i, 0, labels.copy(), x_f[i]),
                syn_m=Sample(2 * ns + i, "syn_group1", i, 1, labels.copy(), x_m[i]),
            )
        )

    nt = config.n_target
    z_tgt = (rng_tgt.random((nt, config.n_aus)) < rates[None, :]).astype(np.int64)
    g_tgt = (rng_tgt.random(nt) < 0.5).astype(np.int64)  # balanced evaluation mix
    x_tgt = world.target_features(config, z_tgt, g_tgt, rng_tgt)
    targets = [
        Sample(3 * ns + j, "target", None, int(g_tgt[j]), z_tgt[j], x_tgt[j])
        for j in range(nt)
    ]
    return triples, targets


def flatten_triples(triples) -> list:
    samples = []
    for t in triples:
        samples.extend((t.real, t.syn_f, t.syn_m))
    return samples


def triples_from_samples(samples) -> list:
    """Reassemble paired triples from a flat sample list (inverse of flatten)."""
    by_pair = {}
    for s in samples:
        if s.pair_id is None:
            raise ValueError(f"sample {s.id}: missing pair id, not part of a triple")
        by_pair.setdefault(s.pair_id, {})[s.domain] = s
    triples = []
    for pair_id in sorted(by_pair):
        members = by_pair[pair_id]
        missing = {"source_real", "syn_group0", "syn_group1"} - set(members)
        if missing:
            raise ValueError(f"pair {pair_id}: missing domains {sorted(missing)}")
        triples.append(
            PairedTriple(members["source_real"], members["syn_group0"], members["syn_group1"])
        )
    return triples


# -- dataset files -------------------------------------------------------------
#
# Header: "pm2-dataset v1 n_aus=<n> feature_dim=<d>", then one row per sample:
#   id,domain,pair_id,group,label_1..label_n,feat_1..feat_d
# pair_id is -1 when absent; unlabeled samples carry -1 in every label column.


def save_dataset(samples, path) -> None:
    samples = list(samples)
    if not samples:
        raise ValueError("save_dataset: nothing to save")
    n = len(samples[0].labels) if samples[0].labels is not None else None
    d = len(samples[0].features)
    if n is None:
        for s in samples:
            if s.labels is not None:
                n = len(s.labels)
                break
        if n is None:
            raise ValueError("save_dataset: cannot infer label count, all unlabeled")
    lines = [f"{DATASET_MAGIC} n_aus={n} feature_dim={d}"]
    for s in samples:
        if s.domain not in DOMAINS:
            raise ValueError(f"sample {s.id}: unknown domain {s.domain!r}")
        labels = [-1] * n if s.labels is None else [int(v) for v in s.labels]
        if len(labels) != n or len(s.features) != d:
            raise ValueError(f"sample {s.id}: inconsistent label/feature width")
        row = [
            str(s.id),
            s.domain,
            str(-1 if s.pair_id is None else s.pair_id),
            str(int(s.group)),
            *[str(v) for v in labels],
            *[f"{v:.17g}" for v in s.features],
        ]
        lines.append(",".join(row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_dataset(path) -> list:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith(DATASET_MAGIC):
        raise ValueError(f"{path}: missing {DATASET_MAGIC!r} header")
    meta = dict(kv.split("=", 1) for kv in lines[0][len(DATASET_MAGIC):].split())
    try:
        n, d = int(meta["n_aus"]), int(meta["feature_dim"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed header: {exc}") from None
    width = 4 + n + d
    samples = []
    for row_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != width:
            raise ValueError(
                f"{path}: row {row_no}: expected {width} fields, got {len(parts)}"
            )
        try:
            sid = int(parts[0])
            domain = parts[1]
            pair_id = int(parts[2])
            group = int(parts[3])
            labels = np.array([int(v) for v in parts[4 : 4 + n]], dtype=np.int64)
            features = np.array([float(v) for v in parts[4 + n :]], dtype=np.float64)
        except ValueError as exc:
            raise ValueError(f"{path}: row {row_no}: {exc}") from None
        if domain not in DOMAINS:
            raise ValueError(f"{path}: row {row_no}: unknown domain {domain!r}")
        if np.all(labels == -1):
            label_vec = None
        elif np.isin(labels, (0, 1)).all():
            label_vec = labels
        else:
            raise ValueError(
                f"{path}: row {row_no}: label columns must be all -1 or all 0/1"
            )
        samples.append(
            Sample(sid, domain, None if pair_id == -1 else pair_id, group,
                   label_vec, features)
        )
    return samples
