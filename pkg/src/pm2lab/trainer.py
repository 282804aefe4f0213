"""Three-step alternating min-max training plus baseline modes.

Each mini-batch iteration runs up to three updates:

  step 1  update encoder and both heads on supervised loss plus the
          beta-weighted alignment term (paired or overall, by mode);
  step 2  encoder frozen, heads maximize the target discrepancy while
          keeping the supervised and alignment terms;
  step 3  heads frozen, encoder minimizes the target discrepancy.

Modes select which steps run and which alignment term is used:

  direct_transfer  step 1 only, alignment weight forced to 0, target unused
  mcd_only         all steps, alignment weight forced to 0
  pm2_only         step 1 only, paired alignment
  full_pm2         all steps, paired alignment
  overall_mm       all steps, overall moment alignment over pooled synthetic

History is logged once per iteration. The row's parts (au1, au2, dis, pm2)
come from a single parameter snapshot (the step-2 forward pass when steps
2-3 run, the step-1 forward otherwise), so L1, L2 and L3 in a row always
satisfy their defining formulas exactly; the pm2 column carries the overall
moment distance in overall_mm mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import csv
import numpy as np

from .autodiff import Tensor, zero_grad
from .losses import (
    LossWeights,
    au_loss,
    discrepancy_loss,
    overall_moment_distance,
    pm2_loss,
    step_losses,
)
from .model import ModelParams, classify, encode

MODES = ("direct_transfer", "mcd_only", "pm2_only", "full_pm2", "overall_mm")

HISTORY_COLUMNS = ("iter", "step", "L1", "L2", "L3", "au1", "au2", "dis", "pm2")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDiverged(RuntimeError):
    """A loss term became non-finite; carries the iteration and term name."""

    def __init__(self, iteration: int, term: str):
        super().__init__(f"iteration {iteration}: non-finite loss term {term!r}")
        self.iteration = iteration
        self.term = term


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    weights: LossWeights = field(default_factory=LossWeights)
    mode: str = "full_pm2"
    seed: int = 0
    step3_repeats: int = 1
    fresh_target_per_step: bool = False  # draw a new target batch for each step

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("TrainConfig: epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("TrainConfig: learning_rate must be > 0")
        if self.weight_decay < 0:
            raise ValueError("TrainConfig: weight_decay must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"TrainConfig: unknown mode {self.mode!r}")
        if self.step3_repeats < 1:
            raise ValueError("TrainConfig: step3_repeats must be >= 1")


def freeze_mask(step: int) -> frozenset:
    """Parameter groups that a given training step is allowed to update."""
    masks = {
        1: frozenset({"encoder", "classifier1", "classifier2"}),
        2: frozenset({"classifier1", "classifier2"}),
        3: frozenset({"encoder"}),
    }
    if step not in masks:
        raise ValueError(f"freeze_mask: step must be 1, 2 or 3, got {step!r}")
    return masks[step]


def adamw_step(theta, grad, m, v, t, lr, weight_decay):
    """One decoupled-weight-decay adaptive-moment update.

    Returns (new_theta, new_m, new_v, new_t). State enters as zeros with
    t = 0 on the first call for a parameter.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise ValueError("adamw_step: non-finite gradient")
    t = t + 1
    m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
    v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad * grad
    m_hat = m / (1.0 - ADAM_BETA1 ** t)
    v_hat = v / (1.0 - ADAM_BETA2 ** t)
    theta = theta - lr * (m_hat / (np.sqrt(v_hat) + ADAM_EPS) + weight_decay * theta)
    return theta, m, v, t


class AdamW:
    """Per-parameter moment accumulators keyed by parameter name."""

    def __init__(self, lr: float, weight_decay: float):
        self.lr = lr
        self.weight_decay = weight_decay
        self.m = {}
        self.v = {}
        self.t = {}

    def update(self, params: ModelParams, groups: frozenset) -> None:
        """Apply one update to every parameter in the given groups.

        Parameters outside the groups are untouched, including their
        accumulators, so freezing is exact at the bit level.
        """
        for name, tensor in params.named_parameters():
            if name.split(".")[0] not in groups:
                continue
            grad = tensor.grad
            if grad is None:
                grad = np.zeros_like(tensor.data)
            if name not in self.m:
                self.m[name] = np.zeros_like(tensor.data)
                self.v[name] = np.zeros_like(tensor.data)
                self.t[name] = 0
            tensor.data, self.m[name], self.v[name], self.t[name] = adamw_step(
                tensor.data, grad, self.m[name], self.v[name], self.t[name],
                self.lr, self.weight_decay,
            )


def _mode_plan(config: TrainConfig):
    """Effective (alignment kind, beta, run min-max steps) for a mode."""
    w = config.weights
    return {
        "direct_transfer": ("none", 0.0, False),
        "mcd_only": ("none", 0.0, True),
        "pm2_only": ("pm2", w.beta, False),
        "full_pm2": ("pm2", w.beta, True),
        "overall_mm": ("overall", w.beta, True),
    }[config.mode]


def _check_finite(iteration: int, **terms):
    for name, value in terms.items():
        data = value.data if isinstance(value, Tensor) else value
        if not np.all(np.isfinite(data)):
            raise TrainingDiverged(iteration, name)


def _source_parts(params, xb, yb, xf, xm, align, k):
    """Supervised losses and the alignment term on one source triple batch."""
    emb = encode(params, xb)
    p1 = classify(params, emb, 1)
    p2 = classify(params, emb, 2)
    au1 = au_loss(p1, yb)
    au2 = au_loss(p2, yb)
    if align == "pm2":
        ef = encode(params, xf)
        em = encode(params, xm)
        alignment = pm2_loss(emb, ef, em, k)
    elif align == "overall":
        e_syn = encode(params, np.concatenate([xf, xm], axis=0))
        alignment = overall_moment_distance(emb, e_syn, k)
    else:
        alignment = 0.0
    return au1, au2, alignment


def _target_discrepancy(params, xt):
    emb = encode(params, xt)
    return discrepancy_loss(classify(params, emb, 1), classify(params, emb, 2))


def run_step1(params, opt, xb, yb, xf, xm, weights, align, iteration=0):
    """Update all groups on the supervised + alignment objective."""
    zero_grad(params.tensors())
    au1, au2, alignment = _source_parts(params, xb, yb, xf, xm, align, weights.moment_order)
    loss, _, _ = step_losses(weights, au1, au2, 0.0, alignment)
    _check_finite(iteration, au1=au1, au2=au2, pm2=alignment, L1=loss)
    loss.backward()
    opt.update(params, freeze_mask(1))
    return au1, au2, alignment


def run_step2(params, opt, xb, yb, xf, xm, xt, weights, align, iteration=0):
    """Encoder frozen; heads trade supervised fit against target discrepancy."""
    zero_grad(params.tensors())
    au1, au2, alignment = _source_parts(params, xb, yb, xf, xm, align, weights.moment_order)
    dis = _target_discrepancy(params, xt)
    _, loss, _ = step_losses(weights, au1, au2, dis, alignment)
    _check_finite(iteration, au1=au1, au2=au2, dis=dis, pm2=alignment, L2=loss)
    loss.backward()
    opt.update(params, freeze_mask(2))
    return au1, au2, alignment, dis

def run_step3(params, opt, xt, weights, iteration=0):
    """Heads frozen; encoder minimizes the target discrepancy."""
    zero_grad(params.tensors())
    dis = _target_discrepancy(params, xt)
    _, _, loss = step_losses(weights, 0.0, 0.0, dis, 0.0)
    _check_finite(iteration, dis=dis, L3=loss)
    loss.backward()
    opt.update(params, freeze_mask(3))
    return dis


def stack_triples(triples):
    x = np.stack([t.real.features for t in triples])
    y = np.stack([t.real.labels for t in triples])
    xf = np.stack([t.syn_f.features for t in triples])
    xm = np.stack([t.syn_m.features for t in triples])
    return x, y, xf, xm


class _TargetBatches:
    """Deterministic without-replacement target batches, reshuffled per pass."""

    def __init__(self, x_target, rng):
        self.x = x_target
        self.rng = rng
        self.order = []
        self.pos = 0

    def next(self, size):
        size = min(size, len(self.x))
        if self.pos + size > len(self.order):
            self.order = self.rng.permutation(len(self.x))
            self.pos = 0
        idx = self.order[self.pos : self.pos + size]
        self.pos += size
        return self.x[idx]


def train(model: ModelParams, source_triples, target_samples, config: TrainConfig,
          step3_probe: list | None = None):
    """Run the configured mode; returns (model, history rows).

    History is a list of dicts with HISTORY_COLUMNS keys, one per iteration.
    When ``step3_probe`` is a list, each iteration appends the discrepancy
    on the final step-3 batch before and after that update (diagnostics).
    """
    if not source_triples:
        raise ValueError("train: empty source")
    align, beta, minmax = _mode_plan(config)
    if minmax and not target_samples:
        raise ValueError(f"train: mode {config.mode!r} needs target samples")
    eff = LossWeights(alpha=config.weights.alpha, beta=beta,
                      moment_order=config.weights.moment_order)

    x_src, y_src, x_f, x_m = stack_triples(source_triples)
    ss = np.random.SeedSequence([config.seed, 2])
    rng_src, rng_tgt = (np.random.default_rng(s) for s in ss.spawn(2))
    targets = None
    if minmax:
        targets = _TargetBatches(np.stack([s.features for s in target_samples]), rng_tgt)

    opt = AdamW(config.learning_rate, config.weight_decay)
    history = []
    iteration = 0
    n = len(source_triples)
    for _ in range(config.epochs):
        order = rng_src.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb, xfb, xmb = x_src[idx], y_src[idx], x_f[idx], x_m[idx]

            au1, au2, alignment = run_step1(model, opt, xb, yb, xfb, xmb,
                                            eff, align, iteration)
            dis_part = 0.0
            snapshot_step = 1
            if minmax:
                xt = targets.next(len(idx))
                au1, au2, alignment, dis_part = run_step2(
                    model, opt, xb, yb, xfb, xmb, xt, eff, align, iteration)
                snapshot_step = 2
                for r in range(config.step3_repeats):
                    if config.fresh_target_per_step:
                        xt = targets.next(len(idx))
                    dis3 = run_step3(model, opt, xt, eff, iteration)
                    if step3_probe is not None and r == config.step3_repeats - 1:
                        after = float(_target_discrepancy(model, xt).data)
                        step3_probe.append((float(dis3.data), after))

            parts = {
                "au1": float(au1.data),
                "au2": float(au2.data),
                "dis": float(dis_part.data) if isinstance(dis_part, Tensor) else 0.0,
                "pm2": float(alignment.data) if isinstance(alignment, Tensor) else 0.0,
            }
            l1, l2, l3 = step_losses(eff, parts["au1"], parts["au2"],
                                     parts["dis"], parts["pm2"])
            history.append({
                "iter": iteration, "step": snapshot_step,
                "L1": l1, "L2": l2, "L3": l3, **parts,
            })
            iteration += 1
    return model, history


def write_history(history, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(HISTORY_COLUMNS)
        for row in history:
            writer.writerow([row[c] for c in HISTORY_COLUMNS])
