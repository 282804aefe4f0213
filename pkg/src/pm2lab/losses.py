"""Loss terms for supervised label detection, classifier disagreement and
moment-based domain alignment, plus the three composite step objectives.

All reductions over a mini-batch use the mean so loss magnitudes stay
invariant to batch size and the alpha/beta weights keep their meaning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ShapeError, Tensor

BCE_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    """alpha weighs the discrepancy term, beta the paired-alignment term,
    moment_order is the number of elementwise moments matched."""

    alpha: float = 0.3
    beta: float = 0.5
    moment_order: int = 2

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError(f"LossWeights: alpha/beta must be >= 0, got {self}")
        if not isinstance(self.moment_order, (int, np.integer)) or self.moment_order < 1:
            raise ValueError(f"LossWeights: moment_order must be an integer >= 1")


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def au_loss(preds, labels) -> Tensor:
    """Sum over labels of the batch-mean binary cross entropy.

    Predictions are clamped to [BCE_EPS, 1 - BCE_EPS] before the logs.
    """
    p = _as_tensor(preds)
    y = np.asarray(labels, dtype=np.float64)
    if p.data.shape != y.shape:
        raise ShapeError(f"au_loss: incompatible shapes {p.data.shape} and {y.shape}")
    if np.isnan(p.data).any() or np.isnan(y).any():
        raise ValueError("au_loss: NaN in predictions or labels")
    b = p.data.shape[0]
    pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS)
    ones = Tensor(np.ones_like(y))
    ll = Tensor(y).mul(pc.log()).add(Tensor(1.0 - y).mul(ones.sub(pc).log()))
    return ll.sum().scale(-1.0 / b)


def discrepancy_loss(p1, p2) -> Tensor:
    """Batch mean of the summed absolute difference between the two heads."""
    a, b = _as_tensor(p1), _as_tensor(p2)
    if a.data.shape != b.data.shape:
        raise ShapeError(
            f"discrepancy_loss: incompatible shapes {a.data.shape} and {b.data.shape}"
        )
    n = a.data.shape[0]
    return a.sub(b).abs().sum().scale(1.0 / n)


def pair_moment_distance(e1, e2, moment_order: int) -> Tensor:
    """Summed L2 distances between elementwise moments of two embeddings.

    Accepts a single pair of vectors or two (b, d) batches; batches return
    the mean distance over samples. Powers are taken per sample, there is
    no expectation inside the norm.
    """
    a, b = _as_tensor(e1), _as_tensor(e2)
    if a.data.shape != b.data.shape:
        raise ShapeError(
            f"pair_moment_distance: incompatible shapes {a.data.shape} and {b.data.shape}"
        )
    if a.data.ndim not in (1, 2):
        raise ShapeError(f"pair_moment_distance: expected 1-d or 2-d, got {a.data.shape}")
    acc = None
    for k in range(1, int(moment_order) + 1):
        term = a.powi(k).sub(b.powi(k)).l2norm()
        acc = term if acc is None else acc.add(term)
    if a.data.ndim == 2:
        acc = acc.mean()
    return acc


def pm2_loss(e_real, e_f, e_m, moment_order: int) -> Tensor:
    """Mean over paired triples of the three pairwise moment distances / 3."""
    a, f, m = _as_tensor(e_real), _as_tensor(e_f), _as_tensor(e_m)
    if a.data.ndim != 2:
        raise ShapeError(f"pm2_loss: expected (b, d) batches, got {a.data.shape}")
    if a.data.shape[0] == 0:
        raise ValueError("pm2_loss: empty batch")
    d1 = pair_moment_distance(a, f, moment_order)
    d2 = pair_moment_distance(a, m, moment_order)
    d3 = pair_moment_distance(f, m, moment_order)
    return d1.add(d2).add(d3).scale(1.0 / 3.0)


def overall_moment_distance(batch_a, batch_b, moment_order: int) -> Tensor:
    """Distance between per-batch mean elementwise moments (the overall
    distribution-matching baseline); the two batches may differ in size."""
    a, b = _as_tensor(batch_a), _as_tensor(batch_b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[1]:
        raise ShapeError(
            f"overall_moment_distance: incompatible shapes {a.data.shape} and {b.data.shape}"
        )
    if a.data.shape[0] == 0 or b.data.shape[0] == 0:
        raise ValueError("overall_moment_distance: empty batch")
    acc = None
    for k in range(1, int(moment_order) + 1):
        term = a.powi(k).mean(axis=0).sub(b.powi(k).mean(axis=0)).l2norm()
        acc = term if acc is None else acc.add(term)
    return acc


def step_losses(weights: LossWeights, au1, au2, dis, pm2):
    """Compose the three alternating-step objectives from their parts.

    L1 = (au1 + au2)/2 + beta * pm2
    L2 = (au1 + au2)/2 + beta * pm2 - alpha * dis
    L3 = alpha * dis

    Works on plain numbers and on Tensors; with Tensors the results stay
    differentiable. The pm2 slot carries whichever alignment term the
    caller uses (paired or overall).
    """
    parts = (au1, au2, dis, pm2)
    for name, part in zip(("au1", "au2", "dis", "pm2"), parts):
        value = part.data if isinstance(part, Tensor) else part
        if not np.all(np.isfinite(value)):
            raise ValueError(f"step_losses: non-finite part {name}")
    base = (au1 + au2) * 0.5 + weights.beta * pm2
    l2 = base - weights.alpha * dis
    l3 = weights.alpha * dis
    return base, l2, l3
