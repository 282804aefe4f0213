"""Experiment orchestration: key=value run configs, seeded cells, tables.

A run config is a flat text file of ``key=value`` lines (``#`` comments
allowed) covering the generator and trainer fields plus the experiment
fields ``repeats``, ``modes`` and ``output_dir``. One ``seed`` key feeds
both the generator and the trainer; cell seeds are enumerated seed + i
for i in 0..repeats-1 and recorded in every report for provenance.
"""

from __future__ import annotations

import traceback
from dataclasses import dataclass, replace
from pathlib import Path

from .datagen import GenConfig, flatten_triples, generate, save_dataset
from .losses import LossWeights
from .metrics import evaluate, write_report
from .model import ModelConfig, init_params, save_checkpoint
from .trainer import MODES, TrainConfig, TrainingDiverged, train, write_history

# the loss-weight grid of the ablation study
ABLATION_ALPHAS = (0.0, 0.3, 1.0)
ABLATION_BETAS = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class ExperimentSpec:
    gen: GenConfig
    train: TrainConfig
    repeats: int = 1
    output_dir: str = "runs"
    modes: tuple = MODES

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("ExperimentSpec: repeats must be >= 1")
        for m in self.modes:
            if m not in MODES:
                raise ValueError(f"ExperimentSpec: unknown mode {m!r}")


def parse_kv_lines(path) -> dict:
    values = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}: line {line_no}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def _parse_rates(text: str) -> tuple:
    if text in ("", "auto"):
        return ()
    return tuple(float(v) for v in text.split(","))


_GEN_KEYS = {
    "n_aus": int,
    "feature_dim": int,
    "n_source": int,
    "n_target": int,
    "base_rates": _parse_rates,
    "source_group_imbalance": float,
    "domain_shift_scale": float,
    "group_shift_scale": float,
    "noise_std": float,
    "seed": int,
}

_TRAIN_KEYS = {
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "weight_decay": float,
    "mode": str,
    "seed": int,
    "step3_repeats": int,
    "fresh_target_per_step": lambda v: v.lower() in ("1", "true", "yes"),
}

_WEIGHT_KEYS = {"alpha": float, "beta": float, "moment_order": int}

_EXPERIMENT_KEYS = {
    "repeats": int,
    "output_dir": str,
    "modes": lambda v: tuple(m.strip() for m in v.split(",") if m.strip()),
}


def spec_from_kv(values: dict) -> ExperimentSpec:
    known = set(_GEN_KEYS) | set(_TRAIN_KEYS) | set(_WEIGHT_KEYS) | set(_EXPERIMENT_KEYS)
    for key in values:
        if key not in known:
            raise ValueError(f"unknown config key: {key}")
    gen_kw = {k: conv(values[k]) for k, conv in _GEN_KEYS.items() if k in values}
    train_kw = {k: conv(values[k]) for k, conv in _TRAIN_KEYS.items() if k in values}
    weight_kw = {k: conv(values[k]) for k, conv in _WEIGHT_KEYS.items() if k in values}
    exp_kw = {k: conv(values[k]) for k, conv in _EXPERIMENT_KEYS.items() if k in values}
    train_kw["weights"] = LossWeights(**weight_kw)
    return ExperimentSpec(gen=GenConfig(**gen_kw), train=TrainConfig(**train_kw), **exp_kw)


def load_spec(path) -> ExperimentSpec:
    return spec_from_kv(parse_kv_lines(path))


def kv_lines_from_spec(gen: GenConfig, train: TrainConfig) -> str:
    """Echo the effective cell configuration back as key=value text."""
    w = train.weights
    pairs = [
        ("n_aus", gen.n_aus),
        ("feature_dim", gen.feature_dim),
        ("n_source", gen.n_source),
        ("n_target", gen.n_target),
        ("base_rates", ",".join(f"{r:.17g}" for r in gen.base_rates) or "auto"),
        ("source_group_imbalance", gen.source_group_imbalance),
        ("domain_shift_scale", gen.domain_shift_scale),
        ("group_shift_scale", gen.group_shift_scale),
        ("noise_std", gen.noise_std),
        ("epochs", train.epochs),
        ("batch_size", train.batch_size),
        ("learning_rate", train.learning_rate),
        ("weight_decay", train.weight_decay),
        ("alpha", w.alpha),
        ("beta", w.beta),
        ("moment_order", w.moment_order),
        ("mode", train.mode),
        ("seed", train.seed),
        ("step3_repeats", train.step3_repeats),
        ("fresh_target_per_step", train.fresh_target_per_step),
    ]
    return "\n".join(f"{k}={v}" for k, v in pairs) + "\n"


def mode_for_weights(alpha: float, beta: float) -> str:
    """The training mode implied by a loss-weight cell of the ablation grid."""
    if alpha == 0 and beta == 0:
        return "direct_transfer"
    if beta == 0:
        return "mcd_only"
    if alpha == 0:
        return "pm2_only"
    return "full_pm2"


def _num(x: float) -> str:
    return f"{x:g}"


@dataclass
class CellResult:
    name: str
    seed: int
    ok: bool
    error: str = ""


def run_cells(spec: ExperimentSpec, out_dir, modes=None, seeds=None,
              ablation: bool = False, log=print) -> list:
    """Train and evaluate every (mode, seed) cell; failures do not stop the rest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    modes = tuple(modes) if modes else spec.modes
    n_seeds = seeds if seeds else spec.repeats
    base_seed = spec.train.seed

    cells = []
    for mode in modes:
        cells.append((mode, spec.train.weights))
    if ablation:
        for alpha in ABLATION_ALPHAS:
            for beta in ABLATION_BETAS:
                weights = replace(spec.train.weights, alpha=alpha, beta=beta)
                cells.append((f"ablation_a{_num(alpha)}_b{_num(beta)}", weights))

    results = []
    for i in range(n_seeds):
        seed = base_seed + i
        seed_dir = out / f"seed{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        gen_cfg = replace(spec.gen, seed=seed)
        triples, targets = generate(gen_cfg)
        save_dataset(flatten_triples(triples), seed_dir / "source.dat")
        save_dataset(targets, seed_dir / "target.dat")
        for cell_name, weights in cells:
            mode = (mode_for_weights(weights.alpha, weights.beta)
                    if cell_name.startswith("ablation_") else cell_name)
            train_cfg = replace(spec.train, mode=mode, seed=seed, weights=weights)
            results.append(
                _run_cell(cell_name, gen_cfg, train_cfg, triples, targets,
                          seed_dir / cell_name, log)
            )
    return results


def _run_cell(name, gen_cfg, train_cfg, triples, targets, cell_dir: Path, log):
    cell_dir.mkdir(parents=True, exist_ok=True)
    (cell_dir / "cell.cfg").write_text(kv_lines_from_spec(gen_cfg, train_cfg))
    try:
        model_cfg = ModelConfig(feature_dim=gen_cfg.feature_dim, n_aus=gen_cfg.n_aus)
        params = init_params(model_cfg, train_cfg.seed)
        params, history = train(params, triples, targets, train_cfg)
        write_history(history, cell_dir / "history.csv")
        save_checkpoint(params, cell_dir / "checkpoint.txt")
        report = evaluate(params, targets)
        meta = {
            "mode": train_cfg.mode,
            "cell": name,
            "seed": train_cfg.seed,
            "alpha": train_cfg.weights.alpha,
            "beta": train_cfg.weights.beta,
            "moment_order": train_cfg.weights.moment_order,
            "epochs": train_cfg.epochs,
            "n_source": gen_cfg.n_source,
            "n_target": gen_cfg.n_target,
        }
        write_report(report, cell_dir / "report.csv", meta=meta)
        log(f"[ok] {name} seed={train_cfg.seed} "
            f"macro_f1={report.macro_f1:.4f} eo={report.mean_eo:.4f} "
            f"spd={report.mean_spd:.4f}")
        return CellResult(name, train_cfg.seed, True)
    except (TrainingDiverged, ValueError, FloatingPointError) as exc:
        (cell_dir / "FAILED.txt").write_text(
            f"{exc}\n\n{traceback.format_exc()}"
        )
        log(f"[failed] {name} seed={train_cfg.seed}: {exc}")
        return CellResult(name, train_cfg.seed, False, str(exc))
