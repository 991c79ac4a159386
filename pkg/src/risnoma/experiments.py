"""Experiment front end: variant catalog, multi-seed runs, curve export.

A variant is a named set of overrides on top of a base config file.  Each
seed of an experiment produces ``steps.csv``/``episodes.csv``, the fully
resolved configuration, and checkpoints; the experiment directory gains a
``summary.csv`` aggregating the final-stretch energy efficiency.  Seeds are
independent and may run in parallel worker processes.
"""

from __future__ import annotations

import multiprocessing as mp
from pathlib import Path

import numpy as np

from risnoma import config_io
from risnoma.baselines import oma_rate, sdma_rate  # re-exported baseline surface
from risnoma.training import TrainConfig, train

__all__ = [
    "VARIANTS",
    "apply_variant",
    "run_experiment",
    "run_single_seed",
    "emit_curves",
    "moving_average",
    "read_csv_column",
    "oma_rate",
    "sdma_rate",
]

# Variant tag -> overrides. Scenario overrides live under "scenario.",
# everything else patches TrainConfig fields.
VARIANTS: dict[str, dict] = {
    # fully optimized hybrid learner
    "full": {},
    # every element pinned to S mode; no harvesting, discrete sub-agent bypassed
    "no_eh": {"force_relay_modes": True},
    # amplitudes pinned to 1: a conventional surface without amplification
    "no_amp": {"unit_amplitudes": True},
    # cascades blocked toward users behind a surface's plane
    "reflect_only": {"reflect_only": True},
    # hybrid learner without parametrized sharing
    "no_sharing": {"sharing": False},
    # continuous-only learner, mode bits relaxed and thresholded
    "pure_ppo": {"agent_mode": "pure_ppo"},
    # fully discrete learner on the quantization grids
    "pure_dqn": {"agent_mode": "pure_dqn"},
    # uniform feasible actions, no learning
    "random": {"agent_mode": "random"},
    # no surfaces deployed at all
    "no_ris": {"scenario.n_surfaces": 0},
    # orthogonal access baseline (time sharing, derived beams)
    "oma": {"rate_model": "oma"},
    # spatial-division baseline (one beam per user, no SIC)
    "sdma": {"rate_model": "sdma"},
}


def apply_variant(sections: dict, variant: str) -> dict:
    """Return config sections with the variant's overrides applied."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; know {sorted(VARIANTS)}")
    out = {name: dict(body) for name, body in sections.items()}
    out.setdefault("train", {})
    for key, value in VARIANTS[variant].items():
        if key.startswith("scenario."):
            out["scenario"][key.split(".", 1)[1]] = value
        else:
            out["train"][key] = value
    return out


def run_single_seed(sections: dict, variant: str, seed: int, out_dir) -> dict:
    """Train one seed of one variant; returns its summary row."""
    resolved = apply_variant(sections, variant)
    resolved["train"]["seed"] = seed
    scenario = config_io.scenario_from_sections(resolved)
    cfg = TrainConfig.from_sections(resolved)
    result = train(scenario, cfg, out_dir=out_dir, run_id=f"seed_{seed}")
    log = result.run_log
    return {
        "variant": variant,
        "seed": seed,
        "final_ee": log.fraction_mean("ee", last=0.1),
        "first_ee": log.fraction_mean("ee", first=0.1),
        "final_reward": log.fraction_mean("reward", last=0.1),
        "run_dir": str(result.out_dir),
    }


def _worker(args):
    return run_single_seed(*args)


def run_experiment(
    config_path,
    variant: str,
    seeds=None,
    *,
    out_dir="runs",
    workers: int | None = None,
) -> dict:
    """Run one variant over several seeds and aggregate a summary.

    ``workers`` > 1 fans seeds out to separate processes; the per-seed runs
    are bit-identical either way because each is driven by its own seed.
    """
    seeds = list(seeds if seeds is not None else [0])
    sections = config_io.load_config(config_path)
    exp_dir = Path(out_dir) / variant
    exp_dir.mkdir(parents=True, exist_ok=True)

    jobs = [(sections, variant, int(s), exp_dir) for s in seeds]
    if workers is None:
        workers = min(len(jobs), mp.cpu_count())
    if workers > 1 and len(jobs) > 1:
        with mp.get_context("spawn").Pool(workers) as pool:
            rows = pool.map(_worker, jobs)
    else:
        rows = [_worker(j) for j in jobs]

    final = np.array([r["final_ee"] for r in rows])
    summary = {
        "variant": variant,
        "seeds": seeds,
        "rows": rows,
        "mean_final_ee": float(final.mean()),
        "std_final_ee": float(final.std()),
    }
    lines = ["variant,seed,first_ee,final_ee,final_reward"]
    for r in rows:
        lines.append(
            f"{r['variant']},{r['seed']},{r['first_ee']!r},{r['final_ee']!r},"
            f"{r['final_reward']!r}"
        )
    lines.append(f"# mean_final_ee = {summary['mean_final_ee']!r}")
    lines.append(f"# std_final_ee = {summary['std_final_ee']!r}")
    (exp_dir / "summary.csv").write_text("\n".join(lines) + "\n")
    return summary


def moving_average(series: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average with a valid window; a window longer than the
    series collapses it to its single overall mean."""
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        raise ValueError("empty series")
    window = min(window, series.size)
    kernel = np.full(window, 1.0 / window)
    return np.convolve(series, kernel, mode="valid")


def read_csv_column(path, column: str) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    idx = header.index(column)
    return np.array([float(line.split(",")[idx]) for line in lines[1:] if line])


def emit_curves(in_dir, window: int = 100, out_path=None) -> Path:
    """Moving-average reward and EE curves from every seed run under a
    directory, written as one plot-ready CSV."""
    in_dir = Path(in_dir)
    step_files = sorted(in_dir.glob("**/steps.csv"))
    if not step_files:
        raise ValueError(f"no steps.csv found under {in_dir}")
    columns, names = [], []
    for f in step_files:
        label = f.parent.name
        for field in ("reward", "ee"):
            columns.append(moving_average(read_csv_column(f, field), window))
            names.append(f"{label}_{field}_ma{window}")
    length = min(len(c) for c in columns)
    table = np.stack([c[:length] for c in columns], axis=1)
    out_path = Path(out_path) if out_path else in_dir / f"curves_ma{window}.csv"
    lines = [",".join(["index"] + names)]
    for i in range(length):
        lines.append(",".join([str(i)] + [repr(float(v)) for v in table[i]]))
    out_path.write_text("\n".join(lines) + "\n")
    return out_path
