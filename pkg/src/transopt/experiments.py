"""Dataset generation, single cross-validated runs, grid sweeps and reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import multiprocessing
import time
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

import numpy as np

from . import cache
from .config import ExperimentConfig, model_config
from .errors import ConfigError, EmptyReportError
from .fnsuite import N_CLASSES, InstanceSpec, make_instance, suite_table
from .model import dumps_checkpoint
from .sampling import build_design
from .training import CVReport, TrainConfig, stack_dataset, stratified_kfold, summarize, train_fold

log = logging.getLogger(__name__)

SWEEP_HEADER = ["dim", "multiplier", "e", "h", "L", "fold", "test_accuracy", "epochs_run", "wall_seconds", "seed", "error"]
SWEEP_KEY = ("dim", "multiplier", "e", "h", "L", "fold")
REFERENCE_BAND = (0.70, 0.80)

# datasets visible to forked workers, keyed by dataset_key()
_DATASETS: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def point_key(dim: int, multiplier: int, e: int, h: int, L: int) -> str:
    return f"d{dim}_m{multiplier}_e{e}_h{h}_L{L}"


def cache_root(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out) / "cache"


def dataset_key(cfg: ExperimentConfig, dim: int, multiplier: int) -> tuple:
    return (str(cache_root(cfg).resolve()), dim, multiplier, cfg.instances_per_class, cfg.seed)


# generate


def planned_designs(cfg: ExperimentConfig):
    """Yield ``(dim, class_id, instance_id, multiplier)`` for every design ``generate`` writes."""
    for dim in cfg.dims:
        for class_id in range(1, N_CLASSES + 1):
            for instance_id in range(1, cfg.instances_per_class + 1):
                for m in cfg.multipliers:
                    yield dim, class_id, instance_id, m


def generate(cfg: ExperimentConfig) -> list[dict]:
    """Build and write every design of ``cfg``; returns the manifest entries written."""
    root = cache_root(cfg)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise cache.CacheError(f"cannot create cache directory {root}: {exc}") from exc
    entries = []
    inst = None
    for dim, class_id, instance_id, m in planned_designs(cfg):
        if inst is None or inst.spec != InstanceSpec(class_id, instance_id, dim):
            inst = make_instance(InstanceSpec(class_id, instance_id, dim))
        entries.append(cache.write_design(root, build_design(inst, m, cfg.seed)))
    log.info("generated %d designs under %s", len(entries), root)
    cache.write_manifest(root, entries)
    for key in [k for k in _DATASETS if k[0] == str(root.resolve())]:
        del _DATASETS[key]
    return entries


def load_dataset(cfg: ExperimentConfig, dim: int, multiplier: int) -> tuple[np.ndarray, np.ndarray]:
    key = dataset_key(cfg, dim, multiplier)
    if key not in _DATASETS:
        designs = cache.load_group(cache_root(cfg), dim, multiplier, cfg.instances_per_class, cfg.seed)
        _DATASETS[key] = stack_dataset(designs)
    return _DATASETS[key]


# fold tasks


def _fold_task(data_key: tuple, point, fold_index: int, train_cfg: TrainConfig, with_checkpoint: bool):
    """Run one fold against a preloaded dataset; never raises."""
    dim, m, e, h, L = point
    start = time.perf_counter()
    try:
        X, y = _DATASETS[data_key]
        assignment = stratified_kfold(y, train_cfg.folds, train_cfg.seed)
        result, model = train_fold(model_config(dim, e, h, L), (X, y), assignment, fold_index, train_cfg, return_model=True)
        blob = dumps_checkpoint(model) if with_checkpoint else None
        return point, fold_index, result, time.perf_counter() - start, blob, None
    except Exception as exc:  # recorded in the sweep, not fatal
        log.debug("fold failed:\n%s", traceback.format_exc())
        return point, fold_index, None, time.perf_counter() - start, None, f"{type(exc).__name__}: {exc}"


def _run_tasks(tasks, jobs: int):
    """Yield fold-task results; ``jobs == 1`` runs in order in-process."""
    if jobs <= 1:
        for t in tasks:
            yield _fold_task(*t)
        return
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
        futures = [pool.submit(_fold_task, *t) for t in tasks]
        for fut in as_completed(futures):
            yield fut.result()


def _data_config(cfg: ExperimentConfig, dim: int, multiplier: int) -> dict:
    return {
        "dim": dim,
        "multiplier": multiplier,
        "instances_per_class": cfg.instances_per_class,
        "n_classes": N_CLASSES,
        "seed": cfg.seed,
    }


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


# train


def train_point(cfg: ExperimentConfig, point, jobs: int = 1) -> tuple[CVReport, Path]:
    """Cross-validate one configuration; writes report JSON, text summary and fold checkpoints."""
    dim, m, e, h, L = point
    model_config(dim, e, h, L)  # fail fast on invalid (e, h)
    train_cfg = cfg.train_config()
    _, y = load_dataset(cfg, dim, m)
    out = Path(cfg.out)
    key = point_key(*point)
    folds, errors = [], []
    tasks = [(dataset_key(cfg, dim, m), point, k, train_cfg, True) for k in range(train_cfg.folds)]
    for _, k, result, _, blob, err in _run_tasks(tasks, jobs):
        if err:
            errors.append(f"fold {k}: {err}")
            continue
        folds.append(result)
        ckpt = out / "checkpoints" / f"{key}_fold{k}.topt"
        ckpt.parent.mkdir(parents=True, exist_ok=True)
        ckpt.write_bytes(blob)
    if errors:
        raise RuntimeError("training failed: " + "; ".join(errors))
    report = summarize(model_config(dim, e, h, L), train_cfg, y, folds, _data_config(cfg, dim, m))
    path = out / "reports" / f"train_{key}.json"
    _write_json(path, report.to_dict())
    path.with_suffix(".txt").write_text(format_summary(report))
    return report, path


def format_summary(report: CVReport) -> str:
    mc, dc = report.model_config, report.data_config
    lines = [
        f"dim={dc.get('dim')} multiplier={dc.get('multiplier')} e={mc['e']} h={mc['h']} L={mc['L']}: "
        f"mean accuracy {report.mean_accuracy:.4f} +/- {report.std_accuracy:.4f} over {len(report.folds)} folds",
        f"parameters: {report.parameter_count}",
        f"reference band: {REFERENCE_BAND[0]:.2f}-{REFERENCE_BAND[1]:.2f}",
        "",
    ]
    for f in report.folds:
        lines.append(
            f"fold {f.fold_index}: test {f.test_accuracy:.4f} train {f.train_accuracy:.4f} "
            f"epochs {f.epochs_run} best val loss {f.best_val_loss:.4f} (epoch {f.best_epoch})"
        )
    lines += ["", "confusion matrix (rows: true class 1..24, columns: predicted):"]
    lines += [" ".join(f"{v:3d}" for v in row) for row in report.confusion_matrix]
    names = {c.id: c.name for c in suite_table()}
    lines += ["", "per-class recall:"]
    for i, row in enumerate(report.confusion_matrix, start=1):
        total = sum(row)
        lines.append(f"{i:2d} {names[i]:<32} {row[i - 1] / total if total else float('nan'):.2f}")
    return "\n".join(lines) + "\n"


# sweep


def _format_row(point, fold: int, result, wall: float, seed: int, error: str | None, timing: bool) -> dict:
    dim, m, e, h, L = point
    return {
        "dim": dim,
        "multiplier": m,
        "e": e,
        "h": h,
        "L": L,
        "fold": fold,
        "test_accuracy": "" if result is None else repr(result.test_accuracy),
        "epochs_run": "" if result is None else result.epochs_run,
        "wall_seconds": f"{wall:.3f}" if timing else "",
        "seed": seed,
        "error": error or "",
    }


def _row_key(row: dict) -> tuple[int, ...]:
    return tuple(int(row[k]) for k in SWEEP_KEY)


def read_sweep(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def finalize_sweep(path: Path) -> list[dict]:
    """Sort rows by key and rewrite the CSV; duplicate keys are an error."""
    rows = read_sweep(path)
    seen = set()
    for row in rows:
        key = _row_key(row)
        if key in seen:
            raise ValueError(f"duplicate sweep row for key {dict(zip(SWEEP_KEY, key))}")
        seen.add(key)
    rows.sort(key=_row_key)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_HEADER, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    tmp = path.with_suffix(".csv.tmp")
    tmp.write_text(buf.getvalue())
    tmp.replace(path)
    return rows


def sweep(cfg: ExperimentConfig, jobs: int = 1, timing: bool = True, resume: bool = False) -> Path:
    """Run every valid grid point for every fold and write ``sweep.csv``.

    Rows are appended as folds finish and sorted once the sweep is done.
    Per-point CV reports land in ``reports/sweep_<point>.json``.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "sweep.csv"
    train_cfg = cfg.train_config()
    points = cfg.points()
    if not points:
        raise ConfigError("grid expands to no valid configuration")

    done = set()
    if resume and csv_path.exists():
        done = {_row_key(r) for r in read_sweep(csv_path) if not r["error"]}
        rows = [r for r in read_sweep(csv_path) if _row_key(r) in done]
    else:
        rows = []
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_HEADER, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)

    tasks = []
    for point in points:
        load_dataset(cfg, *point[:2])
        for k in range(train_cfg.folds):
            if point + (k,) not in done:
                tasks.append((dataset_key(cfg, *point[:2]), point, k, train_cfg, False))

    pending: dict[tuple, list] = {}
    with open(csv_path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_HEADER, lineterminator="\n")
        for point, k, result, wall, _, err in _run_tasks(tasks, jobs):
            writer.writerow(_format_row(point, k, result, wall, cfg.seed, err, timing))
            fh.flush()
            log.info(
                "%s fold %d: %s",
                point_key(*point),
                k,
                err if err else f"accuracy {result.test_accuracy:.4f} after {result.epochs_run} epochs",
            )
            pending.setdefault(point, []).append(result)
            if len(pending[point]) == train_cfg.folds and all(r is not None for r in pending[point]):
                dim, m, e, h, L = point
                _, y = _DATASETS[dataset_key(cfg, dim, m)]
                report = summarize(model_config(dim, e, h, L), train_cfg, y, pending[point], _data_config(cfg, dim, m))
                _write_json(out / "reports" / f"sweep_{point_key(*point)}.json", report.to_dict())
    finalize_sweep(csv_path)
    return csv_path


# report


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def summarize_sweep(rows: list[dict]) -> dict[tuple[int, int], list[dict]]:
    """Group sweep rows into per-(dim, multiplier) tables of per-point statistics."""
    groups: dict[tuple[int, int], dict[tuple[int, int, int], dict]] = {}
    for row in rows:
        g = groups.setdefault((int(row["dim"]), int(row["multiplier"])), {})
        p = g.setdefault((int(row["e"]), int(row["h"]), int(row["L"])), {"acc": [], "errors": [], "epochs": []})
        if row["test_accuracy"] == "":
            p["errors"].append(row["error"] or "unknown error")
        else:
            p["acc"].append(float(row["test_accuracy"]))
            p["epochs"].append(int(row["epochs_run"]))
    tables = {}
    for gkey in sorted(groups):
        entries = []
        for (e, h, L), p in sorted(groups[gkey].items()):
            mean, std = _mean_std(p["acc"]) if p["acc"] else (math.nan, math.nan)
            entries.append(
                {
                    "e": e,
                    "h": h,
                    "L": L,
                    "folds": len(p["acc"]),
                    "failed": len(p["errors"]),
                    "error": p["errors"][0] if p["errors"] else "",
                    "mean": mean,
                    "std": std,
                    "mean_epochs": float(np.mean(p["epochs"])) if p["epochs"] else math.nan,
                }
            )
        ok = [x for x in entries if x["folds"] > 0]
        best = min(ok, key=lambda x: (-x["mean"], x["e"], x["h"], x["L"])) if ok else None
        for x in entries:
            x["best"] = x is best
        tables[gkey] = entries
    return tables


def render_report(rows: list[dict]) -> str:
    if not rows:
        raise EmptyReportError("sweep CSV has no result rows")
    lo, hi = REFERENCE_BAND
    out = ["# Sweep report", ""]
    out.append(f"Reference accuracy band from the original full-scale setting: {lo:.0%}-{hi:.0%}.")
    for (dim, m), entries in summarize_sweep(rows).items():
        out += ["", f"## dim={dim}, sample size={m}*d", ""]
        out.append("| e | h | L | folds | mean acc | std acc | mean epochs | note |")
        out.append("|---|---|---|---|---|---|---|---|")
        for x in entries:
            if x["folds"] == 0:
                note = f"FAILED ({x['failed']} folds): {x['error']}"
                out.append(f"| {x['e']} | {x['h']} | {x['L']} | 0 | - | - | - | {note} |")
                continue
            note = "**best**" if x["best"] else ""
            if x["failed"]:
                note = (note + f" {x['failed']} folds failed").strip()
            out.append(
                f"| {x['e']} | {x['h']} | {x['L']} | {x['folds']} | {x['mean']:.4f} | {x['std']:.4f} "
                f"| {x['mean_epochs']:.1f} | {note} |"
            )
        best = next((x for x in entries if x["best"]), None)
        if best is not None:
            where = "inside" if lo <= best["mean"] <= hi else ("above" if best["mean"] > hi else "below")
            out += [
                "",
                f"Best: e={best['e']}, h={best['h']}, L={best['L']} with mean accuracy {best['mean']:.4f} "
                f"({where} the reference band).",
            ]
    return "\n".join(out) + "\n"


def report(csv_path, md_path=None) -> str:
    rows = read_sweep(csv_path)
    text = render_report(rows)
    if md_path is not None:
        Path(md_path).write_text(text)
    return text
