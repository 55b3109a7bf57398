"""Command-line entry point: dataset stats, fold export and defense experiments.

Every experiment writes a results CSV (one row per fold, repeat and attack
index) plus a ``.summary.json`` with means and standard deviations. Outputs
depend only on the configuration and seed, never on timing or worker count.
Set ``LPDEFENSE_WORKERS`` to run the (proportion, fold) grid in parallel.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import datasets
from .baselines import MAX_PROPORTION, read_perturbation, write_perturbation
from .defenses import DEFAULT_REPEATS, METHODS, make_defense
from .evaluation import EvalResult, evaluate_defense
from .evolution import EvoParams
from .graph import EdgePartition, Graph, dumps_edge_list, kfold_split, topo_stats
from .similarity import ALL_INDICES, RA, SimilarityIndex

log = logging.getLogger("lpdefense")

CSV_HEADER = ["network", "method", "attack_index", "proportion", "fold", "precision", "auc", "seed"]
DEFAULT_PROPORTIONS = [round(0.01 * i, 2) for i in range(1, 11)]
DEFAULT_ALPHAS = [0.0, 0.01, 0.1, 1.0]
TRANSFER_METHODS = ["noop", "rlr", "rls", "hp", "eda"]
WORKERS_ENV = "LPDEFENSE_WORKERS"
EVO_FLAGS = ("n_iteration", "n_elite", "n_crossover", "n_mutation", "pc", "pm",
             "n_estimation", "n_eda", "convergence_patience")
CONFIG_KEYS = {"dataset", "method", "attack", "proportion", "alpha", "folds", "repeats", "seed", "out",
               "perturbation_dir", "perturbation", "fold", *EVO_FLAGS}


def fmt(x: float) -> str:
    return repr(float(x))


def result_row(r: EvalResult) -> list[str]:
    return [r.network, r.method, r.index, fmt(r.proportion), str(r.fold), fmt(r.precision), fmt(r.auc), str(r.seed)]


def summarize(rows: Sequence[EvalResult]) -> dict:
    """Mean and sample std of precision and AUC per (method, attack, proportion)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.method, r.index, r.proportion), []).append(r)
    out: dict = {}
    for (method, index, prop), rs in groups.items():
        prec = np.array([r.precision for r in rs])
        au = np.array([r.auc for r in rs])
        out.setdefault(method, {}).setdefault(index, {})[fmt(prop)] = {
            "n": len(rs),
            "precision_mean": math.fsum(prec.tolist()) / len(rs),
            "precision_std": float(np.std(prec, ddof=1)) if len(rs) > 1 else 0.0,
            "auc_mean": math.fsum(au.tolist()) / len(rs),
            "auc_std": float(np.std(au, ddof=1)) if len(rs) > 1 else 0.0,
        }
    return out


def summary_path(out: str | os.PathLike) -> Path:
    p = Path(out)
    return p.with_name(p.stem + ".summary.json")


class ResultWriter:
    """Collects rows; writes the CSV (file or stdout) and the JSON summary next to it."""

    def __init__(self, out: str | None):
        self.out = out
        self.rows: list[EvalResult] = []

    def add(self, rows: Sequence[EvalResult]) -> None:
        self.rows.extend(rows)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(result_row(r))
        return buf.getvalue()

    def close(self) -> None:
        text = self.csv_text()
        if self.out is None:
            sys.stdout.write(text)
            return
        Path(self.out).parent.mkdir(parents=True, exist_ok=True)
        with open(self.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        if self.rows:
            with open(summary_path(self.out), "w", encoding="utf-8") as fh:
                json.dump(summarize(self.rows), fh, indent=2, sort_keys=True)
                fh.write("\n")


def workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Job:
    """One (method, proportion, fold) cell of an experiment grid."""

    graph: Graph
    partition: EdgePartition
    network: str
    method: str
    label: str
    proportion: float
    fold: int
    attacks: tuple
    repeats: int
    seed: int
    alpha: object
    evo: EvoParams
    pert_dir: str | None = None

    def pert_file(self, repeat: int) -> Path:
        name = f"{self.network}_{self.label}_p{self.proportion:g}_fold{self.fold}_rep{repeat}.txt"
        return Path(self.pert_dir) / name


def run_job(job: Job) -> list[EvalResult]:
    defense = make_defense(job.method, job.proportion, alpha=job.alpha, network=job.network, evo=job.evo)
    if job.pert_dir is not None:
        Path(job.pert_dir).mkdir(parents=True, exist_ok=True)
        fresh = defense
        repeat = iter(range(job.repeats))

        def defense(part, seed):
            # reuse a saved perturbation when present, otherwise create and save it
            path = job.pert_file(next(repeat))
            if path.is_file():
                return read_perturbation(path, job.graph.labels)
            pert = fresh(part, seed)
            write_perturbation(pert, path, job.graph.labels)
            return pert

    reports = evaluate_defense(job.graph, [job.partition], defense, list(job.attacks), method=job.label,
                               proportion=job.proportion, seed=job.seed, repeats=job.repeats,
                               network=job.network, fold_ids=[job.fold])
    per_attack = [reports[str(a)].rows for a in job.attacks]
    return [rs[i] for i in range(job.repeats) for rs in per_attack]


def run_jobs(jobs: Sequence[Job], writer: ResultWriter) -> None:
    """Run jobs (in parallel if configured); rows are kept in job order."""
    n = workers()
    try:
        if n == 1 or len(jobs) < 2:
            for job in jobs:
                writer.add(run_job(job))
        else:
            with ProcessPoolExecutor(max_workers=n) as pool:
                for rows in pool.map(run_job, jobs):
                    writer.add(rows)
    finally:
        # partial results are flushed even when a job fails
        writer.close()


# --- configuration -----------------------------------------------------------

def _listify(value) -> list:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    if isinstance(value, str):
        return [v for v in value.replace(",", " ").split() if v]
    return [value]


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a flat mapping")
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ValueError(f"{path}: config must be flat, nested keys {nested}")
    cfg = {str(k).replace("-", "_"): v for k, v in data.items()}
    unknown = sorted(set(cfg) - CONFIG_KEYS)
    if unknown:
        raise ValueError(f"{path}: unknown config keys {unknown}")
    return cfg


def merged(args: argparse.Namespace) -> dict:
    """Config-file values overridden by explicitly given flags."""
    cfg = load_config(getattr(args, "config", None))
    for k, v in vars(args).items():
        if k in ("config", "command", "func"):
            continue
        if v is not None:
            cfg[k] = v
    return cfg


def parse_alpha(value):
    if value is None or value == "paper-default":
        return "paper-default"
    return float(value)


def evo_params(cfg: dict) -> EvoParams:
    kw = {}
    types = {f.name: f.type for f in fields(EvoParams)}
    for k in EVO_FLAGS:
        if cfg.get(k) is not None:
            kw[k] = float(cfg[k]) if types[k] in ("float", float) else int(cfg[k])
    return EvoParams(**kw)


def _attacks(cfg: dict, default=(RA,)) -> tuple:
    vals = _listify(cfg.get("attack"))
    return tuple(SimilarityIndex.parse(str(v)) for v in vals) if vals else tuple(default)


def _proportions(cfg: dict, default) -> list[float]:
    vals = [float(v) for v in _listify(cfg.get("proportion"))] or list(default)
    for p in vals:
        if not 0.0 < p <= MAX_PROPORTION:
            raise ValueError(f"proportion {p} outside (0, {MAX_PROPORTION}]")
    return vals


def _repeats(cfg: dict, method: str) -> int:
    r = cfg.get("repeats")
    r = DEFAULT_REPEATS[method] if r is None else int(r)
    if r < 1:
        raise ValueError("repeats must be at least 1")
    return r


def _setup(cfg: dict):
    if not cfg.get("dataset"):
        raise ValueError("--dataset is required")
    name, graph = datasets.load(cfg["dataset"])
    folds = int(cfg.get("folds", 10))
    seed = int(cfg.get("seed", 0))
    return name, graph, kfold_split(graph, folds, seed), seed


def _method(cfg: dict, default="noop") -> str:
    method = str(cfg.get("method", default)).lower()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return method


# --- commands ----------------------------------------------------------------

def cmd_stats(cfg: dict) -> int:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["network", "nodes", "edges", "avg_degree", "clustering", "avg_distance"])
    for ds in _listify(cfg.get("dataset")):
        name, graph = datasets.load(ds)
        row = topo_stats(graph).as_row()
        w.writerow([name] + [f"{row[k]}" if isinstance(row[k], int) else f"{row[k]:.3f}" for k in
                             ("nodes", "edges", "avg_degree", "clustering", "avg_distance")])
    _emit(buf.getvalue(), cfg.get("out"))
    return 0


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_split(cfg: dict) -> int:
    name, graph, folds, _ = _setup(cfg)
    out = Path(cfg.get("out") or f"{name}_folds")
    out.mkdir(parents=True, exist_ok=True)
    for k, part in enumerate(folds):
        for kind, edges in (("train", part.train), ("validation", part.validation)):
            (out / f"fold{k}_{kind}.txt").write_text(dumps_edge_list(graph.with_edges(edges)), encoding="utf-8")
    log.info("wrote %d folds to %s", len(folds), out)
    return 0


def _grid(cfg: dict, method: str, label: str, proportions, alpha, attacks, name, graph, folds, seed,
          evo, pert_dir=None) -> list[Job]:
    return [Job(graph, part, name, method, label, p, f, attacks, _repeats(cfg, method), seed, alpha, evo, pert_dir)
            for p in proportions for f, part in enumerate(folds)]


def cmd_defend(cfg: dict) -> int:
    name, graph, folds, seed = _setup(cfg)
    method = _method(cfg)
    props = [0.0] if method == "noop" else _proportions(cfg, DEFAULT_PROPORTIONS)
    jobs = _grid(cfg, method, method, props, parse_alpha(cfg.get("alpha")), _attacks(cfg), name, graph, folds,
                 seed, evo_params(cfg), cfg.get("perturbation_dir"))
    run_jobs(jobs, ResultWriter(cfg.get("out")))
    return 0


def cmd_alpha_sweep(cfg: dict) -> int:
    name, graph, folds, seed = _setup(cfg)
    method = _method(cfg, "eda")
    if method not in ("ga", "eda"):
        raise ValueError("alpha-sweep needs --method ga or eda")
    alphas = [float(a) for a in _listify(cfg.get("alpha"))] or list(DEFAULT_ALPHAS)
    props = _proportions(cfg, [0.06])
    jobs = []
    for a in alphas:
        jobs += _grid(cfg, method, f"{method}[alpha={a:g}]", props, a, _attacks(cfg), name, graph, folds,
                      seed, evo_params(cfg))
    run_jobs(jobs, ResultWriter(cfg.get("out")))
    return 0


def cmd_transfer(cfg: dict) -> int:
    name, graph, folds, seed = _setup(cfg)
    methods = [m.lower() for m in _listify(cfg.get("method"))] or list(TRANSFER_METHODS)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    props = _proportions(cfg, [0.10])
    prop = max(props)
    attacks = _attacks(cfg, ALL_INDICES)
    pert_dir = cfg.get("perturbation_dir")
    if pert_dir is None and cfg.get("out"):
        pert_dir = str(Path(cfg["out"]).with_suffix("")) + "_perturbations"
    jobs = []
    for m in methods:
        p = 0.0 if m == "noop" else prop
        jobs += _grid(cfg, m, m, [p], parse_alpha(cfg.get("alpha")), attacks, name, graph, folds, seed,
                      evo_params(cfg), pert_dir if m != "noop" else None)
    run_jobs(jobs, ResultWriter(cfg.get("out")))
    return 0


def cmd_replay(cfg: dict) -> int:
    name, graph, folds, seed = _setup(cfg)
    if not cfg.get("perturbation"):
        raise ValueError("--perturbation is required")
    fold = int(cfg.get("fold", 0))
    if not 0 <= fold < len(folds):
        raise ValueError(f"fold {fold} outside 0..{len(folds) - 1}")
    pert = read_perturbation(cfg["perturbation"], graph.labels)
    pert.validate(folds[fold])

    def defense(part, s):
        return pert

    reports = evaluate_defense(graph, [folds[fold]], defense, list(_attacks(cfg)), method="replay",
                               proportion=pert.m / len(folds[fold].train), seed=seed, network=name,
                               fold_ids=[fold])
    writer = ResultWriter(cfg.get("out"))
    for rep in reports.values():
        writer.add(rep.rows)
    writer.close()
    return 0


COMMANDS = {
    "stats": cmd_stats,
    "split": cmd_split,
    "defend": cmd_defend,
    "alpha-sweep": cmd_alpha_sweep,
    "transfer": cmd_transfer,
    "replay": cmd_replay,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpdefense", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat YAML file; flags override its values")
        p.add_argument("--dataset", nargs="+" if name == "stats" else None,
                       help="edge-list path or bundled network name")
        p.add_argument("--out", help="output path (stdout when omitted)")
        if name == "stats":
            continue
        p.add_argument("--folds", type=int)
        p.add_argument("--seed", type=int)
        if name == "split":
            continue
        p.add_argument("--attack", help="comma-separated indices, e.g. RA,CN,LP(0.5)")
        if name == "replay":
            p.add_argument("--perturbation", help="DEL/ADD perturbation file")
            p.add_argument("--fold", type=int)
            continue
        p.add_argument("--method", help=f"one of {', '.join(METHODS)}" + (" (comma list)" if name == "transfer" else ""))
        p.add_argument("--proportion", help="comma-separated proportions in (0, 0.25]")
        p.add_argument("--alpha", help="fitness weight, 'paper-default', or a comma list for alpha-sweep")
        p.add_argument("--repeats", type=int)
        p.add_argument("--perturbation-dir", dest="perturbation_dir",
                       help="save perturbations here and reuse any already saved")
        for k in EVO_FLAGS:
            p.add_argument("--" + k.replace("_", "-"), dest=k, type=float if k in ("pc", "pm") else int)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = merged(args)
        cfg.pop("verbose", None)
        return COMMANDS[args.command](cfg)
    except (ValueError, FileNotFoundError) as exc:
        print(f"lpdefense {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
