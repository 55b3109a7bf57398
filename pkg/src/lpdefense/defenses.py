"""Uniform ``(partition, seed) -> Perturbation`` wrappers for every method."""

from __future__ import annotations

import logging
from dataclasses import replace

from . import baselines
from .evaluation import Defense, noop_defense
from .evolution import EvoParams, EvoResult, FitnessContext, NETWORK_ALPHA, eda_run, ga_run
from .graph import EdgePartition, Perturbation

log = logging.getLogger(__name__)

METHODS = ("noop", "rlr", "rls", "hp", "ga", "eda")
DEFAULT_REPEATS = {"noop": 1, "rlr": 100, "rls": 100, "hp": 100, "ga": 5, "eda": 5}
FALLBACK_ALPHA = 0.01


def resolve_alpha(alpha, network: str = "") -> float:
    """Numeric alpha, or the per-network reference value for ``None``/``"paper-default"``."""
    if alpha is None or alpha == "paper-default":
        key = network.lower()
        if key not in NETWORK_ALPHA:
            log.info("no reference alpha for %r, using %g", network, FALLBACK_ALPHA)
        return NETWORK_ALPHA.get(key, FALLBACK_ALPHA)
    return float(alpha)


def swap_budget(m: int) -> int:
    """Largest even budget not above ``m`` (each swap moves two links)."""
    return m - (m % 2)


def make_defense(method: str, proportion: float, *, alpha=None, network: str = "",
                 evo: EvoParams | None = None, records: list | None = None) -> Defense:
    """Build the defense callable for ``method`` at a given proportion.

    ``evo`` supplies non-default evolutionary parameters (its ``alpha``,
    ``m`` and ``seed`` are overwritten per run). Evolutionary runs append
    their :class:`EvoResult` to ``records`` when given.
    """
    method = method.lower()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method == "noop":
        return noop_defense
    if not 0.0 < proportion <= baselines.MAX_PROPORTION:
        raise ValueError(f"proportion {proportion} outside (0, {baselines.MAX_PROPORTION}]")

    if method == "rlr":
        def run(part: EdgePartition, seed: int) -> Perturbation:
            return baselines.rlr(part, baselines.BaselineParams(baselines.budget(part, proportion), seed))
    elif method == "rls":
        def run(part: EdgePartition, seed: int) -> Perturbation:
            m = swap_budget(baselines.budget(part, proportion))
            pert = baselines.rls(part, baselines.BaselineParams(m, seed))
            after = part.train_graph.with_edges((part.train - pert.deleted) | pert.added)
            if not (after.degrees == part.train_graph.degrees).all():
                raise RuntimeError("link swapping changed the training degree sequence")
            return pert
    elif method == "hp":
        def run(part: EdgePartition, seed: int) -> Perturbation:
            return baselines.hp(part, baselines.budget(part, proportion), seed)
    else:
        a = resolve_alpha(alpha, network)
        base = evo if evo is not None else EvoParams()
        search = ga_run if method == "ga" else eda_run
        contexts: dict[int, FitnessContext] = {}

        def run(part: EdgePartition, seed: int) -> Perturbation:
            ctx = contexts.get(id(part))
            if ctx is None or ctx.partition is not part:
                ctx = contexts[id(part)] = FitnessContext(part)
            params = replace(base, alpha=a, m=max(1, baselines.budget(part, proportion)), seed=seed)
            res: EvoResult = search(ctx, params)
            if records is not None:
                records.append(res)
            return res.best.to_perturbation()
    return run
