"""Parameter estimation by Dirichlet random search and teleport sweeps.

Each source-role column of the salience block pattern is drawn from a flat
Dirichlet whose dimension is the number of populated blocks in that column;
the teleportation probability comes from U(0, 1). Trials are independent and
logged incrementally so an interrupted search keeps its completed work.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .dynamics import PageRankConfig, SalienceMatrix
from .errors import InputError
from .evaluation import UserRelevance, nmrg_corpus
from .recommend import FilterConfig, precompute_seed_rankings

logger = logging.getLogger(__name__)


@dataclass
class ParamSample:
    """One sampled configuration: salience blocks plus teleport probability."""

    salience: SalienceMatrix
    rho: float
    trial_id: int = 0
    rng_seed: int | None = None

    def to_record(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "rng_seed": self.rng_seed,
            "rho": self.rho,
            "salience": {f"{t},{s}": v for (t, s), v in sorted(self.salience.blocks.items())},
        }


@dataclass
class Trial:
    """A parameter sample with its scores (or the error that prevented them)."""

    params: ParamSample
    scores: dict[int, float] | None
    error: str | None = None
    wall_time: float = 0.0


@dataclass
class SearchResult:
    """All trials plus the best one per cutoff and the cumulative-best curve."""

    trials: list[Trial]
    objective: int
    best: Trial | None
    best_per_cutoff: dict[int, Trial] = field(default_factory=dict)
    trajectory: list[float] = field(default_factory=list)


def _columns(pattern: Iterable[tuple[str, str]]) -> dict[str, list[str]]:
    """Group block keys by source role, preserving first-appearance order."""
    columns: dict[str, list[str]] = {}
    for target, source in pattern:
        columns.setdefault(source, []).append(target)
    return columns


def sample_parameters(
    pattern: Iterable[tuple[str, str]],
    rng: np.random.Generator,
    trial_id: int = 0,
    rng_seed: int | None = None,
) -> ParamSample:
    """Draw one configuration for the given block pattern.

    The pattern lists the populated (target_role, source_role) blocks, e.g.
    from :meth:`SupraAdjacency.structure_block_keys`. Column values are a
    flat Dirichlet draw (a single-block column is deterministically 1), and
    rho is uniform on (0, 1).
    """
    columns = _columns(pattern)
    if not columns:
        raise InputError("block pattern is empty")
    blocks: dict[tuple[str, str], float] = {}
    for source, targets in columns.items():
        if not targets:
            raise InputError(f"source role {source!r} has no populated blocks")
        values = rng.dirichlet(np.ones(len(targets)))
        for target, value in zip(targets, values):
            blocks[(target, source)] = float(value)
    rho = float(rng.uniform(0.0, 1.0))
    while rho == 0.0:
        rho = float(rng.uniform(0.0, 1.0))
    return ParamSample(SalienceMatrix(blocks), rho, trial_id, rng_seed)


def random_search(
    pattern: Sequence[tuple[str, str]],
    n_trials: int,
    evaluator: Callable[[ParamSample], Mapping[int, float]],
    rng: np.random.Generator,
    objective: int = 10,
    log_path: str | Path | None = None,
) -> SearchResult:
    """Evaluate independently sampled configurations and track the best.

    Evaluator failures are recorded on the trial and the search continues.
    With a fixed generator the sampled sequence (and hence the result) is
    reproducible.
    """
    if n_trials < 1:
        raise InputError("n_trials must be at least 1")
    trials: list[Trial] = []
    best: Trial | None = None
    best_per_cutoff: dict[int, Trial] = {}
    trajectory: list[float] = []
    log_file = open(log_path, "a", encoding="utf-8") if log_path else None
    try:
        for trial_id in range(n_trials):
            seed = int(rng.integers(0, 2**63 - 1))
            params = sample_parameters(
                pattern, np.random.default_rng(seed), trial_id, seed
            )
            started = time.perf_counter()
            scores: dict[int, float] | None = None
            error: str | None = None
            try:
                scores = {int(k): float(s) for k, s in evaluator(params).items()}
            except Exception as exc:  # evaluator failures must not kill the search
                error = f"{type(exc).__name__}: {exc}"
                logger.warning("trial %d failed: %s", trial_id, error)
            trial = Trial(params, scores, error, time.perf_counter() - started)
            trials.append(trial)
            if scores is not None:
                for cutoff, value in scores.items():
                    incumbent = best_per_cutoff.get(cutoff)
                    if incumbent is None or value > incumbent.scores[cutoff]:
                        best_per_cutoff[cutoff] = trial
                if objective in scores:
                    if best is None or scores[objective] > best.scores[objective]:
                        best = trial
            trajectory.append(
                best.scores[objective] if best is not None else float("nan")
            )
            if log_file:
                record = {
                    **trial.params.to_record(),
                    "scores": scores,
                    "error": error,
                    "wall_time": trial.wall_time,
                }
                log_file.write(json.dumps(record, sort_keys=True) + "\n")
                log_file.flush()
    finally:
        if log_file:
            log_file.close()
    return SearchResult(trials, objective, best, best_per_cutoff, trajectory)


@dataclass
class SweepPoint:
    rho: float
    scores: dict[int, float]


@dataclass
class SweepResult:
    points: list[SweepPoint]
    objective: int
    best_rho: float


def teleport_sweep(
    base: ParamSample,
    grid: Sequence[float],
    evaluator: Callable[[ParamSample], Mapping[int, float]],
    objective: int = 10,
) -> SweepResult:
    """Evaluate the base salience configuration over a grid of rho values."""
    grid = list(grid)
    if not grid:
        raise InputError("teleport sweep grid is empty")
    if any(not 0 < r < 1 for r in grid):
        raise InputError("grid values must lie in (0, 1)")
    points = []
    for rho in grid:
        params = ParamSample(base.salience, float(rho), base.trial_id, base.rng_seed)
        scores = {int(k): float(s) for k, s in evaluator(params).items()}
        points.append(SweepPoint(float(rho), scores))
    best = max(points, key=lambda p: p.scores.get(objective, -np.inf))
    return SweepResult(points, objective, best.rho)


def nmrg_evaluator(
    graph,
    users: Sequence[UserRelevance],
    item_roles: Sequence[str],
    filter_config: FilterConfig,
    cutoffs: Sequence[int] = (1, 10, 20),
    tolerance: float = 1e-10,
    solver: str = "linear",
    max_iterations: int = 10_000,
    seed_mass: float = 1.0,
    workers: int = 1,
    max_users: int | None = None,
) -> Callable[[ParamSample], dict[int, float]]:
    """Two-stage objective: precompute per-seed rankings, then score users.

    Seeds are the union of the (sub)sampled users' items. ``max_users``
    caps evaluation at the first users in user_id order, which keeps
    desk-scale searches tractable.
    """
    ordered = sorted(users, key=lambda u: u.user_id)
    if max_users is not None:
        ordered = ordered[:max_users]
    if not ordered:
        raise InputError("no users available for the evaluator")
    seed_items = sorted({item for u in ordered for item in u.items})

    def evaluate(params: ParamSample) -> dict[int, float]:
        config = PageRankConfig(
            rho=params.rho,
            solver=solver,
            tolerance=tolerance,
            max_iterations=max_iterations,
        )
        rankings = precompute_seed_rankings(
            graph,
            params.salience,
            config,
            filter_config,
            item_roles,
            seed_items,
            seed_mass=seed_mass,
            workers=workers,
        )
        report = nmrg_corpus(ordered, rankings, cutoffs)
        return {k: s.mean for k, s in report.cutoffs.items()}

    return evaluate
