"""Seeded rankings and the thematic filter.

Seeds become a biased teleportation vector; the seeded PageRank ranks all
nodes, a log-gain filter against the unseeded scores drops candidates whose
score did not rise enough, and surviving item-role nodes are projected onto
item entities.
"""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dynamics import (
    PageRankConfig,
    PageRankSolution,
    SalienceMatrix,
    TransitionMatrix,
    build_transition_matrix,
    solve_pagerank,
    unseeded_pagerank,
)
from .errors import InputError
from .graph import SupraAdjacency

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Seed:
    """One seed entity, optionally pinned to a single role."""

    entity_id: str
    role_id: str | None = None
    weight: float = 1.0


@dataclass
class SeedSpec:
    """Seeds plus the teleport mass concentrated on them."""

    seeds: tuple[Seed, ...]
    mass: float = 1.0

    def __init__(self, seeds: Iterable[Seed], mass: float = 1.0):
        self.seeds = tuple(seeds)
        self.mass = float(mass)
        if not self.seeds:
            raise InputError("seed spec contains no seeds")
        if not 0 < self.mass <= 1:
            raise InputError(f"seed mass must be in (0, 1], got {self.mass}")
        weights = [s.weight for s in self.seeds]
        if any(w < 0 for w in weights):
            raise InputError("seed weights must be non-negative")
        if sum(weights) <= 0:
            raise InputError("seed weights sum to zero")


@dataclass
class FilterConfig:
    """Log-gain threshold and list-length cutoff for the thematic filter."""

    threshold: float = 0.0
    top_k: int = 300

    def __post_init__(self):
        if self.top_k < 1:
            raise InputError(f"top_k must be at least 1, got {self.top_k}")
        if np.isnan(self.threshold):
            raise InputError("threshold must not be NaN")


@dataclass
class RankedList:
    """Ordered recommendations with scores and log10 gains over baseline.

    ``ids`` holds node indices for node-level rankings and entity ids after
    projection. Scores are non-increasing; ties were broken by ascending
    node (or entity) index.
    """

    ids: list
    scores: np.ndarray
    gains: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self):
        gains = self.gains if self.gains is not None else [None] * len(self.ids)
        return iter(zip(self.ids, self.scores, gains))


def make_teleport_vector(seeds: SeedSpec, graph: SupraAdjacency) -> np.ndarray:
    """Teleportation vector with ``seeds.mass`` on the seeds, rest uniform.

    A seed with no role spreads its share uniformly over every role node of
    the entity; seed shares are proportional to seed weights.
    """
    v = np.zeros(graph.n)
    total_weight = sum(s.weight for s in seeds.seeds)
    for seed in seeds.seeds:
        if seed.role_id is None:
            nodes = graph.nodes_of_entity(seed.entity_id)
        else:
            nodes = [graph.node_of(seed.entity_id, seed.role_id)]
        share = seeds.mass * (seed.weight / total_weight) / len(nodes)
        for node in nodes:
            v[node] += share
    if seeds.mass < 1.0:
        v += (1.0 - seeds.mass) / graph.n
    return v


def rank_nodes(solution: PageRankSolution) -> RankedList:
    """All nodes ordered by descending score, ties by ascending node index."""
    order = np.argsort(-solution.scores, kind="stable")
    return RankedList(ids=order.tolist(), scores=solution.scores[order])


def _gain_mask(
    pi: np.ndarray, pi_star: np.ndarray, threshold: float
) -> np.ndarray:
    # pi >= pi_star * 10**theta is exactly the log10-gain test and keeps the
    # theta = 0 case free of transcendental rounding.
    with np.errstate(invalid="ignore", over="ignore"):
        return pi >= pi_star * (10.0 ** threshold)


def filter_thematic(
    solution: PageRankSolution,
    baseline: PageRankSolution,
    config: FilterConfig,
    exclude: Iterable[int] = (),
) -> RankedList:
    """Keep nodes whose log10 gain over the unseeded score meets the threshold.

    The result is a subsequence of the full ranking truncated to ``top_k``;
    nodes in ``exclude`` (typically the seeds) are dropped. A node with zero
    unseeded score but positive seeded score has infinite gain and is
    reported.
    """
    pi = solution.scores
    pi_star = baseline.scores
    if pi.shape != pi_star.shape:
        raise InputError("seeded and unseeded solutions differ in size")
    infinite = (pi_star == 0) & (pi > 0)
    if infinite.any():
        warnings.warn(
            f"{int(infinite.sum())} nodes have zero unseeded score; "
            "their gain is treated as +inf",
            stacklevel=2,
        )
    keep = _gain_mask(pi, pi_star, config.threshold)
    excluded = list(set(exclude))
    if excluded:
        keep[excluded] = False
    order = np.argsort(-pi, kind="stable")
    kept = [int(i) for i in order[keep[order]][: config.top_k]]
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = np.log10(pi[kept] / pi_star[kept]) if kept else np.empty(0)
    return RankedList(
        ids=kept,
        scores=pi[kept] if kept else np.empty(0),
        gains=gains,
        provenance={"theta": config.threshold, "top_k": config.top_k},
    )


def _project_to_items(
    filtered: RankedList,
    pi: np.ndarray,
    pi_star: np.ndarray,
    graph: SupraAdjacency,
    item_roles: Sequence[str],
) -> RankedList:
    """Collapse surviving item-role nodes onto entities, summing scores."""
    role_index = {r: i for i, r in enumerate(graph.schema.role_ids)}
    wanted = {role_index[r] for r in item_roles}
    entity_nodes: dict[str, list[int]] = {}
    for node in filtered.ids:
        if int(graph.role_of_node[node]) in wanted:
            entity_id, _ = graph.entity_role_of(node)
            entity_nodes.setdefault(entity_id, []).append(node)
    if not entity_nodes:
        return RankedList(
            ids=[], scores=np.empty(0), gains=np.empty(0),
            provenance=dict(filtered.provenance),
        )
    ids = list(entity_nodes)
    totals = np.array([pi[nodes].sum() for nodes in entity_nodes.values()])
    base_totals = np.array([pi_star[nodes].sum() for nodes in entity_nodes.values()])
    # Deterministic order: score descending, entity-set position ascending.
    positions = np.array([graph.entities.position(e) for e in ids])
    order = np.lexsort((positions, -totals))
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = np.log10(totals[order] / base_totals[order])
    return RankedList(
        ids=[ids[i] for i in order],
        scores=totals[order],
        gains=gains,
        provenance=dict(filtered.provenance),
    )


def recommend(
    graph: SupraAdjacency,
    salience: SalienceMatrix,
    seeds: SeedSpec,
    pagerank_config: PageRankConfig,
    filter_config: FilterConfig,
    item_roles: Sequence[str],
    _state: "PipelineState | None" = None,
) -> RankedList:
    """Full pipeline: teleport vector, seeded solve, rank, filter, project.

    Seeded entities never appear in their own recommendations. The result is
    deterministic for fixed inputs; no randomness is involved.
    """
    state = _state or PipelineState(graph, salience, pagerank_config)
    v = make_teleport_vector(seeds, graph)
    solution = solve_pagerank(state.transition, v, pagerank_config)
    seed_nodes: set[int] = set()
    for seed in seeds.seeds:
        seed_nodes.update(graph.nodes_of_entity(seed.entity_id))
    filtered = filter_thematic(solution, state.baseline, filter_config, seed_nodes)
    ranked = _project_to_items(
        filtered, solution.scores, state.baseline.scores, graph, item_roles
    )
    ranked.provenance.update(
        {
            "seeds": [(s.entity_id, s.role_id, s.weight) for s in seeds.seeds],
            "beta": seeds.mass,
            "rho": pagerank_config.rho,
        }
    )
    return ranked


class PipelineState:
    """Transition matrix and unseeded baseline shared across seeds."""

    def __init__(
        self,
        graph: SupraAdjacency,
        salience: SalienceMatrix,
        pagerank_config: PageRankConfig,
    ):
        self.graph = graph
        self.transition: TransitionMatrix = build_transition_matrix(graph, salience)
        self.baseline: PageRankSolution = unseeded_pagerank(
            self.transition, pagerank_config
        )


def precompute_seed_rankings(
    graph: SupraAdjacency,
    salience: SalienceMatrix,
    pagerank_config: PageRankConfig,
    filter_config: FilterConfig,
    item_roles: Sequence[str],
    seed_items: Sequence[str],
    seed_mass: float = 1.0,
    workers: int = 1,
) -> dict[str, RankedList]:
    """One recommendation list per seed item, sharing the transition matrix.

    Results are identical to calling :func:`recommend` per seed. Per-seed
    failures are logged and the seed omitted from the result map.
    """
    if not seed_items:
        return {}
    state = PipelineState(graph, salience, pagerank_config)

    def run(item: str) -> RankedList:
        spec = SeedSpec([Seed(item)], mass=seed_mass)
        return recommend(
            graph, salience, spec, pagerank_config, filter_config, item_roles,
            _state=state,
        )

    results: dict[str, RankedList] = {}
    unique_items = list(dict.fromkeys(seed_items))
    if workers <= 1:
        for item in unique_items:
            try:
                results[item] = run(item)
            except Exception:
                logger.warning("seed %r failed; skipping", item, exc_info=True)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(item, pool.submit(run, item)) for item in unique_items]
            for item, future in futures:
                try:
                    results[item] = future.result()
                except Exception:
                    logger.warning("seed %r failed; skipping", item, exc_info=True)
    return results
