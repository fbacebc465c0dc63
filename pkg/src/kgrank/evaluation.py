"""Offline evaluation of thematic rankings from user-item ratings.

The per-user score rewards only the highest-ranked item the user also finds
relevant: relevance-weighted, log-rank-discounted, and normalised by the best
achievable value, then averaged over every item of the user used as a seed.
Corpus aggregation reports percent-scale means with normal-approximation
confidence intervals. Popularity/random/unseeded baselines and a keyword
Dice comparator use the same scoring path.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError
from .graph import SupraAdjacency, bfs_hop_counts
from .recommend import RankedList

logger = logging.getLogger(__name__)

#: z-value for the two-sided 99% normal confidence interval.
CONFIDENCE_Z = 2.576


@dataclass
class UserRelevance:
    """Items a user finds relevant, with positive relevance scores."""

    user_id: str
    items: dict[str, float]

    def __post_init__(self):
        if len(self.items) < 2:
            raise InputError(
                f"user {self.user_id!r} has fewer than 2 relevant items"
            )
        if any(t <= 0 for t in self.items.values()):
            raise InputError(f"user {self.user_id!r} has non-positive relevance")


def max_relevance_item(
    ranking: Sequence | RankedList,
    relevant: Mapping[str, float] | Iterable[str],
    seed: str,
    k: int | None = None,
) -> tuple[str, int] | None:
    """Highest-ranked relevant item other than the seed, with its 1-based rank.

    Scans the first ``k`` entries (all when ``k`` is None). Returns None when
    no other relevant item appears in the truncated list.
    """
    relevant_set = set(relevant)
    if seed not in relevant_set:
        raise InputError(f"seed {seed!r} is not among the user's relevant items")
    ids = ranking.ids if isinstance(ranking, RankedList) else ranking
    if k is not None:
        ids = ids[:k]
    for position, item in enumerate(ids, start=1):
        if item != seed and item in relevant_set:
            return item, position
    return None


def nmrg_user(
    user: UserRelevance,
    rankings: Mapping[str, Sequence | RankedList],
    k: int | None = None,
) -> float:
    """Per-user score: seed with each relevant item and average the gains.

    A seed whose truncated list contains no other relevant item contributes
    zero, as does a seed with no ranking available (logged). Every term lies
    in [0, 1].
    """
    items = user.items
    if len(items) < 2:
        raise InputError(f"user {user.user_id!r} has fewer than 2 relevant items")
    total = 0.0
    for seed in items:
        ranking = rankings.get(seed)
        if ranking is None:
            logger.debug("no ranking for seed %r (user %r)", seed, user.user_id)
            continue
        hit = max_relevance_item(ranking, items, seed, k)
        if hit is None:
            continue
        best_other = max(t for m, t in items.items() if m != seed)
        item, rank = hit
        total += (items[item] / best_other) / math.log2(1.0 + rank)
    return total / len(items)


@dataclass
class CutoffStats:
    """Percent-scale mean with 99% CI half-width at one cutoff."""

    mean: float
    ci_half_width: float
    n_users: int


@dataclass
class EvalReport:
    """Corpus-level scores per cutoff plus the per-user sample for audit."""

    cutoffs: dict[int, CutoffStats]
    per_user: dict[int, dict[str, float]]
    metadata: dict = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = []
        for k in sorted(self.cutoffs):
            s = self.cutoffs[k]
            out.append(
                f"NMRG@{k}: {s.mean:.2f} (+/-{s.ci_half_width:.2f}), "
                f"n={s.n_users}"
            )
        return out


def nmrg_corpus(
    users: Iterable[UserRelevance],
    rankings: Mapping[str, Sequence | RankedList],
    cutoffs: Sequence[int] = (1, 10, 20),
    metadata: dict | None = None,
) -> EvalReport:
    """Mean score per cutoff over users, on the 0-100 percent scale.

    Users are processed in user_id order so aggregation is deterministic.
    The interval half-width uses the normal approximation over the per-user
    score sample.
    """
    ordered = sorted(users, key=lambda u: u.user_id)
    if not ordered:
        raise InputError("no users to evaluate")
    stats: dict[int, CutoffStats] = {}
    per_user: dict[int, dict[str, float]] = {}
    for k in cutoffs:
        scores = {u.user_id: nmrg_user(u, rankings, k) for u in ordered}
        values = np.array(list(scores.values()))
        mean = float(values.mean()) * 100.0
        if values.size > 1:
            half = CONFIDENCE_Z * float(values.std(ddof=1)) / math.sqrt(values.size)
        else:
            half = 0.0
        stats[int(k)] = CutoffStats(mean, half * 100.0, values.size)
        per_user[int(k)] = scores
    return EvalReport(stats, per_user, metadata or {})


class PopularityTable:
    """Item popularity scores with nearest-popularity lookups."""

    def __init__(self, scores: Mapping[str, float]):
        if not scores:
            raise InputError("popularity table is empty")
        self.scores = {str(k): float(v) for k, v in scores.items()}
        if any(v < 0 or not math.isfinite(v) for v in self.scores.values()):
            raise InputError("popularity scores must be finite and non-negative")
        # Sort by (popularity, id) so ties resolve deterministically.
        self._ordered = sorted(self.scores, key=lambda i: (self.scores[i], i))
        self._values = np.array([self.scores[i] for i in self._ordered])
        self._rank = {item: idx for idx, item in enumerate(self._ordered)}

    def __contains__(self, item: str) -> bool:
        return item in self.scores

    def top(self, k: int, exclude: Iterable[str] = ()) -> list[str]:
        """The k most popular items, most popular first."""
        banned = set(exclude)
        out = []
        for item in reversed(self._ordered):
            if item not in banned:
                out.append(item)
                if len(out) == k:
                    break
        return out

    def similar_items(self, item: str, k: int = 25) -> list[str]:
        """The k items with the closest popularity score, excluding the item.

        Ordered by increasing popularity difference; the lower-popularity
        neighbour wins ties.
        """
        if item not in self._rank:
            raise InputError(f"item {item!r} missing from the popularity table")
        centre = self._rank[item]
        target = self._values[centre]
        left, right = centre - 1, centre + 1
        out: list[str] = []
        n = len(self._ordered)
        while len(out) < k and (left >= 0 or right < n):
            left_diff = target - self._values[left] if left >= 0 else math.inf
            right_diff = self._values[right] - target if right < n else math.inf
            if left_diff <= right_diff:
                out.append(self._ordered[left])
                left -= 1
            else:
                out.append(self._ordered[right])
                right += 1
        return out


def dice_coefficient(a: frozenset | set, b: frozenset | set) -> float:
    """Dice similarity of two sets; empty-vs-anything scores zero."""
    if not a and not b:
        return 0.0
    return 2.0 * len(a & b) / (len(a) + len(b))


@dataclass
class BaselineContext:
    """Inputs shared by the baseline ranking generators."""

    seeds: Sequence[str]
    catalogue: Sequence[str]
    top_k: int
    popularity: PopularityTable | None = None
    rng: np.random.Generator | None = None
    rankings: Mapping[str, RankedList] | None = None
    unseeded_scores: Mapping[str, float] | None = None
    keywords: Mapping[str, frozenset] | None = None
    similar_pool: int = 25


BASELINE_KINDS = ("popularity", "random_seed", "random_item", "unseeded", "keyword_dice")


def baseline_rankings(kind: str, context: BaselineContext) -> dict[str, RankedList]:
    """Per-seed ranked lists for one baseline strategy.

    popularity
        The same most-popular list for every seed, minus the seed itself.
    random_seed
        Swap the seed for a random similar-popularity item and reuse that
        item's thematic ranking.
    random_item
        Keep the seed's thematic ranking but replace every entry with a
        random similar-popularity item, one for one.
    unseeded
        Rank the catalogue by unseeded PageRank score.
    keyword_dice
        Rank the catalogue by Dice similarity of keyword sets to the seed.
    """
    if kind not in BASELINE_KINDS:
        raise InputError(f"unknown baseline {kind!r}")
    if kind in ("popularity", "random_seed", "random_item") and context.popularity is None:
        raise InputError(f"baseline {kind!r} requires a popularity table")
    if kind in ("random_seed", "random_item"):
        if context.rng is None:
            raise InputError(f"baseline {kind!r} requires a random generator")
        if context.rankings is None:
            raise InputError(f"baseline {kind!r} requires precomputed rankings")
    out: dict[str, RankedList] = {}

    if kind == "popularity":
        pool = context.popularity.top(context.top_k + 1)
        for seed in context.seeds:
            ids = [i for i in pool if i != seed][: context.top_k]
            scores = np.array([context.popularity.scores[i] for i in ids])
            out[seed] = RankedList(ids, scores, provenance={"baseline": kind})

    elif kind == "random_seed":
        for seed in context.seeds:
            candidates = context.popularity.similar_items(seed, context.similar_pool)
            surrogate = str(context.rng.choice(candidates))
            base = context.rankings.get(surrogate)
            if base is None:
                logger.warning(
                    "no ranking for surrogate seed %r (seed %r)", surrogate, seed
                )
                base = RankedList([], np.empty(0))
            out[seed] = RankedList(
                list(base.ids),
                np.array(base.scores, copy=True),
                provenance={"baseline": kind, "surrogate": surrogate},
            )

    elif kind == "random_item":
        for seed in context.seeds:
            base = context.rankings.get(seed)
            if base is None:
                logger.warning("no ranking for seed %r", seed)
                base = RankedList([], np.empty(0))
            replaced = [
                str(
                    context.rng.choice(
                        context.popularity.similar_items(item, context.similar_pool)
                    )
                )
                for item in base.ids
            ]
            out[seed] = RankedList(
                replaced,
                np.array(base.scores, copy=True),
                provenance={"baseline": kind},
            )

    elif kind == "unseeded":
        if context.unseeded_scores is None:
            raise InputError("unseeded baseline requires unseeded scores")
        indexed = {item: i for i, item in enumerate(context.catalogue)}
        ordered = sorted(
            context.catalogue,
            key=lambda i: (-context.unseeded_scores.get(i, 0.0), indexed[i]),
        )
        for seed in context.seeds:
            ids = [i for i in ordered if i != seed][: context.top_k]
            scores = np.array([context.unseeded_scores.get(i, 0.0) for i in ids])
            out[seed] = RankedList(ids, scores, provenance={"baseline": kind})

    else:  # keyword_dice
        if context.keywords is None:
            raise InputError("keyword_dice baseline requires keyword sets")
        indexed = {item: i for i, item in enumerate(context.catalogue)}
        for seed in context.seeds:
            seed_kw = context.keywords.get(seed, frozenset())
            scored = [
                (dice_coefficient(seed_kw, context.keywords.get(i, frozenset())), i)
                for i in context.catalogue
                if i != seed
            ]
            scored.sort(key=lambda pair: (-pair[0], indexed[pair[1]]))
            scored = scored[: context.top_k]
            out[seed] = RankedList(
                [i for _, i in scored],
                np.array([s for s, _ in scored]),
                provenance={"baseline": kind},
            )
    return out


@dataclass
class SignalTestResult:
    """Pairwise geodesic distributions for the three sampling conditions."""

    user_distances: np.ndarray
    popularity_matched_distances: np.ndarray
    uniform_random_distances: np.ndarray
    skipped_users: int = 0

    def summary(self) -> dict[str, dict[str, float]]:
        out = {}
        for name, values in (
            ("user", self.user_distances),
            ("popularity_matched", self.popularity_matched_distances),
            ("uniform_random", self.uniform_random_distances),
        ):
            finite = values[np.isfinite(values)]
            out[name] = {
                "pairs": int(values.size),
                "unreachable": int(values.size - finite.size),
                "mean": float(finite.mean()) if finite.size else math.nan,
            }
        return out

    def histograms(self) -> dict[str, dict[int, int]]:
        out = {}
        for name, values in (
            ("user", self.user_distances),
            ("popularity_matched", self.popularity_matched_distances),
            ("uniform_random", self.uniform_random_distances),
        ):
            finite = values[np.isfinite(values)].astype(int)
            counts = np.bincount(finite) if finite.size else np.empty(0, dtype=int)
            out[name] = {d: int(c) for d, c in enumerate(counts) if c}
        return out


def _pairwise_distances(adj, nodes: Sequence[int]) -> list[float]:
    distances = []
    nodes = list(nodes)
    arr = np.array(nodes, dtype=np.int64)
    for i, src in enumerate(nodes[:-1]):
        dist = bfs_hop_counts(adj, src)
        for d in dist[arr[i + 1 :]]:
            distances.append(float(d) if d >= 0 else math.inf)
    return distances


def _popularity_matched_set(
    items: Sequence[str], popularity: PopularityTable, rng: np.random.Generator,
    pool: int = 25,
) -> list[str]:
    chosen: list[str] = []
    taken: set[str] = set(items)
    for item in items:
        width = pool
        candidates = [
            c for c in popularity.similar_items(item, width) if c not in taken
        ]
        while not candidates and width < len(popularity.scores):
            width *= 2
            candidates = [
                c for c in popularity.similar_items(item, width) if c not in taken
            ]
        if not candidates:
            logger.warning("could not popularity-match item %r; keeping it", item)
            chosen.append(item)
            continue
        pick = str(rng.choice(candidates))
        chosen.append(pick)
        taken.add(pick)
    return chosen


def thematic_signal_test(
    users: Sequence[tuple[str, Iterable[str]]],
    graph: SupraAdjacency,
    popularity: PopularityTable,
    rng: np.random.Generator,
    item_role: str = "movie",
) -> SignalTestResult:
    """Compare within-user geodesics against popularity-matched and uniform sets.

    For every sampled user with at least two rated items, pairwise hop counts
    are collected for (i) the user's items, (ii) a random set matched in size
    and popularity, and (iii) a uniform random set of the same size. Users
    with fewer than two resolvable items are skipped with a log entry.
    """
    if not users:
        raise InputError("no users sampled for the signal test")
    adj = graph.undirected_csr()
    catalogue = sorted(popularity.scores)
    user_d: list[float] = []
    matched_d: list[float] = []
    uniform_d: list[float] = []
    skipped = 0

    def resolve(items: Iterable[str]) -> list[int]:
        nodes = []
        for item in items:
            try:
                nodes.append(graph.node_of(item, item_role))
            except Exception:
                logger.debug("item %r not resolvable in role %r", item, item_role)
        return nodes

    for user_id, raw_items in users:
        items = [i for i in dict.fromkeys(raw_items) if i in popularity]
        nodes = resolve(items)
        if len(nodes) < 2:
            logger.info("user %r skipped: fewer than 2 resolvable items", user_id)
            skipped += 1
            continue
        user_d.extend(_pairwise_distances(adj, nodes))
        matched = _popularity_matched_set(items, popularity, rng)
        matched_d.extend(_pairwise_distances(adj, resolve(matched)))
        uniform = rng.choice(catalogue, size=len(items), replace=False)
        uniform_d.extend(_pairwise_distances(adj, resolve(uniform)))
    return SignalTestResult(
        np.array(user_d),
        np.array(matched_d),
        np.array(uniform_d),
        skipped_users=skipped,
    )
