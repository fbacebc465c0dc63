"""Movie knowledge-graph construction and the ratings filtering pipeline.

Metadata records (popularity, cast with credit order, crew jobs, keywords)
become a five-role multilayer model with popularity-weighted edges; user
ratings pass through a fixed sequence of cleaning steps with per-step counts
reported, then users split uniformly at random into train and test sets.
"""
from __future__ import annotations

import logging
import statistics
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError
from .graph import EntitySet, IntraLayerBlock, Layer, RoleSchema

logger = logging.getLogger(__name__)

PERSON_TYPE = "person"
MOVIE_TYPE = "movie"
KEYWORD_TYPE = "keyword"

ACTOR_ROLE = "act"
DIRECTOR_ROLE = "dir"
PRODUCER_ROLE = "prod"
KEYWORD_ROLE = "desc"
MOVIE_ROLE = "movie"

DIRECTOR_JOBS = ("Director",)
PRODUCER_JOBS = ("Producer",)


@dataclass(frozen=True)
class CastCredit:
    person_id: str
    name: str
    order: int  # 1-based billing position


@dataclass(frozen=True)
class CrewCredit:
    person_id: str
    name: str
    job: str


@dataclass
class MovieRecord:
    """One movie's metadata as ingested from the snapshot files."""

    movie_id: str
    title: str
    popularity: float | None
    cast: tuple[CastCredit, ...] = ()
    crew: tuple[CrewCredit, ...] = ()
    keywords: tuple[str, ...] = ()


@dataclass
class WeightingConfig:
    """Edge-weight parameters for the movie knowledge graph.

    ``gamma`` is the exponent applied to movie popularity; negative values
    invert the effect of popularity and zero discards it. Credit-order
    attenuation divides acting weights by log2(position + 1).
    """

    gamma: float = 30.0
    credit_order_attenuation: bool = True


@dataclass(frozen=True)
class RatingRecord:
    """A single user-item rating event."""

    user_id: str
    item_id: str
    rating: float
    timestamp: int

    def __post_init__(self):
        if not 0 < self.rating <= 5:
            raise InputError(f"rating {self.rating!r} outside (0, 5]")


@dataclass
class PipelineStep:
    description: str
    n_ratings: int
    n_movies: int


@dataclass
class PipelineReport:
    """Per-step record of the ratings filtering pipeline."""

    steps: list[PipelineStep] = field(default_factory=list)

    def add(self, description: str, records: Sequence[RatingRecord]) -> None:
        self.steps.append(
            PipelineStep(description, len(records), len({r.item_id for r in records}))
        )

    def lines(self) -> list[str]:
        width = max((len(s.description) for s in self.steps), default=0)
        out = [f"{'Step':<4} {'Description':<{width}} {'#ratings':>12} {'#movies':>9}"]
        for i, step in enumerate(self.steps, start=1):
            out.append(
                f"#{i:<3} {step.description:<{width}} "
                f"{step.n_ratings:>12,} {step.n_movies:>9,}"
            )
        return out


@dataclass
class RatingsDataset:
    """Per-user relevant items with their relevance scores."""

    users: dict[str, dict[str, float]]

    @property
    def n_ratings(self) -> int:
        return sum(len(items) for items in self.users.values())

    def item_ids(self) -> set[str]:
        return {item for items in self.users.values() for item in items}


def _edge_weight(popularity: float, gamma: float) -> float:
    return float(popularity) ** gamma


def build_movie_kg(
    movies: Sequence[MovieRecord],
    weighting: WeightingConfig,
) -> tuple[EntitySet, RoleSchema, list[IntraLayerBlock]]:
    """Movie KG with roles {act, dir, prod, desc, movie} and weighted layers.

    Connection weights to movie m are popularity ** gamma; acting credits are
    further divided by log2(credit_order + 1). Edges whose weight is zero or
    non-finite (zero-popularity movies) are pruned with a warning, and any
    entity left without edges is dropped.

    Raises
    ------
    InputError
        On a missing popularity score or a non-positive credit order.
    """
    gamma = weighting.gamma
    # edge lists per layer: (target_entity, source_entity, weight)
    edges: dict[str, list[tuple[str, str, float]]] = {
        "acts_in": [],
        "directs": [],
        "produces": [],
        "describes": [],
    }
    person_names: dict[str, str] = {}
    keyword_ids: dict[str, None] = {}
    movie_ids: dict[str, None] = {}
    pruned = 0

    for movie in movies:
        if movie.popularity is None:
            raise InputError(f"movie {movie.movie_id!r} has no popularity score")
        base = _edge_weight(movie.popularity, gamma)
        movie_ids.setdefault(movie.movie_id, None)

        best_cast: dict[str, CastCredit] = {}
        for credit in movie.cast:
            if credit.order <= 0:
                raise InputError(
                    f"movie {movie.movie_id!r}: credit order must be positive "
                    f"(got {credit.order} for {credit.person_id!r})"
                )
            incumbent = best_cast.get(credit.person_id)
            if incumbent is None or credit.order < incumbent.order:
                best_cast[credit.person_id] = credit
        for credit in best_cast.values():
            weight = base
            if weighting.credit_order_attenuation:
                weight = base / np.log2(credit.order + 1)
            if weight > 0 and np.isfinite(weight):
                edges["acts_in"].append((movie.movie_id, credit.person_id, weight))
                person_names[credit.person_id] = credit.name
            else:
                pruned += 1

        seen_crew: set[tuple[str, str]] = set()
        for credit in movie.crew:
            if credit.job in DIRECTOR_JOBS:
                layer = "directs"
            elif credit.job in PRODUCER_JOBS:
                layer = "produces"
            else:
                continue
            if (credit.person_id, layer) in seen_crew:
                continue
            seen_crew.add((credit.person_id, layer))
            if base > 0 and np.isfinite(base):
                edges[layer].append((movie.movie_id, credit.person_id, base))
                person_names[credit.person_id] = credit.name
            else:
                pruned += 1

        for keyword in dict.fromkeys(movie.keywords):
            if base > 0 and np.isfinite(base):
                edges["describes"].append((movie.movie_id, keyword, base))
                keyword_ids.setdefault(keyword, None)
            else:
                pruned += 1

    if pruned:
        warnings.warn(
            f"pruned {pruned} zero-weight or non-finite edges "
            "(zero-popularity movies)",
            stacklevel=2,
        )

    connected: set[str] = set()
    for layer_edges in edges.values():
        for target, source, _ in layer_edges:
            connected.add(target)
            connected.add(source)
    dropped = [m for m in movie_ids if m not in connected]
    if dropped:
        warnings.warn(
            f"dropped {len(dropped)} movies with no usable edges "
            f"(first few: {dropped[:5]})",
            stacklevel=2,
        )

    entity_rows: list[tuple[str, str]] = []
    entity_rows.extend((m, MOVIE_TYPE) for m in movie_ids if m in connected)
    entity_rows.extend((p, PERSON_TYPE) for p in person_names)
    entity_rows.extend((k, KEYWORD_TYPE) for k in keyword_ids)
    entities = EntitySet(entity_rows)

    schema = RoleSchema(
        roles=[
            (MOVIE_ROLE, MOVIE_TYPE),
            (ACTOR_ROLE, PERSON_TYPE),
            (DIRECTOR_ROLE, PERSON_TYPE),
            (PRODUCER_ROLE, PERSON_TYPE),
            (KEYWORD_ROLE, KEYWORD_TYPE),
        ],
        layers=[
            Layer("acts_in", source_role=ACTOR_ROLE, target_role=MOVIE_ROLE),
            Layer("directs", source_role=DIRECTOR_ROLE, target_role=MOVIE_ROLE),
            Layer("produces", source_role=PRODUCER_ROLE, target_role=MOVIE_ROLE),
            Layer("describes", source_role=KEYWORD_ROLE, target_role=MOVIE_ROLE),
        ],
    )

    source_types = {
        "acts_in": PERSON_TYPE,
        "directs": PERSON_TYPE,
        "produces": PERSON_TYPE,
        "describes": KEYWORD_TYPE,
    }
    blocks = []
    n_movies = entities.count_of_type(MOVIE_TYPE)
    for layer_id, layer_edges in edges.items():
        n_source = entities.count_of_type(source_types[layer_id])
        rows = [entities.position(t) for t, _, _ in layer_edges]
        cols = [entities.position(s) for _, s, _ in layer_edges]
        data = [w for _, _, w in layer_edges]
        matrix = sp.coo_matrix(
            (data, (rows, cols)), shape=(n_movies, n_source)
        ).tocsc()
        blocks.append(IntraLayerBlock(layer_id, matrix))
    return entities, schema, blocks


def keyword_sets(movies: Sequence[MovieRecord]) -> dict[str, frozenset]:
    """Keyword set per movie id (for the Dice comparator)."""
    return {m.movie_id: frozenset(m.keywords) for m in movies}


def popularity_scores(movies: Sequence[MovieRecord]) -> dict[str, float]:
    out = {}
    for m in movies:
        if m.popularity is None:
            raise InputError(f"movie {m.movie_id!r} has no popularity score")
        out[m.movie_id] = float(m.popularity)
    return out


@dataclass
class PreprocessConfig:
    """Settings for the ratings filtering pipeline.

    ``links`` maps raw item ids onto knowledge-graph ids (identity when
    None); ``metadata_ids`` are the KG ids with usable metadata. With
    ``median_strict`` a rating must exceed the user's median to survive;
    otherwise equality is enough.
    """

    links: Mapping[str, str] | None = None
    metadata_ids: set[str] | None = None
    median_strict: bool = True
    min_ratings_per_movie: int = 3
    max_ratings_per_user: int = 250


def preprocess_ratings(
    records: Iterable[RatingRecord],
    config: PreprocessConfig,
) -> tuple[RatingsDataset, PipelineReport]:
    """Run the six-step cleaning pipeline and report per-step counts.

    Steps, in order: map/drop items without a KG id; deduplicate per
    (user, item) keeping the latest timestamp; drop movies without metadata;
    keep only ratings above (or at, per config) the user's median; drop
    movies with fewer than ``min_ratings_per_movie`` ratings; keep each
    user's top ``max_ratings_per_user`` ratings.
    """
    report = PipelineReport()

    current: list[RatingRecord] = []
    for record in records:
        if config.links is None:
            current.append(record)
        else:
            mapped = config.links.get(record.item_id)
            if mapped is not None:
                current.append(
                    RatingRecord(record.user_id, mapped, record.rating, record.timestamp)
                )
    report.add("Remove ratings without KG id", current)

    latest: dict[tuple[str, str], RatingRecord] = {}
    for record in current:
        key = (record.user_id, record.item_id)
        incumbent = latest.get(key)
        if incumbent is None or record.timestamp >= incumbent.timestamp:
            latest[key] = record
    current = list(latest.values())
    report.add("Remove duplicates (keeping latest)", current)

    if config.metadata_ids is not None:
        current = [r for r in current if r.item_id in config.metadata_ids]
    report.add("Remove movies without metadata", current)

    by_user: dict[str, list[RatingRecord]] = {}
    for record in current:
        by_user.setdefault(record.user_id, []).append(record)
    kept: list[RatingRecord] = []
    for user_records in by_user.values():
        median = statistics.median(r.rating for r in user_records)
        if config.median_strict:
            kept.extend(r for r in user_records if r.rating > median)
        else:
            kept.extend(r for r in user_records if r.rating >= median)
    current = kept
    report.add("Remove ratings below user median", current)

    counts: dict[str, int] = {}
    for record in current:
        counts[record.item_id] = counts.get(record.item_id, 0) + 1
    current = [
        r for r in current if counts[r.item_id] >= config.min_ratings_per_movie
    ]
    report.add(
        f"Remove movies with {config.min_ratings_per_movie - 1} or fewer ratings",
        current,
    )

    by_user = {}
    for record in current:
        by_user.setdefault(record.user_id, []).append(record)
    kept = []
    for user_records in by_user.values():
        user_records.sort(key=lambda r: (-r.rating, -r.timestamp, r.item_id))
        kept.extend(user_records[: config.max_ratings_per_user])
    current = kept
    report.add(
        f"Keep only top {config.max_ratings_per_user} ratings per user", current
    )

    users: dict[str, dict[str, float]] = {}
    for record in sorted(current, key=lambda r: (r.user_id, r.item_id)):
        users.setdefault(record.user_id, {})[record.item_id] = record.rating
    return RatingsDataset(users), report


def split_train_test(
    users: Sequence[str],
    train_fraction: float,
    rng: np.random.Generator,
) -> tuple[list[str], list[str]]:
    """Disjoint, exhaustive user split; train size is floor(fraction * n)."""
    if not 0 < train_fraction < 1:
        raise InputError(f"train fraction must be in (0, 1), got {train_fraction}")
    ordered = sorted(dict.fromkeys(users))
    if not ordered:
        raise InputError("no users to split")
    permutation = rng.permutation(len(ordered))
    n_train = int(train_fraction * len(ordered))
    train_idx = sorted(permutation[:n_train])
    test_idx = sorted(permutation[n_train:])
    return [ordered[i] for i in train_idx], [ordered[i] for i in test_idx]
