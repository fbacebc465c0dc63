"""Command-line interface wiring the library modules together.

Subcommands: build, ingest, recommend, evaluate, tune, sweep, signal-test.
Settings come from defaults, an optional YAML config file, and flags, in
increasing order of precedence. Every output embeds the hash of the
configuration that produced it, and all randomness stems from the configured
seed, so repeated runs are byte-identical.
"""
from __future__ import annotations

import argparse
import dataclasses
import difflib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import storage
from .dynamics import (
    PageRankConfig,
    SalienceMatrix,
    build_transition_matrix,
    unseeded_pagerank,
)
from .errors import InputError, KgrankError, UnknownEntityError
from .evaluation import (
    BASELINE_KINDS,
    BaselineContext,
    PopularityTable,
    UserRelevance,
    baseline_rankings,
    nmrg_corpus,
    thematic_signal_test,
)
from .graph import SupraAdjacency, build_supra_adjacency
from .ingestion import (
    MOVIE_ROLE,
    PreprocessConfig,
    RatingsDataset,
    WeightingConfig,
    build_movie_kg,
    keyword_sets,
    popularity_scores,
    preprocess_ratings,
    split_train_test,
)
from .recommend import (
    FilterConfig,
    RankedList,
    Seed,
    SeedSpec,
    precompute_seed_rankings,
    recommend,
)
from .tuning import ParamSample, nmrg_evaluator, random_search, teleport_sweep

logger = logging.getLogger(__name__)

CACHE_ENV_VAR = "KGRANK_CACHE_DIR"

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_UNKNOWN_ENTITY = 3


@dataclass
class RunConfig:
    """Paths and numeric settings shared by all subcommands."""

    graph: str | None = None
    salience: str | None = None
    ratings: str | None = None
    metadata: str | None = None
    links: str | None = None
    schema: str | None = None
    edges: str | None = None
    cache_dir: str | None = None
    output: str | None = None
    rho: float = 0.15
    tolerance: float = 1e-10
    solver: str = "linear"
    max_iterations: int = 10_000
    theta: float = 0.0
    top_k: int = 300
    seed_mass: float = 1.0
    item_roles: tuple[str, ...] = (MOVIE_ROLE,)
    cutoffs: tuple[int, ...] = (1, 10, 20)
    train_fraction: float = 0.75
    gamma: float = 30.0
    median_strict: bool = True
    rng_seed: int = 0
    workers: int = 1

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as handle:
            raw = yaml.safe_load(handle) or {}
        if not isinstance(raw, dict):
            raise InputError(f"config file {path} must hold a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InputError(f"config file {path}: unknown keys {sorted(unknown)}")
        for key in ("item_roles", "cutoffs"):
            if key in raw and raw[key] is not None:
                raw[key] = tuple(raw[key])
        # YAML 1.1 reads bare scientific notation like 1e-10 as a string
        for key, cast in (
            ("rho", float), ("tolerance", float), ("theta", float),
            ("seed_mass", float), ("train_fraction", float), ("gamma", float),
            ("max_iterations", int), ("top_k", int), ("rng_seed", int),
            ("workers", int),
        ):
            if raw.get(key) is not None:
                try:
                    raw[key] = cast(raw[key])
                except (TypeError, ValueError):
                    raise InputError(
                        f"config file {path}: {key} must be a number"
                    ) from None
        return cls(**raw)

    def hash(self) -> str:
        payload = dataclasses.asdict(self)
        # Parallelism and output locations do not affect results; keeping
        # them out lets reruns with different worker counts or cache
        # directories produce byte-identical artefacts.
        for volatile in ("workers", "cache_dir", "output"):
            payload.pop(volatile)
        return storage.dict_hash(payload)

    def pagerank_config(self) -> PageRankConfig:
        return PageRankConfig(
            rho=self.rho,
            solver=self.solver,
            tolerance=self.tolerance,
            max_iterations=self.max_iterations,
        )

    def filter_config(self) -> FilterConfig:
        return FilterConfig(threshold=self.theta, top_k=self.top_k)

    def effective_cache_dir(self) -> Path:
        override = os.environ.get(CACHE_ENV_VAR)
        if override:
            return Path(override)
        if self.cache_dir:
            return Path(self.cache_dir)
        return Path(".kgrank-cache")


def _require(config: RunConfig, *names: str) -> None:
    for name in names:
        value = getattr(config, name)
        if value is None:
            raise InputError(f"missing required setting --{name.replace('_', '-')}")
        if name in ("graph", "salience", "ratings", "metadata", "links",
                    "schema", "edges") and not Path(value).exists():
            raise InputError(f"{name} path does not exist: {value}")


def _parse_seed(text: str) -> Seed:
    parts = text.split(":")
    if len(parts) == 1:
        return Seed(parts[0])
    if len(parts) == 2:
        return Seed(parts[0], parts[1] or None)
    if len(parts) == 3:
        try:
            weight = float(parts[2])
        except ValueError:
            raise InputError(f"bad seed weight in {text!r}") from None
        return Seed(parts[0], parts[1] or None, weight)
    raise InputError(f"seed {text!r} is not of the form entity[:role[:weight]]")


def _parse_grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"grid {text!r} is not of the form start:stop:count")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"grid {text!r} has non-numeric parts") from None
    if count < 1:
        raise InputError("grid count must be at least 1")
    return [float(x) for x in np.linspace(start, stop, count)]


def _load_users(config: RunConfig) -> RatingsDataset:
    records, _ = storage.load_ratings(config.ratings)
    users: dict[str, dict[str, float]] = {}
    for record in records:
        users.setdefault(record.user_id, {})[record.item_id] = record.rating
    if not users:
        raise InputError(f"no usable ratings in {config.ratings}")
    return RatingsDataset(users)


def _test_users(config: RunConfig, dataset: RatingsDataset) -> list[UserRelevance]:
    rng = np.random.default_rng(config.rng_seed)
    _, test_ids = split_train_test(list(dataset.users), config.train_fraction, rng)
    return _eligible(dataset, test_ids)


def _train_users(config: RunConfig, dataset: RatingsDataset) -> list[UserRelevance]:
    rng = np.random.default_rng(config.rng_seed)
    train_ids, _ = split_train_test(list(dataset.users), config.train_fraction, rng)
    return _eligible(dataset, train_ids)


def _eligible(dataset: RatingsDataset, user_ids) -> list[UserRelevance]:
    users = []
    skipped = 0
    for user_id in user_ids:
        items = dataset.users[user_id]
        if len(items) < 2:
            skipped += 1
            continue
        users.append(UserRelevance(user_id, dict(items)))
    if skipped:
        logger.info("excluded %d users with fewer than 2 relevant items", skipped)
    if not users:
        raise InputError("no users with at least 2 relevant items")
    return users


def _ensure_rankings(
    config: RunConfig,
    graph: SupraAdjacency,
    salience: SalienceMatrix,
    seeds: list[str],
) -> dict[str, RankedList]:
    """Load per-seed rankings from the cache, computing whatever is missing."""
    key = storage.rankings_cache_key(
        graph.content_hash(),
        salience.content_hash(),
        config.rho,
        config.theta,
        config.top_k,
        config.seed_mass,
        config.solver,
        config.tolerance,
    )
    cache_dir = config.effective_cache_dir()
    path = storage.rankings_cache_path(cache_dir, key)
    rankings: dict[str, RankedList] = {}
    if path.exists():
        rankings = storage.load_rankings(path, key)
        logger.info("loaded %d cached rankings from %s", len(rankings), path)
    missing = [s for s in seeds if s not in rankings]
    if missing:
        fresh = precompute_seed_rankings(
            graph,
            salience,
            config.pagerank_config(),
            config.filter_config(),
            config.item_roles,
            missing,
            seed_mass=config.seed_mass,
            workers=config.workers,
        )
        rankings.update(fresh)
        storage.save_rankings(path, rankings, key)
    return {s: rankings[s] for s in seeds if s in rankings}


def _item_scores(
    config: RunConfig, graph: SupraAdjacency, salience: SalienceMatrix
) -> dict[str, float]:
    """Unseeded PageRank projected onto item entities."""
    transition = build_transition_matrix(graph, salience)
    solution = unseeded_pagerank(transition, config.pagerank_config())
    wanted = set(config.item_roles)
    scores: dict[str, float] = {}
    for role in graph.schema.role_ids:
        if role not in wanted:
            continue
        start, size = graph.role_offsets[role]
        ids = graph.entities.ids_of_type(graph.schema.entity_type_of(role))
        for offset, entity_id in enumerate(ids[:size]):
            scores[entity_id] = scores.get(entity_id, 0.0) + float(
                solution.scores[start + offset]
            )
    return scores


def _write_lines(path: Path | None, lines: list[str]) -> None:
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


# -- subcommands ---------------------------------------------------------------

def cmd_build(config: RunConfig) -> int:
    _require(config, "output")
    if config.metadata is not None:
        _require(config, "metadata")
        movies = storage.load_metadata(config.metadata)
        entities, schema, blocks = build_movie_kg(
            movies, WeightingConfig(gamma=config.gamma)
        )
    elif config.schema is not None or config.edges is not None:
        _require(config, "schema", "edges")
        schema = storage.load_schema(config.schema)
        entities, blocks = storage.load_edges(config.edges, schema)
    else:
        raise InputError("build needs either --metadata or --schema with --edges")
    graph = build_supra_adjacency(entities, schema, blocks)
    graph_hash = storage.save_graph(graph, config.output)
    meta_path = Path(config.output) / "meta.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    meta["config_hash"] = config.hash()
    meta_path.write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"built graph with {graph.n} nodes ({graph.entities.type_counts})")
    print(f"graph_hash: {graph_hash}")
    return EXIT_OK


def cmd_ingest(config: RunConfig) -> int:
    _require(config, "ratings", "output")
    records, _ = storage.load_ratings(config.ratings)
    links = storage.load_links(config.links) if config.links else None
    metadata_ids = None
    if config.metadata:
        metadata_ids = {m.movie_id for m in storage.load_metadata(config.metadata)}
    dataset, report = preprocess_ratings(
        records,
        PreprocessConfig(
            links=links,
            metadata_ids=metadata_ids,
            median_strict=config.median_strict,
        ),
    )
    out_dir = Path(config.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    flattened = [
        # timestamps were consumed by the pipeline; keep a stable zero here
        (user_id, item_id, rating)
        for user_id, items in sorted(dataset.users.items())
        for item_id, rating in sorted(items.items())
    ]
    with open(out_dir / "ratings_clean.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("user_id,item_id,rating,timestamp\n")
        for user_id, item_id, rating in flattened:
            fh.write(f"{user_id},{item_id},{rating!r},0\n")
    report_lines = [f"# config_hash: {config.hash()}"] + report.lines()
    _write_lines(out_dir / "pipeline_report.txt", report_lines)
    payload = {
        "config_hash": config.hash(),
        "dataset_hash": storage.file_sha256(out_dir / "ratings_clean.csv"),
        "steps": [dataclasses.asdict(s) for s in report.steps],
    }
    (out_dir / "pipeline_report.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for line in report.lines():
        print(line)
    return EXIT_OK


def cmd_recommend(config: RunConfig, seed_texts: list[str]) -> int:
    _require(config, "graph", "salience")
    if not seed_texts:
        raise InputError("recommend needs at least one --seed")
    graph = storage.load_graph(config.graph)
    salience = storage.load_salience(config.salience)
    seeds = SeedSpec([_parse_seed(t) for t in seed_texts], mass=config.seed_mass)
    try:
        ranked = recommend(
            graph,
            salience,
            seeds,
            config.pagerank_config(),
            config.filter_config(),
            config.item_roles,
        )
    except UnknownEntityError as exc:
        known = [e for e, _ in graph.entities.entities]
        requested = [s.entity_id for s in seeds.seeds]
        near = sorted(
            {
                match
                for wanted in requested
                for match in difflib.get_close_matches(wanted, known, n=3)
            }
        )
        hint = f"; close matches: {near}" if near else ""
        raise UnknownEntityError(f"{exc}{hint}") from exc
    lines = [
        f"# config_hash: {config.hash()}",
        f"# seeds: {';'.join(seed_texts)}",
        "rank\tentity_id\tscore\tlog10_gain",
    ]
    for position, (entity_id, score, gain) in enumerate(ranked, start=1):
        gain_text = repr(float(gain)) if gain is not None else "nan"
        lines.append(f"{position}\t{entity_id}\t{float(score)!r}\t{gain_text}")
    _write_lines(Path(config.output) if config.output else None, lines)
    return EXIT_OK


def _evaluation_rankings(
    config: RunConfig,
    method: str,
    graph: SupraAdjacency,
    salience: SalienceMatrix,
    users: list[UserRelevance],
) -> dict[str, RankedList]:
    seed_items = sorted({item for u in users for item in u.items})
    if method == "thematic":
        return _ensure_rankings(config, graph, salience, seed_items)

    context_kwargs: dict = {
        "seeds": seed_items,
        "top_k": config.top_k,
        "rng": np.random.default_rng(config.rng_seed),
    }
    if method in ("popularity", "random_seed", "random_item"):
        _require(config, "metadata")
        movies = storage.load_metadata(config.metadata)
        popularity = PopularityTable(popularity_scores(movies))
        context_kwargs["popularity"] = popularity
        context_kwargs["catalogue"] = sorted(popularity.scores)
        if method in ("random_seed", "random_item"):
            # surrogate seeds can be any catalogue item, so rankings must
            # cover all of it (shared with the thematic cache)
            context_kwargs["rankings"] = _ensure_rankings(
                config, graph, salience, context_kwargs["catalogue"]
            )
    elif method == "unseeded":
        scores = _item_scores(config, graph, salience)
        context_kwargs["unseeded_scores"] = scores
        context_kwargs["catalogue"] = sorted(scores)
    else:  # keyword_dice
        _require(config, "metadata")
        movies = storage.load_metadata(config.metadata)
        context_kwargs["keywords"] = keyword_sets(movies)
        context_kwargs["catalogue"] = sorted(m.movie_id for m in movies)
    return baseline_rankings(method, BaselineContext(**context_kwargs))


def cmd_evaluate(config: RunConfig, method: str) -> int:
    _require(config, "graph", "salience", "ratings")
    if method != "thematic" and method not in BASELINE_KINDS:
        raise InputError(f"unknown evaluation method {method!r}")
    graph = storage.load_graph(config.graph)
    salience = storage.load_salience(config.salience)
    dataset = _load_users(config)
    users = _test_users(config, dataset)
    rankings = _evaluation_rankings(config, method, graph, salience, users)
    report = nmrg_corpus(
        users,
        rankings,
        config.cutoffs,
        metadata={
            "method": method,
            "config_hash": config.hash(),
            "rng_seed": config.rng_seed,
        },
    )
    lines = [
        f"# kgrank evaluate method={method}",
        f"# config_hash: {config.hash()}",
        f"# rng_seed: {config.rng_seed}",
    ] + report.lines()
    for line in lines:
        print(line)
    if config.output:
        out_dir = Path(config.output)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_lines(out_dir / f"eval_{method}.txt", lines)
        payload = {
            "method": method,
            "config_hash": config.hash(),
            "rng_seed": config.rng_seed,
            "cutoffs": {
                str(k): dataclasses.asdict(s) for k, s in report.cutoffs.items()
            },
            "per_user": {str(k): report.per_user[k] for k in report.per_user},
        }
        (out_dir / f"eval_{method}.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def cmd_tune(config: RunConfig, n_trials: int, max_users: int | None) -> int:
    _require(config, "graph", "ratings", "output")
    graph = storage.load_graph(config.graph)
    dataset = _load_users(config)
    users = _train_users(config, dataset)
    evaluator = nmrg_evaluator(
        graph,
        users,
        config.item_roles,
        config.filter_config(),
        cutoffs=config.cutoffs,
        tolerance=config.tolerance,
        solver=config.solver,
        max_iterations=config.max_iterations,
        seed_mass=config.seed_mass,
        workers=config.workers,
        max_users=max_users,
    )
    out_dir = Path(config.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.rng_seed)
    result = random_search(
        graph.structure_block_keys(),
        n_trials,
        evaluator,
        rng,
        log_path=out_dir / "search_log.jsonl",
    )
    if result.best is None:
        raise KgrankError("no trial produced a score")
    storage.save_salience(result.best.params.salience, out_dir / "best_salience.csv")
    summary = {
        "config_hash": config.hash(),
        "rng_seed": config.rng_seed,
        "n_trials": n_trials,
        "objective": f"nmrg@{result.objective}",
        "best": {
            **result.best.params.to_record(),
            "scores": result.best.scores,
        },
        "trajectory": result.trajectory,
    }
    (out_dir / "search_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"best nmrg@{result.objective}: "
        f"{result.best.scores[result.objective]:.4f} "
        f"(rho={result.best.params.rho:.4f}) over {n_trials} trials"
    )
    return EXIT_OK


def cmd_sweep(config: RunConfig, grid_text: str | None, max_users: int | None) -> int:
    _require(config, "graph", "salience", "ratings", "output")
    graph = storage.load_graph(config.graph)
    salience = storage.load_salience(config.salience)
    dataset = _load_users(config)
    users = _train_users(config, dataset)
    grid = (
        _parse_grid(grid_text)
        if grid_text
        else [float(x) for x in np.geomspace(0.01, 0.9, 20)]
    )
    evaluator = nmrg_evaluator(
        graph,
        users,
        config.item_roles,
        config.filter_config(),
        cutoffs=config.cutoffs,
        tolerance=config.tolerance,
        solver=config.solver,
        max_iterations=config.max_iterations,
        seed_mass=config.seed_mass,
        workers=config.workers,
        max_users=max_users,
    )
    result = teleport_sweep(ParamSample(salience, config.rho), grid, evaluator)
    out_dir = Path(config.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"# config_hash: {config.hash()}", "rho," + ",".join(
        f"nmrg@{k}" for k in config.cutoffs
    )]
    for point in result.points:
        values = ",".join(repr(point.scores.get(k, math.nan)) for k in config.cutoffs)
        lines.append(f"{point.rho!r},{values}")
    lines.append(f"# best_rho: {result.best_rho!r}")
    _write_lines(out_dir / "teleport_sweep.csv", lines)
    print(f"best rho: {result.best_rho!r}")
    return EXIT_OK


def cmd_signal_test(config: RunConfig, n_users: int) -> int:
    _require(config, "graph", "ratings", "metadata")
    graph = storage.load_graph(config.graph)
    dataset = _load_users(config)
    movies = storage.load_metadata(config.metadata)
    popularity = PopularityTable(popularity_scores(movies))
    rng = np.random.default_rng(config.rng_seed)
    eligible = sorted(
        user_id for user_id, items in dataset.users.items() if len(items) >= 2
    )
    if not eligible:
        raise InputError("no users with at least 2 rated items")
    size = min(n_users, len(eligible))
    sample_ids = [eligible[i] for i in sorted(rng.choice(len(eligible), size=size, replace=False))]
    sample = [(user_id, sorted(dataset.users[user_id])) for user_id in sample_ids]
    result = thematic_signal_test(
        sample, graph, popularity, rng, item_role=config.item_roles[0]
    )
    summary = result.summary()
    payload = {
        "config_hash": config.hash(),
        "rng_seed": config.rng_seed,
        "n_users_sampled": size,
        "skipped_users": result.skipped_users,
        "summary": summary,
        "histograms": {
            name: {str(d): c for d, c in hist.items()}
            for name, hist in result.histograms().items()
        },
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if config.output:
        out_dir = Path(config.output)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "signal_test.json").write_text(text, encoding="utf-8")
    for name, stats in summary.items():
        print(
            f"{name}: mean={stats['mean']:.3f} over {stats['pairs']} pairs "
            f"({stats['unreachable']} unreachable)"
        )
    return EXIT_OK


# -- argument plumbing ---------------------------------------------------------

_OVERRIDE_FLAGS: list[tuple[str, str, type]] = [
    ("--graph", "graph", str),
    ("--salience", "salience", str),
    ("--ratings", "ratings", str),
    ("--metadata", "metadata", str),
    ("--links", "links", str),
    ("--schema", "schema", str),
    ("--edges", "edges", str),
    ("--cache-dir", "cache_dir", str),
    ("--out", "output", str),
    ("--rho", "rho", float),
    ("--tolerance", "tolerance", float),
    ("--solver", "solver", str),
    ("--theta", "theta", float),
    ("--top-k", "top_k", int),
    ("--seed-mass", "seed_mass", float),
    ("--train-fraction", "train_fraction", float),
    ("--gamma", "gamma", float),
    ("--seed-rng", "rng_seed", int),
    ("--workers", "workers", int),
]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file")
    for flag, dest, kind in _OVERRIDE_FLAGS:
        if kind is float:
            parser.add_argument(flag, dest=dest, type=_parse_float, default=None)
        else:
            parser.add_argument(flag, dest=dest, type=kind, default=None)
    parser.add_argument(
        "--cutoffs", dest="cutoffs", default=None,
        help="comma-separated ranking cutoffs (default 1,10,20)",
    )
    parser.add_argument(
        "--median-strict", dest="median_strict", action="store_true", default=None
    )
    parser.add_argument(
        "--no-median-strict", dest="median_strict", action="store_false", default=None
    )
    parser.add_argument(
        "--item-roles", dest="item_roles", default=None,
        help="comma-separated roles treated as items (default movie)",
    )


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    updates: dict = {}
    for _, dest, _ in _OVERRIDE_FLAGS:
        value = getattr(args, dest, None)
        if value is not None:
            updates[dest] = value
    if getattr(args, "median_strict", None) is not None:
        updates["median_strict"] = args.median_strict
    if getattr(args, "cutoffs", None) is not None:
        try:
            updates["cutoffs"] = tuple(int(c) for c in args.cutoffs.split(","))
        except ValueError:
            raise InputError(f"bad cutoffs {args.cutoffs!r}") from None
    if getattr(args, "item_roles", None) is not None:
        updates["item_roles"] = tuple(
            r.strip() for r in args.item_roles.split(",") if r.strip()
        )
    return dataclasses.replace(config, **updates)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgrank",
        description="Thematic recommendations on multilayer knowledge-graph models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build", help="build graph artifacts")
    _add_common(p_build)

    p_ingest = sub.add_parser("ingest", help="run the ratings filtering pipeline")
    _add_common(p_ingest)

    p_rec = sub.add_parser("recommend", help="rank items for seed entities")
    _add_common(p_rec)
    p_rec.add_argument(
        "--seed", action="append", default=[], metavar="ENTITY[:ROLE[:WEIGHT]]"
    )

    p_eval = sub.add_parser("evaluate", help="offline evaluation on the test split")
    _add_common(p_eval)
    p_eval.add_argument(
        "--method", default="thematic", choices=("thematic",) + BASELINE_KINDS
    )

    p_tune = sub.add_parser("tune", help="random search over salience and teleport")
    _add_common(p_tune)
    p_tune.add_argument("--trials", type=int, default=10)
    p_tune.add_argument("--max-users", type=int, default=None)

    p_sweep = sub.add_parser("sweep", help="teleport probability sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--grid", default=None, metavar="START:STOP:COUNT")
    p_sweep.add_argument("--max-users", type=int, default=None)

    p_signal = sub.add_parser("signal-test", help="within-user geodesic comparison")
    _add_common(p_signal)
    p_signal.add_argument("--users", type=int, default=1000)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("KGRANK_LOG_LEVEL", "WARNING"),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "build":
            return cmd_build(config)
        if args.command == "ingest":
            return cmd_ingest(config)
        if args.command == "recommend":
            return cmd_recommend(config, args.seed)
        if args.command == "evaluate":
            return cmd_evaluate(config, args.method)
        if args.command == "tune":
            return cmd_tune(config, args.trials, args.max_users)
        if args.command == "sweep":
            return cmd_sweep(config, args.grid, args.max_users)
        if args.command == "signal-test":
            return cmd_signal_test(config, args.users)
        parser.error(f"unknown command {args.command!r}")
    except UnknownEntityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN_ENTITY
    except (InputError, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except KgrankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        import traceback

        traceback.print_exc()
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
