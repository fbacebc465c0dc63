"""File formats: schema, edges, salience, ratings, metadata, and artifacts.

All artefact writers embed content hashes so downstream caches can key on
exactly what produced them. Formats are plain CSV/YAML/JSON so they remain
inspectable.
"""
from __future__ import annotations

import csv
import gzip
import hashlib
import json
import logging
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import yaml

from .dynamics import SalienceMatrix
from .errors import InputError
from .graph import (
    EntitySet,
    IntraLayerBlock,
    Layer,
    RoleSchema,
    SupraAdjacency,
    build_supra_adjacency,
)
from .ingestion import CastCredit, CrewCredit, MovieRecord, RatingRecord
from .recommend import RankedList

logger = logging.getLogger(__name__)

ARTIFACT_VERSION = 1


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def dict_hash(payload: Mapping) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode()
    ).hexdigest()


# -- schema and edge files ---------------------------------------------------

def load_schema(path: str | Path) -> RoleSchema:
    """Role/layer declarations from a YAML file."""
    with open(path, "r", encoding="utf-8") as handle:
        raw = yaml.safe_load(handle)
    if not isinstance(raw, dict) or "roles" not in raw or "layers" not in raw:
        raise InputError(f"schema file {path} must declare 'roles' and 'layers'")
    try:
        roles = [(str(r["id"]), str(r["entity_type"])) for r in raw["roles"]]
        layers = [
            Layer(
                str(l["id"]),
                source_role=str(l["source"]),
                target_role=str(l["target"]),
                directed=bool(l.get("directed", False)),
            )
            for l in raw["layers"]
        ]
    except (KeyError, TypeError) as exc:
        raise InputError(f"schema file {path} is malformed: {exc}") from exc
    return RoleSchema(roles, layers)


def save_schema(schema: RoleSchema, path: str | Path) -> None:
    payload = {
        "roles": [{"id": r, "entity_type": t} for r, t in schema.roles],
        "layers": [
            {
                "id": l.id,
                "source": l.source_role,
                "target": l.target_role,
                "directed": l.directed,
            }
            for l in schema.layers
        ],
    }
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(payload, handle, sort_keys=False)


EDGE_HEADER = ["layer_id", "source_entity_id", "target_entity_id", "weight"]


def load_edges(
    path: str | Path, schema: RoleSchema
) -> tuple[EntitySet, list[IntraLayerBlock]]:
    """Edge list CSV -> entity set (first-appearance order) and layer blocks.

    Entity types are inferred from the roles at each layer's endpoints; an
    entity appearing with two different types is an error.
    """
    layer_by_id = {l.id: l for l in schema.layers}
    entity_types: dict[str, str] = {}
    order: list[str] = []
    edges: dict[str, list[tuple[str, str, float]]] = {l.id: [] for l in schema.layers}

    def note(entity_id: str, entity_type: str, line: int) -> None:
        seen = entity_types.get(entity_id)
        if seen is None:
            entity_types[entity_id] = entity_type
            order.append(entity_id)
        elif seen != entity_type:
            raise InputError(
                f"{path}:{line}: entity {entity_id!r} appears as both "
                f"{seen!r} and {entity_type!r}"
            )

    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != EDGE_HEADER:
            raise InputError(
                f"edge file {path} must start with header {','.join(EDGE_HEADER)}"
            )
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise InputError(f"{path}:{line}: expected 4 fields, got {len(row)}")
            layer_id, source_id, target_id, weight_text = (c.strip() for c in row)
            layer = layer_by_id.get(layer_id)
            if layer is None:
                raise InputError(f"{path}:{line}: unknown layer {layer_id!r}")
            try:
                weight = float(weight_text)
            except ValueError:
                raise InputError(
                    f"{path}:{line}: bad weight {weight_text!r}"
                ) from None
            note(source_id, schema.entity_type_of(layer.source_role), line)
            note(target_id, schema.entity_type_of(layer.target_role), line)
            edges[layer_id].append((target_id, source_id, weight))

    entities = EntitySet((e, entity_types[e]) for e in order)
    blocks = []
    for layer in schema.layers:
        n_target = entities.count_of_type(schema.entity_type_of(layer.target_role))
        n_source = entities.count_of_type(schema.entity_type_of(layer.source_role))
        triples = edges[layer.id]
        matrix = sp.coo_matrix(
            (
                [w for _, _, w in triples],
                (
                    [entities.position(t) for t, _, _ in triples],
                    [entities.position(s) for _, s, _ in triples],
                ),
            ),
            shape=(n_target, n_source),
        ).tocsc()
        blocks.append(IntraLayerBlock(layer.id, matrix))
    return entities, blocks


def save_edges(
    path: str | Path,
    schema: RoleSchema,
    entities: EntitySet,
    blocks: Sequence[IntraLayerBlock],
) -> None:
    layer_by_id = {l.id: l for l in schema.layers}
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(EDGE_HEADER)
        for block in blocks:
            layer = layer_by_id[block.layer_id]
            source_ids = entities.ids_of_type(
                schema.entity_type_of(layer.source_role)
            )
            target_ids = entities.ids_of_type(
                schema.entity_type_of(layer.target_role)
            )
            coo = sp.coo_matrix(block.matrix)
            for r, c, w in zip(coo.row, coo.col, coo.data):
                writer.writerow([block.layer_id, source_ids[c], target_ids[r], repr(float(w))])


# -- salience files ----------------------------------------------------------

SALIENCE_HEADER = ["target_role", "source_role", "value"]


def load_salience(path: str | Path) -> SalienceMatrix:
    blocks: dict[tuple[str, str], float] = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != SALIENCE_HEADER:
            raise InputError(
                f"salience file {path} must start with header "
                f"{','.join(SALIENCE_HEADER)}"
            )
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise InputError(f"{path}:{line}: expected 3 fields")
            target, source, value_text = (c.strip() for c in row)
            key = (target, source)
            if key in blocks:
                raise InputError(f"{path}:{line}: duplicate block {key}")
            try:
                blocks[key] = float(value_text)
            except ValueError:
                raise InputError(f"{path}:{line}: bad value {value_text!r}") from None
    if not blocks:
        raise InputError(f"salience file {path} defines no blocks")
    return SalienceMatrix(blocks)


def save_salience(salience: SalienceMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SALIENCE_HEADER)
        for (target, source), value in sorted(salience.blocks.items()):
            writer.writerow([target, source, repr(value)])


def load_reference_parameters() -> tuple[SalienceMatrix, float]:
    """Bundled best-known salience table and teleport probability."""
    text = (
        resources.files("kgrank") / "data" / "tmdb_reference.yaml"
    ).read_text(encoding="utf-8")
    raw = yaml.safe_load(text)
    blocks = {
        (str(b["target"]), str(b["source"])): float(b["value"])
        for b in raw["salience"]
    }
    return SalienceMatrix(blocks), float(raw["teleport"])


# -- ratings and metadata ----------------------------------------------------

RATINGS_HEADER = ["user_id", "item_id", "rating", "timestamp"]


def load_ratings(path: str | Path) -> tuple[list[RatingRecord], int]:
    """Rating records from CSV; malformed rows are counted and skipped."""
    records: list[RatingRecord] = []
    skipped = 0
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != RATINGS_HEADER:
            raise InputError(
                f"ratings file {path} must start with header "
                f"{','.join(RATINGS_HEADER)}"
            )
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            try:
                user_id, item_id, rating_text, ts_text = (c.strip() for c in row)
                records.append(
                    RatingRecord(user_id, item_id, float(rating_text), int(ts_text))
                )
            except (ValueError, InputError):
                skipped += 1
    if skipped:
        logger.warning("skipped %d malformed rating rows in %s", skipped, path)
    return records, skipped


def save_ratings(records: Iterable[RatingRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(RATINGS_HEADER)
        for r in records:
            writer.writerow([r.user_id, r.item_id, repr(r.rating), r.timestamp])


def load_links(path: str | Path) -> dict[str, str]:
    """item_id -> kg_id mapping; rows with an empty kg_id add no mapping."""
    links: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header][:2] != ["item_id", "kg_id"]:
            raise InputError(f"links file {path} must start with header item_id,kg_id")
        for row in reader:
            if len(row) < 2:
                continue
            item_id, kg_id = row[0].strip(), row[1].strip()
            if item_id and kg_id:
                links[item_id] = kg_id
    return links


def load_metadata(path: str | Path) -> list[MovieRecord]:
    """Movie metadata from a JSON-lines file (or a directory holding movies.jsonl)."""
    path = Path(path)
    if path.is_dir():
        path = path / "movies.jsonl"
    if not path.exists():
        raise InputError(f"metadata file {path} does not exist")
    movies: list[MovieRecord] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            try:
                keywords = tuple(
                    str(k["id"]) if isinstance(k, dict) else str(k)
                    for k in raw.get("keywords", ())
                )
                movies.append(
                    MovieRecord(
                        movie_id=str(raw["id"]),
                        title=str(raw.get("title", raw["id"])),
                        popularity=(
                            float(raw["popularity"])
                            if raw.get("popularity") is not None
                            else None
                        ),
                        cast=tuple(
                            CastCredit(
                                str(c["person_id"]), str(c.get("name", c["person_id"])),
                                int(c["order"]),
                            )
                            for c in raw.get("cast", ())
                        ),
                        crew=tuple(
                            CrewCredit(
                                str(c["person_id"]), str(c.get("name", c["person_id"])),
                                str(c["job"]),
                            )
                            for c in raw.get("crew", ())
                        ),
                        keywords=keywords,
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{path}:{line_no}: malformed movie record: {exc}") from exc
    return movies


# -- graph artifacts ---------------------------------------------------------

def save_graph(graph: SupraAdjacency, directory: str | Path) -> str:
    """Write the graph artefact directory; returns the graph content hash."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_schema(graph.schema, directory / "schema.yaml")
    with open(directory / "entities.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["entity_id", "entity_type"])
        writer.writerows(graph.entities.entities)
    blocks_dir = directory / "blocks"
    blocks_dir.mkdir(exist_ok=True)
    for block in graph.blocks:
        sp.save_npz(blocks_dir / f"{block.layer_id}.npz", sp.csc_matrix(block.matrix))
    sp.save_npz(directory / "matrix.npz", graph.matrix)
    with open(directory / "node_index.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["node", "entity_id", "role_id"])
        for node in range(graph.n):
            entity_id, role_id = graph.entity_role_of(node)
            writer.writerow([node, entity_id, role_id])
    graph_hash = graph.content_hash()
    meta = {
        "format_version": ARTIFACT_VERSION,
        "graph_hash": graph_hash,
        "n_nodes": graph.n,
        "type_counts": graph.entities.type_counts,
    }
    with open(directory / "meta.json", "w", encoding="utf-8") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return graph_hash


def load_graph(directory: str | Path) -> SupraAdjacency:
    """Rebuild a graph from its artefact directory, verifying the stored hash."""
    directory = Path(directory)
    schema = load_schema(directory / "schema.yaml")
    with open(directory / "entities.csv", "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["entity_id", "entity_type"]:
            raise InputError(f"{directory}/entities.csv has an unexpected header")
        entities = EntitySet((row[0], row[1]) for row in reader if row)
    blocks = [
        IntraLayerBlock(layer.id, sp.load_npz(directory / "blocks" / f"{layer.id}.npz"))
        for layer in schema.layers
    ]
    graph = build_supra_adjacency(entities, schema, blocks)
    meta_path = directory / "meta.json"
    if meta_path.exists():
        with open(meta_path, "r", encoding="utf-8") as handle:
            meta = json.load(handle)
        stored = meta.get("graph_hash")
        if stored and stored != graph.content_hash():
            raise InputError(
                f"graph artefacts in {directory} do not match their recorded hash"
            )
    return graph


# -- precomputed ranking caches ----------------------------------------------

def rankings_cache_key(
    graph_hash: str,
    salience_hash: str,
    rho: float,
    theta: float,
    top_k: int,
    seed_mass: float,
    solver: str,
    tolerance: float,
) -> dict:
    return {
        "graph_hash": graph_hash,
        "salience_hash": salience_hash,
        "rho": repr(rho),
        "theta": repr(theta),
        "top_k": top_k,
        "seed_mass": repr(seed_mass),
        "solver": solver,
        "tolerance": repr(tolerance),
    }


def rankings_cache_path(cache_dir: str | Path, key: Mapping) -> Path:
    return Path(cache_dir) / f"rankings_{dict_hash(key)[:16]}.json.gz"


def save_rankings(
    path: str | Path, rankings: Mapping[str, RankedList], key: Mapping
) -> None:
    payload = {
        "format_version": ARTIFACT_VERSION,
        "key": dict(key),
        "rankings": {
            seed: {
                "ids": list(ranked.ids),
                "scores": [float(s) for s in ranked.scores],
                "gains": (
                    [float(g) for g in ranked.gains]
                    if ranked.gains is not None
                    else None
                ),
            }
            for seed, ranked in rankings.items()
        },
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with gzip.open(path, "wt", encoding="utf-8") as handle:
        json.dump(payload, handle, sort_keys=True)


def load_rankings(
    path: str | Path, expected_key: Mapping | None = None
) -> dict[str, RankedList]:
    with gzip.open(path, "rt", encoding="utf-8") as handle:
        payload = json.load(handle)
    if payload.get("format_version") != ARTIFACT_VERSION:
        raise InputError(f"cache {path} has an unsupported format version")
    if expected_key is not None and payload.get("key") != dict(expected_key):
        raise InputError(f"cache {path} was built from different inputs")
    out: dict[str, RankedList] = {}
    for seed, entry in payload["rankings"].items():
        out[seed] = RankedList(
            ids=list(entry["ids"]),
            scores=np.array(entry["scores"], dtype=np.float64),
            gains=(
                np.array(entry["gains"], dtype=np.float64)
                if entry["gains"] is not None
                else None
            ),
        )
    return out
