"""Multilayer network representation of a knowledge graph.

Each relationship type in the graph lives in its own layer, and an entity
appears once for every role it could assume (a person who never directed
still has a director node). The flattened form is a sparse supra-adjacency
matrix holding the intralayer blocks plus diagonal interlayer couplings that
tie together the nodes representing the same entity in different roles.
"""
from __future__ import annotations

import hashlib
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError, UnknownEntityError

logger = logging.getLogger(__name__)


class EntitySet:
    """Typed entities in first-appearance order.

    Entity ids must be globally unique; the per-type ordering fixes the node
    ordering inside every role block of the supra-adjacency matrix.
    """

    def __init__(self, entities: Iterable[tuple[str, str]]):
        self.entities: list[tuple[str, str]] = []
        self._type_of: dict[str, str] = {}
        self._ids_by_type: dict[str, list[str]] = defaultdict(list)
        self._position: dict[str, int] = {}
        for entity_id, entity_type in entities:
            if entity_id in self._type_of:
                raise InputError(f"duplicate entity id {entity_id!r}")
            self.entities.append((entity_id, entity_type))
            self._type_of[entity_id] = entity_type
            self._position[entity_id] = len(self._ids_by_type[entity_type])
            self._ids_by_type[entity_type].append(entity_id)
        if not self.entities:
            raise InputError("entity set is empty")

    def __len__(self) -> int:
        return len(self.entities)

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self._type_of

    @property
    def type_counts(self) -> dict[str, int]:
        return {t: len(ids) for t, ids in self._ids_by_type.items()}

    def type_of(self, entity_id: str) -> str:
        try:
            return self._type_of[entity_id]
        except KeyError:
            raise UnknownEntityError(f"unknown entity {entity_id!r}") from None

    def ids_of_type(self, entity_type: str) -> list[str]:
        return list(self._ids_by_type.get(entity_type, ()))

    def count_of_type(self, entity_type: str) -> int:
        return len(self._ids_by_type.get(entity_type, ()))

    def position(self, entity_id: str) -> int:
        """Index of the entity within its type's ordering."""
        try:
            return self._position[entity_id]
        except KeyError:
            raise UnknownEntityError(f"unknown entity {entity_id!r}") from None


@dataclass(frozen=True)
class Layer:
    """One relationship type: edges run from ``source_role`` to ``target_role``."""

    id: str
    source_role: str
    target_role: str
    directed: bool = False


class RoleSchema:
    """Role declarations and the layers that connect them.

    Role order is significant: it determines the block layout of the
    supra-adjacency matrix.
    """

    def __init__(self, roles: Sequence[tuple[str, str]], layers: Sequence[Layer]):
        self.roles: tuple[tuple[str, str], ...] = tuple(roles)
        self.layers: tuple[Layer, ...] = tuple(layers)
        self._type_of_role: dict[str, str] = {}
        for role_id, entity_type in self.roles:
            if role_id in self._type_of_role:
                raise InputError(f"duplicate role id {role_id!r}")
            self._type_of_role[role_id] = entity_type
        seen_layers = set()
        for layer in self.layers:
            if layer.id in seen_layers:
                raise InputError(f"duplicate layer id {layer.id!r}")
            seen_layers.add(layer.id)
            for role in (layer.source_role, layer.target_role):
                if role not in self._type_of_role:
                    raise InputError(
                        f"layer {layer.id!r} references undeclared role {role!r}"
                    )

    @property
    def role_ids(self) -> tuple[str, ...]:
        return tuple(r for r, _ in self.roles)

    def entity_type_of(self, role_id: str) -> str:
        try:
            return self._type_of_role[role_id]
        except KeyError:
            raise UnknownEntityError(f"unknown role {role_id!r}") from None

    def roles_of_type(self, entity_type: str) -> list[str]:
        return [r for r, t in self.roles if t == entity_type]

    def layers_of_role(self, role_id: str) -> list[Layer]:
        return [
            l for l in self.layers if role_id in (l.source_role, l.target_role)
        ]


@dataclass
class IntraLayerBlock:
    """Adjacency of a single layer.

    Rows are indexed by the target-role entities and columns by the
    source-role entities, both in :class:`EntitySet` order. Stored weights
    must be positive; a missing entry is a structural zero.
    """

    layer_id: str
    matrix: sp.spmatrix

    def canonical(self) -> sp.csc_matrix:
        m = sp.csc_matrix(self.matrix)
        m.eliminate_zeros()
        m.sort_indices()
        return m


@dataclass
class InterlayerCouplings:
    """Diagonal coupling blocks keyed by (target_role, source_role).

    The diagonal of block (r1, r2) holds the weighted in-layer degree of each
    entity in role r1; entities inactive in r1 have a zero entry and hence no
    incoming coupling.
    """

    blocks: dict[tuple[str, str], sp.csc_matrix]


class SupraAdjacency:
    """Flattened multilayer network: intralayer blocks plus couplings.

    Instances are immutable after construction and safe to share across
    threads. Use :func:`build_supra_adjacency` to create one.
    """

    def __init__(
        self,
        matrix: sp.csc_matrix,
        entities: EntitySet,
        schema: RoleSchema,
        blocks: Sequence[IntraLayerBlock],
        couplings: InterlayerCouplings,
        role_offsets: dict[str, tuple[int, int]],
    ):
        self.matrix = matrix
        self.entities = entities
        self.schema = schema
        self.blocks = tuple(blocks)
        self.couplings = couplings
        self.role_offsets = role_offsets
        self._role_index = {r: i for i, r in enumerate(schema.role_ids)}
        role_of_node = np.empty(matrix.shape[0], dtype=np.int32)
        entity_of_node: list[str] = [""] * matrix.shape[0]
        for role_id, (start, size) in role_offsets.items():
            role_of_node[start : start + size] = self._role_index[role_id]
            ids = entities.ids_of_type(schema.entity_type_of(role_id))
            entity_of_node[start : start + size] = ids
        self.role_of_node = role_of_node
        self._entity_of_node = entity_of_node

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def role_slice(self, role_id: str) -> slice:
        try:
            start, size = self.role_offsets[role_id]
        except KeyError:
            raise UnknownEntityError(f"unknown role {role_id!r}") from None
        return slice(start, start + size)

    def block_ranges(
        self, target_role: str, source_role: str
    ) -> tuple[slice, slice]:
        return self.role_slice(target_role), self.role_slice(source_role)

    def block(self, target_role: str, source_role: str) -> sp.csc_matrix:
        rows, cols = self.block_ranges(target_role, source_role)
        return self.matrix[rows, cols]

    def node_of(self, entity_id: str, role_id: str) -> int:
        entity_type = self.entities.type_of(entity_id)
        if self.schema.entity_type_of(role_id) != entity_type:
            raise UnknownEntityError(
                f"entity {entity_id!r} has type {entity_type!r}, "
                f"which does not assume role {role_id!r}"
            )
        start, _ = self.role_offsets[role_id]
        return start + self.entities.position(entity_id)

    def nodes_of_entity(self, entity_id: str) -> list[int]:
        entity_type = self.entities.type_of(entity_id)
        pos = self.entities.position(entity_id)
        return [
            self.role_offsets[r][0] + pos
            for r in self.schema.roles_of_type(entity_type)
        ]

    def entity_role_of(self, node: int) -> tuple[str, str]:
        if not 0 <= node < self.n:
            raise UnknownEntityError(f"node index {node} out of range")
        role_id = self.schema.role_ids[self.role_of_node[node]]
        return self._entity_of_node[node], role_id

    def structure_block_keys(self) -> list[tuple[str, str]]:
        """(target_role, source_role) pairs with at least one non-zero entry."""
        coo = self.matrix.tocoo()
        pairs = np.unique(
            np.stack(
                [self.role_of_node[coo.row], self.role_of_node[coo.col]], axis=1
            ),
            axis=0,
        )
        role_ids = self.schema.role_ids
        return [(role_ids[t], role_ids[s]) for t, s in pairs]

    def undirected_csr(self) -> sp.csr_matrix:
        """Binarised, symmetrised adjacency used for geodesic queries."""
        sym = (self.matrix + self.matrix.T).tocsr()
        sym.eliminate_zeros()
        sym.data.fill(1.0)
        sym.sort_indices()
        return sym

    def content_hash(self) -> str:
        """Stable hash of entities, schema, and intralayer blocks."""
        h = hashlib.sha256()
        for entity_id, entity_type in self.entities.entities:
            h.update(f"e:{entity_id}\x1f{entity_type}\n".encode())
        for role_id, entity_type in self.schema.roles:
            h.update(f"r:{role_id}\x1f{entity_type}\n".encode())
        for layer in self.schema.layers:
            h.update(
                f"l:{layer.id}\x1f{layer.source_role}\x1f{layer.target_role}"
                f"\x1f{int(layer.directed)}\n".encode()
            )
        for block in sorted(self.blocks, key=lambda b: b.layer_id):
            coo = sp.coo_matrix(block.matrix)
            h.update(f"b:{block.layer_id}\n".encode())
            h.update(np.ascontiguousarray(coo.row, dtype=np.int64).tobytes())
            h.update(np.ascontiguousarray(coo.col, dtype=np.int64).tobytes())
            h.update(np.ascontiguousarray(coo.data, dtype=np.float64).tobytes())
        return h.hexdigest()


def _layer_blocks_by_id(
    schema: RoleSchema, blocks: Sequence[IntraLayerBlock]
) -> dict[str, sp.csc_matrix]:
    by_id: dict[str, sp.csc_matrix] = {}
    for block in blocks:
        if block.layer_id in by_id:
            raise InputError(f"multiple blocks supplied for layer {block.layer_id!r}")
        by_id[block.layer_id] = block.canonical()
    declared = {l.id for l in schema.layers}
    missing = declared - by_id.keys()
    if missing:
        raise InputError(f"no block supplied for layers: {sorted(missing)}")
    extra = by_id.keys() - declared
    if extra:
        raise InputError(f"blocks reference undeclared layers: {sorted(extra)}")
    return by_id


def _validate_block(
    layer: Layer, matrix: sp.csc_matrix, entities: EntitySet, schema: RoleSchema
) -> None:
    n_target = entities.count_of_type(schema.entity_type_of(layer.target_role))
    n_source = entities.count_of_type(schema.entity_type_of(layer.source_role))
    if matrix.shape != (n_target, n_source):
        raise InputError(
            f"layer {layer.id!r} block has shape {matrix.shape}, expected "
            f"({n_target}, {n_source}) from role cardinalities"
        )
    if matrix.nnz and not np.isfinite(matrix.data).all():
        raise InputError(f"layer {layer.id!r} block contains non-finite weights")
    if matrix.nnz and matrix.data.min() < 0:
        raise InputError(f"layer {layer.id!r} block contains negative weights")


def compute_interlayer_couplings(
    blocks: Sequence[IntraLayerBlock], schema: RoleSchema, entities: EntitySet
) -> InterlayerCouplings:
    """Diagonal couplings between roles of the same entity type.

    The coupling into role r1 (from every other role r2 of the same type)
    carries the weighted degree of the entity within r1's layer(s): row sums
    for target roles plus column sums for source roles, summed over all
    layers the role participates in.
    """
    by_id = _layer_blocks_by_id(schema, blocks)
    degrees: dict[str, np.ndarray] = {
        role_id: np.zeros(entities.count_of_type(entity_type))
        for role_id, entity_type in schema.roles
    }
    for layer in schema.layers:
        m = by_id[layer.id]
        _validate_block(layer, m, entities, schema)
        degrees[layer.target_role] += np.asarray(m.sum(axis=1)).ravel()
        degrees[layer.source_role] += np.asarray(m.sum(axis=0)).ravel()

    coupling_blocks: dict[tuple[str, str], sp.csc_matrix] = {}
    for r1, t1 in schema.roles:
        for r2, t2 in schema.roles:
            if r1 == r2 or t1 != t2:
                continue
            diag = sp.diags(degrees[r1], format="csc")
            diag.eliminate_zeros()
            coupling_blocks[(r1, r2)] = diag
    return InterlayerCouplings(coupling_blocks)


def build_supra_adjacency(
    entities: EntitySet, schema: RoleSchema, blocks: Sequence[IntraLayerBlock]
) -> SupraAdjacency:
    """Assemble the supra-adjacency matrix from intralayer blocks.

    Undirected layers contribute the block and its transpose; directed layers
    appear once. Interlayer couplings are derived from in-layer weighted
    degrees. Every entity must be active in at least one layer.

    Raises
    ------
    InputError
        On missing/extra blocks, dimension mismatches, negative weights, or
        entities isolated across all layers.
    """
    by_id = _layer_blocks_by_id(schema, blocks)
    for layer in schema.layers:
        _validate_block(layer, by_id[layer.id], entities, schema)

    # An entity is active in a role when its node has in-layer edges there.
    active: dict[str, np.ndarray] = {
        role_id: np.zeros(entities.count_of_type(entity_type), dtype=bool)
        for role_id, entity_type in schema.roles
    }
    for layer in schema.layers:
        m = by_id[layer.id]
        active[layer.target_role] |= np.asarray(m.sum(axis=1)).ravel() > 0
        active[layer.source_role] |= np.asarray(m.sum(axis=0)).ravel() > 0
    isolated: list[str] = []
    for entity_id, entity_type in entities.entities:
        roles = schema.roles_of_type(entity_type)
        if not roles:
            raise InputError(
                f"entity type {entity_type!r} has no declared roles"
            )
        pos = entities.position(entity_id)
        if not any(active[r][pos] for r in roles):
            isolated.append(entity_id)
    if isolated:
        raise InputError(
            f"{len(isolated)} entities are isolated across all layers "
            f"(first few: {isolated[:5]})"
        )

    role_offsets: dict[str, tuple[int, int]] = {}
    offset = 0
    for role_id, entity_type in schema.roles:
        size = entities.count_of_type(entity_type)
        role_offsets[role_id] = (offset, size)
        offset += size
    n = offset

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    data: list[np.ndarray] = []

    def place(target_role: str, source_role: str, coo: sp.coo_matrix) -> None:
        rows.append(coo.row.astype(np.int64) + role_offsets[target_role][0])
        cols.append(coo.col.astype(np.int64) + role_offsets[source_role][0])
        data.append(coo.data.astype(np.float64))

    for layer in schema.layers:
        coo = by_id[layer.id].tocoo()
        place(layer.target_role, layer.source_role, coo)
        if not layer.directed:
            place(layer.source_role, layer.target_role, coo.T)

    couplings = compute_interlayer_couplings(blocks, schema, entities)
    for (r1, r2), diag in couplings.blocks.items():
        place(r1, r2, diag.tocoo())

    matrix = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsc()
    matrix.eliminate_zeros()
    matrix.sort_indices()
    canonical_blocks = [
        IntraLayerBlock(layer.id, by_id[layer.id]) for layer in schema.layers
    ]
    return SupraAdjacency(
        matrix, entities, schema, canonical_blocks, couplings, role_offsets
    )


def merge_roles(
    graph: SupraAdjacency, merge_spec: Mapping[str, str]
) -> SupraAdjacency:
    """Collapse roles of the same entity type into shared roles.

    Layers whose endpoints coincide after the merge are summed into the same
    block, and interlayer couplings between merged roles disappear. Roles not
    mentioned in ``merge_spec`` keep their identity.
    """
    schema = graph.schema
    mapping = {r: merge_spec.get(r, r) for r in schema.role_ids}
    groups: dict[str, set[str]] = defaultdict(set)
    for role_id, entity_type in schema.roles:
        groups[mapping[role_id]].add(entity_type)
    for merged_id, types in groups.items():
        if len(types) > 1:
            raise InputError(
                f"merged role {merged_id!r} would span entity types {sorted(types)}"
            )

    merged_roles: list[tuple[str, str]] = []
    seen: set[str] = set()
    for role_id, entity_type in schema.roles:
        new_id = mapping[role_id]
        if new_id not in seen:
            seen.add(new_id)
            merged_roles.append((new_id, entity_type))
    merged_layers = [
        Layer(l.id, mapping[l.source_role], mapping[l.target_role], l.directed)
        for l in schema.layers
    ]
    return build_supra_adjacency(
        graph.entities, RoleSchema(merged_roles, merged_layers), graph.blocks
    )


def bfs_hop_counts(adj: sp.csr_matrix, source: int) -> np.ndarray:
    """Hop counts from one source over a binarised CSR adjacency (-1 unreachable)."""
    n = adj.shape[0]
    indptr, indices = adj.indptr, adj.indices
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    level = 0
    while frontier.size:
        level += 1
        starts = indptr[frontier]
        counts = indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total == 0:
            break
        flat = np.repeat(starts - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
        neighbours = indices[flat + np.arange(total)]
        neighbours = neighbours[dist[neighbours] < 0]
        if neighbours.size == 0:
            break
        frontier = np.unique(neighbours)
        dist[frontier] = level
    return dist


def shortest_path_lengths(
    graph: SupraAdjacency,
    sources: Iterable[int],
    targets: Iterable[int],
) -> dict[tuple[int, int], float]:
    """Geodesic hop counts between node sets.

    Distances are measured on the binarised, symmetrised supra-adjacency;
    unreachable pairs map to ``inf``.
    """
    source_list = list(sources)
    target_list = list(targets)
    if not source_list or not target_list:
        raise InputError("source and target sets must be non-empty")
    adj = graph.undirected_csr()
    target_arr = np.array(target_list, dtype=np.int64)
    result: dict[tuple[int, int], float] = {}
    for src in dict.fromkeys(source_list):
        dist = bfs_hop_counts(adj, src)
        hops = dist[target_arr]
        for tgt, d in zip(target_list, hops):
            result[(src, tgt)] = float(d) if d >= 0 else float("inf")
    return result
