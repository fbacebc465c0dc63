"""Synthetic fixtures: random multilayer instances and a planted-community KG."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from kgrank.dynamics import SalienceMatrix
from kgrank.graph import (
    EntitySet,
    IntraLayerBlock,
    Layer,
    RoleSchema,
    SupraAdjacency,
    build_supra_adjacency,
)


def random_multilayer_instance(
    rng: np.random.Generator,
    min_nodes: int = 20,
    max_nodes: int = 200,
) -> tuple[SupraAdjacency, SalienceMatrix]:
    """Random 2-4 layer graph over two entity types with random saliences.

    Type A entities carry two roles (a1, a2), type B one role (b1), so the
    node count is 2*nA + nB, kept within [min_nodes, max_nodes].
    """
    n_b = int(rng.integers(max(4, min_nodes // 3), max(8, max_nodes // 3)))
    lo = max(4, (min_nodes - n_b + 1) // 2)
    hi = max(lo + 1, (max_nodes - n_b) // 2)
    n_a = int(rng.integers(lo, hi + 1))

    roles = [("a1", "A"), ("a2", "A"), ("b1", "B")]
    templates = [
        Layer("bip1", source_role="a1", target_role="b1"),
        Layer("bip2", source_role="a2", target_role="b1"),
        Layer("uni_directed", source_role="a2", target_role="a2", directed=True),
        Layer("uni_undirected", source_role="a1", target_role="a1"),
    ]
    n_layers = int(rng.integers(2, 5))
    extras = [templates[i] for i in rng.choice([1, 2, 3], size=n_layers - 1, replace=False)]
    layers = [templates[0]] + sorted(extras, key=lambda l: l.id)
    schema = RoleSchema(roles, layers)
    entities = EntitySet(
        [(f"a{i}", "A") for i in range(n_a)] + [(f"b{i}", "B") for i in range(n_b)]
    )

    size_of = {"a1": n_a, "a2": n_a, "b1": n_b}
    edge_lists: dict[str, list[tuple[int, int, float]]] = {l.id: [] for l in layers}
    for layer in layers:
        n_rows = size_of[layer.target_role]
        n_cols = size_of[layer.source_role]
        m = int(rng.integers(max(n_rows, n_cols), 3 * max(n_rows, n_cols)))
        for _ in range(m):
            i = int(rng.integers(n_rows))
            j = int(rng.integers(n_cols))
            if layer.source_role == layer.target_role and i == j:
                continue
            edge_lists[layer.id].append((i, j, float(rng.uniform(0.5, 2.0))))

    # Patch entities the random edges missed so nothing is isolated.
    covered_a = np.zeros(n_a, dtype=bool)
    covered_b = np.zeros(n_b, dtype=bool)
    for layer in layers:
        for i, j, _ in edge_lists[layer.id]:
            for role, idx in ((layer.target_role, i), (layer.source_role, j)):
                if role in ("a1", "a2"):
                    covered_a[idx] = True
                else:
                    covered_b[idx] = True
    for idx in np.flatnonzero(~covered_a):
        edge_lists["bip1"].append((int(rng.integers(n_b)), int(idx), 1.0))
        covered_a[idx] = True
    for idx in np.flatnonzero(~covered_b):
        edge_lists["bip1"].append((int(idx), int(rng.integers(n_a)), 1.0))

    blocks = []
    for layer in layers:
        triples = edge_lists[layer.id]
        matrix = sp.coo_matrix(
            (
                [w for _, _, w in triples],
                ([i for i, _, _ in triples], [j for _, j, _ in triples]),
            ),
            shape=(size_of[layer.target_role], size_of[layer.source_role]),
        ).tocsc()
        blocks.append(IntraLayerBlock(layer.id, matrix))
    graph = build_supra_adjacency(entities, schema, blocks)
    salience = SalienceMatrix(
        {key: float(rng.uniform(0.2, 1.5)) for key in graph.structure_block_keys()}
    )
    return graph, salience


def planted_community_kg(
    rng: np.random.Generator,
    n_communities: int = 10,
    movies_per: int = 20,
    people_per: int = 10,
    keywords_per: int = 10,
    cross_probability: float = 0.05,
) -> tuple[SupraAdjacency, dict[str, int], dict[str, float]]:
    """Movie-style KG with community structure.

    People carry actor and director roles, so the default sizing gives
    200 movie + 200 person + 100 keyword nodes = 500. Returns the graph,
    the home community of every movie, and a community-independent
    popularity table.
    """
    movies = [
        (f"m{c}_{i}", c) for c in range(n_communities) for i in range(movies_per)
    ]
    people = [
        (f"p{c}_{i}", c) for c in range(n_communities) for i in range(people_per)
    ]
    keywords = [
        (f"k{c}_{i}", c) for c in range(n_communities) for i in range(keywords_per)
    ]
    people_by_community = {
        c: [p for p, pc in people if pc == c] for c in range(n_communities)
    }
    keywords_by_community = {
        c: [k for k, kc in keywords if kc == c] for c in range(n_communities)
    }
    all_people = [p for p, _ in people]

    acts: list[tuple[str, str, float]] = []
    directs: list[tuple[str, str, float]] = []
    describes: list[tuple[str, str, float]] = []
    for movie_id, community in movies:
        cast_pool = people_by_community[community]
        for order in range(1, 4):
            if rng.random() < cross_probability:
                person = all_people[int(rng.integers(len(all_people)))]
            else:
                person = cast_pool[int(rng.integers(len(cast_pool)))]
            acts.append((movie_id, person, 1.0 / np.log2(order + 1)))
        directs.append(
            (movie_id, cast_pool[int(rng.integers(len(cast_pool)))], 1.0)
        )
        chosen = rng.choice(keywords_by_community[community], size=2, replace=False)
        for keyword in chosen:
            describes.append((movie_id, str(keyword), 1.0))

    # Guarantee every person and keyword is used at least once.
    used_people = {p for _, p, _ in acts} | {p for _, p, _ in directs}
    for person, community in people:
        if person not in used_people:
            movie_id = f"m{community}_{int(rng.integers(movies_per))}"
            acts.append((movie_id, person, 1.0))
    used_keywords = {k for _, k, _ in describes}
    for keyword, community in keywords:
        if keyword not in used_keywords:
            movie_id = f"m{community}_{int(rng.integers(movies_per))}"
            describes.append((movie_id, keyword, 1.0))

    entities = EntitySet(
        [(m, "movie") for m, _ in movies]
        + [(p, "person") for p, _ in people]
        + [(k, "keyword") for k, _ in keywords]
    )
    schema = RoleSchema(
        roles=[
            ("movie", "movie"),
            ("act", "person"),
            ("dir", "person"),
            ("desc", "keyword"),
        ],
        layers=[
            Layer("acts_in", source_role="act", target_role="movie"),
            Layer("directs", source_role="dir", target_role="movie"),
            Layer("describes", source_role="desc", target_role="movie"),
        ],
    )

    def block(
        triples: list[tuple[str, str, float]], n_cols: int
    ) -> sp.csc_matrix:
        rows = [entities.position(t) for t, _, _ in triples]
        cols = [entities.position(s) for _, s, _ in triples]
        return sp.coo_matrix(
            ([w for _, _, w in triples], (rows, cols)),
            shape=(len(movies), n_cols),
        ).tocsc()

    blocks = [
        IntraLayerBlock("acts_in", block(acts, len(people))),
        IntraLayerBlock("directs", block(directs, len(people))),
        IntraLayerBlock("describes", block(describes, len(keywords))),
    ]
    graph = build_supra_adjacency(entities, schema, blocks)
    communities = {m: c for m, c in movies}
    popularity = {m: float(rng.uniform(1.0, 100.0)) for m, _ in movies}
    return graph, communities, popularity


def community_loyal_users(
    rng: np.random.Generator,
    communities: dict[str, int],
    n_users: int,
    items_range: tuple[int, int] = (4, 10),
    noise_probability: float = 0.1,
) -> dict[str, dict[str, float]]:
    """Users drawn to one community, with occasional out-of-community items."""
    by_community: dict[int, list[str]] = {}
    for movie, community in communities.items():
        by_community.setdefault(community, []).append(movie)
    n_communities = len(by_community)
    users: dict[str, dict[str, float]] = {}
    for u in range(n_users):
        home = int(rng.integers(n_communities))
        size = int(rng.integers(items_range[0], items_range[1] + 1))
        items: dict[str, float] = {}
        while len(items) < size:
            if rng.random() < noise_probability:
                pool = by_community[int(rng.integers(n_communities))]
            else:
                pool = by_community[home]
            movie = pool[int(rng.integers(len(pool)))]
            items[movie] = float(rng.integers(1, 6))
        users[f"u{u}"] = items
    return users
