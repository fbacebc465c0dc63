import json

import numpy as np
import pytest
import scipy.sparse as sp

# Verdict lines recorded by the acceptance tests; printed as a dedicated
# section at the end of the run (pytest's fd capture swallows plain prints).
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

from kgrank.graph import (
    EntitySet,
    IntraLayerBlock,
    Layer,
    RoleSchema,
    build_supra_adjacency,
)

# Toy film knowledge graph: three films, three people, one company.
# Rodriguez has no acting credits; influence is a directed layer.
FILMS = ["pulp_fiction", "jackie_brown", "desperado"]
PEOPLE = ["tarantino", "rodriguez", "jackson"]
COMPANIES = ["band_apart"]

# rows: films (PF, JB, DE); cols: people (QT, RR, SLJ)
W_ACT = np.array([
    [2.0, 0.0, 3.0],
    [0.0, 0.0, 1.0],
    [1.5, 0.0, 0.0],
])
W_DIR = np.array([
    [1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
])
# rows: films; cols: companies
W_PROD = np.array([
    [1.0],
    [1.0],
    [0.0],
])
# rows: influenced person; cols: influencer (Tarantino -> Rodriguez)
W_INF = np.array([
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0],
])

TOY_ROLES = [
    ("f-act", "film"),
    ("f-dir", "film"),
    ("f-prod", "film"),
    ("p-act", "person"),
    ("p-dir", "person"),
    ("p-inf", "person"),
    ("c-prod", "company"),
]
TOY_LAYERS = [
    Layer("acting", source_role="p-act", target_role="f-act"),
    Layer("directing", source_role="p-dir", target_role="f-dir"),
    Layer("producing", source_role="c-prod", target_role="f-prod"),
    Layer("influences", source_role="p-inf", target_role="p-inf", directed=True),
]


def toy_film_inputs():
    entities = EntitySet(
        [(f, "film") for f in FILMS]
        + [(p, "person") for p in PEOPLE]
        + [(c, "company") for c in COMPANIES]
    )
    schema = RoleSchema(TOY_ROLES, TOY_LAYERS)
    blocks = [
        IntraLayerBlock("acting", sp.csc_matrix(W_ACT)),
        IntraLayerBlock("directing", sp.csc_matrix(W_DIR)),
        IntraLayerBlock("producing", sp.csc_matrix(W_PROD)),
        IntraLayerBlock("influences", sp.csc_matrix(W_INF)),
    ]
    return entities, schema, blocks


@pytest.fixture(scope="session")
def toy_graph():
    entities, schema, blocks = toy_film_inputs()
    return build_supra_adjacency(entities, schema, blocks)


def toy_salience_blocks(graph):
    """Arbitrary but fixed positive saliences for every populated toy block."""
    values = {}
    for i, key in enumerate(sorted(graph.structure_block_keys())):
        values[key] = 0.25 + 0.11 * (i % 7)
    return values


# -- movie metadata fixture files --------------------------------------------

MOVIE_FIXTURE = [
    {
        "id": "pulp_fiction",
        "title": "Pulp Fiction",
        "popularity": 60.0,
        "cast": [
            {"person_id": "tarantino", "name": "Quentin Tarantino", "order": 2},
            {"person_id": "jackson", "name": "Samuel L. Jackson", "order": 1},
        ],
        "crew": [
            {"person_id": "tarantino", "name": "Quentin Tarantino", "job": "Director"},
            {"person_id": "bender", "name": "Lawrence Bender", "job": "Producer"},
        ],
        "keywords": ["crime", "nonlinear"],
    },
    {
        "id": "jackie_brown",
        "title": "Jackie Brown",
        "popularity": 30.0,
        "cast": [
            {"person_id": "jackson", "name": "Samuel L. Jackson", "order": 1},
            {"person_id": "grier", "name": "Pam Grier", "order": 2},
        ],
        "crew": [
            {"person_id": "tarantino", "name": "Quentin Tarantino", "job": "Director"},
            {"person_id": "bender", "name": "Lawrence Bender", "job": "Producer"},
        ],
        "keywords": ["crime", "heist"],
    },
    {
        "id": "desperado",
        "title": "Desperado",
        "popularity": 25.0,
        "cast": [
            {"person_id": "banderas", "name": "Antonio Banderas", "order": 1},
            {"person_id": "tarantino", "name": "Quentin Tarantino", "order": 3},
        ],
        "crew": [
            {"person_id": "rodriguez", "name": "Robert Rodriguez", "job": "Director"},
            {"person_id": "rodriguez", "name": "Robert Rodriguez", "job": "Producer"},
        ],
        "keywords": ["mariachi", "revenge"],
    },
    {
        "id": "el_mariachi",
        "title": "El Mariachi",
        "popularity": 12.0,
        "cast": [
            {"person_id": "gallardo", "name": "Carlos Gallardo", "order": 1},
        ],
        "crew": [
            {"person_id": "rodriguez", "name": "Robert Rodriguez", "job": "Director"},
        ],
        "keywords": ["mariachi"],
    },
    {
        "id": "hateful_eight",
        "title": "The Hateful Eight",
        "popularity": 45.0,
        "cast": [
            {"person_id": "jackson", "name": "Samuel L. Jackson", "order": 1},
            {"person_id": "russell", "name": "Kurt Russell", "order": 2},
        ],
        "crew": [
            {"person_id": "tarantino", "name": "Quentin Tarantino", "job": "Director"},
        ],
        "keywords": ["western", "nonlinear"],
    },
    {
        "id": "overboard",
        "title": "Overboard",
        "popularity": 18.0,
        "cast": [
            {"person_id": "russell", "name": "Kurt Russell", "order": 1},
            {"person_id": "hawn", "name": "Goldie Hawn", "order": 2},
        ],
        "crew": [
            {"person_id": "marshall", "name": "Garry Marshall", "job": "Director"},
        ],
        "keywords": ["amnesia", "comedy"],
    },
]

RATINGS_FIXTURE = [
    # user_id, item_id, rating, timestamp
    ("u1", "pulp_fiction", 5, 100), ("u1", "jackie_brown", 4, 101),
    ("u1", "hateful_eight", 5, 102), ("u1", "overboard", 2, 103),
    ("u2", "desperado", 5, 200), ("u2", "el_mariachi", 4, 201),
    ("u2", "pulp_fiction", 4, 202),
    ("u3", "overboard", 5, 300), ("u3", "hateful_eight", 4, 301),
    ("u3", "jackie_brown", 3, 302),
    ("u4", "pulp_fiction", 5, 400), ("u4", "hateful_eight", 4, 401),
    ("u4", "desperado", 3, 402),
    ("u5", "jackie_brown", 5, 500), ("u5", "pulp_fiction", 4, 501),
    ("u5", "el_mariachi", 3, 502),
    ("u6", "overboard", 4, 600), ("u6", "pulp_fiction", 4, 601),
    ("u6", "hateful_eight", 3, 602),
    ("u7", "desperado", 5, 700), ("u7", "pulp_fiction", 5, 701),
    ("u7", "jackie_brown", 4, 702),
    ("u8", "hateful_eight", 5, 800), ("u8", "jackie_brown", 4, 801),
    ("u8", "overboard", 4, 802),
]


def write_movie_fixture(directory):
    """Write movies.jsonl plus a ratings CSV; returns their paths."""
    directory.mkdir(parents=True, exist_ok=True)
    metadata = directory / "movies.jsonl"
    with open(metadata, "w", encoding="utf-8") as handle:
        for movie in MOVIE_FIXTURE:
            handle.write(json.dumps(movie) + "\n")
    ratings = directory / "ratings.csv"
    with open(ratings, "w", encoding="utf-8") as handle:
        handle.write("user_id,item_id,rating,timestamp\n")
        for user, item, rating, ts in RATINGS_FIXTURE:
            handle.write(f"{user},{item},{rating},{ts}\n")
    return metadata, ratings


@pytest.fixture()
def movie_fixture_dir(tmp_path):
    write_movie_fixture(tmp_path)
    return tmp_path
