"""Random-walk dynamics on the supra-adjacency matrix.

Connection types carry incomparable units, so the adjacency is first scaled
by a block-constant salience matrix, then column-normalised into the
transition matrix of a walk. Seeded and unseeded personalised PageRank are
solved either by power iteration on the transition rule or via the
equivalent sparse linear system.
"""
from __future__ import annotations

import hashlib
import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, InputError, SolverError
from .graph import SupraAdjacency

logger = logging.getLogger(__name__)

#: L1 tolerance for "sums to one" validation of stochastic objects.
STOCHASTIC_ATOL = 1e-12


class SalienceMatrix:
    """Block-constant, non-negative salience values.

    Keys are (target_role, source_role) pairs; the scalar applies to every
    entry of the corresponding block of the supra-adjacency. The mapping is
    not necessarily symmetric. Blocks that are structurally empty in a given
    graph are tolerated and ignored, so one salience table can serve several
    variants of the same knowledge graph; a *missing* block for a populated
    region is always an error.
    """

    def __init__(self, blocks: Mapping[tuple[str, str], float]):
        clean: dict[tuple[str, str], float] = {}
        for (target, source), value in blocks.items():
            value = float(value)
            if not np.isfinite(value) or value < 0:
                raise InputError(
                    f"salience for block ({target!r}, {source!r}) must be "
                    f"finite and non-negative, got {value!r}"
                )
            clean[(str(target), str(source))] = value
        self.blocks = clean

    def __eq__(self, other) -> bool:
        return isinstance(other, SalienceMatrix) and self.blocks == other.blocks

    def value(self, target_role: str, source_role: str) -> float:
        return self.blocks[(target_role, source_role)]

    def scaled_column(self, source_role: str, factor: float) -> "SalienceMatrix":
        """Copy with every block of one source-role column multiplied by ``factor``."""
        return SalienceMatrix(
            {
                key: (value * factor if key[1] == source_role else value)
                for key, value in self.blocks.items()
            }
        )

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for (target, source), value in sorted(self.blocks.items()):
            h.update(f"{target}\x1f{source}\x1f{value!r}\n".encode())
        return h.hexdigest()


@dataclass
class TransitionMatrix:
    """Column-stochastic sparse transition matrix of the walk."""

    matrix: sp.csc_matrix
    dangling_columns: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.int64)
    )

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass
class PageRankConfig:
    """Teleportation and solver settings for a PageRank solve."""

    rho: float = 0.15
    solver: str = "linear"
    tolerance: float = 1e-10
    max_iterations: int = 10_000

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise InputError(f"teleport probability must be in (0, 1], got {self.rho}")
        if self.solver not in ("power", "linear"):
            raise InputError(f"unknown solver {self.solver!r}")
        if self.tolerance <= 0:
            raise InputError("tolerance must be positive")
        if self.max_iterations < 1:
            raise InputError("max_iterations must be at least 1")


@dataclass
class PageRankSolution:
    """Stationary distribution with solver diagnostics."""

    scores: np.ndarray
    iterations: int
    residual: float
    wall_time: float = 0.0

    def to_record(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "wall_time": self.wall_time,
        }


def validate_teleport_vector(v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (n,):
        raise InputError(f"teleport vector has shape {v.shape}, expected ({n},)")
    if not np.isfinite(v).all() or (v < 0).any():
        raise InputError("teleport vector entries must be finite and non-negative")
    if abs(v.sum() - 1.0) > STOCHASTIC_ATOL:
        raise InputError(f"teleport vector sums to {v.sum()!r}, expected 1")
    return v


def uniform_teleport(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def apply_salience(graph: SupraAdjacency, salience: SalienceMatrix) -> sp.csc_matrix:
    """Element-wise product of the supra-adjacency with the block saliences.

    Every populated block of the graph must have a salience value; the result
    keeps (at most) the sparsity pattern of the supra-adjacency.
    """
    role_ids = graph.schema.role_ids
    index = {r: i for i, r in enumerate(role_ids)}
    lookup = np.full((len(role_ids), len(role_ids)), np.nan)
    for (target, source), value in salience.blocks.items():
        if target not in index or source not in index:
            logger.debug(
                "salience block (%s, %s) names roles absent from the graph", target, source
            )
            continue
        lookup[index[target], index[source]] = value

    coo = graph.matrix.tocoo()
    factors = lookup[graph.role_of_node[coo.row], graph.role_of_node[coo.col]]
    missing = np.isnan(factors)
    if missing.any():
        pairs = sorted(
            {
                (role_ids[t], role_ids[s])
                for t, s in zip(
                    graph.role_of_node[coo.row[missing]],
                    graph.role_of_node[coo.col[missing]],
                )
            }
        )
        raise InputError(f"no salience defined for populated blocks: {pairs}")
    scaled = sp.coo_matrix(
        (coo.data * factors, (coo.row, coo.col)), shape=graph.matrix.shape
    ).tocsc()
    scaled.eliminate_zeros()
    scaled.sort_indices()
    return scaled


def column_normalize(matrix: sp.spmatrix) -> TransitionMatrix:
    """Normalise columns to sum to one.

    Dangling (all-zero) columns are replaced by the uniform distribution so
    the walk conserves its density; a warning reports how many were patched.
    """
    m = sp.csc_matrix(matrix, dtype=np.float64)
    if m.nnz and not np.isfinite(m.data).all():
        raise InputError("matrix contains non-finite values")
    if m.nnz and m.data.min() < 0:
        raise InputError("matrix contains negative values")
    n = m.shape[1]
    sums = np.asarray(m.sum(axis=0)).ravel()
    dangling = np.flatnonzero(sums == 0)
    col_of_entry = np.repeat(np.arange(n), np.diff(m.indptr))
    data = m.data / sums[col_of_entry]
    normalised = sp.csc_matrix((data, m.indices, m.indptr), shape=m.shape)
    if dangling.size:
        warnings.warn(
            f"{dangling.size} dangling columns replaced by the uniform distribution",
            stacklevel=2,
        )
        rows = np.tile(np.arange(m.shape[0]), dangling.size)
        cols = np.repeat(dangling, m.shape[0])
        patch = sp.coo_matrix(
            (np.full(rows.size, 1.0 / m.shape[0]), (rows, cols)), shape=m.shape
        )
        normalised = (normalised + patch).tocsc()
    normalised.sort_indices()
    return TransitionMatrix(normalised, dangling)


def build_transition_matrix(
    graph: SupraAdjacency, salience: SalienceMatrix
) -> TransitionMatrix:
    """Salience-weighted, column-normalised transition matrix for a graph."""
    return column_normalize(apply_salience(graph, salience))


def _finalise(x: np.ndarray) -> np.ndarray:
    # Analytically the solution has unit mass; correct accumulated float
    # drift only when it is measurable, so trivially exact cases stay exact.
    total = x.sum()
    if abs(total - 1.0) > 1e-13:
        x = x / total
    return x


def pagerank_power(
    T: TransitionMatrix, v: np.ndarray, config: PageRankConfig
) -> PageRankSolution:
    """Fixed point of x <- (1-rho) T x + rho v by power iteration.

    Converges when the L1 step difference drops below ``config.tolerance``.
    """
    start = time.perf_counter()
    v = validate_teleport_vector(v, T.n)
    rho = config.rho
    if rho == 1.0:
        # The steady state is the teleportation vector itself.
        return PageRankSolution(v.copy(), 0, 0.0, time.perf_counter() - start)
    x = v.copy()
    matrix = T.matrix
    residual = np.inf
    for iteration in range(1, config.max_iterations + 1):
        x_next = (1.0 - rho) * (matrix @ x) + rho * v
        residual = float(np.abs(x_next - x).sum())
        x = x_next
        if residual <= config.tolerance:
            solution = PageRankSolution(
                _finalise(x), iteration, residual, time.perf_counter() - start
            )
            logger.debug("power iteration converged: %s", solution.to_record())
            return solution
    raise ConvergenceError(
        f"power iteration did not reach {config.tolerance} within "
        f"{config.max_iterations} iterations (residual {residual:.3e})",
        residual=residual,
        iterations=config.max_iterations,
    )


def pagerank_linear(
    T: TransitionMatrix, v: np.ndarray, config: PageRankConfig
) -> PageRankSolution:
    """Solve (I - (1-rho) T) pi = rho v with a sparse Krylov solver.

    The contract is the residual bound: the returned scores satisfy an L1
    fixed-point residual no larger than ``config.tolerance``.
    """
    start = time.perf_counter()
    v = validate_teleport_vector(v, T.n)
    rho = config.rho
    if rho == 1.0:
        return PageRankSolution(v.copy(), 0, 0.0, time.perf_counter() - start)
    n = T.n
    system = (sp.identity(n, format="csc") - (1.0 - rho) * T.matrix).tocsc()
    b = rho * v
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    # gmres controls the L2 residual; ||r||_1 <= sqrt(n) ||r||_2.
    atol = config.tolerance / (2.0 * np.sqrt(n))
    x = v.copy()
    for attempt in range(3):
        x, info = spla.gmres(
            system,
            b,
            x0=x,
            atol=atol,
            rtol=0.0,
            restart=min(50, n),
            maxiter=config.max_iterations,
            callback=count,
            callback_type="pr_norm",
        )
        residual = float(np.abs(system @ x - b).sum())
        if info == 0 and residual <= config.tolerance:
            solution = PageRankSolution(
                _finalise(x), iterations, residual, time.perf_counter() - start
            )
            logger.debug("linear solver converged: %s", solution.to_record())
            return solution
        if info < 0:
            break
        atol /= 100.0
    raise SolverError(
        f"linear solver could not certify residual {config.tolerance:.3e} "
        f"(achieved {residual:.3e}, info={info})"
    )


def solve_pagerank(
    T: TransitionMatrix, v: np.ndarray, config: PageRankConfig
) -> PageRankSolution:
    """Dispatch to the solver named in the config."""
    if config.solver == "power":
        return pagerank_power(T, v, config)
    return pagerank_linear(T, v, config)


def unseeded_pagerank(T: TransitionMatrix, config: PageRankConfig) -> PageRankSolution:
    """PageRank with the uniform teleportation vector."""
    return solve_pagerank(T, uniform_teleport(T.n), config)
