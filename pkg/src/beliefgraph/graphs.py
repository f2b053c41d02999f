"""Directed weighted graphs with left-stochastic combination matrices.

Provides the random-graph generators (Erdos-Renyi support augmented with
self-loops, uniform column weights), strong-connectivity checks, edge
perturbation/regeneration for dynamic-topology experiments, spectral
analysis (Perron vector, second eigenvalue, mixing envelope), and the JSON
serialization used by the other modules and the CLI.

Conventions: ``weights[l, k]`` is the weight agent ``k`` assigns to its
in-neighbor ``l``; columns sum to one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

COLUMN_SUM_ATOL = 1e-12
PERRON_ATOL = 1e-10


class ConnectivityError(RuntimeError):
    """Raised when a strongly connected support cannot be sampled in budget."""


class SpectralError(RuntimeError):
    """Raised when power iteration fails to converge (malformed matrix)."""


@dataclass(frozen=True)
class CombinationMatrix:
    """Left-stochastic weight matrix of a directed graph on ``n`` agents."""

    n: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.n, self.n):
            raise ValueError(f"weights shape {w.shape} does not match n={self.n}")
        if np.any(w < 0.0) or np.any(w > 1.0):
            raise ValueError("combination weights must lie in [0, 1]")
        col_sums = w.sum(axis=0)
        if np.any(np.abs(col_sums - 1.0) > COLUMN_SUM_ATOL):
            worst = int(np.argmax(np.abs(col_sums - 1.0)))
            raise ValueError(
                f"column {worst} sums to {col_sums[worst]!r}, not 1 (left-stochastic)"
            )
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def support(self) -> np.ndarray:
        """Boolean adjacency: entry (l, k) true iff edge l -> k exists."""
        return self.weights > 0.0


@dataclass(frozen=True)
class SpectralProfile:
    """Perron vector and mixing-rate constants of a combination matrix.

    Matrix powers approach the rank-one limit at a geometric rate: the
    entrywise gap ``|[A^t]_{lk} - perron[l]|`` is bounded by ``sigma *
    beta**t``, where ``beta2 < beta < 1``.
    """

    perron: np.ndarray
    beta2: float
    sigma: float
    beta: float

    def __post_init__(self):
        u = np.asarray(self.perron, dtype=float)
        if np.any(u <= 0.0):
            raise ValueError("Perron vector must be strictly positive")
        if abs(u.sum() - 1.0) > 1e-10:
            raise ValueError("Perron vector must sum to 1")
        if not 0.0 <= self.beta2 < 1.0:
            raise ValueError("second eigenvalue magnitude must lie in [0, 1)")
        u.setflags(write=False)
        object.__setattr__(self, "perron", u)


def _as_weights(matrix) -> np.ndarray:
    return np.asarray(getattr(matrix, "weights", matrix), dtype=float)


def _support_strongly_connected(support: np.ndarray) -> bool:
    graph = scipy.sparse.csr_matrix(support.astype(np.int8))
    n_comp, _ = scipy.sparse.csgraph.connected_components(
        graph, directed=True, connection="strong"
    )
    return n_comp == 1


def _uniform_column_weights(support: np.ndarray) -> np.ndarray:
    # a_{lk} = 1 / |N_k| over the in-neighborhood of k (self included)
    counts = support.sum(axis=0)
    return support / counts


def is_strongly_connected(matrix) -> bool:
    """True iff every ordered agent pair is linked by a positive-weight path."""
    return _support_strongly_connected(_as_weights(matrix) > 0.0)


def generate_erdos_renyi(
    n: int, p: float, seed, max_attempts: int = 1000
) -> CombinationMatrix:
    """Sample a strongly connected Erdos-Renyi digraph with uniform weights.

    Every ordered off-diagonal pair becomes an edge independently with
    probability ``p``; all self-loops are added. Weights follow the
    uniform-averaging rule over each column's in-neighborhood. Supports
    are resampled until strong connectivity holds, so the edge law is the
    Erdos-Renyi law conditioned on connectivity.
    """
    if n < 2:
        raise ValueError("need at least 2 agents")
    if not 0.0 < p < 1.0:
        raise ValueError("edge probability must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        support = rng.random((n, n)) < p
        np.fill_diagonal(support, True)
        if _support_strongly_connected(support):
            return CombinationMatrix(n, _uniform_column_weights(support))
    raise ConnectivityError(
        f"connectivity unreachable: no strongly connected support in "
        f"{max_attempts} attempts (n={n}, p={p})"
    )


def perturb_edges(
    matrix: CombinationMatrix, flip_prob: float, seed, max_attempts: int = 1000
) -> CombinationMatrix:
    """Flip each off-diagonal adjacency bit independently with ``flip_prob``.

    Self-loops are preserved and weights are re-derived by the uniform rule.
    The flip draw is repeated until the result is strongly connected.
    ``flip_prob=0`` returns the input unchanged.
    """
    if not 0.0 <= flip_prob < 1.0:
        raise ValueError("flip probability must lie in [0, 1)")
    if flip_prob == 0.0:
        return matrix
    rng = np.random.default_rng(seed)
    support0 = matrix.support
    n = matrix.n
    for _ in range(max_attempts):
        flips = rng.random((n, n)) < flip_prob
        np.fill_diagonal(flips, False)
        support = support0 ^ flips
        if _support_strongly_connected(support):
            return CombinationMatrix(n, _uniform_column_weights(support))
    raise ConnectivityError(
        f"connectivity unreachable after {max_attempts} flip draws"
    )


def regenerate_edges(
    matrix: CombinationMatrix, p: float, seed, max_attempts: int = 1000
) -> CombinationMatrix:
    """Draw a fresh Erdos-Renyi support of the same size."""
    return generate_erdos_renyi(matrix.n, p, seed, max_attempts=max_attempts)


def spectral_profile(
    matrix, t_fit: int = 200, max_iter: int = 100_000, tol: float = 1e-13
) -> SpectralProfile:
    """Perron vector plus fitted constants of the power-convergence envelope.

    The Perron vector comes from power iteration, ``beta2`` from a dense
    eigen-decomposition, ``beta`` is the midpoint ``(1 + beta2) / 2``, and
    ``sigma`` is the smallest constant for which the envelope holds over
    ``t = 1 .. t_fit``.
    """
    w = _as_weights(matrix)
    n = w.shape[0]
    u = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = w @ u
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - u)) < tol:
            u = nxt
            break
        u = nxt
    else:
        raise SpectralError("power iteration did not converge; matrix malformed?")
    if np.max(np.abs(w @ u - u)) > PERRON_ATOL:
        raise SpectralError("power iteration fixed point is not an eigenvector")

    mags = np.sort(np.abs(np.linalg.eigvals(w)))[::-1]
    beta2 = float(mags[1]) if n > 1 else 0.0
    beta2 = min(beta2, 1.0 - 1e-15)
    beta = (1.0 + beta2) / 2.0

    # The measured gap plateaus at float resolution once the true gap
    # underflows it; flooring keeps the fitted envelope valid for any
    # reasonable power computation instead of only this one's roundoff.
    gap_floor = 1e-13
    sigma = 0.0
    power = np.eye(n)
    for t in range(1, t_fit + 1):
        power = power @ w
        gap = max(float(np.max(np.abs(power - u[:, None]))), gap_floor)
        sigma = max(sigma, gap / beta**t)
    return SpectralProfile(perron=u, beta2=beta2, sigma=float(sigma), beta=beta)


def save_graph(path, weights, seed=None, learned: bool = False) -> None:
    """Write a graph document (n, 0/1 adjacency, weights, seed) as JSON.

    Weights round-trip bit-exactly through :func:`load_graph`. Learned
    (unconstrained) matrices are stored with ``learned: true`` and skip
    the stochasticity checks on reload.
    """
    w = _as_weights(weights)
    n = int(w.shape[0])
    doc = {
        "n": n,
        "adjacency": (w != 0.0).astype(int).ravel().tolist(),
        "weights": w.ravel().tolist(),
        "seed": seed,
        "learned": bool(learned),
    }
    Path(path).write_text(json.dumps(doc) + "\n")


@dataclass(frozen=True)
class GraphRecord:
    """Deserialized graph file."""

    n: int
    weights: np.ndarray
    adjacency: np.ndarray
    seed: object
    learned: bool

    def to_combination_matrix(self) -> CombinationMatrix:
        if self.learned:
            raise ValueError("learned matrices are not constrained stochastic")
        return CombinationMatrix(self.n, self.weights)


def load_graph(path) -> GraphRecord:
    doc = json.loads(Path(path).read_text())
    n = int(doc["n"])
    weights = np.asarray(doc["weights"], dtype=float).reshape(n, n)
    adjacency = np.asarray(doc["adjacency"], dtype=int).reshape(n, n)
    return GraphRecord(
        n=n,
        weights=weights,
        adjacency=adjacency,
        seed=doc.get("seed"),
        learned=bool(doc.get("learned", False)),
    )
