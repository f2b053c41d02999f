"""Agent-to-agent influence scores and most-influential-path extraction.

A walk from one agent to another carries an influence score equal to the
product of its edge weights, discounted geometrically in its length and
scaled by the adaptation step. Aggregating over all walks up to a hop
budget gives the pairwise influence measure; the best single walk is found
by Dijkstra search on a hop-layered graph with edge weights
``-log a - log(1 - delta)``, all positive.

Sensitivity semantics: the aggregate equals the sum of partial derivatives
of the log-belief matrix with respect to past log-likelihood entries,
which ``influence_derivative_check`` verifies against finite differences
of the unrolled recursion.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .likelihoods import LogRatioMatrix
from .social import recursion_reference


class InvalidPathError(ValueError):
    """Raised when a queried path uses a missing edge."""


class NoPathError(RuntimeError):
    """Raised when the target is unreachable within the hop budget."""


@dataclass(frozen=True)
class InfluencePath:
    """An ordered walk between two agents with its influence score."""

    nodes: tuple
    score: float

    @property
    def length(self) -> int:
        return len(self.nodes) - 1


@dataclass(frozen=True)
class InfluenceMap:
    """Influence of every other agent on a fixed target, raw and normalized."""

    target: int
    horizon: int
    sources: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray
    degenerate: bool


def _as_weights(matrix) -> np.ndarray:
    return np.asarray(getattr(matrix, "weights", matrix), dtype=float)


def path_influence(matrix, path, delta: float, theta_count: int) -> float:
    """Score of one walk: hypothesis-count scale, hop discount, edge product."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    nodes = list(path)
    if len(nodes) < 1:
        raise InvalidPathError("a path needs at least one node")
    w = _as_weights(matrix)
    product = 1.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        edge = w[a, b]
        if edge <= 0.0:
            raise InvalidPathError(f"edge {a}->{b} is absent")
        product *= edge
    r = len(nodes) - 1
    return (theta_count - 1) * delta * (1.0 - delta) ** r * product


def eta(matrix, source: int, target: int, d: int, delta: float, theta_count: int) -> float:
    """Aggregate influence of ``source`` on ``target`` over walks of <= d hops.

    Computed by weighted matrix powering; the zero-hop term contributes
    only on the diagonal.
    """
    if d < 0:
        raise ValueError("hop budget must be nonnegative")
    w = _as_weights(matrix)
    vec = np.zeros(w.shape[0])
    vec[target] = 1.0
    total = 0.0
    discount = 1.0
    for _ in range(d + 1):
        total += discount * vec[source]
        discount *= 1.0 - delta
        vec = w @ vec
    return (theta_count - 1) * delta * total


def influence_map(
    matrix, target: int, d: int, delta: float, theta_count: int
) -> InfluenceMap:
    """Influence of all other agents on the target, normalized to [0, 1]."""
    w = _as_weights(matrix)
    n = w.shape[0]
    vec = np.zeros(n)
    vec[target] = 1.0
    totals = np.zeros(n)
    discount = 1.0
    for _ in range(d + 1):
        totals += discount * vec
        discount *= 1.0 - delta
        vec = w @ vec
    totals *= (theta_count - 1) * delta
    sources = np.array([k for k in range(n) if k != target])
    raw = totals[sources]
    peak = raw.max() if raw.size else 0.0
    if peak > 0.0:
        return InfluenceMap(target, d, sources, raw, raw / peak, False)
    return InfluenceMap(target, d, sources, raw, np.zeros_like(raw), True)


def most_influential_path(
    matrix, source: int, target: int, d: int, delta: float, theta_count: int = 2
) -> InfluencePath:
    """Best single walk from source to target within the hop budget.

    Dijkstra on (node, hops-used) states with positive edge weights
    ``-log a - log(1 - delta)``; cycles only add weight, so the optimum is
    simple. Ties resolve to fewer hops, then lexicographic node order.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if d < 0:
        raise ValueError("hop budget must be nonnegative")
    w = _as_weights(matrix)
    n = w.shape[0]
    if source == target:
        return InfluencePath((source,), (theta_count - 1) * delta)

    hop_cost = -np.log(1.0 - delta)
    out_edges = [
        [(k, -np.log(w[l, k]) + hop_cost) for k in range(n) if w[l, k] > 0.0]
        for l in range(n)
    ]
    best: dict = {}
    start = (0.0, (source,))
    heap = [start]
    best[(source, 0)] = start
    answer = None
    while heap:
        dist, path = heapq.heappop(heap)
        node, hops = path[-1], len(path) - 1
        if best.get((node, hops)) != (dist, path):
            continue
        if node == target:
            candidate = (dist, hops, path)
            if answer is None or candidate < answer:
                answer = candidate
            continue
        if hops == d:
            continue
        for nxt, cost in out_edges[node]:
            state = (dist + cost, path + (nxt,))
            key = (nxt, hops + 1)
            if key not in best or state < best[key]:
                best[key] = state
                heapq.heappush(heap, state)
    if answer is None:
        raise NoPathError(
            f"agent {target} unreachable from {source} within {d} hops"
        )
    _, _, path = answer
    return InfluencePath(path, path_influence(w, path, delta, theta_count))


def influence_derivative_check(
    matrix, i: int, t: int, delta: float, seed=None, h: float = 1e-6, theta_count: int = 3
):
    """Closed-form vs numerical sensitivities of the log-belief recursion.

    Returns two (n, n) arrays over (source, observed) agents: the
    closed-form partial of the step-``i`` log-belief matrix with respect
    to the step-``t`` log-likelihood matrix, and a central finite
    difference through an unrolled run of the recursion on a random
    drive sequence.
    """
    if not 1 <= t <= i:
        raise ValueError("need 1 <= t <= i (the drive sequence starts at step 1)")
    w = _as_weights(matrix)
    n = w.shape[0]
    rng = np.random.default_rng(seed)
    drives = rng.standard_normal((i, n, theta_count - 1))

    closed = delta * (1.0 - delta) ** (i - t) * np.linalg.matrix_power(w, i - t)

    def unroll(perturb_agent=None, bump=0.0):
        lam = LogRatioMatrix(np.zeros((n, theta_count - 1)), kind="belief")
        for step_idx in range(1, i + 1):
            drive = drives[step_idx - 1]
            if perturb_agent is not None and step_idx == t:
                drive = drive.copy()
                drive[perturb_agent, 0] += bump
            lam = recursion_reference(lam, w, drive, delta)
        return lam.values

    numerical = np.empty((n, n))
    for source in range(n):
        plus = unroll(source, h)
        minus = unroll(source, -h)
        numerical[source] = (plus[:, 0] - minus[:, 0]) / (2.0 * h)
    return closed, numerical
