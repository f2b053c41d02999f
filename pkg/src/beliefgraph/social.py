"""Adaptive social learning engine.

Agents hold belief vectors over the hypothesis set. Each step blends the
previous belief with the fresh observation's likelihood (adapt), then takes
a weighted geometric mean of neighbors' intermediate beliefs (combine).
All arithmetic runs in log space with one exp-normalize per row, which
keeps every belief entry strictly positive.

The published quantity is the intermediate belief (post-adapt); the
log-belief-ratio matrix built from it obeys a linear recursion in the
log-likelihood ratios, implemented here as ``recursion_reference`` and used
by the graph learner and the test surface as an independent oracle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .likelihoods import (
    LikelihoodModel,
    LogRatioMatrix,
    ObservationBatch,
    nonreference_indices,
    ratio_values,
    sample_observations,
)

BELIEF_ROW_ATOL = 1e-12


@dataclass(frozen=True)
class BeliefState:
    """Beliefs and intermediate beliefs of all agents at one time step."""

    mu: np.ndarray
    psi: np.ndarray
    time: int

    def __post_init__(self):
        for name in ("mu", "psi"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if np.any(arr <= 0.0):
                raise ValueError(f"{name} must be strictly positive")
            if np.any(np.abs(arr.sum(axis=1) - 1.0) > BELIEF_ROW_ATOL):
                raise ValueError(f"{name} rows must sum to 1")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _normalize_log_rows(log_rows: np.ndarray) -> np.ndarray:
    shifted = log_rows - log_rows.max(axis=1, keepdims=True)
    shifted -= np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return shifted


def initial_state(
    n: int, theta_count: int, matrix, psi0: np.ndarray | None = None
) -> BeliefState:
    """Time-0 state: uniform intermediate beliefs unless overridden.

    The time-0 belief is the combine of the intermediate belief, which
    makes the log-ratio recursion exact from the very first step for any
    positive initialization.
    """
    if psi0 is None:
        psi = np.full((n, theta_count), 1.0 / theta_count)
    else:
        psi = np.asarray(psi0, dtype=float)
        psi = psi / psi.sum(axis=1, keepdims=True)
    mu = combine_step(psi, matrix)
    return BeliefState(mu=mu, psi=psi, time=0)


def adapt_step(
    state: BeliefState,
    model: LikelihoodModel,
    batch: ObservationBatch,
    delta: float,
) -> np.ndarray:
    """Blend prior beliefs with the drawn observations' likelihoods.

    Returns the intermediate beliefs, proportional to
    ``likelihood**delta * mu**(1-delta)`` per row.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    log_b = model.log_betas()
    log_like = log_b[np.arange(model.n), batch.symbols, :]
    log_psi = delta * log_like + (1.0 - delta) * np.log(state.mu)
    return np.exp(_normalize_log_rows(log_psi))


def combine_step(psi: np.ndarray, matrix) -> np.ndarray:
    """Weighted geometric mean of neighbors' intermediate beliefs."""
    weights = np.asarray(getattr(matrix, "weights", matrix), dtype=float)
    log_mu = weights.T @ np.log(psi)
    return np.exp(_normalize_log_rows(log_mu))


def step(
    state: BeliefState,
    model: LikelihoodModel,
    matrix,
    true_theta: int,
    delta: float,
    rng,
) -> tuple[BeliefState, ObservationBatch]:
    """Advance one step: sample observations, adapt, combine."""
    batch = sample_observations(model, true_theta, rng, time=state.time + 1)
    psi = adapt_step(state, model, batch, delta)
    mu = combine_step(psi, matrix)
    return BeliefState(mu=mu, psi=psi, time=state.time + 1), batch


def log_belief_matrix(state: BeliefState, theta0: int = 0) -> LogRatioMatrix:
    """Log ratios of intermediate beliefs against the reference hypothesis."""
    log_psi = np.log(state.psi)
    cols = nonreference_indices(state.psi.shape[1], theta0)
    values = log_psi[:, [theta0]] - log_psi[:, cols]
    return LogRatioMatrix(values=values, reference=theta0, kind="belief")


def recursion_reference(
    prev_lambda, matrix, batch_lr, delta: float
) -> LogRatioMatrix:
    """One step of the linear log-ratio recursion.

    Independent oracle for the engine: applying this to the previous
    log-belief matrix and the batch's log-likelihood matrix must reproduce
    the stepped engine's log-belief matrix.
    """
    prev = ratio_values(prev_lambda)
    lr = ratio_values(batch_lr)
    if prev.shape != lr.shape:
        raise ValueError(f"shape mismatch: {prev.shape} vs {lr.shape}")
    weights = np.asarray(getattr(matrix, "weights", matrix), dtype=float)
    values = (1.0 - delta) * (weights.T @ prev) + delta * lr
    reference = getattr(prev_lambda, "reference", 0)
    return LogRatioMatrix(values=values, reference=reference, kind="belief")


def estimate_state_agent(state: BeliefState, k: int) -> int:
    """Agent k's hypothesis estimate: argmax of its intermediate belief."""
    return int(np.argmax(state.psi[k]))


def estimate_states(state: BeliefState) -> np.ndarray:
    """All agents' argmax estimates (ties to the lowest index)."""
    return np.argmax(state.psi, axis=1)


def majority_vote(estimates) -> int:
    """Most frequent hypothesis among the estimates, ties to lowest index."""
    counts = np.bincount(np.asarray(estimates, dtype=np.int64))
    return int(np.argmax(counts))
