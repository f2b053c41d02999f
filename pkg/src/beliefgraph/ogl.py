"""Online recovery of the combination matrix from public beliefs.

The learner treats the log-belief-ratio recursion as a linear system
driven by the (unobserved) log-likelihood ratios, replaces the drive with
its closed-form mean, and descends the resulting quadratic residual by
stochastic gradient. Two variants: the mean is taken under the known true
state, or under the per-step majority vote of the agents' own estimates.

``run_online`` advances the social-learning engine and the learner in
lockstep through one of the compiled/numpy segment kernels, applying
scheduled topology and true-state changes between segments.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import graphs
from ._kernels import run_segment
from .likelihoods import LikelihoodModel, mean_likelihood_stack, ratio_values

MODES = ("known", "vote")


class DegenerateMomentError(RuntimeError):
    """Raised when sampled moments cannot support the requested estimate."""


@dataclass(frozen=True)
class LearnerState:
    """Current matrix estimate plus the rates it was produced with."""

    estimate: np.ndarray
    mu_step: float
    delta: float
    reference: int = 0
    mode: str = "known"

    def __post_init__(self):
        est = np.asarray(self.estimate, dtype=float)
        if not np.all(np.isfinite(est)):
            raise ValueError("estimate must be finite")
        if self.mu_step < 0.0:
            raise ValueError("learning rate must be nonnegative")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        object.__setattr__(self, "estimate", est)


def initial_learner(
    n: int, mu_step: float, delta: float, mode: str = "known", reference: int = 0
) -> LearnerState:
    """Uniform left-stochastic starting estimate."""
    return LearnerState(
        estimate=np.full((n, n), 1.0 / n),
        mu_step=mu_step,
        delta=delta,
        reference=reference,
        mode=mode,
    )


@dataclass(frozen=True)
class MsdTrace:
    """Per-step squared Frobenius deviation from the current true matrix."""

    steps: np.ndarray
    msd: np.ndarray
    theta_hat: np.ndarray
    mode: str
    events: tuple = ()

    def __post_init__(self):
        if np.any(self.msd < 0.0):
            raise ValueError("squared deviations cannot be negative")


@dataclass(frozen=True)
class BeliefTrace:
    """Published intermediate beliefs per step, with the network vote."""

    steps: np.ndarray
    psi: np.ndarray
    theta_hat: np.ndarray
    mu: np.ndarray | None = None


@dataclass(frozen=True)
class StateChange:
    step: int
    new_theta: int
    kind: str = field(default="state-change", init=False)


@dataclass(frozen=True)
class RegenerateEdges:
    step: int
    p: float
    kind: str = field(default="regenerate-edges", init=False)


@dataclass(frozen=True)
class EdgeChurn:
    step: int
    flip_prob: float
    period: int = 500
    kind: str = field(default="churn", init=False)


def _residual(estimate, lambda_now, lambda_prev, mean_lr, delta):
    lam_now = ratio_values(lambda_now)
    lam_prev = ratio_values(lambda_prev)
    mlr = ratio_values(mean_lr)
    if lam_now.shape != lam_prev.shape or lam_now.shape != mlr.shape:
        raise ValueError("log-ratio matrices must share one shape")
    return lam_now - (1.0 - delta) * (estimate.T @ lam_prev) - delta * mlr


def loss(estimate, lambda_now, lambda_prev, mean_lr, delta: float) -> float:
    """Half squared Frobenius norm of the recursion residual."""
    r = _residual(np.asarray(estimate, dtype=float), lambda_now, lambda_prev, mean_lr, delta)
    return 0.5 * float(np.einsum("ij,ij->", r, r))


def gradient(estimate, lambda_now, lambda_prev, mean_lr, delta: float) -> np.ndarray:
    """Gradient of :func:`loss` with respect to the matrix estimate."""
    est = np.asarray(estimate, dtype=float)
    r = _residual(est, lambda_now, lambda_prev, mean_lr, delta)
    return -(1.0 - delta) * (ratio_values(lambda_prev) @ r.T)


def ogl_update(state: LearnerState, lambda_now, lambda_prev, mean_lr) -> LearnerState:
    """One stochastic-gradient step; no projection is applied."""
    grad = gradient(state.estimate, lambda_now, lambda_prev, mean_lr, state.delta)
    return replace(state, estimate=state.estimate - state.mu_step * grad)


def msd(a_star, estimate) -> float:
    """Squared Frobenius deviation between true and estimated matrices."""
    diff = np.asarray(getattr(a_star, "weights", a_star), dtype=float) - np.asarray(
        estimate, dtype=float
    )
    return float(np.einsum("ij,ij->", diff, diff))


@dataclass(frozen=True)
class RunResult:
    """Everything produced by one online run."""

    learner: LearnerState
    trace: MsdTrace
    matrix: graphs.CombinationMatrix
    true_theta: int
    beliefs: BeliefTrace | None = None
    lambdas: np.ndarray | None = None


def _expand_schedule(schedule, steps: int):
    last = 0
    applications = []
    for event in schedule:
        if event.step <= last:
            raise ValueError("event steps must be strictly increasing")
        last = event.step
        if isinstance(event, EdgeChurn):
            if event.period < 1:
                raise ValueError("churn period must be positive")
            applications.extend(
                (s, event) for s in range(event.step, steps + 1, event.period)
            )
        else:
            if event.step <= steps:
                applications.append((event.step, event))
    applications.sort(key=lambda pair: pair[0])
    return applications


def run_online(
    matrix: graphs.CombinationMatrix,
    model: LikelihoodModel,
    true_theta: int,
    steps: int,
    delta: float,
    mu_step: float,
    mode: str = "known",
    seed=None,
    schedule=(),
    learn: bool = True,
    record_beliefs: bool = False,
    record_mu: bool = False,
    record_lambdas: bool = False,
) -> RunResult:
    """Run the engine and the learner in lockstep for ``steps`` steps.

    Scheduled events apply immediately before the step they name, so the
    trace reflects them from that step onward; deviation is always scored
    against the current true matrix. Event randomness derives from
    ``seed + 1000 + step`` so runs are reproducible end to end.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    n, theta_count = model.n, model.theta_count
    if matrix.n != n:
        raise ValueError("graph and model disagree on the number of agents")

    rng = np.random.default_rng(seed)
    log_betas = model.log_betas()
    lr_stack = mean_likelihood_stack(model)
    log_mu = np.full((n, theta_count), -np.log(theta_count))
    lambda_prev = np.zeros((n, theta_count - 1))
    learner = initial_learner(n, mu_step, delta, mode=mode)
    estimate = learner.estimate.copy()

    msd_trace = np.zeros(steps)
    theta_hat = np.zeros(steps, dtype=np.int64)
    lambda_trace = (
        np.empty((steps, n, theta_count - 1))
        if record_lambdas
        else np.empty((0, n, theta_count - 1))
    )
    psi_trace = (
        np.empty((steps, n, theta_count)) if record_beliefs else np.empty((0, n, theta_count))
    )
    mu_trace = (
        np.empty((steps, n, theta_count)) if record_mu else np.empty((0, n, theta_count))
    )

    applications = _expand_schedule(schedule, steps)
    markers = []
    app_idx = 0
    pos = 0
    current = matrix
    theta_now = true_theta
    obs_cdf = np.cumsum(model.betas[:, :, theta_now], axis=1)

    while pos < steps or app_idx < len(applications):
        next_app = applications[app_idx][0] if app_idx < len(applications) else steps + 1
        if next_app > steps:
            seg_end = steps
        else:
            seg_end = next_app - 1
        if seg_end > pos:
            length = seg_end - pos
            uniforms = rng.random((length, n))
            run_segment(
                log_mu,
                lambda_prev,
                estimate,
                current.weights,
                log_betas,
                obs_cdf,
                lr_stack,
                uniforms,
                theta_now,
                delta,
                mu_step,
                mode == "vote",
                learn,
                msd_trace[pos:seg_end],
                theta_hat[pos:seg_end],
                lambda_trace[pos:seg_end] if record_lambdas else lambda_trace,
                psi_trace[pos:seg_end] if record_beliefs else psi_trace,
                mu_trace[pos:seg_end] if record_mu else mu_trace,
            )
            if not (np.all(np.isfinite(lambda_prev)) and np.all(np.isfinite(estimate))):
                raise FloatingPointError("log-ratio or estimate overflow")
            pos = seg_end
        if app_idx >= len(applications):
            break
        app_step, event = applications[app_idx]
        app_idx += 1
        if app_step > steps:
            break
        event_seed = None if seed is None else seed + 1000 + app_step
        if isinstance(event, StateChange):
            theta_now = event.new_theta
            obs_cdf = np.cumsum(model.betas[:, :, theta_now], axis=1)
        elif isinstance(event, RegenerateEdges):
            current = graphs.regenerate_edges(current, event.p, event_seed)
        elif isinstance(event, EdgeChurn):
            current = graphs.perturb_edges(current, event.flip_prob, event_seed)
        else:
            raise TypeError(f"unknown schedule event {event!r}")
        markers.append((app_step, event.kind))

    learner = replace(learner, estimate=estimate)
    trace = MsdTrace(
        steps=np.arange(1, steps + 1),
        msd=msd_trace,
        theta_hat=theta_hat,
        mode=mode,
        events=tuple(markers),
    )
    beliefs = None
    if record_beliefs:
        beliefs = BeliefTrace(
            steps=np.arange(1, steps + 1),
            psi=psi_trace,
            theta_hat=theta_hat,
            mu=mu_trace if record_mu else None,
        )
    return RunResult(
        learner=learner,
        trace=trace,
        matrix=current,
        true_theta=theta_now,
        beliefs=beliefs,
        lambdas=lambda_trace if record_lambdas else None,
    )


@dataclass(frozen=True)
class BoundEstimate:
    """Sampled steady-state constants and the resulting deviation bound."""

    nu: float
    kappa: float
    alpha: float
    gamma: float
    bound: float
    degenerate: bool


def steady_state_bound(
    lambda_samples, lr_samples, delta: float, mu_step: float
) -> BoundEstimate:
    """Estimate the steady-state deviation bound from sampled matrices.

    ``lambda_samples`` and ``lr_samples`` are stacks of log-belief-ratio
    and log-likelihood-ratio matrices. Returns curvature bounds from the
    sampled second moment, the noise constant from the sampled ratio
    covariance, and the bound ``mu^2 gamma / (1 - alpha)``. Degenerate
    moments (all-zero samples, or rates that null the curvature) are
    flagged and yield a NaN bound.
    """
    lams = np.asarray(lambda_samples, dtype=float)
    lrs = np.asarray(lr_samples, dtype=float)
    if lams.ndim != 3 or lrs.ndim != 3:
        raise ValueError("expected stacks of matrices (samples, n, thetas-1)")
    n = lams.shape[1]
    if lams.shape[0] < n:
        raise ValueError("need at least n samples")
    second = np.einsum("skj,slj->kl", lams, lams) / lams.shape[0]
    eigs = np.linalg.eigvalsh(second)
    nu = (1.0 - delta) ** 2 * float(eigs[0])
    kappa = (1.0 - delta) ** 2 * float(eigs[-1])
    centered = lrs - lrs.mean(axis=0)
    cov = np.einsum("skj,slj->kl", centered, centered) / lrs.shape[0]
    gamma = delta**2 * kappa * n * float(np.linalg.eigvalsh(cov)[-1])
    alpha = 1.0 - 2.0 * mu_step * nu
    degenerate = nu <= 1e-15 or alpha >= 1.0
    bound = float("nan") if degenerate else mu_step**2 * gamma / (1.0 - alpha)
    return BoundEstimate(
        nu=nu, kappa=kappa, alpha=alpha, gamma=gamma, bound=bound, degenerate=degenerate
    )


def threshold_edges(estimate, tau_edge: float) -> np.ndarray:
    """Binary adjacency: entries strictly above the threshold."""
    if tau_edge < 0.0:
        raise ValueError("threshold must be nonnegative")
    return (np.asarray(estimate, dtype=float) > tau_edge).astype(np.int8)


class KmeansResult(NamedTuple):
    adjacency: np.ndarray
    degenerate: bool


def kmeans_binarize(estimate) -> KmeansResult:
    """Two-means split of all entries; the larger-centroid cluster is edges.

    Centroids start at the minimum and maximum entry and Lloyd iterations
    run to a fixed point, so the result is deterministic. A constant
    matrix cannot be split and comes back empty with the degenerate flag.
    """
    values = np.asarray(estimate, dtype=float)
    if values.shape[0] < 2:
        raise ValueError("need at least 2 agents")
    flat = values.ravel()
    lo, hi = float(flat.min()), float(flat.max())
    if lo == hi:
        return KmeansResult(np.zeros(values.shape, dtype=np.int8), True)
    assign = np.abs(flat - lo) > np.abs(flat - hi)
    for _ in range(100):
        c0 = flat[~assign].mean()
        c1 = flat[assign].mean()
        new_assign = np.abs(flat - c0) > np.abs(flat - c1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    adjacency = assign.reshape(values.shape).astype(np.int8)
    return KmeansResult(adjacency, False)


def postprocess_learned(estimate, tau_edge: float) -> np.ndarray:
    """Threshold a learned matrix and renormalize columns to weights.

    Small and negative entries are removed; surviving columns are scaled
    to sum to one so the result can serve the influence analyses.
    """
    w = np.where(np.asarray(estimate, dtype=float) > tau_edge, estimate, 0.0)
    col = w.sum(axis=0)
    return w / np.where(col > 0.0, col, 1.0)
