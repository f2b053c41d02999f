"""Per-agent categorical likelihood families over a finite hypothesis set.

Owns random model generation (uniform-simplex rows clipped away from zero,
resampled until the hypotheses are collectively identifiable), observation
sampling, KL divergences, log-likelihood-ratio matrices for a drawn batch,
and their closed-form mean (a difference of KL divergences).

The hypothesis set is represented as indices ``0 .. theta_count-1``; the
reference hypothesis for all ratio matrices is index 0 unless stated.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ROW_SUM_ATOL = 1e-12
IDENTIFIABILITY_MIN_KL = 1e-6


class IdentifiabilityError(RuntimeError):
    """Raised when no identifiable likelihood table is found in budget."""


@dataclass(frozen=True)
class LikelihoodModel:
    """Categorical observation distributions, one per (agent, hypothesis).

    ``betas[k, z, t]`` is the probability that agent ``k`` observes symbol
    ``z`` when hypothesis ``t`` is true; rows beyond ``z_counts[k]`` are
    zero padding. ``log_ratio_bound`` is the exact maximum absolute
    log-likelihood ratio over all agents, symbols and hypothesis pairs.
    """

    n: int
    theta_count: int
    z_counts: np.ndarray
    betas: np.ndarray
    log_ratio_bound: float

    def __post_init__(self):
        z_counts = np.asarray(self.z_counts, dtype=np.int64)
        betas = np.asarray(self.betas, dtype=float)
        if z_counts.shape != (self.n,):
            raise ValueError("z_counts must have one entry per agent")
        if betas.shape != (self.n, int(z_counts.max()), self.theta_count):
            raise ValueError(f"betas shape {betas.shape} inconsistent with dims")
        for k in range(self.n):
            zk = int(z_counts[k])
            block = betas[k, :zk, :]
            if np.any(block <= 0.0):
                raise ValueError(f"agent {k}: probabilities must be positive")
            sums = block.sum(axis=0)
            if np.any(np.abs(sums - 1.0) > ROW_SUM_ATOL):
                raise ValueError(f"agent {k}: symbol distributions must sum to 1")
            if np.any(betas[k, zk:, :] != 0.0):
                raise ValueError(f"agent {k}: padding beyond z_counts must be 0")
        if _exact_log_ratio_bound(betas, z_counts) > self.log_ratio_bound + 1e-12:
            raise ValueError("log_ratio_bound does not bound the table's ratios")
        z_counts.setflags(write=False)
        betas.setflags(write=False)
        object.__setattr__(self, "z_counts", z_counts)
        object.__setattr__(self, "betas", betas)

    def log_betas(self) -> np.ndarray:
        """Elementwise log of the table; padded entries mapped to 0."""
        safe = np.where(self.betas > 0.0, self.betas, 1.0)
        return np.log(safe)


@dataclass(frozen=True)
class ObservationBatch:
    """One drawn symbol per agent at a single time step."""

    time: int
    symbols: np.ndarray

    def __post_init__(self):
        symbols = np.asarray(self.symbols, dtype=np.int64)
        symbols.setflags(write=False)
        object.__setattr__(self, "symbols", symbols)


@dataclass(frozen=True)
class LogRatioMatrix:
    """n x (theta_count - 1) matrix of log ratios against a reference.

    ``kind`` distinguishes log-belief ratios from log-likelihood ratios;
    column ``j`` corresponds to the ``j``-th non-reference hypothesis in
    ascending index order.
    """

    values: np.ndarray
    reference: int = 0
    kind: str = "likelihood"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError("log-ratio entries must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def ratio_values(obj) -> np.ndarray:
    """Accept a LogRatioMatrix or a bare array and return the array."""
    return np.asarray(getattr(obj, "values", obj), dtype=float)


def nonreference_indices(theta_count: int, theta0: int) -> np.ndarray:
    idx = np.arange(theta_count)
    return idx[idx != theta0]


def _exact_log_ratio_bound(betas: np.ndarray, z_counts: np.ndarray) -> float:
    bound = 0.0
    for k in range(betas.shape[0]):
        block = np.log(betas[k, : int(z_counts[k]), :])
        spread = block.max(axis=1) - block.min(axis=1)
        bound = max(bound, float(spread.max()))
    return bound


def generate_model(
    n: int,
    theta_count: int,
    z_count: int,
    epsilon: float = 0.05,
    seed=None,
    true_theta: int = 0,
    max_attempts: int = 1000,
) -> LikelihoodModel:
    """Draw a random identifiable likelihood table.

    Each (agent, hypothesis) distribution is uniform on the simplex, then
    clipped to ``[epsilon, 1 - epsilon]`` and renormalized so that all
    log-likelihood ratios are finite. Tables are redrawn until, for every
    wrong hypothesis, some agent separates it from ``true_theta`` by a KL
    divergence above ``1e-6``.
    """
    if theta_count < 2:
        raise ValueError("need at least 2 hypotheses")
    if z_count < 2:
        raise ValueError("need at least 2 observation symbols")
    if not 0.0 < epsilon < 1.0 / z_count:
        raise ValueError("epsilon must lie in (0, 1/z_count)")
    if not 0 <= true_theta < theta_count:
        raise ValueError("true_theta out of range")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        raw = rng.dirichlet(np.ones(z_count), size=(n, theta_count))
        clipped = np.clip(raw, epsilon, 1.0 - epsilon)
        clipped /= clipped.sum(axis=2, keepdims=True)
        betas = np.ascontiguousarray(np.swapaxes(clipped, 1, 2))
        if _identifiable(betas, true_theta):
            z_counts = np.full(n, z_count, dtype=np.int64)
            bound = _exact_log_ratio_bound(betas, z_counts)
            return LikelihoodModel(
                n=n,
                theta_count=theta_count,
                z_counts=z_counts,
                betas=betas,
                log_ratio_bound=bound,
            )
    raise IdentifiabilityError(
        f"no identifiable model in {max_attempts} attempts; "
        "parameters too degenerate"
    )


def _identifiable(betas: np.ndarray, true_theta: int) -> bool:
    # for each wrong hypothesis, some agent has KL(true || wrong) > 1e-6
    p = betas[:, :, true_theta]
    with np.errstate(divide="ignore", invalid="ignore"):
        log_p = np.where(p > 0.0, np.log(np.where(p > 0.0, p, 1.0)), 0.0)
        log_q = np.log(np.where(betas > 0.0, betas, 1.0))
    kl = np.einsum("kz,kzt->kt", p, log_p[:, :, None] - log_q)
    for t in range(betas.shape[2]):
        if t == true_theta:
            continue
        if kl[:, t].max() <= IDENTIFIABILITY_MIN_KL:
            return False
    return True


def categorical_from_uniform(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Invert per-row CDFs at the given uniforms.

    ``probs[k]`` is agent ``k``'s distribution over symbols (padding zeros
    allowed past the support); ``u[k]`` a uniform draw in [0, 1).
    """
    cdf = np.cumsum(probs, axis=1)
    z = (cdf < u[:, None]).sum(axis=1)
    return np.minimum(z, probs.shape[1] - 1).astype(np.int64)


def sample_observations(
    model: LikelihoodModel, true_theta: int, rng, time: int = 0
) -> ObservationBatch:
    """Draw one symbol per agent from its ``true_theta`` distribution."""
    u = rng.random(model.n)
    symbols = categorical_from_uniform(model.betas[:, :, true_theta], u)
    return ObservationBatch(time=time, symbols=symbols)


def kl_divergence(model: LikelihoodModel, k: int, theta_a: int, theta_b: int) -> float:
    """KL divergence between agent ``k``'s distributions for two hypotheses."""
    zk = int(model.z_counts[k])
    p = model.betas[k, :zk, theta_a]
    q = model.betas[k, :zk, theta_b]
    return float(np.sum(p * (np.log(p) - np.log(q))))


def kl_table(model: LikelihoodModel) -> np.ndarray:
    """All pairwise divergences; entry (k, a, b) = KL of a from b at agent k."""
    log_b = model.log_betas()
    table = np.empty((model.n, model.theta_count, model.theta_count))
    for a in range(model.theta_count):
        p = model.betas[:, :, a]
        table[:, a, :] = np.einsum(
            "kz,kzt->kt", p, log_b[:, :, a][:, :, None] - log_b
        )
    return table


def log_likelihood_ratio_matrix(
    model: LikelihoodModel, batch: ObservationBatch, theta0: int = 0
) -> LogRatioMatrix:
    """Log-likelihood ratios of the drawn symbols against the reference."""
    log_b = model.log_betas()
    rows = log_b[np.arange(model.n), batch.symbols, :]
    cols = nonreference_indices(model.theta_count, theta0)
    values = rows[:, [theta0]] - rows[:, cols]
    return LogRatioMatrix(values=values, reference=theta0, kind="likelihood")


def mean_likelihood_matrix(
    model: LikelihoodModel, assumed_theta: int, theta0: int = 0
) -> LogRatioMatrix:
    """Expected log-likelihood-ratio matrix under ``assumed_theta``.

    Entry (k, j) is the difference of KL divergences from the assumed
    hypothesis to the ``j``-th non-reference hypothesis and to the
    reference.
    """
    table = kl_table(model)
    cols = nonreference_indices(model.theta_count, theta0)
    values = table[:, assumed_theta, :][:, cols] - table[:, assumed_theta, [theta0]]
    return LogRatioMatrix(values=values, reference=theta0, kind="likelihood")


def mean_likelihood_stack(model: LikelihoodModel, theta0: int = 0) -> np.ndarray:
    """Mean matrices for every possible assumed hypothesis, stacked.

    Shape (theta_count, n, theta_count - 1); slice ``t`` is the mean matrix
    when observations follow hypothesis ``t``.
    """
    table = kl_table(model)
    cols = nonreference_indices(model.theta_count, theta0)
    stack = table[:, :, cols] - table[:, :, [theta0]]
    return np.ascontiguousarray(np.swapaxes(stack, 0, 1))


def min_second_moment_eigenvalue(
    model: LikelihoodModel,
    theta0: int,
    true_theta: int,
    samples: int,
    seed=None,
) -> float:
    """Smallest eigenvalue of the sampled second moment of the ratio matrix.

    Empirical check that the log-likelihood-ratio matrices have a uniformly
    positive-definite second moment; a (near-)zero value flags an agent
    whose likelihoods do not separate the hypotheses.
    """
    if samples < model.n:
        raise ValueError("need at least n samples")
    rng = np.random.default_rng(seed)
    log_b = model.log_betas()
    cols = nonreference_indices(model.theta_count, theta0)
    moment = np.zeros((model.n, model.n))
    done = 0
    while done < samples:
        chunk = min(10_000, samples - done)
        u = rng.random((chunk, model.n))
        cdf = np.cumsum(model.betas[:, :, true_theta], axis=1)
        z = (cdf[None, :, :] < u[:, :, None]).sum(axis=2)
        np.minimum(z, model.betas.shape[1] - 1, out=z)
        rows = log_b[np.arange(model.n)[None, :], z, :]
        lr = rows[:, :, [theta0]] - rows[:, :, cols]
        moment += np.einsum("skj,slj->kl", lr, lr)
        done += chunk
    moment /= samples
    return float(np.linalg.eigvalsh(moment)[0])


def save_model(path, model: LikelihoodModel, true_theta: int, seed=None) -> None:
    """Write the model document (dims, true state, full table, bound)."""
    doc = {
        "n": model.n,
        "theta_count": model.theta_count,
        "z_counts": model.z_counts.tolist(),
        "true_theta": int(true_theta),
        "betas": model.betas.ravel().tolist(),
        "log_ratio_bound": model.log_ratio_bound,
        "seed": seed,
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_model(path):
    """Read a model document; returns (model, true_theta, seed)."""
    doc = json.loads(Path(path).read_text())
    z_counts = np.asarray(doc["z_counts"], dtype=np.int64)
    betas = np.asarray(doc["betas"], dtype=float).reshape(
        doc["n"], int(z_counts.max()), doc["theta_count"]
    )
    model = LikelihoodModel(
        n=int(doc["n"]),
        theta_count=int(doc["theta_count"]),
        z_counts=z_counts,
        betas=betas,
        log_ratio_bound=float(doc["log_ratio_bound"]),
    )
    return model, int(doc["true_theta"]), doc.get("seed")
