"""Pure-numpy segment runner: reference implementation of the hot loop.

One call advances the social-learning engine and (optionally) the graph
learner over a stretch of steps with fixed topology, likelihoods and true
state. Randomness enters only through the pre-drawn uniforms, so the
compiled backend replays the identical observation stream.
"""
import numpy as np


def run_segment(
    log_mu,
    lambda_prev,
    estimate,
    weights,
    log_betas,
    obs_cdf,
    mean_lr_stack,
    uniforms,
    fixed_lr_index,
    delta,
    mu_step,
    vote_mode,
    learn,
    msd_out,
    theta_out,
    lambda_out,
    psi_out,
    mu_out,
):
    """Advance ``uniforms.shape[0]`` steps in place.

    ``log_mu`` (n, T), ``lambda_prev`` (n, T-1) and ``estimate`` (n, n) are
    updated in place. ``obs_cdf`` (n, Z) is the per-agent CDF of the
    observation distribution under the current true state. ``mean_lr_stack``
    (T, n, T-1) holds the expected log-likelihood-ratio matrix for every
    candidate state; ``fixed_lr_index`` selects the slice in known-state
    mode, the per-step majority vote selects it in vote mode. Outputs with
    a zero first dimension are skipped.
    """
    steps, n = uniforms.shape
    agent_idx = np.arange(n)
    one_minus = 1.0 - delta
    scale = mu_step * one_minus
    record_lambda = lambda_out.shape[0] > 0
    record_psi = psi_out.shape[0] > 0
    record_mu = mu_out.shape[0] > 0

    for s in range(steps):
        z = (obs_cdf < uniforms[s][:, None]).sum(axis=1)
        np.minimum(z, log_betas.shape[1] - 1, out=z)
        log_like = log_betas[agent_idx, z, :]

        log_psi = delta * log_like + one_minus * log_mu
        log_psi -= log_psi.max(axis=1, keepdims=True)
        log_psi -= np.log(np.exp(log_psi).sum(axis=1, keepdims=True))

        lambda_now = log_psi[:, [0]] - log_psi[:, 1:]

        estimates = np.argmax(log_psi, axis=1)
        vote = int(np.argmax(np.bincount(estimates, minlength=log_psi.shape[1])))
        theta_out[s] = vote

        if learn:
            mean_lr = mean_lr_stack[vote if vote_mode else fixed_lr_index]
            residual = lambda_now - one_minus * (estimate.T @ lambda_prev)
            residual -= delta * mean_lr
            estimate += scale * (lambda_prev @ residual.T)
            diff = weights - estimate
            msd_out[s] = float(np.einsum("ij,ij->", diff, diff))

        if record_lambda:
            lambda_out[s] = lambda_now
        if record_psi:
            np.exp(log_psi, out=psi_out[s])

        new_log_mu = weights.T @ log_psi
        new_log_mu -= new_log_mu.max(axis=1, keepdims=True)
        new_log_mu -= np.log(np.exp(new_log_mu).sum(axis=1, keepdims=True))
        log_mu[:] = new_log_mu
        if record_mu:
            np.exp(new_log_mu, out=mu_out[s])

        lambda_prev[:] = lambda_now
