# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled segment runner: fused simulate-and-learn hot loop.

Semantics match ``_loop_py.run_segment`` entry for entry; observation
draws use the same CDF-inversion predicate so both backends consume the
pre-drawn uniforms identically.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()


def run_segment(
    double[:, ::1] log_mu,
    double[:, ::1] lambda_prev,
    double[:, ::1] estimate,
    const double[:, ::1] weights,
    const double[:, :, ::1] log_betas,
    const double[:, ::1] obs_cdf,
    const double[:, :, ::1] mean_lr_stack,
    const double[:, ::1] uniforms,
    int fixed_lr_index,
    double delta,
    double mu_step,
    bint vote_mode,
    bint learn,
    double[::1] msd_out,
    cnp.int64_t[::1] theta_out,
    double[:, :, ::1] lambda_out,
    double[:, :, ::1] psi_out,
    double[:, :, ::1] mu_out,
):
    cdef Py_ssize_t steps = uniforms.shape[0]
    cdef Py_ssize_t n = log_mu.shape[0]
    cdef Py_ssize_t T = log_mu.shape[1]
    cdef Py_ssize_t J = T - 1
    cdef Py_ssize_t zmax = log_betas.shape[1]
    cdef bint record_lambda = lambda_out.shape[0] > 0
    cdef bint record_psi = psi_out.shape[0] > 0
    cdef bint record_mu = mu_out.shape[0] > 0

    cdef double one_minus = 1.0 - delta
    cdef double scale = mu_step * one_minus

    cdef double[:, ::1] log_psi = np.empty((n, T), dtype=np.float64)
    cdef double[:, ::1] lambda_now = np.empty((n, J), dtype=np.float64)
    cdef double[:, ::1] residual = np.empty((n, J), dtype=np.float64)
    cdef double[:, ::1] new_log_mu = np.empty((n, T), dtype=np.float64)
    cdef cnp.int64_t[::1] counts = np.empty(T, dtype=np.int64)

    cdef Py_ssize_t s, k, t, l, j, z, best_t, vote
    cdef double u, m, acc, best, diff, msd, lr_ref
    cdef Py_ssize_t lr_idx

    for s in range(steps):
        for t in range(T):
            counts[t] = 0

        for k in range(n):
            u = uniforms[s, k]
            z = 0
            for l in range(zmax):
                if obs_cdf[k, l] < u:
                    z += 1
            if z > zmax - 1:
                z = zmax - 1

            # adapt in log space, then normalize the row
            m = -1e300
            for t in range(T):
                acc = delta * log_betas[k, z, t] + one_minus * log_mu[k, t]
                log_psi[k, t] = acc
                if acc > m:
                    m = acc
            acc = 0.0
            for t in range(T):
                acc += exp(log_psi[k, t] - m)
            acc = m + log(acc)
            best = -1e300
            best_t = 0
            for t in range(T):
                log_psi[k, t] -= acc
                if log_psi[k, t] > best:
                    best = log_psi[k, t]
                    best_t = t
            counts[best_t] += 1

            lr_ref = log_psi[k, 0]
            for j in range(J):
                lambda_now[k, j] = lr_ref - log_psi[k, j + 1]

        vote = 0
        for t in range(1, T):
            if counts[t] > counts[vote]:
                vote = t
        theta_out[s] = vote

        if learn:
            lr_idx = vote if vote_mode else fixed_lr_index
            # residual = lambda_now - (1-delta) estimate^T lambda_prev - delta mean_lr
            for k in range(n):
                for j in range(J):
                    acc = 0.0
                    for l in range(n):
                        acc += estimate[l, k] * lambda_prev[l, j]
                    residual[k, j] = (
                        lambda_now[k, j]
                        - one_minus * acc
                        - delta * mean_lr_stack[lr_idx, k, j]
                    )
            msd = 0.0
            for l in range(n):
                for k in range(n):
                    acc = 0.0
                    for j in range(J):
                        acc += lambda_prev[l, j] * residual[k, j]
                    estimate[l, k] += scale * acc
                    diff = weights[l, k] - estimate[l, k]
                    msd += diff * diff
            msd_out[s] = msd

        if record_lambda:
            for k in range(n):
                for j in range(J):
                    lambda_out[s, k, j] = lambda_now[k, j]
        if record_psi:
            for k in range(n):
                for t in range(T):
                    psi_out[s, k, t] = exp(log_psi[k, t])

        # combine in log space, then normalize the row
        for k in range(n):
            m = -1e300
            for t in range(T):
                acc = 0.0
                for l in range(n):
                    acc += weights[l, k] * log_psi[l, t]
                new_log_mu[k, t] = acc
                if acc > m:
                    m = acc
            acc = 0.0
            for t in range(T):
                acc += exp(new_log_mu[k, t] - m)
            acc = m + log(acc)
            for t in range(T):
                new_log_mu[k, t] -= acc

        for k in range(n):
            for t in range(T):
                log_mu[k, t] = new_log_mu[k, t]
                if record_mu:
                    mu_out[s, k, t] = exp(new_log_mu[k, t])
            for j in range(J):
                lambda_prev[k, j] = lambda_now[k, j]
