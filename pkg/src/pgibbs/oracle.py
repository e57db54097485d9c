"""Exact enumeration of (conditional) SMC outcomes on tiny finite HMMs.

Every random choice of a sweep (free-particle states, ancestor indices, final
selection) is enumerated with its probability, using the proposal's own log
densities. This yields the exact particle Gibbs transition matrix over path atoms
and the exact expectation of the SMC likelihood estimator.
"""
import itertools

import numpy as np
from scipy.special import logsumexp

from .errors import CapExceeded, InvalidN
from .models.finite_hmm import all_paths, path_codes

DEFAULT_CAP = 10**6


def outcome_count(K, N, T, conditional=True):
    free = N - 1 if conditional else N
    return K ** (free * (T + 1)) * N ** (free * T) * N


def _tables(hmm, proposal, y):
    K = hmm.K
    s = np.arange(K)
    with np.errstate(divide="ignore"):
        r0 = np.broadcast_to(np.exp(proposal.log_r0(y[0], s)), (K,))
        lw0 = np.broadcast_to(np.asarray(proposal.log_w0(y[0], s), dtype=float), (K,))
        R, LW = [None], [None]
        for t in range(1, y.shape[0]):
            R.append(np.broadcast_to(np.exp(proposal.log_r(y[t], s[:, None], s[None, :])), (K, K)))
            LW.append(np.broadcast_to(np.asarray(proposal.log_w(y[t], s[:, None], s[None, :]), dtype=float), (K, K)))
    return r0, lw0, R, LW


def enumerate_sweeps(hmm, proposal, y, N, reference=None, cap=DEFAULT_CAP):
    """All outcomes of one sweep, merged by identical particle configurations.

    Returns ``(prob, paths, logw, zmass)`` with ``paths`` of shape ``(C, N, T+1)``,
    final log weights ``(C, N)`` and ``zmass``, the probability-weighted sum of the
    likelihood estimates of the merged outcomes (so ``zmass.sum()`` is E[Z_hat]).
    With a reference the last slot carries it.
    """
    y = np.asarray(y)
    T = y.shape[0] - 1
    K = hmm.K
    conditional = reference is not None
    if conditional and N < 2:
        raise InvalidN("conditional enumeration needs N >= 2")
    n_out = outcome_count(K, N, T, conditional)
    if n_out > cap:
        raise CapExceeded(f"{n_out} outcomes exceed enumeration cap {cap}")
    free = N - 1 if conditional else N
    r0, lw0, R, LW = _tables(hmm, proposal, y)

    combos = np.array(list(itertools.product(range(K), repeat=free)), dtype=np.int64).reshape(-1, free)
    prob = np.prod(r0[combos], axis=1)
    paths = combos[:, :, None]
    if conditional:
        ref = np.asarray(reference, dtype=np.int64)
        paths = np.concatenate([paths, np.broadcast_to(ref[:1], (paths.shape[0], 1, 1))], axis=1)
    with np.errstate(divide="ignore"):
        logw = lw0[paths[:, :, 0]]
        zmass = prob * np.exp(logsumexp(logw, axis=1) - np.log(N))
    keep = prob > 0
    prob, paths, logw, zmass = prob[keep], paths[keep], logw[keep], zmass[keep]

    choice = np.array(list(itertools.product(range(N * K), repeat=free)), dtype=np.int64).reshape(-1, free)
    ch_anc, ch_state = np.divmod(choice, K)
    for t in range(1, T + 1):
        C = prob.shape[0]
        W = np.exp(logw - logw.max(axis=1, keepdims=True))
        W /= W.sum(axis=1, keepdims=True)
        xprev = paths[:, :, t - 1]  # (C, N)
        # probability of (ancestor j, new state s) for one free particle: W_j * R[x_j, s]
        p_one = (W[:, :, None] * R[t][xprev]).reshape(C, N * K)
        p_choice = np.prod(p_one[:, choice], axis=2)  # (C, Q)
        p_new = prob[:, None] * p_choice
        par_paths = paths[np.arange(C)[:, None, None], ch_anc[None, :, :]]  # (C, Q, free, t)
        new_states = np.broadcast_to(ch_state[None, :, :, None], (C,) + ch_state.shape + (1,))
        free_paths = np.concatenate([par_paths, new_states], axis=3)
        par_state = xprev[np.arange(C)[:, None, None], ch_anc[None, :, :]]
        with np.errstate(divide="ignore"):
            free_lw = LW[t][par_state, ch_state[None, :, :]]
        Q = choice.shape[0]
        if conditional:
            ref_path = np.broadcast_to(ref[: t + 1], (C, Q, 1, t + 1))
            ref_lw = np.broadcast_to(LW[t][ref[t - 1], ref[t]], (C, Q, 1))
            free_paths = np.concatenate([free_paths, ref_path], axis=2)
            free_lw = np.concatenate([free_lw, ref_lw], axis=2)
        new_paths = free_paths.reshape(C * Q, N, t + 1)
        new_lw = free_lw.reshape(C * Q, N)
        with np.errstate(divide="ignore"):
            incr = np.exp(logsumexp(new_lw, axis=1) - np.log(N))
        new_z = (zmass[:, None] * p_choice).reshape(-1) * incr
        p_new = p_new.reshape(-1)
        keep = p_new > 0
        prob, paths, logw, zmass = _merge(p_new[keep], new_paths[keep], new_lw[keep], new_z[keep], K)
    return prob, paths, logw, zmass


def _merge(prob, paths, logw, zmass, K):
    """Merge outcomes with identical particle paths.

    The future of a sweep depends only on the current paths, so probabilities (and
    probability-weighted likelihood estimates) of such outcomes can be summed.
    """
    codes = path_codes(paths, K)  # (C, N)
    _, first, inv = np.unique(codes, axis=0, return_index=True, return_inverse=True)
    inv = inv.reshape(-1)
    merged = np.zeros(first.shape[0])
    np.add.at(merged, inv, prob)
    merged_z = np.zeros(first.shape[0])
    np.add.at(merged_z, inv, zmass)
    return merged, paths[first], logw[first], merged_z


def pg_row(hmm, proposal, y, reference, N, cap=DEFAULT_CAP):
    """Exact PG transition probabilities from ``reference`` to every path atom."""
    y = np.asarray(y)
    K = hmm.K
    prob, paths, logw, _ = enumerate_sweeps(hmm, proposal, y, N, reference, cap)
    W = np.exp(logw - logw.max(axis=1, keepdims=True))
    W /= W.sum(axis=1, keepdims=True)
    codes = path_codes(paths, K)
    row = np.zeros(K ** y.shape[0])
    np.add.at(row, codes.ravel(), (prob[:, None] * W).ravel())
    return row


def hmm_enumerate_pg(hmm, proposal, y, N, cap=DEFAULT_CAP):
    """Exact particle Gibbs transition matrix over all K^(T+1) path atoms.

    Rows and columns are ordered by :func:`pgibbs.models.finite_hmm.path_codes`.
    """
    if N < 2:
        raise InvalidN("particle Gibbs needs N >= 2")
    y = np.asarray(y)
    T = y.shape[0] - 1
    K = hmm.K
    n = outcome_count(K, N, T)
    if n > cap:
        raise CapExceeded(f"{n} outcomes per row exceed enumeration cap {cap}")
    atoms = all_paths(K, T)
    return np.stack([pg_row(hmm, proposal, y, ref, N, cap) for ref in atoms])


def expected_likelihood_estimate(hmm, proposal, y, N, cap=DEFAULT_CAP):
    """Exact E[Z_hat] of unconditional SMC by enumeration."""
    _, _, _, zmass = enumerate_sweeps(hmm, proposal, y, N, None, cap)
    return float(np.sum(zmass))
