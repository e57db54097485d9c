"""Sequential Monte Carlo with multinomial resampling at every step.

The engine works on a batch of independent particle systems at once (one row per
chain or replicate); the public single-system functions are thin wrappers.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .errors import IndexOutOfRange, InvalidN, LengthMismatch, ZeroWeight
from .rng import Purpose, Streams


@dataclass
class ParticleSystem:
    """One particle system over times ``0..T``.

    ``ancestors[t, i]`` is the 1-based parent of particle ``i`` at time ``t``;
    row 0 is 0 because time-0 particles have no ancestor.
    """

    states: np.ndarray  # (T+1, N)
    log_weights: np.ndarray  # (T+1, N)
    ancestors: np.ndarray  # (T+1, N), 1-based, row 0 zero

    @property
    def N(self):
        return self.states.shape[1]

    @property
    def T(self):
        return self.states.shape[0] - 1


@dataclass
class PathSample:
    states: np.ndarray
    chain: int = 0
    iteration: int = 0

    def __len__(self):
        return self.states.shape[0]


@dataclass
class SmcResult:
    system: ParticleSystem
    log_likelihood_estimate: float
    ess: np.ndarray
    log_normalizer_increments: np.ndarray = field(repr=False, default=None)


@dataclass
class BatchSystem:
    """Batched particle systems: arrays are ``(T+1, B, N)``; ancestors are 0-based."""

    states: np.ndarray
    log_weights: np.ndarray
    ancestors: np.ndarray
    log_z_increments: np.ndarray  # (T+1, B)
    ess: np.ndarray  # (T+1, B)

    def row(self, b):
        anc = self.ancestors[:, b, :] + 1
        anc[0] = 0
        return ParticleSystem(self.states[:, b, :].copy(), self.log_weights[:, b, :].copy(), anc)


def as_streams(rng):
    return rng if isinstance(rng, Streams) else Streams(0 if rng is None else rng)


def normalized(log_w, t=None):
    """Row-wise weights scaled so each row's max is 1; raises ZeroWeight on a dead row."""
    m = np.max(log_w, axis=-1, keepdims=True)
    if not np.all(np.isfinite(m)) or np.any(np.isnan(log_w)):
        bad = np.flatnonzero(~np.isfinite(m.reshape(-1)))
        where = f" at t={t}" if t is not None else ""
        raise ZeroWeight(f"all weights vanished{where} (rows {bad.tolist()})")
    return np.exp(log_w - m)


def ess_from_log(log_w):
    return np.exp(2 * logsumexp(log_w, axis=-1) - logsumexp(2 * log_w, axis=-1))


def resample_multinomial(log_weights, count, rng, t=0):
    """Draw ``count`` i.i.d. 0-based indices with probabilities proportional to exp(log_weights).

    ``rng`` is a :class:`Streams` (or a seed); the i-th draw uses the uniform keyed by
    ``(t, i)`` so the selection only depends on the normalized weights.
    """
    lw = np.atleast_2d(np.asarray(log_weights, dtype=float))
    streams = as_streams(rng)
    w = normalized(lw, t)
    u = streams.uniforms(t, Purpose.RESAMPLE, np.arange(count))
    if u.shape[0] != w.shape[0]:
        u = np.broadcast_to(u, (w.shape[0], count))
    idx = kernels.resample_search(w, u)
    return idx[0] if np.ndim(log_weights) == 1 else idx


def _state_dtype(model):
    return np.int64 if model.state_space.is_finite else np.float64


def forward_pass(model, proposal, y, N, streams, reference=None):
    """Run (conditional) SMC on every batch row of ``streams``.

    With ``reference`` (shape ``(B, T+1)`` or ``(T+1,)``) the last slot is pinned to
    it with ancestor ``N`` at every step; the other ``N-1`` slots evolve freely.
    """
    y = np.asarray(y)
    T = y.shape[0] - 1
    B = streams.batch
    if reference is not None:
        reference = np.asarray(reference)
        if reference.shape[-1] != T + 1:
            raise LengthMismatch(f"reference has length {reference.shape[-1]}, expected {T + 1}")
        reference = np.broadcast_to(reference, (B, T + 1))
        n_free = N - 1
    else:
        n_free = N
    free = np.arange(n_free)
    rows = np.arange(B)[:, None]

    states = np.empty((T + 1, B, N), dtype=_state_dtype(model))
    logw = np.empty((T + 1, B, N))
    anc = np.zeros((T + 1, B, N), dtype=np.int64)
    logz = np.empty((T + 1, B))
    ess = np.empty((T + 1, B))

    with np.errstate(divide="ignore"):
        x0 = proposal.sample_r0(y[0], streams.draws(0, Purpose.INIT, free))
        states[0, :, :n_free] = x0
        if reference is not None:
            states[0, :, N - 1] = reference[:, 0]
        logw[0] = proposal.log_w0(y[0], states[0])
        for t in range(1, T + 1):
            w = normalized(logw[t - 1], t - 1)
            u = streams.uniforms(t, Purpose.RESAMPLE, free)
            a = kernels.resample_search(w, u)
            anc[t, :, :n_free] = a
            parents = states[t - 1][rows, a]
            states[t, :, :n_free] = proposal.sample_r(y[t], parents, streams.draws(t, Purpose.PROPOSE, free))
            if reference is not None:
                anc[t, :, N - 1] = N - 1
                states[t, :, N - 1] = reference[:, t]
            all_parents = states[t - 1][rows, anc[t]]
            logw[t] = proposal.log_w(y[t], all_parents, states[t])
        normalized(logw[T], T)
        logz[:] = logsumexp(logw, axis=-1) - np.log(N)
        ess[:] = ess_from_log(logw)
    return BatchSystem(states, logw, anc, logz, ess)


def select_paths(system, streams):
    """Pick one terminal trajectory per row with probability proportional to its weight."""
    T = system.states.shape[0] - 1
    w = normalized(system.log_weights[T], T)
    u = streams.uniforms(T, Purpose.SELECT, np.arange(1))
    k = kernels.resample_search(w, u)[:, 0]
    lineage = kernels.trace_ancestry(system.ancestors, k)
    B = system.states.shape[1]
    paths = system.states[np.arange(T + 1)[:, None], np.arange(B)[None, :], lineage]
    return paths.T.copy(), k


def trace_paths(system, final):
    """Ancestral paths ``(B, T+1)`` ending at the 0-based particles ``final`` (shape ``(B,)``)."""
    T = system.states.shape[0] - 1
    B = system.states.shape[1]
    lineage = kernels.trace_ancestry(system.ancestors, np.asarray(final))
    return system.states[np.arange(T + 1)[:, None], np.arange(B)[None, :], lineage].T.copy()


def run_smc(model, proposal, y, N, rng=0):
    """Unconditional SMC; returns the particle system, log-likelihood estimate and ESS."""
    if N < 1:
        raise InvalidN("SMC needs N >= 1")
    streams = as_streams(rng)
    if streams.batch != 1:
        streams = streams.subset([0])
    sys_ = forward_pass(model, proposal, y, N, streams)
    return SmcResult(
        system=sys_.row(0),
        log_likelihood_estimate=float(sys_.log_z_increments[:, 0].sum()),
        ess=sys_.ess[:, 0].copy(),
        log_normalizer_increments=sys_.log_z_increments[:, 0].copy(),
    )


def run_smc_replicates(model, proposal, y, N, seed, replicates, threads=1):
    """log-likelihood estimates for ``replicates`` independent runs (one stream each)."""
    streams = Streams(seed, np.arange(replicates))
    out = map_rows(lambda s: forward_pass(model, proposal, y, N, s).log_z_increments.sum(axis=0),
                   streams, threads)
    return np.concatenate(out)


def extract_path(system, i):
    """Ancestral path of 1-based particle ``i`` at the final time."""
    if not 1 <= i <= system.N:
        raise IndexOutOfRange(f"particle {i} not in [1, {system.N}]")
    T = system.T
    out = np.empty(T + 1, dtype=system.states.dtype)
    cur = i - 1
    for t in range(T, -1, -1):
        out[t] = system.states[t, cur]
        if t > 0:
            cur = system.ancestors[t, cur] - 1
    return PathSample(out)


def map_rows(fn, streams, threads=1, chunk=None):
    """Apply ``fn`` to row-groups of ``streams``; results are in row order.

    Each row owns its keyed stream, so the output does not depend on ``threads``.
    """
    B = streams.batch
    if chunk is None:
        chunk = max(1, -(-B // max(1, threads)))
    groups = [np.arange(s, min(B, s + chunk)) for s in range(0, B, chunk)]
    if threads <= 1 or len(groups) == 1:
        return [fn(streams.subset(g)) for g in groups]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda g: fn(streams.subset(g)), groups))
