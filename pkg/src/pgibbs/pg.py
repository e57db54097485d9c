"""Conditional SMC and the particle Gibbs kernel on path space."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidN, LengthMismatch
from .rng import Streams
from .smc import PathSample, as_streams, forward_pass, map_rows, select_paths


@dataclass(frozen=True)
class PgChainConfig:
    N: int
    T: int
    iterations: int
    burn_in: int = 0
    seed: int = 0
    proposal: str = "bootstrap"
    chains: int = 1
    thin: int = 1
    threads: int = 1

    def __post_init__(self):
        if self.N < 2:
            raise InvalidN("particle Gibbs needs N >= 2 (N = 1 is the identity kernel)")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must be in [0, iterations)")
        if self.chains < 1 or self.thin < 1:
            raise ValueError("chains and thin must be >= 1")


@dataclass
class PgChainResult:
    paths: np.ndarray  # (chains, kept, T+1)
    update_fraction: np.ndarray  # (chains, iterations)
    atom: np.ndarray  # (chains, iterations) bool: output == input reference
    config: PgChainConfig
    final: np.ndarray = field(repr=False, default=None)

    def diagnostics(self):
        kept = self.update_fraction[:, self.config.burn_in:]
        means = self.paths.mean(axis=2)
        lags = [v for v in (_lag1(m) for m in means) if np.isfinite(v)]
        return {
            "mean_update_fraction": float(kept.mean()),
            "atom_mass": float(self.atom[:, self.config.burn_in:].mean()),
            "lag1_autocorrelation_path_mean": float(np.mean(lags)) if lags else float("nan"),
            "chains": self.config.chains,
            "iterations": self.config.iterations,
        }


def _lag1(x):
    x = np.asarray(x, dtype=float)
    if x.size < 3 or np.var(x) == 0:
        return np.nan
    d = x - x.mean()
    return float(np.dot(d[:-1], d[1:]) / np.dot(d, d))


def _check_N(N):
    if N < 2:
        raise InvalidN("conditional SMC needs N >= 2")


def csmc_sweep(model, proposal, y, reference, N, rng=0):
    """One conditional SMC pass pinned to ``reference`` in slot N.

    Returns the particle system and the trajectory drawn from it by terminal weight.
    """
    _check_N(N)
    ref = np.asarray(reference.states if isinstance(reference, PathSample) else reference)
    if ref.ndim != 1 or ref.shape[0] != np.asarray(y).shape[0]:
        raise LengthMismatch("reference must be a single path of length T+1")
    streams = as_streams(rng)
    if streams.batch != 1:
        streams = streams.subset([0])
    system = forward_pass(model, proposal, y, N, streams, reference=ref)
    paths, _ = select_paths(system, streams)
    return system.row(0), PathSample(paths[0], int(streams.stream_ids[0]), streams.iteration)


def pg_step_batch(model, proposal, y, references, N, streams):
    """Apply the PG kernel to each row of ``references`` (``(B, T+1)``)."""
    system = forward_pass(model, proposal, y, N, streams, reference=references)
    paths, _ = select_paths(system, streams)
    return paths


def pg_kernel_step(model, proposal, y, current, N, rng=0):
    """One draw from the particle Gibbs kernel started at ``current``."""
    _, selected = csmc_sweep(model, proposal, y, current, N, rng)
    return selected


def update_fraction(before, after):
    """Fraction of time indices at which the new path differs from the reference."""
    return np.mean(np.asarray(before) != np.asarray(after), axis=-1)


def run_pg_chain(model, proposal, y, config, init):
    """Iterate the PG kernel on ``config.chains`` independent chains.

    ``init`` is a path ``(T+1,)`` shared by all chains or one path per chain.
    Chain ``c`` at iteration ``k`` uses the stream keyed ``(seed, c, k)``.
    """
    _check_N(config.N)
    y = np.asarray(y)
    T = y.shape[0] - 1
    init = np.asarray(init.states if isinstance(init, PathSample) else init)
    init = np.broadcast_to(init, (config.chains, T + 1)).copy()
    base = Streams(config.seed, np.arange(config.chains))

    def run_group(streams):
        rows = np.searchsorted(base.stream_ids, streams.stream_ids)
        cur = init[rows]
        kept, uf, atom = [], [], []
        for k in range(config.iterations):
            new = pg_step_batch(model, proposal, y, cur, config.N, streams.at_iteration(k))
            uf.append(update_fraction(cur, new))
            atom.append(np.all(cur == new, axis=1))
            cur = new
            if k >= config.burn_in and (k - config.burn_in) % config.thin == 0:
                kept.append(new)
        return np.stack(kept, axis=1), np.stack(uf, axis=1), np.stack(atom, axis=1), cur

    parts = map_rows(run_group, base, config.threads)
    return PgChainResult(
        paths=np.concatenate([p[0] for p in parts]),
        update_fraction=np.concatenate([p[1] for p in parts]),
        atom=np.concatenate([p[2] for p in parts]),
        config=config,
        final=np.concatenate([p[3] for p in parts]),
    )
