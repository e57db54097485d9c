"""Particle-budget scaling study with N_T = ceil(T^(1/gamma)).

The conclusion being probed (the inverse minorization constant stays bounded in
probability as T grows) has no single-number finite-T analogue, so the report
tracks the distribution of a mixing proxy across horizons and checks that its
trend does not worsen, by Kendall rank correlation.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import BudgetExceeded, InvalidParams
from .minorization import exact_b_tT, log_epsilon
from .pg import pg_step_batch, update_fraction
from .rng import Streams
from .smc import forward_pass, map_rows, select_paths
from .ssm import make_proposal, simulate


def particles_for(T, gamma, cap=10_000):
    """``(N_T, capped)`` with N_T = min(ceil(T^(1/gamma)), cap)."""
    n = math.ceil(T ** (1.0 / gamma) - 1e-9)
    return max(2, min(n, cap)), n > cap


def kendall_tau(x, y):
    """Kendall tau-b; 0 when either variable is constant."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0
    return float(stats.kendalltau(x, y).statistic)


@dataclass
class ScalingReport:
    gamma: float
    alpha: float
    horizons: list
    particles: list
    capped: list
    update_fraction: np.ndarray  # (len(horizons), chains)
    medians: list
    proxy_quantiles: dict  # quantile -> per-T values of the inverse-epsilon proxy
    tau_update: float  # Kendall tau between T and per-chain update fraction
    tau_proxy: float  # Kendall tau between T and per-chain inverse-epsilon proxy
    surrogate_epsilon: list = field(default_factory=list)

    @property
    def medians_nondecreasing(self):
        return bool(np.all(np.diff(self.medians) >= 0))

    def rows(self):
        for i, T in enumerate(self.horizons):
            yield {"T": T, "N": self.particles[i], "capped": self.capped[i], "median_update": self.medians[i],
                   **{f"proxy_q{q}": v[i] for q, v in self.proxy_quantiles.items()},
                   "surrogate_epsilon": self.surrogate_epsilon[i] if self.surrogate_epsilon else float("nan")}


def _chain_id(T, c):
    return (int(T) << 24) | int(c)


def _one_chain(model, proposal, T, N, seed, sid, iterations):
    _, y = simulate(model, T, seed, stream=sid)
    st = Streams(seed, [sid])
    sys_ = forward_pass(model, proposal, y, N, st)
    cur, _ = select_paths(sys_, st)
    uf = 0.0
    for k in range(1, iterations + 1):
        new = pg_step_batch(model, proposal, y, cur, N, st.at_iteration(k))
        uf += float(update_fraction(cur, new)[0])
        cur = new
    return uf / iterations


def scaling_experiment(model, proposal="bootstrap", gamma=0.4, horizons=(25, 50, 100), chains=100, seed=0,
                       alpha=0.5, cap=10_000, iterations=2, threads=1, surrogate=None,
                       max_work=5e10, quantiles=(0.5, 0.9)):
    """PG update statistics at N_T = ceil(T^(1/gamma)) across horizons.

    Each chain draws its own observation record, starts from a path selected by an
    unconditional SMC run and applies ``iterations`` PG steps; its update fraction is
    the average over those steps. With a finite-HMM ``surrogate`` the exact
    epsilon at (T, N_T) is reported too.
    """
    if not 0 < gamma < alpha:
        raise InvalidParams(f"need 0 < gamma < alpha, got gamma={gamma}, alpha={alpha}")
    horizons = [int(T) for T in horizons]
    if not horizons or chains < 1 or iterations < 1:
        raise InvalidParams("need a nonempty horizon grid, chains >= 1 and iterations >= 1")
    prop = make_proposal(model, proposal) if isinstance(proposal, str) else proposal
    plan = [particles_for(T, gamma, cap) for T in horizons]
    work = sum(chains * (iterations + 1) * (T + 1) * n for T, (n, _) in zip(horizons, plan))
    if work > max_work:
        raise BudgetExceeded(f"planned {work:.3g} particle-steps exceeds budget {max_work:.3g}")

    uf = np.empty((len(horizons), chains))
    for i, (T, (N, _)) in enumerate(zip(horizons, plan)):
        ids = Streams(seed, [_chain_id(T, c) for c in range(chains)])
        parts = map_rows(lambda s, T=T, N=N: [_one_chain(model, prop, T, N, seed, int(sid), iterations)
                                              for sid in s.stream_ids], ids, threads)
        uf[i] = np.concatenate(parts)

    # inverse-epsilon proxy: reciprocal update fraction, floored at one refreshed coordinate
    proxy = 1.0 / np.maximum(uf, 1.0 / (np.asarray(horizons)[:, None] + 1))
    labels = np.repeat(horizons, chains)
    report = ScalingReport(
        gamma=gamma, alpha=alpha, horizons=horizons, particles=[n for n, _ in plan], capped=[c for _, c in plan],
        update_fraction=uf, medians=[float(np.median(r)) for r in uf],
        proxy_quantiles={q: [float(np.quantile(r, q)) for r in proxy] for q in quantiles},
        tau_update=kendall_tau(labels, uf.ravel()), tau_proxy=kendall_tau(labels, proxy.ravel()),
    )
    if surrogate is not None:
        sprop = make_proposal(surrogate, prop.kind)
        for T, (N, _) in zip(horizons, plan):
            _, ys = simulate(surrogate, T, seed, stream=_chain_id(T, 0))
            report.surrogate_epsilon.append(float(np.exp(log_epsilon(exact_b_tT(surrogate, sprop, ys), N))))
    return report
