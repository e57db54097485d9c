"""Finite-state hidden Markov models and their exact inference oracle."""
import itertools

import numpy as np
from scipy.special import logsumexp

from ..errors import CapExceeded, InvalidParams, ZeroLikelihood
from ..ssm import Space, StateSpaceModel

ROW_TOL = 1e-12


def _stochastic(a, name):
    a = np.asarray(a, dtype=float)
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise InvalidParams(f"{name} has negative or non-finite entries")
    if np.any(np.abs(a.sum(axis=-1) - 1.0) > ROW_TOL):
        raise InvalidParams(f"{name} rows must sum to 1")
    return a


class FiniteHMM(StateSpaceModel):
    """K hidden states, L observation symbols; states and symbols are 0-based integers."""

    family = "finite-hmm"

    def __init__(self, transition, emission, initial):
        self.A = _stochastic(transition, "transition")
        self.E = _stochastic(emission, "emission")
        self.mu = _stochastic(initial, "initial")
        K = self.A.shape[0]
        if self.A.shape != (K, K) or self.E.shape[0] != K or self.mu.shape != (K,):
            raise InvalidParams("inconsistent HMM shapes")
        self.K = K
        self.L = self.E.shape[1]
        self.state_space = Space("finite", K)
        self.observation_space = Space("finite", self.L)
        with np.errstate(divide="ignore"):
            self.logA = np.log(self.A)
            self.logE = np.log(self.E)
            self.logmu = np.log(self.mu)
            # one-step predictive table: sum_x' A[x, x'] E[x', y]
            self.logAE = np.log(self.A @ self.E)
            self.logmuE = np.log(self.mu @ self.E)

    def params(self):
        return {"transition": self.A.tolist(), "emission": self.E.tolist(), "initial": self.mu.tolist()}

    # densities (counting measure)
    def log_m(self, x, xp):
        return self.logA[x, xp]

    def log_g(self, x, y):
        return self.logE[x, y]

    def log_mu(self, x):
        return self.logmu[x]

    def sample_m(self, x, draws):
        return draws.categorical(self.A[np.asarray(x)])

    def sample_g(self, x, draws):
        return draws.categorical(self.E[np.asarray(x)])

    def sample_mu(self, draws):
        return draws.categorical(np.broadcast_to(self.mu, draws.shape + (self.K,)))

    # analytic extras
    def log_g_sup(self, y):
        return np.max(self.logE[:, y], axis=0)

    def log_g_integral(self, y):
        return np.log(np.sum(self.E[:, y], axis=0))

    def log_predictive(self, x, y):
        return self.logAE[x, y]

    def log_predictive_sup(self, y):
        return np.max(self.logAE, axis=0)[y]

    def sample_adapted(self, x, y, draws):
        p = self.A[np.asarray(x)] * self.E.T[np.asarray(y)]
        return draws.categorical(p)

    def log_initial_predictive(self, y):
        return self.logmuE[y]

    def sample_initial_adapted(self, y, draws):
        p = self.mu * self.E.T[np.asarray(y)]
        return draws.categorical(np.broadcast_to(p, draws.shape + (self.K,)))

    # exact oracle
    def forward(self, y):
        """Scaled forward pass.

        Returns ``(pred, filt, log_c)`` where ``pred[t]`` is the law of X_t given y[0..t-1],
        ``filt[t]`` given y[0..t], and ``log_c[t] = log p(y_t | y[0..t-1])``.
        """
        y = np.asarray(y)
        T = y.shape[0] - 1
        pred = np.empty((T + 1, self.K))
        filt = np.empty((T + 1, self.K))
        log_c = np.empty(T + 1)
        p = self.mu
        for t in range(T + 1):
            pred[t] = p
            a = p * self.E[:, y[t]]
            c = a.sum()
            if c <= 0:
                raise ZeroLikelihood(f"p(y_{t} | y_0:{t - 1}) = 0")
            log_c[t] = np.log(c)
            filt[t] = a / c
            p = filt[t] @ self.A
        return pred, filt, log_c

    def log_likelihood(self, y):
        return float(self.forward(y)[2].sum())

    def smoothed_marginals(self, y):
        y = np.asarray(y)
        pred, filt, log_c = self.forward(y)
        T = y.shape[0] - 1
        beta = np.ones(self.K)
        out = np.empty_like(filt)
        out[T] = filt[T]
        for t in range(T - 1, -1, -1):
            beta = self.A @ (self.E[:, y[t + 1]] * beta) / np.exp(log_c[t + 1])
            out[t] = filt[t] * beta
        return out

    def stationary(self):
        w, v = np.linalg.eig(self.A.T)
        k = np.argmin(np.abs(w - 1.0))
        p = np.real(v[:, k])
        return p / p.sum()

    def s1_constants(self):
        """Strong-mixing constants with m = 1 against the uniform reference measure."""
        return {"sigma_minus": float(self.K * self.A.min()), "sigma_plus": float(self.K * self.A.max()), "m": 1}

    def s2_delta(self):
        """max over symbols of sup_x g / inf_x g."""
        with np.errstate(divide="ignore"):
            return float(np.max(self.E.max(axis=0) / self.E.min(axis=0)))


def path_codes(paths, K):
    """Integer code of each path in ``paths[..., 0..T]``; x_0 is the most significant digit."""
    paths = np.asarray(paths, dtype=np.int64)
    code = np.zeros(paths.shape[:-1], dtype=np.int64)
    for t in range(paths.shape[-1]):
        code = code * K + paths[..., t]
    return code


def all_paths(K, T):
    """Every path of length T+1, ordered by :func:`path_codes`."""
    return np.array(list(itertools.product(range(K), repeat=T + 1)), dtype=np.int64).reshape(-1, T + 1)


def hmm_exact_jsd(hmm, y, cap=10**6):
    """Exact joint smoothing probabilities over all K^(T+1) paths."""
    y = np.asarray(y)
    T = y.shape[0] - 1
    n = hmm.K ** (T + 1)
    if n > cap:
        raise CapExceeded(f"{n} path atoms exceed cap {cap}")
    lp = unnormalized_log_jsd(hmm, y)
    if not np.any(np.isfinite(lp)):
        raise ZeroLikelihood("every path has zero density")
    return np.exp(lp - logsumexp(lp))


def unnormalized_log_jsd(hmm, y):
    y = np.asarray(y)
    T = y.shape[0] - 1
    P = all_paths(hmm.K, T)
    with np.errstate(divide="ignore"):
        lp = hmm.logmu[P[:, 0]] + hmm.logE[P[:, 0], y[0]]
        for t in range(1, T + 1):
            lp = lp + hmm.logA[P[:, t - 1], P[:, t]] + hmm.logE[P[:, t], y[t]]
    return lp


def random_hmm(K, L, seed, concentration=1.0):
    """Strictly positive random HMM (Dirichlet rows)."""
    rng = np.random.default_rng(seed)
    A = rng.dirichlet(np.full(K, concentration), size=K)
    E = rng.dirichlet(np.full(L, concentration), size=K)
    mu = rng.dirichlet(np.full(K, concentration))
    # keep entries away from zero so every atom carries mass
    A = 0.9 * A + 0.1 / K
    E = 0.9 * E + 0.1 / L
    mu = 0.9 * mu + 0.1 / K
    return FiniteHMM(A / A.sum(1, keepdims=True), E / E.sum(1, keepdims=True), mu / mu.sum())
