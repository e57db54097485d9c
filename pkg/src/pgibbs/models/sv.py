"""Canonical stochastic volatility model.

X_{t+1} = phi X_t + sigma W,  Y_t = beta exp(X_t / 2) U.
"""
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp, roots_hermite

from ..errors import InvalidParams
from ..ssm import Space, StateSpaceModel
from . import drift as _drift

LOG2PI = np.log(2 * np.pi)
# sup_x g(x, y) = D2 / |y|
D2 = 1.0 / np.sqrt(2 * np.pi * np.e)


@lru_cache(maxsize=None)
def d1_constant():
    """(1/sqrt(2 pi)) * integral_0^inf exp(-u/2) u^(-1/2) du, by adaptive quadrature."""
    f = lambda u: np.exp(-u / 2)  # noqa: E731
    # algebraic weight (u - 0)^(-1/2) absorbs the endpoint singularity
    head, _ = integrate.quad(f, 0.0, 1.0, weight="alg", wvar=(-0.5, 0.0), epsabs=1e-14, epsrel=1e-14)
    tail, _ = integrate.quad(lambda u: f(u) / np.sqrt(u), 1.0, np.inf, epsabs=1e-14, epsrel=1e-14)
    return float((head + tail) / np.sqrt(2 * np.pi))


def _unit_profile(v):
    """g(u, y) * |y| as a function of v = u - log(y^2 / beta^2)."""
    return np.exp(-0.5 * (LOG2PI + v + np.exp(-v)))


@lru_cache(maxsize=None)
def predictive_sup_constant(sigma):
    """S(sigma) = sup_b E[G(b + sigma Z)] with G the unit profile; sup_x K<y>1(x) = S / |y|."""
    if sigma == 0:
        return D2

    def neg(b):
        val, _ = integrate.quad(lambda z: np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi) * _unit_profile(b + sigma * z),
                                -40, 40, epsabs=1e-14, epsrel=1e-12, limit=200)
        return -val

    res = optimize.minimize_scalar(neg, bracket=(-3.0, 0.0, 3.0), tol=1e-12)
    return float(-res.fun)


def sv_weight_bounds(beta):
    """Bootstrap weight bounds: sup-norm D2/|y| and integral over x of g equal to D1/|y|.

    Neither depends on ``beta``; it is accepted to mirror the model parameterization.
    """
    if beta <= 0:
        raise InvalidParams("beta must be positive")
    d1 = d1_constant()
    return {
        "D1": d1,
        "D2": D2,
        "log_w_sup": lambda y: np.log(D2) - np.log(np.abs(y)),
        "log_g_integral": lambda y: np.log(d1) - np.log(np.abs(y)),
    }


class StochVolModel(StateSpaceModel):
    family = "sv"
    state_space = Space("continuous")
    observation_space = Space("continuous")

    def __init__(self, phi, sigma, beta, m0=None, v0=None):
        if not -1 < phi < 1 or sigma <= 0 or beta <= 0:
            raise InvalidParams("need |phi| < 1, sigma > 0, beta > 0")
        self.phi, self.sigma, self.beta = float(phi), float(sigma), float(beta)
        self.m0 = 0.0 if m0 is None else float(m0)
        self.v0 = self.stationary_var() if v0 is None else float(v0)
        if self.v0 <= 0:
            raise InvalidParams("v0 must be positive")

    def params(self):
        return {"phi": self.phi, "sigma": self.sigma, "beta": self.beta, "m0": self.m0, "v0": self.v0}

    def stationary_var(self):
        return self.sigma**2 / (1 - self.phi**2)

    def log_m(self, x, xp):
        return -0.5 * (LOG2PI + 2 * np.log(self.sigma) + (xp - self.phi * np.asarray(x)) ** 2 / self.sigma**2)

    def log_g(self, x, y):
        x = np.asarray(x, dtype=float)
        return -0.5 * (LOG2PI + 2 * np.log(self.beta)) - x / 2 - np.asarray(y) ** 2 * np.exp(-x) / (2 * self.beta**2)

    def log_mu(self, x):
        return -0.5 * (LOG2PI + np.log(self.v0) + (np.asarray(x) - self.m0) ** 2 / self.v0)

    def sample_m(self, x, draws):
        return self.phi * np.asarray(x) + self.sigma * draws.normal()

    def sample_g(self, x, draws):
        return self.beta * np.exp(np.asarray(x) / 2) * draws.normal()

    def sample_mu(self, draws):
        return self.m0 + np.sqrt(self.v0) * draws.normal()

    def sample_stationary(self, draws):
        return np.sqrt(self.stationary_var()) * draws.normal()

    def log_g_sup(self, y):
        return np.log(D2) - np.log(np.abs(y))

    def log_g_integral(self, y):
        return np.log(d1_constant()) - np.log(np.abs(y))

    def log_predictive_sup(self, y):
        return np.log(predictive_sup_constant(self.sigma)) - np.log(np.abs(y))

    def drift_constants(self, delta=1.0, lam=0.5):
        cm = lambda x: self.phi * x  # noqa: E731
        lam, b, grid = _drift.fit_drift(cm, self.sigma, delta, lam)
        return {"delta": delta, "lambda": lam, "b": b, "holds": _drift.drift_holds(cm, self.sigma, delta, lam, b, grid)}

    def v_initial(self, delta):
        return float(_drift.expected_v_gaussian(self.m0, np.sqrt(self.v0), delta))

    def state_moments(self, t):
        m, v = self.m0, self.v0
        for _ in range(t):
            m, v = self.phi * m, self.phi**2 * v + self.sigma**2
        return m, v

    def state_block_law(self, t, length):
        """Mean and covariance of (X_t, ..., X_{t+length-1}) under mu."""
        means = np.empty(length)
        var = np.empty(length)
        m, v = self.state_moments(t)
        for j in range(length):
            means[j], var[j] = m, v
            m, v = self.phi * m, self.phi**2 * v + self.sigma**2
        cov = np.empty((length, length))
        for i in range(length):
            for j in range(length):
                lo, hi = min(i, j), max(i, j)
                cov[i, j] = self.phi ** (hi - lo) * var[lo]
        return means, cov

    def log_marginal_obs_density(self, t, ys, order=None):
        """log density of (Y_t..Y_{t+l}) by adaptive Gauss-Hermite quadrature around the posterior mode."""
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        d = ys.shape[1]
        mean, cov = self.state_block_law(t, d)
        if order is None:
            order = 40 if d == 1 else 20
        out = np.empty(ys.shape[0])
        step = max(1, 200000 // order**d)
        for s in range(0, ys.shape[0], step):
            out[s:s + step] = laplace_gh_log_integral(ys[s:s + step], mean, cov, self.beta, order)
        return out


def laplace_gh_log_integral(ys, mean, cov, beta, order):
    """log of the integral over x in R^d of N(x; mean, cov) * prod_j g(x_j, y_j).

    The integrand is log-concave; we locate its mode by damped Newton and apply a
    tensor Gauss-Hermite rule in the Laplace-scaled coordinates.
    """
    n, d = ys.shape
    P = np.linalg.inv(cov)
    c = ys**2 / (2 * beta**2)
    const = -0.5 * (d * LOG2PI + np.linalg.slogdet(cov)[1]) - 0.5 * d * (LOG2PI + 2 * np.log(beta))

    def logf(x):
        r = x - mean
        return -0.5 * np.einsum("ni,ij,nj->n", r, P, r) + np.sum(-x / 2 - c * np.exp(-x), axis=1)

    # start from a point between the prior mean and each coordinate's likelihood mode
    x = np.where(c > 0, np.log(np.maximum(2 * c, 1e-300)), mean)
    x = 0.5 * (x + mean)
    fx = logf(x)
    for _ in range(200):
        e = c * np.exp(-x)
        grad = -(x - mean) @ P + (-0.5 + e)
        H = -P[None, :, :] - e[:, :, None] * np.eye(d)[None]
        step = -np.linalg.solve(H, grad[:, :, None])[:, :, 0]
        alpha = np.ones(n)
        accepted = np.zeros(n, dtype=bool)
        x_new = x.copy()
        f_new = fx.copy()
        for _ in range(60):
            cand = x + alpha[:, None] * step
            fc = logf(cand)
            ok = (fc >= fx - 1e-12 * np.abs(fx)) & ~accepted
            x_new[ok] = cand[ok]
            f_new[ok] = fc[ok]
            accepted |= ok
            if accepted.all():
                break
            alpha = np.where(accepted, alpha, alpha * 0.5)
        moved = np.max(np.abs(x_new - x), axis=1)
        x, fx = x_new, f_new
        if np.all(moved < 1e-12 * (1 + np.max(np.abs(x), axis=1))):
            break
    e = c * np.exp(-x)
    H = -P[None, :, :] - e[:, :, None] * np.eye(d)[None]
    S = np.linalg.inv(-H)
    L = np.linalg.cholesky(S)
    z1, w1 = roots_hermite(order)
    grids = np.meshgrid(*([z1] * d), indexing="ij")
    Z = np.stack([g.ravel() for g in grids], axis=1)  # (Q, d)
    logW = np.sum(np.log(np.stack(np.meshgrid(*([w1] * d), indexing="ij"), axis=0).reshape(d, -1)), axis=0)
    nodes = x[:, None, :] + np.sqrt(2.0) * np.einsum("nij,qj->nqi", L, Z)
    r = nodes - mean
    lf = -0.5 * np.einsum("nqi,ij,nqj->nq", r, P, r) + np.sum(-nodes / 2 - c[:, None, :] * np.exp(-nodes), axis=2)
    logdetL = np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
    return const + 0.5 * d * np.log(2.0) + logdetL + logsumexp(logW[None, :] + np.sum(Z * Z, axis=1)[None, :] + lf, axis=1)
