"""Nonlinear autoregression observed in additive Gaussian noise, and its linear-Gaussian case."""
import numpy as np

from ..errors import InvalidParams, NumericalDegeneracy, UnsupportedModel
from ..ssm import Space, StateSpaceModel
from . import drift as _drift

LOG2PI = np.log(2 * np.pi)


def norm_logpdf(x, mean, var):
    return -0.5 * (LOG2PI + np.log(var) + (x - mean) ** 2 / var)


class Drift:
    """State drift h(x) = a x + c x / (1 + x^2).

    The growth rate limsup |h(x)|/|x| equals |a|, so |a| < 1 keeps the chain stable.
    """

    def __init__(self, a, c=0.0):
        if not abs(a) < 1:
            raise InvalidParams("drift needs |a| < 1 for sub-linear growth")
        self.a = float(a)
        self.c = float(c)

    @property
    def kind(self):
        return "linear" if self.c == 0.0 else "rational"

    @property
    def is_linear(self):
        return self.c == 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.c == 0.0:
            return self.a * x
        return self.a * x + self.c * x / (1.0 + x * x)

    def growth_rate(self):
        return abs(self.a)

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "c": self.c}

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, (int, float)):
            return cls(d)
        kind = d.get("kind", "linear")
        if kind == "linear":
            return cls(d["a"])
        if kind == "rational":
            return cls(d["a"], d.get("c", 1.0))
        raise InvalidParams(f"unknown drift kind {kind!r}")


class AdditiveNoiseModel(StateSpaceModel):
    """X_{t+1} = h(X_t) + sigma_w W,  Y_t = phi X_t + sigma_u U,  X_0 ~ N(m0, v0)."""

    family = "additive-noise"
    state_space = Space("continuous")
    observation_space = Space("continuous")

    def __init__(self, drift, phi, sigma_u, sigma_w, m0=0.0, v0=1.0):
        if phi <= 0 or sigma_u <= 0 or sigma_w <= 0 or v0 <= 0:
            raise InvalidParams("phi, sigma_u, sigma_w and v0 must be positive")
        self.h = drift if isinstance(drift, Drift) else Drift.from_dict(drift)
        if self.h.growth_rate() >= 1:
            raise InvalidParams("drift must grow sub-linearly (|a| < 1)")
        self.phi = float(phi)
        self.sigma_u = float(sigma_u)
        self.sigma_w = float(sigma_w)
        self.m0 = float(m0)
        self.v0 = float(v0)

    def params(self):
        return {"drift": self.h.to_dict(), "phi": self.phi, "sigma_u": self.sigma_u,
                "sigma_w": self.sigma_w, "m0": self.m0, "v0": self.v0}

    @property
    def predictive_var(self):
        return self.phi**2 * self.sigma_w**2 + self.sigma_u**2

    def log_m(self, x, xp):
        return norm_logpdf(xp, self.h(x), self.sigma_w**2)

    def log_g(self, x, y):
        return norm_logpdf(y, self.phi * np.asarray(x), self.sigma_u**2)

    def log_mu(self, x):
        return norm_logpdf(x, self.m0, self.v0)

    def sample_m(self, x, draws):
        return self.h(x) + self.sigma_w * draws.normal()

    def sample_g(self, x, draws):
        return self.phi * np.asarray(x) + self.sigma_u * draws.normal()

    def sample_mu(self, draws):
        return self.m0 + np.sqrt(self.v0) * draws.normal()

    def log_g_sup(self, y):
        return np.full(np.shape(y), -0.5 * (LOG2PI + 2 * np.log(self.sigma_u)))[()]

    def log_g_integral(self, y):
        return np.full(np.shape(y), -np.log(self.phi))[()]

    def log_predictive(self, x, y):
        return norm_logpdf(y, self.phi * self.h(x), self.predictive_var)

    def log_predictive_sup(self, y):
        return np.full(np.shape(y), -0.5 * (LOG2PI + np.log(self.predictive_var)))[()]

    def _posterior(self, prior_mean, prior_var, y):
        v = 1.0 / (1.0 / prior_var + self.phi**2 / self.sigma_u**2)
        return v * (prior_mean / prior_var + self.phi * y / self.sigma_u**2), v

    def sample_adapted(self, x, y, draws):
        m, v = self._posterior(self.h(x), self.sigma_w**2, y)
        return m + np.sqrt(v) * draws.normal()

    def log_initial_predictive(self, y):
        return norm_logpdf(y, self.phi * self.m0, self.phi**2 * self.v0 + self.sigma_u**2)

    def sample_initial_adapted(self, y, draws):
        m, v = self._posterior(self.m0, self.v0, y)
        return m + np.sqrt(v) * draws.normal()

    # stability
    def drift_constants(self, delta=1.0, lam=0.5):
        lam, b, grid = _drift.fit_drift(self.h, self.sigma_w, delta, lam)
        return {"delta": delta, "lambda": lam, "b": b,
                "holds": _drift.drift_holds(self.h, self.sigma_w, delta, lam, b, grid)}

    def v_initial(self, delta):
        return float(_drift.expected_v_gaussian(self.m0, np.sqrt(self.v0), delta))

    def sample_stationary(self, draws, burn_in=500):
        if self.h.is_linear:
            var = self.sigma_w**2 / (1 - self.h.a**2)
            return np.sqrt(var) * draws.normal()
        x = self.sample_mu(draws)
        for _ in range(burn_in):
            x = self.sample_m(x, draws)
        return x

    # Gaussian structure (linear drift only)
    def state_moments(self, t):
        """Mean and variance of X_t under mu (linear drift)."""
        if not self.h.is_linear:
            raise UnsupportedModel("state law is Gaussian only for linear drift")
        a = self.h.a
        m, v = self.m0, self.v0
        for _ in range(t):
            m, v = a * m, a * a * v + self.sigma_w**2
        return m, v

    def log_marginal_obs_density(self, t, ys):
        """log density of (Y_t, ..., Y_{t+l}) for rows of ``ys`` (shape ``(n, l+1)``)."""
        if not self.h.is_linear:
            raise UnsupportedModel("closed-form marginal needs a linear drift; use method='mc'")
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        n, L = ys.shape
        a = self.h.a
        means = np.empty(L)
        varx = np.empty(L)
        m, v = self.state_moments(t)
        for j in range(L):
            means[j], varx[j] = m, v
            m, v = a * m, a * a * v + self.sigma_w**2
        cov = np.empty((L, L))
        for i in range(L):
            for j in range(L):
                lo, hi = min(i, j), max(i, j)
                cov[i, j] = a ** (hi - lo) * varx[lo]
        S = self.phi**2 * cov + self.sigma_u**2 * np.eye(L)
        Lc = np.linalg.cholesky(S)
        z = np.linalg.solve(Lc, (ys - self.phi * means).T)
        return -0.5 * (L * LOG2PI + (z * z).sum(axis=0)) - np.log(np.diag(Lc)).sum()


class LinearGaussianModel(AdditiveNoiseModel):
    """Scalar linear-Gaussian state space model with Kalman, RTS and FFBS oracles.

    X_{t+1} = a X_t + sigma_x W,  Y_t = c X_t + sigma_y U.
    """

    family = "lgss"

    def __init__(self, a, sigma_x, c, sigma_y, m0=0.0, v0=1.0):
        if abs(a) >= 1:
            raise InvalidParams("|a| < 1 required")
        super().__init__(Drift(a), c, sigma_y, sigma_x, m0, v0)
        self.a, self.sigma_x, self.c, self.sigma_y = float(a), float(sigma_x), float(c), float(sigma_y)

    @classmethod
    def degenerate(cls, a, c, sigma_y, m0=0.0, v0=1.0):
        """Zero process noise variant (only for the smoother oracles)."""
        obj = cls.__new__(cls)
        obj.h = Drift(a)
        obj.a, obj.sigma_x, obj.c, obj.sigma_y = float(a), 0.0, float(c), float(sigma_y)
        obj.phi, obj.sigma_u, obj.sigma_w = float(c), float(sigma_y), 0.0
        obj.m0, obj.v0 = float(m0), float(v0)
        return obj

    def params(self):
        return {"a": self.a, "sigma_x": self.sigma_x, "c": self.c, "sigma_y": self.sigma_y,
                "m0": self.m0, "v0": self.v0}

    def stationary_var(self):
        return self.sigma_x**2 / (1 - self.a**2)

    def kalman_filter(self, y):
        """Filtered means/variances, one-step predictions and the exact log-likelihood."""
        y = np.asarray(y, dtype=float)
        T = y.shape[0] - 1
        mp = np.empty(T + 1)
        vp = np.empty(T + 1)
        mf = np.empty(T + 1)
        vf = np.empty(T + 1)
        ll = 0.0
        m, v = self.m0, self.v0
        for t in range(T + 1):
            if t > 0:
                m, v = self.a * mf[t - 1], self.a**2 * vf[t - 1] + self.sigma_x**2
            mp[t], vp[t] = m, v
            s = self.c**2 * v + self.sigma_y**2
            if s <= 0:
                raise NumericalDegeneracy("non-positive innovation variance")
            ll += float(norm_logpdf(y[t], self.c * m, s))
            k = v * self.c / s
            mf[t] = m + k * (y[t] - self.c * m)
            vf[t] = (1 - k * self.c) * v
        return {"m_pred": mp, "v_pred": vp, "m_filt": mf, "v_filt": vf, "loglik": ll}

    def log_likelihood(self, y):
        return self.kalman_filter(y)["loglik"]

    def rts_smoother(self, y):
        kf = self.kalman_filter(y)
        mf, vf, mp, vp = kf["m_filt"], kf["v_filt"], kf["m_pred"], kf["v_pred"]
        T = mf.shape[0] - 1
        ms = mf.copy()
        vs = vf.copy()
        for t in range(T - 1, -1, -1):
            if vp[t + 1] == 0:
                J = 0.0 if self.a == 0 else 1.0 / self.a
            else:
                J = vf[t] * self.a / vp[t + 1]
            ms[t] = mf[t] + J * (ms[t + 1] - mp[t + 1])
            vs[t] = vf[t] + J * J * (vs[t + 1] - vp[t + 1])
        return ms, vs

    def ffbs_sample(self, y, draws):
        """Exact joint-smoothing draws: forward Kalman pass then backward sampling.

        ``draws`` yields one normal per time index; output has shape ``draws.shape + (T+1,)``.
        """
        kf = self.kalman_filter(y)
        mf, vf = kf["m_filt"], kf["v_filt"]
        T = mf.shape[0] - 1
        if np.any(vf < -1e-12):
            raise NumericalDegeneracy("negative filtered variance")
        out = np.empty(draws.shape + (T + 1,))
        out[..., T] = mf[T] + np.sqrt(max(vf[T], 0.0)) * draws.normal()
        for t in range(T - 1, -1, -1):
            q = self.sigma_x**2
            denom = self.a**2 * vf[t] + q
            if denom <= 0:
                out[..., t] = mf[t]
                continue
            gain = vf[t] * self.a / denom
            mean = mf[t] + gain * (out[..., t + 1] - self.a * mf[t])
            var = vf[t] * q / denom
            out[..., t] = mean + np.sqrt(max(var, 0.0)) * draws.normal()
        return out


def gaussian_kl(m1, v1, m2, v2):
    return 0.5 * (np.log(v2 / v1) + (v1 + (m1 - m2) ** 2) / v2 - 1.0)


def lgss_stationary_kl(theta_star, theta):
    """Closed-form stationary one-step KL between two scalar LGSS parameterizations.

    ``theta = (a, sigma_x, c, sigma_y)``.
    """
    a1, sx1, c1, sy1 = theta_star
    a2, sx2, c2, sy2 = theta
    P = sx1**2 / (1 - a1**2)
    trans = 0.5 * (np.log(sx2**2 / sx1**2) + (sx1**2 + (a1 - a2) ** 2 * P) / sx2**2 - 1.0)
    obs = 0.5 * (np.log(sy2**2 / sy1**2) + (sy1**2 + (c1 - c2) ** 2 * P) / sy2**2 - 1.0)
    return float(trans + obs)

