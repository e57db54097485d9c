"""Monte Carlo estimators of the marginal moment quantities and a KL-rate diagnostic.

For a block of observations Y_{t:t+l} drawn from the model started at its initial law,

    Bbar = |w(Y_t)|_sup * |K<Y_{t+1:t+l}> 1|_sup / pbar_t(Y_{t:t+l})
    Cbar = |w(Y_t)|_sup * int g(x, Y_{t+1}) dx    / pbar_t(Y_t, Y_{t+1})       (l = 1)

where pbar_t is the marginal density of the block. Only l in {0, 1} is supported.
"""
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidParams, UnboundedWeight, UnsupportedModel
from .rng import Purpose, Streams
from .smc import map_rows
from .ssm import make_proposal

DEFAULT_CHECKPOINTS = (10_000, 50_000, 100_000)
BLOCK = 4096


@dataclass
class MomentEstimate:
    t: int
    ell: int
    alpha: float
    samples: int
    b_mean: float
    b_se: float
    c_mean: Optional[float] = None
    c_se: Optional[float] = None
    method: str = "exact"
    n_inner: Optional[int] = None
    params: dict = field(default_factory=dict)
    # checkpoint -> running mean of Bbar^alpha (and Cbar^alpha)
    b_running: dict = field(default_factory=dict)
    c_running: dict = field(default_factory=dict)

    def relative_change(self, which="b"):
        """Relative change of the running mean over the last doubling of the sample size."""
        run = self.b_running if which == "b" else self.c_running
        n = max(run)
        half = n // 2
        if half not in run:
            raise KeyError(f"no checkpoint at {half}")
        return abs(run[n] - run[half]) / abs(run[half])

    def growth(self, lo, hi, which="b"):
        run = self.b_running if which == "b" else self.c_running
        return run[hi] / run[lo]

    def to_dict(self):
        d = asdict(self)
        d["b_running"] = {str(k): v for k, v in self.b_running.items()}
        d["c_running"] = {str(k): v for k, v in self.c_running.items()}
        return d


def _hook(fn, err, msg):
    try:
        return fn()
    except UnsupportedModel:
        raise err(msg) from None


def sample_obs_blocks(model, t, ell, streams):
    """One observation block Y_{t:t+ell} per stream row, starting from the initial law."""
    d = streams.draws(0, Purpose.STATE, [0])
    x = model.sample_mu(d)
    for s in range(1, t + 1):
        x = model.sample_m(x, streams.draws(s, Purpose.STATE, [0]))
    ys = [model.sample_g(x, streams.draws(t, Purpose.OBSERVE, [0]))]
    for j in range(1, ell + 1):
        x = model.sample_m(x, streams.draws(t + j, Purpose.STATE, [0]))
        ys.append(model.sample_g(x, streams.draws(t + j, Purpose.OBSERVE, [0])))
    return np.stack([y[:, 0] for y in ys], axis=1)


def mc_log_marginal_density(model, t, ys, streams, n_inner=1000):
    """Bootstrap particle estimate of log pbar_t(y_{t:t+l}) with ``n_inner`` particles per row.

    Unbiased for the density itself; its log is biased downward.
    """
    idx = np.arange(n_inner)
    x = model.sample_mu(streams.draws(0, Purpose.AUX, idx))
    for s in range(1, t + 1):
        x = model.sample_m(x, streams.draws(s, Purpose.AUX, idx))
    out = np.zeros(ys.shape[0])
    for j in range(ys.shape[1]):
        if j > 0:
            x = model.sample_m(x, streams.draws(t + j, Purpose.AUX, idx))
        lw = model.log_g(x, ys[:, j:j + 1])
        lse = logsumexp(lw, axis=1, keepdims=True)
        out += lse[:, 0] - np.log(n_inner)
        if j + 1 < ys.shape[1]:
            p = np.exp(lw - lse)
            u = streams.uniforms(t + j, Purpose.RESAMPLE, idx)
            cum = np.cumsum(p, axis=1)
            cum[:, -1] = 1.0
            a = np.array([np.searchsorted(c, uu, side="right") for c, uu in zip(cum, u)])
            x = np.take_along_axis(x, np.minimum(a, n_inner - 1), axis=1)
    return out


def _log_terms(model, proposal, t, ell, streams, method, n_inner):
    ys = sample_obs_blocks(model, t, ell, streams)
    log_w = proposal.log_w_sup
    if log_w is None:
        raise UnboundedWeight("proposal has no weight sup-norm callback")
    lw = np.asarray(log_w(ys[:, 0]), dtype=float) * np.ones(ys.shape[0])
    if method == "exact":
        lp = model.log_marginal_obs_density(t, ys)
    else:
        lp = mc_log_marginal_density(model, t, ys, streams, n_inner)
    if ell == 0:
        return lw - lp, None
    lk = _hook(lambda: model.log_predictive_sup(ys[:, 1]), UnboundedWeight, "model has no predictive sup-norm")
    lg = _hook(lambda: model.log_g_integral(ys[:, 1]), UnboundedWeight, "model has no observation-density integral")
    return lw + lk - lp, lw + lg - lp


def estimate_moments(model, proposal="bootstrap", t=0, ell=0, alpha=0.5, samples=100_000, seed=0,
                     threads=1, method="exact", n_inner=1000, checkpoints=DEFAULT_CHECKPOINTS):
    """Estimate E[Bbar^alpha] (and E[Cbar^alpha] when ell = 1) under the model's initial law.

    ``method="exact"`` evaluates the marginal block density analytically or by
    adaptive quadrature; ``method="mc"`` uses an inner bootstrap filter.
    """
    if ell not in (0, 1):
        raise InvalidParams("only ell in {0, 1} is supported")
    if not alpha > 0:
        raise InvalidParams("alpha must be positive")
    if samples < 2:
        raise InvalidParams("need at least two samples")
    if method not in ("exact", "mc"):
        raise InvalidParams("method must be 'exact' or 'mc'")
    prop = make_proposal(model, proposal) if isinstance(proposal, str) else proposal
    if prop.log_w_sup is None:
        raise UnboundedWeight("proposal has no weight sup-norm callback")
    streams = Streams(seed, np.arange(samples, dtype=np.uint64))
    parts = map_rows(lambda s: _log_terms(model, prop, t, ell, s, method, n_inner), streams, threads,
                     chunk=BLOCK if method == "exact" else 256)
    lb = np.concatenate([p[0] for p in parts])
    b = np.exp(alpha * lb)
    cps = sorted({int(c) for c in checkpoints if c <= samples} | {samples})
    est = MomentEstimate(t=t, ell=ell, alpha=alpha, samples=samples, b_mean=float(b.mean()),
                         b_se=float(b.std(ddof=1) / np.sqrt(samples)), method=method,
                         n_inner=n_inner if method == "mc" else None, params=dict(model.params()),
                         b_running=_running(b, cps))
    if ell == 1:
        c = np.exp(alpha * np.concatenate([p[1] for p in parts]))
        est.c_mean = float(c.mean())
        est.c_se = float(c.std(ddof=1) / np.sqrt(samples))
        est.c_running = _running(c, cps)
    return est


def _running(v, cps):
    cs = np.cumsum(v)
    return {n: float(cs[n - 1] / n) for n in cps}


def estimate_moment_grid(models, **kwargs):
    """:func:`estimate_moments` at every model of a parameter grid."""
    return [estimate_moments(m, **kwargs) for m in models]


# ---- KL-rate diagnostic ---------------------------------------------------

@dataclass
class KlRateResult:
    horizons: list
    values: np.ndarray  # T * D(theta* || theta_T)
    se: np.ndarray
    closed_form: Optional[np.ndarray]
    bounded: bool
    ratio: float


def _lgss_tuple(p):
    return (p["a"], p["sigma_x"], p["c"], p["sigma_y"])


def kl_rate_check(family, theta_star, thetas, horizons, samples=20_000, seed=0, threshold=2.0):
    """Monte Carlo T * D(theta* || theta_T) over a horizon grid.

    D is the stationary one-step divergence of the transition and observation
    densities. ``bounded`` is set when max / median of the values stays below
    ``threshold`` (all-zero sequences count as bounded).
    """
    from .models import model_from_dict

    horizons = [int(T) for T in horizons]
    if len(thetas) != len(horizons):
        raise InvalidParams("need one parameter per horizon")
    star = model_from_dict(dict(theta_star, family=family))
    s = Streams(seed, [0])
    x = star.sample_stationary(s.draws(0, Purpose.STATE, np.arange(samples)))
    xp = star.sample_m(x, s.draws(1, Purpose.STATE, np.arange(samples)))
    yp = star.sample_g(xp, s.draws(1, Purpose.OBSERVE, np.arange(samples)))
    ref_m, ref_g = star.log_m(x, xp), star.log_g(xp, yp)
    vals, ses, closed = [], [], []
    for T, th in zip(horizons, thetas):
        m = model_from_dict(dict(th, family=family))
        diff = ((ref_m - m.log_m(x, xp)) + (ref_g - m.log_g(xp, yp))).ravel()
        vals.append(T * diff.mean())
        ses.append(T * diff.std(ddof=1) / np.sqrt(diff.size))
        if family == "lgss":
            closed.append(T * lgss_kl(theta_star, th))
    vals = np.asarray(vals)
    med = np.median(np.abs(vals))
    top = np.max(np.abs(vals))
    ratio = 1.0 if top == 0 else (np.inf if med == 0 else float(top / med))
    return KlRateResult(horizons, vals, np.asarray(ses), np.asarray(closed) if closed else None,
                        bool(ratio <= threshold), ratio)


def lgss_kl(theta_star, theta):
    from .models import lgss_stationary_kl

    return lgss_stationary_kl(_lgss_tuple(theta_star), _lgss_tuple(theta))
