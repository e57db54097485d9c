"""State-space model abstraction and importance-proposal constructions.

All densities are handled as logs. Finite state spaces use the counting measure
and continuous ones Lebesgue measure; the dominating measure is implied by
``state_space.kind`` and never represented explicitly.

Model methods are elementwise and broadcast over numpy arrays, so the same model
object serves a single particle, a particle cloud ``(N,)`` or a batch ``(B, N)``.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import LengthMismatch, UnsupportedModel
from .rng import Purpose, Streams


@dataclass(frozen=True)
class Space:
    kind: str  # "finite" or "continuous"
    size: Optional[int] = None
    dim: int = 1

    def __post_init__(self):
        if self.kind not in ("finite", "continuous"):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.kind == "finite" and (self.size is None or self.size < 1):
            raise ValueError("finite space needs a positive size")

    @property
    def is_finite(self):
        return self.kind == "finite"


class StateSpaceModel:
    """Base class: transition ``M``, observation density ``g`` and initial law ``mu``.

    Subclasses implement the six required methods. Analytic extras (weight bounds,
    one-step predictive, adapted samplers) are optional; :meth:`supports` reports
    which ones a subclass provides.
    """

    family = "abstract"
    state_space = Space("continuous")
    observation_space = Space("continuous")

    # required
    def log_m(self, x, xp):
        raise NotImplementedError

    def log_g(self, x, y):
        raise NotImplementedError

    def log_mu(self, x):
        raise NotImplementedError

    def sample_m(self, x, draws):
        raise NotImplementedError

    def sample_g(self, x, draws):
        raise NotImplementedError

    def sample_mu(self, draws):
        raise NotImplementedError

    # optional analytic hooks
    def log_g_sup(self, y):
        """log sup_x g(x, y)."""
        raise UnsupportedModel(f"{self.family}: no analytic sup of g")

    def log_g_integral(self, y):
        """log of the integral of g(x, y) over the state dominating measure."""
        raise UnsupportedModel(f"{self.family}: no analytic integral of g")

    def log_predictive(self, x, y):
        """log of the one-step predictive density: log of integral of M(x, du) g(u, y)."""
        raise UnsupportedModel(f"{self.family}: no analytic one-step predictive")

    def log_predictive_sup(self, y):
        """Upper bound on sup_x of the one-step predictive, in log."""
        raise UnsupportedModel(f"{self.family}: no bound on the one-step predictive")

    def sample_adapted(self, x, y, draws):
        """Draw from M(x, dx') g(x', y), normalized."""
        raise UnsupportedModel(f"{self.family}: no adapted sampler")

    def log_initial_predictive(self, y):
        """log of the integral of mu(dx) g(x, y)."""
        raise UnsupportedModel(f"{self.family}: no analytic initial predictive")

    def sample_initial_adapted(self, y, draws):
        raise UnsupportedModel(f"{self.family}: no adapted initial sampler")

    def supports(self, name):
        return getattr(type(self), name, None) is not getattr(StateSpaceModel, name, None)

    def params(self):
        return {}


def _requires(model, *names):
    missing = [n for n in names if not model.supports(n)]
    if missing:
        raise UnsupportedModel(f"{model.family} lacks {', '.join(missing)}")


@dataclass(frozen=True)
class ProposalScheme:
    """Proposal kernels and the induced importance weights, all in log form.

    ``log_w_sup(y)`` bounds log sup over (x, x') of the weight at observation y;
    ``log_w0_sup(y)`` does the same for the initial weight. Either may be None.
    """

    kind: str
    log_r0: Callable
    sample_r0: Callable
    log_r: Callable
    sample_r: Callable
    log_w0: Callable
    log_w: Callable
    log_w_sup: Optional[Callable] = None
    log_w0_sup: Optional[Callable] = None


def make_bootstrap(model):
    """Propose from the transition kernel; the weight is the observation density."""
    _requires(model, "sample_m", "sample_mu")
    sup = model.log_g_sup if model.supports("log_g_sup") else None
    return ProposalScheme(
        kind="bootstrap",
        log_r0=lambda y0, x0: model.log_mu(x0),
        sample_r0=lambda y0, draws: model.sample_mu(draws),
        log_r=lambda y, x, xp: model.log_m(x, xp),
        sample_r=lambda y, x, draws: model.sample_m(x, draws),
        log_w0=lambda y0, x0: model.log_g(x0, y0),
        log_w=lambda y, x, xp: model.log_g(xp, y),
        log_w_sup=sup,
        log_w0_sup=sup,
    )


def make_fully_adapted(model):
    """Propose from M twisted by the next observation; the weight is the one-step predictive.

    At time 0 the proposal is the normalized mu(dx) g(x, y0) with constant weight
    equal to its normalizer when the model provides both; otherwise it falls back to
    proposing from mu with weight g.
    """
    _requires(model, "log_predictive", "sample_adapted")

    def log_r(y, x, xp):
        return model.log_m(x, xp) + model.log_g(xp, y) - model.log_predictive(x, y)

    def log_w(y, x, xp):
        lw = model.log_predictive(x, y)
        return np.broadcast_to(lw, np.broadcast(np.asarray(x), np.asarray(xp)).shape).copy()

    w_sup = model.log_predictive_sup if model.supports("log_predictive_sup") else None

    if model.supports("log_initial_predictive") and model.supports("sample_initial_adapted"):

        def log_r0(y0, x0):
            return model.log_mu(x0) + model.log_g(x0, y0) - model.log_initial_predictive(y0)

        def log_w0(y0, x0):
            return np.full(np.shape(x0), model.log_initial_predictive(y0), dtype=float)

        sample_r0 = lambda y0, draws: model.sample_initial_adapted(y0, draws)  # noqa: E731
        w0_sup = model.log_initial_predictive
    else:
        log_r0 = lambda y0, x0: model.log_mu(x0)  # noqa: E731
        log_w0 = lambda y0, x0: model.log_g(x0, y0)  # noqa: E731
        sample_r0 = lambda y0, draws: model.sample_mu(draws)  # noqa: E731
        w0_sup = model.log_g_sup if model.supports("log_g_sup") else None

    return ProposalScheme(
        kind="fully-adapted",
        log_r0=log_r0,
        sample_r0=sample_r0,
        log_r=log_r,
        sample_r=lambda y, x, draws: model.sample_adapted(x, y, draws),
        log_w0=log_w0,
        log_w=log_w,
        log_w_sup=w_sup,
        log_w0_sup=w0_sup,
    )


def make_proposal(model, kind):
    if kind == "bootstrap":
        return make_bootstrap(model)
    if kind in ("fully-adapted", "fully_adapted", "adapted"):
        return make_fully_adapted(model)
    raise ValueError(f"unknown proposal {kind!r}")


def log_density_path(model, x, y):
    """Unnormalized log joint-smoothing density of the path ``x[0..t]`` given ``y[0..t]``."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape[0] != y.shape[0]:
        raise LengthMismatch(f"path has {x.shape[0]} states but {y.shape[0]} observations")
    with np.errstate(divide="ignore"):
        total = model.log_mu(x[0]) + model.log_g(x[0], y[0])
        for s in range(1, x.shape[0]):
            total = total + model.log_m(x[s - 1], x[s]) + model.log_g(x[s], y[s])
    return float(total)


def simulate(model, T, seed, stream=0):
    """Draw ``(x[0..T], y[0..T])`` from the model."""
    st = Streams(seed, [stream])
    idx = np.array([0])
    dtype = np.int64 if model.state_space.is_finite else np.float64
    ydtype = np.int64 if model.observation_space.is_finite else np.float64
    xs = np.empty(T + 1, dtype=dtype)
    ys = np.empty(T + 1, dtype=ydtype)
    x = model.sample_mu(st.draws(0, Purpose.STATE, idx))
    for t in range(T + 1):
        if t > 0:
            x = model.sample_m(x, st.draws(t, Purpose.STATE, idx))
        xs[t] = x.ravel()[0]
        ys[t] = model.sample_g(x, st.draws(t, Purpose.OBSERVE, idx)).ravel()[0]
    return xs, ys
