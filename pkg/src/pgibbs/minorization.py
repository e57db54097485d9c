"""Minorization constants of the particle Gibbs kernel.

For a fixed observation record the kernel satisfies P(x', .) >= eps * pi(.) with
eps = prod_t (N-1) / (2 B_t + N - 2); the per-time factors B_t combine the weight
sup-norm, the sup of the unnormalized kernel products and conditional observation
densities. On finite HMMs every term is exact.
"""
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidN, InvalidParams, NonFiniteModel, UnboundedWeight, ZeroLikelihood


@dataclass
class MinorizationReport:
    B: np.ndarray
    epsilon: float
    N: int
    T: int
    method: str  # exact-finite | analytic-bound | monte-carlo
    proposal: str = ""
    constants: dict = field(default_factory=dict)
    floor: Optional[float] = None

    def to_dict(self):
        d = asdict(self)
        d["B"] = [float(b) for b in self.B]
        return d


def log_epsilon(B, N):
    if N < 2:
        raise InvalidN("epsilon needs N >= 2")
    B = np.asarray(B, dtype=float)
    if np.any(B < 0):
        raise ValueError("B must be nonnegative")
    # log((N-1)/(2B+N-2)) = -log1p((2B-1)/(N-1)); B=0 with N=2 is +inf
    with np.errstate(divide="ignore"):
        return float(-np.sum(np.log1p((2 * B - 1) / (N - 1))))


def epsilon(B, N):
    """prod_t (N-1)/(2 B_t + N - 2), evaluated in log domain."""
    return float(np.exp(log_epsilon(B, N)))


def epsilon_lower_bound(B, N):
    """exp(sum_t (1 - 2 B_t) / (N - 1)), a lower bound on :func:`epsilon`."""
    B = np.asarray(B, dtype=float)
    return float(np.exp(np.sum(1 - 2 * B) / (N - 1)))


def strong_mixing_bound(kind, sigma_minus, sigma_plus, delta=1.0, m=1, lam=1.0):
    """Asymptotic floor of eps with N_T ~ lam * T under strong mixing.

    fully-adapted (needs m = 1): exp((1 - 2 (s+/s-)^2) / lam);
    bootstrap: exp((1 - 2 delta^m s+/s-) / lam).
    """
    if not (sigma_minus > 0 and sigma_plus >= sigma_minus and delta >= 1 and m >= 1 and lam > 0):
        raise InvalidParams("need sigma+ >= sigma- > 0, delta >= 1, m >= 1, lambda > 0")
    ratio = sigma_plus / sigma_minus
    if kind == "fully-adapted":
        if m != 1:
            raise InvalidParams("the fully-adapted floor requires m = 1")
        return float(np.exp((1 - 2 * ratio**2) / lam))
    if kind == "bootstrap":
        return float(np.exp((1 - 2 * delta**m * ratio) / lam))
    raise InvalidParams(f"unknown kind {kind!r}")


def b_cap(kind, sigma_minus, sigma_plus, delta=1.0, m=1):
    """Uniform bound on every B_t under strong mixing."""
    ratio = sigma_plus / sigma_minus
    return ratio**2 if kind == "fully-adapted" else delta**m * ratio


def _log_sup(fn, y):
    if fn is None:
        raise UnboundedWeight("proposal has no weight sup-norm callback")
    return float(np.asarray(fn(y)))


def exact_b_tT(hmm, proposal, y, initial_weight="w0"):
    """Exact B_0..B_T on a finite HMM.

    ``initial_weight`` selects the sup-norm used at t = 0: ``"w0"`` the initial weight
    function actually used by the sweep, ``"w"`` the running weight at y_0.
    """
    y = np.asarray(y)
    T = y.shape[0] - 1
    K = hmm.K
    if not (np.all(np.isfinite(hmm.A)) and np.all(np.isfinite(hmm.E))):
        raise NonFiniteModel("non-finite HMM parameters")
    pred, _, _ = hmm.forward(y)  # raises ZeroLikelihood
    log_wsup = np.array([_log_sup(proposal.log_w_sup, y[t]) for t in range(T + 1)])
    if initial_weight == "w0":
        log_wsup[0] = _log_sup(proposal.log_w0_sup, y[0])
    elif initial_weight != "w":
        raise ValueError("initial_weight must be 'w0' or 'w'")
    G = hmm.E[:, y].T  # (T+1, K): g(x, y_t)
    Kmats = hmm.A[None, :, :] * G[:, None, :]  # K<y_s>(x, x') = A[x, x'] g(x', y_s)
    head = pred * G  # (T+1, K)
    P = np.broadcast_to(np.eye(K), (T + 1, K, K)).copy()
    best = np.full(T + 1, -np.inf)
    for ell in range(T + 1):
        active = np.arange(T + 1 - ell)
        if ell > 0:
            P[active] = P[active] @ Kmats[active + ell]
            P[active] /= P[active].max(axis=(1, 2), keepdims=True)
        beta = P[active].sum(axis=2)  # scaled K<y_{t+1:t+ell}>1
        den = np.einsum("tk,tk->t", head[active], beta)
        if np.any(den <= 0):
            raise ZeroLikelihood("conditional observation density vanished")
        with np.errstate(divide="ignore"):
            val = log_wsup[active] + np.log(beta.max(axis=1)) - np.log(den)
        best[active] = np.maximum(best[active], val)
    return np.exp(best)


def minorization_report(hmm, proposal, y, N, initial_weight="w0", lam=None):
    y = np.asarray(y)
    B = exact_b_tT(hmm, proposal, y, initial_weight)
    s1 = hmm.s1_constants()
    consts = dict(s1, delta=hmm.s2_delta(), cap=b_cap(proposal.kind, s1["sigma_minus"], s1["sigma_plus"],
                                                     hmm.s2_delta(), s1["m"]))
    floor = None
    if lam is not None:
        consts["lambda"] = lam
        floor = strong_mixing_bound(proposal.kind, s1["sigma_minus"], s1["sigma_plus"], consts["delta"], 1, lam)
    return MinorizationReport(B=B, epsilon=epsilon(B, N), N=N, T=y.shape[0] - 1, method="exact-finite",
                              proposal=proposal.kind, constants=consts, floor=floor)


def minorization_slack(P, pi, eps):
    """min over (row, atom) of P[row, atom] - eps * pi[atom]."""
    return float(np.min(P - eps * pi[None, :]))
