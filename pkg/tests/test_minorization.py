import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from pgibbs.errors import InvalidN, InvalidParams, UnboundedWeight, ZeroLikelihood
from pgibbs.minorization import (b_cap, epsilon, epsilon_lower_bound, exact_b_tT, log_epsilon,
                                 minorization_report, strong_mixing_bound)
from pgibbs.models import FiniteHMM, random_hmm
from pgibbs.ssm import make_bootstrap, make_fully_adapted, make_proposal, simulate

B_arrays = st.lists(st.floats(0, 50, allow_nan=False), min_size=1, max_size=30).map(np.array)
# realized B values are >= 1 since the block density never exceeds the product of the sup-norms
B_real = st.lists(st.floats(1, 50, allow_nan=False), min_size=1, max_size=30).map(np.array)


def _brute_b(h, prop, y, t):
    """B_t by direct enumeration of the K-products and the forward conditional density."""
    T = len(y) - 1
    K = h.K
    pred, _, _ = h.forward(y)
    wsup = np.exp(prop.log_w0_sup(y[0]) if t == 0 else prop.log_w_sup(y[t]))
    best = 0.0
    for ell in range(T - t + 1):
        # K<y_{t+1:t+ell}> 1 (x) summing over all continuation paths explicitly
        beta = np.zeros(K)
        import itertools

        for x in range(K):
            tot = 0.0
            for cont in itertools.product(range(K), repeat=ell):
                p, prev = 1.0, x
                for j, xn in enumerate(cont):
                    p *= h.A[prev, xn] * h.E[xn, y[t + 1 + j]]
                    prev = xn
                tot += p
            beta[x] = tot
        den = np.sum(pred[t] * h.E[:, y[t]] * beta)
        best = max(best, wsup * beta.max() / den)
    return best


@pytest.mark.parametrize("kind", ["bootstrap", "fully-adapted"])
def test_exact_b_matches_brute_force(kind):
    for seed in range(4):
        h = random_hmm(3, 3, seed)
        _, y = simulate(h, 4, seed)
        prop = make_proposal(h, kind)
        B = exact_b_tT(h, prop, y)
        brute = [_brute_b(h, prop, y, t) for t in range(5)]
        assert np.allclose(B, brute, rtol=1e-12)


def test_t0_single_term(hmm2):
    y = np.array([1])
    B = exact_b_tT(hmm2, make_bootstrap(hmm2), y)
    assert B[0] == pytest.approx(hmm2.E[:, 1].max() / (hmm2.mu @ hmm2.E[:, 1]), rel=1e-14)


def test_uniform_g_gives_unit_b():
    h = FiniteHMM([[0.7, 0.3], [0.2, 0.8]], [[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5])
    B = exact_b_tT(h, make_bootstrap(h), np.array([0, 1, 1, 0]))
    assert np.allclose(B, 1.0, atol=1e-14)


@pytest.mark.parametrize("kind", ["bootstrap", "fully-adapted"])
def test_b_below_strong_mixing_cap(kind):
    for seed in range(30):
        h = random_hmm(3, 2, seed)
        s1 = h.s1_constants()
        _, y = simulate(h, 12, seed)
        B = exact_b_tT(h, make_proposal(h, kind), y)
        assert np.all(B >= 0)
        assert np.all(B <= b_cap(kind, s1["sigma_minus"], s1["sigma_plus"], h.s2_delta()) * (1 + 1e-12))


def test_running_weight_at_t0_breaks_minorization():
    """Using the running weight's sup at t=0 (instead of the initial weight actually used) can overstate epsilon."""
    from pgibbs.minorization import minorization_slack
    from pgibbs.models import hmm_exact_jsd
    from pgibbs.oracle import hmm_enumerate_pg

    worst = 0.0
    for seed in range(10):
        h = random_hmm(2, 2, seed)
        _, y = simulate(h, 1, seed)
        prop = make_fully_adapted(h)
        P = hmm_enumerate_pg(h, prop, y, 2)
        pi = hmm_exact_jsd(h, y)
        worst = min(worst, minorization_slack(P, pi, epsilon(exact_b_tT(h, prop, y, initial_weight="w"), 2)))
        assert minorization_slack(P, pi, epsilon(exact_b_tT(h, prop, y), 2)) >= -1e-10
    assert worst < -1e-3


def test_exact_b_errors():
    h = FiniteHMM([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]], [1.0, 0.0])
    with pytest.raises(ZeroLikelihood):
        exact_b_tT(h, make_bootstrap(h), np.array([1]))
    h2 = random_hmm(2, 2, 0)
    prop = make_bootstrap(h2)
    from dataclasses import replace

    with pytest.raises(UnboundedWeight):
        exact_b_tT(h2, replace(prop, log_w_sup=None), np.array([0, 1]))


# ---- epsilon ---------------------------------------------------------------


@pytest.mark.parametrize("N", [2, 3, 10, 1000])
@pytest.mark.parametrize("T", [0, 3, 9])
def test_epsilon_unit_b(N, T):
    assert epsilon(np.ones(T + 1), N) == pytest.approx(((N - 1) / N) ** (T + 1), rel=1e-13)


def test_epsilon_large_n():
    B = np.full(11, 5.0)
    direct = (999999 / 1000008) ** 11
    assert abs(epsilon(B, 10**6) - direct) < 1e-12


def test_epsilon_invalid_n():
    with pytest.raises(InvalidN):
        epsilon(np.ones(3), 1)


@settings(max_examples=100, deadline=None)
@given(B=B_arrays, N=st.integers(2, 10**6))
def test_epsilon_lower_bound_holds(B, N):
    assert epsilon(B, N) >= epsilon_lower_bound(B, N) * (1 - 1e-12)


@settings(max_examples=100, deadline=None)
@given(B=B_real, N=st.integers(2, 10**5))
def test_epsilon_monotone_in_n_and_in_range(B, N):
    e = epsilon(B, N)
    assume(e > 1e-300)
    assert 0 < e
    assert epsilon(B, N + 1) >= e * (1 - 1e-12)
    assert e <= 1 + 1e-15


@settings(max_examples=100, deadline=None)
@given(B=B_real, b=st.floats(1, 50), N=st.integers(2, 1000))
def test_epsilon_factor_identity(B, b, N):
    lhs = log_epsilon(np.append(B, b), N)
    rhs = log_epsilon(B, N) + math.log((N - 1) / (2 * b + N - 2))
    assert lhs == pytest.approx(rhs, abs=1e-12, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(B=st.lists(st.floats(1, 5), min_size=1, max_size=8).map(np.array), N=st.integers(2, 50))
def test_log_epsilon_matches_naive_product(B, N):
    naive = np.prod((N - 1) / (2 * B + N - 2))
    assert abs(epsilon(B, N) - naive) < 1e-12


# ---- closed-form floors ----------------------------------------------------


def test_strong_mixing_examples():
    assert strong_mixing_bound("fully-adapted", 1, 1, 1, 1, 1) == pytest.approx(math.exp(-1), abs=1e-15)
    assert strong_mixing_bound("fully-adapted", 1, 1, 1, 1, 1) == pytest.approx(0.367879, abs=1e-6)
    assert strong_mixing_bound("bootstrap", 1, 1, 1, 1, 2) == pytest.approx(0.606531, abs=1e-6)


@pytest.mark.parametrize("args", [("bootstrap", 0, 1, 1, 1, 1), ("bootstrap", 2, 1, 1, 1, 1),
                                  ("bootstrap", 1, 1, 0.5, 1, 1), ("bootstrap", 1, 1, 1, 0, 1),
                                  ("bootstrap", 1, 1, 1, 1, 0), ("fully-adapted", 1, 1, 1, 2, 1),
                                  ("other", 1, 1, 1, 1, 1)])
def test_strong_mixing_invalid(args):
    with pytest.raises(InvalidParams):
        strong_mixing_bound(*args)


@pytest.mark.parametrize("kind", ["bootstrap", "fully-adapted"])
def test_exact_epsilon_dominates_floor(kind):
    h = FiniteHMM([[0.6, 0.4], [0.4, 0.6]], [[0.7, 0.3], [0.3, 0.7]], [0.5, 0.5])
    s1 = h.s1_constants()
    for lam in (0.5, 1.0, 2.0):
        floor = strong_mixing_bound(kind, s1["sigma_minus"], s1["sigma_plus"], h.s2_delta(), 1, lam)
        for T in range(10, 201, 10):
            _, y = simulate(h, T, T)
            assert epsilon(exact_b_tT(h, make_proposal(h, kind), y), math.ceil(lam * T)) >= floor


def test_report(hmm2):
    rep = minorization_report(hmm2, make_bootstrap(hmm2), np.array([0, 1, 0]), 5, lam=1.0)
    d = rep.to_dict()
    assert d["method"] == "exact-finite" and len(d["B"]) == 3 and 0 < d["epsilon"] <= 1
    assert d["constants"]["m"] == 1 and d["floor"] > 0
