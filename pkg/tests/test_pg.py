import numpy as np
import pytest

from pgibbs.errors import InvalidN, LengthMismatch
from pgibbs.models import FiniteHMM, StochVolModel, hmm_exact_jsd, random_hmm
from pgibbs.models.finite_hmm import all_paths, path_codes
from pgibbs.oracle import enumerate_sweeps, hmm_enumerate_pg, outcome_count, pg_row
from pgibbs.pg import PgChainConfig, csmc_sweep, pg_kernel_step, run_pg_chain, update_fraction
from pgibbs.rng import Streams
from pgibbs.scaling import kendall_tau
from pgibbs.smc import PathSample, extract_path
from pgibbs.ssm import make_bootstrap, make_fully_adapted, make_proposal, simulate


def test_reference_is_preserved(lgss):
    _, y = simulate(lgss, 12, 0)
    ref = np.linspace(-1, 1, 13)
    for seed in range(5):
        sys_, _ = csmc_sweep(lgss, make_bootstrap(lgss), y, ref, 7, seed)
        assert np.array_equal(extract_path(sys_, 7).states, ref)
        assert np.all(sys_.ancestors[1:, 6] == 7)


def test_reference_preserved_bitwise_finite(hmm3):
    _, y = simulate(hmm3, 5, 2)
    ref = np.array([0, 2, 1, 1, 0, 2])
    sys_, _ = csmc_sweep(hmm3, make_fully_adapted(hmm3), y, ref, 3, 4)
    assert extract_path(sys_, 3).states.tobytes() == ref.astype(np.int64).tobytes()


def test_degenerate_weights_select_reference():
    # free particles start in state 0, which cannot emit y = 1
    h = FiniteHMM([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]], [1.0, 0.0])
    ref = np.array([1, 1])
    for seed in range(20):
        _, sel = csmc_sweep(h, make_bootstrap(h), np.array([1, 1]), ref, 4, seed)
        assert np.array_equal(sel.states, ref)


def test_sweep_errors(hmm2):
    with pytest.raises(InvalidN):
        csmc_sweep(hmm2, make_bootstrap(hmm2), np.array([0, 1]), np.array([0, 1]), 1)
    with pytest.raises(LengthMismatch):
        csmc_sweep(hmm2, make_bootstrap(hmm2), np.array([0, 1]), np.array([0, 1, 0]), 3)
    with pytest.raises(InvalidN):
        PgChainConfig(N=1, T=1, iterations=1)
    with pytest.raises(ValueError):
        PgChainConfig(N=2, T=1, iterations=0)


def test_enumeration_has_sixteen_outcomes_and_stochastic_rows(hmm2):
    assert outcome_count(2, 2, 1) == 16
    y = np.array([0, 1])
    P = hmm_enumerate_pg(hmm2, make_bootstrap(hmm2), y, 2)
    assert P.shape == (4, 4)
    assert np.allclose(P.sum(axis=1), 1, atol=1e-12)


def test_exact_invariance_tiny(hmm2):
    y = np.array([0, 1])
    pi = hmm_exact_jsd(hmm2, y)
    for kind in ("bootstrap", "fully-adapted"):
        for N in (2, 3):
            P = hmm_enumerate_pg(hmm2, make_proposal(hmm2, kind), y, N)
            assert np.max(np.abs(pi @ P - pi)) < 1e-10


def test_single_free_particle_row_by_hand(hmm2):
    """T=0, N=2: the kernel keeps x' w.p. g(x')/(g(x')+g(x)) and moves to a fresh mu-draw x otherwise."""
    y = np.array([1])
    row = pg_row(hmm2, make_bootstrap(hmm2), y, np.array([0]), 2)
    g = hmm2.E[:, 1]
    mu = hmm2.mu
    expected = np.zeros(2)
    for x in range(2):
        expected[x] += mu[x] * g[x] / (g[x] + g[0])
        expected[0] += mu[x] * g[0] / (g[x] + g[0])
    assert np.allclose(row, expected, atol=1e-15)


@pytest.mark.parametrize("kind", ["bootstrap", "fully-adapted"])
def test_sampler_matches_enumerated_row(hmm2, kind):
    """Empirical PG transitions from the sampler agree with the enumerated row (chi-square)."""
    from conftest import chi2_pvalue

    y = np.array([1, 0, 1])
    prop = make_proposal(hmm2, kind)
    ref = np.array([1, 1, 0])
    exact = pg_row(hmm2, prop, y, ref, 3)
    cfg = PgChainConfig(N=3, T=2, iterations=1, seed=4, proposal=kind, chains=40_000)
    res = run_pg_chain(hmm2, prop, y, cfg, ref)
    codes = path_codes(res.paths[:, 0, :], 2)
    assert chi2_pvalue(np.bincount(codes, minlength=8), exact) > 1e-3


def test_enumerate_sweep_reference_slot(hmm2):
    ref = np.array([1, 0])
    _, paths, _, _ = enumerate_sweeps(hmm2, make_bootstrap(hmm2), np.array([0, 1]), 3, ref)
    assert np.all(paths[:, -1, :] == ref)


def test_iterations_one_is_single_kernel_application(hmm2):
    y = np.array([0, 1, 1])
    cfg = PgChainConfig(N=3, T=2, iterations=1, seed=9)
    res = run_pg_chain(hmm2, make_bootstrap(hmm2), y, cfg, np.array([0, 0, 0]))
    assert res.paths.shape == (1, 1, 3)
    from pgibbs.pg import pg_step_batch

    direct = pg_step_batch(hmm2, make_bootstrap(hmm2), y, np.array([[0, 0, 0]]), 3, Streams(9, [0]).at_iteration(0))
    assert np.array_equal(res.paths[0, 0], direct[0])


def test_pg_kernel_step_returns_path_sample(hmm2):
    out = pg_kernel_step(hmm2, make_bootstrap(hmm2), np.array([0, 1]), PathSample(np.array([1, 1])), 2, 3)
    assert isinstance(out, PathSample) and out.states.shape == (2,)


def test_update_fraction():
    assert update_fraction([0, 1, 2, 3], [0, 1, 5, 6]) == 0.5


def test_chain_seed_determinism_and_threads(lgss):
    _, y = simulate(lgss, 10, 1)
    base = dict(N=8, T=10, iterations=6, seed=3, chains=8)
    a = run_pg_chain(lgss, make_bootstrap(lgss), y, PgChainConfig(**base, threads=1), np.zeros(11))
    b = run_pg_chain(lgss, make_bootstrap(lgss), y, PgChainConfig(**base, threads=4), np.zeros(11))
    c = run_pg_chain(lgss, make_bootstrap(lgss), y, PgChainConfig(**base, threads=1), np.zeros(11))
    assert a.paths.tobytes() == b.paths.tobytes() == c.paths.tobytes()


@pytest.mark.slow
def test_long_chain_marginals_match_forward_backward():
    h = random_hmm(3, 3, 5)
    T, N = 10, 5
    _, y = simulate(h, T, 5)
    exact = h.smoothed_marginals(y)
    chains, iters, burn = 20, 1050, 50
    cfg = PgChainConfig(N=N, T=T, iterations=iters, burn_in=burn, seed=1, chains=chains)
    res = run_pg_chain(h, make_bootstrap(h), y, cfg, np.zeros(T + 1, dtype=int))
    X = res.paths  # (chains, 1000, T+1): 2*10^4 post burn-in draws
    assert X.shape[0] * X.shape[1] == 20_000
    for k in range(3):
        ind = (X == k).astype(float)
        per_chain = ind.mean(axis=1)  # chains as independent batch means
        se = per_chain.std(axis=0, ddof=1) / np.sqrt(chains)
        est = per_chain.mean(axis=0)
        assert np.all(np.abs(est - exact[:, k]) < 3 * se + 1e-3)


@pytest.mark.slow
def test_update_fraction_trend_in_N_on_sv():
    sv = StochVolModel(0.9, 0.3, 0.7)
    _, y = simulate(sv, 50, 0)
    Ns, ufs = [], []
    for N in (2, 5, 20, 100):
        cfg = PgChainConfig(N=N, T=50, iterations=20, burn_in=5, seed=2, chains=10)
        init = np.zeros(51)
        res = run_pg_chain(sv, make_bootstrap(sv), y, cfg, init)
        ufs.extend(res.update_fraction[:, 5:].mean(axis=1))
        Ns.extend([N] * 10)
    assert kendall_tau(Ns, ufs) > 0


def test_atom_mass_reported(hmm2):
    cfg = PgChainConfig(N=2, T=1, iterations=50, seed=0, chains=4)
    res = run_pg_chain(hmm2, make_bootstrap(hmm2), np.array([0, 1]), cfg, np.array([0, 0]))
    d = res.diagnostics()
    assert 0 <= d["atom_mass"] <= 1 and 0 <= d["mean_update_fraction"] <= 1
