"""Experiment configs, suite dispatch and report bundles."""
import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, InvalidParams, PgibbsError
from .kernels import BACKEND

SCHEMA_VERSION = 1
KINDS = ("invariance", "limit", "minorize", "smc-check", "stat-invariance", "moments", "constants", "scaling")

DEFAULT_MODELS = {
    "mixing-hmm": {"family": "finite-hmm", "transition": [[0.6, 0.4], [0.4, 0.6]],
                   "emission": [[0.7, 0.3], [0.3, 0.7]], "initial": [0.5, 0.5]},
    "lgss": {"family": "lgss", "a": 0.9, "sigma_x": 1.0, "c": 1.0, "sigma_y": 1.0, "m0": 0.0, "v0": 1.0},
    "sv": {"family": "sv", "phi": 0.9, "sigma": 0.3, "beta": 0.7},
    "additive-noise": {"family": "additive-noise", "drift": {"kind": "linear", "a": 0.5},
                       "phi": 1.0, "sigma_u": 1.0, "sigma_w": 1.0, "m0": 0.0, "v0": 1.0},
}


@dataclass
class ExperimentConfig:
    kind: str
    model: object = None  # dict, path to a JSON model file, a DEFAULT_MODELS key, or None
    proposal: str = "bootstrap"
    seed: int = 0
    threads: int = 1
    out: str = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        p = self.params
        for key in ("Ts", "Ns", "horizons"):
            if key in p and len(p[key]) == 0:
                raise ConfigError(f"empty grid {key!r}")
        if self.kind == "scaling":
            gamma, alpha = p.get("gamma", 0.4), p.get("alpha", 0.5)
            if not 0 < gamma < alpha:
                raise ConfigError(f"scaling needs 0 < gamma < alpha (gamma={gamma}, alpha={alpha})")
        rule = p.get("n_rule")
        if rule is not None and rule not in ("fixed", "lambda", "power"):
            raise ConfigError(f"unknown N rule {rule!r}")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError("experiment config needs a 'kind'")
        known = {"kind", "model", "proposal", "seed", "threads", "out", "params"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read experiment config {path}: {exc}") from None

    def resolve_model(self, default):
        from .models import load_model, model_from_dict

        source = self.model if self.model is not None else default
        if isinstance(source, dict):
            return model_from_dict(source)
        if isinstance(source, str) and source in DEFAULT_MODELS:
            return model_from_dict(DEFAULT_MODELS[source])
        if isinstance(source, str):
            if not Path(source).exists():
                raise ConfigError(f"model file {source} does not exist")
            return load_model(source)
        return source


@dataclass
class ReportBundle:
    kind: str
    seed: int
    assertions: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def check(self, name, passed, value, tolerance, anchor, **extra):
        self.assertions.append({"name": name, "anchor": anchor, "passed": bool(passed), "value": _plain(value),
                                "tolerance": _plain(tolerance), "seed": self.seed, **_plain(extra)})
        return bool(passed)

    @property
    def passed(self):
        return bool(self.assertions) and all(a["passed"] for a in self.assertions)

    @property
    def exit_code(self):
        return 0 if self.passed else 1

    def csv_text(self, name):
        rows = self.tables[name]
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: _fmt(v) for k, v in r.items()})
        return buf.getvalue()

    def to_json(self):
        return json.dumps({"schema_version": SCHEMA_VERSION, "kind": self.kind, "seed": self.seed,
                           "passed": self.passed, "assertions": self.assertions, "summary": _plain(self.summary),
                           "tables": sorted(self.tables), "metadata": self.metadata}, indent=2, sort_keys=False)

    def write(self, out):
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{self.kind}.json").write_text(self.to_json() + "\n")
        for name in self.tables:
            (out / f"{self.kind}-{name}.csv").write_text(self.csv_text(name))
        return out


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def ordered_map(fn, items, threads=1):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---- suites ----------------------------------------------------------------

def _proposals(cfg, default=("bootstrap", "fully-adapted")):
    return list(cfg.params.get("proposals", default))


def suite_invariance(cfg, rep):
    """Exact stationarity and minorization on enumerable finite HMMs."""
    from .minorization import epsilon, exact_b_tT, minorization_slack
    from .models import hmm_exact_jsd, random_hmm
    from .oracle import hmm_enumerate_pg
    from .ssm import make_proposal, simulate

    p = cfg.params
    grid = [(K, N, T, kind, s) for K in p.get("Ks", (2, 3)) for N in p.get("Ns", (2, 3)) for T in p.get("Ts", (0, 1, 2))
            for kind in _proposals(cfg) for s in range(p.get("n_seeds", 10))]

    def one(inst):
        K, N, T, kind, s = inst
        seed = cfg.seed * 1000 + s
        hmm = random_hmm(K, K, seed)
        _, y = simulate(hmm, T, seed)
        prop = make_proposal(hmm, kind)
        P = hmm_enumerate_pg(hmm, prop, y, N)
        pi = hmm_exact_jsd(hmm, y)
        eps = epsilon(exact_b_tT(hmm, prop, y), N)
        return {"K": K, "N": N, "T": T, "proposal": kind, "instance_seed": seed,
                "invariance_error": float(np.max(np.abs(pi @ P - pi))),
                "row_sum_error": float(np.max(np.abs(P.sum(axis=1) - 1))),
                "epsilon": eps, "minorization_slack": minorization_slack(P, pi, eps)}

    rows = ordered_map(one, grid, cfg.threads)
    rep.tables["instances"] = rows
    tol = p.get("tolerance", 1e-10)
    inv = max(r["invariance_error"] for r in rows)
    rep.check("pg-invariance", inv < tol, inv, tol, "pg-invariance", instances=len(rows))
    rs = max(r["row_sum_error"] for r in rows)
    rep.check("rows-sum-to-one", rs < 1e-12, rs, 1e-12, "pg-kernel")
    sl = min(r["minorization_slack"] for r in rows)
    rep.check("minorization-realized", sl >= -tol, sl, tol, "minorization-bound")


def suite_limit(cfg, rep):
    """epsilon over a growing particle grid on one fixed instance."""
    from .minorization import epsilon, exact_b_tT
    from .models import random_hmm
    from .ssm import make_proposal, simulate

    p = cfg.params
    hmm = cfg.resolve_model(None) or random_hmm(p.get("K", 2), p.get("K", 2), cfg.seed)
    _, y = simulate(hmm, p.get("T", 2), cfg.seed)
    B = exact_b_tT(hmm, make_proposal(hmm, cfg.proposal), y)
    Ns = [int(n) for n in p.get("Ns", (2, 5, 10, 100, 10_000, 1_000_000))]
    eps = [epsilon(B, n) for n in Ns]
    rep.tables["epsilon"] = [{"N": n, "epsilon": e, "gap": 1 - e, "linear_bound": float(np.sum(2 * B - 1) / (n - 1))}
                             for n, e in zip(Ns, eps)]
    rep.tables["B"] = [{"t": t, "B": b} for t, b in enumerate(B)]
    rep.check("epsilon-nondecreasing-in-N", np.all(np.diff(eps) >= 0), float(np.min(np.diff(eps))), 0.0,
              "epsilon-limit")
    n = Ns[-1]
    gap, bound = 1 - eps[-1], float(np.sum(2 * B - 1) / (n - 1))
    rep.check("gap-below-linear-bound", gap <= bound + 1e-9, gap, 1e-9, "epsilon-limit", bound=bound, N=n)


def suite_minorize(cfg, rep):
    """Exact epsilon at N_T = ceil(lambda T) against the strong-mixing floors."""
    from .minorization import b_cap, epsilon, exact_b_tT, strong_mixing_bound
    from .ssm import make_proposal, simulate

    from .errors import UnsupportedModel
    from .models import FiniteHMM

    p = cfg.params
    hmm = cfg.resolve_model("mixing-hmm")
    if not isinstance(hmm, FiniteHMM):
        raise UnsupportedModel("exact minorization constants need a finite-state HMM")
    s1, delta = hmm.s1_constants(), hmm.s2_delta()
    rows = []
    for kind in _proposals(cfg):
        prop = make_proposal(hmm, kind)
        cap = b_cap(kind, s1["sigma_minus"], s1["sigma_plus"], delta, 1)
        for T in p.get("Ts", (10, 25, 50, 100, 200)):
            _, y = simulate(hmm, T, cfg.seed, stream=T)
            B = exact_b_tT(hmm, prop, y)
            for lam in p.get("lambdas", (0.5, 1.0, 2.0)):
                N = max(2, math.ceil(lam * T))
                floor = strong_mixing_bound(kind, s1["sigma_minus"], s1["sigma_plus"], delta, 1, lam)
                rows.append({"proposal": kind, "T": T, "lambda": lam, "N": N, "epsilon": epsilon(B, N),
                             "floor": floor, "max_B": float(B.max()), "B_cap": cap})
    rep.tables["floors"] = rows
    rep.summary.update(sigma_minus=s1["sigma_minus"], sigma_plus=s1["sigma_plus"], delta=delta, m=1)
    for kind in _proposals(cfg):
        sub = [r for r in rows if r["proposal"] == kind]
        margin = min(r["epsilon"] - r["floor"] for r in sub)
        bad = sorted({r["T"] for r in sub if r["epsilon"] < r["floor"] - 1e-9})
        rep.check(f"floor-{kind}", not bad, margin, 1e-9, "strong-mixing-floor", offending_T=bad)
        over = max(r["max_B"] - r["B_cap"] for r in sub)
        rep.check(f"B-within-cap-{kind}", over <= 1e-12, over, 1e-12, "strong-mixing-floor")


def suite_smc_check(cfg, rep):
    """Unbiasedness of the likelihood estimate: exact enumeration and an LGSS Monte Carlo check."""
    from .models import random_hmm
    from .oracle import expected_likelihood_estimate
    from .smc import run_smc_replicates
    from .ssm import make_proposal, simulate

    p = cfg.params
    rows = []
    K, N, T = p.get("K", 2), p.get("N", 2), p.get("T", 1)
    for kind in _proposals(cfg):
        for s in range(p.get("n_seeds", 5)):
            seed = cfg.seed * 1000 + s
            hmm = random_hmm(K, K, seed)
            _, y = simulate(hmm, T, seed)
            ez = expected_likelihood_estimate(hmm, make_proposal(hmm, kind), y, N)
            exact = float(np.exp(hmm.log_likelihood(y)))
            rows.append({"proposal": kind, "instance_seed": seed, "expected_Z": ez, "likelihood": exact,
                         "error": abs(ez - exact)})
    rep.tables["enumeration"] = rows
    err = max(r["error"] for r in rows)
    rep.check("likelihood-unbiased-exact", err < 1e-10, err, 1e-10, "likelihood-unbiasedness")
    if p.get("lgss_replicates", 0):
        lg = cfg.resolve_model("lgss")
        _, y = simulate(lg, p.get("lgss_T", 50), cfg.seed)
        R = p["lgss_replicates"]
        lz = run_smc_replicates(lg, make_proposal(lg, cfg.proposal), y, p.get("lgss_N", 500), cfg.seed, R,
                                cfg.threads)
        exact = lg.log_likelihood(y)
        # log of the mean of Z_hat is the unbiased-scale comparison; delta-method SE
        shift = lz.max()
        z = np.exp(lz - shift)
        log_mean = shift + np.log(z.mean())
        se = z.std(ddof=1) / np.sqrt(R) / z.mean()
        rep.tables["lgss"] = [{"replicate": i, "log_Z_hat": v} for i, v in enumerate(lz)]
        rep.check("lgss-likelihood-3se", abs(log_mean - exact) <= 3 * se, log_mean - exact, 3 * se,
                  "likelihood-unbiasedness", kalman=exact)


def suite_stat_invariance(cfg, rep):
    """One PG step from exact smoothing draws leaves every marginal's law unchanged (KS + Holm)."""
    from .pg import PgChainConfig, run_pg_chain
    from .rng import Purpose, Streams
    from .ssm import make_proposal, simulate
    from .stats import holm, ks_two_sample

    p = cfg.params
    lg = cfg.resolve_model("lgss")
    T, N, chains = p.get("T", 20), p.get("N", 10), p.get("chains", 500)
    level = p.get("level", 0.01)
    _, y = simulate(lg, T, cfg.seed)
    init = lg.ffbs_sample(y, Streams(cfg.seed, [1 << 40]).draws(0, Purpose.AUX, np.arange(chains)))[0]
    conf = PgChainConfig(N=N, T=T, iterations=1, seed=cfg.seed, proposal=cfg.proposal, chains=chains,
                         threads=cfg.threads)
    res = run_pg_chain(lg, make_proposal(lg, cfg.proposal), y, conf, init)
    after = res.paths[:, 0, :]
    tests = [ks_two_sample(init[:, t], after[:, t]) for t in range(T + 1)]
    reject, adj = holm([pv for _, pv in tests], level)
    rep.tables["ks"] = [{"t": t, "statistic": s, "p_value": pv, "holm_adjusted": a, "reject": bool(r)}
                        for t, ((s, pv), a, r) in enumerate(zip(tests, adj, reject))]
    rep.summary.update(res.diagnostics())
    rep.check("ks-holm", not reject.any(), float(adj.min()), level, "pg-invariance", rejections=int(reject.sum()))


def suite_moments(cfg, rep):
    """Running means of the moment quantities; stable or divergent as configured."""
    from .moments import estimate_moments

    p = cfg.params
    model = cfg.resolve_model(p.get("default_model", "sv"))
    samples = int(p.get("samples", 100_000))
    checks = p.get("checks", [{"alpha": 0.5, "ell": 0, "expect": "stable"}])
    rows = []
    for c in checks:
        est = estimate_moments(model, cfg.proposal, t=c.get("t", p.get("t", 0)), ell=c["ell"], alpha=c["alpha"],
                               samples=samples, seed=cfg.seed, threads=cfg.threads, method=p.get("method", "exact"),
                               n_inner=p.get("n_inner", 1000))
        for which, run in (("B", est.b_running), ("C", est.c_running)):
            for n, v in run.items():
                rows.append({"alpha": c["alpha"], "ell": c["ell"], "quantity": which, "samples": n, "running_mean": v})
        tag = f"alpha={c['alpha']},ell={c['ell']}"
        if c["expect"] == "stable":
            tol = c.get("tolerance", 0.05)
            for which, run in (("B", est.b_running), ("C", est.c_running)):
                if run:
                    ch = est.relative_change(which.lower())
                    rep.check(f"{which}-stable[{tag}]", ch < tol, ch, tol, "moment-condition",
                              mean=run[max(run)], se=est.b_se if which == "B" else est.c_se)
        else:
            lo, hi, factor = c.get("lo", 10_000), c.get("hi", samples), c.get("factor", 3.0)
            g = est.growth(lo, hi)
            rep.check(f"B-diverges[{tag}]", g > factor, g, factor, "moment-condition-fails-at-alpha-1",
                      running_lo=est.b_running[lo], running_hi=est.b_running[hi])
    rep.tables["running"] = rows


def suite_constants(cfg, rep):
    from .models.sv import D2, d1_constant

    d1 = d1_constant()
    rep.tables["constants"] = [{"name": "D1", "value": d1}, {"name": "D2", "value": D2}]
    rep.check("D2", abs(D2 - 0.2419707) <= 1e-6, D2, 1e-6, "sv-weight-bounds")
    rep.check("D1", abs(d1 - 1.0) <= 1e-6, d1, 1e-6, "sv-weight-bounds")


def suite_scaling(cfg, rep):
    from .scaling import scaling_experiment

    p = cfg.params
    model = cfg.resolve_model("sv")
    surrogate = cfg.resolve_model(p["surrogate"]) if p.get("surrogate") else None
    r = scaling_experiment(model, cfg.proposal, p.get("gamma", 0.4), p.get("horizons", (25, 50, 100)),
                           p.get("chains", 100), cfg.seed, p.get("alpha", 0.5), p.get("cap", 10_000),
                           p.get("iterations", 2), cfg.threads, surrogate)
    rep.tables["horizons"] = list(r.rows())
    rep.tables["chains"] = [{"T": T, "chain": c, "update_fraction": u}
                            for T, row in zip(r.horizons, r.update_fraction) for c, u in enumerate(row)]
    rep.summary.update(tau_proxy=r.tau_proxy, particles=r.particles, capped=r.capped)
    rep.check("median-update-nondecreasing", r.medians_nondecreasing, r.medians, 0.0, "particle-scaling-tightness")
    rep.check("kendall-tau-nonnegative", r.tau_update >= 0, r.tau_update, 0.0, "particle-scaling-tightness")


SUITES = {
    "invariance": suite_invariance, "limit": suite_limit, "minorize": suite_minorize, "smc-check": suite_smc_check,
    "stat-invariance": suite_stat_invariance, "moments": suite_moments, "constants": suite_constants,
    "scaling": suite_scaling,
}


def run_experiment(cfg):
    """Run one suite. Errors inside the suite become failed assertions; partial tables are kept."""
    if isinstance(cfg, dict):
        cfg = ExperimentConfig.from_dict(cfg)
    rep = ReportBundle(kind=cfg.kind, seed=cfg.seed)
    rep.metadata = {"version": __version__, "backend": BACKEND, "threads": cfg.threads, "proposal": cfg.proposal,
                    "params": _plain(cfg.params)}
    start = time.perf_counter()
    try:
        SUITES[cfg.kind](cfg, rep)
    except ConfigError:
        raise
    except (PgibbsError, InvalidParams) as exc:
        rep.check("suite-error", False, type(exc).__name__, None, cfg.kind, message=str(exc))
    rep.metadata["elapsed_seconds"] = round(time.perf_counter() - start, 3)
    rep.metadata["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    if cfg.out:
        rep.write(cfg.out)
    return rep
