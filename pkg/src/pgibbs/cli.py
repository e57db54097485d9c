"""Command-line interface: ``pgibbs <group> <command>``."""
import csv
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from .errors import ConfigError, PgibbsError


def read_obs(path, finite=False):
    """Observations from a CSV with header ``t,y`` (one row per time index, in order)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read observations {path}: {exc}") from None
    if not rows or set(rows[0]) != {"t", "y"}:
        raise ConfigError(f"{path}: expected header 't,y'")
    ts = [int(r["t"]) for r in rows]
    if ts != list(range(len(ts))):
        raise ConfigError(f"{path}: t must run 0..T in order")
    ys = [float(r["y"]) for r in rows]
    return np.array(ys, dtype=np.int64 if finite else float)


def write_rows(path, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for r in rows:
            w.writerow(r)
    return path


def _emit(ctx, name, payload):
    text = json.dumps(payload, indent=2, default=_json_default)
    out = ctx.obj["out"]
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / name).write_text(text + "\n")
    click.echo(text)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def _model(source):
    from .experiments import DEFAULT_MODELS
    from .models import load_model, model_from_dict

    if source in DEFAULT_MODELS:
        return model_from_dict(DEFAULT_MODELS[source])
    return load_model(source)


def _load(model_spec, obs):
    model = _model(model_spec)
    return model, read_obs(obs, model.observation_space.is_finite)


def common(fn):
    """Accept --seed/--threads/--out after the subcommand too; they override the group values."""
    @click.option("--seed", "seed_", default=None, type=int, help="Overrides the global --seed.")
    @click.option("--threads", "threads_", default=None, type=int, help="Overrides the global --threads.")
    @click.option("--out", "out_", default=None, type=click.Path(file_okay=False), help="Overrides the global --out.")
    @functools.wraps(fn)
    def wrapper(*args, seed_=None, threads_=None, out_=None, **kwargs):
        ctx = click.get_current_context()
        for key, val in (("seed", seed_), ("threads", threads_), ("out", out_)):
            if val is not None:
                ctx.obj[key] = val
                ctx.obj.setdefault("explicit", set()).add(key)
        return fn(*args, **kwargs)

    return wrapper


@click.group()
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--threads", default=1, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path(file_okay=False), help="Directory for reports.")
@click.option("--config", default=None, type=click.Path(dir_okay=False), help="Experiment config (JSON).")
@click.pass_context
def cli(ctx, seed, threads, out, config):
    ctx.ensure_object(dict)
    src = ctx.get_parameter_source
    explicit = {k for k in ("seed", "threads") if src(k) != click.core.ParameterSource.DEFAULT}
    ctx.obj.update(seed=seed, threads=threads, out=out, config=config, explicit=explicit)


@cli.command("run")
@common
@click.pass_context
def run_cmd(ctx):
    """Run the experiment described by --config; explicit --seed/--threads/--out override the file."""
    from .experiments import ExperimentConfig, run_experiment

    if not ctx.obj["config"]:
        raise ConfigError("run needs --config")
    cfg = ExperimentConfig.from_file(ctx.obj["config"])
    for key in ctx.obj.get("explicit", ()):
        setattr(cfg, key, ctx.obj[key])
    if ctx.obj["out"]:
        cfg.out = ctx.obj["out"]
    rep = run_experiment(cfg)
    click.echo(rep.to_json())
    ctx.exit(rep.exit_code)


# ---- smc -------------------------------------------------------------------

@cli.group()
def smc():
    """Standard SMC."""


@smc.command("run")
@click.option("--model", required=True)
@click.option("--proposal", type=click.Choice(["bootstrap", "fully-adapted"]), default="bootstrap")
@click.option("--particles", "N", required=True, type=int)
@click.option("--obs", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--particles-csv", is_flag=True, help="Also write final weighted particles as CSV.")
@common
@click.pass_context
def smc_run(ctx, model, proposal, N, obs, particles_csv):
    from .smc import run_smc
    from .ssm import make_proposal

    m, y = _load(model, obs)
    res = run_smc(m, make_proposal(m, proposal), y, N, ctx.obj["seed"])
    if particles_csv and ctx.obj["out"]:
        T = res.system.T
        write_rows(Path(ctx.obj["out"]) / "particles.csv",
                   [("i", "state", "log_weight")] + [(i + 1, repr(float(x)), repr(float(w))) for i, (x, w) in
                                                     enumerate(zip(res.system.states[T], res.system.log_weights[T]))])
    _emit(ctx, "smc.json", {"log_likelihood_estimate": res.log_likelihood_estimate, "ess": res.ess,
                            "N": N, "T": int(y.shape[0] - 1), "seed": ctx.obj["seed"], "proposal": proposal})


# ---- pg --------------------------------------------------------------------

@cli.group()
def pg():
    """Particle Gibbs."""


def _prior_path(model, T, seed):
    from .ssm import simulate

    xs, _ = simulate(model, T, seed, stream=(1 << 40) + 1)
    return xs


@pg.command("run")
@click.option("--model", required=True)
@click.option("--proposal", type=click.Choice(["bootstrap", "fully-adapted"]), default="bootstrap")
@click.option("--particles", "N", required=True, type=int)
@click.option("--iters", required=True, type=int)
@click.option("--obs", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--init", "init", default="prior", show_default=True, help="prior | given:<csv with header t,x>")
@click.option("--chains", default=1, show_default=True, type=int)
@click.option("--burn-in", default=0, show_default=True, type=int)
@click.option("--thin", default=1, show_default=True, type=int)
@common
@click.pass_context
def pg_run(ctx, model, proposal, N, iters, obs, init, chains, burn_in, thin):
    """Run particle Gibbs chains; writes paths.csv and diagnostics JSON."""
    from .pg import PgChainConfig, run_pg_chain
    from .ssm import make_proposal

    m, y = _load(model, obs)
    T = y.shape[0] - 1
    if init == "prior":
        x0 = _prior_path(m, T, ctx.obj["seed"])
    elif init.startswith("given:"):
        with open(init[6:], newline="") as fh:
            rows = list(csv.DictReader(fh))
        x0 = np.array([float(r["x"]) for r in rows], dtype=np.int64 if m.state_space.is_finite else float)
    else:
        raise ConfigError("--init must be 'prior' or 'given:<csv>'")
    cfg = PgChainConfig(N=N, T=T, iterations=iters, burn_in=burn_in, seed=ctx.obj["seed"], proposal=proposal,
                        chains=chains, thin=thin, threads=ctx.obj["threads"])
    res = run_pg_chain(m, make_proposal(m, proposal), y, cfg, x0)
    if ctx.obj["out"]:
        header = ["chain", "sample"] + [f"x{t}" for t in range(T + 1)]
        body = [[c, k] + [repr(v.item()) if hasattr(v, "item") else v for v in path]
                for c in range(chains) for k, path in enumerate(res.paths[c])]
        write_rows(Path(ctx.obj["out"]) / "paths.csv", [header] + body)
    _emit(ctx, "pg.json", dict(res.diagnostics(), seed=ctx.obj["seed"], N=N, T=T))


@pg.command("invariance-check")
@click.option("--grid", type=click.Choice(["tiny"]), default="tiny", show_default=True)
@click.option("--seeds", "n_seeds", default=10, show_default=True, type=int)
@common
@click.pass_context
def pg_invariance(ctx, grid, n_seeds):
    """Enumerate the exact PG kernel on tiny HMMs; one pass/fail line per instance."""
    from .experiments import ExperimentConfig, run_experiment

    rep = run_experiment(ExperimentConfig("invariance", seed=ctx.obj["seed"], threads=ctx.obj["threads"],
                                          out=ctx.obj["out"], params={"n_seeds": n_seeds}))
    for r in rep.tables["instances"]:
        ok = r["invariance_error"] < 1e-10 and r["minorization_slack"] >= -1e-10
        click.echo(f"{'PASS' if ok else 'FAIL'} K={r['K']} N={r['N']} T={r['T']} {r['proposal']:<13} "
                   f"seed={r['instance_seed']} inv_err={r['invariance_error']:.2e} "
                   f"slack={r['minorization_slack']:.2e}")
    click.echo(f"{'PASS' if rep.passed else 'FAIL'} overall")
    ctx.exit(rep.exit_code)


# ---- minorize --------------------------------------------------------------

@cli.group()
def minorize():
    """Minorization constants."""


@minorize.command("exact")
@click.option("--model", required=True)
@click.option("--obs", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--particles", "N", required=True, type=int)
@click.option("--proposal", type=click.Choice(["bootstrap", "fully-adapted"]), default="bootstrap")
@click.option("--lambda", "lam", default=None, type=float, help="Also report the strong-mixing floor at this rate.")
@common
@click.pass_context
def minorize_exact(ctx, model, obs, N, proposal, lam):
    from .minorization import minorization_report
    from .models import FiniteHMM
    from .ssm import make_proposal

    m, y = _load(model, obs)
    if not isinstance(m, FiniteHMM):
        raise ConfigError("minorize exact needs a finite-hmm model")
    _emit(ctx, "minorize-exact.json", minorization_report(m, make_proposal(m, proposal), y, N, lam=lam).to_dict())


@minorize.command("bounds")
@click.option("--kind", type=click.Choice(["bootstrap", "fully-adapted"]), required=True)
@click.option("--sigma-", "--sigma-minus", "sigma_minus", required=True, type=float)
@click.option("--sigma+", "--sigma-plus", "sigma_plus", required=True, type=float)
@click.option("--delta", default=1.0, show_default=True, type=float)
@click.option("--m", "m", default=1, show_default=True, type=int)
@click.option("--lambda", "lam", required=True, type=float)
@common
@click.pass_context
def minorize_bounds(ctx, kind, sigma_minus, sigma_plus, delta, m, lam):
    from .minorization import strong_mixing_bound

    val = strong_mixing_bound(kind, sigma_minus, sigma_plus, delta, m, lam)
    _emit(ctx, "minorize-bounds.json", {"kind": kind, "sigma_minus": sigma_minus, "sigma_plus": sigma_plus,
                                        "delta": delta, "m": m, "lambda": lam, "floor": val})


@minorize.command("moments")
@click.option("--model", default="sv", show_default=True)
@click.option("--proposal", type=click.Choice(["bootstrap", "fully-adapted"]), default="bootstrap")
@click.option("--alpha", default=0.5, show_default=True, type=float)
@click.option("--ell", default=0, show_default=True, type=click.IntRange(0, 1))
@click.option("--t", "t", default=0, show_default=True, type=int)
@click.option("--samples", default="1e5", show_default=True)
@click.option("--method", type=click.Choice(["exact", "mc"]), default="exact", show_default=True)
@click.option("--n-inner", default=1000, show_default=True, type=int)
@common
@click.pass_context
def minorize_moments(ctx, model, proposal, alpha, ell, t, samples, method, n_inner):
    from .moments import estimate_moments

    est = estimate_moments(_model(model), proposal, t=t, ell=ell, alpha=alpha, samples=int(float(samples)),
                           seed=ctx.obj["seed"], threads=ctx.obj["threads"], method=method, n_inner=n_inner)
    _emit(ctx, "minorize-moments.json", dict(est.to_dict(), seed=ctx.obj["seed"]))


# ---- scaling ---------------------------------------------------------------

@cli.group()
def scaling():
    """Particle-budget scaling."""


@scaling.command("sweep")
@click.option("--model", default="sv", show_default=True)
@click.option("--proposal", type=click.Choice(["bootstrap", "fully-adapted"]), default="bootstrap")
@click.option("--gamma", default=0.4, show_default=True, type=float)
@click.option("--alpha", default=0.5, show_default=True, type=float)
@click.option("--Ts", "Ts", default="25,50,100", show_default=True)
@click.option("--chains", default=100, show_default=True, type=int)
@click.option("--cap", default=10_000, show_default=True, type=int)
@click.option("--iterations", default=2, show_default=True, type=int)
@common
@click.pass_context
def scaling_sweep(ctx, model, proposal, gamma, alpha, Ts, chains, cap, iterations):
    from .experiments import ExperimentConfig, run_experiment

    horizons = [int(s) for s in Ts.split(",") if s.strip()]
    cfg = ExperimentConfig("scaling", model=model, proposal=proposal, seed=ctx.obj["seed"],
                           threads=ctx.obj["threads"], out=ctx.obj["out"],
                           params={"gamma": gamma, "alpha": alpha, "horizons": horizons, "chains": chains,
                                   "cap": cap, "iterations": iterations})
    rep = run_experiment(cfg)
    click.echo(rep.to_json())
    ctx.exit(rep.exit_code)


# ---- oracle ----------------------------------------------------------------

@cli.group()
def oracle():
    """Exact finite-HMM oracles."""


@oracle.command("enumerate")
@click.option("--model", required=True)
@click.option("--obs", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--particles", "N", required=True, type=int)
@click.option("--proposal", type=click.Choice(["bootstrap", "fully-adapted"]), default="bootstrap")
@common
@click.pass_context
def oracle_enumerate(ctx, model, obs, N, proposal):
    """Exact PG transition matrix over path atoms, as CSV."""
    from .models import FiniteHMM
    from .models.finite_hmm import all_paths
    from .oracle import hmm_enumerate_pg
    from .ssm import make_proposal

    m, y = _load(model, obs)
    if not isinstance(m, FiniteHMM):
        raise ConfigError("oracle enumerate needs a finite-hmm model")
    P = hmm_enumerate_pg(m, make_proposal(m, proposal), y, N)
    labels = ["".join(map(str, p)) for p in all_paths(m.K, y.shape[0] - 1)]
    rows = [["from"] + labels] + [[lab] + [repr(float(v)) for v in row] for lab, row in zip(labels, P)]
    if ctx.obj["out"]:
        write_rows(Path(ctx.obj["out"]) / "pg-matrix.csv", rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerows(rows)


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="pgibbs", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except PgibbsError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
