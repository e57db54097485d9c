"""Particle Gibbs / conditional SMC toolkit with exact finite-HMM oracles and minorization diagnostics."""
from .kernels import BACKEND
from .minorization import MinorizationReport, epsilon, exact_b_tT, strong_mixing_bound
from .moments import MomentEstimate, estimate_moments, kl_rate_check
from .pg import PgChainConfig, csmc_sweep, pg_kernel_step, run_pg_chain
from .rng import Streams
from .smc import ParticleSystem, PathSample, SmcResult, extract_path, resample_multinomial, run_smc
from .scaling import scaling_experiment
from .ssm import ProposalScheme, StateSpaceModel, log_density_path, make_bootstrap, make_fully_adapted, make_proposal

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "MinorizationReport", "MomentEstimate", "ParticleSystem", "PathSample", "PgChainConfig",
    "ProposalScheme", "SmcResult", "StateSpaceModel", "Streams", "csmc_sweep", "epsilon", "estimate_moments",
    "exact_b_tT", "extract_path", "kl_rate_check", "log_density_path", "make_bootstrap", "make_fully_adapted",
    "make_proposal", "pg_kernel_step", "resample_multinomial", "run_pg_chain", "run_smc",
    "scaling_experiment", "strong_mixing_bound",
]
