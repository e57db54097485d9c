"""Built-in model families and the JSON model-config loader."""
import json
from pathlib import Path

from ..errors import ConfigError
from .additive_noise import AdditiveNoiseModel, Drift, LinearGaussianModel, lgss_stationary_kl
from .finite_hmm import FiniteHMM, hmm_exact_jsd, random_hmm
from .sv import StochVolModel, sv_weight_bounds

FAMILIES = ("finite-hmm", "lgss", "additive-noise", "sv")


def additive_noise_bounds(phi, sigma_u, sigma_w):
    """Weight bounds for the fully-adapted additive-noise model (constant in y)."""
    import numpy as np

    from ..errors import InvalidParams

    if phi <= 0 or sigma_u <= 0 or sigma_w <= 0:
        raise InvalidParams("phi, sigma_u and sigma_w must be positive")
    s2 = phi**2 * sigma_w**2 + sigma_u**2
    return {
        "w_sup": 1.0 / np.sqrt(2 * np.pi * s2),
        "g_integral": 1.0 / phi,
        "log_w_sup": lambda y: np.full(np.shape(y), -0.5 * np.log(2 * np.pi * s2))[()],
        "log_g_integral": lambda y: np.full(np.shape(y), -np.log(phi))[()],
    }


def model_from_dict(cfg):
    """Build a model from ``{"family": ..., <parameters>}``.

    Optional ``state_space`` / ``observation_space`` descriptors are checked against the family.
    """
    if not isinstance(cfg, dict) or "family" not in cfg:
        raise ConfigError("model config needs a 'family' key")
    fam = cfg["family"]
    p = {k: v for k, v in cfg.items() if k not in ("family", "state_space", "observation_space")}
    try:
        if fam == "finite-hmm":
            model = FiniteHMM(p["transition"], p["emission"], p["initial"])
        elif fam == "lgss":
            model = LinearGaussianModel(p["a"], p["sigma_x"], p["c"], p["sigma_y"], p.get("m0", 0.0), p.get("v0", 1.0))
        elif fam == "additive-noise":
            model = AdditiveNoiseModel(Drift.from_dict(p["drift"]), p["phi"], p["sigma_u"], p["sigma_w"],
                                       p.get("m0", 0.0), p.get("v0", 1.0))
        elif fam == "sv":
            model = StochVolModel(p["phi"], p["sigma"], p["beta"], p.get("m0"), p.get("v0"))
        else:
            raise ConfigError(f"unknown model family {fam!r}; expected one of {FAMILIES}")
    except KeyError as exc:
        raise ConfigError(f"{fam}: missing parameter {exc.args[0]!r}") from None
    for key, space in (("state_space", model.state_space), ("observation_space", model.observation_space)):
        if key in cfg:
            desc = cfg[key]
            kind = desc.get("type", desc.get("kind"))
            if kind != space.kind or (space.is_finite and desc.get("size", space.size) != space.size):
                raise ConfigError(f"{key} descriptor {desc} does not match family {fam}")
    return model


def model_to_dict(model):
    d = {"family": model.family}
    d.update(model.params())
    return d


def load_model(path):
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read model config {path}: {exc}") from None
    return model_from_dict(cfg)


__all__ = [
    "AdditiveNoiseModel", "Drift", "FiniteHMM", "LinearGaussianModel", "StochVolModel",
    "additive_noise_bounds", "hmm_exact_jsd", "lgss_stationary_kl", "load_model",
    "model_from_dict", "model_to_dict", "random_hmm", "sv_weight_bounds",
]
