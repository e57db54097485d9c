"""Foster-Lyapunov drift checks for V(x) = exp(delta |x|) under Gaussian transitions."""
import numpy as np
from scipy.special import log_ndtr


def expected_v_gaussian(mean, sd, delta):
    """E exp(delta |X|) for X ~ N(mean, sd^2), in closed form."""
    mean = np.asarray(mean, dtype=float)
    a = delta * mean + 0.5 * (delta * sd) ** 2 + log_ndtr(mean / sd + delta * sd)
    b = -delta * mean + 0.5 * (delta * sd) ** 2 + log_ndtr(-mean / sd + delta * sd)
    return np.exp(np.logaddexp(a, b))


def fit_drift(cond_mean, sd, delta, lam=0.5, grid=None):
    """Constants (lam, b) with E[V(X_1) | x] <= lam V(x) + b on ``grid``.

    ``cond_mean`` maps x to the mean of X_1 given X_0 = x; the transition noise is N(0, sd^2).
    """
    if grid is None:
        grid = np.linspace(-60.0, 60.0, 24001)
    ev = expected_v_gaussian(cond_mean(grid), sd, delta)
    b = float(np.max(ev - lam * np.exp(delta * np.abs(grid))))
    return lam, max(b, 0.0), grid


def drift_holds(cond_mean, sd, delta, lam, b, grid, tol=1e-9):
    ev = expected_v_gaussian(cond_mean(grid), sd, delta)
    return bool(np.all(ev <= lam * np.exp(delta * np.abs(grid)) + b + tol * (1 + ev)))
