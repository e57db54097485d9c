"""Two-sample tests and multiplicity correction."""
import warnings

import numpy as np
from scipy import stats as _st

from .errors import EmptySample


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic and p-value (exact for small samples)."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptySample("both samples must be nonempty")
    with warnings.catch_warnings():
        # scipy falls back to the asymptotic p-value itself when the exact one fails
        warnings.filterwarnings("ignore", "ks_2samp: Exact calculation unsuccessful", RuntimeWarning)
        res = _st.ks_2samp(a, b)
    return float(res.statistic), float(np.clip(res.pvalue, 0.0, 1.0))


def holm(pvalues, level=0.01):
    """Holm step-down rejections and adjusted p-values."""
    p = np.asarray(pvalues, dtype=float)
    m = p.size
    order = np.argsort(p, kind="stable")
    adj = np.empty(m)
    adj[order] = np.minimum(1.0, np.maximum.accumulate((m - np.arange(m)) * p[order]))
    return adj <= level, adj


def standard_error(x, axis=0):
    x = np.asarray(x, dtype=float)
    return x.std(axis=axis, ddof=1) / np.sqrt(x.shape[axis])
