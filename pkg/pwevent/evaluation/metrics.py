"""Utility metrics over a run's releases and true counts."""
import numpy as np
from scipy.special import rel_entr

from pwevent.core.types import Decision


def _check(trace):
    if trace.slots < 1:
        raise ValueError("Metrics need at least one slot.")


def mean_squared_error_per_slot(trace):
    """(1/d) ||r_t - c_t||^2 for every slot."""
    return np.mean((trace.releases - trace.true_counts) ** 2, axis=1)


def amre(trace):
    """Average over slots of the per-slot squared error divided by d."""
    _check(trace)
    return float(np.mean(mean_squared_error_per_slot(trace)))


def jensen_shannon(released, true, normalize=False):
    """Divergence between one release (clipped at 0) and the true counts.

    Counts are used as-is unless ``normalize`` rescales both to sum to one.
    """
    r = np.clip(np.asarray(released, dtype=float), 0.0, None)
    c = np.asarray(true, dtype=float)
    if normalize:
        r = r / r.sum() if r.sum() > 0 else r
        c = c / c.sum() if c.sum() > 0 else c
    v = (r + c) / 2
    return float(0.5 * (np.sum(rel_entr(r, v)) + np.sum(rel_entr(c, v))))


def ajsd(trace, normalize=False):
    """Average Jensen-Shannon divergence over slots."""
    _check(trace)
    return float(np.mean([jensen_shannon(r, c, normalize)
                          for r, c in zip(trace.releases, trace.true_counts)]))


def nullified_error(trace):
    """Mean per-slot squared error over nullified slots, 0 when there are none."""
    mask = np.array([decision is Decision.NULLIFIED for decision in trace.decisions])
    if not mask.any():
        return 0.0
    return float(np.mean(mean_squared_error_per_slot(trace)[mask]))
