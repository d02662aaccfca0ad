"""Sampling error and the optimal budget selection."""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from logzero import logger

from pwevent import TOLERANCE
from pwevent.core.budgets import collapse_budgets
from pwevent.noise.laplace import noise_error


@dataclass(frozen=True)
class ObsResult:
    """The chosen threshold, its error and every candidate's error."""
    eps_opt: float
    err_min: float
    per_candidate_errors: Tuple[Tuple[float, float], ...]


def inclusion_probabilities(eps_vector, eps_theta):
    """Per-user probability of entering the sample at threshold ``eps_theta``.

    Users at or above the threshold always enter, users with no budget never do
    and the rest enter with probability (e^eps - 1)/(e^eps_theta - 1).
    """
    if not eps_theta > 0:
        raise ValueError(f"Sampling threshold must be positive, got {eps_theta}.")
    eps = np.asarray(eps_vector, dtype=float)
    probabilities = np.expm1(np.clip(eps, 0.0, None)) / np.expm1(eps_theta)
    probabilities = np.where(eps >= eps_theta - TOLERANCE, 1.0, probabilities)
    return np.where(eps > TOLERANCE, probabilities, 0.0)


def sampling_error(pairs, eps_theta):
    """Variance plus squared bias of the sampled count at ``eps_theta``."""
    if not eps_theta > 0:
        raise ValueError(f"Sampling threshold must be positive, got {eps_theta}.")
    below = pairs.budgets < eps_theta - TOLERANCE
    counts = pairs.counts[below]
    p = np.expm1(pairs.budgets[below]) / np.expm1(eps_theta)
    variance = np.sum(counts * p * (1.0 - p))
    bias = np.sum(counts * (1.0 - p))
    return float(variance + bias ** 2)


def total_error(pairs, eps_theta):
    return sampling_error(pairs, eps_theta) + noise_error(eps_theta)


def candidate_errors(pairs):
    """Total error at every distinct budget, evaluated in one broadcast."""
    budgets = pairs.budgets
    theta = budgets[:, None]
    p = np.expm1(budgets[None, :]) / np.expm1(theta)
    below = np.tri(len(budgets), k=-1, dtype=bool)
    weighted = np.where(below, pairs.counts[None, :], 0)
    variance = np.sum(weighted * p * (1.0 - p), axis=1)
    bias = np.sum(weighted * (1.0 - p), axis=1)
    return variance + bias ** 2 + 2.0 / budgets ** 2


def obs(eps_vector):
    """Pick the threshold among the distinct budgets minimising total error.

    Ties within tolerance go to the smallest budget.

    Returns:
        ObsResult or None: None when no user has a positive budget, which the
        caller turns into a null publication.
    """
    pairs = collapse_budgets(eps_vector)
    if len(pairs) == 0:
        logger.debug("No positive budget to select a threshold from.")
        return None
    errors = candidate_errors(pairs)
    best = int(np.flatnonzero(errors <= errors.min() + TOLERANCE)[0])
    return ObsResult(eps_opt=float(pairs.budgets[best]), err_min=float(errors[best]),
                     per_candidate_errors=tuple(zip(pairs.budgets.tolist(), errors.tolist())))


def sm_error_upper_bound(pairs, sensitivity=1.0):
    """Closed-form upper bound on the error of a sampled release.

    Args:
        pairs (BudgetQuantityPairs): Non-empty budget multiplicities.
        sensitivity (float): Query sensitivity I.

    Returns:
        float: min(2I^2/min^2, Z + 2I^2/max^2) with Z = (n - n_A)(n - n_A + 1/4).
    """
    if len(pairs) == 0:
        raise ValueError("The error bound needs at least one budget pair.")
    if not sensitivity > 0:
        raise ValueError(f"Sensitivity must be positive, got {sensitivity}.")
    rest = pairs.total - pairs.top_count
    z = rest * (rest + 0.25)
    scale = 2.0 * sensitivity ** 2
    return float(min(scale / pairs.budgets[0] ** 2, z + scale / pairs.budgets[-1] ** 2))
