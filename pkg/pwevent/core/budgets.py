import numpy as np

from pwevent import TOLERANCE
from pwevent.core.types import BudgetQuantityPairs


def collapse_budgets(eps_vector, tolerance=TOLERANCE):
    """Collapse per-user budgets into distinct (budget, count) pairs.

    Values closer than ``tolerance`` to the smallest member of their group are
    merged into it. Zero budgets are left out and reported as ``excluded_count``.

    Args:
        eps_vector (array-like): Non-negative per-user budgets.
        tolerance (float): Merge distance for near-equal budgets.

    Returns:
        BudgetQuantityPairs: The pairs sorted by budget.

    Raises:
        ValueError: If any budget is negative.
    """
    eps = np.asarray(eps_vector, dtype=float).ravel()
    if np.any(eps < -tolerance):
        raise ValueError("Budgets must be non-negative.")
    positive = np.sort(eps[eps > tolerance])
    excluded = len(eps) - len(positive)
    budgets, counts = [], []
    for value in positive:
        if budgets and value - budgets[-1] <= tolerance:
            counts[-1] += 1
        else:
            budgets.append(value)
            counts.append(1)
    return BudgetQuantityPairs(np.array(budgets), np.array(counts, dtype=np.int64), excluded)
