"""Domain types shared by every mechanism: batches, requirements, records."""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

# A count histogram is a plain float vector of length d.
CountVector = np.ndarray

ABSENT = -1


class Decision(Enum):
    """How a slot's release came about."""
    NON_NULL = 'non-null'
    SKIPPED = 'skipped'
    NULLIFIED = 'nullified'
    FORCED = 'forced'

    @property
    def is_null(self):
        return self is not Decision.NON_NULL


class Verdict(Enum):
    """An injected publication decision that overrides the dissimilarity test."""
    PUBLISH = 'publish'
    SKIP = 'skip'

    @classmethod
    def parse(cls, value):
        if value is None or isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class StreamBatch:
    """One slot of the stream.

    Args:
        slot (int): The 1-based time slot t.
        assignments (np.ndarray): Bucket index per user, ``ABSENT`` (-1) when
            the user reports nothing at this slot.
        d (int): Histogram dimension.
    """
    slot: int
    assignments: np.ndarray
    d: int

    def __post_init__(self):
        if self.slot < 1:
            raise ValueError(f"Slots are 1-based, got {self.slot}.")
        if self.d < 1:
            raise ValueError(f"Histogram dimension must be positive, got {self.d}.")
        assignments = np.asarray(self.assignments, dtype=np.int64)
        if assignments.ndim != 1:
            raise ValueError("Assignments must be a flat per-user vector.")
        if np.any((assignments < ABSENT) | (assignments >= self.d)):
            raise ValueError(f"Bucket indexes must lie in [0, {self.d}) or be absent.")
        object.__setattr__(self, 'assignments', assignments)

    @property
    def n_users(self):
        return len(self.assignments)

    def histogram(self, included=None):
        """Bucket counts of present users, optionally restricted by a mask."""
        present = self.assignments != ABSENT
        if included is not None:
            present &= included
        counts = np.bincount(self.assignments[present], minlength=self.d)
        return counts.astype(float)


@dataclass(frozen=True)
class FixedRequirement:
    window: int
    budget: float

    def __post_init__(self):
        if int(self.window) != self.window or self.window < 1:
            raise ValueError(f"Window must be a positive integer, got {self.window}.")
        if not self.budget > 0:
            raise ValueError(f"Budget must be positive, got {self.budget}.")

    @property
    def share(self):
        """The per-slot publication share E/(2w)."""
        return self.budget / (2 * self.window)


@dataclass(frozen=True)
class DynamicRequirement:
    backward_window: int
    backward_budget: float
    forward_window: int
    forward_budget: float

    def __post_init__(self):
        for name in ('backward_window', 'forward_window'):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}.")
        for name in ('backward_budget', 'forward_budget'):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}.")


def _positive_windows(values, name):
    windows = np.asarray(values)
    if windows.ndim != 1 or len(windows) == 0:
        raise ValueError(f"{name} must be a non-empty per-user vector.")
    if np.any(windows < 1) or np.any(np.floor(windows) != windows):
        raise ValueError(f"{name} must hold positive integers.")
    return windows.astype(np.int64)


def _positive_budgets(values, name):
    budgets = np.asarray(values, dtype=float)
    if budgets.ndim != 1 or len(budgets) == 0:
        raise ValueError(f"{name} must be a non-empty per-user vector.")
    if not np.all(budgets > 0):
        raise ValueError(f"{name} must hold positive budgets.")
    return budgets


class FixedRequirements:
    """Per-user fixed (w_i, E_i) requirements held as numpy vectors."""

    def __init__(self, windows, budgets):
        self.windows = _positive_windows(windows, 'windows')
        self.budgets = _positive_budgets(budgets, 'budgets')
        if len(self.windows) != len(self.budgets):
            raise ValueError("windows and budgets must have the same length.")

    @classmethod
    def homogeneous(cls, n_users, window, budget):
        requirement = FixedRequirement(window, budget)
        return cls(np.full(n_users, requirement.window), np.full(n_users, requirement.budget))

    @classmethod
    def from_list(cls, requirements):
        return cls([r.window for r in requirements], [r.budget for r in requirements])

    def __len__(self):
        return len(self.windows)

    def __getitem__(self, user):
        return FixedRequirement(int(self.windows[user]), float(self.budgets[user]))

    @property
    def n_users(self):
        return len(self.windows)

    @property
    def shares(self):
        return self.budgets / (2 * self.windows)

    def is_homogeneous(self, requirement=None):
        """True when every user shares one requirement (``requirement`` if given)."""
        requirement = requirement or self[0]
        return bool(np.all(self.windows == requirement.window)
                    and np.all(self.budgets == requirement.budget))


class DynamicRequirements:
    """The per-user dynamic requirement tuples declared at one slot."""

    def __init__(self, backward_windows, backward_budgets, forward_windows, forward_budgets):
        self.backward_windows = _positive_windows(backward_windows, 'backward_windows')
        self.backward_budgets = _positive_budgets(backward_budgets, 'backward_budgets')
        self.forward_windows = _positive_windows(forward_windows, 'forward_windows')
        self.forward_budgets = _positive_budgets(forward_budgets, 'forward_budgets')
        sizes = {len(self.backward_windows), len(self.backward_budgets),
                 len(self.forward_windows), len(self.forward_budgets)}
        if len(sizes) != 1:
            raise ValueError("All dynamic requirement vectors must have the same length.")

    @classmethod
    def constant(cls, n_users, backward_window, backward_budget, forward_window, forward_budget):
        DynamicRequirement(backward_window, backward_budget, forward_window, forward_budget)
        return cls(np.full(n_users, backward_window), np.full(n_users, backward_budget),
                   np.full(n_users, forward_window), np.full(n_users, forward_budget))

    @classmethod
    def from_list(cls, requirements):
        return cls([r.backward_window for r in requirements],
                   [r.backward_budget for r in requirements],
                   [r.forward_window for r in requirements],
                   [r.forward_budget for r in requirements])

    def __len__(self):
        return len(self.backward_windows)

    def __getitem__(self, user):
        return DynamicRequirement(int(self.backward_windows[user]),
                                  float(self.backward_budgets[user]),
                                  int(self.forward_windows[user]),
                                  float(self.forward_budgets[user]))

    @property
    def n_users(self):
        return len(self.backward_windows)

    @property
    def forward_shares(self):
        return self.forward_budgets / (2 * self.forward_windows)

    def with_backward_budgets(self, backward_budgets):
        return DynamicRequirements(self.backward_windows, backward_budgets,
                                   self.forward_windows, self.forward_budgets)


@dataclass
class PublicationRecord:
    """The release at one slot and the budgets it consumed."""
    slot: int
    release: CountVector
    decision: Decision
    eps1: np.ndarray
    eps2: np.ndarray
    eps_opt: Optional[float] = None
    dissimilarity: Optional[float] = None
    projected: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.decision.is_null and np.any(self.eps2 != 0):
            raise ValueError(f"Null publication at slot {self.slot} "
                             "cannot spend publication budget.")


@dataclass(frozen=True)
class BudgetQuantityPairs:
    """Distinct positive budgets in ascending order with their multiplicities."""
    budgets: np.ndarray
    counts: np.ndarray
    excluded_count: int = 0

    def __post_init__(self):
        budgets = np.asarray(self.budgets, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        if budgets.shape != counts.shape:
            raise ValueError("budgets and counts must align.")
        if np.any(budgets <= 0) or np.any(counts < 1):
            raise ValueError("Pairs need positive budgets and positive counts.")
        if np.any(np.diff(budgets) <= 0):
            raise ValueError("Pair budgets must be strictly increasing.")
        object.__setattr__(self, 'budgets', budgets)
        object.__setattr__(self, 'counts', counts)

    def __len__(self):
        return len(self.budgets)

    def __iter__(self):
        return iter(zip(self.budgets.tolist(), self.counts.tolist()))

    @property
    def total(self):
        """Number of users with a positive budget."""
        return int(self.counts.sum())

    @property
    def top_count(self):
        """Multiplicity n_A of the largest budget."""
        return int(self.counts[-1]) if len(self) else 0

