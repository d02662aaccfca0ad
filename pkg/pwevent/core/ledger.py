"""Per-user privacy budget ledger with prefix-sum window queries."""
from enum import Enum

import numpy as np
from logzero import logger


class Phase(Enum):
    """Which budget sequence a window query reads."""
    CALCULATION = 1
    PUBLICATION = 2
    TOTAL = 'total'

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str) and value.isdigit():
            value = int(value)
        return cls(value)


class BudgetLedger:
    """Record every user's calculation and publication budget per slot.

    Each phase keeps a growable prefix-sum matrix of shape (slots + 1, n) whose
    row ``k`` holds the per-user sum over slots 1..k, so any window sum is one
    subtraction.
    """

    def __init__(self, n_users, capacity=64):
        if n_users < 1:
            raise ValueError(f"A ledger needs at least one user, got {n_users}.")
        self.n_users = int(n_users)
        self._slots = 0
        capacity = max(int(capacity), 1)
        self._entries = {phase: np.zeros((capacity, self.n_users))
                         for phase in (Phase.CALCULATION, Phase.PUBLICATION)}
        self._prefix = {phase: np.zeros((capacity + 1, self.n_users))
                        for phase in (Phase.CALCULATION, Phase.PUBLICATION)}

    @property
    def slots(self):
        """The number of recorded slots, i.e. the current slot t."""
        return self._slots

    def _grow(self):
        for phase in self._entries:
            entries = self._entries[phase]
            prefix = self._prefix[phase]
            self._entries[phase] = np.vstack([entries, np.zeros_like(entries)])
            self._prefix[phase] = np.vstack([prefix, np.zeros((len(entries), self.n_users))])
        logger.debug(f"Ledger grown to {len(self._entries[Phase.CALCULATION])} slots.")

    def append(self, eps1, eps2):
        """Record one slot for all users and return its 1-based index."""
        eps1 = np.broadcast_to(np.asarray(eps1, dtype=float), (self.n_users,))
        eps2 = np.broadcast_to(np.asarray(eps2, dtype=float), (self.n_users,))
        if np.any(eps1 < 0) or np.any(eps2 < 0):
            raise ValueError("Ledger entries must be non-negative.")
        if self._slots == len(self._entries[Phase.CALCULATION]):
            self._grow()
        k = self._slots
        for phase, values in ((Phase.CALCULATION, eps1), (Phase.PUBLICATION, eps2)):
            self._entries[phase][k] = values
            self._prefix[phase][k + 1] = self._prefix[phase][k] + values
        self._slots += 1
        return self._slots

    def entries(self, phase):
        """Return a (slots, n) array of the recorded values."""
        phase = Phase.parse(phase)
        if phase is Phase.TOTAL:
            return self.entries(Phase.CALCULATION) + self.entries(Phase.PUBLICATION)
        return self._entries[phase][:self._slots].copy()

    def prefix(self, phase):
        """Return the (slots + 1, n) prefix-sum matrix, row 0 being zeros."""
        phase = Phase.parse(phase)
        if phase is Phase.TOTAL:
            return self.prefix(Phase.CALCULATION) + self.prefix(Phase.PUBLICATION)
        return self._prefix[phase][:self._slots + 1]

    def current_prefix(self, phase):
        """Per-user sum over every recorded slot."""
        return self.prefix(phase)[self._slots].copy()

    def window_sum(self, user, phase, start, end):
        """Sum one user's ``phase`` budgets over slots [start, end].

        Raises:
            IndexError: If the range is not within 1..slots or is reversed.
        """
        if not 0 <= user < self.n_users:
            raise IndexError(f"User {user} is outside 0..{self.n_users - 1}.")
        if not 1 <= start <= end <= self._slots:
            raise IndexError(f"Slot range [{start}, {end}] is outside 1..{self._slots}.")
        prefix = self.prefix(phase)
        return float(prefix[end, user] - prefix[start - 1, user])

    def trailing_sums(self, phase, lengths):
        """Sums over [t - length + 1, t - 1] for the upcoming slot t.

        Slots before 1 contribute nothing, and a length of 1 gives an empty range.
        """
        lengths = np.broadcast_to(np.asarray(lengths, dtype=np.int64), (self.n_users,))
        prefix = self.prefix(phase)
        t = self._slots + 1
        starts = np.maximum(t - lengths, 0)
        columns = np.arange(self.n_users)
        return prefix[self._slots] - prefix[np.minimum(starts, self._slots), columns]

    def since(self, phase, starts):
        """Sums over [start, t - 1] for the upcoming slot t (per-user starts)."""
        starts = np.broadcast_to(np.asarray(starts, dtype=np.int64), (self.n_users,))
        if np.any(starts < 1) or np.any(starts > self._slots + 1):
            raise IndexError(f"Start slots must lie in 1..{self._slots + 1}.")
        prefix = self.prefix(phase)
        return prefix[self._slots] - prefix[starts - 1, np.arange(self.n_users)]


def ledger_window_sum(ledger, user, phase, start, end):
    """Functional form of :meth:`BudgetLedger.window_sum`."""
    return ledger.window_sum(user, phase, start, end)
