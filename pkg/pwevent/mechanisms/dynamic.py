"""Mechanisms for per-slot (backward, forward) personalized requirements."""
import numpy as np
from logzero import logger

from pwevent import TOLERANCE
from pwevent.core.ledger import Phase
from pwevent.core.types import Decision, Verdict
from pwevent.mechanisms.base import StreamMechanism, resolve_verdict
from pwevent.mechanisms.fixed import dc, snap_to_integers


class ForwardWindowSet:
    """The slots tau whose forward windows still cover the current slot.

    Entries live in a ring of width at least the largest forward window seen,
    indexed by ``tau % width``. Each entry stores the forward share
    E_F/(2 w_F), the half budget E_F/2, the last covered slot and the ledger
    prefix sums at tau - 1, so spend since tau is one subtraction.
    """

    def __init__(self, n_users, width=8):
        self.n_users = int(n_users)
        self.width = max(int(width), 1)
        self.largest = 1
        self._allocate(self.width)

    def _allocate(self, width):
        shape = (self.n_users, width)
        self.starts = np.zeros(shape, dtype=np.int64)
        self.ends = np.zeros(shape, dtype=np.int64)
        self.shares = np.zeros(shape)
        self.halves = np.zeros(shape)
        self.prefix1 = np.zeros(shape)
        self.prefix2 = np.zeros(shape)

    def _grow(self, width):
        old = (self.starts, self.ends, self.shares, self.halves, self.prefix1, self.prefix2)
        self._allocate(width)
        rows, cols = np.nonzero(old[0])
        new_cols = old[0][rows, cols] % width
        for target, source in zip((self.starts, self.ends, self.shares, self.halves,
                                   self.prefix1, self.prefix2), old):
            target[rows, new_cols] = source[rows, cols]
        logger.debug(f"Forward window ring grown from {self.width} to {width}.")
        self.width = width

    def advance(self, t, forward_windows, forward_budgets, prefix1, prefix2):
        """Register slot t's forward windows and drop windows ending before t."""
        expired = (self.starts > 0) & (self.ends < t)
        self.starts[expired] = 0
        self.largest = max(self.largest, int(np.max(forward_windows)))
        if self.largest > self.width:
            self._grow(max(self.largest, 2 * self.width))
        column = t % self.width
        self.starts[:, column] = t
        self.ends[:, column] = t + forward_windows - 1
        self.shares[:, column] = forward_budgets / (2 * forward_windows)
        self.halves[:, column] = forward_budgets / 2
        self.prefix1[:, column] = prefix1
        self.prefix2[:, column] = prefix2
        assert np.count_nonzero(self.starts, axis=1).max() <= self.largest

    @property
    def active(self):
        return self.starts > 0

    def members(self, user):
        """The sorted slots tau currently covering the present slot for one user."""
        return sorted(int(tau) for tau in self.starts[user][self.starts[user] > 0])

    def spent_since(self, current_prefix, phase=Phase.PUBLICATION):
        """(n, width) spend over [tau, t - 1] for every stored tau."""
        stored = self.prefix2 if Phase.parse(phase) is Phase.PUBLICATION else self.prefix1
        return np.where(self.active, np.asarray(current_prefix)[:, None] - stored, 0.0)


def naive_members(forward_windows, t):
    """Set-builder {tau <= t : tau + w_F(tau) - 1 >= t} from a window history."""
    return [tau for tau in range(1, t + 1) if tau + int(forward_windows[tau - 1]) - 1 >= t]


def _masked_min(values, mask):
    return np.where(mask, values, np.inf).min(axis=1)


def _masked_max(values, mask):
    return np.where(mask, values, -np.inf).max(axis=1)


def paid_through(spent, shares, starts, mask):
    """Last slot each covering window has already paid for: spent/share + tau - 1."""
    ratio = np.divide(spent, shares, out=np.zeros_like(spent, dtype=float), where=mask)
    return snap_to_integers(ratio + starts - 1)


def forward_nullified_borders(spent, shares, starts, mask):
    """Per-user right border of slots already paid for by forward spend.

    Args:
        spent (np.ndarray): (n, k) publication spend over [tau, t - 1].
        shares (np.ndarray): (n, k) forward shares E_F/(2 w_F) of each tau.
        starts (np.ndarray): (n, k) slots tau.
        mask (np.ndarray): (n, k) True where tau covers the current slot.

    Returns:
        np.ndarray: The largest paid-through slot per user.
    """
    spent, shares, starts, mask = (np.asarray(a) for a in (spent, shares, starts, mask))
    return _masked_max(paid_through(spent, shares, starts, mask), mask)


def project_backward_requirement(declared, ledger, user, t):
    """Raise one user's backward budget to the least value keeping both phases feasible.

    Returns:
        tuple: (requirement, projected) where ``projected`` is True when the
        declared budget was raised.
    """
    if t < 1:
        raise ValueError(f"Slots are 1-based, got {t}.")
    start = max(t - declared.backward_window + 1, 1)
    if start > t - 1:
        return declared, False
    spent1 = ledger.window_sum(user, Phase.CALCULATION, start, t - 1)
    spent2 = ledger.window_sum(user, Phase.PUBLICATION, start, t - 1)
    floor = 2 * max(spent1, spent2)
    if declared.backward_budget >= floor - TOLERANCE:
        return declared, False
    logger.warning(f"User {user} backward budget {declared.backward_budget} projected to {floor} "
                   f"at slot {t}.")
    return type(declared)(declared.backward_window, floor, declared.forward_window,
                          declared.forward_budget), True


class DynamicMechanism(StreamMechanism):
    """Shared feasibility bookkeeping for DPBD and DPBA.

    Args:
        n_users (int): Number of users.
        d (int): Histogram dimension.
        rng (NoiseSource): Randomness owner.
        debug (bool): Recompute every forward window sum from the ledger and
            assert it matches the incremental value.
    """

    def __init__(self, n_users, d, rng, debug=False):
        super().__init__(n_users, d, rng)
        self.windows = ForwardWindowSet(n_users)
        self.debug = debug
        self.history = {key: [] for key in ('backward_windows', 'backward_budgets',
                                            'forward_windows', 'forward_budgets')}
        self.projected = []

    def project(self, requirements):
        """Vectorised backward projection for the upcoming slot."""
        lengths = requirements.backward_windows
        spent1 = self.ledger.trailing_sums(Phase.CALCULATION, lengths)
        spent2 = self.ledger.trailing_sums(Phase.PUBLICATION, lengths)
        floor = 2 * np.maximum(spent1, spent2)
        raised = requirements.backward_budgets < floor - TOLERANCE
        if np.any(raised):
            logger.warning(f"Slot {self.next_slot}: {int(raised.sum())} "
                           "backward budgets projected.")
            requirements = requirements.with_backward_budgets(
                np.where(raised, floor, requirements.backward_budgets))
        return requirements, raised

    def advance_forward_windows(self, t, requirements):
        if t != self.next_slot:
            raise ValueError(f"Forward windows must advance to slot {self.next_slot}, got {t}.")
        self.windows.advance(t, requirements.forward_windows, requirements.forward_budgets,
                             self.ledger.current_prefix(Phase.CALCULATION),
                             self.ledger.current_prefix(Phase.PUBLICATION))

    def _forward_state(self):
        mask = self.windows.active
        spent2 = self.windows.spent_since(self.ledger.current_prefix(Phase.PUBLICATION))
        if self.debug:
            self._check_sums(spent2, mask)
        return mask, spent2

    def _check_sums(self, spent2, mask):
        t = self.next_slot
        for user, column in zip(*np.nonzero(mask)):
            tau = int(self.windows.starts[user, column])
            naive = self.ledger.window_sum(user, Phase.PUBLICATION, tau, t - 1) if tau < t else 0.0
            assert abs(naive - spent2[user, column]) <= 1e-9, (user, tau)

    def calculation_budgets(self, requirements):
        """Part one: min of the forward share and the backward remainder."""
        forward = _masked_min(self.windows.shares, self.windows.active)
        backward = (requirements.backward_budgets / 2
                    - self.ledger.trailing_sums(Phase.CALCULATION, requirements.backward_windows))
        return np.clip(np.minimum(forward, backward), 0.0, None)

    def backward_publication_bound(self, requirements):
        return (requirements.backward_budgets / 2
                - self.ledger.trailing_sums(Phase.PUBLICATION, requirements.backward_windows))

    def publication_budgets(self, t, requirements, mask, spent2):
        raise NotImplementedError

    def step(self, batch, requirements, verdict=None):
        """Publish one slot under the requirements declared for it."""
        self._check_batch(batch)
        if requirements.n_users != self.n_users:
            raise ValueError(f"Expected requirements for {self.n_users} users.")
        t = batch.slot
        requirements, raised = self.project(requirements)
        self._remember(requirements, raised)
        self.advance_forward_windows(t, requirements)
        eps1 = self.calculation_budgets(requirements)
        dissimilarity = dc(batch, eps1, self.last_release, self.rng)
        mask, spent2 = self._forward_state()
        eps2 = self.publication_budgets(t, requirements, mask, spent2)
        if eps2 is None:
            record = self._null(batch, Decision.NULLIFIED, eps1, dissimilarity)
        else:
            record = self._publish(batch, eps1, eps2, dissimilarity, Verdict.parse(verdict))
        record.projected = raised
        return self._commit(record)

    def _remember(self, requirements, raised):
        self.history['backward_windows'].append(requirements.backward_windows)
        self.history['backward_budgets'].append(requirements.backward_budgets)
        self.history['forward_windows'].append(requirements.forward_windows)
        self.history['forward_budgets'].append(requirements.forward_budgets)
        self.projected.append(raised)

    def run(self, batches, schedule, verdicts=None):
        """Process a fresh stream.

        Args:
            batches (iterable): StreamBatch per slot.
            schedule (callable or sequence): Gives the DynamicRequirements for
                a slot, either ``schedule(t)`` or ``schedule[t - 1]``.
            verdicts: Optional injected decisions, as for fixed mechanisms.
        """
        self._check_fresh()
        batches = list(batches)
        for batch in batches:
            requirements = schedule(batch.slot) if callable(schedule) else schedule[batch.slot - 1]
            self.step(batch, requirements, verdict=resolve_verdict(verdicts, batch.slot))
        return self.trace(batches)

    def _trace_extras(self):
        history = {key: np.array(values).reshape(-1, self.n_users)
                   for key, values in self.history.items()}
        return {'requirement_history': history,
                'projected': np.array(self.projected, dtype=bool).reshape(-1, self.n_users)}


class DynamicBudgetDistribution(DynamicMechanism):
    """Halve the tightest remaining forward budget, capped by the backward remainder."""
    name = 'DPBD'

    def publication_budgets(self, t, requirements, mask, spent2):
        forward = 0.5 * _masked_min(self.windows.halves - spent2, mask)
        backward = self.backward_publication_bound(requirements)
        return np.clip(np.minimum(forward, backward), 0.0, None)


class DynamicBudgetAbsorption(DynamicMechanism):
    """Absorb forward shares of skipped slots; nullify slots already paid for."""
    name = 'DPBA'

    def __init__(self, n_users, d, rng, debug=False):
        super().__init__(n_users, d, rng, debug=debug)
        self.borders = np.zeros(n_users)

    def publication_budgets(self, t, requirements, mask, spent2):
        shares, starts = self.windows.shares, self.windows.starts
        self.borders = forward_nullified_borders(spent2, shares, starts, mask)
        if t <= self.borders.max() + TOLERANCE:
            return None
        slots_paid = paid_through(spent2, shares, starts, mask)
        absorbable = _masked_max((t - slots_paid) * shares, mask)
        unspent = _masked_min(self.windows.halves - spent2, mask)
        backward = self.backward_publication_bound(requirements)
        return np.clip(np.minimum(np.minimum(absorbable, unspent), backward), 0.0, None)


DYNAMIC_MECHANISMS = {
    'DPBD': DynamicBudgetDistribution,
    'DPBA': DynamicBudgetAbsorption,
}


def make_dynamic_mechanism(kind, n_users, d, rng, debug=False):
    key = kind.upper()
    if key not in DYNAMIC_MECHANISMS:
        raise ValueError(f"Unknown dynamic mechanism '{kind}'.")
    return DYNAMIC_MECHANISMS[key](n_users, d, rng, debug=debug)


def advance_forward_windows(state, t, requirements):
    """Register slot t's forward windows on a dynamic mechanism."""
    state.advance_forward_windows(t, requirements)


def dpbd_step(state, batch, declared_reqs, verdict=None):
    return state.step(batch, declared_reqs, verdict)


def dpba_step(state, batch, declared_reqs, verdict=None):
    return state.step(batch, declared_reqs, verdict)
