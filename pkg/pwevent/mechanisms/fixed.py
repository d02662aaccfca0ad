"""Mechanisms for fixed personalized requirements and their homogeneous baselines."""
import numpy as np
from logzero import logger

from pwevent import TOLERANCE
from pwevent.core.ledger import Phase
from pwevent.core.types import Decision, FixedRequirements, PublicationRecord, Verdict
from pwevent.mechanisms.base import StreamMechanism
from pwevent.sampling.mechanism import sm_disturb, sm_sample
from pwevent.sampling.obs import obs


def dc(batch, eps1_vector, last_nonnull, rng):
    """Private dissimilarity between the sampled current counts and the last release.

    Args:
        batch (StreamBatch): The slot's true assignments.
        eps1_vector (array-like): Per-user calculation budgets.
        last_nonnull (np.ndarray): The last non-null release r_l.
        rng (NoiseSource): Randomness owner.

    Returns:
        float: Mean absolute difference plus Laplace(1/(d * eps_opt)) noise, or
        ``inf`` when no user has calculation budget.

    Raises:
        ValueError: If the dimensions disagree.
    """
    d = batch.d
    last_nonnull = np.asarray(last_nonnull, dtype=float)
    if len(last_nonnull) != d:
        raise ValueError(f"Last release has {len(last_nonnull)} buckets, expected {d}.")
    selection = obs(eps1_vector)
    if selection is None:
        return float('inf')
    sampled = sm_sample(batch, eps1_vector, selection.eps_opt, rng)
    distance = float(np.mean(np.abs(sampled - last_nonnull)))
    return distance + rng.laplace(1.0 / (d * selection.eps_opt))


class FixedMechanism(StreamMechanism):
    """State shared by the distribution and absorption mechanisms.

    The calculation phase spends E_i/(2w_i) per user at every slot.
    """

    def __init__(self, requirements, d, rng):
        if not isinstance(requirements, FixedRequirements):
            requirements = FixedRequirements.from_list(requirements)
        super().__init__(requirements.n_users, d, rng)
        self.requirements = requirements
        self.shares = requirements.shares

    def _trace_extras(self):
        return {'fixed_requirements': self.requirements}


class BudgetDistribution(FixedMechanism):
    """Each publication takes half of the publication budget left in its window."""
    name = 'PBD'

    def step(self, batch, verdict=None):
        self._check_batch(batch)
        eps1 = self.shares
        dissimilarity = dc(batch, eps1, self.last_release, self.rng)
        spent = self.ledger.trailing_sums(Phase.PUBLICATION, self.requirements.windows)
        remaining = np.clip(self.requirements.budgets / 2 - spent, 0.0, None)
        record = self._publish(batch, eps1, remaining / 2, dissimilarity, Verdict.parse(verdict))
        return self._commit(record)


class BudgetAbsorption(FixedMechanism):
    """Publications absorb the shares of skipped slots and nullify the slots after them."""
    name = 'PBA'

    def __init__(self, requirements, d, rng):
        super().__init__(requirements, d, rng)
        self.nullified_slots = np.zeros(self.n_users)

    def step(self, batch, verdict=None):
        self._check_batch(batch)
        t = batch.slot
        eps1 = self.shares
        dissimilarity = dc(batch, eps1, self.last_release, self.rng)
        last = self.last_nonnull_slot or 0
        paid = self.nullified_slots.max() + TOLERANCE
        if self.last_nonnull_slot is not None and t - last <= paid:
            record = self._null(batch, Decision.NULLIFIED, eps1, dissimilarity)
            return self._commit(record)
        absorbed = np.maximum(t - last - self.nullified_slots, 0.0)
        eps2 = self.shares * np.minimum(absorbed, self.requirements.windows)
        record = self._publish(batch, eps1, eps2, dissimilarity, Verdict.parse(verdict))
        if record.decision is Decision.NON_NULL:
            self.nullified_slots = snap_to_integers(record.eps2 / self.shares - 1.0)
        return self._commit(record)


def snap_to_integers(values):
    """Round values within tolerance of an integer onto it."""
    rounded = np.round(values)
    return np.where(np.abs(values - rounded) <= TOLERANCE, rounded, values)


class UniformRelease(StreamMechanism):
    """Spend E/w on a full Laplace release at every slot."""
    name = 'Uniform'

    def __init__(self, requirement, n_users, d, rng):
        super().__init__(n_users, d, rng)
        self.requirement = requirement
        self.eps = requirement.budget / requirement.window

    def step(self, batch, verdict=None):
        self._check_batch(batch)
        if Verdict.parse(verdict) is Verdict.SKIP:
            return self._commit(self._null(batch, Decision.FORCED, np.zeros(self.n_users)))
        release = sm_disturb(batch.histogram(), self.eps, self.rng)
        record = PublicationRecord(slot=batch.slot, release=release, decision=Decision.NON_NULL,
                                   eps1=np.zeros(self.n_users),
                                   eps2=np.full(self.n_users, self.eps),
                                   eps_opt=self.eps)
        return self._commit(record)

    def _trace_extras(self):
        return {'fixed_requirements': FixedRequirements.homogeneous(
            self.n_users, self.requirement.window, self.requirement.budget)}


class HomogeneousDistribution(BudgetDistribution):
    name = 'BD'


class HomogeneousAbsorption(BudgetAbsorption):
    name = 'BA'


FIXED_MECHANISMS = {
    'PBD': BudgetDistribution,
    'PBA': BudgetAbsorption,
    'BD': HomogeneousDistribution,
    'BA': HomogeneousAbsorption,
    'UNIFORM': UniformRelease,
}


def make_mechanism(kind, requirements, d, rng, n_users=None):
    """Build a fixed-requirement mechanism by name.

    Args:
        kind (str): One of PBD, PBA, BD, BA, Uniform (case-insensitive).
        requirements (FixedRequirements or FixedRequirement): Per-user
            requirements, or one shared requirement for the baselines.
        d (int): Histogram dimension.
        rng (NoiseSource): Randomness owner.
        n_users (int, optional): Needed when a single shared requirement is given.
    """
    key = kind.upper()
    if key not in FIXED_MECHANISMS:
        raise ValueError(f"Unknown fixed mechanism '{kind}'.")
    if key in ('BD', 'BA', 'UNIFORM'):
        if isinstance(requirements, FixedRequirements):
            if not requirements.is_homogeneous():
                raise ValueError(f"{key} needs one requirement shared by every user.")
            n_users, requirements = requirements.n_users, requirements[0]
        if n_users is None:
            raise ValueError("n_users is needed with a shared requirement.")
        if key == 'UNIFORM':
            return UniformRelease(requirements, n_users, d, rng)
        requirements = FixedRequirements.homogeneous(n_users, requirements.window,
                                                     requirements.budget)
    logger.debug(f"Building {key} for {len(requirements)} users, d={d}.")
    return FIXED_MECHANISMS[key](requirements, d, rng)


def pbd_step(state, batch, verdict=None):
    """Advance a distribution mechanism by one slot."""
    return state.step(batch, verdict)


def pba_step(state, batch, verdict=None):
    """Advance an absorption mechanism by one slot."""
    return state.step(batch, verdict)


def baseline_step(kind, shared_req, state, batch, verdict=None):
    """Advance a BD, BA or Uniform mechanism after checking its shared requirement."""
    expected = FIXED_MECHANISMS.get(kind.upper())
    if expected is None or not isinstance(state, expected):
        raise ValueError(f"State is not a {kind} mechanism.")
    if isinstance(state, UniformRelease):
        matches = state.requirement == shared_req
    else:
        matches = state.requirements.is_homogeneous(shared_req)
    if not matches:
        raise ValueError(f"{kind} state does not share the requirement {shared_req}.")
    return state.step(batch, verdict)
