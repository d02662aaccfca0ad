import math

import numpy as np
from logzero import logger

from pwevent.core.ledger import BudgetLedger
from pwevent.core.trace import RunTrace
from pwevent.core.types import Decision, PublicationRecord, Verdict
from pwevent.sampling.mechanism import sm_disturb, sm_sample
from pwevent.sampling.obs import obs


def resolve_verdict(verdicts, slot):
    """Look up the injected decision for a slot.

    ``verdicts`` may be None, a mapping from slot to verdict, a sequence indexed
    from slot 1, or a callable taking the slot.
    """
    if verdicts is None:
        return None
    if callable(verdicts):
        return Verdict.parse(verdicts(slot))
    if isinstance(verdicts, dict):
        return Verdict.parse(verdicts.get(slot))
    if slot - 1 < len(verdicts):
        return Verdict.parse(verdicts[slot - 1])
    return None


class StreamMechanism:
    """Shared slot bookkeeping for every publishing mechanism.

    Args:
        n_users (int): Number of users in the stream.
        d (int): Histogram dimension.
        rng (NoiseSource): Owner of all sampling and noise draws.
    """
    name = 'mechanism'

    def __init__(self, n_users, d, rng):
        if d < 1:
            raise ValueError(f"Histogram dimension must be positive, got {d}.")
        self.n_users = int(n_users)
        self.d = int(d)
        self.rng = rng
        self.ledger = BudgetLedger(self.n_users)
        self.publications = []
        self.last_release = np.zeros(self.d)
        self.last_nonnull_slot = None

    @property
    def next_slot(self):
        return self.ledger.slots + 1

    def _check_batch(self, batch):
        if batch.slot != self.next_slot:
            raise ValueError(f"Expected slot {self.next_slot}, got {batch.slot}.")
        if batch.n_users != self.n_users or batch.d != self.d:
            raise ValueError(f"Batch shape ({batch.n_users} users, d={batch.d}) does not match "
                             f"the mechanism ({self.n_users} users, d={self.d}).")

    def _null(self, batch, decision, eps1, dissimilarity=None):
        return PublicationRecord(slot=batch.slot, release=self.last_release.copy(),
                                 decision=decision, eps1=np.asarray(eps1, dtype=float),
                                 eps2=np.zeros(self.n_users), dissimilarity=dissimilarity)

    def _publish(self, batch, eps1, eps2, dissimilarity, verdict=None):
        """Turn a publication budget vector into a record.

        A forced verdict replaces the dissimilarity test only; a budget vector
        with no positive entry always yields a skipped publication.
        """
        selection = obs(eps2)
        if selection is None:
            return self._null(batch, Decision.SKIPPED, eps1, dissimilarity)
        if verdict is Verdict.SKIP:
            return self._null(batch, Decision.FORCED, eps1, dissimilarity)
        if verdict is None and not dissimilarity > math.sqrt(selection.err_min):
            return self._null(batch, Decision.SKIPPED, eps1, dissimilarity)
        sampled = sm_sample(batch, eps2, selection.eps_opt, self.rng)
        release = sm_disturb(sampled, selection.eps_opt, self.rng)
        return PublicationRecord(slot=batch.slot, release=release, decision=Decision.NON_NULL,
                                 eps1=np.asarray(eps1, dtype=float),
                                 eps2=np.asarray(eps2, dtype=float),
                                 eps_opt=selection.eps_opt, dissimilarity=dissimilarity)

    def _commit(self, record):
        self.ledger.append(record.eps1, record.eps2)
        self.publications.append(record)
        self.last_release = record.release
        if record.decision is Decision.NON_NULL:
            self.last_nonnull_slot = record.slot
        logger.debug(f"{self.name} slot {record.slot}: {record.decision.value}")
        return record

    def step(self, batch, verdict=None):
        raise NotImplementedError

    def _trace_extras(self):
        return {}

    def run(self, batches, verdicts=None):
        """Process every batch of a fresh stream and return the run's trace."""
        self._check_fresh()
        batches = list(batches)
        for batch in batches:
            self.step(batch, verdict=resolve_verdict(verdicts, batch.slot))
        return self.trace(batches)

    def _check_fresh(self):
        if self.ledger.slots:
            raise ValueError(f"{self.name} has already processed {self.ledger.slots} slots.")

    def trace(self, batches):
        """Build the trace of every slot processed so far."""
        truths = [batch.histogram() for batch in batches]
        releases = [record.release for record in self.publications]
        eps_opt = np.array([np.nan if record.eps_opt is None else record.eps_opt
                            for record in self.publications])
        return RunTrace(true_counts=np.array(truths).reshape(-1, self.d),
                        releases=np.array(releases).reshape(-1, self.d),
                        decisions=[record.decision for record in self.publications],
                        ledger=self.ledger, eps_opt=eps_opt, mechanism=self.name,
                        **self._trace_extras())
