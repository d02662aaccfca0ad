"""The full record of one stream run, with .npz persistence."""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
from logzero import logger

from pwevent.core.ledger import BudgetLedger, Phase
from pwevent.core.types import Decision, DynamicRequirements, FixedRequirements


@dataclass
class RunTrace:
    """True counts, releases, decisions and the ledger of a single run.

    ``requirement_history`` holds, for dynamic runs, four (T, n) arrays keyed
    ``backward_windows``, ``backward_budgets`` (after projection),
    ``forward_windows`` and ``forward_budgets``.
    """
    true_counts: np.ndarray
    releases: np.ndarray
    decisions: List[Decision]
    ledger: Optional[BudgetLedger] = None
    eps_opt: Optional[np.ndarray] = None
    mechanism: str = ''
    metadata: dict = field(default_factory=dict)
    fixed_requirements: Optional[FixedRequirements] = None
    requirement_history: Optional[dict] = None
    projected: Optional[np.ndarray] = None

    def __post_init__(self):
        self.true_counts = np.asarray(self.true_counts, dtype=float)
        self.releases = np.asarray(self.releases, dtype=float)
        if self.releases.ndim != 2:
            raise ValueError("Releases must be a (slots, d) matrix.")
        if self.true_counts.shape != self.releases.shape:
            raise ValueError(f"True counts {self.true_counts.shape} and releases "
                             f"{self.releases.shape} differ in shape.")
        if len(self.decisions) != len(self.releases):
            raise ValueError("One decision is needed per released slot.")
        if self.ledger is not None and self.ledger.slots != len(self.releases):
            raise ValueError(f"Ledger covers {self.ledger.slots} slots, "
                             f"trace has {len(self.releases)}.")

    @property
    def slots(self):
        return len(self.releases)

    @property
    def d(self):
        return self.releases.shape[1]

    def decision_counts(self):
        counts = {decision.value: 0 for decision in Decision}
        for decision in self.decisions:
            counts[decision.value] += 1
        return counts

    def save(self, path):
        """Write the trace to an ``.npz`` archive."""
        path = Path(path)
        arrays = {
            'true_counts': self.true_counts,
            'releases': self.releases,
            'decisions': np.array([decision.value for decision in self.decisions]),
            'eps1': self.ledger.entries(Phase.CALCULATION),
            'eps2': self.ledger.entries(Phase.PUBLICATION),
            'eps_opt': self.eps_opt if self.eps_opt is not None else np.full(self.slots, np.nan),
            'header': np.array(json.dumps({'mechanism': self.mechanism,
                                           'metadata': self.metadata}, sort_keys=True)),
        }
        if self.fixed_requirements is not None:
            arrays['windows'] = self.fixed_requirements.windows
            arrays['budgets'] = self.fixed_requirements.budgets
        if self.requirement_history is not None:
            for key, values in self.requirement_history.items():
                arrays[f'history_{key}'] = values
        if self.projected is not None:
            arrays['projected'] = self.projected
        np.savez_compressed(path, **arrays)
        logger.debug(f"Trace saved to {path}")
        return path

    @classmethod
    def load(cls, path):
        """Read a trace written by :meth:`save` and rebuild its ledger."""
        with np.load(path, allow_pickle=False) as archive:
            header = json.loads(str(archive['header']))
            eps1, eps2 = archive['eps1'], archive['eps2']
            ledger = BudgetLedger(eps1.shape[1], capacity=max(len(eps1), 1))
            for row1, row2 in zip(eps1, eps2):
                ledger.append(row1, row2)
            fixed = None
            if 'windows' in archive.files:
                fixed = FixedRequirements(archive['windows'], archive['budgets'])
            history = {key[len('history_'):]: archive[key] for key in archive.files
                       if key.startswith('history_')} or None
            return cls(true_counts=archive['true_counts'], releases=archive['releases'],
                       decisions=[Decision(str(value)) for value in archive['decisions']],
                       ledger=ledger, eps_opt=archive['eps_opt'],
                       mechanism=header['mechanism'], metadata=header['metadata'],
                       fixed_requirements=fixed, requirement_history=history,
                       projected=archive['projected'] if 'projected' in archive.files else None)

    def requirements_at(self, slot):
        """Dynamic requirements recorded for a 1-based slot."""
        if self.requirement_history is None:
            raise ValueError("This trace has no dynamic requirement history.")
        k = slot - 1
        history = self.requirement_history
        return DynamicRequirements(history['backward_windows'][k], history['backward_budgets'][k],
                                   history['forward_windows'][k], history['forward_budgets'][k])
