"""Exhaustive ledger audits against fixed and dynamic privacy requirements."""
from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np
from logzero import logger

from pwevent import TOLERANCE
from pwevent.core.ledger import Phase


@dataclass(frozen=True)
class Violation:
    user: int
    slot: int
    kind: str
    spent: float
    limit: float


@dataclass
class AuditReport:
    """Outcome of a ledger sweep.

    ``slack`` is the tightest margin limit - spent seen over every checked
    window; it is negative when a violation exists.
    """
    passed: bool
    violations: List[Violation] = field(default_factory=list)
    slack: float = float('inf')
    checked: int = 0

    def to_dict(self):
        return {'passed': self.passed, 'slack': self.slack, 'checked': self.checked,
                'violations': [asdict(v) for v in self.violations]}

    @classmethod
    def merge(cls, reports):
        reports = list(reports)
        return cls(passed=all(r.passed for r in reports),
                   violations=[v for r in reports for v in r.violations],
                   slack=min((r.slack for r in reports), default=float('inf')),
                   checked=sum(r.checked for r in reports))


def _window_sums(prefix, starts, ends):
    """Per-(slot, user) sums over [starts, ends] from a (T + 1, n) prefix matrix."""
    columns = np.arange(prefix.shape[1])[None, :]
    return prefix[ends, columns] - prefix[starts - 1, columns]


def _sweep(kind, sums, limits, slot_offset=1):
    margins = limits - sums
    bad_slots, bad_users = np.nonzero(margins < -TOLERANCE)
    violations = [Violation(int(user), int(slot) + slot_offset, kind,
                            float(sums[slot, user]), float(limits[slot, user]))
                  for slot, user in zip(bad_slots, bad_users)]
    slack = float(margins.min()) if margins.size else float('inf')
    return AuditReport(not violations, violations, slack, int(margins.size))


def _phases(check_phases):
    if check_phases:
        return ((Phase.TOTAL, 1.0), (Phase.CALCULATION, 0.5), (Phase.PUBLICATION, 0.5))
    return ((Phase.TOTAL, 1.0),)


def audit_fixed(trace, requirements=None, check_phases=False):
    """Check every user's spend over every trailing w_i window against E_i.

    Args:
        trace (RunTrace): A run with a ledger.
        requirements (FixedRequirements, optional): Defaults to the trace's own.
        check_phases (bool): Also check each phase against E_i/2.

    Returns:
        AuditReport: Violations are reported, never raised.
    """
    requirements = requirements or trace.fixed_requirements
    if requirements is None:
        raise ValueError("No fixed requirements to audit against.")
    ledger = trace.ledger
    T = ledger.slots
    slots = np.arange(1, T + 1)[:, None]
    starts = np.maximum(slots - requirements.windows[None, :] + 1, 1)
    ends = np.broadcast_to(slots, starts.shape)
    reports = []
    for phase, fraction in _phases(check_phases):
        sums = _window_sums(ledger.prefix(phase), starts, ends)
        limits = np.broadcast_to(fraction * requirements.budgets, sums.shape)
        reports.append(_sweep(f'window-{phase.name.lower()}', sums, limits))
    report = AuditReport.merge(reports)
    if not report.passed:
        logger.warning(f"Fixed audit found {len(report.violations)} violations.")
    return report


def audit_dynamic(trace, requirement_history=None, check_phases=False):
    """Check backward windows ending at every slot and forward windows starting at every slot.

    Args:
        trace (RunTrace): A dynamic run with a ledger.
        requirement_history (dict, optional): (T, n) arrays keyed as in
            :class:`RunTrace`; backward budgets should be the projected ones.
            Defaults to the trace's own history.
        check_phases (bool): Also check each phase against half the budget.
    """
    history = requirement_history or trace.requirement_history
    if history is None:
        raise ValueError("No requirement history to audit against.")
    ledger = trace.ledger
    T = ledger.slots
    slots = np.arange(1, T + 1)[:, None]
    backward_starts = np.maximum(slots - history['backward_windows'] + 1, 1)
    backward_ends = np.broadcast_to(slots, backward_starts.shape)
    forward_starts = np.broadcast_to(slots, backward_starts.shape)
    forward_ends = np.minimum(slots + history['forward_windows'] - 1, T)
    reports = []
    for phase, fraction in _phases(check_phases):
        prefix = ledger.prefix(phase)
        backward = _window_sums(prefix, backward_starts, backward_ends)
        reports.append(_sweep(f'backward-{phase.name.lower()}', backward,
                              fraction * history['backward_budgets']))
        forward = _window_sums(prefix, forward_starts, forward_ends)
        reports.append(_sweep(f'forward-{phase.name.lower()}', forward,
                              fraction * history['forward_budgets']))
    report = AuditReport.merge(reports)
    if not report.passed:
        logger.warning(f"Dynamic audit found {len(report.violations)} violations.")
    return report
