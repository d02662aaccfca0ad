import os
import unittest

import numpy as np

from pwevent.core import (BudgetLedger, Decision, DynamicRequirement, DynamicRequirements,
                          FixedRequirements, Phase, StreamBatch)
from pwevent.evaluation import audit_dynamic
from pwevent.mechanisms import (DynamicBudgetAbsorption, ForwardWindowSet, dpba_step, dpbd_step,
                                forward_nullified_borders, make_dynamic_mechanism, make_mechanism,
                                naive_members, project_backward_requirement)
from pwevent.noise import NoiseSource

SLOW = os.environ.get('PWEVENT_SLOW_TESTS') == '1'

# (w_B, E_B, w_F, E_F) per user and slot.
DECLARED = [
    [(1, 1.0, 4, 2.4), (1, 0.6, 2, 1.6), (1, 2.0, 3, 1.2)],
    [(2, 2.4, 4, 3.2), (2, 1.6, 2, 2.4), (2, 1.2, 3, 3.0)],
    [(2, 2.8, 3, 4.2), (2, 3.2, 2, 2.8), (3, 1.8, 2, 1.2)],
    [(2, 2.4, 3, 2.4), (3, 4.2, 2, 2.8), (2, 3.2, 3, 0.6)],
    [(5, 3.0, 2, 0.8), (3, 3.6, 2, 2.0), (4, 2.4, 3, 1.8)],
]
VERDICTS = ['publish', 'skip', 'publish', 'skip', 'publish']


def declared(t):
    return DynamicRequirements.from_list([DynamicRequirement(*row) for row in DECLARED[t - 1]])


def batches(T, n, d=2):
    return [StreamBatch(t, np.arange(n) % d, d) for t in range(1, T + 1)]


class TestForwardWindowSet(unittest.TestCase):
    def test_members_match_set_builder(self):
        rng = np.random.default_rng(3)
        n, T = 4, 10000
        history = rng.integers(1, 12, size=(T, n))
        checked = set(range(1, 201)) | set(rng.integers(201, T + 1, size=300).tolist())
        windows = ForwardWindowSet(n, width=2)
        for t in range(1, T + 1):
            windows.advance(t, history[t - 1], np.ones(n), np.zeros(n), np.zeros(n))
            if t not in checked:
                continue
            for user in range(n):
                self.assertEqual(windows.members(user), naive_members(history[:t, user], t),
                                 f"User {user} covering set differs at slot {t}.")
        self.assertGreaterEqual(windows.width, 11)

    def test_members_of_short_history(self):
        self.assertEqual(naive_members([4, 4, 3], 3), [1, 2, 3])
        self.assertEqual(naive_members([2, 2, 2, 2], 4), [3, 4])
        self.assertEqual(naive_members([1, 1, 1], 3), [3])

    def test_slot_two_window_ends_before_slot_four(self):
        windows = ForwardWindowSet(1, width=2)
        for t, w in enumerate([5, 2, 4, 1], start=1):
            windows.advance(t, np.array([w]), np.ones(1), np.zeros(1), np.zeros(1))
        self.assertEqual(windows.members(0), [1, 3, 4])
        self.assertEqual(naive_members([5, 2, 4, 1], 4), [1, 3, 4])


class TestBackwardProjection(unittest.TestCase):
    def setUp(self):
        self.ledger = BudgetLedger(1)
        self.ledger.append([0.3], [0.5])

    def test_raises_infeasible_budget(self):
        requirement, projected = project_backward_requirement(
            DynamicRequirement(2, 0.8, 4, 3.2), self.ledger, 0, 2)
        self.assertTrue(projected)
        self.assertAlmostEqual(requirement.backward_budget, 1.0)
        self.assertEqual(requirement.forward_window, 4)

    def test_keeps_feasible_budget(self):
        requirement, projected = project_backward_requirement(
            DynamicRequirement(2, 2.4, 4, 3.2), self.ledger, 0, 2)
        self.assertFalse(projected)
        self.assertEqual(requirement.backward_budget, 2.4)

    def test_window_of_one_never_projects(self):
        _, projected = project_backward_requirement(DynamicRequirement(1, 0.01, 1, 1.0),
                                                    self.ledger, 0, 2)
        self.assertFalse(projected)
        with self.assertRaises(ValueError):
            project_backward_requirement(DynamicRequirement(1, 1.0, 1, 1.0), self.ledger, 0, 0)


class TestDynamicDistribution(unittest.TestCase):
    def test_first_slots(self):
        mechanism = make_dynamic_mechanism('DPBD', 3, 2, NoiseSource(6))
        stream = batches(2, 3)
        first = dpbd_step(mechanism, stream[0], declared(1), 'publish')
        np.testing.assert_allclose(first.eps1, [0.3, 0.3, 0.2])
        np.testing.assert_allclose(first.eps2, [0.5, 0.3, 0.3])
        second = dpbd_step(mechanism, stream[1], declared(2), 'skip')
        self.assertIs(second.decision, Decision.FORCED)
        # Slot 1 spent E_F/(2 w_F) capped by E_B/2: 0.3, 0.3 and 0.2.
        backward = np.array([2.4, 1.6, 1.2]) / 2 - np.array([0.3, 0.3, 0.2])
        np.testing.assert_allclose(backward, [0.9, 0.5, 0.4])
        recorded = [mechanism.ledger.window_sum(user, Phase.CALCULATION, 1, 1) for user in range(3)]
        np.testing.assert_allclose(np.array([1.2, 0.8, 0.6]) - recorded, backward)
        # Forward minima over slots 1 and 2 are 0.3, 0.4 and 0.2, below the backward remainders.
        np.testing.assert_allclose(second.eps1, [0.3, 0.4, 0.2])
        np.testing.assert_array_equal(second.projected, [False, False, False])

    def test_constant_requirements_match_distribution(self):
        windows, budgets = np.array([3, 5, 5, 3]), np.array([0.8, 1.6, 0.8, 1.6])
        constant = DynamicRequirements(windows, budgets, windows, budgets)
        verdicts = np.random.default_rng(12).choice(['publish', 'skip'], 40).tolist()
        stream = batches(40, 4)
        fixed = make_mechanism('PBD', FixedRequirements(windows, budgets), 2,
                               NoiseSource(4)).run(stream, verdicts=verdicts)
        dynamic = make_dynamic_mechanism('DPBD', 4, 2, NoiseSource(4)).run(
            stream, lambda t: constant, verdicts=verdicts)
        self.assertEqual(dynamic.decisions, fixed.decisions)
        np.testing.assert_allclose(dynamic.ledger.entries(Phase.CALCULATION)[4:],
                                   fixed.ledger.entries(Phase.CALCULATION)[4:])
        self.assertFalse(dynamic.projected.any())

    def test_declared_trace_passes_audit(self):
        trace = make_dynamic_mechanism('DPBD', 3, 2, NoiseSource(6), debug=True).run(
            batches(5, 3), declared, verdicts=VERDICTS)
        self.assertTrue(audit_dynamic(trace, check_phases=True).passed)


class TestDynamicAbsorption(unittest.TestCase):
    def test_absorbs_skipped_shares(self):
        mechanism = DynamicBudgetAbsorption(3, 2, NoiseSource(6), debug=True)
        stream = batches(4, 3)
        records = [dpba_step(mechanism, stream[t - 1], declared(t), VERDICTS[t - 1])
                   for t in range(1, 4)]
        np.testing.assert_allclose(records[0].eps2, [0.3, 0.3, 0.2])
        self.assertIs(records[1].decision, Decision.FORCED)
        np.testing.assert_allclose(records[2].eps2, [0.8, 1.2, 0.4])
        self.assertIs(records[2].decision, Decision.NON_NULL)

        fourth = dpba_step(mechanism, stream[3], declared(4), 'skip')
        np.testing.assert_allclose(mechanism.borders, [11 / 3, 2 + 1.2 / 0.7, 10 / 3])
        self.assertIs(fourth.decision, Decision.FORCED)

    def test_nullified_borders(self):
        spent = np.array([[1.1, 0.8, 0.8, 0.0], [1.2, 0.0, 0.0, 0.0], [0.6, 0.6, 0.0, 0.0]])
        shares = np.array([[0.3, 0.4, 0.7, 0.4], [0.7, 0.7, 0.0, 0.0], [0.5, 0.3, 0.1, 0.0]])
        starts = np.array([[1, 2, 3, 4], [3, 4, 0, 0], [2, 3, 4, 0]])
        mask = starts > 0
        np.testing.assert_allclose(forward_nullified_borders(spent, shares, starts, mask),
                                   [11 / 3, 2 + 1.2 / 0.7, 4.0])

    def test_nullifies_paid_slots(self):
        requirements = DynamicRequirements.constant(2, 4, 8.0, 4, 0.8)
        mechanism = make_dynamic_mechanism('DPBA', 2, 2, NoiseSource(1))
        trace = mechanism.run(batches(4, 2), lambda t: requirements,
                              verdicts=['skip', 'publish', 'publish', 'publish'])
        # Slot 2 absorbs two shares of 0.1, paying through slot 3.
        np.testing.assert_allclose(trace.ledger.entries(Phase.PUBLICATION)[1], [0.2, 0.2])
        self.assertIs(trace.decisions[2], Decision.NULLIFIED)
        self.assertIs(trace.decisions[3], Decision.NON_NULL)
        self.assertTrue(audit_dynamic(trace, check_phases=True).passed)


class TestDynamicMechanisms(unittest.TestCase):
    def test_factory_and_step_errors(self):
        with self.assertRaises(ValueError):
            make_dynamic_mechanism('PBD', 3, 2, NoiseSource(1))
        mechanism = make_dynamic_mechanism('dpbd', 3, 2, NoiseSource(1))
        with self.assertRaises(ValueError):
            mechanism.step(StreamBatch(1, [0, 1, 0], 2),
                           DynamicRequirements.constant(2, 1, 1.0, 1, 1.0))
        with self.assertRaises(ValueError):
            mechanism.advance_forward_windows(3, declared(1))

    def test_adversarial_schedules_never_violate(self):
        runs = 100 if SLOW else 6
        n, T = 12, 60
        projections = 0
        for run in range(runs):
            rng = np.random.default_rng(run)
            script = [DynamicRequirements(rng.integers(1, 8, n),
                                          rng.choice([0.05, 0.4, 2.0, 10.0], n),
                                          rng.integers(1, 8, n),
                                          rng.choice([0.2, 1.0, 4.0], n)) for _ in range(T)]
            stream = [StreamBatch(t, rng.integers(-1, 3, n), 3) for t in range(1, T + 1)]
            verdicts = rng.choice(['publish', 'skip'], T).tolist() if run % 2 else None
            for kind in ('DPBD', 'DPBA'):
                trace = make_dynamic_mechanism(kind, n, 3, NoiseSource(run), debug=True).run(
                    stream, script, verdicts=verdicts)
                report = audit_dynamic(trace, check_phases=True)
                self.assertTrue(report.passed, f"{kind} run {run} broke {report.violations[:3]}")
                projections += int(trace.projected.sum())
        self.assertGreater(projections, 0)


if __name__ == "__main__":
    unittest.main()
