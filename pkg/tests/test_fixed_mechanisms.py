import os
import unittest

import numpy as np

from pwevent.core import Decision, FixedRequirement, FixedRequirements, Phase, StreamBatch
from pwevent.datagen import gen_sin, realize_binary_stream
from pwevent.evaluation import amre, audit_fixed, bound_pbd, fixed_bound_inputs
from pwevent.harness import STATIC_BUDGETS, STATIC_WINDOWS
from pwevent.mechanisms import (BudgetAbsorption, BudgetDistribution, baseline_step, dc,
                                make_mechanism, pba_step, pbd_step)
from pwevent.mechanisms.fixed import snap_to_integers
from pwevent.noise import NoiseSource

SLOW = os.environ.get('PWEVENT_SLOW_TESTS') == '1'


def constant_stream(T, n, d=2):
    return [StreamBatch(t, np.arange(n) % d, d) for t in range(1, T + 1)]


class TestDissimilarity(unittest.TestCase):
    def test_distance_to_last_release(self):
        batch = StreamBatch(1, [0, 0, 0, 0], 2)
        rng = NoiseSource(1, zero_noise=True)
        self.assertAlmostEqual(dc(batch, np.ones(4), np.zeros(2), rng), 2.0)
        self.assertAlmostEqual(dc(batch, np.ones(4), np.array([4.0, 0.0]), rng), 0.0)

    def test_no_budget_is_infinite(self):
        batch = StreamBatch(1, [0, 1], 2)
        self.assertEqual(dc(batch, np.zeros(2), np.zeros(2), NoiseSource(1)), float('inf'))

    def test_dimension_mismatch(self):
        with self.assertRaises(ValueError):
            dc(StreamBatch(1, [0, 1], 2), np.ones(2), np.zeros(3), NoiseSource(1))


class TestBudgetDistribution(unittest.TestCase):
    def test_halving_with_forced_decisions(self):
        mechanism = BudgetDistribution(FixedRequirements.homogeneous(2, 4, 1.0), 2, NoiseSource(4))
        batches = constant_stream(3, 2)
        first = pbd_step(mechanism, batches[0], 'publish')
        second = pbd_step(mechanism, batches[1], 'skip')
        third = pbd_step(mechanism, batches[2], 'publish')
        np.testing.assert_allclose(first.eps2, [0.25, 0.25])
        self.assertIs(second.decision, Decision.FORCED)
        np.testing.assert_allclose(second.eps2, [0.0, 0.0])
        np.testing.assert_allclose(third.eps2, [0.125, 0.125])
        np.testing.assert_allclose(first.eps1, [0.125, 0.125])

    def test_personalized_remaining_budget(self):
        requirements = FixedRequirements([4, 2], [1.0, 2.0])
        mechanism = make_mechanism('PBD', requirements, 2, NoiseSource(4))
        trace = mechanism.run(constant_stream(3, 2), verdicts=['publish'] * 3)
        eps2 = trace.ledger.entries(Phase.PUBLICATION)
        np.testing.assert_allclose(eps2[:, 0], [0.25, 0.125, 0.0625])
        np.testing.assert_allclose(eps2[:, 1], [0.5, 0.25, 0.375])

    def test_data_driven_skips(self):
        requirements = FixedRequirements.homogeneous(50, 10, 1.0)
        mechanism = make_mechanism('PBD', requirements, 2, NoiseSource(8))
        trace = mechanism.run(constant_stream(40, 50))
        self.assertIn(Decision.SKIPPED, trace.decisions)
        self.assertTrue(audit_fixed(trace, check_phases=True).passed)


class TestBudgetAbsorption(unittest.TestCase):
    def setUp(self):
        # Shares E/(2w) of 0.1, 0.3 and 0.15.
        self.requirements = FixedRequirements([4, 2, 3], [0.8, 1.2, 0.9])
        self.verdicts = ['publish', 'skip', 'publish', 'publish', 'publish']

    def test_absorb_then_nullify(self):
        mechanism = BudgetAbsorption(self.requirements, 2, NoiseSource(2))
        trace = mechanism.run(constant_stream(5, 3), verdicts=self.verdicts)
        self.assertEqual(trace.decisions, [Decision.NON_NULL, Decision.FORCED, Decision.NON_NULL,
                                           Decision.NULLIFIED, Decision.NON_NULL])
        eps2 = trace.ledger.entries(Phase.PUBLICATION)
        shares = self.requirements.shares
        np.testing.assert_allclose(eps2[0], shares)
        np.testing.assert_allclose(eps2[2], [0.8 / 4, 1.2 / 2, 0.9 / 3])
        np.testing.assert_allclose(eps2[3], [0.0, 0.0, 0.0])
        np.testing.assert_allclose(eps2[4], [0.8 / 8, 1.2 / 4, 0.9 / 6])
        np.testing.assert_allclose(trace.ledger.entries(Phase.CALCULATION), np.tile(shares, (5, 1)))
        np.testing.assert_array_equal(trace.releases[3], trace.releases[2])
        self.assertTrue(audit_fixed(trace, check_phases=True).passed)

    def test_step_function(self):
        mechanism = make_mechanism('PBA', self.requirements, 2, NoiseSource(2))
        record = pba_step(mechanism, constant_stream(1, 3)[0], 'publish')
        self.assertIs(record.decision, Decision.NON_NULL)
        with self.assertRaises(ValueError):
            pba_step(mechanism, constant_stream(1, 3)[0])

    def test_snap(self):
        np.testing.assert_array_equal(snap_to_integers(np.array([0.9999999999, 1.5])), [1.0, 1.5])


class TestBaselines(unittest.TestCase):
    def setUp(self):
        self.batches = realize_binary_stream(gen_sin(120), 60, seed=5)
        self.shared = FixedRequirement(20, 1.0)

    def test_homogeneous_degeneracy(self):
        homogeneous = FixedRequirements.homogeneous(60, 20, 1.0)
        for personalized, baseline in (('PBD', 'BD'), ('PBA', 'BA')):
            ours = make_mechanism(personalized, homogeneous, 2, NoiseSource(13)).run(self.batches)
            theirs = make_mechanism(baseline, self.shared, 2, NoiseSource(13),
                                    n_users=60).run(self.batches)
            np.testing.assert_array_equal(ours.releases, theirs.releases)
            np.testing.assert_array_equal(ours.ledger.prefix(Phase.TOTAL),
                                          theirs.ledger.prefix(Phase.TOTAL))
            self.assertEqual(ours.decisions, theirs.decisions)

    def test_baseline_step_checks_requirement(self):
        mechanism = make_mechanism('BD', self.shared, 2, NoiseSource(1), n_users=60)
        baseline_step('BD', self.shared, mechanism, self.batches[0])
        with self.assertRaises(ValueError):
            baseline_step('BD', FixedRequirement(10, 1.0), mechanism, self.batches[1])
        with self.assertRaises(ValueError):
            baseline_step('BA', self.shared, mechanism, self.batches[1])

    def test_factory_errors(self):
        with self.assertRaises(ValueError):
            make_mechanism('XYZ', self.shared, 2, NoiseSource(1), n_users=3)
        with self.assertRaises(ValueError):
            make_mechanism('BD', FixedRequirements([2, 3], [1.0, 1.0]), 2, NoiseSource(1))
        with self.assertRaises(ValueError):
            make_mechanism('BA', self.shared, 2, NoiseSource(1))

    def test_uniform_forced_skip(self):
        mechanism = make_mechanism('Uniform', self.shared, 2, NoiseSource(1), n_users=60)
        trace = mechanism.run(self.batches[:3], verdicts={2: 'skip'})
        self.assertEqual([d.value for d in trace.decisions], ['non-null', 'forced', 'non-null'])
        np.testing.assert_allclose(trace.ledger.entries(Phase.PUBLICATION)[0], np.full(60, 0.05))
        self.assertTrue(audit_fixed(trace).passed)

    def test_uniform_calibration(self):
        for window, expected in ((8, 128.0), (4, 32.0)):
            mechanism = make_mechanism('Uniform', FixedRequirement(window, 1.0), 1,
                                       NoiseSource(window), n_users=1)
            trace = mechanism.run(StreamBatch(t, [0], 1) for t in range(1, 10 ** 5 + 1))
            self.assertLess(abs(amre(trace) - expected), 0.05 * expected,
                            f"Uniform AMRE at w={window} is not within 5% of {expected}.")


class TestFixedLedgerAudit(unittest.TestCase):
    def test_randomized_runs_never_violate(self):
        runs = 100 if SLOW else 5
        rng = np.random.default_rng(21)
        for run in range(runs):
            batches = realize_binary_stream(gen_sin(200), 100, seed=run)
            requirements = FixedRequirements(rng.choice(STATIC_WINDOWS, 100),
                                             rng.choice(STATIC_BUDGETS, 100))
            for kind in ('PBD', 'PBA'):
                trace = make_mechanism(kind, requirements, 2, NoiseSource(run)).run(batches)
                report = audit_fixed(trace, check_phases=True)
                self.assertTrue(report.passed, f"{kind} run {run} broke {report.violations[:3]}")
            shared = FixedRequirement(int(rng.choice(STATIC_WINDOWS)),
                                      float(rng.choice(STATIC_BUDGETS)))
            for kind in ('BD', 'BA'):
                trace = make_mechanism(kind, shared, 2, NoiseSource(run), n_users=100).run(batches)
                self.assertTrue(audit_fixed(trace, check_phases=True).passed)

    def test_error_below_bound(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            window = int(rng.integers(2, 12))
            budget = float(rng.uniform(0.5, 2.0))
            n = int(rng.integers(5, 40))
            requirements = FixedRequirements.homogeneous(n, window, budget)
            verdicts = ['publish' if (t - 1) % window == 0 else 'skip'
                        for t in range(1, 6 * window + 1)]
            trace = make_mechanism('PBD', requirements, 2, NoiseSource(window)).run(
                constant_stream(len(verdicts), n), verdicts=verdicts)
            bound = bound_pbd(fixed_bound_inputs(requirements, 2, s_tilde=1))
            self.assertTrue(bound.assumptions_met, bound.issues)
            self.assertLessEqual(amre(trace), bound.value)


if __name__ == "__main__":
    unittest.main()
