import os
import shutil
import unittest
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from pwevent.harness import STATIC_BUDGETS, STATIC_WINDOWS, ExperimentConfig, run_experiment

SLOW = os.environ.get('PWEVENT_SLOW_TESTS') == '1'


@unittest.skipUnless(SLOW, "Set PWEVENT_SLOW_TESTS=1 to run experiment trend checks.")
class TestErrorTrends(unittest.TestCase):
    def setUp(self):
        self.test_dir = Path("./test_trends")
        self.test_dir.mkdir(parents=True, exist_ok=True)

    def tearDown(self):
        if self.test_dir.exists():
            shutil.rmtree(self.test_dir)

    def run_grid(self, name, **values):
        settings = {'dataset': 'sin', 'slots': 2000, 'users': 1000, 'repeats': 10, 'seed': 5,
                    'out': str(self.test_dir), 'name': name}
        settings.update(values)
        result = run_experiment(ExperimentConfig.from_dict(settings))
        self.assertTrue(result.passed)
        return result

    def median_amre(self, result, key):
        points = {}
        for record in result.records:
            points.setdefault(record['point'][key], []).append(record['amre'])
        keys = sorted(points)
        return keys, [float(np.median(points[k])) for k in keys]

    def test_error_falls_with_budget(self):
        for mechanism in ('PBD', 'PBA'):
            result = self.run_grid(f'budget_{mechanism}', mechanism=mechanism,
                                   budgets=list(STATIC_BUDGETS), windows=[120])
            budgets, errors = self.median_amre(result, 'budget')
            rho, _ = spearmanr(budgets, errors)
            self.assertLessEqual(rho, -0.8,
                                 f"{mechanism} AMRE does not fall with the budget: {errors}")

    def test_error_grows_with_window(self):
        for mechanism in ('PBD', 'PBA'):
            result = self.run_grid(f'window_{mechanism}', mechanism=mechanism,
                                   budgets=[0.6], windows=list(STATIC_WINDOWS))
            windows, errors = self.median_amre(result, 'window')
            rho, _ = spearmanr(windows, errors)
            self.assertGreaterEqual(rho, 0.8,
                                    f"{mechanism} AMRE does not grow with the window: {errors}")

    def test_absorption_beats_distribution(self):
        for dataset in ('sin', 'log'):
            wins = 0
            for seed in range(10):
                common = {'dataset': dataset, 'repeats': 1, 'seed': seed}
                pbd = self.run_grid(f'{dataset}_pbd_{seed}', mechanism='PBD', **common)
                pba = self.run_grid(f'{dataset}_pba_{seed}', mechanism='PBA', **common)
                wins += pba.records[0]['amre'] < pbd.records[0]['amre']
            self.assertGreaterEqual(wins, 8, f"PBA beat PBD on only {wins}/10 {dataset} seeds.")


if __name__ == "__main__":
    unittest.main()
