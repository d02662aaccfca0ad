from .config import (BACKWARD_BUDGET, BACKWARD_WINDOW, ConfigError, DEFAULT_BUDGET, DEFAULT_RATIO,
                     DEFAULT_WINDOW, ExperimentConfig, RATIOS, RequirementSchedule, STATIC_BUDGETS,
                     STATIC_WINDOWS, assign_requirements, budget_choices, window_choices)
from .runner import (ExperimentResult, Trial, run_experiment, run_trial, summarize, trial_entropy,
                     trial_seeds)
