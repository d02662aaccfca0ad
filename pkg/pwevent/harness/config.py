"""Experiment configuration, per-user requirement assignment and dynamic schedules."""
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import numpy as np
from logzero import logger

from pwevent.core.types import DynamicRequirements, FixedRequirements
from pwevent.datagen.generators import GENERATORS
from pwevent.noise.laplace import NoiseSource, RngSeed
from pwevent.utils import import_json

# Table-settings defaults
STATIC_BUDGETS = (0.2, 0.4, 0.6, 0.8, 1.0)
DEFAULT_BUDGET = 0.6
STATIC_WINDOWS = (40, 80, 120, 160, 200)
DEFAULT_WINDOW = 120
RATIOS = (0.1, 0.3, 0.5, 0.7, 0.9)
DEFAULT_RATIO = 0.5
BACKWARD_WINDOW = 1
BACKWARD_BUDGET = 10.0
DEFAULT_SLOTS = 2000
DEFAULT_USERS = 1000

FIXED_KINDS = ('PBD', 'PBA', 'BD', 'BA', 'UNIFORM')
DYNAMIC_KINDS = ('DPBD', 'DPBA')
SCHEDULE_KINDS = ('constant', 'periodic', 'scripted')


class ConfigError(ValueError):
    """An experiment configuration that cannot be run."""


@dataclass
class ExperimentConfig:
    """Everything one ``pwevent run`` needs.

    The parameter grid is ``budgets x windows x ratios``; every point is run
    ``repeats`` times. ``schedule`` is a dict with a ``kind`` key (constant,
    periodic or scripted) and is required by the dynamic mechanisms.
    """
    mechanism: str = 'PBD'
    dataset: str = 'sin'
    dataset_params: dict = field(default_factory=dict)
    csv_path: Optional[str] = None
    csv_schema: Optional[dict] = None
    slot_width: float = 1.0
    slots: int = DEFAULT_SLOTS
    users: int = DEFAULT_USERS
    budgets: List[float] = field(default_factory=lambda: [DEFAULT_BUDGET])
    windows: List[int] = field(default_factory=lambda: [DEFAULT_WINDOW])
    ratios: List[float] = field(default_factory=lambda: [DEFAULT_RATIO])
    budget_domain: List[float] = field(default_factory=lambda: list(STATIC_BUDGETS))
    window_domain: List[int] = field(default_factory=lambda: list(STATIC_WINDOWS))
    schedule: Optional[dict] = None
    repeats: int = 1
    seed: int = 0
    out: str = 'results'
    name: str = 'results'
    save_traces: bool = False
    audit_phases: bool = False
    normalize_ajsd: bool = False

    def __post_init__(self):
        self.mechanism = str(self.mechanism).upper()

    @classmethod
    def from_json(cls, json_file, **overrides):
        """Load a config file; non-None ``overrides`` replace file values."""
        try:
            values = import_json(json_file)
        except OSError as e:
            logger.error(f"Could not read config {json_file}: {e}")
            raise ConfigError(f"Could not read config {json_file}: {e}") from e
        except ValueError as e:
            raise ConfigError(f"{json_file} is not valid JSON: {e}") from e
        return cls.from_dict(values, **overrides)

    @classmethod
    def from_dict(cls, values, **overrides):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"Unknown config keys: {unknown}")
        merged = dict(values)
        merged.update({key: value for key, value in overrides.items() if value is not None})
        config = cls(**merged)
        config.validate()
        return config

    @property
    def dynamic(self):
        return self.mechanism in DYNAMIC_KINDS

    @property
    def grid(self):
        """Grid points as (budget, window, ratio) in a fixed order."""
        return [(float(b), int(w), float(o))
                for b in self.budgets for w in self.windows for o in self.ratios]

    def validate(self):
        if self.mechanism not in FIXED_KINDS + DYNAMIC_KINDS:
            raise ConfigError(f"Unknown mechanism '{self.mechanism}'.")
        for name in ('budgets', 'windows', 'ratios', 'budget_domain', 'window_domain'):
            if not getattr(self, name):
                raise ConfigError(f"'{name}' must not be empty.")
        if any(not b > 0 for b in list(self.budgets) + list(self.budget_domain)):
            raise ConfigError("Budgets must be positive.")
        if any(int(w) != w or w < 1 for w in list(self.windows) + list(self.window_domain)):
            raise ConfigError("Windows must be positive integers.")
        if any(not 0 <= o <= 1 for o in self.ratios):
            raise ConfigError("Ratios must lie in [0, 1].")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be at least 1, got {self.repeats}.")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}.")
        if self.dataset == 'csv':
            if not self.csv_path or not self.csv_schema:
                raise ConfigError("A csv dataset needs csv_path and csv_schema.")
            if not self.slot_width > 0:
                raise ConfigError("slot_width must be positive.")
        elif self.dataset not in GENERATORS:
            raise ConfigError(f"Unknown dataset '{self.dataset}'. "
                              f"Choose from {sorted(GENERATORS) + ['csv']}.")
        if self.dataset != 'csv' and (self.slots < 1 or self.users < 1):
            raise ConfigError("slots and users must be positive.")
        self._validate_schedule()

    def _validate_schedule(self):
        if self.schedule is None:
            if self.dynamic:
                raise ConfigError(f"{self.mechanism} needs a requirement schedule.")
            return
        kind = self.schedule.get('kind')
        if kind not in SCHEDULE_KINDS:
            raise ConfigError(f"Unknown schedule kind '{kind}'. Choose from {SCHEDULE_KINDS}.")
        if kind == 'periodic' and not int(self.schedule.get('period') or 0) >= 1:
            raise ConfigError("A periodic schedule needs a period of at least 1.")
        if kind == 'scripted' and not self.schedule.get('path'):
            raise ConfigError("A scripted schedule needs a 'path'.")

    def to_dict(self):
        return asdict(self)


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def budget_choices(domain, lower):
    """Personalized budgets: the domain values at or above ``lower``, plus ``lower``."""
    return np.array(sorted({float(lower)} | {float(b) for b in domain if b >= lower}))


def window_choices(domain, upper):
    """Personalized windows: the domain values at or below ``upper``, plus ``upper``."""
    return np.array(sorted({int(upper)} | {int(w) for w in domain if w <= upper}))


def assign_requirements(n, budget_domain, window_domain, ratio_o, seed):
    """Give round(o * n) users the smallest budget and window, the rest other domain values.

    Args:
        n (int): Number of users.
        budget_domain (sequence): Candidate budgets E_i.
        window_domain (sequence): Candidate windows w_i.
        ratio_o (float): Fraction of users holding the designated pair.
        seed (int or np.random.SeedSequence): Fixes which users are designated
            and what the others draw.

    Returns:
        FixedRequirements
    """
    if not 0 <= ratio_o <= 1:
        raise ValueError(f"Ratio must lie in [0, 1], got {ratio_o}.")
    budgets = np.unique(np.asarray(budget_domain, dtype=float))
    windows = np.unique(np.asarray(window_domain, dtype=np.int64))
    rng = NoiseSource(seed).generator
    designated = rng.permutation(n)[:_round_half_up(ratio_o * n)]
    other_budgets = budgets[1:] if len(budgets) > 1 else budgets
    other_windows = windows[1:] if len(windows) > 1 else windows
    user_budgets = rng.choice(other_budgets, size=n)
    user_windows = rng.choice(other_windows, size=n)
    user_budgets[designated] = budgets[0]
    user_windows[designated] = windows[0]
    return FixedRequirements(user_windows, user_budgets)


class RequirementSchedule:
    """Per-slot dynamic requirements, callable as ``schedule(t)``.

    ``constant`` repeats each user's base requirement as the forward one.
    ``periodic`` draws a forward requirement set for each of the first
    ``period`` slots, within the user's own bounds, so slot t matches slot
    t - period afterwards. ``scripted`` replays given requirements and holds
    the last one after the script ends.
    """

    def __init__(self, kind, base=None, period=None, budget_domain=STATIC_BUDGETS,
                 window_domain=STATIC_WINDOWS, seed=0, script=None,
                 backward_window=BACKWARD_WINDOW, backward_budget=BACKWARD_BUDGET):
        if kind not in SCHEDULE_KINDS:
            raise ValueError(f"Unknown schedule kind '{kind}'.")
        if kind != 'scripted' and base is None:
            raise ValueError(f"A {kind} schedule needs base requirements.")
        if kind == 'periodic' and not (period and period >= 1):
            raise ValueError("A periodic schedule needs a period of at least 1.")
        if kind == 'scripted' and not script:
            raise ValueError("A scripted schedule needs at least one slot of requirements.")
        self.kind = kind
        self.base = base
        self.period = period
        self.budget_domain = tuple(budget_domain)
        self.window_domain = tuple(window_domain)
        self.seed = seed
        self.script = list(script or [])
        self.backward_window = backward_window
        self.backward_budget = backward_budget
        self._slots = ([self._draw_slot(offset) for offset in range(period)]
                       if kind == 'periodic' else [])

    @classmethod
    def constant(cls, base, **kwargs):
        return cls('constant', base=base, **kwargs)

    @classmethod
    def periodic(cls, base, period, **kwargs):
        return cls('periodic', base=base, period=period, **kwargs)

    @classmethod
    def scripted(cls, script):
        return cls('scripted', script=script)

    @classmethod
    def from_json(cls, json_file):
        """Read ``{"requirements": [[[w_B, E_B, w_F, E_F] per user] per slot]}``."""
        slots = import_json(json_file)['requirements']
        script = [DynamicRequirements(*np.asarray(rows, dtype=float).T) for rows in slots]
        logger.info(f"Loaded {len(script)} scripted slots from {json_file}")
        return cls.scripted(script)

    @classmethod
    def from_config(cls, spec, base, seed, budget_domain, window_domain):
        """Build the schedule a config's ``schedule`` dict names."""
        backward = {'backward_window': spec.get('backward_window', BACKWARD_WINDOW),
                    'backward_budget': spec.get('backward_budget', BACKWARD_BUDGET)}
        if spec['kind'] == 'scripted':
            path = Path(spec['path'])
            if not path.exists():
                raise ConfigError(f"Scripted schedule {path} does not exist.")
            return cls.from_json(path)
        if spec['kind'] == 'periodic':
            return cls.periodic(base, int(spec['period']), budget_domain=budget_domain,
                                window_domain=window_domain, seed=seed, **backward)
        return cls.constant(base, **backward)

    @property
    def n_users(self):
        return self.base.n_users if self.base is not None else self.script[0].n_users

    def _backward(self, forward_windows, forward_budgets):
        n = len(forward_windows)
        return DynamicRequirements(np.full(n, self.backward_window),
                                   np.full(n, self.backward_budget),
                                   forward_windows, forward_budgets)

    def _draw_slot(self, offset):
        rng = NoiseSource(RngSeed(self.seed, offset)).generator
        budgets = np.empty(self.base.n_users)
        for lower in np.unique(self.base.budgets):
            members = np.flatnonzero(self.base.budgets == lower)
            budgets[members] = rng.choice(budget_choices(self.budget_domain, lower),
                                          size=len(members))
        windows = np.empty(self.base.n_users, dtype=np.int64)
        for upper in np.unique(self.base.windows):
            members = np.flatnonzero(self.base.windows == upper)
            windows[members] = rng.choice(window_choices(self.window_domain, upper),
                                          size=len(members))
        return self._backward(windows, budgets)

    def __call__(self, t):
        if t < 1:
            raise ValueError(f"Slots start at 1, got {t}.")
        if self.kind == 'scripted':
            return self.script[min(t, len(self.script)) - 1]
        if self.kind == 'constant':
            return self._backward(self.base.windows, self.base.budgets)
        return self._slots[(t - 1) % self.period]
