"""Run an experiment grid and write JSON-lines records plus a per-point summary."""
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from functools import partial
from pathlib import Path
from typing import List

import logzero
import numpy as np
import pandas as pd
from logzero import logger

from pwevent import _DATEFMT1
from pwevent.core.types import FixedRequirements
from pwevent.datagen.generators import generate, realize_binary_stream
from pwevent.datagen.ingest import GridSpec, IngestSchema, ingest_csv
from pwevent.evaluation.audit import audit_dynamic, audit_fixed
from pwevent.evaluation.metrics import ajsd, amre
from pwevent.harness.config import (ConfigError, RequirementSchedule, assign_requirements,
                                    budget_choices, window_choices)
from pwevent.mechanisms.dynamic import make_dynamic_mechanism
from pwevent.mechanisms.fixed import make_mechanism
from pwevent.noise.laplace import NoiseSource
from pwevent.utils import dumps_record, export_json

THREADS_ENV = 'PWEVENT_THREADS'
SHARED_REQUIREMENT_KINDS = ('BD', 'BA', 'UNIFORM')


@dataclass(frozen=True)
class Trial:
    grid_index: int
    repeat: int
    budget: float
    window: int
    ratio: float


@dataclass
class ExperimentResult:
    records: List[dict]
    records_path: Path
    summary_path: Path
    violations: int

    @property
    def passed(self):
        return self.violations == 0


def thread_count():
    """Trial parallelism from the environment, 1 when unset."""
    value = os.environ.get(THREADS_ENV, '1')
    try:
        threads = int(value)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got '{value}'.")
    return max(threads, 1)


def trial_entropy(base_seed, grid_index, repeat):
    """The root entropy of one trial, stored in its record for replay."""
    return [int(base_seed), int(grid_index), int(repeat)]


def trial_seeds(entropy):
    """Independent (data, requirements, mechanism) seed sequences for one trial."""
    return np.random.SeedSequence(list(entropy)).spawn(3)


def load_csv_stream(config):
    """Ingest the configured CSV once; every trial replays the same batches."""
    schema = dict(config.csv_schema)
    category_map = schema.pop('category_map', None)
    try:
        if schema.get('grid') is not None:
            schema['grid'] = GridSpec(**schema['grid'])
        schema = IngestSchema(**schema)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Bad csv_schema: {e}") from e
    result = ingest_csv(config.csv_path, schema, config.slot_width, category_map)
    if not result.batches:
        raise ConfigError(f"{config.csv_path} holds no usable rows.")
    return result.batches[:config.slots], result.d


def synthetic_stream(config, data_seed):
    walk_seed, value_seed = data_seed.spawn(2)
    params = dict(config.dataset_params)
    seed = params.pop('seed', walk_seed)
    probabilities = generate(config.dataset, config.slots, seed=seed, **params)
    return realize_binary_stream(probabilities, config.users, seed=value_seed), 2


def trial_requirements(config, trial, n_users, seed):
    """Shared (E, w) for the baselines, personalized draws for everything else."""
    if config.mechanism in SHARED_REQUIREMENT_KINDS:
        return FixedRequirements.homogeneous(n_users, trial.window, trial.budget)
    return assign_requirements(n_users, budget_choices(config.budget_domain, trial.budget),
                               window_choices(config.window_domain, trial.window),
                               trial.ratio, seed)


def _run_dynamic(config, requirements, batches, d, seeds):
    schedule_seed = int(seeds[1].generate_state(1)[0])
    schedule = RequirementSchedule.from_config(config.schedule, requirements, schedule_seed,
                                               config.budget_domain, config.window_domain)
    if schedule.n_users != requirements.n_users:
        raise ConfigError(f"Schedule covers {schedule.n_users} users, stream has "
                          f"{requirements.n_users}.")
    mechanism = make_dynamic_mechanism(config.mechanism, requirements.n_users, d,
                                       NoiseSource(seeds[2]))
    trace = mechanism.run(batches, schedule)
    return trace, audit_dynamic(trace, check_phases=config.audit_phases)


def _run_fixed(config, requirements, batches, d, seeds):
    mechanism = make_mechanism(config.mechanism, requirements, d, NoiseSource(seeds[2]))
    trace = mechanism.run(batches)
    return trace, audit_fixed(trace, requirements, check_phases=config.audit_phases)


def run_trial(config, trial, shared_stream=None, entropy=None):
    """Build the stream, run the mechanism, audit it and score it.

    ``entropy`` replays a recorded trial; by default it is derived from the
    config seed and the trial position.
    """
    started = time.perf_counter()
    if entropy is None:
        entropy = trial_entropy(config.seed, trial.grid_index, trial.repeat)
    seeds = trial_seeds(entropy)
    if shared_stream is not None:
        batches, d = shared_stream
    else:
        batches, d = synthetic_stream(config, seeds[0])
    requirements = trial_requirements(config, trial, batches[0].n_users, seeds[1])
    runner = _run_dynamic if config.dynamic else _run_fixed
    trace, report = runner(config, requirements, batches, d, seeds)
    point = {'budget': trial.budget, 'window': trial.window, 'ratio': trial.ratio}
    if config.save_traces:
        trace.metadata.update({'point': point, 'seed': entropy, 'repeat': trial.repeat})
        traces = Path(config.out) / 'traces'
        traces.mkdir(exist_ok=True)
        trace.save(traces / f'{config.name}_g{trial.grid_index}_r{trial.repeat}.npz')
    if not report.passed:
        logger.error(f"Trial {trial.grid_index}/{trial.repeat} violated "
                     f"{len(report.violations)} privacy constraints.")
    return {
        'mechanism': config.mechanism,
        'dataset': config.dataset,
        'point': point,
        'grid_index': trial.grid_index,
        'repeat': trial.repeat,
        'seed': list(entropy),
        'amre': amre(trace),
        'ajsd': ajsd(trace, normalize=config.normalize_ajsd),
        'violation': not report.passed,
        'audit': report.to_dict(),
        'decisions': trace.decision_counts(),
        'projected': int(trace.projected.sum()) if trace.projected is not None else 0,
        'wall_time': time.perf_counter() - started,
    }


def summarize(records):
    """Mean AMRE/AJSD per (mechanism, budget, window, ratio)."""
    frame = pd.DataFrame([{'mechanism': r['mechanism'], **r['point'],
                           'amre': r['amre'], 'ajsd': r['ajsd'],
                           'violations': len(r['audit']['violations']),
                           'wall_time': r['wall_time']} for r in records])
    return frame.groupby(['mechanism', 'budget', 'window', 'ratio'], as_index=False).agg(
        amre=('amre', 'mean'), ajsd=('ajsd', 'mean'), violations=('violations', 'sum'),
        repeats=('amre', 'size'), wall_time=('wall_time', 'mean'))


def run_experiment(config):
    """Run every grid point ``config.repeats`` times.

    Records are written in grid order by a single writer whatever the thread
    count, so reruns with the same config differ only in ``wall_time``.

    Args:
        config (ExperimentConfig): A validated configuration.

    Returns:
        ExperimentResult: Records, output paths and the number of trials with
        privacy violations.
    """
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    logzero.logfile(str(out / f'{config.name}.log'))
    try:
        export_json({'config': config.to_dict(), 'started': datetime.now().strftime(_DATEFMT1)},
                    out / f'{config.name}_config.json')
        shared = load_csv_stream(config) if config.dataset == 'csv' else None
        trials = [Trial(index, repeat, *point) for index, point in enumerate(config.grid)
                  for repeat in range(config.repeats)]
        threads = min(thread_count(), len(trials))
        logger.info(f"Running {config.mechanism} on {len(trials)} trials with {threads} threads.")

        records = []
        records_path = out / f'{config.name}.jsonl'
        with open(records_path, 'w') as handle, ThreadPoolExecutor(max_workers=threads) as pool:
            for record in pool.map(partial(run_trial, config, shared_stream=shared), trials):
                handle.write(dumps_record(record) + '\n')
                records.append(record)

        summary_path = out / f'{config.name}_summary.csv'
        summarize(records).to_csv(summary_path, index=False)
        violations = sum(record['violation'] for record in records)
        logger.info(f"Wrote {len(records)} records to {records_path}; "
                    f"{violations} trials violated their requirements.")
        return ExperimentResult(records, records_path, summary_path, violations)
    finally:
        logzero.logfile(None)
