# -*- coding: utf-8 -*-
import json
import logging
import sys

import click
import logzero
from logzero import logger

from pwevent.core.trace import RunTrace
from pwevent.datagen.generators import GENERATORS, generate, realize_binary_stream, save_stream_csv
from pwevent.evaluation.audit import audit_dynamic, audit_fixed
from pwevent.harness.config import ConfigError, ExperimentConfig
from pwevent.harness.runner import run_experiment


def _number_list(cast):
    def parse(ctx, param, value):
        if value is None:
            return None
        try:
            return [cast(item) for item in value.split(',') if item.strip()]
        except ValueError:
            raise click.BadParameter(f"expected a comma-separated list, got '{value}'")
    return parse


@click.group()
@click.option('--verbose', '-v', is_flag=True, help='Log per-slot detail.')
@click.option('--quiet', '-q', is_flag=True, help='Only log warnings and errors.')
def main(verbose, quiet):
    """Personalized w-event private stream publishing experiments."""
    if verbose:
        logzero.loglevel(logging.DEBUG)
    elif quiet:
        logzero.loglevel(logging.WARNING)
    else:
        logzero.loglevel(logging.INFO)


@main.command()
@click.argument('config', required=False, type=click.Path(exists=True, dir_okay=False))
@click.option('--mechanism',
              type=click.Choice(['PBD', 'PBA', 'DPBD', 'DPBA', 'BD', 'BA', 'Uniform'],
                                case_sensitive=False))
@click.option('--budget-list', callback=_number_list(float), help='Static budgets E, e.g. 0.2,0.6')
@click.option('--window-list', callback=_number_list(int), help='Static windows w, e.g. 40,120')
@click.option('--ratio', callback=_number_list(float), help='Designated-user ratios o.')
@click.option('--repeats', type=int)
@click.option('--seed', type=int)
@click.option('--out', type=click.Path(file_okay=False), help='Output directory.')
@click.option('--slots', type=int)
@click.option('--users', type=int)
@click.option('--dataset', type=click.Choice(sorted(GENERATORS) + ['csv']))
@click.option('--schedule', type=click.Choice(['constant', 'periodic', 'scripted']),
              help='Dynamic requirement schedule (DPBD/DPBA).')
@click.option('--period', type=int, default=None, help='Period of a periodic schedule.')
@click.option('--script', type=click.Path(exists=True, dir_okay=False),
              help='JSON per-slot requirements of a scripted schedule.')
@click.option('--save-traces', is_flag=True, help='Keep an .npz trace per trial.')
def run(config, mechanism, budget_list, window_list, ratio, repeats, seed, out, slots, users,
        dataset, schedule, period, script, save_traces):
    """Run an experiment grid from a JSON CONFIG and/or flags."""
    overrides = {'mechanism': mechanism, 'budgets': budget_list, 'windows': window_list,
                 'ratios': ratio, 'repeats': repeats, 'seed': seed, 'out': out,
                 'slots': slots, 'users': users, 'dataset': dataset,
                 'save_traces': save_traces or None}
    if schedule is not None:
        overrides['schedule'] = {'kind': schedule, 'period': period, 'path': script}
    try:
        if config:
            settings = ExperimentConfig.from_json(config, **overrides)
        else:
            settings = ExperimentConfig.from_dict({}, **overrides)
        result = run_experiment(settings)
    except ConfigError as e:
        raise click.UsageError(str(e))
    click.echo(f"{len(result.records)} records -> {result.records_path}")
    click.echo(f"summary -> {result.summary_path}")
    if not result.passed:
        logger.error(f"{result.violations} trials violated their privacy requirements.")
        sys.exit(1)


@main.command()
@click.option('--dataset', type=click.Choice(sorted(GENERATORS)), default='sin', show_default=True)
@click.option('--slots', type=int, default=2000, show_default=True)
@click.option('--users', type=int, default=1000, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', type=click.Path(dir_okay=False), required=True, help='CSV to write.')
def gen(dataset, slots, users, seed, out):
    """Write a synthetic binary stream as (user, slot, value) rows."""
    try:
        probabilities = generate(dataset, slots, seed=seed)
        batches = realize_binary_stream(probabilities, users, seed=seed)
    except ValueError as e:
        raise click.UsageError(str(e))
    manifest = save_stream_csv(batches, out, probabilities.metadata())
    click.echo(f"{out} ({manifest})")


@main.command()
@click.argument('trace', type=click.Path(exists=True, dir_okay=False))
@click.option('--phases', is_flag=True, help='Also check each phase against half the budget.')
def audit(trace, phases):
    """Re-audit a saved .npz TRACE and print the report as JSON."""
    loaded = RunTrace.load(trace)
    if loaded.requirement_history is not None:
        report = audit_dynamic(loaded, check_phases=phases)
    elif loaded.fixed_requirements is not None:
        report = audit_fixed(loaded, check_phases=phases)
    else:
        raise click.UsageError(f"{trace} holds no requirements to audit against.")
    click.echo(json.dumps(report.to_dict(), indent=4, sort_keys=True))
    if not report.passed:
        sys.exit(1)


if __name__ == "__main__":
    main()
