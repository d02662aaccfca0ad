"""Synthetic probability sequences and the binary streams they drive."""
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from logzero import logger

from pwevent.core.types import StreamBatch
from pwevent.noise.laplace import NoiseSource
from pwevent.utils import export_json

TLNS_START = 0.05
TLNS_STEP_STD = 0.0025
SIN_AMPLITUDE = 0.05
SIN_FREQUENCY = 0.01
SIN_OFFSET = 0.075
LOG_CEILING = 0.25
LOG_RATE = 0.01


@dataclass(frozen=True)
class ProbabilitySequence:
    """Per-slot probabilities of a user reporting the value 1."""
    p: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = None
    clip_count: int = 0

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError(f"{self.kind} probabilities must lie in [0, 1].")
        object.__setattr__(self, 'p', p)

    def __len__(self):
        return len(self.p)

    def metadata(self):
        return {'kind': self.kind, 'params': dict(self.params), 'seed': self.seed,
                'slots': len(self.p), 'clip_count': self.clip_count}


def _check_length(T):
    if T < 1:
        raise ValueError(f"A sequence needs at least one slot, got {T}.")


def gen_tlns(T, seed=0, start=TLNS_START, step_std=TLNS_STEP_STD, zero_noise=False):
    """Gaussian random walk clipped to [0, 1].

    Each clipped slot is counted in ``clip_count``; the walk continues from the
    clipped value.
    """
    _check_length(T)
    steps = np.zeros(T) if zero_noise else NoiseSource(seed).normal(step_std, T)
    p = np.empty(T)
    clips = 0
    previous = start
    for t, step in enumerate(steps):
        value = previous + step
        if value < 0.0 or value > 1.0:
            clips += 1
            value = min(max(value, 0.0), 1.0)
        p[t] = previous = value
    if clips:
        logger.debug(f"TLNS clipped {clips} of {T} slots.")
    return ProbabilitySequence(p, 'tlns', {'start': start, 'step_std': step_std,
                                           'zero_noise': zero_noise}, seed, clips)


def sin_probability(t, amplitude=SIN_AMPLITUDE, frequency=SIN_FREQUENCY, offset=SIN_OFFSET):
    return amplitude * np.sin(frequency * np.asarray(t, dtype=float)) + offset


def gen_sin(T, amplitude=SIN_AMPLITUDE, frequency=SIN_FREQUENCY, offset=SIN_OFFSET):
    _check_length(T)
    p = sin_probability(np.arange(1, T + 1), amplitude, frequency, offset)
    return ProbabilitySequence(p, 'sin', {'amplitude': amplitude, 'frequency': frequency,
                                          'offset': offset})


def log_probability(t, ceiling=LOG_CEILING, rate=LOG_RATE):
    return ceiling / (1.0 + np.exp(-rate * np.asarray(t, dtype=float)))


def gen_log(T, ceiling=LOG_CEILING, rate=LOG_RATE):
    _check_length(T)
    p = log_probability(np.arange(1, T + 1), ceiling, rate)
    return ProbabilitySequence(p, 'log', {'ceiling': ceiling, 'rate': rate})


GENERATORS = {'tlns': gen_tlns, 'sin': gen_sin, 'log': gen_log}


def generate(kind, T, seed=0, **params):
    """Dispatch to a generator by name; only TLNS consumes the seed."""
    kind = kind.lower()
    if kind not in GENERATORS:
        raise ValueError(f"Unknown generator '{kind}'. Choose from {sorted(GENERATORS)}.")
    if kind == 'tlns':
        return gen_tlns(T, seed=seed, **params)
    return GENERATORS[kind](T, **params)


def realize_binary_stream(p, n_users, seed=0):
    """Draw each user's value per slot; bucket 1 holds value 1, bucket 0 value 0."""
    if n_users < 1:
        raise ValueError(f"A stream needs at least one user, got {n_users}.")
    rng = NoiseSource(seed)
    return [StreamBatch(slot, (rng.uniform(n_users) < prob).astype(np.int64), 2)
            for slot, prob in enumerate(p.p, start=1)]


def save_stream_csv(batches, path, manifest=None):
    """Write batches as long-format (user, slot, value) rows plus a json manifest."""
    rows = [(user, batch.slot, int(value)) for batch in batches
            for user, value in enumerate(batch.assignments) if value >= 0]
    frame = pd.DataFrame(rows, columns=['user', 'slot', 'value'])
    frame.to_csv(path, index=False)
    manifest = dict(manifest or {})
    manifest.update({'rows': len(frame), 'slots': len(batches),
                     'd': batches[0].d if batches else 0,
                     'users': batches[0].n_users if batches else 0})
    manifest_path = str(path) + '.json'
    export_json(manifest, manifest_path)
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return manifest_path
