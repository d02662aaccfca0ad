"""Seeded Laplace noise and the closed-form Laplace error."""
from dataclasses import dataclass

import numpy as np
from logzero import logger

_UINT64_MAX = 2 ** 64 - 1


@dataclass(frozen=True)
class RngSeed:
    """A (seed, stream_id) pair naming one reproducible noise sequence."""
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ('seed', 'stream_id'):
            value = getattr(self, name)
            if not 0 <= int(value) <= _UINT64_MAX:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value}.")

    def sequence(self):
        return np.random.SeedSequence([int(self.seed), int(self.stream_id)])


class NoiseSource:
    """Own a numpy generator and draw the randomness a mechanism needs.

    Args:
        seed (RngSeed or int or np.random.SeedSequence): Where the stream comes from.
        zero_noise (bool): When True every Laplace draw is 0. Sampling draws
            are unaffected.
    """

    def __init__(self, seed=0, zero_noise=False):
        if isinstance(seed, np.random.SeedSequence):
            self._sequence = seed
        else:
            if not isinstance(seed, RngSeed):
                seed = RngSeed(int(seed))
            self._sequence = seed.sequence()
        self.zero_noise = zero_noise
        self.generator = np.random.Generator(np.random.PCG64(self._sequence))

    def spawn(self, key):
        """Derive an independent child source keyed by an integer."""
        child = np.random.SeedSequence(self._sequence.entropy,
                                       spawn_key=tuple(self._sequence.spawn_key) + (int(key),))
        return NoiseSource(child, zero_noise=self.zero_noise)

    def uniform(self, size=None):
        """Uniform draws on [0, 1)."""
        return self.generator.random(size)

    def centered_uniform(self, size=None):
        """Uniform draws on the open interval (-1/2, 1/2)."""
        u = self.generator.random(size) - 0.5
        if size is None:
            while u == -0.5:
                u = self.generator.random() - 0.5
            return u
        edge = u == -0.5
        while np.any(edge):
            u[edge] = self.generator.random(int(edge.sum())) - 0.5
            edge = u == -0.5
        return u

    def normal(self, scale, size=None):
        return self.generator.normal(0.0, scale, size)

    def laplace(self, scale, size=None):
        """Laplace(0, scale) draws by inverse CDF."""
        check_scale(scale)
        if self.zero_noise:
            return 0.0 if size is None else np.zeros(size)
        return laplace_from_uniform(self.centered_uniform(size), scale)


def check_scale(scale):
    if not scale > 0:
        logger.error(f"Invalid Laplace scale: {scale}")
        raise ValueError(f"Laplace scale must be positive, got {scale}.")


def laplace_from_uniform(u, scale):
    """Map u in (-1/2, 1/2) to a Laplace(0, scale) variate."""
    check_scale(scale)
    u = np.asarray(u, dtype=float)
    value = -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    return float(value) if value.ndim == 0 else value


def laplace_sample(scale, rng):
    """Draw one Laplace(0, scale) value from a :class:`NoiseSource`."""
    return float(rng.laplace(scale))


def noise_error(eps_theta):
    """Variance 2/eps^2 of a sensitivity-1 Laplace release.

    Raises:
        ValueError: If ``eps_theta`` is not positive.
    """
    if not eps_theta > 0:
        raise ValueError(f"Noise error needs a positive budget, got {eps_theta}.")
    return 2.0 / eps_theta ** 2
