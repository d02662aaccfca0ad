"""The two phases of the sampling mechanism: sample, then disturb."""
import numpy as np

from pwevent.sampling.obs import inclusion_probabilities


def sm_sample(batch, eps_vector, eps_opt, rng):
    """Bucket counts of the users drawn into the sample.

    Every user consumes one uniform draw so the stream stays aligned across
    different budget vectors.

    Args:
        batch (StreamBatch): The slot's true assignments.
        eps_vector (array-like): Per-user budgets.
        eps_opt (float): The selected threshold.
        rng (NoiseSource): Randomness owner.

    Returns:
        np.ndarray: The sampled histogram.
    """
    probabilities = inclusion_probabilities(eps_vector, eps_opt)
    if len(probabilities) != batch.n_users:
        raise ValueError(f"Expected {batch.n_users} budgets, got {len(probabilities)}.")
    included = rng.uniform(batch.n_users) < probabilities
    return batch.histogram(included)


def sm_disturb(c_tilde, eps_opt, rng):
    """Add Laplace(1/eps_opt) noise to every bucket."""
    if not eps_opt > 0:
        raise ValueError(f"Disturbance budget must be positive, got {eps_opt}.")
    c_tilde = np.asarray(c_tilde, dtype=float)
    return c_tilde + rng.laplace(1.0 / eps_opt, size=c_tilde.shape)
