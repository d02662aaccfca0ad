"""Closed-form per-slot error bounds for the four personalized mechanisms.

Evaluators never clamp: they return the formula's value even when the inputs
break the assumptions behind it, and list what was broken.
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from pwevent.core.budgets import collapse_budgets


@dataclass(frozen=True)
class BoundReport:
    value: float
    assumptions_met: bool
    issues: Tuple[str, ...] = ()


def harmonic_square(x):
    """H^2_x = sum of 1/k^2 for k = 1..x, and 0 for x < 1."""
    x = int(x)
    if x < 1:
        return 0.0
    return float(np.sum(1.0 / np.arange(1, x + 1, dtype=float) ** 2))


def _z(n, n_a):
    rest = n - n_a
    return rest * (rest + 0.25)


@dataclass(frozen=True)
class FixedBoundInputs:
    """Inputs of the fixed-requirement bounds.

    ``eps_left``/``eps_right`` are the smallest and largest E_i/w_i, ``n_at_right``
    the number of users at ``eps_right`` and ``w_left`` the smallest window.
    ``alpha`` is the average number of skipped slots before a publication and
    ``eps_left_tilde``/``eps_right_tilde`` the budgets past the window end.
    """
    eps_left: float
    eps_right: float
    n_users: int
    n_at_right: int
    d: int
    s_tilde: int = 1
    w_left: int = 1
    alpha: float = 0.0
    err_nullified: float = 0.0
    eps_left_tilde: Optional[float] = None
    eps_right_tilde: Optional[float] = None

    @property
    def z(self):
        return _z(self.n_users, self.n_at_right)


def fixed_bound_inputs(requirements, d, s_tilde=1, alpha=0.0, err_nullified=0.0,
                       eps_left_tilde=None, eps_right_tilde=None):
    """Derive bound inputs from per-user fixed requirements."""
    per_slot = requirements.budgets / requirements.windows
    pairs = collapse_budgets(per_slot)
    return FixedBoundInputs(eps_left=float(pairs.budgets[0]), eps_right=float(pairs.budgets[-1]),
                            n_users=requirements.n_users, n_at_right=pairs.top_count, d=d,
                            s_tilde=s_tilde, w_left=int(requirements.windows.min()),
                            alpha=alpha, err_nullified=err_nullified,
                            eps_left_tilde=eps_left_tilde, eps_right_tilde=eps_right_tilde)


def _fixed_issues(inputs):
    issues = []
    if not 0 < inputs.eps_left <= inputs.eps_right:
        issues.append('need 0 < eps_left <= eps_right')
    if not 1 <= inputs.s_tilde <= inputs.w_left:
        issues.append('need 1 <= s_tilde <= w_left')
    if not 0 <= inputs.n_at_right <= inputs.n_users:
        issues.append('need 0 <= n_at_right <= n_users')
    return issues


def _calculation_term(d, eps_left, eps_right, z):
    return min(8.0 / (d ** 2 * eps_left ** 2), z + 8.0 / (d ** 2 * eps_right ** 2))


def bound_pbd(inputs):
    """Per-slot error bound of budget distribution with at most s_tilde publications per w_left."""
    issues = _fixed_issues(inputs)
    s, z = inputs.s_tilde, inputs.z
    growth = 32.0 * (4.0 ** s - 1) / (3.0 * s)
    value = (_calculation_term(inputs.d, inputs.eps_left, inputs.eps_right, z)
             + min(growth / inputs.eps_left ** 2, z + growth / inputs.eps_right ** 2))
    return BoundReport(value, not issues, tuple(issues))


def bound_pba(inputs):
    """Per-slot error bound of budget absorption with alpha skips before each publication."""
    issues = _fixed_issues(inputs)
    z, alpha, w = inputs.z, inputs.alpha, inputs.w_left
    left, right = inputs.eps_left, inputs.eps_right
    if alpha < 0:
        issues.append('need alpha >= 0')
    if alpha <= w:
        h = harmonic_square(alpha + 1)
        sampled = min(2.0 / left ** 2 * h, (alpha + 1) * z + 2.0 / right ** 2 * h)
    else:
        if inputs.eps_left_tilde is None or inputs.eps_right_tilde is None:
            raise ValueError("alpha > w_left needs eps_left_tilde and eps_right_tilde.")
        h = harmonic_square(w)
        sampled = (min(2.0 / left ** 2 * h, w * z + 2.0 / right ** 2 * h)
                   + (alpha - w + 1) * min(2.0 / inputs.eps_left_tilde ** 2,
                                           z + 2.0 / inputs.eps_right_tilde ** 2))
    value = (_calculation_term(inputs.d, left, right, z)
             + (sampled + alpha * inputs.err_nullified) / (2 * alpha + 1))
    return BoundReport(value, not issues, tuple(issues))


@dataclass(frozen=True)
class DynamicBoundInputs:
    """Inputs of the dynamic-requirement bounds.

    ``eps_bl``/``eps_br`` bound the backward budgets, ``eps_fll``/``eps_flr``
    the forward shares, ``gamma_*`` and ``lambda_*`` the transition counts and
    ``rho_skipped``/``rho_nullified`` the skips before and nullifications
    after each publication. ``z`` defaults to n(n + 1/4).
    """
    eps_bl: float
    eps_br: float
    eps_fll: float
    eps_flr: float
    n_users: int
    d: int
    s_hat: int = 1
    gamma_left: int = 0
    gamma_right: int = 0
    rho_skipped: int = 0
    rho_nullified: int = 0
    lambda_left: int = 1
    lambda_right: int = 1
    lambda_lr: float = 0.0
    lambda_rl: float = 0.0
    err_nullified: float = 0.0
    z: Optional[float] = field(default=None)

    @property
    def z_prime(self):
        return self.z if self.z is not None else _z(self.n_users, 0)


def _dynamic_issues(inputs):
    issues = []
    if inputs.gamma_left > inputs.gamma_right:
        issues.append('need gamma_left <= gamma_right')
    if inputs.lambda_left > inputs.lambda_right:
        issues.append('need lambda_left <= lambda_right')
    if inputs.s_hat < 1:
        issues.append('need s_hat >= 1')
    for name in ('eps_bl', 'eps_br', 'eps_fll', 'eps_flr'):
        if not getattr(inputs, name) > 0:
            issues.append(f'need {name} > 0')
    return issues


def _dynamic_calculation_term(inputs):
    z = inputs.z_prime
    low = min(inputs.eps_fll, inputs.eps_bl)
    high = max(inputs.eps_flr, inputs.eps_br)
    return min(2.0 / (inputs.d ** 2 * low ** 2), z + 2.0 / (inputs.d ** 2 * high ** 2))


def bound_dpbd(inputs, variant='stated'):
    """Per-slot error bound of dynamic budget distribution.

    ``variant='derived'`` uses the constants of the longer derivation
    (4^(s-gamma+2) and -16) in place of the stated ones.
    """
    issues = _dynamic_issues(inputs)
    if variant not in ('stated', 'derived'):
        raise ValueError(f"Unknown bound variant '{variant}'.")
    shift, offset = (1, 4) if variant == 'stated' else (2, 16)
    s, z = inputs.s_hat, inputs.z_prime

    def growth(gamma):
        return 2.0 * (4.0 ** (s - gamma + shift) + 3 * gamma - offset) / (3.0 * s)

    value = (_dynamic_calculation_term(inputs)
             + min(growth(inputs.gamma_right) / inputs.eps_bl ** 2,
                   z + growth(inputs.gamma_left) / inputs.eps_br ** 2))
    return BoundReport(value, not issues, tuple(issues))


def _skipped_and_published(inputs, variant, issues):
    rho = inputs.rho_skipped + 1
    lam_l, lam_r = inputs.lambda_left, inputs.lambda_right
    z, n = inputs.z_prime, inputs.n_users
    fll, flr, bl, br = inputs.eps_fll, inputs.eps_flr, inputs.eps_bl, inputs.eps_br
    h = harmonic_square
    if inputs.lambda_lr >= inputs.lambda_rl:
        return min(2 * h(rho) / fll ** 2, z * rho + 2 * h(rho) / flr ** 2)
    head = min(2.0 / fll ** 2 * h(lam_l), z * lam_l + 2.0 * lam_l / br ** 2)
    if variant == 'stated':
        if lam_l < rho <= lam_r:
            return min(2.0 / fll ** 2 * h(rho), z * rho + 2.0 * rho / br ** 2)
        if rho <= lam_l:
            issues.append('three-part formula evaluated with rho_skipped + 1 <= lambda_left')
        tail = rho - lam_r
        return (head + (lam_r - lam_l) * min(2.0 / bl ** 2, n * (n + 0.25) + 2.0 / br ** 2)
                + min(2.0 * tail / bl ** 2, tail * z + 2.0 / flr ** 2 * h(tail)))
    if rho <= lam_l:
        return min(2.0 / fll ** 2 * h(rho), z * rho + 2.0 * rho / br ** 2)
    middle = min(2.0 / bl ** 2, z + 2.0 / br ** 2)
    if rho <= lam_r:
        return head + (rho - lam_l) * middle
    tail = rho - lam_r
    return (head + (lam_r - lam_l) * middle
            + min(2.0 * tail / bl ** 2, tail * z + 2.0 / flr ** 2 * h(tail)))


def bound_dpba(inputs, variant='stated'):
    """Per-slot error bound of dynamic budget absorption.

    ``variant='stated'`` evaluates the stated three-case formula as printed;
    ``'derived'`` follows the case split of the derivation, where the first
    backward case applies when rho_skipped + 1 <= lambda_left.
    """
    issues = _dynamic_issues(inputs)
    if variant not in ('stated', 'derived'):
        raise ValueError(f"Unknown bound variant '{variant}'.")
    for name in ('lambda_left', 'lambda_right'):
        if getattr(inputs, name) != math.floor(getattr(inputs, name)):
            issues.append(f'{name} is not an integer')
    sampled = _skipped_and_published(inputs, variant, issues)
    value = (_dynamic_calculation_term(inputs)
             + (sampled + inputs.rho_nullified * inputs.err_nullified)
             / (inputs.rho_skipped + inputs.rho_nullified + 1))
    return BoundReport(value, not issues, tuple(issues))


def degenerate_dynamic_inputs(fixed, gamma=0):
    """Dynamic inputs equivalent to fixed-requirement inputs (halved per-slot budgets)."""
    return DynamicBoundInputs(eps_bl=fixed.eps_left / 2, eps_br=fixed.eps_right / 2,
                              eps_fll=fixed.eps_left / 2, eps_flr=fixed.eps_right / 2,
                              n_users=fixed.n_users, d=fixed.d, s_hat=fixed.s_tilde,
                              gamma_left=gamma, gamma_right=gamma, z=fixed.z)
