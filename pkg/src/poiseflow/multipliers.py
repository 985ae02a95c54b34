"""Fourier-side weights: the piecewise frequency multipliers, the decay rate,
the bounded time weight, the Japanese bracket and the initial-size weights.

All formulas branch at |k| = nu^(-1/3); both branches agree there, which the
tests pin down to relative 1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class MultiplierSet:
    alpha: float
    beta: float
    gamma: float
    lam: float


@dataclass(frozen=True)
class EnergyConstants:
    """Tunables of the weighted energy; defaults satisfy both positivity
    constraints with margin (0.05 - 0.01 > 0 and 0.5 - 8*0.0025/0.1 = 0.3 > 0)."""

    c_alpha: float = 0.1
    c_beta: float = 0.05
    c_gamma: float = 0.5
    c: float = 0.01
    J: float = 1.0
    m: float = 0.8

    def validate(self) -> "EnergyConstants":
        if not (self.c_alpha > 0 and self.c_beta > 0 and self.c_gamma > 0):
            raise ConfigError("c_alpha, c_beta, c_gamma must be positive")
        if not (self.c_beta - self.c_alpha**2 > 0):
            raise ConfigError(
                f"need c_beta - c_alpha^2 > 0, got {self.c_beta - self.c_alpha**2:g}")
        if not (self.c_gamma - 8 * self.c_beta**2 / self.c_alpha > 0):
            raise ConfigError(
                "need c_gamma - 8 c_beta^2 / c_alpha > 0, got "
                f"{self.c_gamma - 8 * self.c_beta**2 / self.c_alpha:g}")
        if not self.J >= 1:
            raise ConfigError(f"J must be >= 1, got {self.J}")
        if not (0.75 < self.m < 1.0):
            raise ConfigError(f"m must lie in (3/4, 1), got {self.m}")
        if not self.c > 0:
            raise ConfigError(f"c must be positive, got {self.c}")
        return self


def _check_nu(nu: float):
    if not (0.0 < nu < 1.0):
        raise ConfigError(f"nu must lie in (0, 1), got {nu}")


def decay_rate(k, nu):
    """lambda(k): nu^(1/2)|k|^(1/2) above the threshold frequency, nu k^2 below."""
    _check_nu(nu)
    ak = np.abs(k)
    thresh = nu ** (-1.0 / 3.0)
    return np.where(ak >= thresh, np.sqrt(nu * ak), nu * ak * ak)


def eval_multipliers(k: float, nu: float) -> MultiplierSet:
    _check_nu(nu)
    ak = abs(k)
    thresh = nu ** (-1.0 / 3.0)
    if ak >= thresh:
        alpha = nu**0.5 * ak**-0.5
        beta = 1.0 / ak
        gamma = nu**-0.5 * ak**0.5
        lam = (nu * ak) ** 0.5
    else:
        alpha = nu ** (2.0 / 3.0)
        beta = nu ** (1.0 / 3.0)
        gamma = nu ** (-2.0 / 3.0)
        lam = nu * ak * ak
    return MultiplierSet(alpha=alpha, beta=beta, gamma=gamma, lam=lam)


def multiplier_arrays(k_values: np.ndarray, nu: float):
    """Vectorized (alpha, beta, gamma, lambda) over a k-grid."""
    _check_nu(nu)
    ak = np.abs(np.asarray(k_values, dtype=float))
    hi = ak >= nu ** (-1.0 / 3.0)
    with np.errstate(divide="ignore"):
        alpha = np.where(hi, nu**0.5 * ak**-0.5, nu ** (2.0 / 3.0))
        beta = np.where(hi, 1.0 / np.where(ak > 0, ak, 1.0), nu ** (1.0 / 3.0))
    gamma = np.where(hi, nu**-0.5 * ak**0.5, nu ** (-2.0 / 3.0))
    lam = np.where(hi, np.sqrt(nu * ak), nu * ak * ak)
    return alpha, beta, gamma, lam


def time_weight_M(k, nu, c, J, t):
    """Closed form of the bounded auxiliary weight.

    With u = c lambda(k) t:
        M = exp[(J^2/2)(arctan u - u/(1+u^2))],
    which solves M' = c J^2 lambda (c lambda t)^2 / <c lambda t>^4 * M, M(0)=1,
    and satisfies 1 <= M <= exp(pi J^2 / 4).
    """
    lam = decay_rate(k, nu)
    u = c * lam * np.asarray(t, dtype=float)
    return np.exp(0.5 * J * J * (np.arctan(u) - u / (1.0 + u * u)))


def bracket(x):
    """<x> = sqrt(1 + x^2)."""
    x = np.asarray(x, dtype=float)
    out = np.sqrt(1.0 + x * x)
    return float(out) if out.ndim == 0 else out


def epsilon_weights(k, nu, m):
    """The six k-side weights of the initial-size functional, in order:
    vorticity, gradient, y-weighted, wall-normal-velocity, and the two
    unit weights of the sup-in-k terms."""
    _check_nu(nu)
    if not (0.75 < m < 1.0):
        raise ConfigError(f"m must lie in (3/4, 1), got {m}")
    bk = bracket(k)
    bnk = bracket(nu ** (1.0 / 3.0) * np.asarray(k, dtype=float))
    w1 = bk**m
    w2 = nu ** (1.0 / 3.0) * bk**m * bnk ** (-0.25)
    w3 = nu ** (-1.0 / 3.0) * bk**m * bnk**0.25
    w4 = w3
    one = np.ones_like(np.asarray(k, dtype=float))
    return w1, w2, w3, w4, one, one
