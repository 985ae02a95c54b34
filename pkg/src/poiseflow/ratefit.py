"""Exponential decay-rate fitting from sampled energy series.

Two fitting modes: a plain log-linear least-squares fit over a window given
as fractions of the time span (the generic tool), and a trailing-plateau
fit that walks backwards through the series in chunks of fixed decay depth
and keeps extending while the local slope is stable (used by the rate
sweeps, where the asymptotic tail must be isolated from the transient).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class RateFit:
    rate: float                 # decay rate (positive when the series decays)
    window: tuple               # (t_lo, t_hi) actually used
    residual: float             # rms residual of the log-linear fit
    n_samples: int
    predicted_rate: float | None = None   # 4 c lambda_k when supplied

    @property
    def ratio_to_predicted(self) -> float | None:
        if self.predicted_rate in (None, 0.0):
            return None
        return self.rate / self.predicted_rate


def fit_decay_rate(times, energies, window=(0.1, 1.0),
                   predicted_rate=None, min_samples: int = 8) -> RateFit:
    """Least-squares slope of log E versus t, negated.

    window is a fraction pair of the sampled time span; the default drops
    the first 10% (initial transient).  Nonpositive samples inside the
    window shrink it with a warning."""
    t = np.asarray(times, dtype=float)
    e = np.asarray(energies, dtype=float)
    if len(t) != len(e):
        raise ConfigError("times and energies must have equal length")
    if len(t) < min_samples:
        raise ConfigError(f"need at least {min_samples} samples, got {len(t)}")
    t0, t1 = t[0], t[-1]
    lo = t0 + window[0] * (t1 - t0)
    hi = t0 + window[1] * (t1 - t0)
    mask = (t >= lo) & (t <= hi)
    if np.any(e[mask] <= 0.0):
        warnings.warn("nonpositive energies inside the fit window; shrinking window")
        mask &= e > 0.0
    if mask.sum() < min_samples:
        raise ConfigError(
            f"only {int(mask.sum())} positive samples in the fit window, "
            f"need {min_samples}")
    tw = t[mask]
    lw = np.log(e[mask])
    coef = np.polyfit(tw, lw, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, tw) - lw) ** 2)))
    return RateFit(rate=float(-coef[0]), window=(float(tw[0]), float(tw[-1])),
                   residual=resid, n_samples=int(mask.sum()),
                   predicted_rate=predicted_rate)


def fit_tail_rate(times, energies, efolds: float = 2.0, rtol: float = 0.01,
                  floor_rel: float = 1e-16, min_samples: int = 8,
                  predicted_rate=None) -> RateFit | None:
    """Rate of the trailing exponential regime.

    The series is cut above floor_rel * E(0), split from the end into
    chunks each spanning >= efolds of decay, and the last chunk's slope is
    extended backwards while earlier chunks agree within rtol.  Returns
    None when no stable trailing regime exists."""
    t = np.asarray(times, dtype=float)
    e = np.asarray(energies, dtype=float)
    if len(e) == 0 or e[0] <= 0:
        return None
    ok = e > floor_rel * e[0]
    t = t[ok]
    le = np.log(e[ok])
    chunks = []
    iend = len(t) - 1
    while iend > min_samples:
        j = iend
        while j > 0 and le[j] < le[iend] + efolds:
            j -= 1
        if iend - j < min_samples:
            break
        slope = np.polyfit(t[j:iend + 1], le[j:iend + 1], 1)[0]
        chunks.append((-slope, j, iend))
        iend = j
    if not chunks:
        return None
    r0, lo, hi = chunks[0]
    for r, j, _ in chunks[1:]:
        if abs(r - r0) <= rtol * abs(r0):
            lo = j
        else:
            break
    coef = np.polyfit(t[lo:hi + 1], le[lo:hi + 1], 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, t[lo:hi + 1])
                                   - le[lo:hi + 1]) ** 2)))
    return RateFit(rate=float(-coef[0]), window=(float(t[lo]), float(t[hi])),
                   residual=resid, n_samples=hi - lo + 1,
                   predicted_rate=predicted_rate)


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y versus log x."""
    return float(np.polyfit(np.log(np.asarray(x, dtype=float)),
                            np.log(np.asarray(y, dtype=float)), 1)[0])
