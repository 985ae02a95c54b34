"""Mode and field containers plus the built-in initial data profiles."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ShapeError
from .grid import Grid1D

BOUNDARY_TOLERANCE = 1e-8   # relative to max |omega|; violations flag "domain too small"


@dataclass(frozen=True)
class ModeState:
    """Vorticity samples of one x-frequency: omega_k(y) on the grid nodes."""

    k: float
    nu: float
    t: float
    omega: np.ndarray

    def check(self, grid: Grid1D):
        if len(self.omega) != grid.n_y:
            raise ShapeError(f"omega length {len(self.omega)} != n_y {grid.n_y}")

    def boundary_violation(self) -> bool:
        m = np.max(np.abs(self.omega))
        if m == 0:
            return False
        edge = max(abs(self.omega[0]), abs(self.omega[-1]))
        return bool(edge > BOUNDARY_TOLERANCE * m)

    def with_omega(self, omega, t=None) -> "ModeState":
        return replace(self, omega=omega, t=self.t if t is None else t)


@dataclass
class Field:
    """Family of modes on the uniform symmetric grid {-K_max, ..., K_max}.

    modes[j] corresponds to k_values[j]; spacing delta_k turns k-integrals
    into Delta-k-weighted sums and the k-convolution into a discrete one.
    """

    k_values: np.ndarray
    delta_k: float
    nu: float
    t: float
    modes: np.ndarray           # (n_k, n_y) complex
    reality_flag: bool = True

    @property
    def n_k(self) -> int:
        return len(self.k_values)

    @property
    def zero_index(self) -> int:
        return int(np.argmin(np.abs(self.k_values)))

    def mode(self, j: int) -> ModeState:
        return ModeState(k=float(self.k_values[j]), nu=self.nu, t=self.t,
                         omega=self.modes[j])

    def reality_defect(self) -> float:
        """max_j |omega_{-k_j} - conj(omega_{k_j})| relative to max amplitude."""
        m = np.max(np.abs(self.modes)) + 1e-300
        d = np.abs(self.modes[::-1] - np.conj(self.modes))
        return float(np.max(d) / m)

    def enforce_reality(self):
        self.modes = 0.5 * (self.modes + np.conj(self.modes[::-1]))

    def copy(self) -> "Field":
        return Field(k_values=self.k_values, delta_k=self.delta_k, nu=self.nu,
                     t=self.t, modes=self.modes.copy(), reality_flag=self.reality_flag)


def make_k_grid(K_max: float, delta_k: float) -> np.ndarray:
    n_half = int(round(K_max / delta_k))
    if n_half < 1:
        raise ConfigError(f"K_max={K_max} with delta_k={delta_k} gives no modes")
    if abs(n_half * delta_k - K_max) > 1e-9 * max(K_max, 1.0):
        raise ConfigError("K_max must be an integer multiple of delta_k")
    return delta_k * np.arange(-n_half, n_half + 1)


def gaussian_profile(y: np.ndarray, width: float = 1.0, odd: bool = False) -> np.ndarray:
    """e^{-y^2/(2 width^2)}; the odd variant multiplies by y/width."""
    g = np.exp(-(y * y) / (2.0 * width * width))
    if odd:
        g = (y / width) * g
    return g.astype(complex)


def zero_field(grid: Grid1D, K_max: float, delta_k: float, nu: float) -> Field:
    kv = make_k_grid(K_max, delta_k)
    modes = np.zeros((len(kv), grid.n_y), dtype=complex)
    return Field(k_values=kv, delta_k=delta_k, nu=nu, t=0.0, modes=modes)


def gaussian_field(grid: Grid1D, K_max: float, delta_k: float, nu: float,
                   amplitude: float, k_center: float, sigma_k: float,
                   width: float = 1.0, odd: bool = False) -> Field:
    """Gaussian bump in y times a symmetrized Gaussian envelope in k.

    The k-envelope is e^{-(k-k0)^2/2 sk^2} + e^{-(k+k0)^2/2 sk^2}, so the
    field is real in x (reality condition holds exactly for real profiles).
    """
    f = zero_field(grid, K_max, delta_k, nu)
    prof = gaussian_profile(grid.nodes, width=width, odd=odd)
    env = (np.exp(-(f.k_values - k_center) ** 2 / (2 * sigma_k**2))
           + np.exp(-(f.k_values + k_center) ** 2 / (2 * sigma_k**2)))
    f.modes = amplitude * env[:, None] * prof[None, :]
    return f


def single_mode_field(grid: Grid1D, K_max: float, delta_k: float, nu: float,
                      amplitude: float, k0: float, width: float = 1.0,
                      odd: bool = False) -> Field:
    """Field supported on +-k0 only (conjugate pair)."""
    f = zero_field(grid, K_max, delta_k, nu)
    j = int(np.argmin(np.abs(f.k_values - k0)))
    if abs(f.k_values[j] - k0) > 1e-9 * max(abs(k0), 1.0):
        raise ConfigError(f"k0={k0} is not on the k-grid")
    prof = amplitude * gaussian_profile(grid.nodes, width=width, odd=odd)
    f.modes[j] = prof
    f.modes[len(f.k_values) - 1 - j] = np.conj(prof)
    return f


def random_bump_params(rng: np.random.Generator, n_bumps: int = 3,
                       center_span: float = 2.0, sigma_range=(0.6, 1.1),
                       freq_max: float = 5.0):
    """Parameters of a random smooth boundary-vanishing state: complex
    Gaussian bumps with oscillatory modulation.  freq_max controls how hard
    the state leans on the grid resolution; the same parameters can be
    evaluated on grids of different size (refinement checks)."""
    return [
        (rng.standard_normal() + 1j * rng.standard_normal(),
         rng.uniform(-center_span, center_span),
         rng.uniform(*sigma_range),
         rng.uniform(0.0, freq_max))
        for _ in range(n_bumps)
    ]


def eval_bumps(params, y: np.ndarray) -> np.ndarray:
    om = np.zeros(len(y), dtype=complex)
    for c, y0, sig, b in params:
        om += c * np.exp(-((y - y0) ** 2) / (2 * sig**2)) * np.exp(1j * b * y)
    om[0] = 0.0
    om[-1] = 0.0
    return om


def random_localized_state(grid: Grid1D, rng: np.random.Generator,
                           n_bumps: int = 3, center_span: float = 2.0,
                           sigma_range=(0.6, 1.1), freq_max: float = 5.0) -> np.ndarray:
    return eval_bumps(
        random_bump_params(rng, n_bumps=n_bumps, center_span=center_span,
                           sigma_range=sigma_range, freq_max=freq_max),
        grid.nodes)


def eval_stream_localized(params, y: np.ndarray) -> np.ndarray:
    """omega = (d^2/dy^2 - 1) phi for the bump cocktail phi.

    The unit-frequency stream function of such a state is phi itself, so its
    tails decay like the bumps rather than like e^{-|y|}; identity checks on
    the truncated interval then see no stream-truncation floor at |k| ~ 1."""
    om = np.zeros(len(y), dtype=complex)
    for c, y0, sig, b in params:
        g1 = -(y - y0) / sig**2 + 1j * b
        g2 = -1.0 / sig**2
        phi = c * np.exp(-((y - y0) ** 2) / (2 * sig**2)) * np.exp(1j * b * y)
        om += (g1 * g1 + g2 - 1.0) * phi
    om[0] = 0.0
    om[-1] = 0.0
    return om
