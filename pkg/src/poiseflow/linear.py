"""Per-mode linear generator and its stiffly stable time stepping.

The generator acts on interior nodes (Dirichlet rows eliminated):

    A w = -i k y^2 w + 2 i k (d^2/dy^2 - k^2)^{-1} w + nu (d^2/dy^2 - k^2) w

The inverse in the stream term is replaced by its Hermitian part in the
quadrature inner product; the continuum inverse is self-adjoint, the strong
collocation inverse misses that by a spectrally small skew defect, and
symmetrizing removes it.  This makes the skew part of A exactly energy
neutral, so the nu -> 0 stepping conserves the L2 norm to round-off.

Optionally the exact x-diffusion factor e^{-nu k^2 t} can be removed from
the evolution (remove_x_diffusion); deep-decay experiments use this to keep
the slow shear-induced decay inside double-precision range.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .grid import Grid1D
from .multipliers import decay_rate
from .state import ModeState


@dataclass
class Generator:
    k: float
    nu: float
    grid: Grid1D
    matrix: np.ndarray                  # dense complex, interior x interior
    remove_x_diffusion: bool = False
    _props: dict = field(default_factory=dict, repr=False)

    def apply(self, omega: np.ndarray) -> np.ndarray:
        """A omega on the full grid (boundary entries zero)."""
        out = np.zeros(self.grid.n_y, dtype=complex)
        out[1:-1] = self.matrix @ np.asarray(omega, dtype=complex)[1:-1]
        return out

    def propagator(self, dt: float) -> np.ndarray:
        """(I - dt/2 A)^{-1} (I + dt/2 A), cached per dt."""
        key = float(dt)
        if key not in self._props:
            n = self.matrix.shape[0]
            I = np.eye(n)
            try:
                B = np.linalg.solve(I - 0.5 * dt * self.matrix,
                                    I + 0.5 * dt * self.matrix)
            except np.linalg.LinAlgError as e:
                raise NumericalError(f"implicit solve failed at k={self.k}: {e}") from e
            self._props[key] = B
        return self._props[key]

    def inject(self, dt: float, rhs: np.ndarray) -> np.ndarray:
        """(I - dt/2 A)^{-1} rhs for the IMEX corrector, interior vectors."""
        key = ("inj", float(dt))
        if key not in self._props:
            n = self.matrix.shape[0]
            self._props[key] = np.linalg.inv(np.eye(n) - 0.5 * dt * self.matrix)
        return self._props[key] @ rhs


def symmetrized_inverse(H: np.ndarray, w_int: np.ndarray) -> np.ndarray:
    """Hermitian part (in the weighted inner product) of H^{-1}.

    Entrywise (W^{-1} P^T W)[i,j] = P[j,i] w[j] / w[i]."""
    P = np.linalg.inv(H)
    return 0.5 * (P + (P.T * w_int[None, :]) / w_int[:, None])


def build_generator(k: float, nu: float, grid: Grid1D,
                    remove_x_diffusion: bool = False) -> Generator:
    if not (0.0 < nu < 1.0) and nu != 0.0:
        raise ConfigError(f"nu must lie in (0,1) (or be exactly 0 for diagnostics), got {nu}")
    n = grid.n_y
    yi = grid.nodes[1:-1]
    Dint = grid.diff2[1:-1, 1:-1]
    kk2 = 0.0 if remove_x_diffusion else k * k
    A = nu * (Dint - kk2 * np.eye(n - 2)) - 1j * k * np.diag(yi * yi)
    if k != 0:
        H = Dint - (k * k) * np.eye(n - 2)
        A = A + 2j * k * symmetrized_inverse(H, grid.quad_weights[1:-1])
    if not np.all(np.isfinite(A)):
        raise NumericalError(f"generator assembly produced non-finite entries at k={k}")
    return Generator(k=float(k), nu=float(nu), grid=grid, matrix=A,
                     remove_x_diffusion=remove_x_diffusion)


def default_dt(k: float, nu: float) -> float:
    """min(0.1 / max(lambda_k, nu), 0.05 / (nu k^2 + 1))."""
    lam = float(decay_rate(k, nu)) if nu > 0 else 0.0
    a = 0.1 / max(lam, nu) if max(lam, nu) > 0 else np.inf
    b = 0.05 / (nu * k * k + 1.0)
    return float(min(a, b))


def step_linear(state: ModeState, gen: Generator, dt: float) -> ModeState:
    """Implicit midpoint update; second order, unconditionally stable."""
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    if state.k != gen.k:
        raise ConfigError(f"state.k={state.k} does not match generator k={gen.k}")
    B = gen.propagator(dt)
    om = np.asarray(state.omega, dtype=complex).copy()
    om[1:-1] = B @ om[1:-1]
    om[0] = 0.0
    om[-1] = 0.0
    if not np.all(np.isfinite(om)):
        raise NumericalError(f"linear step produced non-finite values at t={state.t}")
    return state.with_omega(om, t=state.t + dt)


def evolve(state: ModeState, gen: Generator, T: float, dt: float,
           observer=None, stride: int = 1, stop_when=None):
    """Repeated implicit-midpoint steps over [0, T].

    The observer is invoked on the initial state and after every stride-th
    step; its return values are collected.  stop_when(state) may end the run
    early (the trajectory is then shorter than T).  Returns
    (final_state, samples).
    """
    if T < 0:
        raise ConfigError(f"T must be nonnegative, got {T}")
    samples = []
    if observer is not None:
        samples.append(observer(state))
    if T == 0:
        return state, samples
    n_steps = int(np.floor(T / dt + 1e-9))
    rem = T - n_steps * dt
    for i in range(1, n_steps + 1):
        state = step_linear(state, gen, dt)
        if observer is not None and i % stride == 0:
            samples.append(observer(state))
        if stop_when is not None and stop_when(state):
            return state, samples
    if rem > 1e-12 * max(T, 1.0):
        state = step_linear(state, gen, rem)
    return state, samples
