"""Chebyshev collocation grid on [-L_y, L_y] with the operators built on it.

The y-line is truncated to a symmetric interval with homogeneous Dirichlet
conditions; all states handled here are localized well inside the interval,
so the truncation error is exponentially small and is monitored separately
(see ModeState.boundary_violation).

Nodes are Chebyshev-Gauss-Lobatto points stored in ascending order,
quadrature is Clenshaw-Curtis, differentiation is the standard dense
collocation matrix (exact on polynomials up to degree n_y - 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct
from scipy.linalg import lu_factor, lu_solve

from .errors import ConfigError, NumericalError, ShapeError


def _cheb_matrix(N: int):
    """Nodes x_j = cos(pi j / N) on [-1, 1] (descending) and the derivative matrix."""
    j = np.arange(N + 1)
    x = np.cos(np.pi * j / N)
    c = np.hstack([2.0, np.ones(N - 1), 2.0]) * (-1.0) ** j
    X = np.tile(x, (N + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def _clencurt_weights(N: int):
    """Clenshaw-Curtis weights for the nodes cos(pi j / N) on [-1, 1]."""
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    ii = np.arange(1, N)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N**2 - 1)
        for m in range(1, N // 2):
            v -= 2.0 * np.cos(2 * m * theta[ii]) / (4 * m**2 - 1)
        v -= np.cos(N * theta[ii]) / (N**2 - 1)
    else:
        w[0] = w[N] = 1.0 / N**2
        for m in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * m * theta[ii]) / (4 * m**2 - 1)
    w[ii] = 2.0 * v / N
    return w


@dataclass(frozen=True)
class Grid1D:
    """Collocation grid in y: nodes ascending in [-L_y, L_y], Dirichlet ends."""

    half_width: float
    n_y: int
    nodes: np.ndarray
    quad_weights: np.ndarray
    diff: np.ndarray          # d/dy at the nodes
    diff2: np.ndarray         # d^2/dy^2 at the nodes
    boundary_condition: str = "dirichlet"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def interior(self) -> slice:
        return slice(1, self.n_y - 1)

    def helmholtz_lu(self, k: float):
        """LU factors of (d^2/dy^2 - k^2) restricted to interior nodes."""
        key = ("lu", float(abs(k)))
        if key not in self._cache:
            n = self.n_y
            H = self.diff2[1:-1, 1:-1] - (k * k) * np.eye(n - 2)
            self._cache[key] = lu_factor(H)
        return self._cache[key]

    def _antideriv_eval_matrix(self):
        # cos(m * theta_j) table for evaluating a Chebyshev coefficient vector
        # of length n_y + 1 at the nodes (standard descending order)
        key = "antid_eval"
        if key not in self._cache:
            N = self.n_y - 1
            theta = np.pi * np.arange(self.n_y) / N
            self._cache[key] = np.cos(np.outer(theta, np.arange(self.n_y + 1)))
        return self._cache[key]


def build_grid(L_y: float, n_y: int) -> Grid1D:
    """Chebyshev-Gauss-Lobatto grid mapped to [-L_y, L_y] with CC weights."""
    if n_y < 8:
        raise ConfigError(f"n_y={n_y} too small, need at least 8 nodes")
    if L_y <= 0:
        raise ConfigError(f"L_y={L_y} must be positive")
    N = n_y - 1
    x, Dstd = _cheb_matrix(N)
    nodes = -L_y * x                 # ascending
    D = -Dstd / L_y                  # chain rule for y = -L_y x
    D2 = D @ D
    w = L_y * _clencurt_weights(N)
    return Grid1D(half_width=float(L_y), n_y=int(n_y), nodes=nodes,
                  quad_weights=w, diff=D, diff2=D2)


def _check_len(f, grid: Grid1D):
    if len(f) != grid.n_y:
        raise ShapeError(f"array length {len(f)} != n_y {grid.n_y}")


def diff_y(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Spectral collocation derivative of the sampled function."""
    _check_len(f, grid)
    return grid.diff @ f


def laplacian_k(f: np.ndarray, k: float, grid: Grid1D) -> np.ndarray:
    """d^2 f/dy^2 - k^2 f at the nodes."""
    _check_len(f, grid)
    return grid.diff2 @ f - (k * k) * f


def solve_poisson(omega: np.ndarray, k: float, grid: Grid1D) -> np.ndarray:
    """Stream function: (d^2/dy^2 - k^2) psi = omega, psi(+-L_y) = 0.

    k must be nonzero; at k = 0 the problem on the line is not well posed
    with decay, use antiderivative_stream for the velocity there.
    """
    _check_len(omega, grid)
    if k == 0:
        raise ConfigError("solve_poisson requires k != 0; use antiderivative_stream at k=0")
    om = np.asarray(omega, dtype=complex)
    if not np.all(np.isfinite(om)):
        raise NumericalError(f"non-finite right-hand side in the Helmholtz solve at k={k}")
    lu = grid.helmholtz_lu(k)
    psi = np.zeros_like(om)
    psi[1:-1] = lu_solve(lu, om[1:-1])
    if not np.all(np.isfinite(psi)):
        raise NumericalError(f"Helmholtz solve produced non-finite values at k={k}")
    return psi


def cheb_coefficients(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Chebyshev coefficients a_m with f(y) = sum a_m T_m(y / L_y) (plain sum)."""
    _check_len(f, grid)
    N = grid.n_y - 1
    g = np.asarray(f)[::-1]  # standard descending cos ordering
    if np.iscomplexobj(g):
        a = dct(g.real, type=1) + 1j * dct(g.imag, type=1)
    else:
        a = dct(g, type=1).astype(float)
    a = a / N
    a[0] /= 2.0
    a[-1] /= 2.0
    return a


def antiderivative_stream(omega0: np.ndarray, grid: Grid1D,
                          mean_tolerance: float = 1e-10):
    """Velocity component d(psi_0)/dy as the running integral of omega_0.

    Integration constant fixed by d(psi_0)/dy = 0 at y = -L_y.  Returns
    (values, mean_flag); mean_flag is True when |integral of omega_0| is
    large enough that the result cannot decay at +L_y.
    """
    _check_len(omega0, grid)
    a = cheb_coefficients(omega0, grid)
    n = grid.n_y
    ae = np.concatenate([a, np.zeros(2, dtype=a.dtype)])
    b = np.zeros(n + 1, dtype=complex)
    m = np.arange(2, n + 1)
    b[2:] = (ae[1:n] - ae[3:n + 2]) / (2 * m)
    b[1] = ae[0] - ae[2] / 2.0
    M = grid._antideriv_eval_matrix()
    vals = (M @ b)[::-1]           # back to ascending order
    vals = grid.half_width * (vals - vals[0])
    total = np.sum(grid.quad_weights * omega0)
    scale = np.max(np.abs(omega0)) * 2 * grid.half_width + 1e-300
    mean_flag = bool(abs(total) > mean_tolerance * scale)
    return vals, mean_flag


def weighted_norm(f: np.ndarray, weight_power: int, grid: Grid1D) -> float:
    """(sum w_i y_i^(2a) |f_i|^2)^(1/2) for a in {0, 1}."""
    _check_len(f, grid)
    if weight_power not in (0, 1):
        raise ConfigError(f"weight_power must be 0 or 1, got {weight_power}")
    yw = grid.nodes ** (2 * weight_power) if weight_power else 1.0
    return float(np.sqrt(np.sum(grid.quad_weights * yw * np.abs(f) ** 2).real))


def inner(f: np.ndarray, g: np.ndarray, grid: Grid1D) -> complex:
    """Quadrature pairing sum w_i f_i conj(g_i)."""
    _check_len(f, grid)
    _check_len(g, grid)
    return complex(np.sum(grid.quad_weights * np.asarray(f) * np.conj(g)))


def norm_sq(f: np.ndarray, grid: Grid1D) -> float:
    return float(np.sum(grid.quad_weights * np.abs(f) ** 2).real)


def grad_norm_sq(f: np.ndarray, k: float, grid: Grid1D) -> float:
    """|nabla_k f|_2^2 = |k f|_2^2 + |df/dy|_2^2."""
    return (k * k) * norm_sq(f, grid) + norm_sq(diff_y(f, grid), grid)
