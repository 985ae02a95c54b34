"""Weighted energy and dissipation functionals, the time-derivative
identities behind them, the empirical decay-inequality constant, and the
global (k-integrated) energies with their embedding diagnostics.

Time derivatives are always evaluated spatially: the generator expression

    L = -i k y^2 w + 2 i k psi + nu (d^2/dy^2 - k^2) w

is substituted for dw/dt, so identity residuals carry no time-stepping
error.  Residuals are normalized by the sum of the absolute values of every
term on both sides, making them scale invariant; 0/0 is reported as 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_solve

from .errors import ConfigError, NumericalError
from .grid import (Grid1D, antiderivative_stream, diff_y, inner, norm_sq,
                   solve_poisson)
from .multipliers import (EnergyConstants, MultiplierSet, bracket,
                          epsilon_weights, eval_multipliers,
                          multiplier_arrays, time_weight_M)
from .state import Field, ModeState


@dataclass(frozen=True)
class StreamData:
    """Stream function of a mode: psi (None only for the k=0 running-integral
    velocity convention) and d(psi)/dy."""

    psi: np.ndarray | None
    dpsi: np.ndarray
    mean_flag: bool = False


def _dirichlet_solve(vec: np.ndarray, k: float, grid: Grid1D) -> np.ndarray:
    # at k=0 this is the k->0 limit of the truncated-interval solve, which
    # keeps the k-integrands of the global functionals continuous at k=0
    # (the running-integral velocity convention is reserved for the
    # nonlinear transfer)
    v = np.asarray(vec, dtype=complex)
    if not np.all(np.isfinite(v)):
        raise NumericalError("non-finite right-hand side in the k=0 stream solve")
    psi = np.zeros(grid.n_y, dtype=complex)
    psi[1:-1] = lu_solve(grid.helmholtz_lu(k), v[1:-1])
    return psi


def _stream_of(vec: np.ndarray, k: float, grid: Grid1D) -> StreamData:
    psi = solve_poisson(vec, k, grid) if k != 0 else _dirichlet_solve(vec, 0.0, grid)
    return StreamData(psi=psi, dpsi=diff_y(psi, grid))


def stream_function(state: ModeState, grid: Grid1D) -> StreamData:
    return _stream_of(state.omega, state.k, grid)


def velocity_stream(state: ModeState, grid: Grid1D) -> StreamData:
    """k=0 transfer velocity: d(psi_0)/dy as the running integral of the
    vorticity, zero at y = -L (the advecting velocity convention)."""
    if state.k != 0:
        return stream_function(state, grid)
    dpsi, flag = antiderivative_stream(state.omega, grid)
    return StreamData(psi=None, dpsi=dpsi, mean_flag=flag)


def grad_psi_sq(stream: StreamData, k: float, grid: Grid1D) -> float:
    """|nabla_k psi|_2^2; at k=0 only the d/dy part exists."""
    out = norm_sq(stream.dpsi, grid)
    if stream.psi is not None:
        out += (k * k) * norm_sq(stream.psi, grid)
    return out


def apply_L(state: ModeState, grid: Grid1D, stream: StreamData) -> np.ndarray:
    """Linear generator value at the state (spatial, no time stepping)."""
    k, nu, om = state.k, state.nu, state.omega
    y = grid.nodes
    L = -1j * k * (y * y) * om + nu * (grid.diff2 @ om - (k * k) * om)
    if k != 0:
        L = L + 2j * k * stream.psi
    return L


@dataclass(frozen=True)
class EnergyBreakdown:
    """Itemized weighted energy and dissipation of one mode."""

    e_terms: dict
    d_terms: dict

    @property
    def E_total(self) -> float:
        return float(sum(self.e_terms.values()))

    @property
    def D_total(self) -> float:
        return float(sum(self.d_terms.values()))


def _breakdown(state: ModeState, stream: StreamData, constants: EnergyConstants,
               mult: MultiplierSet, grid: Grid1D) -> EnergyBreakdown:
    k = state.k
    om = state.omega
    dom = diff_y(om, grid)
    lap = grid.diff2 @ om - (k * k) * om
    y = grid.nodes
    n_om = norm_sq(om, grid)
    n_dom = norm_sq(dom, grid)
    n_grad = (k * k) * n_om + n_dom
    n_yom = norm_sq(y * om, grid)
    n_ygrad = (k * k) * n_yom + norm_sq(y * dom, grid)
    n_lap = norm_sq(lap, grid)
    n_dpsi = norm_sq(stream.dpsi, grid)
    n_gradpsi = grad_psi_sq(stream, k, grid)
    cross = np.real(inner(1j * k * y * om, dom, grid))
    ca, cb, cg = constants.c_alpha, constants.c_beta, constants.c_gamma
    e = {
        "omega": 0.5 * n_om,
        "grad": 0.5 * ca * mult.alpha * n_grad,
        "cross": 2.0 * cb * mult.beta * cross,
        "weight": 0.5 * cg * mult.gamma * (n_yom + 2.0 * n_gradpsi),
    }
    nu = state.nu
    d = {
        "visc_omega": cg * mult.gamma * nu * n_om,
        "grad": nu * n_grad,
        "lap": ca * mult.alpha * nu * n_lap,
        "y_omega": 4.0 * cb * mult.beta * (k * k) * n_yom,
        "y_grad": cg * mult.gamma * nu * n_ygrad,
        "psi": 8.0 * cb * mult.beta * (k * k) * n_dpsi,
    }
    return EnergyBreakdown(e_terms=e, d_terms=d)


def energy_Ek(state: ModeState, stream: StreamData, constants: EnergyConstants,
              mult: MultiplierSet, grid: Grid1D) -> EnergyBreakdown:
    constants.validate()
    return _breakdown(state, stream, constants, mult, grid)


def dissipation_Dk(state: ModeState, stream: StreamData, constants: EnergyConstants,
                   mult: MultiplierSet, grid: Grid1D) -> EnergyBreakdown:
    constants.validate()
    return _breakdown(state, stream, constants, mult, grid)


def energy_derivative(state: ModeState, grid: Grid1D, stream: StreamData,
                      constants: EnergyConstants, mult: MultiplierSet) -> float:
    """dE/dt evaluated spatially through the generator expression."""
    k = state.k
    om = state.omega
    y = grid.nodes
    L = apply_L(state, grid, stream)
    dom = diff_y(om, grid)
    dL = diff_y(L, grid)
    sL = _stream_of(L, k, grid)
    ca, cb, cg = constants.c_alpha, constants.c_beta, constants.c_gamma
    d_omega = np.real(inner(L, om, grid))
    d_grad = (k * k) * np.real(inner(L, om, grid)) + np.real(inner(dL, dom, grid))
    d_cross = (np.real(inner(1j * k * y * L, dom, grid))
               + np.real(inner(1j * k * y * om, dL, grid)))
    d_yom = np.real(inner(y * L, y * om, grid))
    d_psi = np.real(inner(sL.dpsi, stream.dpsi, grid))
    if stream.psi is not None:
        d_psi += (k * k) * np.real(inner(sL.psi, stream.psi, grid))
    return float(d_omega + ca * mult.alpha * d_grad + 2 * cb * mult.beta * d_cross
                 + cg * mult.gamma * (d_yom + 2.0 * d_psi))


@dataclass(frozen=True)
class EquivalenceRatio:
    e_total: float
    comparison: float       # |w|^2 + alpha |grad w|^2 + gamma |y w|^2 + gamma |dpsi|^2
    ratio: float


def check_equivalence(state: ModeState, stream: StreamData,
                      constants: EnergyConstants, mult: MultiplierSet,
                      grid: Grid1D) -> EquivalenceRatio:
    bd = _breakdown(state, stream, constants, mult, grid)
    om = state.omega
    dom = diff_y(om, grid)
    comp = (norm_sq(om, grid)
            + mult.alpha * ((state.k**2) * norm_sq(om, grid) + norm_sq(dom, grid))
            + mult.gamma * norm_sq(grid.nodes * om, grid)
            + mult.gamma * norm_sq(stream.dpsi, grid))
    if comp == 0.0:
        raise ConfigError("equivalence ratio undefined for the zero state")
    return EquivalenceRatio(e_total=bd.E_total, comparison=comp,
                            ratio=bd.E_total / comp)


def _residual(lhs_terms, rhs_terms) -> float:
    lhs = sum(lhs_terms)
    rhs = sum(rhs_terms)
    norm = sum(abs(x) for x in lhs_terms) + sum(abs(x) for x in rhs_terms)
    if norm == 0.0:
        return 0.0
    return abs(lhs - rhs) / norm


def verify_identities(state: ModeState, grid: Grid1D) -> np.ndarray:
    """Residuals of the five time-derivative identities, in order:
    d|w|^2, d|grad w|^2, d(cross), d|y w|^2, d|grad psi|^2."""
    k, nu = state.k, state.nu
    om = state.omega
    y = grid.nodes
    stream = stream_function(state, grid)
    L = apply_L(state, grid, stream)
    dom = diff_y(om, grid)
    dL = diff_y(L, grid)
    lap = grid.diff2 @ om - (k * k) * om
    sL = _stream_of(L, k, grid)
    n_om = norm_sq(om, grid)
    n_grad = (k * k) * n_om + norm_sq(dom, grid)
    res = np.zeros(5)

    res[0] = _residual([2 * np.real(inner(L, om, grid))], [-2 * nu * n_grad])

    cross = np.real(inner(1j * k * y * om, dom, grid))
    res[1] = _residual(
        [2 * (k * k) * np.real(inner(L, om, grid)), 2 * np.real(inner(dL, dom, grid))],
        [-2 * nu * norm_sq(lap, grid), -4 * cross])

    if k != 0:
        n_dpsi = norm_sq(stream.dpsi, grid)
        res[2] = _residual(
            [np.real(inner(1j * k * y * L, dom, grid)),
             np.real(inner(1j * k * y * om, dL, grid))],
            [-2 * (k * k) * norm_sq(y * om, grid),
             -4 * (k * k) * n_dpsi,
             -2 * nu * np.real(inner(lap, 1j * k * y * dom, grid))])
        cross_psi = np.real(inner(1j * k * y * stream.psi, stream.dpsi, grid))
    else:
        cross_psi = 0.0

    n_ygrad = (k * k) * norm_sq(y * om, grid) + norm_sq(y * dom, grid)
    res[3] = _residual(
        [2 * np.real(inner(y * L, y * om, grid))],
        [2 * nu * n_om, -2 * nu * n_ygrad, -8 * cross_psi])

    lhs9 = [2 * np.real(inner(sL.dpsi, stream.dpsi, grid))]
    if k != 0:
        lhs9.append(2 * (k * k) * np.real(inner(sL.psi, stream.psi, grid)))
    res[4] = _residual(lhs9, [-2 * nu * n_om, 4 * cross_psi])
    return res


def weight_combo_residual(state: ModeState, grid: Grid1D) -> float:
    """Residual of d/dt [|y w|^2 + 2 |grad psi|^2] = -2 nu |w|^2 - 2 nu |y grad w|^2,
    the combination whose right side is nonpositive."""
    k, nu = state.k, state.nu
    om = state.omega
    y = grid.nodes
    stream = stream_function(state, grid)
    L = apply_L(state, grid, stream)
    sL = _stream_of(L, k, grid)
    dom = diff_y(om, grid)
    lhs = [2 * np.real(inner(y * L, y * om, grid)),
           4 * np.real(inner(sL.dpsi, stream.dpsi, grid))]
    if k != 0:
        lhs.append(4 * (k * k) * np.real(inner(sL.psi, stream.psi, grid)))
    n_ygrad = (k * k) * norm_sq(y * om, grid) + norm_sq(y * dom, grid)
    return _residual(lhs, [-2 * nu * norm_sq(om, grid), -2 * nu * n_ygrad])


@dataclass(frozen=True)
class EnergySample:
    """One trajectory sample of the per-mode functionals."""

    t: float
    E: float
    D: float
    dEdt: float
    lam: float


def mode_energy_sample(state: ModeState, grid: Grid1D,
                       constants: EnergyConstants) -> EnergySample:
    mult = eval_multipliers(state.k, state.nu)
    stream = stream_function(state, grid)
    bd = _breakdown(state, stream, constants, mult, grid)
    dEdt = energy_derivative(state, grid, stream, constants, mult)
    return EnergySample(t=state.t, E=bd.E_total, D=bd.D_total, dEdt=dEdt,
                        lam=mult.lam)


@dataclass(frozen=True)
class CStarReport:
    c_star: float
    n_used: int
    n_skipped: int


def check_energy_inequality(samples, skip_rel: float = 1e-16) -> CStarReport:
    """Empirical c* = min over samples of -dE/dt / (4 D + 4 lambda E).

    Samples whose energy has collapsed below skip_rel times the initial
    energy are excluded: at that depth the state amplitude is within a few
    digits of accumulated round-off and the ratio is no longer meaningful.
    An empty or fully degenerate trajectory raises."""
    samples = list(samples)
    if not samples:
        raise ConfigError("empty trajectory")
    E0 = samples[0].E
    ratios = []
    skipped = 0
    for s in samples:
        denom = 4.0 * (s.D + s.lam * s.E)
        if s.E <= skip_rel * E0 or denom <= 0.0:
            skipped += 1
            continue
        ratios.append(-s.dEdt / denom)
    if not ratios:
        raise ConfigError("no usable samples (all below the degeneracy floor)")
    return CStarReport(c_star=float(min(ratios)), n_used=len(ratios),
                       n_skipped=skipped)


# ---------------------------------------------------------------------------
# global (k-integrated) energies
# ---------------------------------------------------------------------------

def trapezoid_k(values: np.ndarray, delta_k: float) -> float:
    """Trapezoid rule on the uniform k-grid."""
    v = np.asarray(values, dtype=float)
    return float(delta_k * (v.sum() - 0.5 * (v[0] + v[-1])))


@dataclass
class GlobalEnergies:
    """Snapshot of the k-integrated functionals at one time."""

    t: float
    e1: float
    e2: float
    d_tilde: float
    per_k_e2: np.ndarray      # 0.5 |y w|^2 + |grad psi|^2 per mode
    per_k_d2: np.ndarray      # nu (|w|^2 + |y grad w|^2) per mode
    per_k_E: np.ndarray
    per_k_D: np.ndarray
    weight: np.ndarray        # <c lam t>^{2J} / M * <k>^{2m}
    nl_budget: object | None = None

    @property
    def e_total(self) -> float:
        return self.e1 + self.e2


def field_streams(f: Field, grid: Grid1D):
    return [stream_function(f.mode(j), grid) for j in range(f.n_k)]


def global_energy(f: Field, t: float, constants: EnergyConstants, grid: Grid1D,
                  streams=None) -> GlobalEnergies:
    constants.validate()
    if streams is None:
        streams = field_streams(f, grid)
    alpha, beta, gamma, lam = multiplier_arrays(f.k_values, f.nu)
    n_k = f.n_k
    E = np.zeros(n_k)
    D = np.zeros(n_k)
    e2 = np.zeros(n_k)
    d2 = np.zeros(n_k)
    for j in range(n_k):
        st = f.mode(j)
        mult = MultiplierSet(alpha=alpha[j], beta=beta[j], gamma=gamma[j], lam=lam[j])
        bd = _breakdown(st, streams[j], constants, mult, grid)
        E[j] = bd.E_total
        D[j] = bd.D_total
        y = grid.nodes
        n_yom = norm_sq(y * st.omega, grid)
        e2[j] = 0.5 * n_yom + grad_psi_sq(streams[j], st.k, grid)
        dom = diff_y(st.omega, grid)
        n_ygrad = (st.k**2) * n_yom + norm_sq(y * dom, grid)
        d2[j] = f.nu * (norm_sq(st.omega, grid) + n_ygrad)
    u = constants.c * lam * t
    M = time_weight_M(f.k_values, f.nu, constants.c, constants.J, t)
    W = (1.0 + u * u) ** constants.J / M * bracket(f.k_values) ** (2 * constants.m)
    return GlobalEnergies(
        t=t,
        e1=trapezoid_k(W * E, f.delta_k),
        e2=float(e2.max()) if n_k else 0.0,
        d_tilde=trapezoid_k(W * D, f.delta_k),
        per_k_e2=e2, per_k_d2=d2, per_k_E=E, per_k_D=D, weight=W)


def epsilon_norm(f: Field, t: float, nu: float, constants: EnergyConstants,
                 grid: Grid1D, streams=None):
    """Six-term size functional; at t=0 it is the admissible-data size, at
    t>0 the same expression with the <c lambda t>^J growth factor on the
    four integrated terms.  Returns (total, components)."""
    constants.validate()
    if streams is None:
        streams = field_streams(f, grid)
    w1, w2, w3, w4, _, _ = epsilon_weights(f.k_values, nu, constants.m)
    _, _, _, lam = multiplier_arrays(f.k_values, nu)
    tw = bracket(constants.c * lam * t) ** constants.J
    n_k = f.n_k
    sq = np.zeros((4, n_k))
    sup5 = np.zeros(n_k)
    sup6 = np.zeros(n_k)
    for j in range(n_k):
        st = f.mode(j)
        om = st.omega
        dom = diff_y(om, grid)
        sq[0, j] = norm_sq(om, grid)
        sq[1, j] = (st.k**2) * sq[0, j] + norm_sq(dom, grid)
        sq[2, j] = norm_sq(grid.nodes * om, grid)
        sq[3, j] = norm_sq(streams[j].dpsi, grid)
        sup5[j] = np.sqrt(sq[2, j])
        sup6[j] = np.sqrt(grad_psi_sq(streams[j], st.k, grid))
    comps = [
        np.sqrt(trapezoid_k((tw * w1) ** 2 * sq[0], f.delta_k)),
        np.sqrt(trapezoid_k((tw * w2) ** 2 * sq[1], f.delta_k)),
        np.sqrt(trapezoid_k((tw * w3) ** 2 * sq[2], f.delta_k)),
        np.sqrt(trapezoid_k((tw * w4) ** 2 * sq[3], f.delta_k)),
        float(sup5.max()),
        float(sup6.max()),
    ]
    return float(sum(comps)), comps


@dataclass
class RunningIntegrals:
    """Trapezoid-in-time accumulators shared by the global experiments."""

    t: float | None = None
    d1: float = 0.0
    per_k_d2: np.ndarray | None = None
    stream_inf_sq: float = 0.0
    _prev: dict = field(default_factory=dict, repr=False)

    def update(self, t: float, d_tilde: float, per_k_d2: np.ndarray,
               psi_inf_integral: float):
        if self.t is None:
            self.per_k_d2 = np.zeros_like(per_k_d2)
        else:
            h = t - self.t
            self.d1 += 0.5 * h * (self._prev["d_tilde"] + d_tilde)
            self.per_k_d2 += 0.5 * h * (self._prev["per_k_d2"] + per_k_d2)
            self.stream_inf_sq += 0.5 * h * (self._prev["psi_inf"] ** 2
                                          + psi_inf_integral**2)
        self.t = t
        self._prev = {"d_tilde": d_tilde, "per_k_d2": per_k_d2.copy(),
                      "psi_inf": psi_inf_integral}

    @property
    def d2(self) -> float:
        if self.per_k_d2 is None:
            return 0.0
        return float(self.per_k_d2.max())

    @property
    def d_total(self) -> float:
        return self.d1 + self.d2


def _grad_inf(vec: np.ndarray, dvec: np.ndarray, k: float) -> float:
    return float(np.max(np.sqrt((k * k) * np.abs(vec) ** 2 + np.abs(dvec) ** 2)))


def check_embedding_ratios(f: Field, t: float, constants: EnergyConstants,
                           grid: Grid1D, glob: GlobalEnergies,
                           running: RunningIntegrals, streams=None):
    """LHS/RHS ratios of the four sup-norm embedding estimates.

    Zero-over-zero ratios are reported as 0.0 with flagged=True entries in
    the companion list."""
    nu = f.nu
    if streams is None:
        streams = field_streams(f, grid)
    n_k = f.n_k
    grad_om_inf = np.zeros(n_k)
    grad_psi_inf = np.zeros(n_k)
    for j in range(n_k):
        st = f.mode(j)
        dom = diff_y(st.omega, grid)
        grad_om_inf[j] = _grad_inf(st.omega, dom, st.k)
        psi = streams[j].psi if streams[j].psi is not None else np.zeros(grid.n_y)
        grad_psi_inf[j] = _grad_inf(psi, streams[j].dpsi, st.k)
    l1 = trapezoid_k(grad_om_inf, f.delta_k)
    l2 = trapezoid_k(grad_psi_inf, f.delta_k)
    _, _, _, lam = multiplier_arrays(f.k_values, nu)
    u = constants.c * lam * t
    w4 = (1.0 + u * u) ** constants.J * bracket(f.k_values) ** (2 * constants.m) \
        * np.abs(f.k_values)
    l4 = trapezoid_k(w4 * grad_psi_inf**2, f.delta_k)
    l3 = np.sqrt(max(running.stream_inf_sq, 0.0))

    rhs = [nu ** (-5.0 / 6.0) * np.sqrt(max(glob.d_tilde, 0.0)),
           np.sqrt(max(glob.e_total, 0.0)),
           nu ** (-2.0 / 3.0) * np.sqrt(max(running.d_total, 0.0)),
           nu ** (-1.0 / 3.0) * glob.d_tilde]
    lhs = [l1, l2, l3, l4]
    ratios, flagged = [], []
    for a, b in zip(lhs, rhs):
        if b == 0.0:
            ratios.append(0.0)
            flagged.append(a != 0.0)
        else:
            ratios.append(a / b)
            flagged.append(False)
    return ratios, flagged, {"psi_inf_integral": l2}
