"""Experiment orchestration: configuration parsing, the six experiment
kinds, and result persistence (CSV + SVG + manifest).

Configuration is one JSON document.  Grid resolution and domain size can be
fixed or derived per cell ("auto"): the critical-layer width (nu/|k|)^(1/4)
sets the node density, and the heat-spread width sets the half-width so the
boundary-localization check keeps holding on long horizons.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .energy import (check_energy_inequality, check_equivalence, global_energy,
                     mode_energy_sample, stream_function, verify_identities)
from .errors import BlowUpError, ConfigError, NumericalError
from .grid import Grid1D, build_grid, norm_sq
from .linear import build_generator, default_dt, evolve
from .multipliers import EnergyConstants, decay_rate, eval_multipliers
from .nonlinear import bootstrap_experiment, make_plan, nonlinear_cfl
from .ratefit import fit_decay_rate, fit_tail_rate, loglog_slope
from .reporting import emit_csv, emit_svg, new_manifest
from .state import (ModeState, eval_bumps, eval_stream_localized,
                    gaussian_field, gaussian_profile, random_bump_params,
                    single_mode_field)

EXPERIMENT_KINDS = ("linear-decay", "verify-identities", "equivalence-band",
                    "rate-sweep", "nonlinear-bootstrap", "threshold-sweep")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "grid": {"L_y": 10.0, "n_y": 128, "auto_resolution": False,
             "points_per_layer": 3.0, "n_y_max": 1400},
    "spectrum": {"K_max": 16.0, "delta_k": 0.25, "dealias_fraction": 2.0 / 3.0},
    "physics": {"nu": 1e-3},
    "constants": {"c_alpha": 0.1, "c_beta": 0.05, "c_gamma": 0.5,
                  "c": 0.01, "J": 1.0, "m": 0.8},
    "time": {"dt": None, "T": None, "observer_stride": 1,
             "samples_target": 200},
    "output_dir": "out",
    "seed": 0,
    "workers": 1,
}


@dataclass
class RunConfig:
    experiment: str
    grid: dict
    spectrum: dict
    physics: dict
    constants_raw: dict
    time: dict
    params: dict
    output_dir: str
    seed: int
    workers: int

    @property
    def constants(self) -> EnergyConstants:
        return EnergyConstants(**self.constants_raw).validate()

    @property
    def nu(self) -> float:
        return float(self.physics["nu"])

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "grid": dict(self.grid),
            "spectrum": dict(self.spectrum),
            "physics": dict(self.physics),
            "constants": dict(self.constants_raw),
            "time": dict(self.time),
            "experiment_params": dict(self.params),
            "output_dir": self.output_dir,
            "seed": self.seed,
            "workers": self.workers,
        }

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _merged(section: str, given: dict) -> dict:
    out = dict(_DEFAULTS[section])
    for key, val in given.items():
        if key not in out:
            raise ConfigError(f"unknown key {key!r} in config section {section!r}")
        out[key] = val
    return out


def parse_config(doc) -> RunConfig:
    """Build a validated RunConfig from a dict or a JSON string."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON config: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    known = {"experiment", "grid", "spectrum", "physics", "constants", "time",
             "experiment_params", "output_dir", "seed", "workers"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    kind = doc.get("experiment")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"experiment must be one of {EXPERIMENT_KINDS}, got {kind!r}")
    cfg = RunConfig(
        experiment=kind,
        grid=_merged("grid", doc.get("grid", {})),
        spectrum=_merged("spectrum", doc.get("spectrum", {})),
        physics=_merged("physics", doc.get("physics", {})),
        constants_raw=_merged("constants", doc.get("constants", {})),
        time=_merged("time", doc.get("time", {})),
        params=dict(doc.get("experiment_params", {})),
        output_dir=str(doc.get("output_dir", _DEFAULTS["output_dir"])),
        seed=int(doc.get("seed", _DEFAULTS["seed"])),
        workers=int(doc.get("workers", _DEFAULTS["workers"])),
    )
    cfg.constants  # validates the six tunables
    nu = cfg.nu
    if not (0.0 < nu < 1.0):
        raise ConfigError(f"nu must lie in (0,1), got {nu}")
    t = cfg.time
    if t["dt"] is not None and t["dt"] <= 0:
        raise ConfigError(f"dt must be positive, got {t['dt']}")
    if t["T"] is not None and t["T"] < 0:
        raise ConfigError(f"T must be nonnegative, got {t['T']}")
    if t["observer_stride"] != "auto" and int(t["observer_stride"]) < 1:
        raise ConfigError("observer_stride must be >= 1 or 'auto'")
    if cfg.grid["n_y"] < 8:
        raise ConfigError(f"n_y={cfg.grid['n_y']} too small")
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text)


# ---------------------------------------------------------------------------
# per-cell grid sizing
# ---------------------------------------------------------------------------

def layer_width(k: float, nu: float) -> float:
    return (nu / abs(k)) ** 0.25 if k != 0 else np.inf


def cell_grid(cfg: RunConfig, k: float, nu: float, T: float,
              data_width: float = 1.0) -> Grid1D:
    """Grid for one (nu, k) cell.

    With auto_resolution the node count tracks the layer width (nu/|k|)^1/4
    and the half-width tracks the diffusive spread of the data over the
    horizon (plus the stream-function extent 1/|k|), so the localization
    check keeps holding for the whole run."""
    g = cfg.grid
    if not g["auto_resolution"]:
        return build_grid(g["L_y"], g["n_y"])
    ell = layer_width(k, nu)
    spread = np.sqrt(data_width**2 + 2 * nu * T)
    L = 6.1 * spread
    if k != 0:
        L = max(L, 8.0 / abs(k))
    if np.isfinite(ell):
        L = max(L, 12 * ell)
    L = min(max(L, 1.0), max(g["L_y"], 64.0))
    scale = min(ell, data_width) if np.isfinite(ell) else data_width
    n = int(np.ceil(g["points_per_layer"] * np.pi * L / scale))
    n = int(min(max(n, g["n_y"] if k == 0 else 96, 96), g["n_y_max"]))
    return build_grid(L, n)


def _mode_data(profile: dict, grid: Grid1D, k: float, nu: float) -> np.ndarray:
    kind = profile.get("kind", "gaussian")
    amp = float(profile.get("amplitude", 1.0))
    width = profile.get("width", 1.0)
    if width == "layer":
        width = layer_width(k, nu)
        if not np.isfinite(width):
            width = 1.0
    width = float(width)
    if kind == "gaussian":
        return amp * gaussian_profile(grid.nodes, width=width, odd=False)
    if kind == "gaussian-odd":
        return amp * gaussian_profile(grid.nodes, width=width, odd=True)
    raise ConfigError(f"unknown mode data profile {kind!r}")


# ---------------------------------------------------------------------------
# linear decay (also the inequality-constant experiment)
# ---------------------------------------------------------------------------

def _pick_stride(cfg: RunConfig, T: float, dt: float) -> int:
    stride = cfg.time["observer_stride"]
    if stride == "auto":
        n_steps = max(1, int(np.floor(T / dt + 1e-9)))
        return max(1, n_steps // int(cfg.time["samples_target"]))
    return int(stride)


def _linear_cell(cfg: RunConfig, k: float, nu: float):
    p = cfg.params
    gauge = bool(p.get("gauge_x_diffusion", False))
    lam = float(decay_rate(k, nu))
    scale = max(lam, nu)
    if cfg.time["T"] is not None:
        T = float(cfg.time["T"])
    else:
        T = float(p.get("T_over_scale", 5.0)) / scale
    profile = p.get("data_profile", {"kind": "gaussian", "amplitude": 1.0})
    width = 1.0 if profile.get("width", 1.0) == "layer" else float(profile.get("width", 1.0))
    grid = cell_grid(cfg, k, nu, T, data_width=width)
    dt = float(cfg.time["dt"]) if cfg.time["dt"] is not None else default_dt(k, nu)
    gen = build_generator(k, nu, grid, remove_x_diffusion=gauge)
    omega0 = _mode_data(profile, grid, k, nu)
    state = ModeState(k=k, nu=nu, t=0.0, omega=omega0)
    constants = cfg.constants
    stride = _pick_stride(cfg, T, dt)
    shift = 2 * nu * k * k if gauge else 0.0
    boundary_flag = False

    def observer(st: ModeState):
        nonlocal boundary_flag
        if st.boundary_violation():
            boundary_flag = True
        return mode_energy_sample(st, grid, constants)

    floor = float(p.get("energy_floor", 1e-17))
    e0 = norm_sq(omega0, grid)

    def stop_when(st: ModeState):
        return norm_sq(st.omega, grid) <= floor * e0

    _, samples = evolve(state, gen, T, dt, observer=observer, stride=stride,
                        stop_when=stop_when)
    cstar = check_energy_inequality(samples)
    rows = [(s.t, s.E, s.D, s.dEdt, shift) for s in samples]
    return {"k": k, "nu": nu, "grid_L": grid.half_width, "grid_n": grid.n_y,
            "dt": dt, "T": T, "gauge_shift": shift, "samples": samples,
            "rows": rows, "c_star": cstar.c_star, "n_used": cstar.n_used,
            "boundary_flag": boundary_flag, "lambda": lam}


def run_linear_decay(cfg: RunConfig, out_dir: str, manifest):
    p = cfg.params
    k_values = [float(k) for k in p.get("k_values", [1.0])]
    nu_values = [float(v) for v in p.get("nu_values", [cfg.nu])]
    cells = []
    for nu in nu_values:
        for k in k_values:
            cells.append(_linear_cell(cfg, k, nu))
    series = []
    summary_cells = []
    for c in cells:
        tag = f"nu{c['nu']:g}_k{c['k']:g}"
        path = os.path.join(out_dir, f"linear_decay_{tag}.csv")
        emit_csv(c["rows"], ["t", "E", "D", "dEdt", "gauge_shift"], path)
        manifest.add_file(path)
        ts = [s.t for s in c["samples"]]
        es = [s.E for s in c["samples"]]
        series.append((ts, es, tag))
        entry = {"nu": c["nu"], "k": c["k"], "c_star": c["c_star"],
                 "lambda": c["lambda"], "grid_n": c["grid_n"],
                 "grid_L": c["grid_L"], "dt": c["dt"], "T": c["T"],
                 "boundary_flag": c["boundary_flag"]}
        if len(es) >= 8 and min(es) > 0:
            fit = fit_decay_rate(ts, es, predicted_rate=4 * c["c_star"] * c["lambda"])
            entry["fitted_rate_gauged"] = fit.rate
            entry["fitted_rate"] = fit.rate + c["gauge_shift"]
        summary_cells.append(entry)
    svg = os.path.join(out_dir, "linear_decay_energy.svg")
    emit_svg(series, svg, ylabel="E_k", title="weighted mode energy")
    manifest.add_file(svg)
    manifest.summary["cells"] = summary_cells
    manifest.summary["min_c_star"] = min(c["c_star"] for c in cells)
    manifest.flags["domain_too_small"] = any(c["boundary_flag"] for c in cells)
    manifest.summary["csv_schema"] = ["t", "E", "D", "dEdt", "gauge_shift"]
    return 0


# ---------------------------------------------------------------------------
# identity verification
# ---------------------------------------------------------------------------

def run_verify_identities(cfg: RunConfig, out_dir: str, manifest):
    p = cfg.params
    n_states = int(p.get("n_states", 100))
    k_values = [float(k) for k in p.get("k_values", [0.0, 1.0, 5.0, 10.0, 40.0])]
    nu_values = [float(v) for v in p.get("nu_values", [1e-1, 1e-2, 1e-3])]
    tol = float(p.get("tolerance", 1e-7))
    freq_max = float(p.get("freq_max", 4.5))
    sigma_range = tuple(p.get("sigma_range", (0.7, 1.1)))
    center_span = float(p.get("center_span", 1.5))
    check_ref = bool(p.get("check_refinement", True))
    rng = np.random.default_rng(cfg.seed)
    params = [random_bump_params(rng, center_span=center_span,
                                 sigma_range=sigma_range, freq_max=freq_max)
              for _ in range(n_states)]
    grids = {cfg.grid["n_y"]: build_grid(cfg.grid["L_y"], cfg.grid["n_y"])}
    if check_ref:
        n2 = 2 * cfg.grid["n_y"]
        grids[n2] = build_grid(cfg.grid["L_y"], n2)
    rows = []
    max_res = {n: 0.0 for n in grids}
    for sid, prm in enumerate(params):
        for n, grid in grids.items():
            om = eval_stream_localized(prm, grid.nodes)
            for nu in nu_values:
                for k in k_values:
                    res = verify_identities(
                        ModeState(k=k, nu=nu, t=0.0, omega=om), grid)
                    max_res[n] = max(max_res[n], float(res.max()))
                    if n == cfg.grid["n_y"]:
                        rows.append((sid, nu, k, *[float(r) for r in res]))
    header = ["state", "nu", "k", "r_dw2", "r_dgrad2", "r_dcross",
              "r_dyw2", "r_dgradpsi2"]
    path = os.path.join(out_dir, "identity_residuals.csv")
    emit_csv(rows, header, path)
    manifest.add_file(path)
    manifest.summary["csv_schema"] = header
    base_n = cfg.grid["n_y"]
    manifest.summary["max_residual"] = max_res[base_n]
    manifest.summary["tolerance"] = tol
    if check_ref:
        n2 = 2 * base_n
        manifest.summary["max_residual_refined"] = max_res[n2]
        manifest.summary["refinement_factor"] = (
            max_res[base_n] / max_res[n2] if max_res[n2] > 0 else np.inf)
    ok = max_res[base_n] <= tol
    manifest.summary["passed"] = bool(ok)
    return 0 if ok else 4


# ---------------------------------------------------------------------------
# equivalence band
# ---------------------------------------------------------------------------

def run_equivalence_band(cfg: RunConfig, out_dir: str, manifest):
    p = cfg.params
    n_states = int(p.get("n_states", 1000))
    k_values = [float(k) for k in p.get("k_values", [0.0, 1.0, 5.0, 10.0, 40.0])]
    nu_values = [float(v) for v in p.get("nu_values", [1e-1, 1e-2, 1e-3])]
    rng = np.random.default_rng(cfg.seed)
    grid = build_grid(cfg.grid["L_y"], cfg.grid["n_y"])
    constants = cfg.constants
    rows = []
    ratios = []
    for sid in range(n_states):
        om = eval_bumps(random_bump_params(rng), grid.nodes)
        nu = nu_values[sid % len(nu_values)]
        k = k_values[sid % len(k_values)]
        st = ModeState(k=k, nu=nu, t=0.0, omega=om)
        eq = check_equivalence(st, stream_function(st, grid), constants,
                               eval_multipliers(k, nu), grid)
        rows.append((sid, nu, k, eq.ratio))
        ratios.append(eq.ratio)
    path = os.path.join(out_dir, "equivalence_ratios.csv")
    emit_csv(rows, ["state", "nu", "k", "ratio"], path)
    manifest.add_file(path)
    manifest.summary["csv_schema"] = ["state", "nu", "k", "ratio"]
    manifest.summary["ratio_min"] = float(min(ratios))
    manifest.summary["ratio_max"] = float(max(ratios))
    manifest.summary["band"] = [float(min(ratios)), float(max(ratios))]
    return 0


# ---------------------------------------------------------------------------
# rate sweep
# ---------------------------------------------------------------------------

def _rate_cell(args) -> dict:
    """One (nu, k) cell of the sweep: gauged evolution, trailing-plateau fit,
    dt halved until the fitted rate is dt-stable."""
    cfg_dict, k, nu = args
    cfg = parse_config(cfg_dict)
    p = cfg.params
    constants = cfg.constants
    lam = float(decay_rate(k, nu))
    if k == 0.0:
        return _rate_cell_heat(cfg, nu)
    depth = float(p.get("depth", 27.6))          # ln of the stopping decay
    rtol_dt = float(p.get("dt_refine_rtol", 0.02))
    max_halvings = int(p.get("max_halvings", 8))
    enh_guess = 2 * 3 * lam / np.sqrt(2.0)
    T_est = depth / enh_guess
    profile = p.get("data_profile",
                    {"kind": "gaussian-odd", "amplitude": 1.0, "width": "layer"})
    width = profile.get("width", "layer")
    data_width = layer_width(k, nu) if width == "layer" else float(width)
    grid = cell_grid(cfg, k, nu, T_est, data_width=data_width)
    gen = build_generator(k, nu, grid, remove_x_diffusion=True)
    omega0 = _mode_data(profile, grid, k, nu)
    stop_rel = float(p.get("stop_rel", 1e-12))

    def run_once(dt):
        state = ModeState(k=k, nu=nu, t=0.0, omega=omega0)
        e0 = norm_sq(omega0, grid)
        ts, es = [0.0], [e0]

        def observer(st):
            if st.t > 0.0:
                ts.append(st.t)
                es.append(norm_sq(st.omega, grid))
            return None

        def stop_when(st):
            return es[-1] <= 0.3 * stop_rel * e0

        T = depth / enh_guess * 3.0
        evolve(state, gen, T, dt, observer=observer, stride=1,
               stop_when=stop_when)
        return np.array(ts), np.array(es)

    dt = float(cfg.time["dt"]) if cfg.time["dt"] is not None else default_dt(k, nu)
    fit_kw = dict(efolds=float(p.get("fit_efolds", 2.0)),
                  rtol=float(p.get("fit_rtol", 0.01)),
                  floor_rel=stop_rel * 10)
    prev = fit_tail_rate(*run_once(dt), **fit_kw)
    halvings = 0
    fit = prev
    for _ in range(max_halvings):
        dt *= 0.5
        halvings += 1
        fit = fit_tail_rate(*run_once(dt), **fit_kw)
        if prev is not None and fit is not None and \
                abs(prev.rate - fit.rate) <= rtol_dt * abs(fit.rate):
            break
        prev = fit
    if fit is None:
        raise NumericalError(f"no stable decay regime found at nu={nu}, k={k}")
    # c* and the decay bound, sampled on the converged trajectory
    state = ModeState(k=k, nu=nu, t=0.0, omega=omega0)
    e0 = norm_sq(omega0, grid)
    samples = []

    def observer2(st):
        samples.append(mode_energy_sample(st, grid, constants))
        return None

    def stop2(st):
        return norm_sq(st.omega, grid) <= 0.3 * stop_rel * e0

    stride = max(1, int(round((fit.window[1] - fit.window[0]) / dt / 60)))
    evolve(state, gen, depth / enh_guess * 3.0, dt, observer=observer2,
           stride=stride, stop_when=stop2)
    cstar = check_energy_inequality(samples)
    ctil = 0.5 * cstar.c_star
    E0 = samples[0].E
    slack = max((np.log(s.E / E0) + 4 * ctil * lam * s.t) for s in samples
                if s.E > 0)
    rate_enh = fit.rate
    return {"nu": nu, "k": k, "lambda": lam, "rate_enhanced": rate_enh,
            "rate_full": rate_enh + 2 * nu * k * k, "dt": dt,
            "halvings": halvings, "grid_n": grid.n_y, "grid_L": grid.half_width,
            "fit_window": list(fit.window), "fit_residual": fit.residual,
            "c_star": cstar.c_star, "predicted_4clam": 4 * cstar.c_star * lam,
            "gronwall_slack": float(slack),
            "gronwall_ok": bool(slack <= np.log(1 + 1e-6))}


def _rate_cell_heat(cfg: RunConfig, nu: float) -> dict:
    """k = 0 column: pure heat decay is algebraic (no uniform exponential
    rate), so the fitted slope over a long horizon falls below the
    wall-mode scale 10 nu / L_y^2 and is reported as 0."""
    T = cfg.time["T"] if cfg.time["T"] is not None else min(50.0 / nu, 1e4)
    grid = cell_grid(cfg, 0.0, nu, T)
    gen = build_generator(0.0, nu, grid)
    state = ModeState(k=0.0, nu=nu, t=0.0,
                      omega=gaussian_profile(grid.nodes))
    if cfg.time["dt"] is not None:
        dt = float(cfg.time["dt"])
    else:
        dt = max(default_dt(0.0, nu), T / 1e4)
    ts, es = [], []

    def observer(st):
        ts.append(st.t)
        es.append(norm_sq(st.omega, grid))
        return None

    evolve(state, gen, T, float(dt), observer=observer,
           stride=_pick_stride(cfg, float(T), float(dt)))
    fit = fit_decay_rate(ts, es, window=(0.5, 1.0))
    floor = 10.0 * nu / cfg.grid["L_y"] ** 2
    rate = 0.0 if fit.rate < floor else fit.rate
    return {"nu": nu, "k": 0.0, "lambda": 0.0, "rate_enhanced": rate,
            "rate_full": rate, "dt": float(dt), "halvings": 0,
            "grid_n": grid.n_y, "grid_L": grid.half_width,
            "fit_window": list(fit.window), "fit_residual": fit.residual,
            "c_star": 0.25, "predicted_4clam": 0.0,
            "gronwall_slack": 0.0, "gronwall_ok": True}


def run_rate_sweep(cfg: RunConfig, out_dir: str, manifest):
    p = cfg.params
    k_values = [float(k) for k in p.get("k_values", [10.0, 20.0, 40.0, 80.0])]
    nu_values = [float(v) for v in p.get("nu_values", [cfg.nu])]
    cells_args = [(cfg.to_dict(), k, nu) for nu in nu_values for k in k_values]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            cells = list(ex.map(_rate_cell, cells_args))
    else:
        cells = [_rate_cell(a) for a in cells_args]
    cells.sort(key=lambda c: (c["nu"], c["k"]))
    header = ["nu", "k", "lambda", "rate_enhanced", "rate_full", "c_star",
              "predicted_4clam", "ratio_fit_over_lambda", "dt", "halvings",
              "grid_n", "grid_L", "fit_residual", "gronwall_ok"]
    rows = []
    for c in cells:
        ratio = c["rate_enhanced"] / c["lambda"] if c["lambda"] > 0 else 0.0
        rows.append((c["nu"], c["k"], c["lambda"], c["rate_enhanced"],
                     c["rate_full"], c["c_star"], c["predicted_4clam"], ratio,
                     c["dt"], c["halvings"], c["grid_n"], c["grid_L"],
                     c["fit_residual"], int(c["gronwall_ok"])))
    path = os.path.join(out_dir, "rate_sweep.csv")
    emit_csv(rows, header, path)
    manifest.add_file(path)
    manifest.summary["csv_schema"] = header
    slopes = {"k": {}, "nu": {}}
    for nu in nu_values:
        pts = [(c["k"], c["rate_enhanced"]) for c in cells
               if c["nu"] == nu and c["k"] != 0
               and abs(c["k"]) >= nu ** (-1.0 / 3.0) and c["rate_enhanced"] > 0]
        if len(pts) >= 2:
            slopes["k"][f"{nu:g}"] = loglog_slope([q[0] for q in pts],
                                                  [q[1] for q in pts])
    for k in k_values:
        pts = [(c["nu"], c["rate_enhanced"]) for c in cells
               if c["k"] == k and k != 0
               and abs(k) >= c["nu"] ** (-1.0 / 3.0) and c["rate_enhanced"] > 0]
        if len(pts) >= 2:
            slopes["nu"][f"{k:g}"] = loglog_slope([q[0] for q in pts],
                                                  [q[1] for q in pts])
    manifest.summary["slopes"] = slopes
    manifest.summary["cells"] = cells
    manifest.summary["gronwall_all_ok"] = bool(all(c["gronwall_ok"] for c in cells))
    if any(c["lambda"] > 0 for c in cells):
        svg = os.path.join(out_dir, "rate_sweep.svg")
        ks = [c["k"] for c in cells if c["lambda"] > 0]
        emit_svg([(ks, [c["rate_enhanced"] for c in cells if c["lambda"] > 0],
                   "enhanced rate"),
                  (ks, [c["lambda"] for c in cells if c["lambda"] > 0],
                   "lambda")],
                 svg, xlabel="k", ylabel="rate", title="enhanced decay rates")
        manifest.add_file(svg)
    return 0


# ---------------------------------------------------------------------------
# nonlinear bootstrap and threshold sweep
# ---------------------------------------------------------------------------

def _bootstrap_setup(cfg: RunConfig):
    p = cfg.params
    sp = cfg.spectrum
    grid = build_grid(cfg.grid["L_y"], cfg.grid["n_y"])
    k0 = float(p.get("k_center", 2.0))
    sig = float(p.get("sigma_k", 1.0))
    width = float(p.get("width", 1.0))
    kind = p.get("data_profile_kind", "gaussian")
    lam0 = float(decay_rate(k0, cfg.nu))
    T = cfg.time["T"] if cfg.time["T"] is not None else \
        float(p.get("horizon_over_lambda", 3.0)) / lam0
    def make_field(amp):
        if kind == "single-mode":
            return single_mode_field(grid, sp["K_max"], sp["delta_k"], cfg.nu,
                                     amp, k0, width=width)
        return gaussian_field(grid, sp["K_max"], sp["delta_k"], cfg.nu, amp,
                              k0, sig, width=width)
    return grid, make_field, float(T)


def _bootstrap_run(cfg: RunConfig, grid, f, T: float):
    sp = cfg.spectrum
    plan = make_plan(f.k_values, f.delta_k, sp["dealias_fraction"])
    K_max = float(np.max(np.abs(f.k_values)))
    dt = cfg.time["dt"] if cfg.time["dt"] is not None else \
        min(default_dt(K_max, cfg.nu), nonlinear_cfl(f, plan, grid))
    stride = _pick_stride(cfg, float(T), float(dt))
    return bootstrap_experiment(f, T, float(dt), cfg.constants, grid,
                                plan=plan, stride=stride), float(dt)


def _report_rows(rep):
    rows = []
    for i, t in enumerate(rep.times):
        rows.append((t, rep.e_total[i], rep.e1[i], rep.e2[i], rep.d_total[i],
                     rep.nl_total[i], *rep.t_terms[i], *rep.embedding_ratios[i]))
    header = (["t", "E", "E1", "E2", "D", "NL"]
              + [f"T{i}" for i in range(1, 9)]
              + [f"embed_ratio{i}" for i in range(1, 5)])
    return rows, header


def run_nonlinear_bootstrap(cfg: RunConfig, out_dir: str, manifest):
    p = cfg.params
    grid, make_field, T = _bootstrap_setup(cfg)
    nu = cfg.nu
    c = cfg.constants.c
    pilot_amp = float(p.get("pilot_amplitude", 1e-2))
    pilot_T = float(p.get("pilot_horizon_fraction", 0.25)) * T
    pilot, dt_p = _bootstrap_run(cfg, grid, make_field(pilot_amp), pilot_T)
    C = pilot.c_empirical
    threshold = pilot.implied_threshold(c, nu)
    rel = float(p.get("amplitude_rel", 0.1))
    e0_unit = global_energy(make_field(1.0), 0.0, cfg.constants, grid).e_total
    amp = float(np.sqrt(rel * threshold / e0_unit)) if np.isfinite(threshold) \
        else pilot_amp
    rep, dt = _bootstrap_run(cfg, grid, make_field(amp), T)
    rows, header = _report_rows(rep)
    path = os.path.join(out_dir, "bootstrap_series.csv")
    emit_csv(rows, header, path)
    manifest.add_file(path)
    manifest.summary["csv_schema"] = header
    svg = os.path.join(out_dir, "bootstrap_energy.svg")
    emit_svg([(rep.times, rep.e_total, "E"),
              (rep.times, np.full_like(rep.times, 2 * rep.e0), "2 E(0)")],
             svg, ylabel="E", title="global energy under the truncated system")
    manifest.add_file(svg)
    manifest.summary.update({
        "pilot_amplitude": pilot_amp, "pilot_dt": dt_p,
        "C_empirical": C, "implied_threshold": threshold,
        "amplitude_rel": rel, "amplitude": amp, "dt": dt, "T": T,
        "E0": rep.e0, "sup_E_over_E0": float(np.max(rep.e_total) / rep.e0)
        if rep.e0 > 0 else None,
        "bound_held": rep.bound_held,
    })
    manifest.flags["domain_too_small"] = rep.boundary_flag
    manifest.flags["nonzero_mean_stream"] = rep.mean_flag
    manifest.flags["C_undefined"] = not (C > 0)
    return 0


def run_threshold_sweep(cfg: RunConfig, out_dir: str, manifest):
    p = cfg.params
    grid, make_field, T = _bootstrap_setup(cfg)
    nu = cfg.nu
    c = cfg.constants.c
    pilot_amp = float(p.get("pilot_amplitude", 1e-2))
    pilot_T = float(p.get("pilot_horizon_fraction", 0.25)) * T
    pilot, _ = _bootstrap_run(cfg, grid, make_field(pilot_amp), pilot_T)
    threshold = pilot.implied_threshold(c, nu)
    e0_unit = global_energy(make_field(1.0), 0.0, cfg.constants, grid).e_total
    multiples = [float(x) for x in p.get("amplitude_multiples",
                                         [0.1, 1.0, 10.0, 100.0])]
    rows = []
    sweep = []
    for mult in multiples:
        amp = float(np.sqrt(mult * threshold / e0_unit))
        try:
            rep, dt = _bootstrap_run(cfg, grid, make_field(amp), T)
            ratio = float(np.max(rep.e_total) / rep.e0) if rep.e0 > 0 else 0.0
            entry = {"multiple": mult, "amplitude": amp,
                     "sup_E_over_E0": ratio, "bound_held": rep.bound_held,
                     "blew_up": False}
        except BlowUpError as e:
            entry = {"multiple": mult, "amplitude": amp, "sup_E_over_E0": None,
                     "bound_held": False, "blew_up": True, "blowup_t": e.t}
        sweep.append(entry)
        rows.append((mult, entry["amplitude"],
                     entry["sup_E_over_E0"] if entry["sup_E_over_E0"] is not None
                     else float("nan"),
                     int(entry["bound_held"]), int(entry["blew_up"])))
    header = ["multiple", "amplitude", "sup_E_over_E0", "bound_held",
              "blew_up"]
    path = os.path.join(out_dir, "threshold_sweep.csv")
    emit_csv(rows, header, path)
    manifest.add_file(path)
    manifest.summary["csv_schema"] = header
    finite = [(e["multiple"], e["sup_E_over_E0"]) for e in sweep
              if e["sup_E_over_E0"] is not None]
    if finite:
        svg = os.path.join(out_dir, "threshold_sweep.svg")
        emit_svg([([m for m, _ in finite], [s for _, s in finite],
                   "sup E / E(0)")], svg, xlabel="amplitude multiple",
                 ylabel="sup E / E(0)", title="stability-threshold sweep",
                 logy=False)
        manifest.add_file(svg)
    manifest.summary.update({
        "C_empirical": pilot.c_empirical, "implied_threshold": threshold,
        "sweep": sweep, "T": T,
    })
    return 0


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

_RUNNERS = {
    "linear-decay": run_linear_decay,
    "verify-identities": run_verify_identities,
    "equivalence-band": run_equivalence_band,
    "rate-sweep": run_rate_sweep,
    "nonlinear-bootstrap": run_nonlinear_bootstrap,
    "threshold-sweep": run_threshold_sweep,
}


def run_experiment(cfg: RunConfig, out_dir=None, workers=None, seed=None):
    """Execute one configured experiment; returns (manifest, exit_code).

    The manifest is written even when the run fails (the failure is
    recorded); config parsing happens before this point."""
    if workers is not None:
        cfg.workers = int(workers)
    if seed is not None:
        cfg.seed = int(seed)
    out = out_dir or cfg.output_dir
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create output directory {out}: {e}") from e
    manifest = new_manifest(cfg.to_dict(), cfg.experiment)
    try:
        code = _RUNNERS[cfg.experiment](cfg, out, manifest)
    except BlowUpError as e:
        manifest.failure = f"blow-up at t={e.t:g}"
        manifest.write(out)
        return manifest, 3
    except ConfigError as e:
        manifest.failure = f"configuration error: {e}"
        manifest.write(out)
        return manifest, 2
    except NumericalError as e:
        manifest.failure = f"numerical failure: {e}"
        manifest.write(out)
        return manifest, 3
    manifest.write(out)
    return manifest, code
