"""Acceptance suite: one test per criterion, each printing a PASS line with
the measured quantities.  The heavy sweeps are session fixtures shared
between criteria."""

import json
import time

import numpy as np
import pytest

from poiseflow.cli import main as cli_main
from poiseflow.energy import verify_identities
from poiseflow.experiments import parse_config, run_experiment
from poiseflow.grid import build_grid, norm_sq
from poiseflow.linear import build_generator, evolve
from poiseflow.multipliers import decay_rate, time_weight_M
from poiseflow.nonlinear import make_plan, nonlinear_term
from poiseflow.state import (ModeState, eval_stream_localized,
                             gaussian_profile, random_bump_params)

NU_GRID = (1e-1, 1e-2, 1e-3)
K_GRID = (0.0, 1.0, 5.0, 10.0, 40.0)


def report(num, name, detail):
    print(f"ACCEPTANCE {num} {name}: PASS ({detail})")


@pytest.fixture(scope="session")
def out_root(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="session")
def rate_sweep_results(out_root):
    cfg = parse_config({
        "experiment": "rate-sweep",
        "grid": {"auto_resolution": True, "points_per_layer": 3.0},
        "physics": {"nu": 1e-3},
        "experiment_params": {"k_values": [10.0, 20.0, 40.0, 80.0],
                              "nu_values": [1e-3, 4e-3, 1.6e-2]},
        "output_dir": str(out_root / "rate_sweep"),
        "seed": 0,
    })
    t0 = time.time()
    man, code = run_experiment(cfg)
    assert code == 0
    return man, time.time() - t0


@pytest.fixture(scope="session")
def bootstrap_results(out_root):
    base = {
        "grid": {"L_y": 6.5, "n_y": 96},
        "spectrum": {"K_max": 8.0, "delta_k": 0.25},
        "physics": {"nu": 1e-2},
        "time": {"observer_stride": "auto", "samples_target": 120},
        "seed": 0,
    }
    t0 = time.time()
    cfg = parse_config({**base, "experiment": "nonlinear-bootstrap",
                        "experiment_params": {"k_center": 2.0, "sigma_k": 1.0,
                                              "pilot_amplitude": 1e-2,
                                              "amplitude_rel": 0.1,
                                              "horizon_over_lambda": 3.0},
                        "output_dir": str(out_root / "bootstrap")})
    man, code = run_experiment(cfg)
    assert code == 0
    cfg2 = parse_config({**base, "experiment": "threshold-sweep",
                         "experiment_params": {"k_center": 2.0, "sigma_k": 1.0,
                                               "pilot_amplitude": 1e-2,
                                               "horizon_over_lambda": 1.5,
                                               "amplitude_multiples":
                                                   [0.1, 1.0, 10.0, 100.0]},
                         "output_dir": str(out_root / "threshold")})
    man2, code2 = run_experiment(cfg2)
    assert code2 == 0
    return man, man2, time.time() - t0


def test_criterion_1_identity_suite():
    t0 = time.time()
    rng = np.random.default_rng(1)
    params = [random_bump_params(rng, center_span=1.5, sigma_range=(0.7, 1.1),
                                 freq_max=4.5) for _ in range(100)]
    worst = {}
    for n in (128, 256):
        grid = build_grid(10.0, n)
        mx = 0.0
        for prm in params:
            om = eval_stream_localized(prm, grid.nodes)
            for nu in NU_GRID:
                for k in K_GRID:
                    st = ModeState(k=k, nu=nu, t=0.0, omega=om)
                    mx = max(mx, float(np.max(verify_identities(st, grid))))
        worst[n] = mx
    wall = time.time() - t0
    assert worst[128] <= 1e-7, f"max residual {worst[128]:.3e} exceeds 1e-7"
    assert worst[128] / worst[256] >= 10.0, \
        f"refinement factor {worst[128] / worst[256]:.2f} below 10"
    assert wall < 60.0, f"identity suite took {wall:.1f}s"
    report(1, "identity-suite",
           f"max residual {worst[128]:.2e} at n_y=128, "
           f"refined {worst[256]:.2e}, shrink x{worst[128] / worst[256]:.0f}, "
           f"{wall:.0f}s")


def test_criterion_2_energy_inequality(out_root):
    t0 = time.time()
    cfg = parse_config({
        "experiment": "linear-decay",
        "grid": {"auto_resolution": True, "points_per_layer": 3.0},
        "time": {"observer_stride": "auto", "samples_target": 150},
        "experiment_params": {"k_values": list(K_GRID),
                              "nu_values": list(NU_GRID),
                              "T_over_scale": 5.0,
                              "gauge_x_diffusion": True},
        "output_dir": str(out_root / "cstar"),
        "seed": 0,
    })
    man, code = run_experiment(cfg)
    wall = time.time() - t0
    assert code == 0
    cmin = man.summary["min_c_star"]
    assert all(c["c_star"] > 0 for c in man.summary["cells"])
    assert cmin > 1e-4, f"min c* = {cmin:.3e} not above 1e-4"
    assert wall < 300.0, f"inequality sweep took {wall:.1f}s"
    report(2, "energy-inequality", f"min c* = {cmin:.4f} over "
           f"{len(man.summary['cells'])} cells, {wall:.0f}s")


def test_criterion_3_enhanced_dissipation_scaling(rate_sweep_results):
    man, wall = rate_sweep_results
    slope_k = man.summary["slopes"]["k"]["0.001"]
    slope_nu = man.summary["slopes"]["nu"]["80"]
    assert 0.4 <= slope_k <= 0.6, f"k-slope {slope_k:.3f} outside 0.5 +- 0.1"
    assert 0.4 <= slope_nu <= 0.6, f"nu-slope {slope_nu:.3f} outside 0.5 +- 0.1"
    assert wall < 600.0, f"rate sweep took {wall:.1f}s"
    report(3, "enhanced-dissipation-scaling",
           f"slope_k = {slope_k:.3f}, slope_nu = {slope_nu:.3f}, {wall:.0f}s")


def test_criterion_4_gronwall_decay(rate_sweep_results):
    man, _ = rate_sweep_results
    cells = [c for c in man.summary["cells"] if c["k"] != 0]
    assert cells
    assert all(c["gronwall_ok"] for c in cells)
    worst = max(c["gronwall_slack"] for c in cells)
    report(4, "gronwall-decay",
           f"E(t) <= exp(-4*(c*/2)*lambda*t) E(0) on all {len(cells)} "
           f"trajectories, worst log-slack {worst:.2e}")


def test_criterion_5_time_weight_oracle():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        nu = 10.0 ** rng.uniform(-3, -0.5)
        k = rng.uniform(0.0, 80.0)
        J = rng.uniform(1.0, 3.0)
        c = 10.0 ** rng.uniform(-3, -1)
        t_end = rng.uniform(0.05, 80.0)
        lam = float(decay_rate(k, nu))

        def rhs(t, M):
            u = c * lam * t
            return c * J * J * lam * u * u / (1 + u * u) ** 2 * M

        n = 1500
        h = t_end / n
        M, t = 1.0, 0.0
        for _ in range(n):
            k1 = rhs(t, M)
            k2 = rhs(t + h / 2, M + h / 2 * k1)
            k3 = rhs(t + h / 2, M + h / 2 * k2)
            k4 = rhs(t + h, M + h * k3)
            M += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        closed = float(time_weight_M(k, nu, c, J, t_end))
        worst = max(worst, abs(closed - M) / M)
        assert 1.0 - 1e-12 <= closed <= np.exp(np.pi * J * J / 4) * (1 + 1e-12)
    assert worst <= 1e-6, f"closed form vs RK4 relative error {worst:.2e}"
    report(5, "time-weight-oracle",
           f"closed form vs RK4 on 100 samples, worst rel err {worst:.1e}")


def test_criterion_6_heat_baseline(rate_sweep_results):
    nu, T = 0.1, 10.0
    grid = build_grid(12.0, 128)
    gen = build_generator(0.0, nu, grid)
    st = ModeState(k=0.0, nu=nu, t=0.0, omega=gaussian_profile(grid.nodes))
    samples = []
    evolve(st, gen, T, 0.05,
           observer=lambda s: samples.append((s.t, norm_sq(s.omega, grid))),
           stride=5)
    worst = 0.0
    for t, n2 in samples:
        exact = np.sqrt(np.pi) * (1 + 2 * nu * t) ** -0.5
        worst = max(worst, abs(n2 - exact) / exact)
    assert worst <= 1e-3, f"heat baseline off by {worst:.2e}"
    man, _ = rate_sweep_results
    cell = next(c for c in man.summary["cells"]
                if c["nu"] == 1e-3 and c["k"] == 80.0)
    ratio = cell["rate_enhanced"] / 1e-3
    assert ratio >= 10.0
    report(6, "heat-baseline",
           f"closed-form match {worst:.1e} (<=0.1%), enhanced rate at "
           f"(nu=1e-3, k=80) = {cell['rate_enhanced']:.3f} = {ratio:.0f}x nu")


def test_criterion_7_nonlinear_oracle():
    from test_nonlinear import fft_convolution_oracle, random_field
    grid = build_grid(8.0, 64)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10):
        f = random_field(grid, rng)
        plan = make_plan(f.k_values, f.delta_k)
        NL = nonlinear_term(f, plan, grid)
        oracle = fft_convolution_oracle(f, plan, grid)
        scale = np.max(np.abs(oracle)) + 1e-300
        worst = max(worst, float(np.max(np.abs(NL - oracle)) / scale))
        defect = np.abs(NL[::-1] - np.conj(NL)).max() / (np.abs(NL).max() + 1e-300)
        assert defect <= 1e-12
    assert worst <= 1e-8, f"convolution oracle mismatch {worst:.2e}"
    # support invariant: single-mode input -> {0, +-2 k0} only
    from poiseflow.state import single_mode_field
    f = single_mode_field(grid, 4.0, 0.5, 1e-2, amplitude=1e-2, k0=1.0)
    plan = make_plan(f.k_values, f.delta_k, dealias_fraction=1.0)
    NL = nonlinear_term(f, plan, grid)
    amp = np.max(np.abs(NL), axis=1)
    alive = set(np.round(f.k_values[amp > 1e-14 * amp.max()], 6))
    assert alive <= {-2.0, 0.0, 2.0}
    report(7, "nonlinear-oracle",
           f"k-space vs pseudo-spectral on 10 fields, worst rel {worst:.1e}; "
           f"reality and support exact")


def test_criterion_8_bootstrap(bootstrap_results):
    man, man2, wall = bootstrap_results
    s = man.summary
    assert s["bound_held"], "E(t) exceeded 2 E(0) below threshold"
    assert s["C_empirical"] > 0
    assert s["amplitude_rel"] == 0.1
    sweep = man2.summary["sweep"]
    assert len(sweep) == 4
    sups = [e["sup_E_over_E0"] if e["sup_E_over_E0"] is not None else np.inf
            for e in sweep]
    assert all(b >= a * (1 - 1e-9) for a, b in zip(sups, sups[1:])), \
        f"sweep ratios not monotone: {sups}"
    assert wall < 1800.0, f"bootstrap took {wall:.1f}s"
    report(8, "bootstrap-threshold",
           f"C = {s['C_empirical']:.3e}, amplitude {s['amplitude']:.3g} "
           f"(0.1x threshold), sup E/E0 = {s['sup_E_over_E0']:.3f} <= 2 over "
           f"T = {s['T']:.0f}; sweep ratios {['%.3g' % x for x in sups]}, "
           f"{wall:.0f}s")


def test_criterion_9_reproducibility(out_root, tmp_path):
    doc = {
        "experiment": "linear-decay",
        "grid": {"L_y": 10.0, "n_y": 96},
        "physics": {"nu": 1e-2},
        "time": {"T": 2.0, "observer_stride": 2},
        "experiment_params": {"k_values": [2.0, 5.0]},
        "seed": 9,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(doc))
    blobs = []
    for sub in ("r1", "r2"):
        out = out_root / f"repro_{sub}"
        assert cli_main(["linear-decay", "--config", str(cfg_path),
                         "--out", str(out)]) == 0
        data = b""
        for name in sorted(p.name for p in out.glob("*.csv")):
            data += (out / name).read_bytes()
        blobs.append(data)
    assert blobs[0] == blobs[1] and len(blobs[0]) > 0
    report(9, "reproducibility",
           f"two runs, {len(blobs[0])} CSV bytes byte-identical")
