"""Acceptance criteria, one test each; a pass/fail line per criterion is printed in the summary."""

import json
import math

import numpy as np
import pytest
from scipy import integrate

from conftest import record
from micropillar import bench, budget, modal, optics
from micropillar.cli import run_cli
from micropillar.config import parse_config
from micropillar.physmodel import QUARTZ, OscillatorParams, published_geometry
from micropillar.report import design_report

PUBLISHED_FEM_HZ = 3.2e6
MEASURED_HZ = 3.66e6
MEASURED_Q = 1.8e6
DESIGN_MASS = 25e-9
MEASURED = OscillatorParams(MEASURED_HZ, DESIGN_MASS, MEASURED_Q, 300.0)


def check(number, name, ok, detail):
    record(number, name, bool(ok), detail)
    assert ok, detail


def test_01_fundamental_frequency():
    f_an = modal.analytic_modes(QUARTZ, published_geometry(), 1)[0][0]
    r = modal.modes(QUARTZ, published_geometry(), 200, 4)
    f_fem = r.frequencies[modal.fundamental_index(r)]
    rel = abs(f_fem / f_an - 1)
    ok = (abs(f_an - 3.114e6) <= 0.5e3 and rel <= 1e-3
          and abs(f_an / PUBLISHED_FEM_HZ - 1) <= 0.05 and abs(f_fem / PUBLISHED_FEM_HZ - 1) <= 0.05)
    check(1, "fundamental frequency", ok,
          f"analytic {f_an / 1e6:.4f} MHz, FEM {f_fem / 1e6:.4f} MHz (rel {rel:.1e}), "
          f"{f_an / PUBLISHED_FEM_HZ - 1:+.1%} vs 3.2 MHz; {f_an / MEASURED_HZ - 1:+.1%} vs measured 3.66 MHz (reported)")


def test_02_effective_mass():
    r = modal.modes(QUARTZ, published_geometry(), 200, 4)
    m = modal.effective_mass(r, modal.fundamental_index(r))
    rep = design_report(parse_config("", "<paper-defaults>"))["published_comparison"]
    ok = abs(m - 33.0e-9) <= 0.05e-9 and 0.5 <= m / DESIGN_MASS <= 2 and rep["mass_discrepancy_flag"]
    check(2, "effective mass", ok,
          f"{m * 1e9:.2f} ug, ratio {m / DESIGN_MASS:.3f} to 25 ug, flagged={rep['mass_discrepancy_flag']}")


def test_03_fem_convergence():
    f_an = modal.analytic_modes(QUARTZ, published_geometry(), 1)[0][0]
    sizes = [25, 50, 100, 200]
    errors = []
    for n in sizes:
        r = modal.modes(QUARTZ, published_geometry(), n, 4)
        errors.append(abs(r.frequencies[modal.fundamental_index(r)] / f_an - 1))
    orders = modal.convergence_order(errors, [1.0 / n for n in sizes])
    ok = all(a > b for a, b in zip(errors, errors[1:])) and min(orders) >= 2.0
    check(3, "FEM convergence", ok, "orders " + ", ".join(f"{o:.5f}" for o in orders))


def test_04_noise_equation():
    ref = budget.zero_point_noise(25e-9, 2000, 4e6).s_x_at_resonance
    worst = 0.0
    for k in (0.3, 2.0, 7.0, 11.0):
        worst = max(worst,
                    abs(budget.zero_point_noise(25e-9 * k, 2000, 4e6).s_x_at_resonance * k / ref - 1),
                    abs(budget.zero_point_noise(25e-9, 2000 * k, 4e6).s_x_at_resonance / (k * ref) - 1),
                    abs(budget.zero_point_noise(25e-9, 2000, 4e6 * k).s_x_at_resonance * k * k / ref - 1))
    ok = ref == 1e-38 and worst <= 4 * np.finfo(float).eps
    check(4, "noise equation", ok, f"S_x(ref) = {ref!r} m^2/Hz, worst scaling error {worst:.1e}")


def test_05_ground_state():
    tg = budget.ground_temperature(4e6)
    crit = budget.quantum_criteria(4e6, 100e-6)
    ok = abs(tg / 0.1920e-3 - 1) <= 1e-3 and abs(crit.occupancy / 0.172 - 1) <= 0.01 and crit.in_ground_state
    check(5, "ground state", ok,
          f"T_ground {tg * 1e3:.5f} mK, n(100 uK) {crit.occupancy:.5f}, ground state={crit.in_ground_state}")


def test_06_cooling_relation():
    example = budget.cooled_quality(1e6, 100e-3, 100e-6).cooled_quality
    rng = np.random.default_rng(2024)
    q = 10 ** rng.uniform(0, 9, 1000)
    t = 10 ** rng.uniform(-3, 3, 1000)
    tc = t * 10 ** rng.uniform(-6, 0, 1000)
    worst = max(abs(budget.cooled_quality(a, b, c).cooled_quality / c / (a / b) - 1) for a, b, c in zip(q, t, tc))
    ok = example == 1000.0 and worst <= 1e-12
    check(6, "cooling relation", ok, f"Q_c = {example!r}, worst Q_c/T_c vs Q/T error {worst:.1e} over 1000 draws")


def test_07_clamping_loss_mapping():
    q = modal.q_from_fraction(1e-6)
    check(7, "clamping-loss mapping", q.value == 1e6 and not q.unbounded, f"fraction 1e-6 -> Q = {q.value!r}")


def test_08_coating():
    t15 = optics.stack_transmission(optics.quarter_wave_stack(), optics.ND_YAG).transmittance
    oracle = optics.quarter_wave_transmission(optics.N_TA2O5, optics.N_SIO2, 15)
    n = np.arange(3, 21)
    log_t = np.log([optics.stack_transmission(optics.quarter_wave_stack(doublets=int(k)), optics.ND_YAG)
                    .transmittance for k in n])
    slope, intercept = np.polyfit(n, log_t, 1)
    dev = float(np.abs(log_t - (slope * n + intercept)).max())
    # second differences of an affine sequence vanish; here they decay like T itself
    curvature = float(np.abs(np.diff(log_t, 2)).max())
    finesse = optics.cavity_finesse(100e-6, 100e-6)
    ok = (20e-6 <= t15 <= 300e-6 and abs(t15 / oracle - 1) <= 1e-6 and curvature < 0.05
          and abs(slope / (2 * math.log(optics.N_SIO2 / optics.N_TA2O5)) - 1) < 0.01
          and abs(finesse - 31416) <= 1)
    check(8, "coating", ok,
          f"T = {t15 * 1e6:.2f} ppm (oracle rel {abs(t15 / oracle - 1):.1e}), log T slope {slope:.4f}/doublet "
          f"(max affine deviation {dev:.3f}, max 2nd difference {curvature:.3f}), finesse {finesse:.1f}")


def test_09_ringdown_round_trip():
    tau = MEASURED.decay_time
    q_err, nu_err = [], []
    for seed in range(100):
        ts = bench.synth_ringdown(MEASURED, 5e-9, 0.05, 16e6, snr=100, seed=seed)
        fit = bench.fit_ringdown(ts)
        q_err.append(abs(fit.quality_factor / MEASURED_Q - 1))
        nu_err.append(abs(fit.frequency / MEASURED_HZ - 1))
    mq, mnu = float(np.median(q_err)), float(np.median(nu_err))
    ok = abs(tau - 156.6e-3) <= 0.1e-3 and mq <= 0.01 and mnu <= 10e-6
    check(9, "ring-down round trip", ok,
          f"tau {tau * 1e3:.2f} ms, median |dQ/Q| {mq:.1e}, median |dnu/nu| {mnu:.1e} over 100 seeds")


def test_10_sweep_fit():
    grid = bench.sweep_grid(MEASURED, 10, 401)
    clean = bench.fit_lorentzian(bench.sweep_response(MEASURED, 1e-12, grid))
    fwhm = MEASURED_HZ / MEASURED_Q
    fwhm_err = abs(clean.linewidth / fwhm - 1)
    below = 0
    sweep_q = []
    for seed in range(100):
        p = bench.InterferometerParams(jitter_rms=0.1, jitter_correlation_time=10e-3, seed=seed)
        q = bench.fit_lorentzian(bench.jittered_sweep(MEASURED, 1e-12, grid, p)).quality_factor
        sweep_q.append(q)
        below += q <= MEASURED_Q
    ring_q = []
    # records span about two decay times so slow jitter-induced gain wander averages out
    for seed in range(5):
        x = bench.synth_ringdown(MEASURED, 5e-9, 0.3, 16e6, snr=100, seed=seed)
        p = bench.InterferometerParams(jitter_rms=0.1, jitter_correlation_time=10e-3, seed=seed + 1)
        ring_q.append(bench.fit_ringdown(bench.michelson_signal(x, p)).quality_factor)
    ring_err = max(abs(q / MEASURED_Q - 1) for q in ring_q)
    ordered = float(np.mean(sweep_q)) <= float(np.mean(ring_q))
    ok = abs(fwhm - 2.03) < 0.005 and fwhm_err <= 0.01 and below >= 95 and ring_err <= 0.01 and ordered
    check(10, "sweep fit", ok,
          f"FWHM {fwhm:.3f} Hz recovered to {fwhm_err:.1e}; jittered Q <= true in {below}/100 "
          f"(median {np.median(sweep_q):.3g}); ring-down through jittered interferometer within {ring_err:.1e}")


def test_11_equipartition():
    lw, nu = MEASURED.linewidth, MEASURED.frequency
    ks = (1, 10, 1e2, 1e3, 1e4, 1e5, 1e6)
    pts = sorted({0.0, nu, 20 * nu, *(nu - k * lw for k in ks if nu - k * lw > 0), *(nu + k * lw for k in ks)})
    total = sum(integrate.quad(lambda f: budget.thermal_psd(MEASURED, [f])[0], a, b, limit=200)[0]
                for a, b in zip(pts, pts[1:]))
    expected = budget.thermal_variance(MEASURED)
    rel = abs(total / expected - 1)
    check(11, "equipartition oracle", rel <= 0.01, f"integral / (k_B T / M w^2) - 1 = {rel:.1e}")


@pytest.fixture
def fast_cfg(tmp_path):
    path = tmp_path / "fast.cfg"
    path.write_text("[oscillator]\nfrequency = 1 MHz\nquality_factor = 1e5\n"
                    "[bench]\nsample_rate = 8 MHz\nduration = 20 ms\n")
    return path


def test_12_determinism(tmp_path, fast_cfg):
    jobs = [
        (["simulate", "ringdown", "--config", "measured.cfg", "--seed", "42"], "ring.csv"),
        (["simulate", "sweep", "--config", "measured.cfg", "--jitter", "--seed", "42"], "sweep.csv"),
        (["simulate", "michelson", "--config", str(fast_cfg), "--jitter", "--seed", "42"], "mich.csv"),
        (["design", "--config", "pillar.cfg"], "design.json"),
        (["coating", "--paper-defaults"], "coating.json"),
        (["budget", "--config", "measured.cfg"], "budget.json"),
        (["sweep-geometry", "--paper-defaults", "--steps", "3"], "geometry.csv"),
    ]
    fits = [(["fit", "ringdown", "--in"], "ring.csv", "fit-ring.json"),
            (["fit", "sweep", "--in"], "sweep.csv", "fit-sweep.json")]
    runs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        codes = [run_cli(argv + ["--out", str(d / name)]) for argv, name in jobs]
        codes += [run_cli(argv + [str(d / src), "--out", str(d / name)]) for argv, src, name in fits]
        assert codes == [0] * len(codes)
        runs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    same = runs[0] == runs[1]
    for name, blob in runs[0].items():
        if name.endswith(".json"):
            json.loads(blob)
    check(12, "determinism", same and len(runs[0]) == len(jobs) + len(fits),
          f"{len(runs[0])} outputs byte-identical across two runs: {same}")
