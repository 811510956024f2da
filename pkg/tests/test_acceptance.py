"""Acceptance suite: one test group per criterion, summarized at the end of the run."""

import csv
import math
import time

import numpy as np
import pytest

from rabisq.cli import PRESETS, build_config
from rabisq.dynamics import (
    ExactPropagator,
    GrwaPropagator,
    coefficients_analytic,
    coefficients_oracle,
    partial_trace_qubit,
    reduced_density,
    reduced_density_partial_trace,
)
from rabisq.fock import displaced_squeezed_basis_matrix, overlap_analytic
from rabisq.model import ModelParams, derive
from rabisq.phasespace import (
    Q_MAX,
    default_times,
    husimi_q,
    husimi_q_closedform,
    moments_from_states,
    polar_normalization,
    q_grid,
    variance_series,
)
from rabisq.specfun import mehler_check
from rabisq.spectrum import grwa_spectrum, spectrum_compare

A1 = ModelParams(1.0, 0.3, 0.1, 0.0)
B1 = ModelParams(1.0, 0.3, 0.1, 0.35)
C1 = ModelParams(1.0, 1.0, 0.15, 0.2)
N_DYN = 100
PRESET_PARAMS = {name: build_config(preset=name).params for name in sorted(PRESETS)}
SQUEEZED_PRESETS = [name for name, p in PRESET_PARAMS.items() if p.g > 0]


def batched_rho(prop, times, chunk=200):
    out = [partial_trace_qubit(prop.bipartite(times[k : k + chunk])) for k in range(0, len(times), chunk)]
    return np.concatenate(out)


@pytest.fixture(scope="module")
def diagnostics(request):
    path = request.config.rootpath / "acceptance"
    path.mkdir(exist_ok=True)
    return path


@pytest.fixture(scope="module")
def grwa_props():
    return {name: GrwaPropagator(p, N_DYN) for name, p in PRESET_PARAMS.items()}


@pytest.mark.criterion(1, "baseline squeezing, g = 0")
def test_criterion_1_baseline_minimum(record_property):
    start = time.perf_counter()
    s = variance_series(A1, 0.0, default_times(), "grwa", N_DYN)
    elapsed = time.perf_counter() - start
    s2 = variance_series(A1, 0.0, default_times(), "grwa", N_DYN + 20)
    record_property("min", f"{s.min_value:.6f}")
    record_property("at", f"{s.min_time:.2f}")
    record_property("runtime_s", f"{elapsed:.1f}")
    assert abs(s.min_value - 0.4741) <= 0.005
    assert abs(s.min_time - 220.0) <= 3.0
    assert abs(s.min_value - s2.min_value) < 1e-6
    assert elapsed < 60.0


@pytest.mark.criterion(2, "enhanced squeezing, g = 0.35")
def test_criterion_2_enhanced_minimum(record_property):
    # the global minimum is an early parametric dip near wt = 2; the reported one sits near 264
    window = build_config(preset="fig2b").window
    s = variance_series(B1, 0.0, default_times(), "grwa", N_DYN, window=window)
    s2 = variance_series(B1, 0.0, default_times(), "grwa", N_DYN + 20, window=window)
    record_property("min", f"{s.min_value:.6f}")
    record_property("at", f"{s.min_time:.2f}")
    record_property("window", f"{window[0]:g}-{window[1]:g}")
    assert abs(s.min_value - 0.0954) <= 0.005
    assert abs(s.min_time - 264.0) <= 3.0
    assert abs(s.min_value - s2.min_value) < 1e-6


@pytest.mark.criterion(3, "squeezing at resonance")
def test_criterion_3_resonance(record_property):
    times = default_times()
    s = variance_series(C1, 0.0, times, "grwa", N_DYN, window=(244.0, 264.0))
    v254 = s.v_phi[np.argmin(np.abs(times - 254.0))]
    record_property("v_254", f"{v254:.6f}")
    record_property("local_min", f"{s.min_value:.6f}@{s.min_time:.2f}")
    assert v254 < 0.5
    # strictly inside the window, so it is a genuine local minimum rather than an edge value
    assert 244.0 < s.min_time < 264.0
    i = int(np.argmin(np.abs(times - s.min_time)))
    assert s.min_value <= min(s.v_phi[i - 1], s.v_phi[i + 1])


@pytest.mark.criterion(4, "spectral agreement")
@pytest.mark.parametrize("g, n_trunc", [(0.0, 60), (0.2, 60), (0.35, 80), (0.49, 250)])
def test_criterion_4_decoupled_levels(g, n_trunc, record_property):
    table = spectrum_compare(ModelParams(1.0, 0.5, 0.0, g), [0.0], 8, n_trunc)
    dev = float(np.max(table.deviation))
    record_property(f"lambda0_g{g:g}", f"{dev:.1e}")
    assert dev < 1e-8


@pytest.mark.criterion(4, "spectral agreement")
@pytest.mark.parametrize("delta, g", [(0.5, 0.35), (1.0, 0.2)])
def test_criterion_4_deviation_curve(delta, g, diagnostics, record_property):
    p = ModelParams(1.0, delta, 0.0, g)
    grid = np.linspace(0.0, 1.0, 51)
    dev = spectrum_compare(p, grid, 6, 60).deviation.max(axis=1)
    dev_more = spectrum_compare(p, grid, 6, 80).deviation.max(axis=1)
    with open(diagnostics / f"spectrum_deviation_d{delta:g}_g{g:g}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda_over_omega", "max_abs_dev_n60", "max_abs_dev_n80"])
        w.writerows([f"{x:.12g}" for x in row] for row in zip(grid, dev, dev_more))
    record_property(f"maxdev_d{delta:g}_g{g:g}", f"{dev.max():.4f}")
    assert np.max(np.abs(dev - dev_more)) < 1e-6
    assert dev[-1] > dev[0]
    for i in range(1, len(dev) - 1):
        assert dev[i] <= 3 * max(dev[i - 1], dev[i + 1]) + 1e-9


@pytest.mark.criterion(5, "normalization suite")
@pytest.mark.parametrize("name", sorted(PRESETS))
def test_criterion_5_normalization(name, grwa_props, record_property):
    prop = grwa_props[name]
    worst = {"coef": 0.0, "trace": 0.0, "q": 0.0, "polar": 0.0}
    for t in np.linspace(0.0, 300.0, 20):
        c = prop.coefficients_at(t)
        rho = prop.density(t).rho
        grid = q_grid(rho, time=t)
        worst["coef"] = max(worst["coef"], abs(c.norm2() - 1))
        worst["trace"] = max(worst["trace"], abs(np.trace(rho).real - 1))
        worst["q"] = max(worst["q"], abs(grid.integral - 1))
        worst["polar"] = max(worst["polar"], abs(polar_normalization(rho) - 1))
        assert np.linalg.eigvalsh(rho)[0] > -1e-8
        assert grid.values.min() >= 0 and grid.values.max() <= Q_MAX + 1e-12
    record_property(name, ",".join(f"{k}:{v:.0e}" for k, v in worst.items()))
    assert worst["coef"] < 1e-8
    assert worst["trace"] < 1e-8
    assert worst["q"] < 1e-4
    assert worst["polar"] < 1e-6


@pytest.mark.criterion(6, "oracle equivalences")
@pytest.mark.parametrize("lam", [0.1, 0.5, 1.0])
def test_criterion_6a_overlaps(lam):
    d = derive(ModelParams(1.0, 0.0, lam, 0.0))
    M = displaced_squeezed_basis_matrix(d, -1, 10, 80).conj().T @ displaced_squeezed_basis_matrix(d, 1, 10, 80)
    ref = np.array([[overlap_analytic(lam, m, n) for n in range(11)] for m in range(11)])
    assert np.max(np.abs(M - ref)) < 1e-8


@pytest.mark.criterion(6, "oracle equivalences")
@pytest.mark.parametrize("name", SQUEEZED_PRESETS)
def test_criterion_6b_coefficients(name):
    p = PRESET_PARAMS[name]
    d = derive(p)
    spec = grwa_spectrum(p, d, 15)
    c1 = coefficients_analytic(spec, d, 15).vector()
    c2 = coefficients_oracle(spec, d, 15, N_DYN).vector()
    assert np.max(np.abs(c1 - c2)) < 1e-7


@pytest.mark.criterion(6, "oracle equivalences")
@pytest.mark.parametrize("name", SQUEEZED_PRESETS)
def test_criterion_6c_closed_form_q(name, grwa_props, record_property):
    prop = grwa_props[name]
    t = build_config(preset=name).q_time
    c = prop.coefficients_at(t)
    rho = prop.density(t).rho
    axis = np.linspace(-3.0, 3.0, 21)
    err = max(
        abs(husimi_q_closedform(c, prop.spectrum, prop.derived, complex(x, y)) - husimi_q(rho, complex(x, y)))
        for x in axis
        for y in axis
    )
    record_property(f"q_err_{name}", f"{err:.0e}")
    assert err < 1e-6


@pytest.mark.criterion(6, "oracle equivalences")
@pytest.mark.parametrize("name", sorted(PRESETS))
def test_criterion_6d_assembly(name, grwa_props):
    prop = grwa_props[name]
    for t in (0.0, 150.0, 300.0):
        c = prop.coefficients_at(t)
        r1 = reduced_density(c, prop.spectrum, prop.derived, N_DYN).rho
        r2 = reduced_density_partial_trace(c, prop.spectrum, prop.derived, N_DYN).rho
        assert np.max(np.abs(r1 - r2)) < 1e-9


@pytest.mark.criterion(7, "Mehler identity")
def test_criterion_7_mehler(record_property):
    errs = [mehler_check(x, y, t) for x in np.linspace(-2, 2, 5) for y in np.linspace(-2, 2, 5) for t in (0.1, 0.5, 0.8)]
    record_property("max_err", f"{max(errs):.0e}")
    assert max(errs) < 1e-8


@pytest.mark.criterion(8, "uncertainty relation")
@pytest.mark.parametrize("name", sorted(PRESETS))
def test_criterion_8_uncertainty(name, grwa_props, record_property):
    a1, a2, nm = moments_from_states(grwa_props[name].bipartite(default_times()))
    base = nm - np.abs(a1) ** 2 + 0.5
    lowest = np.inf
    for phi in np.linspace(0, math.pi / 2, 7):
        v1 = np.real((a2 - a1**2) * np.exp(-2j * phi)) + base
        v2 = np.real((a2 - a1**2) * np.exp(-2j * (phi + math.pi / 2))) + base
        lowest = min(lowest, float(np.min(v1 * v2)))
    record_property(name, f"{lowest:.6f}")
    assert lowest >= 0.25 - 1e-9


@pytest.mark.criterion(9, "GRWA vs exact dynamics")
@pytest.mark.parametrize("g", [0.0, 0.35])
def test_criterion_9_near_decoupled(g, record_property):
    p = ModelParams(1.0, 0.3, 1e-6, g)
    times = default_times()
    diff = np.abs(batched_rho(GrwaPropagator(p, N_DYN), times) - batched_rho(ExactPropagator(p, N_DYN), times))
    record_property(f"max_drho_g{g:g}", f"{diff.max():.1e}")
    assert diff.max() < 1e-6


@pytest.mark.criterion(9, "GRWA vs exact dynamics")
def test_criterion_9_trace_distance_diagnostic(diagnostics, record_property):
    times = default_times()
    curves = []
    for n in (N_DYN, N_DYN + 20):
        delta = batched_rho(GrwaPropagator(B1, n), times) - batched_rho(ExactPropagator(B1, n), times)
        curves.append(0.5 * np.abs(np.linalg.eigvalsh(delta)).sum(axis=1))
    with open(diagnostics / "trace_distance_enhanced.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega_t", f"trace_distance_n{N_DYN}", f"trace_distance_n{N_DYN + 20}"])
        w.writerows([f"{x:.12g}" for x in row] for row in zip(times, *curves))
    drift = float(np.max(np.abs(curves[0] - curves[1])))
    record_property("max_trace_distance", f"{curves[0].max():.4f}")
    record_property("drift", f"{drift:.0e}")
    assert drift < 1e-6
