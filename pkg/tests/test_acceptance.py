"""Exit criteria, each run at its stated tolerance."""

import time

import numpy as np
import pytest

from polaritonchain import presets
from polaritonchain.closedform import (
    RemoteCouplingInputs,
    crossing_field,
    dispersive_shifts,
    effective_hamiltonian,
    effective_spin_spin_J,
    polariton_gap,
    predicted_gap_one_spin,
    remote_coupling,
)
from polaritonchain.entanglement import negativity_sweep
from polaritonchain.fitting import (
    Trace,
    fit_linewidth_vs_field,
    fit_resonance,
    fit_stretched_exponential,
    fit_thermal_polarization,
)
from polaritonchain.spectrum import min_gap, normal_modes, polariton_angle, solve
from polaritonchain.transmission import local_visibility, s21_closed_pair, s21_general

pytestmark = pytest.mark.acceptance

POLARITON_WINDOW = (50.0, 62.0)


def test_1_remote_coupling(criterion):
    inverted = remote_coupling(RemoteCouplingInputs(5.4, 9.36, 6.49))
    rounded = remote_coupling(RemoteCouplingInputs(5.4, 10.0, 6.49))
    ok = abs(inverted - 2.46) <= 0.01 and abs(rounded - 2.38) <= 0.005 and abs(rounded / 2.46 - 1) < 0.04
    criterion(1, ok, f"G_remote = {inverted:.4f} (detuning 9.36), {rounded:.4f} (detuning 10) MHz")


def test_2_one_spin_gap(criterion):
    start = time.perf_counter()
    worst = (0.0, None)
    for kappa in np.linspace(0.5, 10.0, 20):
        cfg = presets.remote_pair(kappa_12=kappa)
        B0 = crossing_field(cfg).B
        _, exact = min_gap(cfg, 0, (B0 - 8, B0 + 8), n_grid=801)
        pred = predicted_gap_one_spin(RemoteCouplingInputs(5.4, 10.0, kappa))
        err = pred / exact - 1
        if abs(err) > abs(worst[0]):
            worst = (err, kappa)
    elapsed = time.perf_counter() - start
    ok = abs(worst[0]) <= 0.05 and elapsed < 10
    criterion(2, ok, f"largest relative deviation {worst[0]:+.3%} at kappa_12 = {worst[1]:.2f} MHz, {elapsed:.1f} s")


def test_3_polariton_gap(criterion):
    cfg = presets.polariton_pair()
    B, gap = min_gap(cfg, 2, POLARITON_WINDOW)
    formula = polariton_gap(1.06, polariton_angle(0, cfg, B), polariton_angle(1, cfg, B))
    ok = abs(gap / 1.9 - 1) <= 0.10 and abs(B - 59.2) <= 1.5 and abs(formula / gap - 1) <= 0.15
    criterion(3, ok, f"exact gap {gap:.4f} MHz at {B:.3f} mT, formula {formula:.4f} MHz")


def test_4_uncoupled_control(criterion):
    B, gap = min_gap(presets.polariton_pair(kappa_12=0.0), 2, POLARITON_WINDOW)
    criterion(4, gap < 0.01, f"minimum upper-branch separation {gap:.2e} MHz at {B:.3f} mT")


def test_5_input_output_equivalence(criterion):
    rng = np.random.default_rng(20240501)
    worst = 0.0
    n_configs, n_omega = 10_000, 100
    for _ in range(n_configs):
        w1 = rng.uniform(1600, 1800)
        cfg = presets._pair(
            w1, w1 + rng.uniform(-20, 20), rng.uniform(0, 10),
            ler1=(k1 := rng.uniform(0.01, 1.0), k1 * rng.uniform(0, 1)),
            ler2=(k2 := rng.uniform(0.01, 1.0), k2 * rng.uniform(0, 1)),
            spin1={"g": 2.001, "G_MHz": rng.uniform(0, 30), "gamma_MHz": rng.uniform(0.01, 10)},
            spin2={"g": 2.003, "G_MHz": rng.uniform(0, 30), "gamma_MHz": rng.uniform(0.01, 10)},
        )
        B = rng.uniform(40, 80)
        omega = np.sort(w1 + rng.uniform(-40, 40, n_omega))
        worst = max(worst, np.abs(s21_closed_pair(omega, cfg, B) - s21_general(omega, cfg, B)).max())
    criterion(5, worst <= 1e-10, f"max |closed - general| = {worst:.2e} over {n_configs * n_omega} samples")


def test_6a_dark_state(criterion):
    cfg = presets.polariton_pair()
    B, _ = min_gap(cfg, 2, POLARITON_WINDOW)
    v = local_visibility(cfg, B, 2)
    criterion("6a", v < 0.02, f"antisymmetric-branch visibility {v:.4f} at {B:.3f} mT with gamma_c = 0")


def test_6b_feedline_phase_brightens(criterion):
    B, _ = min_gap(presets.polariton_pair(), 2, POLARITON_WINDOW)
    thetas = np.linspace(0, 2 * np.pi, 72, endpoint=False)
    vis = [local_visibility(presets.polariton_pair(gamma_c1=0.065, phase=t), B, 2) for t in thetas]
    k = int(np.argmax(vis))
    criterion("6b", vis[k] > 0.05, f"largest visibility {vis[k]:.4f} at theta = {thetas[k]:.2f} rad")


def test_7_negativity(criterion):
    degenerate = negativity_sweep(presets.empty_pair(kappa_12=1.0), [0.0, 60.0])
    uncoupled = negativity_sweep(presets.polariton_pair(kappa_12=0.0), np.linspace(55, 64, 37))
    sweep = negativity_sweep(presets.polariton_pair(), np.linspace(55, 64, 181), branches=(2, 3))
    B_cross, _ = min_gap(presets.polariton_pair(), 2, POLARITON_WINDOW)
    peak = sweep.negativity.max(axis=1)
    B_peak = sweep.B[sweep.negativity.argmax(axis=1)]
    ok = (
        np.abs(degenerate.negativity - 0.5).max() <= 1e-9
        and np.all(uncoupled.negativity == 0.0)
        and np.all(peak > sweep.baseline[:, 0])
        and np.all(np.abs(B_peak - B_cross) < 1.5)
    )
    criterion(7, ok, f"degenerate {degenerate.negativity.min():.12f}, uncoupled max {uncoupled.negativity.max()}, "
                     f"peaks {np.round(peak, 4).tolist()} near {np.round(B_peak, 2).tolist()} mT "
                     f"vs baseline {np.round(sweep.baseline[:, 0], 4).tolist()}")


def test_8_schrieffer_wolff(criterion):
    cfg = presets.polariton_pair()
    B = 50.0
    modes = normal_modes(cfg, B=B)
    rep = dispersive_shifts(cfg, B)
    G_max = max(abs(g) for g in modes.gtilde.values())
    d_min = min(abs(d) for d in rep.detunings.values())
    H_eff, _ = effective_hamiltonian(cfg, B)
    exact = solve(cfg, B).eigenvalues[:2]  # both spins sit far below the photon modes here
    approx = np.sort(np.linalg.eigvalsh(H_eff[:2, :2]))
    err, bound = np.abs(approx - exact).max(), G_max**3 / d_min**2

    J = effective_spin_spin_J(cfg, B)
    bilinear = max(
        abs(effective_spin_spin_J(cfg.with_couplings(G=[19.5 * a, 8.5 * b]), B) / (a * b * J) - 1)
        for a, b in ((0.5, 2.0), (3.0, 0.1), (1.7, 1.7))
    )
    ok = d_min >= 10 * G_max and err <= bound and bilinear <= 1e-12
    criterion(8, ok, f"|detuning| / G = {d_min / G_max:.1f}, eigenvalue error {err:.2e} <= {bound:.2e}, "
                     f"J bilinearity {bilinear:.1e}")


def _rel(res, truth):
    return max(abs(res.value(k) / v - 1) for k, v in truth.items())


def test_9_fit_round_trips(criterion):
    rng = np.random.default_rng(7)
    worst = {}

    # resonance, 0.1 % complex noise, 1 % tolerance
    res_truth = {"omega_r": 1703.0, "kappa": 0.091, "kappa_c": 0.0185}
    w = np.linspace(1703 - 0.91, 1703 + 0.91, 801)
    s = 1 - 0.0185 / (1j * (1703 - w) + 0.091)
    noise = 1e-3 * (rng.standard_normal(w.size) + 1j * rng.standard_normal(w.size))
    worst["resonance"] = (_rel(fit_resonance(Trace(w, s)), res_truth),
                          _rel(fit_resonance(Trace(w, s + noise)), res_truth), 0.01)

    # linewidth versus field, 1 %
    lw_truth = {"G_remote": 2.46, "gamma": 7.3, "kappa_bare": 0.061}
    B0 = 2720.0 / (2.001 * 13.9962449)
    B = np.linspace(B0 - 3, B0 + 3, 301)
    kap = 0.061 + 2.46**2 * 7.3 / ((2.001 * 13.9962449 * B - 2720.0) ** 2 + 7.3**2)
    worst["linewidth"] = (
        _rel(fit_linewidth_vs_field(Trace(B, kap), 2720.0, 2.001), lw_truth),
        _rel(fit_linewidth_vs_field(Trace(B, kap * (1 + 1e-3 * rng.standard_normal(B.size))), 2720.0, 2.001),
             lw_truth),
        0.01,
    )

    # stretched exponential, both reference lifetimes, 2 %
    for T1 in (0.2, 0.024):
        truth = {"amplitude": 0.2, "T1": T1, "x": 0.3}
        t = np.geomspace(1e-3 * T1, 50 * T1, 200)
        y = 0.2 * np.exp(-((t / T1) ** 0.3))
        worst[f"stretched T1={T1}"] = (
            _rel(fit_stretched_exponential(Trace(t, y)), truth),
            _rel(fit_stretched_exponential(Trace(t, y + 2e-4 * rng.standard_normal(t.size))), truth),
            0.02,
        )

    # thermal polarization, 1 %
    T = np.linspace(11, 500, 60)
    G = 19.5 * np.sqrt(np.tanh(2.001 * 13.9962449 * 60 * 0.5 / (20.836619 * T)))
    worst["thermal"] = (
        _rel(fit_thermal_polarization(Trace(T, G), 2.001, 60.0), {"G_zero": 19.5}),
        _rel(fit_thermal_polarization(Trace(T, G * (1 + 1e-3 * rng.standard_normal(T.size))), 2.001, 60.0),
             {"G_zero": 19.5}),
        0.01,
    )
    ok = all(clean <= 1e-6 and noisy <= tol for clean, noisy, tol in worst.values())
    detail = "; ".join(f"{k}: {c:.1e} / {n:.2%}" for k, (c, n, _) in worst.items())
    criterion(9, ok, f"noiseless / noisy relative errors: {detail}")


@pytest.mark.parametrize("host,empty", [(2730.0, 2720.0), (2720.0, 2730.0)])
def test_10_crossing_field(criterion, host, empty):
    deviations, distances = [], []
    for kappa in (2.0, 5.0, 10.0, 20.0):
        cfg = presets.remote_pair(kappa_12=kappa, G=20.0, host=host, empty=empty)
        cross = crossing_field(cfg)
        found = [min_gap(cfg, lower, (cross.B - 8, cross.B + 8)) for lower in (0, 1)]
        B_exact = min(found, key=lambda r: r[1])[0]
        deviations.append(abs(cross.B - B_exact))
        distances.append(abs(B_exact - cross.bare_B))
    ok = max(deviations) < 0.5 and all(np.diff(distances) < 0)
    criterion(10, ok, f"host {host:g} MHz: max |predicted - exact| = {max(deviations):.3f} mT, "
                      f"distance to bare resonance {np.round(distances, 3).tolist()} mT")

