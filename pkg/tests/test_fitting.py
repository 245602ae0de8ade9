import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polaritonchain.core import FitError
from polaritonchain.fitting import (
    FitResult,
    LinewidthFieldFit,
    ResonanceFit,
    StretchedExponentialFit,
    ThermalPolarizationFit,
    Trace,
    fit_linewidth_vs_field,
    fit_resonance,
    fit_stretched_exponential,
    fit_thermal_polarization,
    levenberg_marquardt,
    linewidth_model,
    read_trace_csv,
    resonance_model,
    stretched_exponential,
    thermal_model,
    write_trace_csv,
)

OMEGA_MODE = 2720.0
G_SPIN = 2.001


def resonance_trace(omega_r=1703.0, kappa=0.091, kappa_c=0.0185, noise=0.0, seed=0, n=801):
    w = np.linspace(omega_r - 10 * kappa, omega_r + 10 * kappa, n)
    s = 1 - kappa_c / (1j * (omega_r - w) + kappa)
    if noise:
        rng = np.random.default_rng(seed)
        s = s + noise * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return Trace(w, s, x_name="omega_MHz")


def linewidth_trace(G=2.46, gamma=7.3, kappa=0.061, noise=0.0, seed=0, n=301):
    B0 = OMEGA_MODE / (G_SPIN * 13.9962449)
    B = np.linspace(B0 - 3, B0 + 3, n)
    y = kappa + G**2 * gamma / ((G_SPIN * 13.9962449 * B - OMEGA_MODE) ** 2 + gamma**2)
    if noise:
        y = y * (1 + noise * np.random.default_rng(seed).standard_normal(n))
    return Trace(B, y, x_name="B_mT")


def decay_trace(A=0.2, T1=0.2, x=0.3, noise=0.0, seed=0, n=200):
    t = np.geomspace(1e-3 * T1, 50 * T1, n)
    y = A * np.exp(-((t / T1) ** x))
    if noise:
        y = y + noise * A * np.random.default_rng(seed).standard_normal(n)
    return Trace(t, y, x_name="t_s")


def thermal_trace(G0=19.5, g=2.001, B=60.0, noise=0.0, seed=0, n=60):
    T = np.linspace(11, 500, n)
    y = G0 * np.sqrt(np.tanh(g * 13.9962449 * B * 0.5 / (20.836619 * T)))
    if noise:
        y = y * (1 + noise * np.random.default_rng(seed).standard_normal(n))
    return Trace(T, y, x_name="T_mK")


def test_models_match_hand_formulas():
    assert resonance_model(1703.0, 1703.0, 0.091, 0.0185) == pytest.approx(1 - 0.0185 / 0.091)
    peak = linewidth_model(OMEGA_MODE / (G_SPIN * 13.9962449), 2.46, 7.3, 0.061, OMEGA_MODE, G_SPIN)
    assert peak - 0.061 == pytest.approx(2.46**2 / 7.3, rel=1e-12)
    assert stretched_exponential(0.2, 1.5, 0.2, 0.3) == pytest.approx(1.5 / np.e)
    assert thermal_model(1e-9, 19.5, 2.0, 60.0) == pytest.approx(19.5)


def test_resonance_noiseless_exact():
    res = fit_resonance(resonance_trace())
    assert res.converged
    for name, true in (("omega_r", 1703.0), ("kappa", 0.091), ("kappa_c", 0.0185)):
        assert res.value(name) == pytest.approx(true, rel=1e-8)
    assert res.residual < 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_resonance_with_noise(seed):
    res = fit_resonance(resonance_trace(noise=1e-3, seed=seed))
    for name, true in (("omega_r", 1703.0), ("kappa", 0.091), ("kappa_c", 0.0185)):
        assert res.value(name) == pytest.approx(true, rel=0.01)


def test_resonance_magnitude_only():
    tr = resonance_trace()
    res = ResonanceFit(magnitude_only=True).fit(tr.x, np.abs(tr.y)).result_
    assert res.value("omega_r") == pytest.approx(1703.0, rel=1e-8)
    assert res.value("kappa") == pytest.approx(0.091, rel=1e-6)
    with pytest.raises(ValueError, match="complex"):
        ResonanceFit().fit(tr.x, np.abs(tr.y))


def test_flat_trace_has_no_dip():
    w = np.linspace(1700, 1706, 101)
    with pytest.raises(FitError, match="no resonance dip"):
        fit_resonance(Trace(w, np.ones(101, dtype=complex)))


def test_linewidth_recovery():
    res = fit_linewidth_vs_field(linewidth_trace(), OMEGA_MODE, G_SPIN)
    for name, true in (("G_remote", 2.46), ("gamma", 7.3), ("kappa_bare", 0.061)):
        assert res.value(name) == pytest.approx(true, rel=1e-6)
    noisy = fit_linewidth_vs_field(linewidth_trace(noise=1e-3, seed=3), OMEGA_MODE, G_SPIN)
    for name, true in (("G_remote", 2.46), ("gamma", 7.3), ("kappa_bare", 0.061)):
        assert noisy.value(name) == pytest.approx(true, rel=0.01)
    assert not res.flags


def test_linewidth_without_coupling_is_flagged():
    res = fit_linewidth_vs_field(linewidth_trace(G=0.0, noise=1e-3), OMEGA_MODE, G_SPIN)
    assert res.value("G_remote") < 0.1
    assert any(f.startswith("poorly_determined") or f == "singular_jacobian" for f in res.flags)
    assert res.value("kappa_bare") == pytest.approx(0.061, rel=0.01)


def test_linewidth_peak_outside_range_flagged():
    tr = linewidth_trace()
    res = LinewidthFieldFit(omega_mode=OMEGA_MODE + 500, g=G_SPIN).fit(tr.x, tr.y).result_
    assert "peak_outside_range" in res.flags


@pytest.mark.parametrize("T1", [0.2, 0.024])
def test_stretched_exponential_reference_cases(T1):
    res = fit_stretched_exponential(decay_trace(T1=T1, noise=1e-3, seed=1))
    assert res.value("T1") == pytest.approx(T1, rel=0.02)
    assert res.value("x") == pytest.approx(0.3, rel=0.02)
    exact = fit_stretched_exponential(decay_trace(T1=T1))
    assert exact.value("T1") == pytest.approx(T1, rel=1e-6)
    assert exact.value("x") == pytest.approx(0.3, rel=1e-6)


def test_stretched_exponential_simple_exponential():
    res = fit_stretched_exponential(decay_trace(x=1.0, T1=0.05))
    assert res.value("x") == pytest.approx(1.0, rel=1e-6)
    assert res.value("T1") == pytest.approx(0.05, rel=1e-6)
    assert not res.flags


def test_stretched_exponential_non_decaying_flag():
    t = np.linspace(0.01, 1, 50)
    res = fit_stretched_exponential(Trace(t, 1 + 0.1 * t))
    assert "non_decaying" in res.flags


def test_thermal_recovery():
    exact = fit_thermal_polarization(thermal_trace(), 2.001, 60.0)
    assert exact.value("G_zero") == pytest.approx(19.5, rel=1e-10)
    noisy = fit_thermal_polarization(thermal_trace(noise=1e-3, seed=2), 2.001, 60.0)
    assert noisy.value("G_zero") == pytest.approx(19.5, rel=0.01)


def test_thermal_excess_is_reported_not_clamped():
    tr = thermal_trace()
    y = tr.y.copy()
    y[:5] *= 1.3
    res = fit_thermal_polarization(Trace(tr.x, y), 2.001, 60.0)
    assert res.residual > 1.0


@settings(max_examples=25, deadline=None)
@given(st.floats(1000, 3000), st.floats(0.02, 1.0), st.floats(0.05, 0.95))
def test_resonance_round_trip(w, kappa, frac):
    res = fit_resonance(resonance_trace(w, kappa, frac * kappa))
    assert res.value("omega_r") == pytest.approx(w, rel=1e-6)
    assert res.value("kappa") == pytest.approx(kappa, rel=1e-6)
    assert res.value("kappa_c") == pytest.approx(frac * kappa, rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(1.0, 6.0), st.floats(3.0, 12.0), st.floats(0.02, 0.5))
def test_linewidth_round_trip(G, gamma, kappa):
    res = fit_linewidth_vs_field(linewidth_trace(G, gamma, kappa), OMEGA_MODE, G_SPIN)
    assert res.value("G_remote") == pytest.approx(G, rel=1e-6)
    assert res.value("gamma") == pytest.approx(gamma, rel=1e-6)
    assert res.value("kappa_bare") == pytest.approx(kappa, rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(0.01, 1.0), st.floats(0.2, 1.0))
def test_stretched_round_trip(A, T1, x):
    res = fit_stretched_exponential(decay_trace(A, T1, x))
    assert res.value("amplitude") == pytest.approx(A, rel=1e-6)
    assert res.value("T1") == pytest.approx(T1, rel=1e-6)
    assert res.value("x") == pytest.approx(x, rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(1.0, 50.0), st.floats(1.9, 2.1), st.floats(10.0, 200.0))
def test_thermal_round_trip(G0, g, B):
    res = fit_thermal_polarization(thermal_trace(G0, g, B), g, B)
    assert res.value("G_zero") == pytest.approx(G0, rel=1e-6)


@pytest.mark.parametrize("est,trace", [
    (ResonanceFit(), resonance_trace(noise=1e-3)),
    (LinewidthFieldFit(OMEGA_MODE, G_SPIN), linewidth_trace(noise=1e-2)),
    (StretchedExponentialFit(), decay_trace(noise=1e-2)),
    (ThermalPolarizationFit(2.001, 60.0), thermal_trace(noise=1e-2)),
])
def test_accepted_costs_never_increase(est, trace):
    est.fit(trace.x, trace.y)
    h = np.asarray(est.history_)
    assert len(h) >= 1
    assert np.all(np.diff(h) <= 0)


def test_solver_on_rosenbrock():
    res = levenberg_marquardt(lambda p: np.array([10 * (p[1] - p[0] ** 2), 1 - p[0]]), [-1.2, 1.0])
    assert res.converged
    assert res.x == pytest.approx([1.0, 1.0], abs=1e-8)
    assert np.all(np.diff(res.history) <= 0)


def test_stderr_scales_with_inverse_sqrt_points():
    # ratio of mean reported errors for N and 4N points should be 2; the spread over 100 draws gives the 3 sigma band
    def errors(n):
        out = []
        for seed in range(100):
            w = np.linspace(1703 - 0.91, 1703 + 0.91, n)
            rng = np.random.default_rng(seed + 1000 * n)
            s = resonance_model(w, 1703.0, 0.091, 0.0185) + 1e-3 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
            out.append(fit_resonance(Trace(w, s)).stderr("kappa"))
        return np.array(out)

    small, large = errors(200), errors(800)
    ratio = small.mean() / large.mean()
    sigma = ratio * np.hypot(small.std(ddof=1) / small.mean(), large.std(ddof=1) / large.mean()) / np.sqrt(100)
    assert abs(ratio - 2.0) <= 3 * sigma + 0.02


def test_stderr_matches_scatter():
    values, errs = [], []
    for seed in range(100):
        res = fit_resonance(resonance_trace(noise=2e-3, seed=seed, n=201))
        values.append(res.value("kappa"))
        errs.append(res.stderr("kappa"))
    assert np.std(values, ddof=1) == pytest.approx(np.mean(errs), rel=0.25)


def test_trace_validation():
    with pytest.raises(ValueError, match="increasing"):
        Trace([1.0, 1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="equal length"):
        Trace([1.0, 2.0], [1.0])


@pytest.mark.parametrize("trace", [resonance_trace(n=11), decay_trace(n=11)])
def test_trace_csv_round_trip(tmp_path, trace):
    p = tmp_path / "trace.csv"
    write_trace_csv(trace, p)
    back = read_trace_csv(p)
    assert back.x_name == trace.x_name
    assert np.array_equal(back.x, trace.x) and np.array_equal(back.y, trace.y)


def test_trace_csv_weights_and_errors(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("T_mK,G_MHz,weight\n11,19.4,1\n20,19.3,2\n")
    tr = read_trace_csv(p)
    assert tr.x_name == "T_mK" and tr.weights.tolist() == [1.0, 2.0]
    p.write_text("T_mK,a,b\n11,1,2\n")
    with pytest.raises(ValueError, match="value column"):
        read_trace_csv(p)


def test_fit_result_json(tmp_path):
    res = FitResult("thermal", {"G_zero": (19.5, float("inf"))}, 0.1, True, 4, ["singular_jacobian"])
    text = res.to_json(tmp_path / "fit.json")
    doc = json.loads(text)
    assert doc["params"]["G_zero"] == {"value": 19.5, "stderr": "inf"}
    assert set(doc) >= {"params", "residual", "converged", "iterations"}
    assert FitResult.from_dict(doc) == res
    assert json.loads((tmp_path / "fit.json").read_text()) == doc


def test_estimators_follow_sklearn_conventions():
    from sklearn.base import clone

    est = LinewidthFieldFit(omega_mode=2720.0, g=2.001)
    assert est.get_params() == {"omega_mode": 2720.0, "g": 2.001, "max_iter": 200}
    copy = clone(est)
    assert copy.get_params() == est.get_params() and not hasattr(copy, "result_")
    tr = thermal_trace()
    fitted = ThermalPolarizationFit(2.001, 60.0).fit(tr.x, tr.y)
    assert fitted.predict(tr.x) == pytest.approx(tr.y, rel=1e-9)
