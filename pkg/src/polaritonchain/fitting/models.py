"""Fit models as scikit-learn style estimators.

Each estimator exposes ``fit(X, y, sample_weight=None)`` and ``predict(X)``
and stores a :class:`FitResult` in ``result_``. Bounded parameters are
optimized in transformed coordinates:

* rates: ``p = exp(q)``
* stretching exponent in (0, 1]: ``p = 1 / (1 + q**2)``
* unbounded location parameters: ``p = center + scale * q``

Initial guesses (documented per model) depend only on the data, so fits are
reproducible.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..core import KB_OVER_H, MU_B_OVER_H, SPIN, FitError
from .results import FitResult, Trace
from .solver import levenberg_marquardt, numerical_jacobian


def resonance_model(omega, omega_r, kappa, kappa_c):
    return 1 - kappa_c / (1j * (omega_r - np.asarray(omega, dtype=float)) + kappa)


def linewidth_model(B, G, gamma, kappa, omega_mode, g):
    detuning = g * MU_B_OVER_H * np.asarray(B, dtype=float) - omega_mode
    return kappa + G**2 * gamma / (detuning**2 + gamma**2)


def stretched_exponential(t, amplitude, T1, x):
    return amplitude * np.exp(-((np.asarray(t, dtype=float) / T1) ** x))


def thermal_model(T, G_zero, g, B):
    return G_zero * np.sqrt(np.tanh(g * MU_B_OVER_H * B * SPIN / (KB_OVER_H * np.asarray(T, dtype=float))))


class _Transform:
    def __init__(self, kind: str, center: float = 0.0, scale: float = 1.0):
        self.kind, self.center, self.scale = kind, center, scale

    def to_q(self, p: float) -> float:
        if self.kind == "log":
            return float(np.log(p))
        if self.kind == "unit":
            return float(np.sqrt(max(1.0 / p - 1.0, 0.0)))
        return (p - self.center) / self.scale

    def to_p(self, q):
        if self.kind == "log":
            return np.exp(q)
        if self.kind == "unit":
            return 1.0 / (1.0 + q * q)
        return self.center + self.scale * q

    def step(self, p: float) -> float:
        # finite-difference step in physical units
        return 1e-6 * (abs(p) if self.kind != "affine" else abs(self.scale))


class _LeastSquaresFit(BaseEstimator):
    model_name = ""
    param_names: tuple[str, ...] = ()

    # subclasses provide these
    def _predict(self, x, p):
        raise NotImplementedError

    def _initial(self, x, y) -> tuple[np.ndarray, list[_Transform]]:
        raise NotImplementedError

    def _check_flags(self, x, y, p) -> list[str]:
        return []

    def _residual_fn(self, x, y, w):
        sw = np.sqrt(w)

        def fun(p):
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                r = (self._predict(x, p) - y) * sw
            if np.iscomplexobj(r):
                return np.concatenate([r.real, r.imag])
            return r

        return fun

    def fit(self, X, y, sample_weight=None):
        trace = Trace(np.ravel(X), y, sample_weight)
        x, y = trace.x, trace.y
        w = np.ones_like(x) if trace.weights is None else trace.weights
        p0, transforms = self._initial(x, y)
        fun_p = self._residual_fn(x, y, w)

        def fun_q(q):
            with np.errstate(over="ignore"):
                return fun_p(np.array([t.to_p(v) for t, v in zip(transforms, q)]))

        q0 = np.array([t.to_q(v) for t, v in zip(transforms, p0)])
        lm = levenberg_marquardt(fun_q, q0, max_iter=self.max_iter)
        p = np.array([t.to_p(v) for t, v in zip(transforms, lm.x)], dtype=float)

        flags = self._check_flags(x, y, p)
        # uncertainties from the Jacobian in physical parameters
        steps = np.array([max(t.step(v), 1e-12) for t, v in zip(transforms, p)])
        stderr, singular = _stderr(numerical_jacobian(fun_p, p, steps), lm.cost)
        if singular:
            flags.append("singular_jacobian")
        for name, v, s in zip(self.param_names, p, stderr):
            if not s <= abs(v):
                flags.append(f"poorly_determined:{name}")
        if not lm.converged:
            flags.append("not_converged")

        self.params_ = dict(zip(self.param_names, p))
        self.history_ = lm.history
        self.result_ = FitResult(
            self.model_name,
            {n: (float(v), float(s)) for n, v, s in zip(self.param_names, p, stderr)},
            float(np.sqrt(lm.cost)),
            bool(lm.converged),
            int(lm.iterations),
            flags,
        )
        return self

    def predict(self, X):
        return self._predict(np.ravel(np.asarray(X, dtype=float)), [self.params_[n] for n in self.param_names])


def _stderr(J: np.ndarray, cost: float) -> tuple[np.ndarray, bool]:
    m, n = J.shape
    s2 = cost / (m - n) if m > n else np.nan
    w, V = np.linalg.eigh(J.T @ J)
    tol = max(w.max(), 0.0) * 1e-12
    keep = w > tol
    cov = (V[:, keep] / w[keep]) @ V[:, keep].T * s2
    out = np.sqrt(np.maximum(np.diag(cov), 0.0))
    # parameters with a component in the null space are undetermined
    if not keep.all():
        undetermined = np.abs(V[:, ~keep]).max(axis=1) > 1e-6
        out = np.where(undetermined, np.inf, out)
    return out, not keep.all()


class ResonanceFit(_LeastSquaresFit):
    """Single notch resonance ``S21 = 1 - kappa_c / (i (omega_r - omega) + kappa)``.

    Initial guess: ``omega_r`` at the minimum of |S21|, ``kappa`` as the half
    width at half maximum of ``|1 - S21|**2``, ``kappa_c`` as the dip depth
    ``max |1 - S21|`` times ``kappa``. With ``magnitude_only`` the residual
    compares |S21| instead of the complex values.
    """

    model_name = "resonance"
    param_names = ("omega_r", "kappa", "kappa_c")

    def __init__(self, magnitude_only: bool = False, max_iter: int = 200):
        self.magnitude_only = magnitude_only
        self.max_iter = max_iter

    def _predict(self, x, p):
        s = resonance_model(x, *p)
        return np.abs(s) if getattr(self, "_fitting_magnitude", False) else s

    def fit(self, X, y, sample_weight=None):
        y = np.asarray(y)
        if not np.iscomplexobj(y) and not self.magnitude_only:
            raise ValueError("resonance fit needs complex S21 unless magnitude_only=True")
        self._fitting_magnitude = self.magnitude_only
        try:
            super().fit(X, np.abs(y) if self.magnitude_only else y, sample_weight)
        finally:
            self._fitting_magnitude = False
        return self

    def _initial(self, x, y):
        mag = np.abs(y)
        i = int(np.argmin(mag))
        dev = np.abs(1 - y) ** 2 if np.iscomplexobj(y) else (1 - mag) * (1 + mag)
        if dev.max() <= 1e-18 or i in (0, len(x) - 1):
            raise FitError("no resonance dip found in |S21|")
        above = np.flatnonzero(dev >= 0.5 * dev.max())
        spacing = np.min(np.diff(x))
        kappa = max(0.5 * (x[above.max()] - x[above.min()]), spacing)
        depth = float(np.sqrt(dev.max()))
        transforms = [_Transform("affine", x[i], kappa), _Transform("log"), _Transform("log")]
        return np.array([x[i], kappa, depth * kappa]), transforms


class LinewidthFieldFit(_LeastSquaresFit):
    """Effective linewidth of a mode versus field, Lorentzian in the spin detuning.

    ``kappa_eff(B) = kappa + G**2 gamma / ((g mu_B B - omega_mode)**2 + gamma**2)``.
    Initial guess: ``kappa`` as the smallest value, ``gamma`` as the half
    width at half maximum of the peak in spin-frequency units and ``G`` from
    the peak height ``G**2 / gamma``. A peak no taller than the largest
    excursion expected from noise alone (``3 sigma sqrt(2 ln N)``, with
    ``sigma`` from the median point-to-point difference) starts ``G`` at zero.
    """

    model_name = "linewidth"
    param_names = ("G_remote", "gamma", "kappa_bare")

    def __init__(self, omega_mode: float = 0.0, g: float = 2.0, max_iter: int = 200):
        self.omega_mode = omega_mode
        self.g = g
        self.max_iter = max_iter

    def _predict(self, x, p):
        return linewidth_model(x, p[0], p[1], p[2], self.omega_mode, self.g)

    def _initial(self, x, y):
        y = np.asarray(y, dtype=float)
        Omega = self.g * MU_B_OVER_H * x
        kappa = max(float(y.min()), 1e-9)
        height = float(y.max()) - kappa
        above = np.flatnonzero(y - kappa >= 0.5 * height)
        if height > 0 and len(above) > 1:
            gamma = 0.5 * (Omega[above.max()] - Omega[above.min()])
        else:
            gamma = 0.25 * (Omega[-1] - Omega[0])
        gamma = max(gamma, np.min(np.diff(Omega)))
        sigma = 1.4826 * np.median(np.abs(np.diff(y))) / np.sqrt(2)
        noise_peak = 3 * sigma * np.sqrt(2 * np.log(len(y)))
        G = np.sqrt(height * gamma) if height > noise_peak else 0.0
        return np.array([G, gamma, kappa]), [_Transform("affine", 0.0, max(G, 1e-3)), _Transform("log"), _Transform("log")]

    def _check_flags(self, x, y, p):
        Omega = self.g * MU_B_OVER_H * x
        if not Omega[0] <= self.omega_mode <= Omega[-1]:
            return ["peak_outside_range"]
        return []

    def fit(self, X, y, sample_weight=None):
        super().fit(X, y, sample_weight)
        # the model only depends on G**2
        G, s = self.result_.params["G_remote"]
        self.result_.params["G_remote"] = (abs(G), s)
        self.params_["G_remote"] = abs(G)
        return self


class StretchedExponentialFit(_LeastSquaresFit):
    """Decay ``amplitude * exp(-(t / T1)**x)`` with ``T1 > 0`` and ``0 < x <= 1``.

    Initial guess: for trial amplitudes slightly above the first sample, a
    straight-line fit of ``ln(-ln(y / A))`` against ``ln t`` gives ``x`` (slope)
    and ``T1``; the trial with the smallest residual in ``y`` is kept.
    """

    model_name = "stretched-exp"
    param_names = ("amplitude", "T1", "x")

    def __init__(self, max_iter: int = 500):
        self.max_iter = max_iter

    def _predict(self, x, p):
        return stretched_exponential(x, *p)

    def _initial(self, t, y):
        y = np.asarray(y, dtype=float)
        if np.any(t <= 0):
            raise ValueError("delays must be positive")
        sign = 1.0 if y[0] >= 0 else -1.0
        ya = sign * y
        best = None
        for factor in np.geomspace(1.0001, 3.0, 60):
            A = factor * ya[0]
            ratio = ya / A
            ok = (ratio > 0) & (ratio < 1)
            if ok.sum() < 3:
                continue
            slope, intercept = np.polyfit(np.log(t[ok]), np.log(-np.log(ratio[ok])), 1)
            xs = float(np.clip(slope, 0.05, 1.0))
            T1 = float(np.exp(-intercept / slope)) if slope > 0 else float(np.median(t))
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                err = np.sum((stretched_exponential(t, A, T1, xs) - ya) ** 2)
            if np.isfinite(err) and (best is None or err < best[0]):
                best = (err, A, T1, xs)
        if best is None:
            A, T1, xs = ya[0], float(np.median(t)), 0.5
        else:
            _, A, T1, xs = best
        xs = min(xs, 1 - 1e-6)
        transforms = [_Transform("affine", sign * A, abs(A) or 1.0), _Transform("log"), _Transform("unit")]
        return np.array([sign * A, T1, xs]), transforms

    def _check_flags(self, x, y, p):
        if abs(y[-1]) >= abs(y[0]):
            return ["non_decaying"]
        return []


class ThermalPolarizationFit(_LeastSquaresFit):
    """Coupling versus temperature ``G_zero * sqrt(tanh(g mu_B B S / k_B T))``.

    Initial guess: median of ``y / sqrt(tanh(...))``.
    """

    model_name = "thermal"
    param_names = ("G_zero",)

    def __init__(self, g: float = 2.0, B_mT: float = 0.0, max_iter: int = 200):
        self.g = g
        self.B_mT = B_mT
        self.max_iter = max_iter

    def _predict(self, x, p):
        return thermal_model(x, p[0], self.g, self.B_mT)

    def _initial(self, T, y):
        if np.any(T <= 0):
            raise ValueError("temperatures must be positive")
        if self.B_mT <= 0:
            raise ValueError("B_mT must be positive")
        G0 = float(np.median(np.asarray(y, dtype=float) / thermal_model(T, 1.0, self.g, self.B_mT)))
        if G0 <= 0:
            raise FitError("couplings must be positive")
        return np.array([G0]), [_Transform("log")]


def _run(estimator: _LeastSquaresFit, trace: Trace) -> FitResult:
    return estimator.fit(trace.x, trace.y, trace.weights).result_


def fit_resonance(trace: Trace, magnitude_only: bool = False) -> FitResult:
    return _run(ResonanceFit(magnitude_only=magnitude_only), trace)


def fit_linewidth_vs_field(trace: Trace, omega_mode: float, g: float) -> FitResult:
    return _run(LinewidthFieldFit(omega_mode, g), trace)


def fit_stretched_exponential(trace: Trace) -> FitResult:
    return _run(StretchedExponentialFit(), trace)


def fit_thermal_polarization(trace: Trace, g: float, B_mT: float) -> FitResult:
    return _run(ThermalPolarizationFit(g, B_mT), trace)


# CLI name -> (estimator, fixed parameters it needs)
MODELS = {
    "resonance": (ResonanceFit, ()),
    "linewidth": (LinewidthFieldFit, ("omega_mode", "g")),
    "stretched-exp": (StretchedExponentialFit, ()),
    "thermal": (ThermalPolarizationFit, ("g", "B_mT")),
}
