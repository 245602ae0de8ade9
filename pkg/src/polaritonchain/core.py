"""Units, constants, configuration records and their validation.

All frequencies, couplings and loss rates are linear frequencies (omega / 2 pi)
in MHz. Magnetic field is in mT and temperature in mK.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

MU_B_OVER_H = 13.9962449  # MHz / mT
KB_OVER_H = 20.836619  # MHz / mK
SPIN = 0.5


@dataclass(frozen=True)
class PhysicalConstants:
    mu_B_over_h: float = MU_B_OVER_H
    kB_over_h: float = KB_OVER_H


CONSTANTS = PhysicalConstants()


class ConfigError(ValueError):
    """Invalid chip configuration. ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NumericalError(RuntimeError):
    """Base class for failures of a numerical procedure."""


class DegenerateInputError(NumericalError):
    pass


class ResonanceError(NumericalError):
    """A perturbative expression was evaluated exactly on resonance."""


class TrackingError(NumericalError):
    pass


class SingularResponseError(NumericalError):
    pass


class FitError(NumericalError):
    pass


class GridTooLargeError(ValueError):
    pass


def spin_frequency(g, B):
    """Larmor frequency ``g * mu_B * B / h`` in MHz for a field ``B`` in mT."""
    B_arr = np.asarray(B, dtype=float)
    if np.any(B_arr < 0):
        raise ValueError("field must be non-negative (sweeps are given in |B|)")
    if g <= 0:
        raise ValueError("g-factor must be positive")
    out = g * MU_B_OVER_H * B_arr
    return float(out) if np.ndim(out) == 0 else out


def thermal_coupling(G0, g, B, T):
    """Collective coupling reduced by the thermal spin polarization.

    ``G0 * sqrt(tanh(g mu_B B S / k_B T))`` with S = 1/2. ``T <= 0`` means
    full polarization and returns ``G0`` unchanged.
    """
    B_arr = np.asarray(B, dtype=float)
    if T is None or T <= 0:
        return float(G0) if B_arr.ndim == 0 else np.full(B_arr.shape, float(G0))
    if np.any(B_arr < 0):
        raise ValueError("field must be non-negative")
    arg = g * MU_B_OVER_H * B_arr * SPIN / (KB_OVER_H * T)
    out = G0 * np.sqrt(np.tanh(arg))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LerParams:
    label: str
    omega_r: float
    kappa: float
    kappa_c: float = 0.0


@dataclass(frozen=True)
class SpinEnsembleParams:
    g_factor: float
    coupling_G: float
    gamma: float
    gamma_c_mag: float = 0.0
    gamma_c_phase: float = 0.0
    # sign applied to the principal square root of the complex feedline coupling
    sqrt_branch: int = 1

    @property
    def gamma_c(self) -> complex:
        return self.gamma_c_mag * complex(math.cos(self.gamma_c_phase), math.sin(self.gamma_c_phase))

    @property
    def sqrt_gamma_c(self) -> complex:
        return self.sqrt_branch * complex(np.sqrt(complex(self.gamma_c)))


@dataclass(frozen=True)
class ChipConfig:
    """A chain of resonators, optional spin ensembles and their couplings.

    ``couplings`` holds both orientations ``(i, j)`` and ``(j, i)`` with
    0-based resonator positions.
    """

    lers: tuple[LerParams, ...]
    spins: tuple[SpinEnsembleParams | None, ...]
    couplings: dict = field(default_factory=dict)
    temperature: float = 0.0

    @property
    def n_lers(self) -> int:
        return len(self.lers)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(ler.label for ler in self.lers)

    def kappa_between(self, i: int, j: int) -> float:
        return self.couplings.get((i, j), 0.0)

    def coupling_at(self, j: int, B: float) -> float:
        """Spin-photon coupling of slot ``j`` at field ``B`` including temperature."""
        spin = self.spins[j]
        if spin is None:
            return 0.0
        return thermal_coupling(spin.coupling_G, spin.g_factor, B, self.temperature)

    def spin_frequency_at(self, j: int, B: float) -> float:
        return spin_frequency(self.spins[j].g_factor, B)

    def with_couplings(self, **changes) -> "ChipConfig":
        """Copy with selected parameters replaced.

        Accepted keywords: ``kappa_12`` (pair coupling between positions 0
        and 1), ``G`` (sequence of collective couplings, ``None`` keeps a
        slot), ``temperature``.
        """
        couplings = dict(self.couplings)
        spins = list(self.spins)
        temperature = changes.get("temperature", self.temperature)
        if "kappa_12" in changes:
            k = float(changes["kappa_12"])
            couplings[(0, 1)] = couplings[(1, 0)] = k
        if "G" in changes:
            for j, G in enumerate(changes["G"]):
                if G is not None and spins[j] is not None:
                    spins[j] = replace(spins[j], coupling_G=float(G))
        return ChipConfig(tuple(self.lers), tuple(spins), couplings, temperature)

    def without_spin_coupling(self) -> "ChipConfig":
        return self.with_couplings(G=[0.0] * self.n_lers)

    def to_dict(self) -> dict:
        lers = [
            {"label": l.label, "omega_r_MHz": l.omega_r, "kappa_MHz": l.kappa, "kappa_c_MHz": l.kappa_c}
            for l in self.lers
        ]
        spins = {}
        for ler, s in zip(self.lers, self.spins):
            if s is None:
                continue
            entry = {
                "g": s.g_factor,
                "G_MHz": s.coupling_G,
                "gamma_MHz": s.gamma,
                "gamma_c_MHz": s.gamma_c_mag,
                "gamma_c_phase_rad": s.gamma_c_phase,
            }
            if s.sqrt_branch != 1:
                entry["gamma_c_sqrt_branch"] = s.sqrt_branch
            spins[ler.label] = entry
        couplings = [
            {"between": [i + 1, j + 1], "kappa_MHz": k}
            for (i, j), k in sorted(self.couplings.items())
            if i < j
        ]
        return {"lers": lers, "spins": spins, "couplings": couplings, "temperature_mK": self.temperature}


def _number(doc: Mapping, key: str, path: str, default=None) -> float:
    where = f"{path}.{key}" if path else key
    if key not in doc:
        if default is not None:
            return float(default)
        raise ConfigError("missing required field", where)
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", where)
    if not math.isfinite(value):
        raise ConfigError("must be finite", where)
    return float(value)


def _resolve_ler(ref: Any, labels: list[str], path: str) -> int:
    # integers are 1-based positions, strings are labels
    if isinstance(ref, bool):
        raise ConfigError(f"invalid resonator reference {ref!r}", path)
    if isinstance(ref, int):
        if not 1 <= ref <= len(labels):
            raise ConfigError(f"resonator index {ref} out of range 1..{len(labels)}", path)
        return ref - 1
    if isinstance(ref, str):
        if ref not in labels:
            raise ConfigError(f"unknown resonator label {ref!r}", path)
        return labels.index(ref)
    raise ConfigError(f"invalid resonator reference {ref!r}", path)


def validate_config(raw: Mapping | ChipConfig) -> ChipConfig:
    """Normalize a parsed configuration document into a :class:`ChipConfig`.

    Accepts the JSON layout with keys ``lers``, ``spins``, ``couplings`` and
    ``temperature_mK``, or an existing ``ChipConfig`` (re-validated).
    """
    if isinstance(raw, ChipConfig):
        raw = raw.to_dict()
    if not isinstance(raw, Mapping):
        raise ConfigError("configuration must be a JSON object")

    ler_docs = raw.get("lers")
    if ler_docs is None:
        raise ConfigError("missing required field", "lers")
    if not isinstance(ler_docs, list):
        raise ConfigError("must be a list", "lers")
    if not ler_docs:
        raise ConfigError("no resonators", "lers")

    lers: list[LerParams] = []
    for n, doc in enumerate(ler_docs):
        path = f"lers[{n}]"
        if not isinstance(doc, Mapping):
            raise ConfigError("must be an object", path)
        if "label" not in doc:
            raise ConfigError("missing required field", f"{path}.label")
        label = str(doc["label"])
        omega_r = _number(doc, "omega_r_MHz", path)
        kappa = _number(doc, "kappa_MHz", path)
        kappa_c = _number(doc, "kappa_c_MHz", path, default=0.0)
        if omega_r <= 0:
            raise ConfigError("must be positive", f"{path}.omega_r_MHz")
        if kappa <= 0:
            raise ConfigError("must be positive", f"{path}.kappa_MHz")
        if kappa_c < 0:
            raise ConfigError("must be non-negative", f"{path}.kappa_c_MHz")
        if kappa_c > kappa:
            warnings.warn(f"{path}: kappa_c exceeds total kappa", stacklevel=2)
        if label in [l.label for l in lers]:
            raise ConfigError(f"duplicate label {label!r}", f"{path}.label")
        lers.append(LerParams(label, omega_r, kappa, kappa_c))
    labels = [l.label for l in lers]

    spin_docs = raw.get("spins") or {}
    if not isinstance(spin_docs, Mapping):
        raise ConfigError("must be an object keyed by resonator label", "spins")
    spins: list[SpinEnsembleParams | None] = [None] * len(lers)
    for key, doc in spin_docs.items():
        path = f"spins.{key}"
        if key not in labels:
            raise ConfigError(f"unknown resonator label {key!r}", path)
        if not isinstance(doc, Mapping):
            raise ConfigError("must be an object", path)
        g = _number(doc, "g", path)
        G = _number(doc, "G_MHz", path)
        gamma = _number(doc, "gamma_MHz", path)
        gc = _number(doc, "gamma_c_MHz", path, default=0.0)
        phase = _number(doc, "gamma_c_phase_rad", path, default=0.0)
        branch = doc.get("gamma_c_sqrt_branch", 1)
        if g <= 0:
            raise ConfigError("must be positive", f"{path}.g")
        if G < 0:
            raise ConfigError("must be non-negative", f"{path}.G_MHz")
        if gamma <= 0:
            raise ConfigError("must be positive", f"{path}.gamma_MHz")
        if gc < 0:
            raise ConfigError("must be non-negative", f"{path}.gamma_c_MHz")
        if branch not in (1, -1):
            raise ConfigError("must be +1 or -1", f"{path}.gamma_c_sqrt_branch")
        spins[labels.index(key)] = SpinEnsembleParams(g, G, gamma, gc, phase, int(branch))

    couplings: dict[tuple[int, int], float] = {}
    coupling_docs = raw.get("couplings") or []
    if not isinstance(coupling_docs, list):
        raise ConfigError("must be a list", "couplings")
    for n, doc in enumerate(coupling_docs):
        path = f"couplings[{n}]"
        if isinstance(doc, Mapping):
            pair = doc.get("between")
            if pair is None:
                raise ConfigError("missing required field", f"{path}.between")
            kappa_ij = _number(doc, "kappa_MHz", path)
        elif isinstance(doc, list) and len(doc) == 3:
            pair, kappa_ij = doc[:2], doc[2]
            if isinstance(kappa_ij, bool) or not isinstance(kappa_ij, (int, float)):
                raise ConfigError("coupling must be a number", path)
            kappa_ij = float(kappa_ij)
        else:
            raise ConfigError("expected {'between': [i, j], 'kappa_MHz': k} or [i, j, k]", path)
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError("must name exactly two resonators", f"{path}.between")
        i = _resolve_ler(pair[0], labels, f"{path}.between[0]")
        j = _resolve_ler(pair[1], labels, f"{path}.between[1]")
        if i == j:
            raise ConfigError("self-coupling is not allowed", f"{path}.between")
        if kappa_ij < 0:
            raise ConfigError("must be non-negative", f"{path}.kappa_MHz")
        if (i, j) in couplings:
            raise ConfigError("duplicate coupling entry", f"{path}.between")
        couplings[(i, j)] = couplings[(j, i)] = kappa_ij

    temperature = _number(raw, "temperature_mK", "", default=0.0)
    if temperature < 0:
        raise ConfigError("must be non-negative", "temperature_mK")

    return ChipConfig(tuple(lers), tuple(spins), couplings, temperature)


def load_config(path: str | Path) -> ChipConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    return validate_config(doc)
