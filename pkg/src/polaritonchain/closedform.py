"""Closed-form couplings, gaps and dispersive quantities of a resonator pair.

These are perturbative estimates; each function that relies on a validity
condition returns the condition alongside the value instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import MU_B_OVER_H, ChipConfig, DegenerateInputError, ResonanceError, spin_frequency
from .spectrum import normal_modes

DISPERSIVE_RATIO = 0.1
CROSSING_RATIO = 3.0


@dataclass(frozen=True)
class RemoteCouplingInputs:
    G_local: float
    delta_omega_r: float
    kappa_12: float

    def __post_init__(self):
        if self.G_local < 0:
            raise ValueError("G_local must be non-negative")
        if self.kappa_12 < 0:
            raise ValueError("kappa_12 must be non-negative")


def remote_coupling(inputs: RemoteCouplingInputs) -> float:
    """Coupling of an ensemble to the mode localized on the neighbouring resonator.

    ``G / sqrt(2) * sqrt(1 - d / sqrt(d**2 + 4 k**2))`` with ``d`` the signed
    detuning carried by ``inputs``.
    """
    d, k = inputs.delta_omega_r, inputs.kappa_12
    if d == 0 and k == 0:
        raise DegenerateInputError("remote coupling undefined for zero detuning and zero coupling")
    return float(inputs.G_local / np.sqrt(2) * np.sqrt(1 - d / np.hypot(d, 2 * k)))


def remote_inputs(config: ChipConfig, pair: tuple[int, int] = (0, 1), B: float | None = None) -> RemoteCouplingInputs:
    """Inputs for a pair where exactly one resonator hosts an ensemble.

    The detuning is taken as ``|omega_empty - omega_host|``, which selects the
    mode localized on the empty resonator whichever of the two lies higher.
    """
    hosts = [j for j in pair if config.spins[j] is not None]
    if len(hosts) != 1:
        raise ValueError("remote coupling needs exactly one ensemble on the pair")
    host = hosts[0]
    empty = pair[1] if host == pair[0] else pair[0]
    G = config.spins[host].coupling_G if B is None else config.coupling_at(host, B)
    delta = abs(config.lers[empty].omega_r - config.lers[host].omega_r)
    return RemoteCouplingInputs(G, delta, config.kappa_between(*pair))


def predicted_gap_one_spin(inputs: RemoteCouplingInputs) -> float:
    return 2.0 * remote_coupling(inputs)


def polariton_coupling(kappa_12: float, theta_1: float, theta_2: float) -> float:
    """Coupling between the two upper polaritons, ``k cos(t1/2) cos(t2/2)``."""
    return float(kappa_12 * (np.cos(theta_1 / 2) * np.cos(theta_2 / 2)))


def polariton_gap(kappa_12: float, theta_1: float, theta_2: float) -> float:
    """Anticrossing gap between the upper polaritons of two spin-resonator modules.

    Angles follow :func:`polaritonchain.spectrum.polariton_angle`.
    """
    return 2.0 * polariton_coupling(kappa_12, theta_1, theta_2)


def pseudo_eigenenergies(Omega_S1: float, omega_plus: float, Gtilde_1plus: float) -> tuple[float, float]:
    """Upper and lower branch of the spin / b_+ Jaynes-Cummings block."""
    mean = 0.5 * (Omega_S1 + omega_plus)
    half = 0.5 * np.sqrt((Omega_S1 - omega_plus) ** 2 + 4 * Gtilde_1plus**2)
    return float(mean + half), float(mean - half)


@dataclass(frozen=True)
class CrossingField:
    B: float  # mT
    Omega_S: float  # MHz at the crossing
    bare_B: float  # field where the bare spin meets the crossed mode
    ratio: float  # |Omega_S - omega_host| / |G_host|
    valid: bool
    host_mode: str  # "+" or "-"


def crossing_field(config: ChipConfig, pair: tuple[int, int] = (0, 1)) -> CrossingField:
    """Field where the host polariton crosses the normal mode localized on the empty resonator.

    The host mode is the normal mode carrying most of the host resonator.
    Solving the host block for a branch at the other mode frequency gives
    ``Omega_S = omega_other + G_host**2 / (omega_host - omega_other)``; with
    the host on the upper mode this is ``omega_- + G_+**2 / (omega_+ - omega_-)``.
    """
    hosts = [j for j in pair if config.spins[j] is not None]
    if len(hosts) != 1:
        raise ValueError("crossing field needs exactly one ensemble on the pair")
    host = hosts[0]
    modes = normal_modes(config, pair)
    if modes.omega_plus == modes.omega_minus:
        raise DegenerateInputError("normal modes are degenerate")
    g_plus, g_minus = modes.gtilde[(host, "+")], modes.gtilde[(host, "-")]
    # host weight of b_+ from the mixing angle, so that G = 0 is handled too
    host_plus = np.cos(modes.phi / 2) ** 2 if host == pair[0] else np.sin(modes.phi / 2) ** 2
    if host_plus >= 0.5:
        w_host, w_other, G_host, tag = modes.omega_plus, modes.omega_minus, g_plus, "+"
    else:
        w_host, w_other, G_host, tag = modes.omega_minus, modes.omega_plus, g_minus, "-"
    Omega = w_other + G_host**2 / (w_host - w_other)
    g = config.spins[host].g_factor
    ratio = abs(Omega - w_host) / abs(G_host) if G_host else np.inf
    return CrossingField(
        B=float(Omega / (g * MU_B_OVER_H)),
        Omega_S=float(Omega),
        bare_B=float(w_other / (g * MU_B_OVER_H)),
        ratio=float(ratio),
        valid=bool(ratio >= CROSSING_RATIO),
        host_mode=tag,
    )


@dataclass(frozen=True)
class DispersiveReport:
    shifts: dict = field(default_factory=dict)  # (ler, mode) -> chi (MHz)
    detunings: dict = field(default_factory=dict)  # (ler, mode) -> Omega_S - omega_mode
    ratios: dict = field(default_factory=dict)  # (ler, mode) -> G / |detuning|
    valid: bool = True


def _mode_detunings(config: ChipConfig, B: float, pair):
    modes = normal_modes(config, pair, B)
    freqs = {"+": modes.omega_plus, "-": modes.omega_minus}
    detunings = {}
    for (j, mu), _ in modes.gtilde.items():
        d = spin_frequency(config.spins[j].g_factor, B) - freqs[mu]
        if d == 0:
            raise ResonanceError(f"spin {config.lers[j].label} is resonant with mode b_{mu}")
        detunings[(j, mu)] = d
    return modes, detunings


def dispersive_shifts(config: ChipConfig, B: float, pair: tuple[int, int] = (0, 1)) -> DispersiveReport:
    """Signed shifts ``G~**2 / (Omega_S - omega_mode)`` for every spin / normal-mode pair."""
    modes, detunings = _mode_detunings(config, B, pair)
    shifts, ratios = {}, {}
    for key, d in detunings.items():
        j, _ = key
        shifts[key] = modes.gtilde[key] ** 2 / d
        ratios[key] = config.coupling_at(j, B) / abs(d)
    valid = all(r < DISPERSIVE_RATIO for r in ratios.values())
    return DispersiveReport(shifts, detunings, ratios, valid)


def effective_spin_spin_J(config: ChipConfig, B: float, pair: tuple[int, int] = (0, 1)) -> float:
    """Circuit-mediated exchange between the two ensembles of a pair.

    The effective term is ``(J / 2)(S1+ S2- + S1- S2+)``.
    """
    p, q = pair
    if config.spins[p] is None or config.spins[q] is None:
        return 0.0
    modes, detunings = _mode_detunings(config, B, pair)
    J = 0.0
    for mu in ("+", "-"):
        J += modes.gtilde[(p, mu)] * modes.gtilde[(q, mu)] * (1 / detunings[(p, mu)] + 1 / detunings[(q, mu)])
    return float(J)


def effective_hamiltonian(config: ChipConfig, B: float, pair: tuple[int, int] = (0, 1)) -> tuple[np.ndarray, list[str]]:
    """Second-order dispersive Hamiltonian restricted to single excitations.

    Basis: hosted spins of the pair followed by b_+ and b_-. Spin-mode
    couplings are eliminated; each spin picks up ``sum_mu chi``, each mode
    ``-sum_j chi`` and the spins exchange ``J / 2``.
    """
    modes, detunings = _mode_detunings(config, B, pair)
    spins = [j for j in pair if config.spins[j] is not None]
    labels = [f"spin_{config.lers[j].label}" for j in spins] + ["b_+", "b_-"]
    n = len(labels)
    H = np.zeros((n, n))
    freqs = {"+": modes.omega_plus, "-": modes.omega_minus}
    for m, mu in enumerate(("+", "-")):
        H[len(spins) + m, len(spins) + m] = freqs[mu]
    for a, j in enumerate(spins):
        H[a, a] = spin_frequency(config.spins[j].g_factor, B)
        for m, mu in enumerate(("+", "-")):
            chi = modes.gtilde[(j, mu)] ** 2 / detunings[(j, mu)]
            H[a, a] += chi
            H[len(spins) + m, len(spins) + m] -= chi
    if len(spins) == 2:
        H[0, 1] = H[1, 0] = 0.5 * effective_spin_spin_J(config, B, pair)
    return H, labels
