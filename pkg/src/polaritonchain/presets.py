"""Parameter sets of the measured and simulated resonator pairs."""

from __future__ import annotations

from .core import ChipConfig, validate_config

G_PTMR = 2.001
G_TRIPAK = 2.003
GAMMA_SPIN = 7.3  # MHz, spin linewidth used for both ensembles


def _pair(w1, w2, kappa_12, ler1=(0.091, 0.0185), ler2=(0.103, 0.007), labels=("1", "2"),
          spin1=None, spin2=None, temperature=0.0) -> ChipConfig:
    doc = {
        "lers": [
            {"label": labels[0], "omega_r_MHz": w1, "kappa_MHz": ler1[0], "kappa_c_MHz": ler1[1]},
            {"label": labels[1], "omega_r_MHz": w2, "kappa_MHz": ler2[0], "kappa_c_MHz": ler2[1]},
        ],
        "spins": {},
        "couplings": [{"between": [1, 2], "kappa_MHz": kappa_12}],
        "temperature_mK": temperature,
    }
    if spin1:
        doc["spins"][labels[0]] = spin1
    if spin2:
        doc["spins"][labels[1]] = spin2
    return validate_config(doc)


def polariton_pair(kappa_12: float = 1.06, gamma_c1: float = 0.0, phase: float = 0.0,
                   G1: float = 19.5, G2: float = 8.5, temperature: float = 0.0) -> ChipConfig:
    """LER-1 (PTMr) and LER-2 (Tripak) hosting one ensemble each."""
    spin1 = {"g": G_PTMR, "G_MHz": G1, "gamma_MHz": GAMMA_SPIN,
             "gamma_c_MHz": gamma_c1, "gamma_c_phase_rad": phase}
    spin2 = {"g": G_TRIPAK, "G_MHz": G2, "gamma_MHz": GAMMA_SPIN}
    return _pair(1702.9, 1709.6, kappa_12, spin1=spin1, spin2=spin2, temperature=temperature)


def remote_pair(kappa_12: float = 6.49, G: float = 5.4, host: float = 2730.0, empty: float = 2720.0) -> ChipConfig:
    """One PTMr ensemble on the host resonator (position 1) next to an empty one.

    Linewidths follow LER-10 (host) and LER-9 (empty).
    """
    spin = {"g": G_PTMR, "G_MHz": G, "gamma_MHz": GAMMA_SPIN}
    return _pair(host, empty, kappa_12, ler1=(0.044, 0.031), ler2=(0.061, 0.050),
                 labels=("10", "9"), spin1=spin)


def empty_pair(omega: float = 1700.0, kappa_12: float = 1.0, detuning: float = 0.0) -> ChipConfig:
    return _pair(omega, omega + detuning, kappa_12)
