"""Single-excitation spectrum of a resonator chain with spin ensembles.

Basis slots come in resonator order, one ``photon_<label>`` slot per
resonator and one ``spin_<label>`` slot per hosted ensemble. A pair with two
ensembles reads (spin_1, photon_1, photon_2, spin_2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar

from .core import ChipConfig, DegenerateInputError, TrackingError, spin_frequency

_DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True)
class Slot:
    label: str
    kind: str  # "spin" or "photon"
    ler: int


@dataclass(frozen=True)
class SingleExcitationBasis:
    slots: tuple[Slot, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.slots)

    def __len__(self) -> int:
        return len(self.slots)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def photon_slot(self, ler: int) -> int:
        for n, s in enumerate(self.slots):
            if s.kind == "photon" and s.ler == ler:
                return n
        raise KeyError(ler)

    def spin_slot(self, ler: int) -> int:
        for n, s in enumerate(self.slots):
            if s.kind == "spin" and s.ler == ler:
                return n
        raise KeyError(f"resonator {ler} hosts no spin ensemble")

    @property
    def photon_slots(self) -> list[int]:
        return [n for n, s in enumerate(self.slots) if s.kind == "photon"]

    @property
    def spin_slots(self) -> list[int]:
        return [n for n, s in enumerate(self.slots) if s.kind == "spin"]


def basis_for(config: ChipConfig) -> SingleExcitationBasis:
    """Deterministic slot ordering for ``config``.

    Resonators in odd positions of a pair (the second, fourth, ...) list the
    photon before the spin, so a pair reads (spin_1, photon_1, photon_2,
    spin_2).
    """
    slots = []
    for j, ler in enumerate(config.lers):
        photon = Slot(f"photon_{ler.label}", "photon", j)
        if config.spins[j] is None:
            slots.append(photon)
            continue
        spin = Slot(f"spin_{ler.label}", "spin", j)
        slots.extend([photon, spin] if j % 2 else [spin, photon])
    return SingleExcitationBasis(tuple(slots))


def build_hamiltonian(config: ChipConfig, B: float) -> np.ndarray:
    """Real symmetric single-excitation Hamiltonian (MHz) at field ``B`` (mT)."""
    basis = basis_for(config)
    H = np.zeros((len(basis), len(basis)))
    for j, ler in enumerate(config.lers):
        p = basis.photon_slot(j)
        H[p, p] = ler.omega_r
        spin = config.spins[j]
        if spin is not None:
            s = basis.spin_slot(j)
            H[s, s] = spin_frequency(spin.g_factor, B)
            H[s, p] = H[p, s] = config.coupling_at(j, B)
    for (i, j), k in config.couplings.items():
        pi, pj = basis.photon_slot(i), basis.photon_slot(j)
        H[pi, pj] = H[pj, pi] = k
    return H


@dataclass(frozen=True)
class EigenSolution:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    basis: SingleExcitationBasis | None = None

    def vector(self, n: int) -> np.ndarray:
        return self.eigenvectors[:, n]

    def __len__(self) -> int:
        return len(self.eigenvalues)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    vecs = vecs.copy()
    for n in range(vecs.shape[1]):
        v = vecs[:, n]
        # first component within rounding of the maximum magnitude decides
        mag = np.abs(v)
        lead = int(np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0])
        if v[lead] < 0:
            vecs[:, n] = -v
    return vecs


def eigensolve(H: np.ndarray, basis: SingleExcitationBasis | None = None) -> EigenSolution:
    """Exact diagonalization with sorted eigenvalues and fixed eigenvector signs."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("Hamiltonian must be a square matrix")
    scale = max(np.abs(H).max(), 1e-300)
    if np.abs(H - H.T).max() > 1e-12 * scale:
        raise ValueError("Hamiltonian is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (H + H.T))
    vecs = _fix_signs(vecs)

    # within exactly degenerate clusters order by the label of the dominant slot
    labels = basis.labels if basis is not None else tuple(f"{n:06d}" for n in range(len(vals)))
    order = list(range(len(vals)))
    start = 0
    while start < len(vals):
        stop = start + 1
        while stop < len(vals) and vals[stop] - vals[start] <= _DEGENERACY_RTOL * max(1.0, abs(vals[start])):
            stop += 1
        if stop - start > 1:
            cluster = order[start:stop]
            cluster.sort(key=lambda n: labels[int(np.argmax(np.abs(vecs[:, n])))])
            order[start:stop] = cluster
        start = stop
    return EigenSolution(vals[order], vecs[:, order], basis)


def solve(config: ChipConfig, B: float) -> EigenSolution:
    return eigensolve(build_hamiltonian(config, B), basis_for(config))


@dataclass(frozen=True)
class NormalModes:
    """Normal modes b_+ = cos(phi/2) a_p + sin(phi/2) a_q and
    b_- = -sin(phi/2) a_p + cos(phi/2) a_q of resonator pair (p, q)."""

    omega_plus: float
    omega_minus: float
    phi: float
    gtilde: dict = field(default_factory=dict)  # (ler index, "+"/"-") -> MHz
    pair: tuple[int, int] = (0, 1)


def normal_modes(config: ChipConfig, pair: tuple[int, int] = (0, 1), B: float | None = None) -> NormalModes:
    """Photonic normal modes of a resonator pair and the spin couplings to them.

    ``B`` only matters when the configuration has a nonzero temperature.
    """
    p, q = pair
    w1, w2 = config.lers[p].omega_r, config.lers[q].omega_r
    k = config.kappa_between(p, q)
    root = np.hypot(w2 - w1, 2 * k)
    w_plus = 0.5 * (w1 + w2 + root)
    w_minus = 0.5 * (w1 + w2 - root)
    # b_+ is the upper mode: tan(phi) = 2k / (w_p - w_q)
    phi = float(np.arctan2(2 * k, w1 - w2))
    c, s = np.cos(phi / 2), np.sin(phi / 2)
    gtilde = {}
    for j, (cp, cm) in ((p, (c, -s)), (q, (s, c))):
        if config.spins[j] is None:
            continue
        G = config.spins[j].coupling_G if B is None else config.coupling_at(j, B)
        gtilde[(j, "+")] = G * cp
        gtilde[(j, "-")] = G * cm
    return NormalModes(float(w_plus), float(w_minus), phi, gtilde, (p, q))


def normal_mode_hamiltonian(config: ChipConfig, B: float, pair: tuple[int, int] = (0, 1)) -> tuple[np.ndarray, list[str]]:
    """Pair Hamiltonian rotated to the (spins, b_+, b_-) basis."""
    modes = normal_modes(config, pair, B)
    spins = [j for j in pair if config.spins[j] is not None]
    labels = [f"spin_{config.lers[j].label}" for j in spins] + ["b_+", "b_-"]
    n = len(labels)
    H = np.zeros((n, n))
    for a, j in enumerate(spins):
        H[a, a] = spin_frequency(config.spins[j].g_factor, B)
        H[a, n - 2] = H[n - 2, a] = modes.gtilde[(j, "+")]
        H[a, n - 1] = H[n - 1, a] = modes.gtilde[(j, "-")]
    H[n - 2, n - 2] = modes.omega_plus
    H[n - 1, n - 1] = modes.omega_minus
    return H, labels


def polariton_angle(j: int, config: ChipConfig, B: float) -> float:
    """Spin-photon mixing angle of resonator ``j`` in [0, pi].

    ``theta = atan2(2 G, omega_r - Omega_S)`` so that the upper polariton is
    sin(theta/2)|spin> + cos(theta/2)|photon>: theta -> 0 when the spin lies
    far below the resonator, pi/2 on resonance, pi far above.
    """
    spin = config.spins[j]
    if spin is None:
        raise KeyError(f"resonator {j} hosts no spin ensemble")
    G = config.coupling_at(j, B)
    delta = spin_frequency(spin.g_factor, B) - config.lers[j].omega_r
    if G == 0 and delta == 0:
        raise DegenerateInputError("mixing angle undefined for G = 0 on resonance")
    return float(np.arctan2(2 * G, -delta))


def probabilities(vec: np.ndarray, basis: SingleExcitationBasis | Sequence[str] | None = None) -> list[tuple[str, float, int]]:
    """(label, weight, amplitude sign) for each slot of a normalized state."""
    vec = np.asarray(vec, dtype=float)
    if basis is None:
        labels = [str(n) for n in range(len(vec))]
    elif isinstance(basis, SingleExcitationBasis):
        labels = list(basis.labels)
    else:
        labels = list(basis)
    weights = vec**2
    return [(lab, float(w), 1 if a >= 0 else -1) for lab, w, a in zip(labels, weights, vec)]


@dataclass(frozen=True)
class PolaritonBranch:
    B: np.ndarray
    frequency: np.ndarray
    eigenvectors: np.ndarray  # shape (len(B), basis size)
    start_index: int
    basis: SingleExcitationBasis | None = None


def track_branches(config: ChipConfig, B_values: Sequence[float], min_overlap: float = 0.5) -> list[PolaritonBranch]:
    """Follow every eigenstate across a field sweep by maximal overlap.

    Branches are labelled by their energy rank at the first field. Raises
    :class:`TrackingError` if some assigned overlap drops to ``min_overlap``
    or below; a finer sweep is needed then.
    """
    B_values = np.asarray(B_values, dtype=float)
    if B_values.ndim != 1 or len(B_values) == 0:
        raise ValueError("need a one-dimensional, non-empty field sweep")
    if np.any(np.diff(B_values) <= 0):
        raise ValueError("field sweep must be strictly increasing")
    basis = basis_for(config)
    sols = [solve(config, B) for B in B_values]
    return track_solutions(sols, B_values, min_overlap, basis)


def track_solutions(sols: Sequence[EigenSolution], B_values: np.ndarray, min_overlap: float = 0.5,
                    basis: SingleExcitationBasis | None = None) -> list[PolaritonBranch]:
    n = len(sols[0])
    # perm[k][b] = sorted index occupied by branch b at step k
    perm = np.empty((len(sols), n), dtype=int)
    perm[0] = np.arange(n)
    rank_bias = 1e-9 * np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    for k in range(1, len(sols)):
        prev = sols[k - 1].eigenvectors[:, perm[k - 1]]
        ov = np.abs(prev.T @ sols[k].eigenvectors)
        # prefer the energy-ordered assignment when overlaps tie
        rows, cols = linear_sum_assignment(-(ov**2) + rank_bias[perm[k - 1]])
        chosen = ov[rows, cols]
        if chosen.min() <= min_overlap:
            b = int(rows[np.argmin(chosen)])
            raise TrackingError(
                f"overlap {chosen.min():.3f} between B={B_values[k - 1]:.6g} and B={B_values[k]:.6g} mT "
                f"(step {k}, branch {b}); use a finer field sweep"
            )
        perm[k, rows] = cols
    branches = []
    for b in range(n):
        idx = perm[:, b]
        freq = np.array([sols[k].eigenvalues[i] for k, i in enumerate(idx)])
        vecs = np.array([sols[k].eigenvectors[:, i] for k, i in enumerate(idx)])
        branches.append(PolaritonBranch(B_values.copy(), freq, vecs, b, basis))
    return branches


def sorted_gap(config: ChipConfig, B: float, lower: int) -> float:
    vals = solve(config, B).eigenvalues
    return float(vals[lower + 1] - vals[lower])


def min_gap(config: ChipConfig, lower: int, B_range: tuple[float, float], n_grid: int = 2001) -> tuple[float, float]:
    """Field and size of the smallest gap between sorted levels ``lower`` and ``lower + 1``.

    Grid scan over ``B_range`` followed by bounded scalar refinement.
    """
    Bs = np.linspace(B_range[0], B_range[1], n_grid)
    gaps = np.array([sorted_gap(config, B, lower) for B in Bs])
    i = int(np.argmin(gaps))
    lo, hi = Bs[max(i - 1, 0)], Bs[min(i + 1, n_grid - 1)]
    res = minimize_scalar(lambda B: sorted_gap(config, B, lower), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-9})
    if res.fun <= gaps[i]:
        return float(res.x), float(res.fun)
    return float(Bs[i]), float(gaps[i])
