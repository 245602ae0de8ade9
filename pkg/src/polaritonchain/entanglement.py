"""Photon-photon entanglement of single-excitation eigenstates.

A single-excitation state is embedded in the product space of two-level
occupations (every photon and spin slot either empty or singly occupied).
Tracing out everything but two cavities leaves a 4x4 density matrix on
|00>, |01>, |10>, |11> (first index = first cavity), whose negativity is
computed from its partial transpose.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ChipConfig
from .spectrum import SingleExcitationBasis, basis_for, solve, track_branches

_EMBED_MAX_SLOTS = 12
TRACE_TOL = 1e-9


@dataclass(frozen=True)
class TwoModeDensityMatrix:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError("two-mode density matrix must be 4x4")
        if np.abs(rho - rho.conj().T).max() > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        object.__setattr__(self, "rho", rho)

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def is_positive(self, tol: float = 1e-10) -> bool:
        return bool(np.linalg.eigvalsh(self.rho).min() >= -tol)


def _embedded_state(vec: np.ndarray, n_slots: int) -> np.ndarray:
    # slot k occupied <-> bit (n_slots - 1 - k), i.e. slot 0 is the leading tensor factor
    psi = np.zeros(2**n_slots, dtype=complex)
    for k, amp in enumerate(vec):
        psi[1 << (n_slots - 1 - k)] = amp
    return psi


def reduced_cavity_density_matrix(vec: np.ndarray, basis: SingleExcitationBasis,
                                  pair: tuple[int, int] = (0, 1)) -> TwoModeDensityMatrix:
    """Two-cavity state left after tracing out spins and all other cavities.

    ``pair`` names the two resonators (by position) that are kept.
    """
    vec = np.asarray(vec, dtype=complex)
    if len(vec) != len(basis):
        raise ValueError("state and basis sizes differ")
    p, q = basis.photon_slot(pair[0]), basis.photon_slot(pair[1])
    n = len(basis)
    if n <= _EMBED_MAX_SLOTS:
        psi = _embedded_state(vec, n).reshape((2,) * n)
        rest = [k for k in range(n) if k not in (p, q)]
        M = np.transpose(psi, [p, q] + rest).reshape(4, -1)
        rho = M @ M.conj().T
    else:
        # same result written out: coherences only between the two photon slots
        a, b = vec[p], vec[q]
        rho = np.zeros((4, 4), dtype=complex)
        rho[2, 2] = abs(a) ** 2
        rho[1, 1] = abs(b) ** 2
        rho[2, 1] = a * np.conj(b)
        rho[1, 2] = np.conj(rho[2, 1])
        rho[0, 0] = np.vdot(vec, vec).real - abs(a) ** 2 - abs(b) ** 2
    return TwoModeDensityMatrix(rho)


def partial_transpose(rho: TwoModeDensityMatrix | np.ndarray, subsystem: int = 0) -> np.ndarray:
    m = rho.rho if isinstance(rho, TwoModeDensityMatrix) else np.asarray(rho, dtype=complex)
    t = m.reshape(2, 2, 2, 2)  # (row_A, row_B, col_A, col_B)
    t = t.transpose(2, 1, 0, 3) if subsystem == 0 else t.transpose(0, 3, 2, 1)
    return t.reshape(4, 4)


def negativity(rho: TwoModeDensityMatrix | np.ndarray, subsystem: int = 0) -> float:
    """Sum of the magnitudes of the negative eigenvalues of the partial transpose."""
    if not isinstance(rho, TwoModeDensityMatrix):
        rho = TwoModeDensityMatrix(rho)
    if abs(rho.trace - 1) > TRACE_TOL:
        raise ValueError(f"density matrix trace {rho.trace:.12g} differs from 1")
    ev = np.linalg.eigvalsh(partial_transpose(rho, subsystem))
    return float(0.0 - ev[ev < 0].sum())  # avoids returning -0.0


@dataclass(frozen=True)
class NegativitySweep:
    B: np.ndarray
    branches: tuple[int, ...]
    negativity: np.ndarray  # shape (n_branches, len(B))
    baseline: np.ndarray  # same shape, spin-free reference

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("B_mT,branch_index,negativity,baseline_negativity\n")
            for k, b in enumerate(self.B):
                for n, br in enumerate(self.branches):
                    fh.write(f"{b:.12g},{br},{self.negativity[n, k]:.12g},{self.baseline[n, k]:.12g}\n")


def photon_only_config(config: ChipConfig) -> ChipConfig:
    """Same resonators and couplings with every spin ensemble removed."""
    return ChipConfig(config.lers, (None,) * config.n_lers, dict(config.couplings), config.temperature)


def negativity_sweep(config: ChipConfig, B_values: Sequence[float], branches: Sequence[int] | None = None,
                     pair: tuple[int, int] = (0, 1), min_overlap: float = 0.5) -> NegativitySweep:
    """Negativity of tracked eigenstates across a field sweep.

    The baseline removes the spins: each branch is matched to the photon-only
    eigenstate it overlaps most at the first field, whose negativity is
    independent of B.
    """
    tracked = track_branches(config, B_values, min_overlap)
    basis = basis_for(config)
    idx = tuple(range(len(tracked))) if branches is None else tuple(branches)
    neg = np.array([[negativity(reduced_cavity_density_matrix(v, basis, pair)) for v in tracked[b].eigenvectors]
                    for b in idx])

    free_cfg = photon_only_config(config)
    free = solve(free_cfg, 0.0)
    free_neg = [negativity(reduced_cavity_density_matrix(free.vector(m), free.basis, pair)) for m in range(len(free))]
    photon_slots = basis.photon_slots
    base = np.empty_like(neg)
    for n, b in enumerate(idx):
        overlap = np.abs(free.eigenvectors.T @ tracked[b].eigenvectors[0][photon_slots])
        base[n, :] = free_neg[int(np.argmax(overlap))]
    return NegativitySweep(np.asarray(B_values, dtype=float), idx, neg, base)
