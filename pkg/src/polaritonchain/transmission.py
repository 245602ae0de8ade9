"""Feedline transmission S21 from input-output theory.

The response matrix of a configuration at drive frequency ``omega`` is
``C = i (H - omega) + L`` with ``H`` the single-excitation Hamiltonian and
``L`` the diagonal of loss rates. With drive vector ``d`` of feedline
amplitudes (sqrt(kappa_c) for photons, sqrt(gamma_c) for spins) the
transmission is ``S21 = 1 - d^T C^-1 d``.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ChipConfig, GridTooLargeError, LerParams, SingularResponseError, spin_frequency
from .spectrum import PolaritonBranch, basis_for, build_hamiltonian, solve

DEFAULT_MAX_POINTS = 5_000_000


def s21_single(omega, ler: LerParams):
    """Notch-type transmission of one bare resonator."""
    if ler.kappa <= 0:
        raise ValueError("kappa must be positive")
    omega = np.asarray(omega, dtype=float)
    out = 1 - ler.kappa_c / (1j * (ler.omega_r - omega) + ler.kappa)
    return complex(out) if np.ndim(out) == 0 else out


def z_response(omega, config: ChipConfig, j: int, B: float):
    """Dressed inverse susceptibility of resonator ``j`` including its ensemble."""
    ler = config.lers[j]
    omega = np.asarray(omega, dtype=float)
    z = 1j * (ler.omega_r - omega) + ler.kappa
    spin = config.spins[j]
    if spin is not None:
        G = config.coupling_at(j, B)
        z = z + G**2 / (1j * (spin_frequency(spin.g_factor, B) - omega) + spin.gamma)
    return complex(z) if np.ndim(z) == 0 else z


def s21_closed_pair(omega, config: ChipConfig, B: float):
    """Closed-form S21 of two coupled resonators, each with an optional ensemble.

    Only valid when no ensemble couples to the feedline directly; use
    :func:`s21_general` otherwise.
    """
    if config.n_lers != 2:
        raise ValueError("closed form needs exactly two resonators")
    for spin in config.spins:
        if spin is not None and spin.gamma_c_mag != 0:
            raise ValueError("closed form requires gamma_c = 0; use s21_general")
    l1, l2 = config.lers
    k12 = config.kappa_between(0, 1)
    z1 = z_response(omega, config, 0, B)
    z2 = z_response(omega, config, 1, B)
    num = l1.kappa_c * z2 + l2.kappa_c * z1 - 2j * np.sqrt(l1.kappa_c * l2.kappa_c) * k12
    out = 1 - num / (z1 * z2 + k12**2)
    return complex(out) if np.ndim(out) == 0 else out


def feedline_vectors(config: ChipConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-slot loss rates and complex feedline amplitudes in basis order."""
    basis = basis_for(config)
    loss = np.zeros(len(basis))
    drive = np.zeros(len(basis), dtype=complex)
    for n, slot in enumerate(basis.slots):
        if slot.kind == "photon":
            ler = config.lers[slot.ler]
            loss[n] = ler.kappa
            drive[n] = np.sqrt(ler.kappa_c)
        else:
            spin = config.spins[slot.ler]
            loss[n] = spin.gamma
            drive[n] = spin.sqrt_gamma_c
    return loss, drive


@dataclass(frozen=True)
class ResponseMatrix:
    C: np.ndarray  # complex symmetric, not Hermitian
    drive: np.ndarray

    def s21(self) -> complex:
        try:
            x = np.linalg.solve(self.C, -1j * self.drive)
        except np.linalg.LinAlgError as exc:
            raise SingularResponseError("response matrix is singular") from exc
        return complex(1 - 1j * self.drive @ x)


def response_matrix(config: ChipConfig, B: float, omega: float) -> ResponseMatrix:
    H = build_hamiltonian(config, B)
    loss, drive = feedline_vectors(config)
    C = 1j * (H - omega * np.eye(len(H))) + np.diag(loss)
    return ResponseMatrix(C, drive)


def _s21_column(H: np.ndarray, loss: np.ndarray, drive: np.ndarray, omega: np.ndarray) -> np.ndarray:
    n = len(H)
    C = 1j * H[None, :, :] + np.diag(loss)[None, :, :] - 1j * omega[:, None, None] * np.eye(n)[None, :, :]
    rhs = np.broadcast_to(-1j * drive, (len(omega), n))[..., None]
    try:
        x = np.linalg.solve(C, rhs)[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularResponseError("response matrix is singular") from exc
    return 1 - 1j * (x @ drive)


def s21_general(omega, config: ChipConfig, B: float):
    """Transmission from the full linear solve, including spin-feedline coupling."""
    omega_arr = np.atleast_1d(np.asarray(omega, dtype=float))
    loss, drive = feedline_vectors(config)
    out = _s21_column(build_hamiltonian(config, B), loss, drive, omega_arr)
    return complex(out[0]) if np.ndim(omega) == 0 else out.reshape(np.shape(omega))


@dataclass(frozen=True)
class TransmissionMap:
    omega: np.ndarray  # MHz
    B: np.ndarray  # mT
    s21: np.ndarray  # shape (len(B), len(omega))
    normalized: bool = False

    def normalize(self) -> "TransmissionMap":
        """Divide by the largest |S21| on the map. A normalized map is returned unchanged."""
        if self.normalized:
            return self
        peak = np.abs(self.s21).max()
        if peak == 0:
            raise ValueError("cannot normalize an all-zero map")
        return replace(self, s21=self.s21 / peak, normalized=True)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("B_mT,omega_MHz,re_S21,im_S21,abs_S21\n")
            for b, row in zip(self.B, self.s21):
                for w, s in zip(self.omega, row):
                    fh.write(f"{b:.12g},{w:.12g},{s.real:.12g},{s.imag:.12g},{abs(s):.12g}\n")

    def to_dict(self) -> dict:
        flat = self.s21.ravel()
        return {
            "omega_MHz": self.omega.tolist(),
            "B_mT": self.B.tolist(),
            "normalized": self.normalized,
            "s21": [[float(s.real), float(s.imag)] for s in flat],
        }

    def to_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, doc: dict) -> "TransmissionMap":
        omega = np.array(doc["omega_MHz"], dtype=float)
        B = np.array(doc["B_mT"], dtype=float)
        pairs = np.array(doc["s21"], dtype=float).reshape(-1, 2)
        s21 = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(len(B), len(omega))
        return cls(omega, B, s21, bool(doc.get("normalized", False)))

    @classmethod
    def from_json(cls, path: str | Path) -> "TransmissionMap":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _check_grid(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or len(arr) == 0:
        raise ValueError(f"{name} grid must be a non-empty 1-D array")
    if np.any(np.diff(arr) <= 0):
        raise ValueError(f"{name} grid must be strictly increasing")
    return arr


def transmission_map(config: ChipConfig, omega, B, normalize: bool = False, threads: int | None = None,
                     max_points: int = DEFAULT_MAX_POINTS) -> TransmissionMap:
    """S21 over an (omega, B) grid, evaluated column by column in B.

    Columns are independent and written to disjoint rows, so the result does
    not depend on ``threads``.
    """
    omega = _check_grid(omega, "omega")
    B = _check_grid(B, "B")
    n = len(omega) * len(B)
    if n > max_points:
        raise GridTooLargeError(
            f"grid of {len(B)} x {len(omega)} = {n} points (~{n * 16 / 2**20:.1f} MiB) exceeds max_points={max_points}"
        )
    loss, drive = feedline_vectors(config)
    out = np.empty((len(B), len(omega)), dtype=complex)

    def column(k: int) -> None:
        out[k] = _s21_column(build_hamiltonian(config, B[k]), loss, drive, omega)

    threads = threads or 1
    if threads == 1:
        for k in range(len(B)):
            column(k)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(column, range(len(B))))
    tmap = TransmissionMap(omega, B, out)
    return tmap.normalize() if normalize else tmap


def polariton_linewidth(vec: np.ndarray, config: ChipConfig) -> float:
    """Loss rate of an eigenstate: slot losses weighted by slot probabilities."""
    loss, _ = feedline_vectors(config)
    return float(np.sum(np.abs(vec) ** 2 * loss))


def _window(freqs: np.ndarray, b: int, width: float) -> float:
    # half-width, clipped to half the distance to the nearest other branch
    others = np.delete(freqs, b)
    if len(others):
        return min(width, 0.5 * np.abs(others - freqs[b]).min())
    return width


@dataclass(frozen=True)
class VisibilityProfile:
    B: np.ndarray
    visibility: np.ndarray  # shape (n_branches, len(B))
    branches: tuple[int, ...]


def visibility_profile(tmap: TransmissionMap, branches: Sequence[PolaritonBranch], config: ChipConfig,
                       width: float = 3.0) -> VisibilityProfile:
    """Per-branch dip depth ``1 - min |S21|`` around each branch frequency.

    The window spans ``width`` polariton linewidths either side, limited to
    half the spacing to the nearest other branch. Values are clipped to [0, 1].
    """
    if len(branches) == 0:
        raise ValueError("no branches given")
    if len(branches[0].B) != len(tmap.B) or not np.allclose(branches[0].B, tmap.B, rtol=0, atol=1e-12):
        raise ValueError("branches and map must share the B grid")
    vis = np.empty((len(branches), len(tmap.B)))
    mag = np.abs(tmap.s21)
    for k in range(len(tmap.B)):
        levels = solve(config, tmap.B[k]).eigenvalues
        for b, br in enumerate(branches):
            f = br.frequency[k]
            # clip against every level of the spectrum, not only the selected branches
            others = np.append(np.delete(levels, np.argmin(np.abs(levels - f))), f)
            half = _window(others, len(others) - 1, width * polariton_linewidth(br.eigenvectors[k], config))
            lo, hi = f - half, f + half
            if lo < tmap.omega[0] or hi > tmap.omega[-1]:
                raise ValueError(f"visibility window [{lo:.6g}, {hi:.6g}] MHz exceeds the omega grid at B={tmap.B[k]:.6g} mT")
            mask = (tmap.omega >= lo) & (tmap.omega <= hi)
            if not mask.any():
                mask = np.abs(tmap.omega - f) == np.abs(tmap.omega - f).min()
            vis[b, k] = 1 - mag[k, mask].min()
    return VisibilityProfile(tmap.B.copy(), np.clip(vis, 0.0, 1.0), tuple(br.start_index for br in branches))


def local_visibility(config: ChipConfig, B: float, index: int, width: float = 3.0, n: int = 2001) -> float:
    """Visibility of sorted eigenstate ``index`` at one field, on a dedicated fine grid."""
    sol = solve(config, B)
    half = _window(sol.eigenvalues, index, width * polariton_linewidth(sol.vector(index), config))
    omega = np.linspace(sol.eigenvalues[index] - half, sol.eigenvalues[index] + half, n)
    return float(np.clip(1 - np.abs(s21_general(omega, config, B)).min(), 0.0, 1.0))


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("POLARITON_THREADS", "1")))
    except ValueError:
        return 1
