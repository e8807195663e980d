"""Reusable problem instances: Hamiltonian, spectrum, initial state and target."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dense import SpectralDecomposition, diagonalize, superposition
from .errors import InvalidArgumentError
from .hamiltonians import build_fermi_hubbard_2x2, build_heisenberg, single_site
from .pauli import PauliSum

__all__ = [
    "Instance",
    "eigen_mixture",
    "pick_gapped_levels",
    "heisenberg_mixture",
    "fermi_hubbard_instance",
    "FH_BITSTRINGS",
]

FH_BITSTRINGS = ("10100101", "01011010")


@dataclass
class Instance:
    """A Hamiltonian with its spectrum, an initial state and the target eigenvector."""

    H: PauliSum
    spec: SpectralDecomposition
    initial: np.ndarray
    target: int
    O: PauliSum

    @property
    def target_state(self) -> np.ndarray:
        return self.spec.eigenvectors[:, self.target]

    @property
    def exact_value(self) -> float:
        v = self.target_state
        return float(np.real(np.vdot(v, self.O.apply(v))))

    @property
    def populations(self) -> np.ndarray:
        return self.spec.populations(self.initial)

    @property
    def dominant_population(self) -> float:
        return float(self.populations[self.target])


def eigen_mixture(spec: SpectralDecomposition, indices, populations, phases=None) -> np.ndarray:
    """``sum_k sqrt(p_k) e^{i phi_k} |psi_k>`` over the chosen eigenvectors."""
    populations = np.asarray(populations, dtype=float)
    if len(indices) != populations.size:
        raise InvalidArgumentError("indices and populations differ in length")
    if np.any(populations < 0) or abs(populations.sum() - 1.0) > 1e-10:
        raise InvalidArgumentError("populations must be a probability vector")
    phases = np.zeros(populations.size) if phases is None else np.asarray(phases, dtype=float)
    amps = np.sqrt(populations) * np.exp(1j * phases)
    psi = spec.eigenvectors[:, list(indices)] @ amps
    return psi / np.linalg.norm(psi)


def pick_gapped_levels(energies, count: int, min_gap: float, start: int = 0) -> list:
    """First ``count`` levels from ``start`` upward whose pairwise gaps are all at least ``min_gap``."""
    chosen = [start]
    for k in range(start + 1, len(energies)):
        if len(chosen) == count:
            break
        if all(abs(energies[k] - energies[j]) >= min_gap for j in chosen):
            chosen.append(k)
    if len(chosen) < count:
        raise InvalidArgumentError("not enough levels with the requested gap")
    return chosen


def heisenberg_mixture(n_qubits: int = 10, populations=(0.66, 0.17, 0.17), seed: int = 7,
                       J: float = 0.1, h: float = 1.0, min_gap: float = 0.2,
                       observable_qubit: int = 1) -> Instance:
    """Random-field Heisenberg ring in a superposition of its ground state and gapped excitations.

    The observable is ``Z`` on ``observable_qubit`` (1-based).
    """
    H = build_heisenberg(n_qubits, J=J, h=h, boundary="ring", seed=seed)
    spec = diagonalize(H)
    levels = pick_gapped_levels(spec.energies, len(populations), min_gap)
    psi = eigen_mixture(spec, levels, populations)
    O = single_site(n_qubits, observable_qubit, "Z")
    return Instance(H, spec, psi, levels[0], O)


def fermi_hubbard_instance(O: PauliSum | None = None) -> Instance:
    """2x2 Hubbard model with the half-filled two-bitstring initial state.

    The target is the lowest eigenvector in the symmetry sector of the initial state.
    """
    H = build_fermi_hubbard_2x2()
    spec = diagonalize(H)
    psi = superposition(FH_BITSTRINGS, [1.0, 1.0])
    target = spec.sector_ground_index(psi)
    return Instance(H, spec, psi, target, H if O is None else O)
