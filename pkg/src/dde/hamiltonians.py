"""Constructors for the model Hamiltonians and simple observables.

Sites are 1-based in the formulas below and 0-based in :class:`PauliString`.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError
from .pauli import PauliString, PauliSum

__all__ = [
    "build_heisenberg",
    "build_schwinger",
    "build_fermi_hubbard_2x2",
    "single_site",
    "pauli_term",
]


def _s(n_qubits, sites):
    return PauliString.from_sites(n_qubits, {q - 1: c for q, c in sites.items()})


def build_heisenberg(n_qubits: int, J: float = 0.1, h: float = 1.0, boundary: str = "ring",
                     seed: int = 0) -> PauliSum:
    """Random-field Heisenberg model ``J sum S_j.S_{j+1} + sum h_j Z_j``.

    Fields are drawn i.i.d. from ``U[-h, h]`` with ``numpy.random.default_rng(seed)``
    (PCG64).  Couplings come first in bond order (XX, YY, ZZ per bond), then the
    fields site by site.
    """
    if n_qubits < 2:
        raise InvalidArgumentError("Heisenberg model needs at least 2 qubits")
    if h < 0:
        raise InvalidArgumentError("field range h must be non-negative")
    if boundary not in ("ring", "chain"):
        raise InvalidArgumentError(f"unknown boundary {boundary!r}")
    fields = np.random.default_rng(seed).uniform(-h, h, size=n_qubits) if h > 0 else np.zeros(n_qubits)
    n_bonds = n_qubits if boundary == "ring" else n_qubits - 1
    terms = []
    for j in range(1, n_bonds + 1):
        k = j % n_qubits + 1
        for c in "XYZ":
            terms.append((J, _s(n_qubits, {j: c, k: c})))
    for j in range(1, n_qubits + 1):
        terms.append((float(fields[j - 1]), _s(n_qubits, {j: "Z"})))
    meta = {"family": "heisenberg", "n_qubits": n_qubits, "J": J, "h": h,
            "boundary": boundary, "seed": seed, "fields": [float(f) for f in fields]}
    return PauliSum(n_qubits, terms, meta=meta)


def build_schwinger(n_qubits: int, J: float = 1.0, m: float = 0.1, theta_schwinger: float = 0.5,
                    w: float = 0.1) -> PauliSum:
    """Lattice Schwinger model in spin form, ``H_ZZ + H_pm + H_Z``."""
    N = n_qubits
    if N < 2:
        raise InvalidArgumentError("Schwinger model needs at least 2 qubits")
    terms = []
    for n in range(2, N):
        for k in range(1, n + 1):
            for l in range(k + 1, n + 1):
                terms.append((J / 2, _s(N, {k: "Z", l: "Z"})))
    for n in range(1, N):
        coeff = (J / 2) * (w - (-1) ** n * (m / 2) * np.sin(theta_schwinger))
        terms.append((coeff, _s(N, {n: "X", n + 1: "X"})))
        terms.append((coeff, _s(N, {n: "Y", n + 1: "Y"})))
    for n in range(1, N + 1):
        terms.append((m * np.cos(theta_schwinger) / 2 * (-1) ** n, _s(N, {n: "Z"})))
    for n in range(1, N):
        if n % 2:
            for l in range(1, n + 1):
                terms.append((-J / 2, _s(N, {l: "Z"})))
    meta = {"family": "schwinger", "n_qubits": N, "J": J, "m": m,
            "theta_schwinger": theta_schwinger, "w": w}
    return PauliSum(N, terms, meta=meta)


_FH_TERMS = [
    (-0.5, {1: "X", 2: "X"}), (-0.5, {2: "X", 3: "X"}), (-0.5, {3: "X", 4: "X"}),
    (-0.5, {5: "X", 6: "X"}), (-0.5, {6: "X", 7: "X"}), (-0.5, {7: "X", 8: "X"}),
    (-0.5, {1: "Y", 2: "Y"}), (-0.5, {2: "Y", 3: "Y"}), (-0.5, {3: "Y", 4: "Y"}),
    (-0.5, {5: "Y", 6: "Y"}), (-0.5, {6: "Y", 7: "Y"}), (-0.5, {7: "Y", 8: "Y"}),
    (-3.0, {1: "Z"}), (-3.0, {2: "Z"}), (-3.0, {3: "Z"}),
    (-0.5, {1: "X", 2: "Z", 3: "Z", 4: "X"}), (-0.5, {1: "Y", 2: "Z", 3: "Z", 4: "Y"}),
    (-3.0, {4: "Z"}), (-3.0, {5: "Z"}), (3.0, {1: "Z", 5: "Z"}),
    (-3.0, {6: "Z"}), (3.0, {2: "Z", 6: "Z"}), (-3.0, {7: "Z"}), (3.0, {3: "Z", 7: "Z"}),
    (-0.5, {5: "X", 6: "Z", 7: "Z", 8: "X"}), (-0.5, {5: "Y", 6: "Z", 7: "Z", 8: "Y"}),
    (-3.0, {8: "Z"}), (3.0, {4: "Z", 8: "Z"}),
]


def build_fermi_hubbard_2x2() -> PauliSum:
    """Jordan-Wigner Fermi-Hubbard Hamiltonian on a periodic 2x2 lattice (t=1, U=12).

    Qubits 1-4 hold one spin species and 5-8 the other.  The identity
    coefficient (12) is kept in ``constant``.
    """
    terms = [(c, _s(8, sites)) for c, sites in _FH_TERMS]
    return PauliSum(8, terms, constant=12.0, meta={"family": "fermi_hubbard_2x2", "n_qubits": 8})


def single_site(n_qubits: int, qubit: int, letter: str = "Z", coeff: float = 1.0) -> PauliSum:
    """``coeff * P_qubit`` with a 1-based qubit index, e.g. ``Z_1``."""
    return PauliSum(n_qubits, [(coeff, _s(n_qubits, {qubit: letter}))],
                    meta={"observable": f"{letter}{qubit}"})


def pauli_term(n_qubits: int, sites: dict, coeff: float = 1.0) -> PauliSum:
    """A single weighted Pauli string from a 1-based ``{qubit: letter}`` map."""
    label = "".join(f"{c}{q}" for q, c in sorted(sites.items()))
    return PauliSum(n_qubits, [(coeff, _s(n_qubits, sites))], meta={"observable": label})
