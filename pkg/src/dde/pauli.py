"""Pauli strings and real-weighted Pauli sums.

Qubit ``q`` (0-based) is stored in bit ``n_qubits - 1 - q`` of a basis index, so
the string ``"XIZ"`` acts with X on the most significant bit.  A bitstring such
as ``"10100101"`` therefore maps to ``int("10100101", 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError

__all__ = ["PauliString", "PauliSum", "split_observable", "pauli_action"]

_LETTERS = frozenset("IXYZ")


@dataclass(frozen=True)
class PauliString:
    """A tensor product of single-qubit Paulis, one letter per qubit."""

    ops: str

    def __post_init__(self):
        ops = self.ops.upper()
        if not ops or set(ops) - _LETTERS:
            raise InvalidArgumentError(f"invalid Pauli string {self.ops!r}")
        object.__setattr__(self, "ops", ops)

    @classmethod
    def from_sites(cls, n_qubits: int, sites: dict) -> "PauliString":
        """Build from a ``{qubit: letter}`` mapping with 0-based qubits."""
        letters = ["I"] * n_qubits
        for q, c in sites.items():
            if not 0 <= q < n_qubits:
                raise InvalidArgumentError(f"qubit {q} out of range for {n_qubits} qubits")
            letters[q] = c
        return cls("".join(letters))

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls("I" * n_qubits)

    @property
    def n_qubits(self) -> int:
        return len(self.ops)

    @property
    def is_identity(self) -> bool:
        return set(self.ops) == {"I"}

    @property
    def support(self) -> tuple:
        return tuple(q for q, c in enumerate(self.ops) if c != "I")

    @property
    def weight(self) -> int:
        return len(self.support)

    @property
    def is_diagonal(self) -> bool:
        return set(self.ops) <= {"I", "Z"}

    def masks(self) -> tuple:
        """Return ``(x_mask, z_mask, n_y)`` in basis-index bit convention."""
        n = self.n_qubits
        x = z = 0
        for q, c in enumerate(self.ops):
            bit = 1 << (n - 1 - q)
            if c in "XY":
                x |= bit
            if c in "ZY":
                z |= bit
        return x, z, self.ops.count("Y")

    def commutes_with(self, other: "PauliString") -> bool:
        if other.n_qubits != self.n_qubits:
            raise InvalidArgumentError("qubit-count mismatch")
        clashes = sum(
            1 for a, b in zip(self.ops, other.ops) if a != "I" and b != "I" and a != b
        )
        return clashes % 2 == 0

    def to_matrix(self) -> np.ndarray:
        return pauli_sparse(self.ops).toarray()

    def __str__(self) -> str:
        return self.ops


@lru_cache(maxsize=4096)
def pauli_action(ops: str) -> tuple:
    """Index/phase tables such that ``P @ psi == phase * psi[index]``."""
    x, z, n_y = PauliString(ops).masks()
    dim = 1 << len(ops)
    basis = np.arange(dim, dtype=np.int64)
    index = basis ^ x
    parity = _popcount(index & z) & 1
    phase = (1j ** n_y) * (1 - 2 * parity)
    index.setflags(write=False)
    phase = np.ascontiguousarray(phase, dtype=complex)
    phase.setflags(write=False)
    return index, phase


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.astype(np.uint64)
    count = np.zeros(a.shape, dtype=np.int64)
    while np.any(a):
        count += (a & np.uint64(1)).astype(np.int64)
        a >>= np.uint64(1)
    return count


def pauli_sparse(ops: str) -> sp.csr_matrix:
    index, phase = pauli_action(ops)
    dim = index.size
    return sp.csr_matrix((phase, (np.arange(dim), index)), shape=(dim, dim))


def apply_pauli(ops: str, psi: np.ndarray) -> np.ndarray:
    """Apply a Pauli string to a state (or to the columns of a 2D block)."""
    index, phase = pauli_action(ops)
    if psi.ndim == 1:
        return phase * psi[index]
    return phase[:, None] * psi[index]


class PauliSum:
    """Hermitian operator ``constant * 1 + sum_j coeff_j P_j`` with real weights.

    Terms keep their first-insertion order; Trotter circuits depend on it.
    Duplicate strings are merged by adding coefficients and identity strings
    are folded into ``constant``.
    """

    def __init__(self, n_qubits: int, terms: Iterable = (), constant: float = 0.0, meta=None):
        self.meta = dict(meta or {})
        if int(n_qubits) < 1:
            raise InvalidArgumentError("n_qubits must be positive")
        self.n_qubits = int(n_qubits)
        merged: dict = {}
        constant = float(constant)
        for coeff, string in terms:
            if not isinstance(string, PauliString):
                string = PauliString(str(string))
            if string.n_qubits != self.n_qubits:
                raise InvalidArgumentError(
                    f"string {string.ops} has {string.n_qubits} qubits, expected {self.n_qubits}"
                )
            if np.iscomplexobj(coeff) and np.imag(coeff) != 0:
                raise InvalidArgumentError("Pauli coefficients must be real")
            coeff = float(np.real(coeff))
            if string.is_identity:
                constant += coeff
                continue
            merged[string] = merged.get(string, 0.0) + coeff
        self._terms = tuple((c, s) for s, c in merged.items())
        self.constant = constant

    @classmethod
    def from_list(cls, n_qubits: int, pairs: Sequence, constant: float = 0.0) -> "PauliSum":
        return cls(n_qubits, [(c, PauliString(s)) for c, s in pairs], constant)

    @property
    def terms(self) -> tuple:
        return self._terms

    @property
    def n_terms(self) -> int:
        """Number of non-identity terms."""
        return len(self._terms)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self._terms], dtype=float)

    @property
    def strings(self) -> list:
        return [s for _, s in self._terms]

    def coefficient(self, string) -> float:
        if isinstance(string, str):
            string = PauliString(string)
        if string.is_identity:
            return self.constant
        for c, s in self._terms:
            if s == string:
                return c
        return 0.0

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if not isinstance(other, PauliSum):
            return NotImplemented
        if other.n_qubits != self.n_qubits:
            raise InvalidArgumentError("qubit-count mismatch")
        return PauliSum(self.n_qubits, self._terms + other._terms, self.constant + other.constant)

    def __mul__(self, scalar: float) -> "PauliSum":
        scalar = float(scalar)
        return PauliSum(self.n_qubits, [(scalar * c, s) for c, s in self._terms], scalar * self.constant)

    __rmul__ = __mul__

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-1.0) * other

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return (
            self.n_qubits == other.n_qubits
            and self.constant == other.constant
            and self._terms == other._terms
        )

    def __repr__(self) -> str:
        return f"PauliSum(n_qubits={self.n_qubits}, n_terms={self.n_terms}, constant={self.constant})"

    def without_constant(self) -> "PauliSum":
        return PauliSum(self.n_qubits, self._terms, 0.0)

    def diagonal_part(self) -> "PauliSum":
        return PauliSum(self.n_qubits, [(c, s) for c, s in self._terms if s.is_diagonal])

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.coefficients)))

    def to_sparse(self) -> sp.csr_matrix:
        dim = 1 << self.n_qubits
        mat = sp.identity(dim, dtype=complex, format="csr") * self.constant
        for c, s in self._terms:
            mat = mat + c * pauli_sparse(s.ops)
        return mat.tocsr()

    def to_matrix(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Return ``H @ psi`` without building a matrix."""
        out = self.constant * psi
        for c, s in self._terms:
            out = out + c * apply_pauli(s.ops, psi)
        return out

    def norm_bound(self) -> float:
        """Cheap upper bound on the operator norm."""
        return abs(self.constant) + self.l1_norm()

    def is_real(self) -> bool:
        return all(s.ops.count("Y") % 2 == 0 for _, s in self._terms)

    def describe(self) -> str:
        if self.meta:
            return ",".join(f"{k}={v}" for k, v in self.meta.items() if k != "fields")
        return f"paulisum(n={self.n_qubits},terms={self.n_terms},const={self.constant!r})"


def split_observable(O: PauliSum, H: PauliSum) -> tuple:
    """Split ``O`` into a part commuting with ``H`` and the rest.

    A string of ``O`` goes to the commuting part when it commutes with every
    string of ``H``.  If the remaining strings of ``O`` are a common multiple
    of the remaining strings of ``H`` (as for ``O = H``), they commute with
    ``H`` as a whole and move to the commuting part too.
    """
    if O.n_qubits != H.n_qubits:
        raise InvalidArgumentError("observable and Hamiltonian act on different qubit counts")
    h_strings = H.strings

    def commutes_all(s):
        return all(s.commutes_with(h) for h in h_strings)

    par, perp = [], []
    for c, s in O.terms:
        (par if commutes_all(s) else perp).append((c, s))
    if perp:
        h_rest = {s.ops: c for c, s in H.terms if not commutes_all(s)}
        o_rest = {s.ops: c for c, s in perp}
        if h_rest and o_rest.keys() == h_rest.keys():
            ratios = np.array([o_rest[k] / h_rest[k] for k in h_rest])
            if np.allclose(ratios, ratios[0], rtol=1e-12, atol=0.0):
                par, perp = par + perp, []
    return PauliSum(O.n_qubits, par, O.constant), PauliSum(O.n_qubits, perp)
