"""Matrix-product states for nearest-neighbour chains.

Site ``q`` of an MPS is qubit ``q`` (the most significant bit of a dense
index).  Tensors have shape ``(left bond, 2, right bond)``.  Time evolution is
second-order TEBD with exact two-site gates; single-site terms are folded
into the bond gates, half to each adjacent bond for interior sites and fully
into the only bond for the two end sites.  The Hamiltonian constant is applied
as a global phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InvalidArgumentError
from .grid import CorrelatorSet, TimeGrid, _toeplitz_upper, hermitian_fill
from .pauli import PauliSum, split_observable
from .seeding import root_seed

__all__ = [
    "MpsState",
    "TebdConfig",
    "Mpo",
    "choose_bitstrings",
    "mps_from_bitstrings",
    "tebd_evolve",
    "mps_overlap",
    "chain_mpo",
    "mps_expectation",
    "correlators_from_mps",
]

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass
class MpsState:
    """Open-boundary MPS with truncation bookkeeping.

    Attributes
    ----------
    tensors : list of ndarray
        Site tensors of shape ``(chi_left, 2, chi_right)``.
    chi_max : int
    svd_cutoff : float
        Singular values below ``svd_cutoff * s_max`` are dropped.
    norm_log : float
        Sum of ``log`` of the renormalization factors after truncation (``<= 0``).
    center : int or None
        Orthogonality center, if known.
    discarded_weight : float
        Accumulated discarded squared singular values.
    truncations : int
        Number of SVDs where ``chi_max`` cut off non-negligible weight.
    """

    tensors: list
    chi_max: int = 64
    svd_cutoff: float = 1e-12
    norm_log: float = 0.0
    center: int | None = None
    discarded_weight: float = 0.0
    truncations: int = 0

    def __post_init__(self):
        if not self.tensors:
            raise InvalidArgumentError("an MPS needs at least one site")
        if int(self.chi_max) < 1:
            raise InvalidArgumentError("chi_max must be positive")
        self.tensors = [np.asarray(a, dtype=complex) for a in self.tensors]
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise InvalidArgumentError("boundary bond dimensions must be 1")
        for a, b in zip(self.tensors, self.tensors[1:]):
            if a.ndim != 3 or a.shape[1] != 2 or a.shape[2] != b.shape[0]:
                raise InvalidArgumentError("inconsistent site tensor shapes")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list:
        return [a.shape[2] for a in self.tensors[:-1]]

    def copy(self) -> "MpsState":
        return MpsState([a.copy() for a in self.tensors], self.chi_max, self.svd_cutoff,
                        self.norm_log, self.center, self.discarded_weight, self.truncations)

    def to_dense(self) -> np.ndarray:
        if self.n_sites > 20:
            raise InvalidArgumentError("dense reconstruction is capped at 20 sites")
        psi = self.tensors[0].reshape(2, -1)
        for a in self.tensors[1:]:
            psi = (psi @ a.reshape(a.shape[0], -1)).reshape(-1, a.shape[2])
        return psi.reshape(-1)

    def _shift_right(self, i):
        a = self.tensors[i]
        l, _, r = a.shape
        q, rr = np.linalg.qr(a.reshape(2 * l, r))
        self.tensors[i] = q.reshape(l, 2, -1)
        self.tensors[i + 1] = np.tensordot(rr, self.tensors[i + 1], axes=(1, 0))

    def _shift_left(self, i):
        a = self.tensors[i]
        l, _, r = a.shape
        q, rr = np.linalg.qr(a.reshape(l, 2 * r).conj().T)
        self.tensors[i] = q.conj().T.reshape(-1, 2, r)
        self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], rr.conj().T, axes=(2, 0))

    def move_center(self, site: int):
        """Bring the orthogonality center to ``site`` with QR sweeps."""
        if self.center is None:
            for i in range(self.n_sites - 1):
                self._shift_right(i)
            self.center = self.n_sites - 1
        while self.center < site:
            self._shift_right(self.center)
            self.center += 1
        while self.center > site:
            self._shift_left(self.center)
            self.center -= 1

    def canonicalize(self) -> float:
        """Left-canonicalize, normalize in place and return the previous norm."""
        self.center = None
        self.move_center(self.n_sites - 1)
        norm = float(np.linalg.norm(self.tensors[-1]))
        if norm == 0:
            raise InvalidArgumentError("MPS has zero norm")
        self.tensors[-1] = self.tensors[-1] / norm
        return norm


@dataclass(frozen=True)
class TebdConfig:
    """Second-order TEBD settings; ``dt`` is the Trotter step."""

    dt: float = 0.1
    order: str = "second"
    chi_max: int = 64
    svd_cutoff: float = 1e-12

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if self.order != "second":
            raise InvalidArgumentError("only the second-order scheme is implemented")
        if int(self.chi_max) < 1:
            raise InvalidArgumentError("chi_max must be positive")
        if self.svd_cutoff < 0:
            raise InvalidArgumentError("svd_cutoff must be non-negative")


def _chain_terms(H: PauliSum):
    """Split ``H`` into single-site and adjacent two-site terms."""
    singles, pairs = [], []
    for c, s in H.terms:
        sup = s.support
        if len(sup) == 1:
            singles.append((c, sup[0], s.ops[sup[0]]))
        elif len(sup) == 2 and sup[1] == sup[0] + 1:
            pairs.append((c, sup[0], s.ops[sup[0]], s.ops[sup[1]]))
        else:
            raise InvalidArgumentError(f"term {s.ops} is not a nearest-neighbour chain term")
    return singles, pairs


def choose_bitstrings(H: PauliSum):
    """Bitstrings minimizing the Z-only part of ``H`` and its cheapest single flip.

    The minimum is exact: a Viterbi pass over the chain of fields and ZZ
    couplings.  Ties prefer ``0``.
    """
    singles, pairs = _chain_terms(H)
    n = H.n_qubits
    h = np.zeros(n)
    J = np.zeros(max(n - 1, 0))
    for c, q, p in singles:
        if p == "Z":
            h[q] += c
    for c, q, p1, p2 in pairs:
        if p1 == "Z" and p2 == "Z":
            J[q] += c
    z = np.array([1.0, -1.0])
    cost = h[0] * z
    back = np.zeros((n, 2), dtype=int)
    for q in range(1, n):
        trans = cost[:, None] + J[q - 1] * np.outer(z, z)  # (previous bit, bit)
        back[q] = np.argmin(trans, axis=0)
        cost = trans[back[q], [0, 1]] + h[q] * z
    bits = [int(np.argmin(cost))]
    for q in range(n - 1, 0, -1):
        bits.append(int(back[q, bits[-1]]))
    bits = bits[::-1]

    def energy(b):
        zz = z[b]
        return float(h @ zz + np.sum(J * zz[:-1] * zz[1:]))

    base = energy(np.array(bits))
    rises = []
    for q in range(n):
        flipped = np.array(bits)
        flipped[q] ^= 1
        rises.append(energy(flipped) - base)
    q_flip = int(np.argmin(rises))
    b2 = list(bits)
    b2[q_flip] ^= 1
    return "".join(map(str, bits)), "".join(map(str, b2))


def mps_from_bitstrings(b1: str, b2: str, c1: complex, c2: complex, chi_max: int = 64,
                        svd_cutoff: float = 1e-12) -> MpsState:
    """Exact MPS of ``c1|b1> + c2|b2>`` with bond dimension at most 2."""
    if len(b1) != len(b2) or not b1 or set(b1 + b2) - {"0", "1"}:
        raise InvalidArgumentError("bitstrings must be equal-length strings of 0 and 1")
    if abs(abs(c1) ** 2 + abs(c2) ** 2 - 1.0) > 1e-10:
        raise InvalidArgumentError("amplitudes must satisfy |c1|^2 + |c2|^2 = 1")
    if b1 == b2 and c2 != 0:
        raise InvalidArgumentError("the two bitstrings must differ")
    n = len(b1)
    if c2 == 0:
        tensors = []
        for q, bit in enumerate(b1):
            a = np.zeros((1, 2, 1), dtype=complex)
            a[0, int(bit), 0] = c1 if q == 0 else 1.0
            tensors.append(a)
        return MpsState(tensors, chi_max, svd_cutoff, center=0)
    tensors = []
    for q in range(n):
        l = 1 if q == 0 else 2
        r = 1 if q == n - 1 else 2
        a = np.zeros((l, 2, r), dtype=complex)
        for branch, (bits, amp) in enumerate(((b1, c1), (b2, c2))):
            li = 0 if q == 0 else branch
            ri = 0 if q == n - 1 else branch
            a[li, int(bits[q]), ri] = amp if q == 0 else 1.0
        tensors.append(a)
    mps = MpsState(tensors, chi_max, svd_cutoff)
    mps.canonicalize()
    return mps


def _bond_hamiltonians(H: PauliSum) -> list:
    n = H.n_qubits
    if n < 2:
        raise InvalidArgumentError("TEBD needs at least two sites")
    singles, pairs = _chain_terms(H)
    bonds = [np.zeros((4, 4), dtype=complex) for _ in range(n - 1)]
    for c, q, p1, p2 in pairs:
        bonds[q] += c * np.kron(_PAULI[p1], _PAULI[p2])
    for c, q, p in singles:
        op = _PAULI[p]
        if q == 0:
            bonds[0] += c * np.kron(op, _PAULI["I"])
        elif q == n - 1:
            bonds[n - 2] += c * np.kron(_PAULI["I"], op)
        else:
            bonds[q - 1] += 0.5 * c * np.kron(_PAULI["I"], op)
            bonds[q] += 0.5 * c * np.kron(op, _PAULI["I"])
    return bonds


def _apply_gate(mps: MpsState, j: int, gate: np.ndarray, center_right: bool):
    """Apply a two-site gate on bond ``(j, j+1)``; the center must sit on ``j`` or ``j+1``."""
    a, b = mps.tensors[j], mps.tensors[j + 1]
    l, r = a.shape[0], b.shape[2]
    theta = np.tensordot(a, b, axes=(2, 0))  # (l, 2, 2, r)
    theta = np.tensordot(gate.reshape(2, 2, 2, 2), theta, axes=([2, 3], [1, 2]))
    theta = theta.transpose(2, 0, 1, 3).reshape(2 * l, 2 * r)
    try:
        u, s, vh = np.linalg.svd(theta, full_matrices=False)
    except np.linalg.LinAlgError:
        u, s, vh = sla.svd(theta, full_matrices=False, lapack_driver="gesvd")
    total = float(np.sum(s**2))
    keep = int(np.sum(s > mps.svd_cutoff * s[0])) if s[0] > 0 else 1
    keep = max(1, keep)
    if keep > mps.chi_max:
        if float(np.sum(s[mps.chi_max:keep] ** 2)) > 0:
            mps.truncations += 1
        keep = mps.chi_max
    kept = s[:keep]
    norm_kept = float(np.sqrt(np.sum(kept**2)))
    if total > 0:
        mps.discarded_weight += max(0.0, 1.0 - norm_kept**2 / total)
        mps.norm_log += math.log(norm_kept / math.sqrt(total))
    # rescale to the incoming norm so only the truncation loss is removed
    kept = kept / norm_kept * math.sqrt(total) if total > 0 else kept
    u, vh = u[:, :keep], vh[:keep]
    if center_right:
        mps.tensors[j] = u.reshape(l, 2, keep)
        mps.tensors[j + 1] = (kept[:, None] * vh).reshape(keep, 2, r)
        mps.center = j + 1
    else:
        mps.tensors[j] = (u * kept[None, :]).reshape(l, 2, keep)
        mps.tensors[j + 1] = vh.reshape(keep, 2, r)
        mps.center = j


def _layer(mps, gates, bonds, rightward):
    if rightward:
        for j in bonds:
            mps.move_center(j)
            _apply_gate(mps, j, gates[j], True)
    else:
        for j in reversed(bonds):
            mps.move_center(j + 1)
            _apply_gate(mps, j, gates[j], False)


def _renormalize(mps: MpsState):
    c = mps.center
    norm = float(np.linalg.norm(mps.tensors[c]))
    if norm > 0:
        mps.tensors[c] = mps.tensors[c] / norm


def tebd_evolve(mps: MpsState, H: PauliSum, t: float, config: TebdConfig) -> MpsState:
    """Return ``exp(-i H t)|mps>`` by second-order TEBD.

    The number of steps is ``round(|t| / config.dt)`` (at least one), so the
    actual step is ``t / steps``.  Negative ``t`` evolves backwards.
    """
    if H.n_qubits != mps.n_sites:
        raise InvalidArgumentError("Hamiltonian and MPS differ in length")
    out = mps.copy()
    out.chi_max = int(config.chi_max)
    out.svd_cutoff = float(config.svd_cutoff)
    if t == 0:
        return out
    steps = max(1, int(round(abs(t) / config.dt)))
    tau = t / steps
    hs = _bond_hamiltonians(H)
    full = [sla.expm(-1j * tau * h) for h in hs]
    half = [sla.expm(-0.5j * tau * h) for h in hs]
    even = list(range(0, len(hs), 2))
    odd = list(range(1, len(hs), 2))
    if out.center is None:
        out.move_center(0)
    # E/2 (O E)^(steps-1) O E/2 with consecutive even half steps merged
    rightward = out.center <= out.n_sites // 2
    _layer(out, half, even, rightward)
    for k in range(steps):
        rightward = not rightward
        _layer(out, full, odd, rightward)
        rightward = not rightward
        _layer(out, full if k < steps - 1 else half, even, rightward)
    _renormalize(out)
    if H.constant:
        c = out.center
        out.tensors[c] = out.tensors[c] * np.exp(-1j * H.constant * t)
    return out


def mps_overlap(a: MpsState, b: MpsState) -> complex:
    """``<a|b>`` by left-to-right transfer-matrix contraction."""
    if a.n_sites != b.n_sites:
        raise InvalidArgumentError("MPS lengths differ")
    env = np.ones((1, 1), dtype=complex)
    for x, y in zip(a.tensors, b.tensors):
        env = np.tensordot(env, y, axes=(1, 0))
        env = np.tensordot(x.conj(), env, axes=([0, 1], [0, 1]))
    return complex(env[0, 0])


@dataclass
class Mpo:
    """Operator tensors of shape ``(left, right, out, in)``."""

    tensors: list
    meta: dict = field(default_factory=dict)

    @property
    def bond_dims(self) -> list:
        return [w.shape[1] for w in self.tensors[:-1]]

    def to_matrix(self) -> np.ndarray:
        m = self.tensors[0][0]  # (right, out, in)
        for w in self.tensors[1:]:
            m = np.einsum("aij,abkl->bikjl", m, w)
            b, i, k, j, l = m.shape
            m = m.reshape(b, i * k, j * l)
        return m[0]


def chain_mpo(O: PauliSum) -> Mpo:
    """Finite-state MPO of a nearest-neighbour chain operator.

    Channels: ``0`` nothing placed yet, one per distinct left letter of a
    two-site term, and a final ``done`` channel.  The Heisenberg chain with
    fields therefore has bond dimension 5.
    """
    n = O.n_qubits
    singles, pairs = _chain_terms(O)
    letters = sorted({p1 for _, _, p1, _ in pairs})
    chan = {p: 1 + k for k, p in enumerate(letters)}
    D = 2 + len(letters)
    done = D - 1
    eye = _PAULI["I"]
    tensors = []
    for q in range(n):
        w = np.zeros((D, D, 2, 2), dtype=complex)
        w[0, 0] = eye
        w[done, done] = eye
        for p in letters:
            w[0, chan[p]] = _PAULI[p]
        for c, site, p in singles:
            if site == q:
                w[0, done] += c * _PAULI[p]
        if q == 0 and O.constant:
            w[0, done] += O.constant * eye
        for c, site, p1, p2 in pairs:
            if site + 1 == q:
                w[chan[p1], done] += c * _PAULI[p2]
        if q == 0:
            w = w[:1]
        if q == n - 1:
            w = w[:, done:]
        tensors.append(w)
    if n == 1:
        tensors = [tensors[0]]
    return Mpo(tensors, {"observable": O.describe()})


def mps_expectation(a: MpsState, O, b: MpsState) -> complex:
    """``<a|O|b>`` for a chain ``PauliSum`` or a prebuilt :class:`Mpo`."""
    if a.n_sites != b.n_sites:
        raise InvalidArgumentError("MPS lengths differ")
    mpo = O if isinstance(O, Mpo) else chain_mpo(O)
    if len(mpo.tensors) != a.n_sites:
        raise InvalidArgumentError("operator and MPS differ in length")
    env = np.ones((1, 1, 1), dtype=complex)  # (a bond, mpo bond, b bond)
    for x, w, y in zip(a.tensors, mpo.tensors, b.tensors):
        t1 = np.tensordot(env, y, axes=(2, 0))  # (a, D, in, rb)
        t2 = np.tensordot(t1, w, axes=([1, 2], [0, 3]))  # (a, rb, Dr, out)
        env = np.tensordot(x.conj(), t2, axes=([0, 1], [0, 3]))  # (ra, rb, Dr)
        env = env.transpose(0, 2, 1)
    return complex(env[0, 0, 0])


def _snapshots(initial: MpsState, H: PauliSum, grid: TimeGrid, config: TebdConfig) -> list:
    """States at every grid time, evolving outward from ``t = 0`` in both directions."""
    n_half = grid.zero_index
    states = [None] * grid.n_times
    start = initial.copy()
    start.chi_max = int(config.chi_max)
    start.svd_cutoff = float(config.svd_cutoff)
    states[n_half] = start
    for sign in (1, -1):
        cur = start
        for k in range(1, n_half + 1):
            cur = tebd_evolve(cur, H, sign * grid.dt, config)
            states[n_half + sign * k] = cur
    return states


def correlators_from_mps(initial: MpsState, H: PauliSum, O: PauliSum, grid: TimeGrid,
                         config: TebdConfig, dedup: bool = True, seed=None) -> CorrelatorSet:
    """Correlator grids from TEBD snapshots and MPS contractions.

    With ``dedup`` the overlap grid and the part of ``O`` commuting with ``H``
    are read off the first grid row and broadcast along diagonals.
    """
    if O.n_qubits != initial.n_sites or H.n_qubits != initial.n_sites:
        raise InvalidArgumentError("operators and MPS differ in length")
    states = _snapshots(initial, H, grid, config)
    n = grid.n_times
    mpo = chain_mpo(O)
    if dedup:
        O_par, O_perp = split_observable(O, H)
        first = states[0]
        b_row = np.array([mps_overlap(first, s) for s in states])
        upper_B = _toeplitz_upper(b_row, n)
        upper_A = np.zeros((n, n), dtype=complex)
        if O_par.n_terms or O_par.constant:
            par = chain_mpo(O_par)
            upper_A += _toeplitz_upper(np.array([mps_expectation(first, par, s) for s in states]), n)
        if O_perp.n_terms:
            perp = chain_mpo(O_perp)
            for i in range(n):
                for j in range(i, n):
                    upper_A[i, j] += mps_expectation(states[i], perp, states[j])
    else:
        upper_B = np.zeros((n, n), dtype=complex)
        upper_A = np.zeros((n, n), dtype=complex)
        for i in range(n):
            for j in range(i, n):
                upper_B[i, j] = mps_overlap(states[i], states[j])
                upper_A[i, j] = mps_expectation(states[i], mpo, states[j])
    B = hermitian_fill(upper_B)
    np.fill_diagonal(B, 1.0)
    A = hermitian_fill(upper_A)
    np.fill_diagonal(A, [mps_expectation(s, mpo, s).real for s in states])
    prov = {
        "backend": f"mps({config.chi_max})",
        "seed": root_seed(seed),
        "hamiltonian": H.describe(),
        "observable": O.describe(),
        "tebd_dt": config.dt,
        "max_bond": max(max(s.bond_dims, default=1) for s in states),
        "discarded_weight": max(s.discarded_weight for s in states),
        "truncations": max(s.truncations for s in states),
    }
    return CorrelatorSet(grid, A, B, prov)
