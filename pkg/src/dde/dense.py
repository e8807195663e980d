"""Dense statevector simulation.

States are plain complex numpy vectors of length ``2**n_qubits`` in the bit
convention of :mod:`dde.pauli`.  Everything here is exact linear algebra except
the first-order product formula and the sampled depolarizing noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import InvalidArgumentError, ResourceLimitError
from .pauli import PauliString, PauliSum, apply_pauli, pauli_action

__all__ = [
    "MAX_DENSE_QUBITS",
    "SpectralDecomposition",
    "NoiseModel",
    "NoiseCounter",
    "basis_state",
    "superposition",
    "diagonalize",
    "evolve_exact",
    "evolve_trotter1",
    "trotter_step_matrix",
    "inner_product",
    "expectation",
    "fidelity",
    "hadamard_test_expectation",
    "hadamard_test_trajectory",
    "hadamard_test_samples",
    "rotation_endpoints",
    "direct_measurement",
]

MAX_DENSE_QUBITS = 14


def basis_state(bits: str) -> np.ndarray:
    """Computational basis state from a bitstring such as ``"0101"``."""
    if not bits or set(bits) - {"0", "1"}:
        raise InvalidArgumentError(f"invalid bitstring {bits!r}")
    psi = np.zeros(1 << len(bits), dtype=complex)
    psi[int(bits, 2)] = 1.0
    return psi


def superposition(bitstrings, amplitudes) -> np.ndarray:
    """Normalized ``sum_k a_k |b_k>``."""
    psi = sum(a * basis_state(b) for b, a in zip(bitstrings, amplitudes))
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise InvalidArgumentError("superposition has zero norm")
    return psi / norm


def _check_state(psi, dim=None) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise InvalidArgumentError("state must be a 1D amplitude vector")
    if dim is not None and psi.size != dim:
        raise InvalidArgumentError(f"state has dimension {psi.size}, expected {dim}")
    if psi.size & (psi.size - 1):
        raise InvalidArgumentError("state dimension is not a power of two")
    return psi


@dataclass
class SpectralDecomposition:
    """Full eigensystem; column ``k`` of ``eigenvectors`` pairs with ``energies[k]``.

    ``sectors[k]`` labels the connected block of the Hamiltonian (in the
    computational basis) that eigenvector ``k`` lives in.
    """

    energies: np.ndarray
    eigenvectors: np.ndarray
    sectors: np.ndarray = field(default=None)
    hamiltonian: PauliSum | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.energies.size

    @property
    def n_qubits(self) -> int:
        return int(self.dim).bit_length() - 1

    def coefficients(self, psi) -> np.ndarray:
        """Amplitudes ``c_k = <psi_k|psi>``."""
        return self.eigenvectors.conj().T @ _check_state(psi, self.dim)

    def populations(self, psi) -> np.ndarray:
        return np.abs(self.coefficients(psi)) ** 2

    def operator_in_eigenbasis(self, O: PauliSum, columns=None) -> np.ndarray:
        V = self.eigenvectors if columns is None else self.eigenvectors[:, columns]
        return V.conj().T @ O.apply(V)

    def sector_of(self, psi, tol: float = 1e-12) -> int:
        """Sector carrying the largest weight of ``psi``."""
        p = self.populations(psi)
        weights = np.bincount(self.sectors, weights=p)
        return int(np.argmax(weights))

    def sector_ground_index(self, psi) -> int:
        """Index of the lowest eigenvector in the dominant sector of ``psi``."""
        sector = self.sector_of(psi)
        candidates = np.flatnonzero(self.sectors == sector)
        return int(candidates[np.argmin(self.energies[candidates])])


def diagonalize(H: PauliSum) -> SpectralDecomposition:
    """Exact eigensystem of ``H`` including its constant shift.

    The sparse matrix is split into connected blocks first, so symmetry sectors
    (particle number, magnetization) are diagonalized independently.
    """
    if H.n_qubits > MAX_DENSE_QUBITS:
        raise ResourceLimitError(
            f"dense diagonalization is capped at {MAX_DENSE_QUBITS} qubits, got {H.n_qubits}"
        )
    mat = H.to_sparse()
    dim = mat.shape[0]
    n_blocks, labels = connected_components(mat != 0, directed=False)
    real = H.is_real()
    energies = np.empty(dim)
    vectors = np.zeros((dim, dim), dtype=complex)
    sectors = np.empty(dim, dtype=np.int64)
    col = 0
    for b in range(n_blocks):
        idx = np.flatnonzero(labels == b)
        block = mat[idx][:, idx].toarray()
        if real:
            e, v = np.linalg.eigh(block.real)
        else:
            e, v = np.linalg.eigh(block)
        k = idx.size
        energies[col:col + k] = e
        vectors[idx, col:col + k] = v
        sectors[col:col + k] = b
        col += k
    order = np.argsort(energies, kind="stable")
    return SpectralDecomposition(energies[order], vectors[:, order], sectors[order], H)


def evolve_exact(psi, spec: SpectralDecomposition, t) -> np.ndarray:
    """``exp(-i H t)|psi>`` through the eigenbasis.

    A scalar ``t`` returns a vector; an array of times returns one column per time.
    """
    c = spec.coefficients(psi)
    t_arr = np.asarray(t, dtype=float)
    phases = np.exp(-1j * np.multiply.outer(spec.energies, np.atleast_1d(t_arr)))
    out = spec.eigenvectors @ (c[:, None] * phases)
    return out[:, 0] if t_arr.ndim == 0 else out


def inner_product(a, b) -> complex:
    a = _check_state(a)
    b = _check_state(b, a.size)
    return complex(np.vdot(a, b))


def expectation(psi, O: PauliSum, tol: float = 1e-10) -> float:
    psi = _check_state(psi, 1 << O.n_qubits)
    value = np.vdot(psi, O.apply(psi))
    if abs(value.imag) > tol * max(1.0, abs(value.real)):
        raise InvalidArgumentError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def fidelity(a, b) -> float:
    return abs(inner_product(a, b)) ** 2


# --- product formulas and noise -------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing events after every continuous rotation.

    With probability ``gamma`` a rotation is followed by an independent uniformly
    random Pauli (X, Y or Z) on each endpoint qubit of its string.  Controlled
    rotations additionally hit the ancilla with probability ``gamma`` when
    ``applies_to_ancilla`` is set.
    """

    gamma: float
    applies_to_ancilla: bool = True

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidArgumentError("gamma must lie in [0, 1]")


@dataclass
class NoiseCounter:
    """Tallies of executed rotations and injected error events."""

    rotations: int = 0
    system_events: int = 0
    ancilla_events: int = 0

    def merge(self, other: "NoiseCounter"):
        self.rotations += other.rotations
        self.system_events += other.system_events
        self.ancilla_events += other.ancilla_events


def rotation_endpoints(string: PauliString) -> tuple:
    """First and last non-identity qubit of a string (equal for weight one)."""
    support = string.support
    return support[0], support[-1]


class _Tables:
    """Per-Hamiltonian lookup tables for fast Pauli rotations."""

    def __init__(self, H: PauliSum):
        self.n_qubits = H.n_qubits
        self.coeffs = H.coefficients
        self.actions = [pauli_action(s.ops) for s in H.strings]
        self.endpoints = [rotation_endpoints(s) for s in H.strings]
        n = H.n_qubits
        self.single = {
            (q, c): pauli_action(PauliString.from_sites(n, {q: c}).ops)
            for q in range(n) for c in "XYZ"
        }


_TABLE_CACHE: dict = {}


def _tables(H: PauliSum) -> _Tables:
    key = id(H)
    hit = _TABLE_CACHE.get(key)
    if hit is None or hit[0] is not H:
        if len(_TABLE_CACHE) > 64:
            _TABLE_CACHE.clear()
        hit = (H, _Tables(H))
        _TABLE_CACHE[key] = hit
    return hit[1]


def _rotate(psi, angle, action):
    index, phase = action
    return np.cos(angle) * psi - 1j * np.sin(angle) * (phase * psi[index])


def _pauli_event(rng, n_sites):
    return rng.integers(0, 3, size=n_sites)


def _apply_event(psi, tables, endpoints, letters):
    i, j = endpoints
    sites = (i,) if i == j else (i, j)
    for q, k in zip(sites, letters):
        index, phase = tables.single[(q, "XYZ"[k])]
        psi = phase * psi[index]
    return psi


def _gate_sequence(n_terms, forward):
    return range(n_terms) if forward else range(n_terms - 1, -1, -1)


def evolve_trotter1(psi, H: PauliSum, t: float, M: int, noise: NoiseModel | None = None,
                    rng=None, counter: NoiseCounter | None = None) -> np.ndarray:
    """First-order product formula ``(prod_j exp(-i nu_j P_j t/M))**M``.

    Terms are applied in the frozen order of ``H``; the identity constant is not
    a gate but its global phase ``exp(-i c t)`` is applied exactly, so product
    formula states stay comparable with :func:`evolve_exact`.  A negative ``t`` runs the adjoint circuit (reversed term order with
    negated angles), so forward and backward steps invert each other exactly.
    """
    if int(M) < 1:
        raise InvalidArgumentError("number of Trotter steps M must be >= 1")
    psi = _check_state(psi, 1 << H.n_qubits).copy()
    tables = _tables(H)
    tau = abs(t) / M
    sign = 1.0 if t >= 0 else -1.0
    noisy = noise is not None and noise.gamma > 0
    if noisy and rng is None:
        raise InvalidArgumentError("a random generator is required for noisy evolution")
    n_terms = len(tables.coeffs)
    for _ in range(int(M)):
        for j in _gate_sequence(n_terms, t >= 0):
            psi = _rotate(psi, sign * tables.coeffs[j] * tau, tables.actions[j])
            if counter is not None:
                counter.rotations += 1
            if noisy and rng.random() < noise.gamma:
                ends = tables.endpoints[j]
                psi = _apply_event(psi, tables, ends, _pauli_event(rng, 1 if ends[0] == ends[1] else 2))
                if counter is not None:
                    counter.system_events += 1
    if H.constant:
        psi *= np.exp(-1j * H.constant * t)
    return psi


def trotter_step_matrix(H: PauliSum, t: float, M: int) -> np.ndarray:
    """Dense unitary of :func:`evolve_trotter1` for duration ``t``."""
    dim = 1 << H.n_qubits
    tables = _tables(H)
    U = np.eye(dim, dtype=complex)
    tau = abs(t) / M
    sign = 1.0 if t >= 0 else -1.0
    for _ in range(int(M)):
        for j in _gate_sequence(len(tables.coeffs), t >= 0):
            index, phase = tables.actions[j]
            a = sign * tables.coeffs[j] * tau
            U = np.cos(a) * U - 1j * np.sin(a) * (phase[:, None] * U[index])
    if H.constant:
        U *= np.exp(-1j * H.constant * t)
    return U


# --- Hadamard test ---------------------------------------------------------------


def _segments(t, t_prime, dt, M, optimized):
    """Controlled-evolution segments ``(branch, n_steps, forward)`` of one test."""

    def steps(duration):
        if dt is None:
            return (1 if duration != 0 else 0), duration
        k = duration / dt
        if abs(k - round(k)) > 1e-9:
            raise InvalidArgumentError(f"duration {duration} is not a multiple of dt={dt}")
        return int(abs(round(k))), duration

    if optimized:
        n, d = steps(t_prime - t)
        return [(1, n, d >= 0)]
    n0, d0 = steps(t)
    n1, d1 = steps(t_prime)
    return [(0, n0, d0 >= 0), (1, n1, d1 >= 0)]


class _Circuit:
    """One Hadamard-test circuit: two branch registers sharing the system qubits."""

    def __init__(self, psi0, H, O, t, t_prime, M, dt, optimized):
        self.psi0 = _check_state(psi0, 1 << H.n_qubits)
        self.H = H
        self.O = O
        self.tables = _tables(H)
        self.M = int(M)
        if self.M < 1:
            raise InvalidArgumentError("number of Trotter steps M must be >= 1")
        self.dt = dt
        self.tau_step = (abs(t) if dt is None else dt)
        self.segments = _segments(t, t_prime, dt, M, optimized)
        if dt is None and not optimized:
            # one block per branch, each with its own duration
            self._durations = [abs(t), abs(t_prime)]
        elif dt is None:
            self._durations = [abs(t_prime - t)]
        else:
            self._durations = None
        n_terms = len(self.tables.coeffs)
        self.n_rotations = sum(n * self.M * n_terms for _, n, _ in self.segments)

    def _substep(self, seg_index):
        if self._durations is not None:
            return self._durations[seg_index] / self.M
        return self.dt / self.M

    def run(self, events=None, O_apply=None):
        """Final branch vectors ``(b0, b1)`` given error events.

        ``events`` maps a rotation index to ``(system_letters, ancilla_letter)``
        where either entry may be ``None``.
        """
        tables = self.tables
        n_terms = len(tables.coeffs)
        b = [self.psi0.copy(), self.psi0.copy()]
        g = 0
        events = events or {}
        for s, (branch, n_steps, forward) in enumerate(self.segments):
            tau = self._substep(s)
            sign = 1.0 if forward else -1.0
            for _ in range(n_steps * self.M):
                for j in _gate_sequence(n_terms, forward):
                    b[branch] = _rotate(b[branch], sign * tables.coeffs[j] * tau, tables.actions[j])
                    ev = events.get(g)
                    if ev is not None:
                        sys_letters, anc = ev
                        if sys_letters is not None:
                            ends = tables.endpoints[j]
                            b[0] = _apply_event(b[0], tables, ends, sys_letters)
                            b[1] = _apply_event(b[1], tables, ends, sys_letters)
                        if anc is not None:
                            b = _ancilla_pauli(b, anc)
                    g += 1
            if self.H.constant:
                b[branch] = b[branch] * np.exp(-1j * self.H.constant * sign * tau * n_steps * self.M)
        b1 = b[1] if O_apply is None else O_apply(b[1])
        return b[0], b1

    def value(self, events=None):
        """``<b0|O|b1>``; its real/imaginary parts are the X/Y ancilla expectations."""
        O_apply = None if self.O is None else self.O.apply
        b0, b1 = self.run(events, O_apply)
        return complex(np.vdot(b0, b1))


def _ancilla_pauli(b, letter):
    # ancilla state |0>b0 + |1>b1
    if letter == 0:  # X swaps the branches
        return [b[1], b[0]]
    if letter == 1:  # Y = i X Z
        return [-1j * b[1], 1j * b[0]]
    return [b[0], -b[1]]  # Z


def _sample_events(rng, n_rotations, noise, conditioned=False):
    """Sample error events over the rotation slots of one circuit.

    Slots ``[0, G)`` are system events and ``[G, 2G)`` ancilla events.  With
    ``conditioned`` the draw is conditioned on at least one event.
    """
    gamma = noise.gamma
    n_slots = n_rotations * (2 if noise.applies_to_ancilla else 1)
    if gamma <= 0 or n_slots == 0:
        return {}
    positions = []
    pos = -1
    if conditioned:
        if gamma >= 1:
            first = 0
        else:
            # first event given at least one: truncated geometric by inverse CDF
            u = rng.random()
            total = -np.expm1(n_slots * np.log1p(-gamma))
            first = int(np.floor(np.log1p(-u * total) / np.log1p(-gamma)))
            first = min(first, n_slots - 1)
        positions.append(first)
        pos = first
    while True:
        if gamma >= 1:
            pos += 1
        else:
            pos += int(rng.geometric(gamma))
        if pos >= n_slots:
            break
        positions.append(pos)
    events = {}
    for p in positions:
        if p < n_rotations:
            sys_letters, anc = events.get(p, (None, None))
            events[p] = (_pauli_event(rng, 2), anc)
        else:
            g = p - n_rotations
            sys_letters, anc = events.get(g, (None, None))
            events[g] = (sys_letters, int(rng.integers(0, 3)))
    return events


def _fix_single_site(events, circuit):
    tables = circuit.tables
    n_terms = len(tables.coeffs)
    out = {}
    for g, (sys_letters, anc) in events.items():
        if sys_letters is not None:
            # map the global rotation index back to its term
            j = _term_of(g, circuit, n_terms)
            i0, i1 = tables.endpoints[j]
            sys_letters = sys_letters[:1] if i0 == i1 else sys_letters
        out[g] = (sys_letters, anc)
    return out


def _term_of(g, circuit, n_terms):
    for s, (branch, n_steps, forward) in enumerate(circuit.segments):
        block = n_steps * circuit.M * n_terms
        if g < block:
            k = g % n_terms
            return k if forward else n_terms - 1 - k
        g -= block
    raise IndexError("rotation index out of range")


def hadamard_test_expectation(psi0, H: PauliSum, O: PauliSum | None, t: float, t_prime: float,
                              M: int, dt: float | None = None, optimized: bool = False,
                              events=None) -> complex:
    """Exact complex ancilla signal ``<X> + i<Y>`` for a fixed set of error events.

    Without events this is ``<psi(t)|O|psi(t')>`` for Trotterized states (or
    ``<psi0|O U(t'-t)|psi0>`` for the optimized circuit with ``O`` commuting).
    """
    return _Circuit(psi0, H, O, t, t_prime, M, dt, optimized).value(events)


def hadamard_test_trajectory(psi0, H: PauliSum, O, t: float, t_prime: float, M: int,
                             noise: NoiseModel, basis: str, rng, dt: float | None = None,
                             optimized: bool = False, counter: NoiseCounter | None = None) -> int:
    """Simulate a single shot of the Hadamard test and return the ancilla outcome (+1 or -1).

    ``O`` is ``None`` for a B-type entry or a single ``(coefficient, PauliString)``
    term (the coefficient is left to the caller).  Errors are drawn gate by gate.
    """
    if basis not in ("X", "Y"):
        raise InvalidArgumentError("basis must be 'X' or 'Y'")
    O_sum = None
    if O is not None:
        coeff, string = O
        if not isinstance(string, PauliString):
            string = PauliString(str(string))
        O_sum = PauliSum(H.n_qubits, [(1.0, string)])
    circuit = _Circuit(psi0, H, O_sum, t, t_prime, M, dt, optimized)
    events = {}
    tables = circuit.tables
    n_terms = len(tables.coeffs)
    g = 0
    for branch, n_steps, forward in circuit.segments:
        for _ in range(n_steps * circuit.M):
            for j in _gate_sequence(n_terms, forward):
                sys_letters = anc = None
                if noise.gamma > 0 and rng.random() < noise.gamma:
                    i0, i1 = tables.endpoints[j]
                    sys_letters = _pauli_event(rng, 1 if i0 == i1 else 2)
                if noise.applies_to_ancilla and noise.gamma > 0 and rng.random() < noise.gamma:
                    anc = int(rng.integers(0, 3))
                if sys_letters is not None or anc is not None:
                    events[g] = (sys_letters, anc)
                g += 1
    if counter is not None:
        counter.rotations += circuit.n_rotations
        counter.system_events += sum(1 for s, _ in events.values() if s is not None)
        counter.ancilla_events += sum(1 for _, a in events.values() if a is not None)
    z = circuit.value(events)
    signal = z.real if basis == "X" else z.imag
    p_plus = min(max((1.0 + signal) / 2.0, 0.0), 1.0)
    return 1 if rng.random() < p_plus else -1


def hadamard_test_samples(psi0, H: PauliSum, O: PauliSum | None, t: float, t_prime: float, M: int,
                          noise: NoiseModel | None, rng, shots: int | None = None,
                          trajectories: int = 1, dt: float | None = None, optimized: bool = False,
                          counter: NoiseCounter | None = None, clean_value: complex | None = None):
    """Estimate ``Re + i Im`` of one correlator entry from noisy Hadamard tests.

    With ``shots`` each of the real and imaginary parts is the mean of ``shots``
    independent single-shot outcomes (one noise trajectory per shot).  Without
    shots the result estimates the noise-averaged ancilla expectation: the
    error-free branch enters exactly with weight ``(1 - gamma)**slots`` and the
    rest is the mean of ``trajectories`` trajectories drawn conditioned on at
    least one error.
    """
    circuit = _Circuit(psi0, H, O, t, t_prime, M, dt, optimized)
    if clean_value is None:
        clean_value = circuit.value()
    gamma = 0.0 if noise is None else noise.gamma
    G = circuit.n_rotations
    n_slots = G * (2 if (noise is not None and noise.applies_to_ancilla) else 1)
    p_clean = (1.0 - gamma) ** n_slots if gamma < 1 else (1.0 if n_slots == 0 else 0.0)
    parts = []
    for part in (0, 1):
        n_runs = trajectories if shots is None else int(shots)
        if shots is None:
            n_noisy = n_runs if gamma > 0 and p_clean < 1 else 0
        else:
            n_noisy = int(rng.binomial(n_runs, 1.0 - p_clean)) if gamma > 0 else 0
        signals = []
        for _ in range(n_noisy):
            ev = _fix_single_site(_sample_events(rng, G, noise, conditioned=True), circuit)
            if counter is not None:
                counter.system_events += sum(1 for s, _ in ev.values() if s is not None)
                counter.ancilla_events += sum(1 for _, a in ev.values() if a is not None)
            z = circuit.value(ev)
            signals.append(z.real if part == 0 else z.imag)
        clean = clean_value.real if part == 0 else clean_value.imag
        n_clean = n_runs - n_noisy
        if counter is not None:
            counter.rotations += n_runs * G
        if shots is None:
            noisy_mean = sum(signals) / n_noisy if n_noisy else clean
            parts.append(p_clean * clean + (1.0 - p_clean) * noisy_mean)
        else:
            plus = rng.binomial(n_clean, _p_plus(clean)) if n_clean else 0
            for s in signals:
                plus += int(rng.random() < _p_plus(s))
            parts.append((2.0 * plus - n_runs) / n_runs)
    return complex(parts[0], parts[1])


def _p_plus(signal):
    return min(max((1.0 + signal) / 2.0, 0.0), 1.0)


def direct_measurement(psi0, H: PauliSum | None, O: PauliSum, t: float, M: int,
                       noise: NoiseModel | None, rng, shots: int | None = None,
                       trajectories: int = 1, dt: float | None = None,
                       counter: NoiseCounter | None = None) -> float:
    """Ancilla-free estimate of ``<psi(t)|O|psi(t)>`` after a noisy product formula.

    With ``shots`` each Pauli term of ``O`` is measured ``shots`` times, every
    shot on its own noise trajectory; otherwise the noise-averaged expectation
    is estimated as in :func:`hadamard_test_samples`.
    """
    psi0 = _check_state(psi0, 1 << O.n_qubits)
    gamma = 0.0 if noise is None else noise.gamma
    if t == 0 or H is None:
        circuit = None
        clean = psi0
        G = 0
    else:
        circuit = _Circuit(psi0, H, None, 0.0, t, M, dt, optimized=True)
        clean = circuit.run()[1]
        G = circuit.n_rotations
    sys_noise = NoiseModel(gamma, applies_to_ancilla=False)
    p_clean = (1.0 - gamma) ** G if gamma < 1 else float(G == 0)

    def noisy_state():
        ev = _fix_single_site(_sample_events(rng, G, sys_noise, conditioned=True), circuit)
        if counter is not None:
            counter.system_events += len(ev)
        return circuit.run(ev)[1]

    if shots is None:
        exact = expectation(clean, O)
        if counter is not None:
            counter.rotations += trajectories * G
        if not (gamma > 0 and G and p_clean < 1):
            return exact
        noisy = sum(expectation(noisy_state(), O) for _ in range(trajectories)) / trajectories
        return p_clean * exact + (1.0 - p_clean) * noisy
    shots = int(shots)
    value = O.constant
    for c, s in O.terms:
        mean = float(np.real(np.vdot(clean, apply_pauli(s.ops, clean))))
        n_noisy = int(rng.binomial(shots, 1.0 - p_clean)) if gamma > 0 and G else 0
        plus = int(rng.binomial(shots - n_noisy, _p_plus(mean)))
        for _ in range(n_noisy):
            state = noisy_state()
            m = float(np.real(np.vdot(state, apply_pauli(s.ops, state))))
            plus += int(rng.random() < _p_plus(m))
        if counter is not None:
            counter.rotations += shots * G
        value += c * (2.0 * plus - shots) / shots
    return value
