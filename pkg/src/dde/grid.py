"""Two-time correlator grids ``A(t, t') = <psi(t)|O|psi(t')>`` and ``B(t, t') = <psi(t)|psi(t')>``."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dense import (
    NoiseCounter,
    NoiseModel,
    SpectralDecomposition,
    _check_state,
    direct_measurement,
    evolve_exact,
    evolve_trotter1,
    hadamard_test_samples,
    trotter_step_matrix,
)
from .errors import InvalidArgumentError
from .pauli import PauliSum, split_observable
from .seeding import child_generator, root_seed

__all__ = [
    "TimeGrid",
    "CorrelatorSet",
    "compute_grid_exact",
    "compute_grid_trotter",
    "inject_shot_noise",
    "extrapolate_trotter",
    "hermitian_fill",
    "count_grid_rotations",
]

# work-unit labels for seed derivation
_UNIT_B, _UNIT_A_PAR, _UNIT_A_PERP, _UNIT_A_DIAG = 1, 2, 3, 4


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = -T + i*dt`` over ``[-T, T]`` with ``2T/dt + 1`` points."""

    T: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if self.T < 0:
            raise InvalidArgumentError("T must be non-negative")
        ratio = 2.0 * self.T / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise InvalidArgumentError(f"2T/dt = {ratio} is not an integer")

    @property
    def n_times(self) -> int:
        return int(round(2.0 * self.T / self.dt)) + 1

    @property
    def times(self) -> np.ndarray:
        return -self.T + self.dt * np.arange(self.n_times)

    @property
    def zero_index(self) -> int:
        return self.n_times // 2

    @property
    def steps(self) -> np.ndarray:
        """Signed step counts ``t_i / dt`` of every grid point."""
        return np.arange(self.n_times) - self.zero_index

    def nyquist_ok(self, spec: SpectralDecomposition) -> bool:
        spread = float(spec.energies[-1] - spec.energies[0])
        return spread == 0 or self.dt <= np.pi / spread


@dataclass
class CorrelatorSet:
    """Hermitian ``N_T x N_T`` grids ``A`` and ``B`` with provenance."""

    grid: TimeGrid
    A: np.ndarray
    B: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.grid.n_times
        self.A = np.asarray(self.A, dtype=complex)
        self.B = np.asarray(self.B, dtype=complex)
        if self.A.shape != (n, n) or self.B.shape != (n, n):
            raise InvalidArgumentError(f"correlator grids must be {n}x{n}")

    def copy(self, **provenance) -> "CorrelatorSet":
        prov = dict(self.provenance)
        prov.update(provenance)
        return CorrelatorSet(self.grid, self.A.copy(), self.B.copy(), prov)

    def hermitian_error(self) -> float:
        return max(
            float(np.max(np.abs(self.A - self.A.conj().T))),
            float(np.max(np.abs(self.B - self.B.conj().T))),
        )

    @property
    def backend(self) -> str:
        return str(self.provenance.get("backend", "unknown"))


def hermitian_fill(upper: np.ndarray, real_diagonal: bool = True) -> np.ndarray:
    """Mirror the upper triangle into a Hermitian matrix."""
    out = np.triu(upper) + np.triu(upper, 1).conj().T
    if real_diagonal:
        idx = np.diag_indices_from(out)
        out[idx] = out[idx].real
    return out


def _toeplitz_upper(values: np.ndarray, n: int) -> np.ndarray:
    """Upper-triangular matrix with ``M[i, j] = values[j - i]`` for ``j >= i``."""
    i, j = np.triu_indices(n)
    out = np.zeros((n, n), dtype=complex)
    out[i, j] = values[j - i]
    return out


def _descriptor(op: PauliSum | None) -> str:
    return "none" if op is None else op.describe()


def _split(O: PauliSum, H: PauliSum | None, dedup: bool):
    if dedup and H is not None:
        return split_observable(O, H)
    return PauliSum(O.n_qubits, [], 0.0), O


def _assemble(grid, grid_states, forward_states, O, O_par, O_perp, dedup):
    """Fill A and B from states on the grid and forward states ``psi(k*dt)``.

    ``grid_states[:, i] = psi(t_i)``; ``forward_states[:, k] = psi(k*dt)`` for
    ``k = 0 .. N_T - 1`` and is only used by the deduplicated path.
    """
    n = grid.n_times
    if dedup:
        psi0 = forward_states[:, 0]
        b_diff = psi0.conj() @ forward_states
        upper_B = _toeplitz_upper(b_diff, n)
        upper_A = np.zeros((n, n), dtype=complex)
        if O_par.n_terms or O_par.constant:
            a_diff = O_par.apply(psi0).conj() @ forward_states
            upper_A += _toeplitz_upper(a_diff, n)
        if O_perp.n_terms:
            upper_A += grid_states.conj().T @ O_perp.apply(grid_states)
    else:
        upper_B = grid_states.conj().T @ grid_states
        upper_A = grid_states.conj().T @ O.apply(grid_states)
    B = hermitian_fill(upper_B)
    np.fill_diagonal(B, 1.0)
    A = hermitian_fill(upper_A)
    # direct expectation values on the diagonal
    OG = O.apply(grid_states)
    np.fill_diagonal(A, np.einsum("di,di->i", grid_states.conj(), OG).real)
    return A, B


def compute_grid_exact(initial, spec: SpectralDecomposition, O: PauliSum, grid: TimeGrid,
                       dedup: bool = True, seed=None) -> CorrelatorSet:
    """Correlators from exact evolution through the eigenbasis.

    With ``dedup`` the overlap grid and the part of ``O`` commuting with every
    Hamiltonian term are computed once per time difference and broadcast.
    """
    psi0 = _check_state(initial, spec.dim)
    if O.n_qubits != spec.n_qubits:
        raise InvalidArgumentError("observable and spectrum act on different qubit counts")
    if not grid.nyquist_ok(spec):
        warnings.warn("time step exceeds pi / spectral spread", RuntimeWarning, stacklevel=2)
    O_par, O_perp = _split(O, spec.hamiltonian, dedup)
    grid_states = evolve_exact(psi0, spec, grid.times)
    forward = evolve_exact(psi0, spec, grid.dt * np.arange(grid.n_times)) if dedup else None
    A, B = _assemble(grid, grid_states, forward, O, O_par, O_perp, dedup)
    prov = {
        "backend": "exact",
        "seed": root_seed(seed),
        "hamiltonian": _descriptor(spec.hamiltonian),
        "observable": _descriptor(O),
    }
    return CorrelatorSet(grid, A, B, prov)


def _trotter_states(psi0, H, grid, M, dense_cap=11):
    """Noiseless product-formula states on the grid and forward to ``2T``."""
    n = grid.n_times
    steps = grid.steps
    k_max = n - 1
    if H.n_qubits <= dense_cap:
        fwd_op = trotter_step_matrix(H, grid.dt, M)
        bwd_op = trotter_step_matrix(H, -grid.dt, M)
        fwd = lambda v: fwd_op @ v  # noqa: E731
        bwd = lambda v: bwd_op @ v  # noqa: E731
    else:
        fwd = lambda v: evolve_trotter1(v, H, grid.dt, M)  # noqa: E731
        bwd = lambda v: evolve_trotter1(v, H, -grid.dt, M)  # noqa: E731
    forward = np.empty((psi0.size, k_max + 1), dtype=complex)
    forward[:, 0] = psi0
    for k in range(1, k_max + 1):
        forward[:, k] = fwd(forward[:, k - 1])
    backward = np.empty((psi0.size, grid.zero_index + 1), dtype=complex)
    backward[:, 0] = psi0
    for k in range(1, grid.zero_index + 1):
        backward[:, k] = bwd(backward[:, k - 1])
    grid_states = np.empty((psi0.size, n), dtype=complex)
    for i, s in enumerate(steps):
        grid_states[:, i] = forward[:, s] if s >= 0 else backward[:, -s]
    return grid_states, forward


def count_grid_rotations(grid: TimeGrid, H: PauliSum, M: int) -> int:
    """Gate budget ``N_G = N_T * N_P * M`` used to normalize the error rate."""
    return grid.n_times * H.n_terms * int(M)


def compute_grid_trotter(initial, H: PauliSum, O: PauliSum, grid: TimeGrid, M: int,
                         noise: NoiseModel | None = None, shots: int | None = None,
                         seed=None, dedup: bool = True, trajectories: int = 1) -> CorrelatorSet:
    """Correlators from first-order product-formula circuits.

    Without noise and shots the entries are exact overlaps of Trotterized
    states.  Otherwise every unique entry is estimated from Hadamard-test
    circuits: ``shots`` single-shot samples for each of the real and imaginary
    parts, or the exact ancilla expectation averaged over ``trajectories`` noise
    trajectories when ``shots`` is ``None``.  With ``dedup`` the overlap and
    the commuting part of ``O`` use the shortened circuits that start from the
    initial state, and the diagonal of ``A`` is measured directly.
    """
    if int(M) < 1:
        raise InvalidArgumentError("number of Trotter steps M must be >= 1")
    if shots is not None and int(shots) < 1:
        raise InvalidArgumentError("shots must be >= 1")
    psi0 = _check_state(initial, 1 << H.n_qubits)
    seed = root_seed(seed)
    O_par, O_perp = _split(O, H, dedup)
    grid_states, forward = _trotter_states(psi0, H, grid, M)
    A, B = _assemble(grid, grid_states, forward, O, O_par, O_perp, dedup)
    prov = {
        "backend": f"trotter(M={int(M)})",
        "M": int(M),
        "seed": seed,
        "hamiltonian": _descriptor(H),
        "observable": _descriptor(O),
    }
    noisy = noise is not None and noise.gamma > 0
    if not noisy and shots is None:
        return CorrelatorSet(grid, A, B, prov)

    counter = NoiseCounter()
    A, B = _sampled_grid(psi0, H, O, O_par, O_perp, grid, int(M), noise, shots, seed,
                         dedup, trajectories, A, B, counter)
    gamma = 0.0 if noise is None else noise.gamma
    prov["backend"] = f"noisy(M={int(M)},gamma={gamma!r},shots={shots if shots else 'none'})"
    prov["rotations"] = counter.rotations
    prov["system_events"] = counter.system_events
    prov["ancilla_events"] = counter.ancilla_events
    return CorrelatorSet(grid, A, B, prov)


def _entry(psi0, H, O, t, tp, M, noise, shots, trajectories, dt, optimized, rng, counter, clean):
    """One correlator entry; sums are sampled term by term when shots are finite."""
    if shots is None or O is None:
        return hadamard_test_samples(psi0, H, O, t, tp, M, noise, rng, shots=shots,
                                     trajectories=trajectories, dt=dt, optimized=optimized,
                                     counter=counter, clean_value=clean)
    value = 0j
    if O.constant:
        value += O.constant * hadamard_test_samples(
            psi0, H, None, t, tp, M, noise, rng, shots=shots, dt=dt,
            optimized=optimized, counter=counter)
    for c, s in O.terms:
        term = PauliSum(O.n_qubits, [(1.0, s)])
        value += c * hadamard_test_samples(psi0, H, term, t, tp, M, noise, rng, shots=shots,
                                           dt=dt, optimized=optimized, counter=counter)
    return value


def _sampled_grid(psi0, H, O, O_par, O_perp, grid, M, noise, shots, seed, dedup,
                  trajectories, A_clean, B_clean, counter):
    n = grid.n_times
    times = grid.times
    dt = grid.dt
    A = np.zeros((n, n), dtype=complex)
    B = np.zeros((n, n), dtype=complex)
    common = dict(M=M, noise=noise, shots=shots, trajectories=trajectories, dt=dt, counter=counter)
    if dedup:
        z = grid.zero_index
        b_diff = np.ones(n, dtype=complex)
        a_diff = np.zeros(n, dtype=complex)
        has_par = bool(O_par.n_terms or O_par.constant)
        for k in range(n):
            tk = k * dt
            if k > 0:
                rng = child_generator(seed, _UNIT_B, k)
                b_diff[k] = _entry(psi0, H, None, 0.0, tk, optimized=True, rng=rng,
                                   clean=B_clean[z, z + k] if z + k < n else None, **common)
            if has_par and k > 0:
                rng = child_generator(seed, _UNIT_A_PAR, k)
                a_diff[k] = _entry(psi0, H, O_par, 0.0, tk, optimized=True, rng=rng,
                                   clean=None, **common)
        B = hermitian_fill(_toeplitz_upper(b_diff, n))
        upper_A = _toeplitz_upper(a_diff, n)
        if O_perp.n_terms:
            for i in range(n):
                for j in range(i + 1, n):
                    rng = child_generator(seed, _UNIT_A_PERP, i, j)
                    upper_A[i, j] += _entry(psi0, H, O_perp, times[i], times[j], optimized=False,
                                            rng=rng, clean=None if has_par else A_clean[i, j],
                                            **common)
        A = hermitian_fill(upper_A)
        # diagonal: commuting part needs no evolution, the rest is measured after evolution
        par_diag = direct_measurement(psi0, None, O_par, 0.0, M, None,
                                      child_generator(seed, _UNIT_A_DIAG, n), shots=shots) \
            if has_par else 0.0
        for i in range(n):
            rng = child_generator(seed, _UNIT_A_DIAG, i)
            perp = direct_measurement(psi0, H, O_perp, times[i], M, noise, rng, shots=shots,
                                      trajectories=trajectories, dt=dt, counter=counter) \
                if O_perp.n_terms else 0.0
            A[i, i] = par_diag + perp
    else:
        for i in range(n):
            for j in range(i + 1, n):
                rng = child_generator(seed, _UNIT_B, i, j)
                B[i, j] = _entry(psi0, H, None, times[i], times[j], optimized=False, rng=rng,
                                 clean=B_clean[i, j], **common)
                rng = child_generator(seed, _UNIT_A_PERP, i, j)
                A[i, j] = _entry(psi0, H, O, times[i], times[j], optimized=False, rng=rng,
                                 clean=A_clean[i, j], **common)
        B = hermitian_fill(B)
        A = hermitian_fill(A)
        for i in range(n):
            rng = child_generator(seed, _UNIT_A_DIAG, i)
            A[i, i] = direct_measurement(psi0, H, O, times[i], M, noise, rng, shots=shots,
                                         trajectories=trajectories, dt=dt, counter=counter)
    np.fill_diagonal(B, 1.0)
    return A, B


def inject_shot_noise(corr: CorrelatorSet, n_shots: int, seed=None) -> CorrelatorSet:
    """Add ``N(0, 1/n_shots)`` noise to the real and imaginary parts of each unique entry.

    Unique entries are the upper triangle.  The diagonal of ``B`` stays exactly 1
    and the diagonal of ``A`` receives real noise only so both grids stay Hermitian.
    """
    if int(n_shots) < 1:
        raise InvalidArgumentError("n_shots must be >= 1")
    rng = child_generator(seed, 0)
    n = corr.grid.n_times
    sd = 1.0 / np.sqrt(n_shots)
    iu = np.triu_indices(n, 1)
    A = corr.A.copy()
    B = corr.B.copy()
    m = iu[0].size
    A[iu] += sd * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    B[iu] += sd * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    idx = np.arange(n)
    A[idx, idx] = A[idx, idx].real + sd * rng.standard_normal(n)
    A = hermitian_fill(A)
    B = hermitian_fill(B)
    prov = dict(corr.provenance)
    prov["backend"] = f"{corr.backend}+shots({int(n_shots)})"
    prov["noise_seed"] = root_seed(seed)
    return CorrelatorSet(corr.grid, A, B, prov)


def extrapolate_trotter(grids) -> CorrelatorSet:
    """Zero-step-size limit of grids computed at several Trotter step counts.

    Each real and imaginary entry is fitted by least squares to
    ``a x**3 + b x**2 + c`` with ``x = 1/M`` and replaced by ``c``.
    """
    grids = list(grids)
    Ms = np.array([float(m) for m, _ in grids])
    if len(set(Ms)) < 3 or len(set(Ms)) != len(Ms):
        raise InvalidArgumentError("need at least three distinct step counts")
    ref = grids[0][1]
    for _, g in grids:
        if g.grid != ref.grid:
            raise InvalidArgumentError("grids differ in their time axes")
    x = 1.0 / Ms
    design = np.column_stack([x**3, x**2, np.ones_like(x)])
    pinv = np.linalg.pinv(design)
    out = []
    for name in ("A", "B"):
        stack = np.stack([getattr(g, name) for _, g in grids])
        shape = stack.shape[1:]
        flat = stack.reshape(len(grids), -1)
        re = (pinv @ flat.real)[2]
        im = (pinv @ flat.imag)[2]
        out.append((re + 1j * im).reshape(shape))
    A, B = out
    A = hermitian_fill(A)
    B = hermitian_fill(B)
    np.fill_diagonal(B, 1.0)
    prov = dict(ref.provenance)
    prov.pop("M", None)
    prov["backend"] = "trotter(extrapolated M=" + ",".join(str(int(m)) for m in Ms) + ")"
    return CorrelatorSet(ref.grid, A, B, prov)
