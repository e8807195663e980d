"""Hardware-efficient ansatz, gradient-descent VQE and McLachlan real-time evolution.

One ansatz layer applies ``Ry`` on every qubit, then ``Rz`` on every qubit,
then CNOT gates around a ring, ``CX(q, q+1 mod N)`` for ``q = 0 .. N-1`` in order.  Rotations are ``exp(-i theta P / 2)``.
Parameters are ordered layer by layer as ``[Ry_0 .. Ry_{N-1}, Rz_0 .. Rz_{N-1}]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg as sla

from .errors import InvalidArgumentError, NumericalError
from .pauli import PauliString, PauliSum, pauli_action
from .seeding import child_generator

__all__ = [
    "AnsatzSpec",
    "VariationalState",
    "VqeResult",
    "VariationalTrajectory",
    "apply_ansatz",
    "state_and_derivatives",
    "metric_and_gradient",
    "energy_and_gradient",
    "vqe_train",
    "var_evolve",
]


@dataclass(frozen=True)
class AnsatzSpec:
    n_qubits: int
    layers: int
    topology: str = "ring"

    def __post_init__(self):
        if self.n_qubits < 1:
            raise InvalidArgumentError("n_qubits must be positive")
        if self.layers < 1:
            raise InvalidArgumentError("layers must be >= 1")
        if self.topology != "ring":
            raise InvalidArgumentError("only the ring topology is supported")

    @property
    def n_params(self) -> int:
        return 2 * self.n_qubits * self.layers

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits


@dataclass
class VariationalState:
    spec: AnsatzSpec
    params: np.ndarray

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float).copy()
        if self.params.shape != (self.spec.n_params,):
            raise InvalidArgumentError(
                f"expected {self.spec.n_params} parameters, got {self.params.size}"
            )


class _Ops:
    """Cached single-qubit tables and the CNOT-ring permutation for one spec."""

    _cache: dict = {}

    def __new__(cls, spec: AnsatzSpec):
        hit = cls._cache.get(spec)
        if hit is not None:
            return hit
        self = super().__new__(cls)
        n = spec.n_qubits
        self.Y = [pauli_action(PauliString.from_sites(n, {q: "Y"}).ops) for q in range(n)]
        self.Zsign = np.array(
            [pauli_action(PauliString.from_sites(n, {q: "Z"}).ops)[1].real for q in range(n)]
        )
        # the ring acts as psi -> psi[perm]
        basis = np.arange(spec.dim)
        perm = basis.copy()
        pairs = [(q, (q + 1) % n) for q in range(n)] if n > 2 else ([(0, 1)] if n == 2 else [])
        for c, t in pairs:
            flip = np.where(basis & (1 << (n - 1 - c)), basis ^ (1 << (n - 1 - t)), basis)
            perm = perm[flip]
        self.perm = perm
        self.inverse_perm = np.argsort(perm)
        self.y_index = np.stack([ix for ix, _ in self.Y])
        self.y_phase = np.stack([ph for _, ph in self.Y])
        cls._cache[spec] = self
        return self


def _split_params(spec, params):
    n = spec.n_qubits
    p = params.reshape(spec.layers, 2, n)
    return p[:, 0, :], p[:, 1, :]


@numba.njit(cache=True)
def _ry_rows(M, c, s, n):
    """Left-multiply the rows of ``M`` by the ``Ry`` layer, in place.

    Row ``j`` pairs with ``j | bit`` for each qubit; qubit ``q`` is bit ``n-1-q``.
    """
    dim = M.shape[0]
    for q in range(n):
        bit = 1 << (n - 1 - q)
        cq, sq = c[q], s[q]
        for j0 in range(dim):
            if j0 & bit:
                continue
            j1 = j0 | bit
            for k in range(M.shape[1]):
                a, b = M[j0, k], M[j1, k]
                M[j0, k] = cq * a - sq * b
                M[j1, k] = sq * a + cq * b


@numba.njit(cache=True)
def _state_kernel(ry, rz, zsign, y_index, y_phase, perm, inverse_perm):
    L, n = ry.shape
    dim = perm.size
    psi = np.zeros((dim, 1), dtype=np.complex128)
    psi[0, 0] = 1.0
    phis = np.empty((L, dim), dtype=np.complex128)
    chis = np.empty((L, dim), dtype=np.complex128)
    dz = np.empty((L, dim), dtype=np.complex128)
    for l in range(L):
        for j in range(dim):
            acc = 0.0
            for q in range(n):
                acc += rz[l, q] * zsign[q, j]
            dz[l, j] = np.exp(-0.5j * acc)
        _ry_rows(psi, np.cos(0.5 * ry[l]), np.sin(0.5 * ry[l]), n)
        for j in range(dim):
            phis[l, j] = psi[j, 0]
            chis[l, j] = dz[l, j] * psi[j, 0]
        for j in range(dim):
            psi[j, 0] = chis[l, perm[j]]
    # Dt[k] = d psi / d theta_k; tail holds the transposed product of later layers
    Dt = np.empty((2 * n * L, dim), dtype=np.complex128)
    tail = np.eye(dim, dtype=np.complex128)
    seeds = np.empty((2 * n, dim), dtype=np.complex128)
    for l in range(L - 1, -1, -1):
        tail = tail[inverse_perm]
        for q in range(n):
            for j in range(dim):
                seeds[q, j] = dz[l, j] * y_phase[q, j] * phis[l, y_index[q, j]]
                seeds[n + q, j] = zsign[q, j] * chis[l, j]
        Dt[2 * n * l:2 * n * (l + 1)] = -0.5j * np.dot(seeds, tail)
        for j in range(dim):
            for k in range(dim):
                tail[j, k] *= dz[l, j]
        # rows of the transposed tail mix with R^T
        _ry_rows(tail, np.cos(0.5 * ry[l]), -np.sin(0.5 * ry[l]), n)
    return psi[:, 0], Dt


def apply_ansatz(vs: VariationalState) -> np.ndarray:
    """``U(theta)|0...0>``."""
    return state_and_derivatives(vs)[0]


def state_and_derivatives(vs: VariationalState):
    """Return ``psi`` and the matrix whose column ``k`` is ``d psi / d theta_k``."""
    ops = _Ops(vs.spec)
    ry, rz = _split_params(vs.spec, vs.params)
    psi, Dt = _state_kernel(np.ascontiguousarray(ry), np.ascontiguousarray(rz), ops.Zsign,
                            ops.y_index, ops.y_phase, ops.perm, ops.inverse_perm)
    return psi, Dt.T


def _operator(H):
    if isinstance(H, PauliSum):
        return H.to_matrix()
    return np.asarray(H)


def _metric(D):
    stacked = np.concatenate([D.real, D.imag])
    return stacked.T @ stacked


def metric_and_gradient(vs: VariationalState, H):
    """``Re <d_i psi|d_j psi>`` and ``Im <d_i psi|H|psi>``."""
    psi, D = state_and_derivatives(vs)
    Hm = _operator(H)
    return _metric(D), (D.conj().T @ (Hm @ psi)).imag


def energy_and_gradient(vs: VariationalState, H):
    psi, D = state_and_derivatives(vs)
    Hpsi = _operator(H) @ psi
    return float(np.vdot(psi, Hpsi).real), 2.0 * (D.conj().T @ Hpsi).real


@dataclass
class VqeResult:
    state: VariationalState
    energies: np.ndarray
    initial_params: np.ndarray


def vqe_train(H: PauliSum, spec: AnsatzSpec, steps: int = 50, learning_rate: float = 0.05,
              seed: int = 0, init_scale: float = np.pi) -> VqeResult:
    """Plain gradient descent from seeded random parameters in ``[-init_scale, init_scale]``.

    ``energies[k]`` is the energy before update ``k``; the final entry is the
    energy of the returned parameters.
    """
    if int(steps) < 1:
        raise InvalidArgumentError("steps must be >= 1")
    rng = child_generator(seed, 0)
    theta0 = rng.uniform(-init_scale, init_scale, spec.n_params)
    vs = VariationalState(spec, theta0)
    Hm = _operator(H)
    energies = []
    for _ in range(int(steps)):
        e, g = energy_and_gradient(vs, Hm)
        energies.append(e)
        vs.params -= learning_rate * g
    energies.append(energy_and_gradient(vs, Hm)[0])
    return VqeResult(vs, np.array(energies), theta0)


@dataclass
class VariationalTrajectory:
    times: np.ndarray
    params: np.ndarray
    spec: AnsatzSpec
    meta: dict = field(default_factory=dict)

    def state(self, k: int) -> np.ndarray:
        return apply_ansatz(VariationalState(self.spec, self.params[k]))

    def states(self) -> np.ndarray:
        return np.stack([self.state(k) for k in range(self.times.size)], axis=1)


def _solve(A, C, lam):
    M = A + lam * np.eye(A.shape[0])
    try:
        factor = sla.cho_factor(M, check_finite=False)
        return sla.cho_solve(factor, C, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError("regularized metric is not positive definite",
                             {"condition": float(np.linalg.cond(M))}) from exc


def _flow(theta, spec, Hm, lam, phase_correction):
    psi, D = state_and_derivatives(VariationalState(spec, theta))
    Hpsi = Hm @ psi
    A = _metric(D)
    C = (D.conj().T @ Hpsi).imag
    if phase_correction:
        # project out the global-phase direction of the tangent space
        g = D.conj().T @ psi
        A -= np.outer(g, g.conj()).real
        C -= (g * np.vdot(psi, Hpsi)).imag
    return _solve(A, C, lam)


def var_evolve(vs: VariationalState, H, total_t: float, dt_integrator: float, lam: float = 1e-4,
               outer_dt: float | None = None, method: str = "euler",
               phase_correction: bool = True) -> VariationalTrajectory:
    """Integrate ``(A + lam I) theta_dot = C`` from time 0 to ``total_t``.

    Parameters
    ----------
    method : {"euler", "rk4"}
        Explicit integrator with fixed step ``dt_integrator``.
    phase_correction : bool
        Use the gauge-invariant metric ``Re(<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>)``
        and force, so the unreachable global-phase motion does not leak into
        the other parameters.

    Snapshots are stored every ``outer_dt`` (default: only the endpoints).  A
    negative ``total_t`` evolves backwards in time.
    """
    if not dt_integrator > 0:
        raise InvalidArgumentError("dt_integrator must be positive")
    if lam < 0:
        raise InvalidArgumentError("lambda must be non-negative")
    if method not in ("euler", "rk4"):
        raise InvalidArgumentError(f"unknown integrator {method!r}")
    sign = 1.0 if total_t >= 0 else -1.0
    span = abs(total_t)
    outer = span if outer_dt is None else float(outer_dt)
    if span and not outer > 0:
        raise InvalidArgumentError("outer_dt must be positive")
    n_outer = int(round(span / outer)) if span else 0
    if span and abs(n_outer * outer - span) > 1e-9 * max(1.0, span):
        raise InvalidArgumentError("total_t must be a multiple of outer_dt")
    inner = int(round(outer / dt_integrator)) if span else 0
    if span and abs(inner * dt_integrator - outer) > 1e-9 * outer:
        raise InvalidArgumentError("outer_dt must be a multiple of dt_integrator")
    Hm = sign * _operator(H)
    spec = vs.spec
    h = dt_integrator

    def f(th):
        return _flow(th, spec, Hm, lam, phase_correction)

    theta = vs.params.copy()
    snaps = [theta.copy()]
    for _ in range(n_outer):
        for _ in range(inner):
            if method == "euler":
                theta = theta + h * f(theta)
            else:
                k1 = f(theta)
                k2 = f(theta + 0.5 * h * k1)
                k3 = f(theta + 0.5 * h * k2)
                k4 = f(theta + h * k3)
                theta = theta + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        snaps.append(theta.copy())
    times = sign * outer * np.arange(n_outer + 1) if span else np.zeros(1)
    return VariationalTrajectory(times, np.array(snaps), vs.spec,
                                 {"dt_integrator": dt_integrator, "lambda": lam, "method": method,
                                  "phase_correction": phase_correction})
