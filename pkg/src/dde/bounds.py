"""Closed-form error bounds and resource formulas, with exact-norm counterparts.

Notation: ``p`` are eigen-populations of the initial state, ``q`` the target
index, ``p'`` the populations of the other eigenstates renormalized to sum 1,
``delta`` the smallest gap inside the support and ``c_l1`` the 1-norm of the
amplitude vector in the eigenbasis of the time-averaging error matrix.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .dense import SpectralDecomposition
from .errors import BoundInapplicableError, InvalidArgumentError, ResourceLimitError

__all__ = [
    "PopulationVector",
    "GapResult",
    "BoundReport",
    "renyi_entropy",
    "spectral_gap",
    "lemma1_bounds",
    "lemma2_bound",
    "theorem1_bound",
    "copies_required",
    "resource_estimate",
    "mom_sample_complexity",
    "mom_precision",
    "shot_complexity",
]

MAX_BOUND_QUBITS = 12


def _ceil(x: float) -> int:
    # guard against round-off pushing exact integers up by one
    return int(math.ceil(x - 1e-9 * max(1.0, abs(x))))


@dataclass(frozen=True)
class PopulationVector:
    """Probability vector over eigenstates with a designated target."""

    p: np.ndarray
    q_index: int = 0

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise InvalidArgumentError("populations must be a nonempty vector")
        if np.any(p < -1e-15) or abs(p.sum() - 1.0) > 1e-10:
            raise InvalidArgumentError("populations must be non-negative and sum to 1")
        if not 0 <= self.q_index < p.size:
            raise InvalidArgumentError("target index out of range")
        object.__setattr__(self, "p", np.clip(p, 0.0, None))

    @classmethod
    def from_amplitudes(cls, c, q_index: int = 0) -> "PopulationVector":
        p = np.abs(np.asarray(c)) ** 2
        return cls(p / p.sum(), q_index)

    @property
    def p_q(self) -> float:
        return float(self.p[self.q_index])

    @property
    def others(self) -> np.ndarray:
        """Renormalized populations of the non-target states (``p'``)."""
        rest = np.delete(self.p, self.q_index)
        s = rest.sum()
        return rest / s if s > 0 else rest


def _as_populations(p) -> PopulationVector:
    return p if isinstance(p, PopulationVector) else PopulationVector(np.asarray(p, dtype=float))


def renyi_entropy(p, a: float) -> float:
    """``ln(sum p^a) / (1 - a)``; ``a = inf`` gives ``-ln max p``."""
    p = _as_populations(p).p
    p = p[p > 0]
    if a == 1:
        raise InvalidArgumentError("the a = 1 (Shannon) case is not supported")
    if not a > 0:
        raise InvalidArgumentError("order a must be positive")
    if math.isinf(a):
        return float(-np.log(p.max()))
    # log-sum-exp for numerical stability at large a
    logs = a * np.log(p)
    m = logs.max()
    return float((m + np.log(np.sum(np.exp(logs - m)))) / (1.0 - a))


@dataclass(frozen=True)
class GapResult:
    delta: float
    degenerate: bool = False
    single_eigenstate: bool = False
    support: tuple = ()


def spectral_gap(spec: SpectralDecomposition, c, support_tol: float = 1e-12) -> GapResult:
    """Smallest energy difference among eigenstates with ``|c_k| > support_tol``."""
    c = np.asarray(c)
    if c.size != spec.dim:
        raise InvalidArgumentError("amplitude vector does not match the spectrum")
    support = np.flatnonzero(np.abs(c) > support_tol)
    if support.size < 2:
        return GapResult(float("nan"), single_eigenstate=True, support=tuple(support.tolist()))
    E = np.sort(spec.energies[support])
    gap = float(np.min(np.diff(E)))
    if gap < 1e-10:
        return GapResult(0.0, degenerate=True, support=tuple(support.tolist()))
    return GapResult(gap, support=tuple(support.tolist()))


@dataclass
class BoundReport:
    """Bounds next to exactly computed norms of the time-averaging error."""

    hs_bound: float
    trace_bound: float
    hs_actual: float
    trace_actual: float
    delta: float
    h2: float
    c_l1: float
    sigma: float = float("nan")
    a_bound: float = float("nan")
    q_bound: float = float("nan")
    validity_ok: bool | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def lemma1_bounds(c, spec: SpectralDecomposition, sigma: float,
                  support_tol: float = 1e-12) -> BoundReport:
    """Bounds on the deviation of the Gaussian time average from the dephased state.

    ``c`` are the initial-state amplitudes in the eigenbasis.  The error matrix
    is formed on the support of ``c``, where it has entries
    ``c_j c_k^* exp(-(E_j - E_k)^2 sigma^2 / 2)`` off the diagonal.
    """
    if spec.n_qubits > MAX_BOUND_QUBITS:
        raise ResourceLimitError(f"bounds need dense matrices; capped at {MAX_BOUND_QUBITS} qubits")
    c = np.asarray(c, dtype=complex)
    gap = spectral_gap(spec, c, support_tol)
    pops = PopulationVector.from_amplitudes(c)
    h2 = renyi_entropy(pops, 2)
    if gap.single_eigenstate:
        return BoundReport(0.0, 0.0, 0.0, 0.0, float("nan"), 0.0, 0.0, float(sigma))
    idx = np.array(gap.support)
    cs = c[idx]
    E = spec.energies[idx]
    dE = np.subtract.outer(E, E)
    err = np.outer(cs, cs.conj()) * np.exp(-0.5 * (dE * sigma) ** 2)
    np.fill_diagonal(err, 0.0)
    evals, evecs = np.linalg.eigh(err)
    hs_actual = float(np.linalg.norm(err, "fro"))
    trace_actual = float(np.sum(np.abs(evals)))
    c_l1 = float(np.sum(np.abs(evecs.conj().T @ cs)))
    decay = math.exp(-0.5 * (gap.delta * sigma) ** 2)
    hs_bound = decay * math.sqrt(max(0.0, 1.0 - math.exp(-h2)))
    trace_bound = decay * c_l1
    return BoundReport(hs_bound, trace_bound, hs_actual, trace_actual, gap.delta, h2, c_l1,
                       float(sigma))


def lemma2_bound(p, n: int) -> float:
    """``2 (1/p_q - 1)^n exp(-(n-1) H_n(p'))`` on the virtual-distillation error."""
    p = _as_populations(p)
    n = int(n)
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    if p.p_q >= 1.0:
        return 0.0
    ratio = 1.0 / p.p_q - 1.0
    exponent = 0.0 if n == 1 else (n - 1) * renyi_entropy(p.others, n)
    return float(2.0 * ratio**n * math.exp(-exponent))


def theorem1_bound(p, n: int, delta: float, sigma: float, c_l1: float, O_norm_inf: float) -> float:
    """Leading two terms of the joint bound; the quadratic tail is omitted."""
    p = _as_populations(p)
    second = 4.0 * n / p.p_q * math.exp(-0.5 * (delta * sigma) ** 2) * c_l1 * O_norm_inf
    return lemma2_bound(p, n) + second


def validity_condition(trace_norm: float, p_q: float, n: int) -> bool:
    """Sufficient condition ``||E||_1 < p_q / (e n)`` for the leading-order expansion."""
    return trace_norm < p_q / (math.e * n)


def copies_required(Q_target: float, p) -> int:
    """Smallest ``n`` making the distillation term at most ``Q/2``."""
    p = _as_populations(p)
    if not 0 < Q_target < 1:
        raise InvalidArgumentError("Q_target must lie in (0, 1)")
    if p.p_q <= 0.5:
        raise BoundInapplicableError("bounds require a dominant population p_q > 1/2")
    if p.p_q >= 1.0:
        return 1
    h_inf = renyi_entropy(p.others, math.inf)
    num = math.log(4.0 / Q_target) + h_inf
    den = math.log(1.0 / (1.0 / p.p_q - 1.0)) + h_inf
    return max(1, _ceil(num / den))


def resource_estimate(Q_target: float, p, delta: float, c_l1: float, O_norm_inf: float):
    """Copies ``n`` and window ``sigma`` whose joint bound is at most ``Q_target``.

    Each term is given half the budget.  ``sigma`` solves
    ``4 n / p_q exp(-delta^2 sigma^2 / 2) c_l1 ||O|| = Q / 2`` (clamped at 0).
    """
    p = _as_populations(p)
    n = copies_required(Q_target, p)
    if not delta > 0:
        raise BoundInapplicableError("the spectral gap must be positive")
    arg = 2.0 * math.log(n / Q_target) + 2.0 * math.log(8.0 * c_l1 * O_norm_inf / p.p_q) \
        if c_l1 * O_norm_inf > 0 else -1.0
    sigma = math.sqrt(arg) / delta if arg > 0 else 0.0
    return n, sigma


def mom_sample_complexity(epsilon: float, delta_fail: float, f_abs: float, j: float):
    """Batches ``K`` and batch size ``N_batch`` for an ``(epsilon, delta)`` ratio estimate."""
    if not j > 0:
        raise InvalidArgumentError("j must be positive")
    if not epsilon > 0:
        raise InvalidArgumentError("epsilon must be positive")
    if not 0 < delta_fail < 1:
        raise InvalidArgumentError("failure probability must lie in (0, 1)")
    K = max(1, _ceil(-8.0 * math.log(delta_fail)))
    N_batch = max(1, _ceil(4.0 * (abs(f_abs) + j) ** 2 / j**4 / epsilon**2))
    return K, N_batch


def mom_precision(N_batch: int, f: float, j: float) -> float:
    """Worst-case ratio error ``(|f| + xi)/(j - xi) - |f|/j`` with ``xi = 2 / sqrt(N_batch)``."""
    xi = 2.0 / math.sqrt(N_batch)
    if xi >= j:
        return math.inf
    return abs((abs(f) + xi) / (j - xi) - abs(f) / j)


def shot_complexity(p, Q_target: float, epsilon: float, n: int | None = None) -> float:
    """Sampling overhead ``p_q^(-2n) epsilon^-2`` with ``n`` from :func:`copies_required`."""
    p = _as_populations(p)
    if n is None:
        n = copies_required(Q_target, p)
    return float(p.p_q ** (-2 * int(n)) / epsilon**2)
