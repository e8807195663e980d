"""Monte Carlo virtual distillation over correlator grids.

The estimator targets ``tr[rho^n O] / tr[rho^n]`` for the time-averaged state
``rho = sum_i w_i |psi(t_i)><psi(t_i)|`` built from the discrete, truncated and
renormalized Gaussian weights ``w`` on the grid.  Each sample draws ``n``
grid indices and multiplies correlators around the cycle they define.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .dense import SpectralDecomposition, _check_state
from .errors import (
    DegenerateDenominatorError,
    FitFailureError,
    ImaginaryResidualWarning,
    InvalidArgumentError,
    ResourceLimitError,
)
from .grid import CorrelatorSet, TimeGrid
from .pauli import PauliSum
from .seeding import child_generator, root_seed

__all__ = [
    "DdeConfig",
    "Estimate",
    "CopyFit",
    "discrete_gaussian_weights",
    "mc_samples",
    "estimate_mean",
    "estimate_median_of_means",
    "variance_shift",
    "quadrature_riemann",
    "build_rho_bar_discrete",
    "build_rho_bar_analytic",
    "vd_oracle",
    "vd_oracle_curve",
    "extrapolate_copies",
    "run_dde",
]

MAX_RHO_QUBITS = 12
IMAG_WARN = 1e-6
_CHUNK = 1 << 16


@dataclass
class DdeConfig:
    """Hyperparameters of one distillation run.

    ``n_mc`` is the number of samples per functional.  For the median of means
    ``n_mc`` must equal ``n_batches * batch size``.  ``sigma=None`` selects
    ``T/4`` of the grid in use.
    """

    n_copies: int = 1
    sigma: float | None = None
    n_mc: int = 10_000
    estimator: str = "mean"
    n_batches: int = 1
    shift_c: float | None = 0.0
    shift_mode: str = "none"
    seed: int = 0

    def __post_init__(self):
        if int(self.n_copies) < 1:
            raise InvalidArgumentError("n_copies must be >= 1")
        if self.sigma is not None and not self.sigma > 0:
            raise InvalidArgumentError("sigma must be positive")
        if int(self.n_mc) < 1:
            raise InvalidArgumentError("n_mc must be >= 1")
        if self.estimator not in ("mean", "median_of_means"):
            raise InvalidArgumentError(f"unknown estimator {self.estimator!r}")
        if int(self.n_batches) < 1:
            raise InvalidArgumentError("n_batches must be >= 1")
        if self.estimator == "median_of_means" and self.n_mc % self.n_batches:
            raise InvalidArgumentError("n_mc must be divisible by n_batches")
        if self.shift_mode not in ("none", "origin", "lsq", "fixed"):
            raise InvalidArgumentError(f"unknown shift mode {self.shift_mode!r}")

    def resolve_sigma(self, grid: TimeGrid) -> float:
        return float(self.sigma) if self.sigma is not None else grid.T / 4.0


@dataclass
class Estimate:
    """Result of one estimator call; ``value = Re(mean_F / mean_J) + shift_applied``."""

    value: float
    imag_residual: float
    std_error: float
    mean_F: complex
    mean_J: complex
    var_F: float
    var_J: float
    n_used: int
    shift_applied: float = 0.0
    batch_spread: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def discrete_gaussian_weights(grid: TimeGrid, sigma: float) -> np.ndarray:
    """Gaussian weights ``exp(-t^2 / 2 sigma^2)`` on the grid, normalized to sum 1."""
    if not sigma > 0:
        raise InvalidArgumentError("sigma must be positive")
    t = grid.times
    w = np.exp(-0.5 * (t / sigma) ** 2)
    w = 0.5 * (w + w[::-1])
    return w / math.fsum(w)


def _draw_indices(rng, cdf, count, n):
    u = rng.random((count, n))
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, cdf.size - 1)


def _cycle_products(A_or_B, B, idx):
    """``X[i_n, i_1] * prod_k B[i_k, i_{k+1}]`` for each row of ``idx``."""
    out = A_or_B[idx[:, -1], idx[:, 0]].copy()
    for k in range(idx.shape[1] - 1):
        out *= B[idx[:, k], idx[:, k + 1]]
    return out


def mc_samples(corr: CorrelatorSet, weights, n: int, count: int, kind: str, rng) -> np.ndarray:
    """Draw ``count`` F- or J-samples for ``n`` copies."""
    if int(n) < 1:
        raise InvalidArgumentError("n must be >= 1")
    if kind not in ("F", "J"):
        raise InvalidArgumentError("kind must be 'F' or 'J'")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (corr.grid.n_times,):
        raise InvalidArgumentError("weights do not match the grid")
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    closing = corr.A if kind == "F" else corr.B
    out = np.empty(int(count), dtype=complex)
    for start in range(0, int(count), _CHUNK):
        m = min(_CHUNK, int(count) - start)
        idx = _draw_indices(rng, cdf, m, int(n))
        out[start:start + m] = _cycle_products(closing, corr.B, idx)
    return out


def _sample_stream(corr, weights, n, count, kind, seed, offset=0):
    """Samples drawn chunk by chunk, each chunk with its own derived stream."""
    kind_key = 0 if kind == "F" else 1
    out = np.empty(count, dtype=complex)
    for c, start in enumerate(range(0, count, _CHUNK)):
        m = min(_CHUNK, count - start)
        rng = child_generator(seed, kind_key, offset + c)
        out[start:start + m] = mc_samples(corr, weights, n, m, kind, rng)
    return out


def _ratio(mF, mJ):
    if abs(mJ) < 1e-12:
        raise DegenerateDenominatorError(f"|mean(J)| = {abs(mJ):.3e} is too small")
    r = mF / mJ
    if abs(r.imag) > IMAG_WARN * max(1.0, abs(r.real)):
        warnings.warn(f"imaginary residual {r.imag:.3e} in estimate", ImaginaryResidualWarning,
                      stacklevel=3)
    return r


def estimate_mean(F_samples, J_samples, shift_c: float = 0.0) -> Estimate:
    """Ratio of empirical means with first-order error propagation."""
    F = np.asarray(F_samples, dtype=complex)
    J = np.asarray(J_samples, dtype=complex)
    if F.size == 0 or J.size == 0:
        raise InvalidArgumentError("sample arrays must be nonempty")
    mF, mJ = F.mean(), J.mean()
    vF = float(np.mean(np.abs(F - mF) ** 2))
    vJ = float(np.mean(np.abs(J - mJ) ** 2))
    r = _ratio(mF, mJ)
    se = math.sqrt(vF / (F.size * abs(mJ) ** 2) + abs(mF) ** 2 * vJ / (J.size * abs(mJ) ** 4))
    return Estimate(float(r.real) + shift_c, abs(float(r.imag)), se, complex(mF), complex(mJ),
                    vF, vJ, int(F.size), float(shift_c))


def _complex_median(z):
    return complex(np.median(z.real), np.median(z.imag))


def estimate_median_of_means(F_samples, J_samples, K: int, shift_c: float = 0.0) -> Estimate:
    """Median over ``K`` equal batches of the batch means, taken for F and J separately.

    Complex batch means are reduced with the componentwise median.
    """
    F = np.asarray(F_samples, dtype=complex)
    J = np.asarray(J_samples, dtype=complex)
    K = int(K)
    if K <= 0:
        raise InvalidArgumentError("K must be positive")
    if F.size % K or J.size % K or F.size == 0 or J.size == 0:
        raise InvalidArgumentError("sample counts must be positive multiples of K")
    if K == 1:
        return estimate_mean(F, J, shift_c)
    bF = F.reshape(K, -1).mean(axis=1)
    bJ = J.reshape(K, -1).mean(axis=1)
    mF, mJ = _complex_median(bF), _complex_median(bJ)
    r = _ratio(mF, mJ)
    ratios = (bF / bJ).real
    # normal-theory standard error of a median of K means
    se = math.sqrt(math.pi / 2) * float(np.std(ratios, ddof=1)) / math.sqrt(K)
    vF = float(np.mean(np.abs(F - F.mean()) ** 2))
    vJ = float(np.mean(np.abs(J - J.mean()) ** 2))
    return Estimate(float(r.real) + shift_c, abs(float(r.imag)), se, mF, mJ, vF, vJ,
                    int(F.size), float(shift_c), float(np.ptp(ratios)))


def variance_shift(corr: CorrelatorSet, c: float | None = None, mode: str = "origin"):
    """Replace ``A`` by ``A - c B``; returns ``(shifted, c)``.

    ``mode="origin"`` takes ``c = Re A(0, 0)``, the initial-state expectation;
    ``mode="lsq"`` takes the real ``c`` minimizing ``sum |A - c B|^2``.  An
    explicit ``c`` overrides the mode.
    """
    if c is None:
        if mode == "origin":
            z = corr.grid.zero_index
            c = float(corr.A[z, z].real)
        elif mode == "lsq":
            c = float(np.real(np.sum(corr.A * corr.B.conj())) / np.sum(np.abs(corr.B) ** 2))
        elif mode == "none":
            c = 0.0
        else:
            raise InvalidArgumentError(f"unknown shift mode {mode!r}")
    c = float(c)
    out = corr.copy(shift_c=c)
    out.A = corr.A - c * corr.B
    return out, c


def quadrature_riemann(corr: CorrelatorSet, weights, n: int, max_copies: int | None = 3):
    """Exact expectation of the F and J samples over the discrete distribution.

    Evaluated as ``tr[(W B)^(n-1) W X]`` with ``W = diag(w)``, which equals the
    sum over all ``N_T**n`` index tuples.  ``max_copies`` caps ``n``; pass
    ``None`` to lift the cap.
    """
    n = int(n)
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    if max_copies is not None and n > max_copies:
        raise ResourceLimitError(f"quadrature capped at n <= {max_copies}")
    w = np.asarray(weights, dtype=float)
    WB = w[:, None] * corr.B
    chain = np.eye(w.size, dtype=complex)
    for _ in range(n - 1):
        chain = chain @ WB
    F = np.trace(chain @ (w[:, None] * corr.A))
    J = np.trace(chain @ (w[:, None] * corr.B))
    return complex(F), complex(J)


def _dense_cap(spec: SpectralDecomposition):
    if spec.n_qubits > MAX_RHO_QUBITS:
        raise ResourceLimitError(f"dense density matrices are capped at {MAX_RHO_QUBITS} qubits")


def build_rho_bar_discrete(initial, spec: SpectralDecomposition, grid: TimeGrid, weights) -> np.ndarray:
    """``sum_i w_i |psi(t_i)><psi(t_i)|`` in the computational basis."""
    _dense_cap(spec)
    psi0 = _check_state(initial, spec.dim)
    w = np.asarray(weights, dtype=float)
    c = spec.coefficients(psi0)
    keep = np.flatnonzero(np.abs(c) > 1e-14)
    c = c[keep]
    # eigenbasis elements c_j c_k^* sum_i w_i exp(-i (E_j - E_k) t_i)
    phases = np.exp(-1j * np.outer(spec.energies[keep], grid.times))
    kern = (phases * w) @ phases.conj().T
    rho_e = np.outer(c, c.conj()) * kern
    V = spec.eigenvectors[:, keep]
    rho = V @ rho_e @ V.conj().T
    return 0.5 * (rho + rho.conj().T)


def build_rho_bar_analytic(initial, spec: SpectralDecomposition, sigma: float) -> np.ndarray:
    """Continuous Gaussian time average: ``c_j c_k^* exp(-(E_j - E_k)^2 sigma^2 / 2)`` in the eigenbasis."""
    _dense_cap(spec)
    psi0 = _check_state(initial, spec.dim)
    c = spec.coefficients(psi0)
    keep = np.flatnonzero(np.abs(c) > 1e-14)
    c = c[keep]
    E = spec.energies[keep]
    dE = np.subtract.outer(E, E)
    rho_e = np.outer(c, c.conj()) * np.exp(-0.5 * (dE * sigma) ** 2)
    V = spec.eigenvectors[:, keep]
    rho = V @ rho_e @ V.conj().T
    return 0.5 * (rho + rho.conj().T)


def vd_oracle(rho_bar: np.ndarray, O, n: int) -> float:
    """``tr[rho^n O] / tr[rho^n]`` through the eigendecomposition of ``rho``."""
    return float(vd_oracle_curve(rho_bar, O, [n])[0])


def vd_oracle_curve(rho_bar: np.ndarray, O, n_values) -> np.ndarray:
    """:func:`vd_oracle` for several copy numbers from one eigendecomposition."""
    ns = np.asarray(n_values, dtype=int).ravel()
    if ns.size == 0 or ns.min() < 1:
        raise InvalidArgumentError("n must be >= 1")
    rho = np.asarray(rho_bar, dtype=complex)
    if rho.shape[0] > 4096:
        raise ResourceLimitError("density matrix larger than 4096 x 4096")
    lam, U = np.linalg.eigh(rho)
    lam = np.clip(lam, 0.0, None)
    Om = O.apply(U) if isinstance(O, PauliSum) else np.asarray(O) @ U
    diag = np.einsum("ik,ik->k", U.conj(), Om).real
    ratio = lam / lam.max()
    out = np.empty(ns.size)
    for k, n in enumerate(ns):
        pw = ratio ** int(n)
        out[k] = np.dot(pw, diag) / pw.sum()
    return out


@dataclass
class CopyFit:
    """Fit of ``a + c * b**n``; ``limit`` is ``a``."""

    limit: float
    a: float
    b: float
    c: float
    degenerate: bool = False
    residual: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def _copy_model(n, a, b, c):
    return a + c * np.power(b, n)


def extrapolate_copies(estimates) -> CopyFit:
    """Large-``n`` limit of a sequence of distilled values.

    ``estimates`` is a list of ``(n, value)``.  The initial ratio comes from
    successive differences of the first three points.
    """
    pts = sorted((int(n), float(v)) for n, v in estimates)
    ns = np.array([p[0] for p in pts], dtype=float)
    vs = np.array([p[1] for p in pts])
    if ns.size < 3 or np.unique(ns).size != ns.size:
        raise InvalidArgumentError("need at least three points with distinct n")
    diffs = np.diff(vs)
    if np.all(np.abs(diffs) < 1e-12):
        return CopyFit(float(vs[-1]), float(vs[-1]), 0.0, 0.0, degenerate=True)
    d1, d2 = diffs[0], diffs[1]
    b0 = d2 / d1 if abs(d1) > 1e-300 else 0.5
    if not 0 < abs(b0) < 1 or not np.isfinite(b0):
        b0 = 0.5 * np.sign(b0) if b0 else 0.5
    # a + c b^n: consecutive differences c b^n (b - 1)
    c0 = d1 / (b0 ** ns[0] * (b0 - 1.0))
    a0 = vs[0] - c0 * b0 ** ns[0]
    try:
        params, cov = curve_fit(_copy_model, ns, vs, p0=(a0, b0, c0), maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitFailureError(str(exc), {"a0": a0, "b0": b0, "c0": c0}) from exc
    a, b, c = (float(x) for x in params)
    resid = float(np.sqrt(np.mean((_copy_model(ns, a, b, c) - vs) ** 2)))
    if not np.all(np.isfinite(params)):
        raise FitFailureError("non-finite fit parameters", {"params": params.tolist()})
    return CopyFit(a, a, b, c, residual=resid, diagnostics={"a0": a0, "b0": b0, "c0": c0})


def run_dde(corr: CorrelatorSet, config: DdeConfig) -> Estimate:
    """Full distillation pipeline on one correlator grid."""
    sigma = config.resolve_sigma(corr.grid)
    weights = discrete_gaussian_weights(corr.grid, sigma)
    if config.shift_mode == "none" and not config.shift_c:
        shifted, c = corr, 0.0
    elif config.shift_mode == "fixed" or (config.shift_mode == "none" and config.shift_c):
        shifted, c = variance_shift(corr, config.shift_c)
    else:
        shifted, c = variance_shift(corr, None, config.shift_mode)
    n = int(config.n_copies)
    seed = root_seed(config.seed)
    count = int(config.n_mc)
    F = _sample_stream(shifted, weights, n, count, "F", seed)
    J = _sample_stream(shifted, weights, n, count, "J", seed)
    if config.estimator == "median_of_means":
        return estimate_median_of_means(F, J, config.n_batches, c)
    return estimate_mean(F, J, c)
