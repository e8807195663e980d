"""Estimator-style wrappers around the distillation engine.

These follow the scikit-learn conventions: hyperparameters are set in
``__init__`` and returned by ``get_params``; learned state lives in trailing
underscore attributes set by ``fit``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, column_or_1d

from .engine import DdeConfig, extrapolate_copies, run_dde, variance_shift, _copy_model
from .errors import InvalidArgumentError
from .grid import CorrelatorSet

__all__ = ["DDEEstimator", "VarianceShift", "CopyExtrapolator"]


def _check_correlators(corr) -> CorrelatorSet:
    if not isinstance(corr, CorrelatorSet):
        raise InvalidArgumentError(f"expected a CorrelatorSet, got {type(corr).__name__}")
    if not (np.all(np.isfinite(corr.A)) and np.all(np.isfinite(corr.B))):
        raise InvalidArgumentError("correlator grids contain non-finite entries")
    return corr


class DDEEstimator(BaseEstimator):
    """Distilled expectation value from a correlator grid.

    Parameters
    ----------
    n_copies : int
        Number of virtual copies ``n``.
    sigma : float or None
        Width of the Gaussian time distribution; ``None`` uses ``T/4``.
    n_mc : int
        Monte Carlo samples per functional.
    estimator : {"mean", "median_of_means"}
    n_batches : int
        Batches for the median of means.
    shift : {"none", "origin", "lsq"} or float
        Variance-reduction shift; a number fixes ``c``.
    seed : int

    Attributes
    ----------
    estimate_ : Estimate
    value_ : float
    """

    def __init__(self, n_copies=1, sigma=None, n_mc=10_000, estimator="mean", n_batches=1,
                 shift="none", seed=0):
        self.n_copies = n_copies
        self.sigma = sigma
        self.n_mc = n_mc
        self.estimator = estimator
        self.n_batches = n_batches
        self.shift = shift
        self.seed = seed

    def _config(self) -> DdeConfig:
        if isinstance(self.shift, str):
            mode, c = self.shift, 0.0
        else:
            mode, c = "fixed", float(self.shift)
        return DdeConfig(n_copies=self.n_copies, sigma=self.sigma, n_mc=self.n_mc,
                         estimator=self.estimator, n_batches=self.n_batches, shift_c=c,
                         shift_mode=mode, seed=self.seed)

    def fit(self, corr, y=None):
        corr = _check_correlators(corr)
        self.estimate_ = run_dde(corr, self._config())
        self.value_ = self.estimate_.value
        return self


class VarianceShift(TransformerMixin, BaseEstimator):
    """Learn a shift ``c`` on one grid and subtract ``c B`` from ``A``.

    Parameters
    ----------
    mode : {"origin", "lsq", "none"}
    c : float or None
        Fixed shift overriding ``mode``.
    """

    def __init__(self, mode="origin", c=None):
        self.mode = mode
        self.c = c

    def fit(self, corr, y=None):
        corr = _check_correlators(corr)
        _, self.c_ = variance_shift(corr, self.c, self.mode)
        return self

    def transform(self, corr):
        check_is_fitted(self, "c_")
        shifted, _ = variance_shift(_check_correlators(corr), self.c_)
        return shifted


class CopyExtrapolator(RegressorMixin, BaseEstimator):
    """Fit ``a + c b**n`` to distilled values and extrapolate in ``n``.

    Attributes
    ----------
    limit_ : float
        The ``n -> infinity`` value ``a``.
    fit_ : CopyFit
    """

    def fit(self, n, values):
        n = column_or_1d(np.asarray(n, dtype=float))
        values = column_or_1d(np.asarray(values, dtype=float))
        if n.shape != values.shape:
            raise InvalidArgumentError("n and values differ in length")
        self.fit_ = extrapolate_copies(list(zip(n, values)))
        self.limit_ = self.fit_.limit
        return self

    def predict(self, n):
        check_is_fitted(self, "fit_")
        n = column_or_1d(np.asarray(n, dtype=float))
        f = self.fit_
        if f.degenerate:
            return np.full(n.shape, f.limit)
        return _copy_model(n, f.a, f.b, f.c)
