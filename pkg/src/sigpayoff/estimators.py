"""scikit-learn compatible transformers and regressor for signature pricing.

``ExpectedSignatureFeatures`` maps market conditions to closed-form expected
signatures, ``SignatureFeatures`` maps sampled paths to path signatures, and
``SignatureRegressor`` learns the linear functional.  They compose with
:class:`sklearn.pipeline.Pipeline`::

    pricer = make_pipeline(ExpectedSignatureFeatures(order=4), SignatureRegressor())
    pricer.fit(market_array, prices)
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.pipeline import Pipeline
from sklearn.utils.validation import check_array, check_is_fitted, validate_data

from .expected_signature import phi
from .market import MarketCondition
from .paths import SampledPath, augment_values, signature_of_points
from .tensor_algebra import LinearFunctional, check_order, n_words

MARKET_COLUMNS = ("spot", "rate", "vol", "maturity")


def check_market_array(X) -> np.ndarray:
    """Validate an ``(n_samples, 4)`` array of spot, rate, vol, maturity."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != len(MARKET_COLUMNS):
        raise ValueError(f"expected {len(MARKET_COLUMNS)} columns {MARKET_COLUMNS}, got {X.shape[1]}")
    if np.any(X[:, 0] <= 0) or np.any(X[:, 2] <= 0) or np.any(X[:, 3] <= 0):
        raise ValueError("spot, vol and maturity must be positive")
    return X


def check_path_array(X) -> np.ndarray:
    """Normalise paths to an ``(n_samples, n_points, 2)`` array of (time, value).

    Accepts a sequence of :class:`SampledPath` sharing one length, or an array.
    """
    if len(X) and isinstance(X[0], SampledPath):
        X = np.stack([np.column_stack([p.times, p.values]) for p in X])
    X = check_array(X, dtype=np.float64, allow_nd=True, ensure_2d=False)
    if X.ndim != 3 or X.shape[2] != 2:
        raise ValueError("paths must have shape (n_samples, n_points, 2)")
    if X.shape[1] < 2:
        raise ValueError("paths need at least two samples")
    if np.any(X[..., 1] <= 0):
        raise ValueError("path values must be positive")
    if np.any(np.diff(X[..., 0], axis=1) <= 0):
        raise ValueError("path times must be strictly increasing")
    return X


class SignatureFeatures(TransformerMixin, BaseEstimator):
    """Truncated signatures of augmented sampled paths.

    Parameters
    ----------
    order : int, default=4
        Truncation order.
    """

    def __init__(self, order=4):
        self.order = order

    def fit(self, X, y=None):
        check_order(self.order)
        check_path_array(X)
        self.n_features_out_ = n_words(self.order)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_out_")
        X = check_path_array(X)
        out = np.empty((X.shape[0], n_words(self.order)))
        for i, path in enumerate(X):
            points = augment_values(path[:, 0] - path[0, 0], path[:, 1])
            out[i] = signature_of_points(points, self.order)
        return out


class ExpectedSignatureFeatures(TransformerMixin, BaseEstimator):
    """Black-Scholes expected signatures of market conditions.

    Each row of ``X`` is ``(spot, rate, vol, maturity)``.
    """

    def __init__(self, order=4):
        self.order = order

    def fit(self, X, y=None):
        if check_order(self.order) < 1:
            raise ValueError("order must be >= 1")
        check_market_array(X)
        self.n_features_out_ = n_words(self.order)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_out_")
        X = check_market_array(X)
        return np.vstack([phi(MarketCondition(*row), self.order).coeffs for row in X])


def _solve(A: np.ndarray, y: np.ndarray, ridge: float) -> np.ndarray:
    # SVD keeps the ridge=0 case away from the normal equations
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0:
        return np.zeros(A.shape[1])
    if ridge > 0:
        filt = s / (s * s + ridge)
    else:
        cutoff = np.finfo(float).eps * max(A.shape) * s[0]
        filt = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return Vt.T @ (filt * (U.T @ y))


class SignatureRegressor(RegressorMixin, BaseEstimator):
    """Ridge least squares for a linear functional on signature coordinates.

    The empty-word column plays the role of the intercept, so none is fitted
    separately.  Columns are scaled to unit max-abs before solving and the
    weights mapped back, so predictions do not depend on the scaling; the
    ridge penalty acts on the scaled weights.

    Parameters
    ----------
    ridge : float, default=1e-10
        Tikhonov penalty. ``0`` gives the minimum-norm least-squares solution.
    standardize : bool, default=True
        Scale feature columns before solving.
    """

    def __init__(self, ridge=1e-10, standardize=True):
        self.ridge = ridge
        self.standardize = standardize

    def fit(self, X, y):
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        X, y = validate_data(self, X, y, y_numeric=True, dtype=np.float64)
        n_samples, n_features = X.shape
        if n_samples < 2:
            warnings.warn("fitting a signature functional to a single sample", UserWarning, stacklevel=2)
        if not np.any(y):
            self.coef_ = np.zeros(n_features)
        else:
            scale = np.max(np.abs(X), axis=0) if self.standardize else np.ones(n_features)
            scale = np.where(scale > 0, scale, 1.0)
            self.coef_ = _solve(X / scale, y, float(self.ridge)) / scale
        self.residual_norm_ = float(np.linalg.norm(X @ self.coef_ - y))
        self.train_r2_ = 1.0 if not np.any(y) else _r2_or_nan(y, X @ self.coef_)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return X @ self.coef_

    def functional(self, order: int | None = None) -> LinearFunctional:
        check_is_fitted(self, "coef_")
        if order is None:
            order = _order_from_width(self.coef_.size)
        return LinearFunctional(self.coef_, order)


def _order_from_width(width: int) -> int:
    order = 0
    while n_words(order) < width:
        order += 1
    if n_words(order) != width:
        raise ValueError(f"{width} is not a signature width")
    return order


def _r2_or_nan(y, pred) -> float:
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if y.size < 2 or ss_tot == 0.0:
        return float("nan")
    return 1.0 - float(np.sum((y - pred) ** 2)) / ss_tot


def make_signature_pricer(order: int = 4, ridge: float = 1e-10) -> Pipeline:
    """Pipeline from ``(spot, rate, vol, maturity)`` rows to discounted prices."""
    return Pipeline(
        [("expected_signature", ExpectedSignatureFeatures(order=order)), ("functional", SignatureRegressor(ridge=ridge))]
    )
