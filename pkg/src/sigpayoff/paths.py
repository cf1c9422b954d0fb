"""Sampled price paths, augmentation and exact piecewise-linear signatures."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor_algebra import (
    DIM,
    TruncatedTensor,
    _exp_arrays,
    _mul_exp_coeff_major,
    check_order,
    exp_level1,
    n_words,
)


@dataclass(frozen=True, eq=False)
class SampledPath:
    """A scalar price path observed on a strictly increasing grid from 0 to T."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if times.size < 2:
            raise ValueError("a path needs at least two samples")
        if times[0] != 0.0:
            raise ValueError("first time stamp must be 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise ValueError("values must be finite and positive")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def maturity(self) -> float:
        return float(self.times[-1])

    @property
    def spot(self) -> float:
        return float(self.values[0])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "value"])
            for t, x in zip(self.times, self.values):
                writer.writerow([repr(float(t)), repr(float(x))])

    @classmethod
    def from_csv(cls, path) -> "SampledPath":
        with open(Path(path), newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls([float(r["time"]) for r in rows], [float(r["value"]) for r in rows])


@dataclass(frozen=True, eq=False)
class AugmentedPath:
    """The 3-d path (t, X_t, X_0 t / T)."""

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim != 2 or points.shape[1] != DIM:
            raise ValueError(f"points must have shape (n, {DIM})")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)


def augment_values(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Augment one or many value arrays sharing a time grid.

    ``values`` has shape ``(..., n)``; the result has shape ``(..., n, 3)``.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    maturity = times[-1]
    x0 = values[..., :1]
    out = np.empty(values.shape + (DIM,))
    out[..., 0] = times
    out[..., 1] = values
    out[..., 2] = x0 * times / maturity
    return out


def augment(path: SampledPath) -> AugmentedPath:
    return AugmentedPath(path.times, augment_values(path.times, path.values))


def segment_signature(start, end, order: int) -> TruncatedTensor:
    return exp_level1(np.asarray(end, dtype=float) - np.asarray(start, dtype=float), order)


def signature_of_points(points: np.ndarray, order: int) -> np.ndarray:
    """Signature coefficients of piecewise-linear paths.

    Parameters
    ----------
    points : ndarray of shape (..., n_points, d)
        Vertices of the interpolated path(s); leading axes are batch axes.
    order : int
        Truncation order.

    Returns
    -------
    ndarray of shape (..., n_words(order))
    """
    order = check_order(order)
    points = np.asarray(points, dtype=float)
    if points.shape[-2] < 1:
        raise ValueError("need at least one point")
    deltas = np.diff(points, axis=-2)
    lead = points.shape[:-2]
    if deltas.shape[-2] == 0:
        out = np.zeros(lead + (n_words(order),))
        out[..., 0] = 1.0
        return out
    # coefficient axis first for contiguous level slices; strictly left-to-right
    # accumulation keeps results bit-reproducible
    steps = np.ascontiguousarray(np.moveaxis(deltas, (-2, -1), (0, 1)))
    sig = np.moveaxis(_exp_arrays(deltas[..., 0, :], order), -1, 0)
    sig = np.ascontiguousarray(sig)
    for i in range(1, steps.shape[0]):
        sig = _mul_exp_coeff_major(sig, steps[i], order)
    return np.moveaxis(sig, 0, -1)


def path_signature(path, order: int) -> TruncatedTensor:
    """Truncated signature of the piecewise-linear interpolation of ``path``.

    ``path`` may be an :class:`AugmentedPath`, a :class:`SampledPath` (which is
    augmented first) or an ``(n, 3)`` array of points.
    """
    if order < 1:
        raise ValueError("signature order must be >= 1")
    if isinstance(path, SampledPath):
        path = augment(path)
    points = path.points if isinstance(path, AugmentedPath) else np.asarray(path, dtype=float)
    if points.ndim != 2 or points.shape[1] != DIM:
        raise ValueError(f"expected points of shape (n, {DIM})")
    return TruncatedTensor(signature_of_points(points, order), order)
