"""Black-Scholes market, exact GBM simulation and Monte Carlo expected signatures.

Random streams are counter-based: path ``k`` of purpose ``tag`` under master
seed ``s`` always draws from the same Philox stream, so results do not depend
on chunking or on how many workers generate the paths.
"""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass

import numpy as np

from .paths import SampledPath, augment_values, signature_of_points
from .tensor_algebra import TruncatedTensor, check_order, n_words

CHUNK_SIZE = 2048


@dataclass(frozen=True)
class MarketCondition:
    spot: float
    rate: float
    vol: float
    maturity: float

    def __post_init__(self):
        for name in ("spot", "rate", "vol", "maturity"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.spot <= 0:
            raise ValueError("spot must be positive")
        if self.vol <= 0:
            raise ValueError("vol must be positive")
        if self.maturity <= 0:
            raise ValueError("maturity must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.spot, self.rate, self.vol, self.maturity])

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SimConfig:
    steps: int = 252
    paths: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if int(self.steps) < 1 or int(self.paths) < 1:
            raise ValueError("steps and paths must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "paths", int(self.paths))
        object.__setattr__(self, "seed", int(self.seed))


def _tag_id(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag)
    return zlib.crc32(str(tag).encode())


def stream_key(seed: int, *tags) -> int:
    """128-bit Philox key derived from a master seed and purpose tags."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_tag_id(t) for t in tags))
    hi, lo = ss.generate_state(2, dtype=np.uint64)
    return (int(hi) << 64) | int(lo)


def path_stream(seed: int, index: int, *tags) -> np.random.Generator:
    """Independent generator for path ``index`` under ``(seed, *tags)``."""
    key = stream_key(seed, *tags)
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, int(index), 0]))


def time_grid(maturity: float, steps: int) -> np.ndarray:
    return maturity * np.arange(steps + 1) / steps


def _step_values(mc: MarketCondition, steps: int, normals: np.ndarray) -> np.ndarray:
    dt = mc.maturity / steps
    log_inc = (mc.rate - 0.5 * mc.vol**2) * dt + mc.vol * np.sqrt(dt) * normals
    out = np.empty(normals.shape[:-1] + (steps + 1,))
    out[..., 0] = mc.spot
    out[..., 1:] = mc.spot * np.exp(np.cumsum(log_inc, axis=-1))
    return out


def simulate_gbm_path(mc: MarketCondition, steps: int, rng: np.random.Generator) -> SampledPath:
    """Exact lognormal stepping of GBM on a uniform grid with ``steps`` intervals."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    normals = rng.standard_normal(steps)
    return SampledPath(time_grid(mc.maturity, steps), _step_values(mc, steps, normals))


def simulate_gbm_values(
    mc: MarketCondition, steps: int, start: int, stop: int, seed: int, *tags
) -> np.ndarray:
    """Values of paths ``start..stop-1`` as an array of shape ``(stop - start, steps + 1)``.

    Row ``k - start`` equals ``simulate_gbm_path(mc, steps, path_stream(seed, k, *tags)).values``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    key = stream_key(seed, *tags)
    normals = np.empty((stop - start, steps))
    for row, k in enumerate(range(start, stop)):
        gen = np.random.Generator(np.random.Philox(key=key, counter=[0, 0, k, 0]))
        normals[row] = gen.standard_normal(steps)
    return _step_values(mc, steps, normals)


def discount_factor(mc: MarketCondition) -> float:
    return float(np.exp(-mc.rate * mc.maturity))


class RunningMoments:
    """Per-coordinate mean and sum of squared deviations, merged in call order."""

    def __init__(self, width: int):
        self.n = 0
        self.mean = np.zeros(width)
        self.m2 = np.zeros(width)

    def update(self, batch: np.ndarray) -> None:
        nb = batch.shape[0]
        if nb == 0:
            return
        bmean = batch.mean(axis=0)
        bm2 = ((batch - bmean) ** 2).sum(axis=0)
        n = self.n + nb
        delta = bmean - self.mean
        self.mean = self.mean + delta * (nb / n)
        self.m2 = self.m2 + bm2 + delta**2 * (self.n * nb / n)
        self.n = n

    def std_error(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(self.m2 / (self.n - 1) / self.n)


def _signature_chunk(mc, steps, order, start, stop, seed, tags):
    values = simulate_gbm_values(mc, steps, start, stop, seed, *tags)
    points = augment_values(time_grid(mc.maturity, steps), values)
    return signature_of_points(points, order)


def mc_expected_signature(
    mc: MarketCondition,
    cfg: SimConfig,
    order: int,
    *,
    tag="oracle",
    n_jobs: int | None = None,
) -> tuple[TruncatedTensor, TruncatedTensor]:
    """Monte Carlo estimate of the expected signature of the augmented GBM path.

    Returns
    -------
    mean, std_error : TruncatedTensor
        Sample mean and standard error of every signature coordinate.
    """
    order = check_order(order)
    if order < 1:
        raise ValueError("order must be >= 1")
    bounds = [(a, min(a + CHUNK_SIZE, cfg.paths)) for a in range(0, cfg.paths, CHUNK_SIZE)]
    if n_jobs is not None and n_jobs != 1:
        from joblib import Parallel, delayed

        chunks = Parallel(n_jobs=n_jobs)(
            delayed(_signature_chunk)(mc, cfg.steps, order, a, b, cfg.seed, (tag,)) for a, b in bounds
        )
    else:
        chunks = (_signature_chunk(mc, cfg.steps, order, a, b, cfg.seed, (tag,)) for a, b in bounds)
    acc = RunningMoments(n_words(order))
    for chunk in chunks:
        acc.update(chunk)
    return TruncatedTensor(acc.mean, order), TruncatedTensor(acc.std_error(), order)
