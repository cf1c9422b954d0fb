"""Payoffs on sampled paths, reference pricers and the two exact signature payoffs."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtr

from .market import MarketCondition, RunningMoments, discount_factor, simulate_gbm_values, time_grid
from .paths import SampledPath
from .tensor_algebra import LinearFunctional, TruncatedTensor, apply_functional, n_words, word_index

MC_CHUNK = 4096


class PayoffKind(str, Enum):
    EUROPEAN_CALL = "EuropeanCall"
    EUROPEAN_PUT = "EuropeanPut"
    AMERICAN_PUT = "AmericanPut"
    ASIAN_CALL = "AsianArithmeticCall"
    LOOKBACK_CALL = "LookbackFloatingCall"
    VARIANCE_SWAP = "VarianceSwap"
    # exact signature payoffs, kept for debugging the pipeline
    FORWARD = "Forward"
    ASIAN_FORWARD = "AsianForward"


@dataclass(frozen=True)
class PayoffSpec:
    kind: PayoffKind
    moneyness: float = 1.0
    vol_strike: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "kind", PayoffKind(self.kind))
        if self.moneyness <= 0:
            raise ValueError("moneyness must be positive")
        if self.vol_strike <= 0:
            raise ValueError("vol_strike must be positive")

    def strike(self, spot: float) -> float:
        return self.moneyness * spot

    @property
    def is_path_functional(self) -> bool:
        return self.kind is not PayoffKind.AMERICAN_PUT

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "moneyness": self.moneyness, "vol_strike": self.vol_strike}

    @classmethod
    def from_dict(cls, d: dict) -> "PayoffSpec":
        return cls(d["kind"], float(d.get("moneyness", 1.0)), float(d.get("vol_strike", 0.2)))


@dataclass(frozen=True)
class GroundTruthConfig:
    binomial_steps: int = 1000
    mc_paths: int = 10_000
    mc_steps: int = 252
    seed: int = 0
    asian_control_variate: bool = True

    def __post_init__(self):
        if min(self.binomial_steps, self.mc_paths, self.mc_steps) < 1:
            raise ValueError("ground-truth configuration values must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def payoff_values(spec: PayoffSpec, times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Vectorised payoff over the last axis of ``values`` (one row per path)."""
    if not spec.is_path_functional:
        raise ValueError(f"{spec.kind.value} is not a path functional")
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    maturity = times[-1]
    spot = values[..., 0]
    strike = spec.strike(spot)
    last = values[..., -1]
    kind = spec.kind
    if kind is PayoffKind.EUROPEAN_CALL:
        return np.maximum(last - strike, 0.0)
    if kind is PayoffKind.EUROPEAN_PUT:
        return np.maximum(strike - last, 0.0)
    if kind is PayoffKind.FORWARD:
        return last - strike
    if kind in (PayoffKind.ASIAN_CALL, PayoffKind.ASIAN_FORWARD):
        avg = np.trapezoid(values, times, axis=-1) / maturity
        return np.maximum(avg - strike, 0.0) if kind is PayoffKind.ASIAN_CALL else avg - strike
    if kind is PayoffKind.LOOKBACK_CALL:
        return values.max(axis=-1) - last
    if kind is PayoffKind.VARIANCE_SWAP:
        log_ret = np.diff(np.log(values), axis=-1)
        return (log_ret**2).sum(axis=-1) / maturity - spec.vol_strike**2
    raise ValueError(f"unknown payoff kind {kind}")


def evaluate_payoff(spec: PayoffSpec, path: SampledPath, mc: MarketCondition | None = None) -> float:
    """Undiscounted payoff of one sampled path.

    The strike is ``moneyness`` times the path's first value.  ``mc`` is accepted
    for interface symmetry; the path carries everything the payoff needs.
    """
    return float(payoff_values(spec, path.times, path.values))


# ---------------------------------------------------------------------------
# reference pricers


def black_scholes_price(mc: MarketCondition, strike: float, call: bool = True) -> float:
    s, r, v, t = mc.spot, mc.rate, mc.vol, mc.maturity
    sd = v * np.sqrt(t)
    d1 = (np.log(s / strike) + (r + 0.5 * v * v) * t) / sd
    d2 = d1 - sd
    df = np.exp(-r * t)
    if call:
        return float(s * ndtr(d1) - strike * df * ndtr(d2))
    return float(strike * df * ndtr(-d2) - s * ndtr(-d1))


def crr_american_put(mc: MarketCondition, strike: float, steps: int) -> float:
    """Cox-Ross-Rubinstein binomial price of an American put."""
    dt = mc.maturity / steps
    u = np.exp(mc.vol * np.sqrt(dt))
    d = 1.0 / u
    p = (np.exp(mc.rate * dt) - d) / (u - d)
    if not 0.0 < p < 1.0:
        raise ValueError("binomial tree has no risk-neutral probability; increase steps")
    disc = np.exp(-mc.rate * dt)
    j = np.arange(steps + 1)
    spots = mc.spot * u ** (2 * j - steps)
    values = np.maximum(strike - spots, 0.0)
    for n in range(steps - 1, -1, -1):
        values = disc * (p * values[1 : n + 2] + (1 - p) * values[: n + 1])
        spots = mc.spot * u ** (2 * np.arange(n + 1) - n)
        np.maximum(values, strike - spots, out=values)
    return float(values[0])


def asian_forward_price(mc: MarketCondition, strike: float) -> float:
    """Continuous-average Asian forward: e^{-rT} (X0 (e^{rT} - 1) / (rT) - K)."""
    rt = mc.rate * mc.maturity
    growth = np.expm1(rt) / rt if abs(rt) > 1e-12 else 1.0 + rt / 2
    return float(np.exp(-rt) * (mc.spot * growth - strike))


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    dt = np.diff(times)
    w = np.zeros(times.size)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w / times[-1]


def geometric_asian_call_price(mc: MarketCondition, strike: float, times: np.ndarray) -> float:
    """Discounted call on the trapezoid-weighted geometric average of a GBM path.

    ``log G = sum_i w_i log X_{t_i}`` is Gaussian, so the price has a
    Black-Scholes form.  Used as the control variate for the arithmetic Asian.
    """
    times = np.asarray(times, dtype=float)
    w = _trapezoid_weights(times)
    drift = mc.rate - 0.5 * mc.vol**2
    mean = np.log(mc.spot) + drift * float(w @ times)
    # sum_i w_i W_{t_i} = sum_k (sum_{i >= k} w_i) (W_{t_k} - W_{t_{k-1}})
    tail = np.cumsum(w[::-1])[::-1][1:]
    sd = mc.vol * np.sqrt(float(tail**2 @ np.diff(times)))
    d2 = (mean - np.log(strike)) / sd
    forward = np.exp(mean + 0.5 * sd * sd)
    return float(discount_factor(mc) * (forward * ndtr(d2 + sd) - strike * ndtr(d2)))


def _geometric_call_payoff(strike, times, values) -> np.ndarray:
    g = np.exp(np.log(values) @ _trapezoid_weights(times))
    return np.maximum(g - strike, 0.0)


def mc_price(
    spec: PayoffSpec,
    mc: MarketCondition,
    paths: int,
    steps: int,
    seed: int,
    *tags,
    control_variate: bool = False,
) -> tuple[float, float]:
    """Discounted Monte Carlo price and standard error of a path-functional payoff.

    With ``control_variate`` the arithmetic Asian call is estimated as
    ``A - G + E[G]``, ``G`` the geometric-average call on the same path, which
    stays unbiased and cuts the standard error by one to two orders of magnitude.
    Other payoffs ignore the flag.
    """
    grid = time_grid(mc.maturity, steps)
    use_cv = control_variate and spec.kind is PayoffKind.ASIAN_CALL
    strike = spec.strike(mc.spot)
    acc = RunningMoments(1)
    for a in range(0, paths, MC_CHUNK):
        b = min(a + MC_CHUNK, paths)
        values = simulate_gbm_values(mc, steps, a, b, seed, *tags)
        y = payoff_values(spec, grid, values)
        if use_cv:
            y = y - _geometric_call_payoff(strike, grid, values)
        acc.update(y[:, None])
    df = discount_factor(mc)
    price = df * acc.mean[0]
    if use_cv:
        price += geometric_asian_call_price(mc, strike, grid)
    return float(price), float(df * acc.std_error()[0])


def ground_truth_price(
    spec: PayoffSpec, mc: MarketCondition, cfg: GroundTruthConfig, *tags
) -> tuple[float, float]:
    """Reference price and its standard error (zero for deterministic pricers).

    ``tags`` select the Monte Carlo stream, so distinct market conditions use
    distinct random numbers.
    """
    kind = spec.kind
    strike = spec.strike(mc.spot)
    if kind is PayoffKind.EUROPEAN_CALL:
        return black_scholes_price(mc, strike, call=True), 0.0
    if kind is PayoffKind.EUROPEAN_PUT:
        return black_scholes_price(mc, strike, call=False), 0.0
    if kind is PayoffKind.AMERICAN_PUT:
        return crr_american_put(mc, strike, cfg.binomial_steps), 0.0
    if kind is PayoffKind.FORWARD:
        return mc.spot - strike * discount_factor(mc), 0.0
    if kind is PayoffKind.ASIAN_FORWARD:
        return asian_forward_price(mc, strike), 0.0
    return mc_price(
        spec, mc, cfg.mc_paths, cfg.mc_steps, cfg.seed, "ground-truth", *tags,
        control_variate=cfg.asian_control_variate,
    )


# ---------------------------------------------------------------------------
# exact signature payoffs


def forward_functional(strike: float, order: int = 1) -> LinearFunctional:
    """Forward contract: -K on (), +1 on (2) and (3); pays X_T - K."""
    w = np.zeros(n_words(max(order, 1)))
    w[word_index(())] = -strike
    w[word_index((2,))] = 1.0
    w[word_index((3,))] = 1.0
    return LinearFunctional(w, max(order, 1))


def asian_forward_functional(strike: float, maturity: float, order: int = 2) -> LinearFunctional:
    """Asian forward: -K on (), 1/T on (2, 1), +1 on (3); pays the time average minus K."""
    if maturity <= 0:
        raise ValueError("maturity must be positive")
    w = np.zeros(n_words(max(order, 2)))
    w[word_index(())] = -strike
    w[word_index((2, 1))] = 1.0 / maturity
    w[word_index((3,))] = 1.0
    return LinearFunctional(w, max(order, 2))


def price_functional(functional: LinearFunctional, expected_sig: TruncatedTensor, mc: MarketCondition) -> float:
    """Fair value e^{-rT} l(E[S]) of a signature payoff."""
    if functional.order < expected_sig.order:
        functional = functional.extend(expected_sig.order)
    return discount_factor(mc) * apply_functional(functional, expected_sig)
