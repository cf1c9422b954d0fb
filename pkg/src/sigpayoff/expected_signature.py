"""Closed-form expected signature of the augmented Black-Scholes path.

Every coordinate of the X0-free table ``F`` is an exponential polynomial
``sum c * t**k * exp(rate * t)``; the recurrence only ever convolves such
sums against ``E_n(s) = exp(rate_n * s)``, so the table is built exactly.

Coefficients are carried in extended precision (mpmath).  Nearly equal rates
(small ``r``, small ``vol``) otherwise produce terms of size ``1/d**k`` that
cancel catastrophically in float64.
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .market import MarketCondition
from .tensor_algebra import TruncatedTensor, check_order, check_word, word_enumeration, word_to_str

CONFLUENCE_TOL = 1e-12


def _dps(order: int) -> int:
    # each nested convolution may cost ~12 digits when rates differ by ~1e-12
    return 30 + 13 * max(order, 1)


def alpha(word: Sequence[int]) -> int:
    """Number of letters equal to 2 or 3."""
    return sum(1 for a in check_word(word) if a in (2, 3))


def en_rate(n: int, rate: float, vol: float):
    return n * mpmath.mpf(rate) + mpmath.mpf(n * (n - 1)) / 2 * mpmath.mpf(vol) ** 2


def en(n: int, t: float, mc: MarketCondition) -> float:
    """E_n(t) = exp((n r + n(n-1) vol^2 / 2) t), the normalised n-th moment of X_t."""
    if n < 0 or t < 0:
        raise ValueError("need n >= 0 and t >= 0")
    return float(np.exp((n * mc.rate + 0.5 * n * (n - 1) * mc.vol**2) * t))


def reduce_threes(word: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Replace every letter 3 by 1.

    Along an augmented path dX^3 = (X0/T) dX^1, so the coordinate of ``word``
    equals ``(X0/T)**count`` times the coordinate of the reduced word.
    """
    w = check_word(word)
    return sum(1 for a in w if a == 3), tuple(1 if a == 3 else a for a in w)


class ExpPolySum:
    """Finite sum of terms ``coef * t**power * exp(rate * t)``.

    Terms sharing ``(power, rate)`` are merged and zero coefficients dropped.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Iterable[tuple] = ()):
        merged: dict[tuple, object] = {}
        for coef, power, rate in terms:
            if int(power) != power or power < 0:
                raise ValueError("powers must be non-negative integers")
            key = (int(power), mpmath.mpf(rate))
            merged[key] = merged.get(key, 0) + mpmath.mpf(coef)
        self._terms = {k: v for k, v in merged.items() if v != 0}

    @classmethod
    def constant(cls, c=1) -> "ExpPolySum":
        return cls([(c, 0, 0)])

    @property
    def terms(self) -> list[tuple[float, int, float]]:
        return [(float(c), k, float(r)) for (k, r), c in sorted(self._terms.items())]

    def __len__(self):
        return len(self._terms)

    def _iter(self):
        for (k, r), c in self._terms.items():
            yield c, k, r

    def __add__(self, other: "ExpPolySum") -> "ExpPolySum":
        return ExpPolySum(list(self._iter()) + list(other._iter()))

    def __sub__(self, other: "ExpPolySum") -> "ExpPolySum":
        return self + other.scale(-1)

    def scale(self, factor) -> "ExpPolySum":
        factor = mpmath.mpf(factor)
        return ExpPolySum((c * factor, k, r) for c, k, r in self._iter())

    def evaluate_mp(self, t):
        t = mpmath.mpf(t)
        return mpmath.fsum(c * t**k * mpmath.exp(r * t) for c, k, r in self._iter())

    def __call__(self, t) -> float:
        return float(self.evaluate_mp(t))

    def __repr__(self):
        body = " + ".join(f"{c:.6g}*t^{k}*exp({r:.6g}t)" for c, k, r in self.terms) or "0"
        return f"ExpPolySum({body})"


def convolve(e_rate, g: ExpPolySum, tol: float = CONFLUENCE_TOL) -> ExpPolySum:
    """``t -> int_0^t exp(e_rate * s) g(t - s) ds`` in closed form.

    With ``d = mu - lam`` for a term ``t**k exp(mu t)``::

        int_0^t e^{lam s} (t-s)^k e^{mu (t-s)} ds = e^{lam t} int_0^t u^k e^{d u} du

    which for ``d != 0`` is
    ``sum_j (-1)^j k!/(k-j)! t^(k-j) e^{mu t} / d^(j+1) - (-1)^k k! e^{lam t} / d^(k+1)``.
    For ``|d| < tol`` the confluent form ``t^(k+1) e^{lam t} / (k+1)`` is used.
    """
    lam = mpmath.mpf(e_rate)
    out = []
    for c, k, mu in g._iter():
        d = mu - lam
        if abs(d) < tol:
            out.append((c / (k + 1), k + 1, lam))
            continue
        kf = factorial(k)
        for j in range(k + 1):
            coef = c * (-1) ** j * mpmath.mpf(kf // factorial(k - j)) / d ** (j + 1)
            out.append((coef, k - j, mu))
        out.append((-c * (-1) ** k * kf / d ** (k + 1), 0, lam))
    return ExpPolySum(out)


class FTable:
    """X0-free expected-signature coordinates as functions of time.

    ``table[word]`` is an :class:`ExpPolySum`; the expected signature over
    ``[0, t]`` has coordinate ``X0**alpha(word) * table[word](t)``.
    """

    def __init__(self, order: int, rate: float, vol: float, maturity: float, entries: dict):
        self.order = order
        self.rate = rate
        self.vol = vol
        self.maturity = maturity
        self._entries = entries
        self._dps = _dps(order)

    def __getitem__(self, word) -> ExpPolySum:
        return self._entries[check_word(word)]

    def __contains__(self, word) -> bool:
        return tuple(word) in self._entries

    def __len__(self):
        return len(self._entries)

    def evaluate(self, word, t: float) -> float:
        with mpmath.workdps(self._dps):
            return float(self[word].evaluate_mp(t))

    def evaluate_all(self, t: float) -> np.ndarray:
        with mpmath.workdps(self._dps):
            return np.array([float(self._entries[w].evaluate_mp(t)) for w in word_enumeration(self.order)])


def _recurse(word, table, rate, vol):
    """One step of the length induction for a word over {1, 2} of length >= 2."""
    r, s2 = mpmath.mpf(rate), mpmath.mpf(vol) ** 2
    lam = en_rate(alpha(word), rate, vol)
    head, tail = word[0], word[1:]
    if head == 1:
        return convolve(lam, table[tail])
    if head == 2 and tail[0] in (1, 2):
        out = convolve(lam, table[tail]).scale(r + s2 * alpha(tail))
        if tail[0] == 2:
            out = out + convolve(lam, table[tail[1:]]).scale(s2 / 2)
        return out
    raise AssertionError(f"unreachable word shape {word}")


@lru_cache(maxsize=512)
def _cached_table(order: int, rate: float, vol: float, maturity: float) -> FTable:
    with mpmath.workdps(_dps(order)):
        r = mpmath.mpf(rate)
        inv_t = 1 / mpmath.mpf(maturity)
        reduced: dict[tuple, ExpPolySum] = {
            (): ExpPolySum.constant(1),
            (1,): ExpPolySum([(1, 1, 0)]),
            (2,): ExpPolySum([(1, 0, r), (-1, 0, 0)]),
        }
        for length in range(2, order + 1):
            for w in word_enumeration(length):
                if len(w) == length and 3 not in w:
                    reduced[w] = _recurse(w, reduced, rate, vol)
        entries = {}
        for w in word_enumeration(order):
            count, red = reduce_threes(w)
            entries[w] = reduced[red] if count == 0 else reduced[red].scale(inv_t**count)
    return FTable(order, rate, vol, maturity, entries)


def build_f_table(mc: MarketCondition, order: int) -> FTable:
    """Build the exponential-polynomial table for all words up to ``order``.

    Depends on ``mc`` only through rate, vol and maturity; tables are cached.
    """
    order = check_order(order)
    if order < 1:
        raise ValueError("order must be >= 1")
    return _cached_table(order, mc.rate, mc.vol, mc.maturity)


def phi(mc: MarketCondition, order: int) -> TruncatedTensor:
    """Expected signature of the augmented path over ``[0, maturity]`` given ``X0 = spot``."""
    table = build_f_table(mc, order)
    values = table.evaluate_all(mc.maturity)
    words = word_enumeration(table.order)
    powers = np.array([alpha(w) for w in words])
    return TruncatedTensor(values * mc.spot**powers, table.order)


def phi_rows(conditions: Sequence[MarketCondition], order: int) -> np.ndarray:
    return np.vstack([phi(mc, order).coeffs for mc in conditions])


def phi_csv_rows(mc: MarketCondition, order: int) -> list[tuple[str, int, float]]:
    t = phi(mc, order)
    return [(word_to_str(w), alpha(w), float(c)) for w, c in zip(word_enumeration(order), t.coeffs)]
