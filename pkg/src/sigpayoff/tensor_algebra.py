"""Truncated tensor algebra over R^3.

Coefficients are stored densely in a flat array following the canonical
word order: by length first, lexicographic within a length.  At order 4
this is 1 + 3 + 9 + 27 + 81 = 121 entries.
"""

from __future__ import annotations

from collections import Counter
from functools import lru_cache
from math import factorial
from typing import Iterable, Sequence

import numpy as np

DIM = 3
DEFAULT_ORDER = 4

Word = tuple[int, ...]


def check_order(order) -> int:
    """Validate a truncation order and return it as an ``int``."""
    if isinstance(order, bool) or int(order) != order or order < 0:
        raise ValueError(f"order must be a non-negative integer, got {order!r}")
    return int(order)


def check_word(word: Iterable[int]) -> Word:
    w = tuple(int(x) for x in word)
    for letter in w:
        if letter < 1 or letter > DIM:
            raise ValueError(f"letters must lie in 1..{DIM}, got {w}")
    return w


def n_words(order: int) -> int:
    """Number of words of length <= ``order``: (3^(order+1) - 1) / 2."""
    return (DIM ** (order + 1) - 1) // (DIM - 1)


def level_slice(level: int) -> slice:
    start = n_words(level - 1) if level > 0 else 0
    return slice(start, start + DIM**level)


@lru_cache(maxsize=None)
def _enumeration(order: int) -> tuple[Word, ...]:
    words: list[Word] = [()]
    prev: list[Word] = [()]
    for _ in range(order):
        prev = [w + (a,) for w in prev for a in range(1, DIM + 1)]
        words.extend(prev)
    return tuple(words)


def word_enumeration(order: int) -> list[Word]:
    """All words of length <= ``order`` in canonical order.

    Examples
    --------
    >>> word_enumeration(1)
    [(), (1,), (2,), (3,)]
    """
    return list(_enumeration(check_order(order)))


def word_index(word: Sequence[int]) -> int:
    """Position of ``word`` in the canonical enumeration (any order >= len)."""
    w = check_word(word)
    idx = 0
    for letter in w:
        idx = idx * DIM + (letter - 1)
    return n_words(len(w) - 1) + idx if w else 0


def word_to_str(word: Sequence[int]) -> str:
    return "".join(str(a) for a in word)


def str_to_word(text: str) -> Word:
    text = text.strip()
    if not text.isdigit() and text != "":
        raise ValueError(f"invalid word string {text!r}")
    return check_word(int(c) for c in text)


# ---------------------------------------------------------------------------
# array kernels; leading axes are batch axes


def _product_arrays(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    lead = out.shape[:-1]
    for m in range(order + 1):
        acc = out[..., level_slice(m)]
        for j in range(m + 1):
            aj = a[..., level_slice(j)]
            bk = b[..., level_slice(m - j)]
            acc += (aj[..., :, None] * bk[..., None, :]).reshape(*lead, -1)
    return out


def _exp_arrays(delta: np.ndarray, order: int) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    lead = delta.shape[:-1]
    out = np.empty(lead + (n_words(order),))
    power = np.ones(lead + (1,))
    out[..., 0] = 1.0
    for k in range(1, order + 1):
        power = (power[..., :, None] * delta[..., None, :]).reshape(*lead, -1)
        out[..., level_slice(k)] = power / factorial(k)
    return out


def _mul_exp_coeff_major(s: np.ndarray, delta: np.ndarray, order: int) -> np.ndarray:
    """``s ⊗ exp(delta)`` with the coefficient axis first and batch axes trailing.

    ``s`` has shape ``(n_words, *batch)`` and ``delta`` shape ``(d, *batch)``.
    Each level is evaluated by Horner's scheme in the increment.
    """
    batch = s.shape[1:]
    out = np.empty_like(s)
    out[0] = s[0]
    for m in range(1, order + 1):
        acc = (s[0:1] / m)[:, None] * delta[None]
        acc = acc.reshape((-1,) + batch)
        for j in range(1, m):
            acc = acc + s[level_slice(j)]
            acc = (acc[:, None] * (delta / (m - j))[None]).reshape((-1,) + batch)
        out[level_slice(m)] = acc + s[level_slice(m)]
    return out


class TruncatedTensor:
    """Element of the truncated tensor algebra T^order(R^3).

    Parameters
    ----------
    coeffs : array_like
        Coefficients in canonical word order; length must be ``n_words(order)``.
    order : int
        Truncation order.
    """

    __slots__ = ("order", "coeffs")

    def __init__(self, coeffs, order: int):
        order = check_order(order)
        arr = np.array(coeffs, dtype=float)
        if arr.shape != (n_words(order),):
            raise ValueError(
                f"expected {n_words(order)} coefficients for order {order}, got shape {arr.shape}"
            )
        arr.setflags(write=False)
        self.order = order
        self.coeffs = arr

    @classmethod
    def zero(cls, order: int) -> "TruncatedTensor":
        return cls(np.zeros(n_words(order)), order)

    @classmethod
    def identity(cls, order: int) -> "TruncatedTensor":
        c = np.zeros(n_words(order))
        c[0] = 1.0
        return cls(c, order)

    @classmethod
    def from_dict(cls, mapping: dict, order: int) -> "TruncatedTensor":
        c = np.zeros(n_words(order))
        for w, v in mapping.items():
            w = str_to_word(w) if isinstance(w, str) else check_word(w)
            if len(w) > order:
                raise ValueError(f"word {w} longer than order {order}")
            c[word_index(w)] = v
        return cls(c, order)

    def __getitem__(self, word) -> float:
        return project(self, word)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        _check_same_order(self, other)
        return TruncatedTensor(self.coeffs - other.coeffs, self.order)

    def __neg__(self):
        return TruncatedTensor(-self.coeffs, self.order)

    def __mul__(self, scalar):
        if isinstance(scalar, TruncatedTensor):
            return NotImplemented
        return TruncatedTensor(self.coeffs * float(scalar), self.order)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return tensor_product(self, other)

    def __eq__(self, other):
        if not isinstance(other, TruncatedTensor):
            return NotImplemented
        return self.order == other.order and np.array_equal(self.coeffs, other.coeffs)

    __hash__ = None

    def __repr__(self):
        return f"TruncatedTensor(order={self.order}, coeffs={self.coeffs!r})"

    def allclose(self, other: "TruncatedTensor", atol: float = 1e-12, rtol: float = 0.0) -> bool:
        _check_same_order(self, other)
        return bool(np.allclose(self.coeffs, other.coeffs, atol=atol, rtol=rtol))

    def to_dict(self) -> dict[str, float]:
        return {word_to_str(w): float(c) for w, c in zip(_enumeration(self.order), self.coeffs)}


class LinearFunctional:
    """Dual vector over the canonical word basis; encodes a signature payoff."""

    __slots__ = ("order", "weights")

    def __init__(self, weights, order: int):
        order = check_order(order)
        arr = np.array(weights, dtype=float)
        if arr.shape != (n_words(order),):
            raise ValueError(
                f"expected {n_words(order)} weights for order {order}, got shape {arr.shape}"
            )
        arr.setflags(write=False)
        self.order = order
        self.weights = arr

    @classmethod
    def zero(cls, order: int) -> "LinearFunctional":
        return cls(np.zeros(n_words(order)), order)

    @classmethod
    def from_dict(cls, mapping: dict, order: int) -> "LinearFunctional":
        return cls(TruncatedTensor.from_dict(mapping, order).coeffs, order)

    def to_dict(self) -> dict[str, float]:
        return {word_to_str(w): float(v) for w, v in zip(_enumeration(self.order), self.weights)}

    def extend(self, order: int) -> "LinearFunctional":
        """Zero-pad to a higher truncation order."""
        if order < self.order:
            raise ValueError("cannot extend to a lower order")
        w = np.zeros(n_words(order))
        w[: self.weights.size] = self.weights
        return LinearFunctional(w, order)

    def __call__(self, t: TruncatedTensor) -> float:
        return apply_functional(self, t)

    def __add__(self, other: "LinearFunctional") -> "LinearFunctional":
        if self.order != other.order:
            raise ValueError(f"order mismatch: {self.order} vs {other.order}")
        return LinearFunctional(self.weights + other.weights, self.order)

    def __mul__(self, scalar):
        return LinearFunctional(self.weights * float(scalar), self.order)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, LinearFunctional):
            return NotImplemented
        return self.order == other.order and np.array_equal(self.weights, other.weights)

    __hash__ = None

    def __repr__(self):
        nz = {k: v for k, v in self.to_dict().items() if v != 0.0}
        return f"LinearFunctional(order={self.order}, nonzero={nz})"


def _check_same_order(a, b):
    if a.order != b.order:
        raise ValueError(f"order mismatch: {a.order} vs {b.order}")


def add(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    _check_same_order(a, b)
    return TruncatedTensor(a.coeffs + b.coeffs, a.order)


def tensor_product(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    """Truncated tensor product; words longer than the order are dropped."""
    _check_same_order(a, b)
    return TruncatedTensor(_product_arrays(a.coeffs, b.coeffs, a.order), a.order)


def exp_level1(increment, order: int) -> TruncatedTensor:
    """Tensor exponential of a level-1 element.

    This is the signature of a straight segment with the given increment.
    """
    order = check_order(order)
    inc = np.asarray(increment, dtype=float)
    if inc.shape != (DIM,):
        raise ValueError(f"increment must have shape ({DIM},), got {inc.shape}")
    return TruncatedTensor(_exp_arrays(inc, order), order)


def project(t: TruncatedTensor, word: Sequence[int]) -> float:
    w = check_word(word)
    if len(w) > t.order:
        raise ValueError(f"word {w} is longer than tensor order {t.order}")
    return float(t.coeffs[word_index(w)])


def apply_functional(functional: LinearFunctional, t: TruncatedTensor) -> float:
    _check_same_order(functional, t)
    return float(functional.weights @ t.coeffs)


def shuffle_product(u: Sequence[int], v: Sequence[int], max_order: int = DEFAULT_ORDER) -> Counter:
    """Shuffle product of two words as a multiset of words.

    Examples
    --------
    >>> sorted(shuffle_product((1,), (1,)).items())
    [((1, 1), 2)]
    """
    u, v = check_word(u), check_word(v)
    if len(u) + len(v) > max_order:
        raise ValueError(f"combined length {len(u) + len(v)} exceeds order cap {max_order}")
    return Counter(_shuffles(u, v))


@lru_cache(maxsize=4096)
def _shuffles(u: Word, v: Word) -> tuple[Word, ...]:
    if not u:
        return (v,)
    if not v:
        return (u,)
    left = tuple(w + (u[-1],) for w in _shuffles(u[:-1], v))
    right = tuple(w + (v[-1],) for w in _shuffles(u, v[:-1]))
    return left + right
