"""
q-arithmetic primitives: q-brackets, q-factorials, Gaussian binomials and
q-Pochhammer symbols.

Every finite operation is written against plain Python arithmetic so that it
accepts floats, numpy arrays (where meaningful) and ``fractions.Fraction``
alike.  Fed rational inputs the finite routines are exact.  The ``*_exact``
companions compute the same quantities by different routes (direct power
sums, the Pascal-type recurrence) and serve as brute-force oracles.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

__all__ = [
    "DomainError",
    "ConvergenceError",
    "RecurrenceOverflow",
    "PoleError",
    "Regime",
    "QParam",
    "Truncation",
    "DEFAULT_TRUNCATION",
    "qvalue",
    "q_bracket",
    "q_factorial",
    "q_binomial",
    "q_pochhammer",
    "q_pochhammer_inf",
    "q_pochhammer_inf_multi",
    "infinite_product",
    "q_bracket_exact",
    "q_factorial_exact",
    "q_binomial_exact",
    "q_pochhammer_exact",
]

# q closer than this to 1 (but not equal) is refused by the product routines
NEAR_ONE = 1e-9
# hard ceiling on the number of factors any infinite product may use
PRODUCT_CAP = 200_000


class DomainError(ValueError):
    """A parameter lies outside the domain where an operation is defined."""


class ConvergenceError(ArithmeticError):
    """A series or product did not reach its tolerance within the term cap."""


class RecurrenceOverflow(OverflowError):
    """A polynomial recurrence produced a value of magnitude above 1e300."""


class PoleError(ZeroDivisionError):
    """A factor of a denominator product vanished."""


class Regime(enum.Enum):
    GENERIC = "generic"
    ZERO = "zero"
    ONE = "one"


@dataclass(frozen=True)
class QParam:
    """Validated deformation parameter, ``-1 < q <= 1``."""

    q: float | Fraction

    def __post_init__(self):
        q = self.q
        if isinstance(q, QParam):
            object.__setattr__(self, "q", q.q)
            q = q.q
        if not isinstance(q, Fraction):
            q = float(q)
            if math.isnan(q):
                raise DomainError("q is NaN")
            object.__setattr__(self, "q", q)
        if not (-1 < q <= 1):
            raise DomainError(f"q must satisfy -1 < q <= 1, got {q}")

    @property
    def regime(self) -> Regime:
        if self.q == 0:
            return Regime.ZERO
        if self.q == 1:
            return Regime.ONE
        return Regime.GENERIC

    def __float__(self) -> float:
        return float(self.q)


def qvalue(q) -> float | Fraction:
    """Return the validated raw value of ``q`` (a ``QParam`` or a number)."""
    if isinstance(q, QParam):
        return q.q
    return QParam(q).q


@dataclass(frozen=True)
class Truncation:
    """Truncation policy for infinite series and products.

    ``achieved_residual`` is filled in on the copy returned alongside a
    result; on the policy object passed in it stays at 0.
    """

    max_terms: int = 400
    tail_tol: float = 1e-15
    achieved_residual: float = 0.0

    def __post_init__(self):
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise DomainError("max_terms must be a positive integer")
        if not self.tail_tol > 0:
            raise DomainError("tail_tol must be positive")
        if self.achieved_residual < 0:
            raise DomainError("achieved_residual must be nonnegative")

    def with_residual(self, residual: float) -> "Truncation":
        return replace(self, achieved_residual=float(residual))


DEFAULT_TRUNCATION = Truncation()


def q_bracket(n: int, q):
    """``[n]_q = 1 + q + ... + q^(n-1)``; ``[0]_q = 0``."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    q = qvalue(q)
    if n == 0:
        return q * 0
    if q == 1:
        return q * n
    return (1 - q**n) / (1 - q)


def q_factorial(n: int, q):
    """``[n]_q! = [1]_q [2]_q ... [n]_q`` with ``[0]_q! = 1``."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    q = qvalue(q)
    out = q * 0 + 1
    for i in range(1, n + 1):
        out *= q_bracket(i, q)
    return out


def q_binomial(n: int, k: int, q):
    """Gaussian binomial coefficient; zero unless ``n >= k >= 0``."""
    q = qvalue(q)
    if not (n >= k >= 0):
        return q * 0
    k = min(k, n - k)
    out = q * 0 + 1
    for i in range(k):
        out = out * q_bracket(n - i, q) / q_bracket(i + 1, q)
    return out


def q_pochhammer(a, q, n: int):
    """Finite q-Pochhammer symbol ``(a; q)_n``."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    q = qvalue(q)
    out = a * 0 + 1
    qk = q * 0 + 1
    for _ in range(n):
        out = out * (1 - a * qk)
        qk = qk * q
    return out


def _check_product_q(q) -> float:
    q = float(qvalue(q))
    if q == 1:
        raise DomainError("infinite products diverge at q = 1; use the closed forms")
    if 1 - q < NEAR_ONE:
        raise DomainError(f"q = {q!r} is within {NEAR_ONE} of 1")
    return q


def infinite_product(
    factor: Callable[[int], object],
    envelope,
    q,
    trunc: Truncation = DEFAULT_TRUNCATION,
    start: int = 0,
):
    """Evaluate ``prod_{k >= start} factor(k)`` with a certified tail bound.

    ``envelope`` must satisfy ``|factor(k) - 1| <= envelope * |q|^k`` for all
    ``k >= start``.  Once ``c = envelope |q|^K <= 1/2`` the remaining tail
    obeys ``|log prod_{k >= K}| <= 2 c / (1 - |q|)``; multiplication stops
    when that bound, turned into a relative error, falls below ``tail_tol``.
    Works elementwise on numpy arrays (the stopping rule uses the largest
    envelope).

    Returns ``(value, relative_residual_bound)``.
    """
    q = _check_product_q(q)
    r = abs(q)
    env = float(np.max(np.abs(envelope))) if np.ndim(envelope) else abs(float(envelope))
    out = None
    k = start
    while True:
        c = env * r**k
        if c <= 0.5:
            log_tail = 2.0 * c / (1.0 - r)
            resid = math.expm1(log_tail)
            if resid <= trunc.tail_tol:
                break
        if k - start >= PRODUCT_CAP:
            raise ConvergenceError(f"infinite product did not converge in {PRODUCT_CAP} factors")
        f = factor(k)
        out = f if out is None else out * f
        k += 1
    if out is None:
        out = factor(start) * 0 + 1 if np.ndim(envelope) else 1.0
    return out, resid


def q_pochhammer_inf(a, q, trunc: Truncation = DEFAULT_TRUNCATION, return_residual: bool = False):
    """Infinite q-Pochhammer symbol ``(a; q)_inf`` for ``|q| < 1``.

    With ``return_residual=True`` returns ``(value, trunc')`` where
    ``trunc'.achieved_residual`` is the certified relative error bound.
    """
    q = _check_product_q(q)
    a = float(a)
    if a == 0:
        value, resid = 1.0, 0.0
    else:
        value, resid = infinite_product(lambda k: 1.0 - a * q**k, abs(a), q, trunc)
        value = float(value)
    if return_residual:
        return value, trunc.with_residual(resid)
    return value


def q_pochhammer_inf_multi(args: Iterable[float], q, trunc: Truncation = DEFAULT_TRUNCATION,
                           return_residual: bool = False):
    """``(a_1, ..., a_k; q)_inf`` as the product of the single symbols."""
    value, total = 1.0, 0.0
    for a in args:
        v, t = q_pochhammer_inf(a, q, trunc, return_residual=True)
        value *= v
        total = (1 + total) * (1 + t.achieved_residual) - 1
    if return_residual:
        return value, trunc.with_residual(total)
    return value


# -- exact-rational oracles -------------------------------------------------

def _frac(q) -> Fraction:
    q = qvalue(q)
    if isinstance(q, Fraction):
        return q
    return Fraction(q)


def q_bracket_exact(n: int, q) -> Fraction:
    q = _frac(q)
    return sum((q**i for i in range(n)), Fraction(0))


def q_factorial_exact(n: int, q) -> Fraction:
    q = _frac(q)
    out = Fraction(1)
    for i in range(1, n + 1):
        out *= q_bracket_exact(i, q)
    return out


def q_binomial_exact(n: int, k: int, q) -> Fraction:
    """Gaussian binomial by the recurrence ``[n,k] = [n-1,k-1] + q^k [n-1,k]``."""
    return _q_binomial_pascal(n, k, _frac(q))


@lru_cache(maxsize=4096)
def _q_binomial_pascal(n: int, k: int, q: Fraction) -> Fraction:
    if not (n >= k >= 0):
        return Fraction(0)
    if k == 0 or k == n:
        return Fraction(1)
    return _q_binomial_pascal(n - 1, k - 1, q) + q**k * _q_binomial_pascal(n - 1, k, q)


def q_pochhammer_exact(a, q, n: int) -> Fraction:
    a, q = Fraction(a), _frac(q)
    out = Fraction(1)
    for i in range(n):
        out *= 1 - a * q**i
    return out
