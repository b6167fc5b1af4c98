"""
Connection-coefficient expansions between the families, and the sup-norm
and density-ratio bounds built on them.

Coefficients come from explicit formulas, never from linear solves, so with
rational parameters every expansion is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from . import families as fam
from .families import Family, PolySpec
from .qcore import (
    DEFAULT_TRUNCATION,
    DomainError,
    Truncation,
    q_binomial,
    q_pochhammer_inf,
    qvalue,
)

__all__ = [
    "ExpansionResult",
    "expand_bigH_in_qHermite",
    "expand_qHermite_in_bigH",
    "expand_asc_in_qHermite",
    "expand_qHermite_in_asc",
    "connect_bigH_via_asc",
    "connect_asc_via_bigH",
    "connect_asc_product",
    "r_poly",
    "bound_qhermite",
    "density_ratio_bounds",
]


@dataclass(frozen=True)
class ExpansionResult:
    """``source_n(x) = sum_i coefficients[i] * target_i(x)``.

    ``coefficients[i]`` multiplies the degree-``i`` member of ``target``.
    """

    coefficients: tuple
    target: PolySpec
    source_index: int
    source: PolySpec | None = None

    def __post_init__(self):
        if len(self.coefficients) != self.source_index + 1:
            raise ValueError("expansion must carry source_index + 1 coefficients")

    def reassemble(self, x):
        out = x * 0
        for i, c in enumerate(self.coefficients):
            out = out + c * fam.evaluate(self.target, i, x)
        return out

    def source_value(self, x):
        if self.source is None:
            raise ValueError("expansion has no recorded source family")
        return fam.evaluate(self.source, self.source_index, x)


def _qbin(n: int, i: int, q):
    return q_binomial(n, i, q)


def _build(n: int, coef: Callable[[int], object], target: PolySpec, source: PolySpec) -> ExpansionResult:
    if int(n) != n or n < 0:
        raise DomainError("n must be a nonnegative integer")
    return ExpansionResult(tuple(coef(i) for i in range(n + 1)), target, n, source)


def expand_bigH_in_qHermite(n: int, a, q) -> ExpansionResult:
    """``H_n(x|a,q) = sum_i [n i]_q q^C(i,2) (-a)^i H_{n-i}(x|q)``."""
    q = qvalue(q)

    def coef(j):
        i = n - j
        return _qbin(n, i, q) * q ** (i * (i - 1) // 2) * (-a) ** i

    return _build(n, coef, PolySpec(Family.QHermiteH, q=q), PolySpec(Family.BigQHermiteH, q=q, a=a))


def expand_qHermite_in_bigH(n: int, a, q) -> ExpansionResult:
    """``H_n(x|q) = sum_i [n i]_q a^i H_{n-i}(x|a,q)``."""
    q = qvalue(q)
    return _build(
        n,
        lambda j: _qbin(n, n - j, q) * a ** (n - j),
        PolySpec(Family.BigQHermiteH, q=q, a=a),
        PolySpec(Family.QHermiteH, q=q),
    )


def expand_asc_in_qHermite(n: int, y, rho, q) -> ExpansionResult:
    """``P_n(x|y,rho,q) = sum_i [n i]_q rho^(n-i) B_(n-i)(y|q) H_i(x|q)``."""
    q = qvalue(q)
    return _build(
        n,
        lambda i: _qbin(n, i, q) * rho ** (n - i) * fam.aux_b(n - i, y, q),
        PolySpec(Family.QHermiteH, q=q),
        PolySpec(Family.ASC_P, q=q, y=y, rho=rho),
    )


def expand_qHermite_in_asc(n: int, y, rho, q) -> ExpansionResult:
    """``H_n(x|q) = sum_i [n i]_q rho^(n-i) H_(n-i)(y|q) P_i(x|y,rho,q)``."""
    q = qvalue(q)
    return _build(
        n,
        lambda i: _qbin(n, i, q) * rho ** (n - i) * fam.q_hermite(n - i, y, q),
        PolySpec(Family.ASC_P, q=q, y=y, rho=rho),
        PolySpec(Family.QHermiteH, q=q),
    )


def connect_bigH_via_asc(n: int, y, a, b, q) -> ExpansionResult:
    """``H_n(x|a,q) = sum_j [n j]_q (a/b)^(n-j) H_(n-j)(y|b,q) P_j(x|y,a/b,q)``.

    ``coefficients[0] = (a/b)^n H_n(y|b,q)`` is the coefficient that drives
    the big q-Hermite kernel.
    """
    if b == 0:
        raise DomainError("b must be nonzero")
    q = qvalue(q)
    rho = a / b
    return _build(
        n,
        lambda j: _qbin(n, j, q) * rho ** (n - j) * fam.big_q_hermite(n - j, y, b, q),
        PolySpec(Family.ASC_P, q=q, y=y, rho=rho),
        PolySpec(Family.BigQHermiteH, q=q, a=a),
    )


def connect_asc_via_bigH(n: int, y, rho, a, q) -> ExpansionResult:
    """``P_n(x|y,rho,q) = sum_i [n i]_q rho^(n-i) B_(n-i)(y|a/rho,q) H_i(x|a,q)``."""
    q = qvalue(q)
    if rho == 0:
        if a != 0:
            raise DomainError("rho = 0 with a != 0: the shift a/rho is undefined")
        return expand_asc_in_qHermite(n, y, rho, q)
    shift = a / rho
    return _build(
        n,
        lambda i: _qbin(n, i, q) * rho ** (n - i) * fam.aux_b_shifted(n - i, y, shift, q),
        PolySpec(Family.BigQHermiteH, q=q, a=a),
        PolySpec(Family.ASC_P, q=q, y=y, rho=rho),
    )


def connect_asc_product(n: int, y, z, rho1, rho2, q) -> ExpansionResult:
    """``P_n(x|y,rho1 rho2,q) = sum_i [n i]_q rho1^(n-i) P_(n-i)(z|y,rho2,q) P_i(x|z,rho1,q)``."""
    q = qvalue(q)
    return _build(
        n,
        lambda i: _qbin(n, i, q) * rho1 ** (n - i) * fam.asc(n - i, z, y, rho2, q),
        PolySpec(Family.ASC_P, q=q, y=z, rho=rho1),
        PolySpec(Family.ASC_P, q=q, y=y, rho=rho1 * rho2),
    )


def r_poly(n: int, x, q):
    """Rogers--Szego type sum ``r_n(x|q) = sum_i [n i]_q x^i``."""
    q = qvalue(q)
    return sum(_qbin(n, i, q) * x**i for i in range(n + 1))


def bound_qhermite(n: int, a, q, trunc: Truncation = DEFAULT_TRUNCATION) -> float:
    """Upper bound on ``max_{x in S(q)} |H_n(x|a,q)|``.

    ``(-|a| sqrt(1-q); |q|)_inf (1-q)^(-n/2) r_n(1|q)``; the Pochhammer
    factor is dropped when ``a = 0``.  For ``q >= 0`` the base ``|q|`` is just
    ``q``.  For ``q < 0`` it has to be ``|q|``: the derivation bounds
    ``|[n i]_q q^C(i,2)|`` by ``[n i]_|q| |q|^C(i,2)``, and with base ``q`` the
    bound fails already at ``n = 1`` (``q = a = -1/2``).
    """
    q = float(qvalue(q))
    if q == 1:
        raise DomainError("the bound needs |q| < 1")
    base = (1 - q) ** (-n / 2) * r_poly(n, 1.0, q)
    if a == 0:
        return base
    return q_pochhammer_inf(-abs(a) * math.sqrt(1 - q), abs(q), trunc) * base


def density_ratio_bounds(rho, q, trunc: Truncation = DEFAULT_TRUNCATION) -> tuple[float, float]:
    """Bounds ``(rho^2)_inf/(-|rho|)_inf^4 <= f_CN/f_N <= (rho^2)_inf/(|rho|)_inf^4``.

    The two Pochhammer symbols in the denominators use base ``|q|``, which
    is ``q`` itself for ``q >= 0``.  Each factor obeys
    ``(1-|r|)^4 <= w(x, y, r|q) <= (1+|r|)^4`` on ``S(q)``, and for ``q < 0``
    the factors ``r = rho q^k`` only shrink like ``|q|^k``.
    """
    q = float(qvalue(q))
    if not abs(rho) < 1:
        raise DomainError("|rho| < 1 required")
    if q == 1:
        raise DomainError("the bounds need |q| < 1")
    num = q_pochhammer_inf(rho**2, q, trunc)
    lower = num / q_pochhammer_inf(-abs(rho), abs(q), trunc) ** 4
    upper = num / q_pochhammer_inf(abs(rho), abs(q), trunc) ** 4
    return lower, upper
