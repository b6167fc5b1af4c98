"""
Polynomial families evaluated by their three-term recurrences.

All evaluators accept a scalar ``x`` (float or ``Fraction``) or a numpy
array and work elementwise.  With rational inputs the result is exact.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .qcore import DomainError, RecurrenceOverflow, q_binomial, q_bracket, qvalue

__all__ = [
    "Family",
    "PolySpec",
    "Support",
    "MAX_DEGREE",
    "support",
    "in_support",
    "q_hermite",
    "continuous_q_hermite",
    "chebyshev_u",
    "hermite_prob",
    "big_q_hermite",
    "aux_b",
    "aux_b_shifted",
    "asc",
    "asc_recurrence",
    "asc_via_hermite",
    "asc_standard",
    "big_q_hermite_q0",
    "big_q_hermite_q1",
    "asc_q0",
    "asc_q1",
    "evaluate",
]

MAX_DEGREE = 200
OVERFLOW_LIMIT = 1e300


class Family(enum.Enum):
    QHermiteH = "qhermite"
    ContinuousQHermiteh = "continuous-qhermite"
    BigQHermiteH = "big-qhermite"
    ASC_P = "asc"
    ASC_p = "asc-standard"
    AuxB = "aux-b"
    AuxBShifted = "aux-b-shifted"
    ChebyshevU = "chebyshev-u"
    HermiteProb = "hermite"


@dataclass(frozen=True)
class PolySpec:
    """A polynomial family together with its parameters.

    Parameters a family does not use are ignored.  For ``ASC_p`` the
    complex-conjugate pair of the classical parametrization is carried by its
    sum ``s`` and product ``p``.
    """

    family: Family
    q: float = 0.0
    a: float = 0.0
    b: float = 0.0
    y: float = 0.0
    rho: float = 0.0
    s: float = 0.0
    p: float = 0.0

    def __call__(self, n: int, x):
        return evaluate(self, n, x)


@dataclass(frozen=True)
class Support:
    lower: float
    upper: float

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.upper)

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def __contains__(self, x) -> bool:
        return self.lower <= x <= self.upper


def support(q) -> Support:
    """``S(q) = [-2/sqrt(1-q), 2/sqrt(1-q)]``; the whole line at ``q = 1``."""
    q = float(qvalue(q))
    if q == 1:
        return Support(-math.inf, math.inf)
    c = 2.0 / math.sqrt(1.0 - q)
    return Support(-c, c)


def in_support(x, q, slack: float = 1e-12):
    """Elementwise membership test in ``S(q)`` with a small relative slack."""
    s = support(q)
    if not s.bounded:
        return np.ones_like(np.asarray(x, dtype=float), dtype=bool) if np.ndim(x) else True
    return np.abs(x) <= s.upper * (1 + slack)


def _check_degree(n: int, max_degree: int, low: int = 0) -> None:
    if int(n) != n or n < low:
        raise DomainError(f"degree must be an integer >= {low}, got {n}")
    if n > max_degree:
        raise DomainError(f"degree {n} exceeds the cap {max_degree}")


def _guard(v):
    if np.ndim(v):
        big = np.max(np.abs(v)) if np.size(v) else 0.0
    else:
        big = abs(v)
    if big > OVERFLOW_LIMIT:
        raise RecurrenceOverflow("recurrence value exceeded 1e300 in magnitude")


def _run(n: int, x, step):
    """Roll ``P_{k+1} = step(k, P_k, P_{k-1})`` from ``P_{-1}=0, P_0=1``."""
    prev = x * 0
    cur = x * 0 + 1
    for k in range(n):
        prev, cur = cur, step(k, cur, prev)
        _guard(cur)
    return cur


def q_hermite(n: int, x, q, max_degree: int = MAX_DEGREE):
    """Monic q-Hermite ``H_n(x|q)``: ``H_{n+1} = x H_n - [n]_q H_{n-1}``."""
    _check_degree(n, max_degree)
    q = qvalue(q)
    return _run(n, x, lambda k, c, p: x * c - q_bracket(k, q) * p)


def continuous_q_hermite(n: int, x, q, max_degree: int = MAX_DEGREE):
    """Continuous q-Hermite ``h_n(x|q)``: ``h_{n+1} = 2x h_n - (1-q^n) h_{n-1}``."""
    _check_degree(n, max_degree)
    q = qvalue(q)
    if q == 1:
        raise DomainError("h_n(x|q) is defined for |q| < 1; use q_hermite at q = 1")
    return _run(n, x, lambda k, c, p: 2 * x * c - (1 - q**k) * p)


def chebyshev_u(n: int, x, max_degree: int = MAX_DEGREE):
    """Chebyshev polynomial of the second kind; ``U_{-1} = 0``."""
    _check_degree(n, max_degree, low=-1)
    if n == -1:
        return x * 0
    return _run(n, x, lambda k, c, p: 2 * x * c - p)


def hermite_prob(n: int, x, max_degree: int = MAX_DEGREE):
    """Probabilists' Hermite polynomial: ``H_{n+1} = x H_n - n H_{n-1}``."""
    _check_degree(n, max_degree)
    return _run(n, x, lambda k, c, p: x * c - k * p)


def big_q_hermite(n: int, x, a, q, max_degree: int = MAX_DEGREE):
    """Big q-Hermite ``H_n(x|a,q)``: ``x H_n = H_{n+1} + a q^n H_n + [n]_q H_{n-1}``."""
    _check_degree(n, max_degree)
    q = qvalue(q)
    return _run(n, x, lambda k, c, p: (x - a * q**k) * c - q_bracket(k, q) * p)


def aux_b(n: int, x, q, max_degree: int = MAX_DEGREE):
    """Auxiliary ``B_n(x|q)``: ``B_{n+1} = -q^n x B_n + q^(n-1) [n]_q B_{n-1}``."""
    _check_degree(n, max_degree)
    q = qvalue(q)

    def step(k, c, p):
        # [0]_q = 0 kills the q^-1 factor at k = 0
        tail = 0 if k == 0 else q ** (k - 1) * q_bracket(k, q) * p
        return -(q**k) * x * c + tail

    return _run(n, x, step)


def aux_b_shifted(m: int, x, b, q, max_degree: int = MAX_DEGREE):
    """``B_m(x|b,q) = sum_j [m j]_q b^(m-j) B_j(x|q)``."""
    _check_degree(m, max_degree)
    q = qvalue(q)
    out = x * 0
    for j in range(m + 1):
        out = out + q_binomial(m, j, q) * b ** (m - j) * aux_b(j, x, q, max_degree)
    return out


def asc_recurrence(n: int, x, y, rho, q, max_degree: int = MAX_DEGREE):
    """Al-Salam--Chihara ``P_n(x|y,rho,q)`` straight from its recurrence."""
    _check_degree(n, max_degree)
    q = qvalue(q)

    def step(k, c, p):
        tail = 0 if k == 0 else q_bracket(k, q) * (1 - rho**2 * q ** (k - 1)) * p
        return (x - rho * y * q**k) * c - tail

    return _run(n, x, step)


def asc_via_hermite(n: int, x, y, rho, q, max_degree: int = MAX_DEGREE):
    """``P_n(x|y,rho,q) = sum_i [n i]_q rho^(n-i) B_(n-i)(y|q) H_i(x|q)``.

    Valid for every ``rho``; this is the extension used when ``|rho| >= 1``.
    """
    _check_degree(n, max_degree)
    q = qvalue(q)
    out = x * 0
    for i in range(n + 1):
        coef = q_binomial(n, i, q) * rho ** (n - i) * aux_b(n - i, y, q, max_degree)
        out = out + coef * q_hermite(i, x, q, max_degree)
    _guard(out)
    return out


def asc(n: int, x, y, rho, q, max_degree: int = MAX_DEGREE):
    """Al-Salam--Chihara polynomial ``P_n(x|y,rho,q)``.

    Uses the recurrence for ``|rho| < 1`` and the q-Hermite expansion
    otherwise, where the family is no longer orthogonal.
    """
    if abs(rho) < 1:
        return asc_recurrence(n, x, y, rho, q, max_degree)
    return asc_via_hermite(n, x, y, rho, q, max_degree)


def asc_standard(n: int, x, s, p, q, max_degree: int = MAX_DEGREE):
    """Classical ASC ``p_n(x|a,b,q)`` with ``s = a+b`` and ``p = ab``.

    ``p_{n+1} = (2x - s q^n) p_n - (1-q^n)(1 - p q^(n-1)) p_{n-1}``.
    """
    _check_degree(n, max_degree)
    q = qvalue(q)
    if q == 1:
        raise DomainError("p_n(x|a,b,q) is defined for |q| < 1")

    def step(k, c, prev):
        tail = 0 if k == 0 else (1 - q**k) * (1 - p * q ** (k - 1)) * prev
        return (2 * x - s * q**k) * c - tail

    return _run(n, x, step)


# -- closed special cases at q = 0 and q = 1 --------------------------------

def big_q_hermite_q0(n: int, x, a):
    return chebyshev_u(n, x / 2) - a * chebyshev_u(n - 1, x / 2)


def big_q_hermite_q1(n: int, x, a):
    return hermite_prob(n, x - a)


def asc_q0(n: int, x, y, rho):
    if n == 0:
        return x * 0 + 1
    u2 = chebyshev_u(n - 2, x / 2) if n >= 2 else x * 0
    return chebyshev_u(n, x / 2) - rho * y * chebyshev_u(n - 1, x / 2) + rho**2 * u2


def asc_q1(n: int, x, y, rho):
    scale = math.sqrt(1 - rho**2)
    return hermite_prob(n, (x - rho * y) / scale) * scale**n


def evaluate(spec: PolySpec, n: int, x, max_degree: int = MAX_DEGREE):
    """Evaluate the degree-``n`` member of ``spec`` at ``x``."""
    f, q = spec.family, spec.q
    if f is Family.QHermiteH:
        return q_hermite(n, x, q, max_degree)
    if f is Family.ContinuousQHermiteh:
        return continuous_q_hermite(n, x, q, max_degree)
    if f is Family.BigQHermiteH:
        return big_q_hermite(n, x, spec.a, q, max_degree)
    if f is Family.ASC_P:
        return asc(n, x, spec.y, spec.rho, q, max_degree)
    if f is Family.ASC_p:
        return asc_standard(n, x, spec.s, spec.p, q, max_degree)
    if f is Family.AuxB:
        return aux_b(n, x, q, max_degree)
    if f is Family.AuxBShifted:
        return aux_b_shifted(n, x, spec.b, q, max_degree)
    if f is Family.ChebyshevU:
        return chebyshev_u(n, x, max_degree)
    if f is Family.HermiteProb:
        return hermite_prob(n, x, max_degree)
    raise DomainError(f"unknown family {f!r}")
