"""
Generating function, the quadratic weight ``w`` and the three orthogonality
densities (q-Hermite, big q-Hermite, Al-Salam--Chihara).

The ``density_*`` functions are vectorized over ``x`` and return plain
floats/arrays; ``f_n``, ``f_bn`` and ``f_cn`` wrap them for single points.
Outside ``S(q)`` every density is 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .families import in_support, support
from .qcore import (
    DEFAULT_TRUNCATION,
    DomainError,
    PoleError,
    Truncation,
    infinite_product,
    q_pochhammer_inf,
    qvalue,
)

__all__ = [
    "DensityPoint",
    "phi",
    "phi_product",
    "w_kernel",
    "w_product",
    "density_n",
    "density_bn",
    "density_cn",
    "f_n",
    "f_bn",
    "f_cn",
    "f_n_q0",
    "f_cn_q0",
    "f_cn_q1",
]

SQRT_2PI = math.sqrt(2 * math.pi)


@dataclass(frozen=True)
class DensityPoint:
    x: float
    value: float
    in_support: bool

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("density values are nonnegative")
        if not self.in_support and self.value != 0:
            raise ValueError("density must vanish outside the support")


def _q(q) -> float:
    return float(qvalue(q))


def _arr(x):
    return np.asarray(x, dtype=float)


def _out(v, like):
    return float(v) if np.ndim(like) == 0 else v


def phi_product(x, t, q, trunc: Truncation = DEFAULT_TRUNCATION):
    """``(1/phi, relative residual)`` with ``1/phi = prod_k (1 - (1-q)xt q^k + (1-q)t^2 q^2k)``."""
    q = _q(q)
    x = _arr(x)
    c = 1 - q
    env = c * (np.abs(x * t) + t * t)

    def factor(k):
        qk = q**k
        return 1 - c * x * t * qk + c * t * t * qk * qk

    prod, resid = infinite_product(factor, env, q, trunc)
    prod = np.broadcast_to(prod, x.shape) if np.ndim(prod) == 0 else prod
    return prod, resid


def phi(x, t, q, trunc: Truncation = DEFAULT_TRUNCATION):
    """Generating function ``sum_n t^n/[n]_q! H_n(x|q)`` in product form.

    Closed forms at ``q = 1`` (``exp(xt - t^2/2)``) and ``q = 0``
    (``1/(1 - xt + t^2)``).
    """
    q = _q(q)
    xa = _arr(x)
    if q == 1:
        return _out(np.exp(xa * t - t * t / 2), x)
    if not abs(t * math.sqrt(1 - q)) < 1:
        raise DomainError("phi needs |t sqrt(1-q)| < 1")
    if q == 0:
        den = 1 - xa * t + t * t
    else:
        den, _ = phi_product(xa, t, q, trunc)
    if np.any(den == 0):
        raise PoleError("a factor of the phi product vanishes")
    return _out(1.0 / den, x)


def w_kernel(x, y, rho, q):
    """``(1-rho^2)^2 - (1-q) rho (1+rho^2) x y + (1-q) rho^2 (x^2 + y^2)``."""
    q = qvalue(q)
    return (1 - rho**2) ** 2 - (1 - q) * rho * (1 + rho**2) * x * y + (1 - q) * rho**2 * (x * x + y * y)


def w_product(x, y, rho, q, trunc: Truncation = DEFAULT_TRUNCATION):
    """``(prod_k w(x, y, rho q^k | q), relative residual)`` for ``|q| < 1``."""
    q = _q(q)
    x, y = _arr(x), _arr(y)
    if rho == 0:
        return np.ones(np.broadcast(x, y).shape), 0.0
    c = 1 - q
    r = abs(rho)
    env = r * (2 * r + r**3 + c * (1 + rho * rho) * np.abs(x * y) + c * r * (x * x + y * y))
    prod, resid = infinite_product(lambda k: w_kernel(x, y, rho * q**k, q), env, q, trunc)
    return np.broadcast_to(prod, np.broadcast(x, y).shape), resid


def density_n(x, q, trunc: Truncation = DEFAULT_TRUNCATION):
    """q-Hermite orthogonality density ``f_N(x|q)``.

    The ``1/sqrt(4-(1-q)x^2)`` prefactor and the ``k = 0`` product factor
    ``4 - (1-q)x^2`` are merged into ``sqrt(4-(1-q)x^2)`` so the support
    endpoints evaluate to 0.
    """
    q = _q(q)
    xa = _arr(x)
    if q == 1:
        return _out(np.exp(-xa * xa / 2) / SQRT_2PI, x)
    inside = in_support(xa, q)
    c = 1 - q
    # 4 - (1-q)x^2 written as 4(1-u)(1+u), u = |x|/half-width, so x = +-half-width gives exactly 0
    u = np.abs(xa) / support(q).upper
    edge = 2 * np.sqrt(np.clip((1 - u) * (1 + u), 0.0, None))
    if q == 0:
        val = edge / (2 * math.pi)
    else:
        qinf = q_pochhammer_inf(q, q, trunc)
        env = 3 + c * xa * xa
        prod, _ = infinite_product(lambda k: (1 + q**k) ** 2 - c * xa * xa * q**k, env, q, trunc, start=1)
        val = math.sqrt(c) * qinf * edge * prod / (2 * math.pi)
    val = np.where(inside, np.clip(val, 0.0, None), 0.0)
    return _out(val, x)


def density_bn(x, a, q, trunc: Truncation = DEFAULT_TRUNCATION):
    """Big q-Hermite density ``f_N(x|q) phi(x|a,q)``; needs ``|a sqrt(1-q)| < 1``."""
    q = _q(q)
    if not abs(a * math.sqrt(1 - q)) < 1:
        raise DomainError("f_bN needs |a sqrt(1-q)| < 1")
    xa = _arr(x)
    base = density_n(xa, q, trunc)
    if q != 1:
        xa = np.clip(xa, *(support(q).lower, support(q).upper))
    return _out(base * phi(xa, a, q, trunc), x)


def density_cn(x, y, rho, q, trunc: Truncation = DEFAULT_TRUNCATION):
    """Al-Salam--Chihara density ``f_CN(x|y,rho,q)``."""
    q = _q(q)
    if not abs(rho) < 1:
        raise DomainError("f_CN needs |rho| < 1")
    xa = _arr(x)
    if q == 1:
        return _out(f_cn_q1(xa, y, rho), x)
    if not np.all(in_support(y, q)):
        raise DomainError("f_CN needs y in S(q)")
    base = density_n(xa, q, trunc)
    xs = np.clip(xa, support(q).lower, support(q).upper)
    wp, _ = w_product(xs, y, rho, q, trunc)
    val = base * q_pochhammer_inf(rho * rho, q, trunc) / wp
    return _out(val, x)


def f_n_q0(x):
    """Wigner semicircle ``sqrt(4 - x^2)/(2 pi)`` on ``[-2, 2]``."""
    xa = _arr(x)
    return _out(np.where(np.abs(xa) <= 2, np.sqrt(np.clip(4 - xa * xa, 0, None)) / (2 * math.pi), 0.0), x)


def f_cn_q0(x, y, rho):
    """Kesten--McKay form ``(1-rho^2) sqrt(4-x^2) / (2 pi w(x,y,rho|0))``."""
    xa = _arr(x)
    val = (1 - rho**2) * np.sqrt(np.clip(4 - xa * xa, 0, None)) / (2 * math.pi * w_kernel(xa, y, rho, 0.0))
    return _out(np.where(np.abs(xa) <= 2, val, 0.0), x)


def f_cn_q1(x, y, rho):
    """Conditional Gaussian density with mean ``rho y`` and variance ``1 - rho^2``."""
    v = 1 - rho**2
    xa = _arr(x)
    return _out(np.exp(-((xa - rho * y) ** 2) / (2 * v)) / math.sqrt(2 * math.pi * v), x)


def _point(x, value, q) -> DensityPoint:
    inside = bool(in_support(float(x), q))
    return DensityPoint(float(x), float(value) if inside else 0.0, inside)


def f_n(x: float, q, trunc: Truncation = DEFAULT_TRUNCATION) -> DensityPoint:
    return _point(x, density_n(float(x), q, trunc), q)


def f_bn(x: float, a, q, trunc: Truncation = DEFAULT_TRUNCATION) -> DensityPoint:
    return _point(x, density_bn(float(x), a, q, trunc), q)


def f_cn(x: float, y, rho, q, trunc: Truncation = DEFAULT_TRUNCATION) -> DensityPoint:
    return _point(x, density_cn(float(x), y, rho, q, trunc), q)
