"""
Poisson--Mehler type kernels built of q-Hermite, big q-Hermite and
Al-Salam--Chihara polynomials.

Each kernel is available as a truncated series and, where one exists, as a
closed infinite-product form; ``method="both"`` evaluates the two and
records their discrepancy.  Everything is vectorized over the point
arguments (``x``, ``y``, ``z`` broadcast against each other); the remaining
parameters are scalars.

Series terms are generated with rolling recurrences normalized by
``sqrt([n]_q!)``, which keeps magnitudes bounded for ``q`` close to 1.
Truncation stops at the first index where either

* an a-priori bound on every later term (sup norms over ``S(q)`` in the
  spirit of the q-Hermite bound ``(1-q)^(-n/2) r_n(1|q)``) drops below
  ``tail_tol``, or
* the last ``QUIET_RUN`` computed terms are all below
  ``tail_tol * max(1, |partial sum|)``.

If neither happens within ``max_terms`` a ``ConvergenceError`` is raised.
The reported residual estimate is the truncation error plus the rounding
floor ``eps * sum |term_n|``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterator

import mpmath
import numpy as np

from .families import in_support
from .measures import density_cn, density_n, phi_product, w_product
from .qcore import (
    DEFAULT_TRUNCATION,
    ConvergenceError,
    DomainError,
    Truncation,
    q_bracket,
    q_pochhammer_inf,
    qvalue,
)

__all__ = [
    "Method",
    "KernelResult",
    "CorollaryCase",
    "poisson_mehler",
    "bigH_kernel",
    "bigH_kernel_reciprocal",
    "asc_kernel",
    "asc_kernel_fcn_ratio",
    "asc_kernel_general",
    "inversion_identity",
    "inversion_result",
    "phi_series",
    "asc_generating_function",
    "phi_reciprocal_series",
    "build_lancaster_density",
    "corollary_special",
]

QUIET_RUN = 6
EPS = float(np.finfo(float).eps)
COROLLARY_Q1_TERMS = 120
EXTENDED_TRIGGER = 1e-12
EXTENDED_DPS = 40


class Method(enum.Enum):
    SERIES = "series"
    CLOSED = "closed"
    BOTH = "both"

    @classmethod
    def coerce(cls, m) -> "Method":
        return m if isinstance(m, cls) else cls(str(m).lower())


@dataclass(frozen=True)
class KernelResult:
    """Kernel value with its provenance.

    For ``Method.BOTH`` the reported ``value`` is the closed form and
    ``discrepancy`` is ``max |series - closed|``.
    """

    value: float | np.ndarray
    method: Method
    terms_used: int
    residual_estimate: float
    discrepancy: float | None = None
    series: float | np.ndarray | None = None
    closed: float | np.ndarray | None = None

    def __post_init__(self):
        if (self.discrepancy is not None) != (self.method is Method.BOTH):
            raise ValueError("discrepancy is present exactly when method is BOTH")
        if self.terms_used < 0 or not self.residual_estimate >= 0:
            raise ValueError("terms_used and residual_estimate are nonnegative")


# -- helpers -----------------------------------------------------------------

def _q(q) -> float:
    q = float(qvalue(q))
    if q == 1:
        raise DomainError("kernel series and products need |q| < 1")
    return q


def _pts(*xs):
    arrs = np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in xs])
    return [np.array(a) for a in arrs]


def _scalar_out(v, like):
    return float(v) if all(np.ndim(a) == 0 for a in like) else v


def _require_support(q, **pts):
    for name, v in pts.items():
        if not np.all(in_support(np.asarray(v, dtype=float), q)):
            raise DomainError(f"{name} must lie in S(q)")


def _qpoch_seq(a, q, n):
    """``[(a; q)_0, ..., (a; q)_n]``."""
    out = np.empty(n + 1)
    out[0] = 1.0
    qk = 1.0
    for k in range(n):
        out[k + 1] = out[k] * (1 - a * qk)
        qk *= q
    return out


def _conv(u, v):
    return np.convolve(u, v)[: len(u)]


class _SupBounds:
    """Scaled sup norms over ``S(q)`` for the families entering the kernels.

    Every family ``F`` gets a sequence ``m_F`` with
    ``max_{S(q)} |F_n| <= (1-q)^(-n/2) (q;q)_n m_F(n)``.
    """

    def __init__(self, q: float, n: int):
        self.q, self.n = q, n
        self.qq = _qpoch_seq(q, q, n)
        inv = 1.0 / self.qq
        self.h = _conv(inv, inv)
        k = np.arange(n + 1)
        e = np.abs(q) ** (k * (k - 1) / 2) * inv
        self.b = _conv(e, e)
        self._k = k
        self._inv = inv

    def big_h(self, a):
        if a == 0:
            return self.h
        return q_pochhammer_inf(-abs(a) * math.sqrt(1 - self.q), self.q) * self.h

    def b_shifted(self, b):
        beta = (abs(b) * math.sqrt(1 - self.q)) ** self._k * self._inv
        return _conv(beta, self.b)

    def asc(self, rho):
        return _conv(abs(rho) ** self._k * self.b, self.h)

    def term_bound(self, lam, m1, m2, extra=None):
        """Bound on ``|lam^n / ([n]_q! extra_n) F_n G_n|``."""
        with np.errstate(over="ignore", invalid="ignore"):
            t = abs(lam) ** self._k * self.qq * m1 * m2
            if extra is not None:
                t = t / np.abs(extra)
        return np.nan_to_num(t, nan=np.inf)


def _rolling(x, shift: Callable[[int], object], beta: Callable[[int], float], q) -> Iterator:
    """Yield ``P_n / sqrt([n]_q!)`` for a monic ``P_{n+1} = (x - s_n) P_n - beta_n P_{n-1}``."""
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    n = 0
    while True:
        yield cur
        bn1 = q_bracket(n + 1, q)
        if n == 0:
            nxt = (x - shift(0)) * cur / math.sqrt(bn1)
        else:
            nxt = ((x - shift(n)) * cur - beta(n) * prev / math.sqrt(q_bracket(n, q))) / math.sqrt(bn1)
        prev, cur = cur, nxt
        n += 1


def _hermite_seq(x, q):
    return _rolling(x, lambda k: 0.0, lambda k: q_bracket(k, q), q)


def _big_hermite_seq(x, a, q):
    return _rolling(x, lambda k: a * q**k, lambda k: q_bracket(k, q), q)


def _asc_seq(x, y, rho, q):
    return _rolling(
        x,
        lambda k: rho * y * q**k,
        lambda k: q_bracket(k, q) * (1 - rho * rho * q ** (k - 1)),
        q,
    )


def _sum_series(terms: Iterator, bound, trunc: Truncation, ratio: float, magnitude: list | None = None):
    """Accumulate ``terms`` under the truncation policy described in the module doc.

    ``bound[n]`` bounds ``|term_n|`` uniformly (or is ``None``); ``ratio`` is
    the asymptotic term ratio used to extrapolate the observed tail.
    Returns ``(sum, terms_used, residual_estimate)``; the estimate adds the
    rounding floor ``eps * max sum |term_n|`` to the truncation error.  If
    ``magnitude`` is a list, the running ``sum |term_n|`` is appended to it.
    """
    total = None
    mag = 0.0
    quiet = 0
    theta = min(abs(ratio), 0.999)

    def done(n, tail):
        if magnitude is not None:
            magnitude.append(mag)
        return total, n, tail + EPS * float(np.max(mag))

    for n in range(trunc.max_terms):
        t = next(terms)
        total = t if total is None else total + t
        mag = mag + np.abs(t)
        if not np.all(np.isfinite(total)):
            raise ConvergenceError(f"series overflowed at term {n}")
        tail_b = math.inf
        if bound is not None and n + 1 < len(bound):
            rest = bound[n + 1 :]
            tail_b = float(rest.sum())
            if len(rest) > 1 and rest[-2] > 0:
                r = rest[-1] / rest[-2]
                if r < 1:
                    tail_b += rest[-1] * r / (1 - r)
                else:
                    tail_b = math.inf
            if bound[n + 1] < trunc.tail_tol:
                return done(n + 1, min(tail_b, _observed_tail(t, theta)))
        scale = np.maximum(1.0, np.abs(total))
        if np.all(np.abs(t) <= trunc.tail_tol * scale):
            quiet += 1
            if quiet >= QUIET_RUN:
                return done(n + 1, min(tail_b, _observed_tail(t, theta) + trunc.tail_tol * float(np.max(scale))))
        else:
            quiet = 0
    raise ConvergenceError(
        f"series did not reach tail_tol={trunc.tail_tol:g} within max_terms={trunc.max_terms}"
    )


def _observed_tail(t, theta):
    return float(np.max(np.abs(t))) * theta / (1 - theta)


def _finish(method, series_fn, closed_fn, like):
    method = Method.coerce(method)
    if method is Method.SERIES:
        s, n, res = series_fn()
        return KernelResult(_scalar_out(s, like), method, n, res)
    if method is Method.CLOSED:
        c, res = closed_fn()
        return KernelResult(_scalar_out(c, like), method, 0, res)
    s, n, sres = series_fn()
    c, cres = closed_fn()
    disc = float(np.max(np.abs(np.asarray(s) - np.asarray(c))))
    return KernelResult(
        _scalar_out(c, like), method, n, max(sres, cres), disc,
        series=_scalar_out(s, like), closed=_scalar_out(c, like),
    )


def _resid(*rels):
    out = 1.0
    for r in rels:
        out *= 1 + r
    return out - 1


def _bound_len(trunc: Truncation) -> int:
    return trunc.max_terms + 1


# -- kernels -------------------------------------------------------------------

def _pm_closed(x, y, rho, q, trunc):
    wp, r1 = w_product(x, y, rho, q, trunc)
    num, t = q_pochhammer_inf(rho * rho, q, trunc, return_residual=True)
    val = num / wp
    return val, _resid(r1, t.achieved_residual) * float(np.max(np.abs(val)))


def poisson_mehler(x, y, rho, q, trunc: Truncation = DEFAULT_TRUNCATION, method="closed") -> KernelResult:
    """Poisson--Mehler kernel ``sum_{i>=0} rho^i/[i]_q! H_i(x|q) H_i(y|q)``.

    Closed form ``(rho^2; q)_inf / prod_k w(x, y, rho q^k | q)``.
    """
    q = _q(q)
    if not abs(rho) < 1:
        raise DomainError("|rho| < 1 required")
    X, Y = _pts(x, y)
    _require_support(q, x=X, y=Y)

    def series():
        sb = _SupBounds(q, _bound_len(trunc))
        bound = sb.term_bound(rho, sb.h, sb.h)
        hx, hy = _hermite_seq(X, q), _hermite_seq(Y, q)
        terms = (rho**n * a * b for n, (a, b) in enumerate(zip(hx, hy)))
        return _sum_series(terms, bound, trunc, rho)

    return _finish(method, series, lambda: _pm_closed(X, Y, rho, q, trunc), (x, y))


def _check_ab(a, b):
    if b == 0:
        raise DomainError("b must be nonzero")
    if not abs(a) < abs(b):
        raise DomainError("|a| < |b| required")


def _bigh_closed(x, y, a, b, q, trunc):
    lam = a / b
    inv_phi, r0 = phi_product(x, a, q, trunc)
    wp, r1 = w_product(x, y, lam, q, trunc)
    num, t = q_pochhammer_inf(lam * lam, q, trunc, return_residual=True)
    val = num * inv_phi / wp
    return val, _resid(r0, r1, t.achieved_residual) * float(np.max(np.abs(val)))


def bigH_kernel(x, y, a, b, q, trunc: Truncation = DEFAULT_TRUNCATION, method="closed") -> KernelResult:
    """Big q-Hermite kernel ``sum (a/b)^n/[n]_q! H_n(x|a,q) H_n(y|b,q)`` for ``|a| < |b|``.

    Closed form ``(a^2/b^2)_inf prod_k (1 - (1-q) x a q^k + (1-q) a^2 q^2k) / w(x, y, q^k a/b | q)``.
    """
    q = _q(q)
    _check_ab(a, b)
    X, Y = _pts(x, y)
    _require_support(q, x=X, y=Y)
    lam = a / b

    def series():
        sb = _SupBounds(q, _bound_len(trunc))
        bound = sb.term_bound(lam, sb.big_h(a), sb.big_h(b))
        hx, hy = _big_hermite_seq(X, a, q), _big_hermite_seq(Y, b, q)
        terms = (lam**n * u * v for n, (u, v) in enumerate(zip(hx, hy)))
        return _sum_series(terms, bound, trunc, lam)

    return _finish(method, series, lambda: _bigh_closed(X, Y, a, b, q, trunc), (x, y))


def _b_shifted_seq(y, b, q, n_max):
    """``B_n(y|b,q)/sqrt([n]_q!)`` for ``n = 0..n_max`` (rows), via a Cauchy product."""
    npts = y.shape
    e = np.zeros((n_max + 1,) + npts)
    e[0] = 1.0
    if n_max >= 1:
        e[1] = -y
    for j in range(1, n_max):
        e[j + 1] = (-(q**j) * y * e[j] + q ** (j - 1) * e[j - 1]) / q_bracket(j + 1, q)
    u = np.empty(n_max + 1)
    u[0] = 1.0
    for k in range(1, n_max + 1):
        u[k] = u[k - 1] * b / q_bracket(k, q)
    flat = e.reshape(n_max + 1, -1)
    out = np.empty_like(flat)
    for n in range(n_max + 1):
        out[n] = u[: n + 1][::-1] @ flat[: n + 1]
    log_sqrt_fact = np.cumsum([0.0] + [0.5 * math.log(q_bracket(k, q)) for k in range(1, n_max + 1)])
    with np.errstate(over="ignore", invalid="ignore"):
        out = out * np.exp(log_sqrt_fact)[:, None]
    return out.reshape((n_max + 1,) + npts)


def bigH_kernel_reciprocal(x, y, a, b, q, trunc: Truncation = DEFAULT_TRUNCATION, method="series") -> KernelResult:
    """``sum (a/b)^n / ([n]_q! (a^2/b^2)_n) B_n(y|b,q) P_n(x|y,a/b,q)``.

    Equals ``1 / bigH_kernel``; with ``method="both"`` that reciprocal is the
    closed side.
    """
    q = _q(q)
    _check_ab(a, b)
    X, Y = _pts(x, y)
    _require_support(q, x=X, y=Y)
    lam = a / b

    def series():
        nb = _bound_len(trunc)
        sb = _SupBounds(q, nb)
        poch = _qpoch_seq(lam * lam, q, nb)
        bound = sb.term_bound(lam, sb.b_shifted(b), sb.asc(lam), poch)
        bs = _b_shifted_seq(Y, b, q, trunc.max_terms)
        px = _asc_seq(X, Y, lam, q)
        terms = (lam**n / poch[n] * bs[n] * p for n, p in enumerate(px))
        return _sum_series(terms, bound, trunc, lam)

    def closed():
        v, r = _bigh_closed(X, Y, a, b, q, trunc)
        val = 1.0 / v
        return val, r / float(np.min(np.abs(v))) * float(np.max(np.abs(val)))

    return _finish(method, series, closed, (x, y))


def _asc_closed(x, y, z, rho1, rho2, q, trunc):
    num_w, r1 = w_product(x, y, rho1 * rho2, q, trunc)
    den_w, r2 = w_product(x, z, rho1, q, trunc)
    n1, t1 = q_pochhammer_inf(rho1**2, q, trunc, return_residual=True)
    n2, t2 = q_pochhammer_inf((rho1 * rho2) ** 2, q, trunc, return_residual=True)
    val = n1 / n2 * num_w / den_w
    return val, _resid(r1, r2, t1.achieved_residual, t2.achieved_residual) * float(np.max(np.abs(val)))


def asc_kernel(x, y, z, rho1, rho2, q, trunc: Truncation = DEFAULT_TRUNCATION, method="closed") -> KernelResult:
    """ASC kernel ``sum rho1^n / ([n]_q! (rho1^2 rho2^2)_n) P_n(x|y,rho1 rho2,q) P_n(z|y,rho2,q)``.

    Closed form ``(rho1^2)_inf/(rho1^2 rho2^2)_inf prod_k w(x,y,q^k rho1 rho2|q) / w(x,z,q^k rho1|q)``,
    which is also ``f_CN(x|z,rho1,q) / f_CN(x|y,rho1 rho2,q)``.
    """
    q = _q(q)
    if not (abs(rho1) < 1 and abs(rho2) < 1):
        raise DomainError("|rho1|, |rho2| < 1 required")
    X, Y, Z = _pts(x, y, z)
    _require_support(q, x=X, y=Y, z=Z)
    r12 = rho1 * rho2

    def series():
        nb = _bound_len(trunc)
        sb = _SupBounds(q, nb)
        poch = _qpoch_seq(r12 * r12, q, nb)
        bound = sb.term_bound(rho1, sb.asc(r12), sb.asc(rho2), poch)
        px, pz = _asc_seq(X, Y, r12, q), _asc_seq(Z, Y, rho2, q)
        terms = (rho1**n / poch[n] * u * v for n, (u, v) in enumerate(zip(px, pz)))
        return _sum_series(terms, bound, trunc, rho1)

    return _finish(method, series, lambda: _asc_closed(X, Y, Z, rho1, rho2, q, trunc), (x, y, z))


def asc_kernel_fcn_ratio(x, y, z, rho1, rho2, q, trunc: Truncation = DEFAULT_TRUNCATION):
    """The ASC kernel as the density ratio ``f_CN(x|z,rho1,q) / f_CN(x|y,rho1 rho2,q)``.

    Only meaningful strictly inside ``S(q)`` where both densities are positive.
    """
    return density_cn(x, z, rho1, q, trunc) / density_cn(x, y, rho1 * rho2, q, trunc)


def _gen_closed(x, y, z, rho1, rho2, q, trunc):
    num_w, r1 = w_product(x, y, rho2, q, trunc)
    den_w, r2 = w_product(x, z, rho1, q, trunc)
    n1, t1 = q_pochhammer_inf(rho1**2, q, trunc, return_residual=True)
    n2, t2 = q_pochhammer_inf(rho2**2, q, trunc, return_residual=True)
    val = n1 / n2 * num_w / den_w
    return val, _resid(r1, r2, t1.achieved_residual, t2.achieved_residual) * float(np.max(np.abs(val)))


def _gen_series(X, Y, Z, rho1, rho2, q, trunc, magnitude=None):
    nb = _bound_len(trunc)
    sb = _SupBounds(q, nb)
    poch = _qpoch_seq(rho2 * rho2, q, nb)
    if rho1 == 0:
        # only the n = 0 term survives (rho2 = 0 is enforced by the caller)
        if magnitude is not None:
            magnitude.append(np.ones_like(X))
        return np.ones_like(X), 1, 0.0
    ratio = rho2 / rho1
    bound = sb.term_bound(rho1, sb.asc(rho2), sb.asc(ratio), poch)
    px, pz = _asc_seq(X, Y, rho2, q), _asc_seq(Z, Y, ratio, q)
    terms = (rho1**n / poch[n] * u * v for n, (u, v) in enumerate(zip(px, pz)))
    return _sum_series(terms, bound, trunc, max(abs(rho1), abs(rho2)), magnitude)


def asc_kernel_general(x, y, z, rho1, rho2, q, trunc: Truncation = DEFAULT_TRUNCATION, method="closed") -> KernelResult:
    """Symmetric form of the ASC kernel, allowing ``|rho2/rho1| >= 1``.

    ``sum rho1^n / ([n]_q! (rho2^2)_n) P_n(x|y,rho2,q) P_n(z|y,rho2/rho1,q)``
    with closed form
    ``(rho1^2)_inf/(rho2^2)_inf prod_k w(x,y,rho2 q^k|q) / w(x,z,rho1 q^k|q)``.
    The second factor uses the extended (non-orthogonal) ASC polynomials.
    """
    q = _q(q)
    if not (abs(rho1) < 1 and abs(rho2) < 1):
        raise DomainError("|rho1|, |rho2| < 1 required")
    if rho1 == 0 and rho2 != 0:
        raise DomainError("rho1 = 0 with rho2 != 0: the ratio rho2/rho1 is undefined")
    X, Y, Z = _pts(x, y, z)
    _require_support(q, x=X, y=Y, z=Z)
    return _finish(
        method,
        lambda: _gen_series(X, Y, Z, rho1, rho2, q, trunc),
        lambda: _gen_closed(X, Y, Z, rho1, rho2, q, trunc),
        (x, y, z),
    )


def _gen_series_mp(x, y, z, rho1, rho2, q, max_terms):
    """Scalar ``_gen_series`` in mpmath arithmetic at the current precision.

    Stops after ``QUIET_RUN`` consecutive terms below the working epsilon
    relative to the partial sum.
    """
    x, y, z, r1, r2, q = (mpmath.mpf(v) for v in (x, y, z, rho1, rho2, q))
    tol = mpmath.eps * 16
    ratio = r2 / r1
    px_prev, px = mpmath.mpf(0), mpmath.mpf(1)
    pz_prev, pz = mpmath.mpf(0), mpmath.mpf(1)
    coef = mpmath.mpf(1)
    total = mpmath.mpf(0)
    quiet = 0
    for n in range(max_terms):
        t = coef * px * pz
        total += t
        quiet = quiet + 1 if abs(t) <= tol * max(1, abs(total)) else 0
        if quiet >= QUIET_RUN:
            return total
        qn = q**n
        bn = (1 - qn) / (1 - q)
        tail_x = bn * (1 - r2 * r2 * q ** (n - 1)) if n else 0
        tail_z = bn * (1 - ratio * ratio * q ** (n - 1)) if n else 0
        px_prev, px = px, (x - r2 * y * qn) * px - tail_x * px_prev
        pz_prev, pz = pz, (z - ratio * y * qn) * pz - tail_z * pz_prev
        coef *= r1 / (((1 - qn * q) / (1 - q)) * (1 - r2 * r2 * qn))
    raise ConvergenceError(f"extended-precision series did not converge within {max_terms} terms")


def inversion_result(x, y, z, rho1, rho2, q, trunc: Truncation = DEFAULT_TRUNCATION) -> KernelResult:
    """Product of the two general ASC series whose value should be exactly 1.

    Near the edges of ``S(q)`` for ``q`` close to 1 one factor is huge and the
    other is the small result of heavy cancellation, so double precision
    loses the product.  Points whose estimated rounding error exceeds
    ``EXTENDED_TRIGGER`` are re-summed with ``EXTENDED_DPS`` decimal digits.
    """
    q = _q(q)
    if not (abs(rho1) < 1 and abs(rho2) < 1):
        raise DomainError("|rho1|, |rho2| < 1 required")
    if rho1 == 0 or rho2 == 0:
        raise DomainError("rho1 and rho2 must be nonzero")
    X, Y, Z = _pts(x, y, z)
    _require_support(q, x=X, y=Y, z=Z)
    m1, m2 = [], []
    s1, n1, e1 = _gen_series(X, Y, Z, rho1, rho2, q, trunc, m1)
    s2, n2, e2 = _gen_series(X, Z, Y, rho2, rho1, q, trunc, m2)
    val = np.array(s1 * s2, dtype=float)
    eps = np.finfo(float).eps
    rounding = eps * max(n1, n2) * (m1[0] * np.abs(s2) + m2[0] * np.abs(s1))
    est = np.abs(s1) * e2 + np.abs(s2) * e1 + e1 * e2 + rounding
    est = np.array(np.broadcast_to(est, val.shape), dtype=float)
    redo = np.flatnonzero(np.broadcast_to(rounding, val.shape) > EXTENDED_TRIGGER)
    if redo.size:
        cap = 4 * trunc.max_terms
        with mpmath.workdps(EXTENDED_DPS):
            for i in redo:
                a, b, c = X.flat[i], Y.flat[i], Z.flat[i]
                u = _gen_series_mp(a, b, c, rho1, rho2, q, cap)
                v = _gen_series_mp(a, c, b, rho2, rho1, q, cap)
                val.flat[i] = float(u * v)
                # only the final rounding to double remains
                est.flat[i] = eps * abs(val.flat[i])
    resid = float(np.max(est)) if est.size else 0.0
    return KernelResult(_scalar_out(val, (x, y, z)), Method.SERIES, max(n1, n2), resid)


def inversion_identity(x, y, z, rho1, rho2, q, trunc: Truncation = DEFAULT_TRUNCATION):
    """Series product
    ``sum rho1^n/([n]!(rho2^2)_n) P_n(x|y,rho2) P_n(z|y,rho2/rho1)
    * sum rho2^n/([n]!(rho1^2)_n) P_n(x|z,rho1) P_n(y|z,rho1/rho2)``.

    Equals 1 up to truncation.
    """
    return inversion_result(x, y, z, rho1, rho2, q, trunc).value


def phi_series(x, t, q, trunc: Truncation = DEFAULT_TRUNCATION) -> KernelResult:
    """``sum_n t^n/[n]_q! H_n(x|q)``, the series side of the generating function."""
    q = _q(q)
    if not abs(t * math.sqrt(1 - q)) < 1:
        raise DomainError("|t sqrt(1-q)| < 1 required")
    (X,) = _pts(x)
    _require_support(q, x=X)
    sb = _SupBounds(q, _bound_len(trunc))
    k = sb._k
    bound = (abs(t) * math.sqrt(1 - q)) ** k * sb.h
    seq = zip(_hermite_seq(X, q), _sqrt_fact_seq(q))
    terms = (t**n * s * h for n, (h, s) in enumerate(seq))
    s, n, res = _sum_series(terms, bound, trunc, abs(t) * math.sqrt(1 - q))
    return KernelResult(_scalar_out(s, (x,)), Method.SERIES, n, res)


def _sqrt_fact_seq(q):
    out = 1.0
    n = 0
    while True:
        yield out
        n += 1
        out /= math.sqrt(q_bracket(n, q))


def asc_generating_function(x, y, rho, t, q, trunc: Truncation = DEFAULT_TRUNCATION, method="closed") -> KernelResult:
    """``sum_n t^n/[n]_q! P_n(x|y,rho,q)`` with closed form ``phi(x|t,q) / phi(y|rho t,q)``."""
    q = _q(q)
    if not abs(rho) < 1:
        raise DomainError("|rho| < 1 required")
    if not abs(t * math.sqrt(1 - q)) < 1:
        raise DomainError("|t sqrt(1-q)| < 1 required")
    X, Y = _pts(x, y)
    _require_support(q, x=X, y=Y)

    def series():
        sb = _SupBounds(q, _bound_len(trunc))
        bound = (abs(t) * math.sqrt(1 - q)) ** sb._k * sb.asc(rho)
        seq = zip(_asc_seq(X, Y, rho, q), _sqrt_fact_seq(q))
        terms = (t**n * s * p for n, (p, s) in enumerate(seq))
        return _sum_series(terms, bound, trunc, abs(t) * math.sqrt(1 - q))

    def closed():
        inv_x, r1 = phi_product(X, t, q, trunc)
        inv_y, r2 = phi_product(Y, rho * t, q, trunc)
        val = inv_y / inv_x
        return val, _resid(r1, r2) * float(np.max(np.abs(val)))

    return _finish(method, series, closed, (x, y))


def phi_reciprocal_series(x, a, q, trunc: Truncation = DEFAULT_TRUNCATION) -> KernelResult:
    """``sum_n (-a)^n q^C(n,2) / [n]_q! H_n(x|a,q)``, which equals ``1/phi(x|a,q)``."""
    q = _q(q)
    if not abs(a * math.sqrt(1 - q)) < 1:
        raise DomainError("|a sqrt(1-q)| < 1 required")
    (X,) = _pts(x)
    _require_support(q, x=X)
    sb = _SupBounds(q, _bound_len(trunc))
    k = sb._k
    bound = (
        (abs(a) * math.sqrt(1 - q)) ** k
        * np.abs(q) ** (k * (k - 1) / 2)
        * sb.big_h(a)
    )
    seq = zip(_big_hermite_seq(X, a, q), _sqrt_fact_seq(q))
    terms = ((-a) ** n * q ** (n * (n - 1) // 2) * s * h for n, (h, s) in enumerate(seq))
    s, n, res = _sum_series(terms, bound, trunc, abs(a) * math.sqrt(1 - q))
    return KernelResult(_scalar_out(s, (x,)), Method.SERIES, n, res)


def build_lancaster_density(x, y, rho, q, trunc: Truncation = DEFAULT_TRUNCATION):
    """Bivariate density ``f_N(x|q) K(x,y) f_N(y|q)`` with ``K`` the Poisson--Mehler kernel.

    Zero outside ``S(q) x S(q)``.
    """
    q = _q(q)
    if not abs(rho) < 1:
        raise DomainError("|rho| < 1 required")
    X, Y = _pts(x, y)
    fx, fy = density_n(X, q, trunc), density_n(Y, q, trunc)
    inside = np.asarray(in_support(X, q)) & np.asarray(in_support(Y, q))
    lim = 2 / math.sqrt(1 - q)
    Xc, Yc = np.clip(X, -lim, lim), np.clip(Y, -lim, lim)
    k, _ = _pm_closed(Xc, Yc, rho, q, trunc)
    out = np.where(inside, fx * k * fy, 0.0)
    return _scalar_out(out, (x, y))


# -- q = 0 and q = 1 corollaries -----------------------------------------------

class CorollaryCase(enum.Enum):
    Q1_BigH = "q1-bigh"
    Q0_BigH = "q0-bigh"
    Q1_ASC = "q1-asc"
    Q0_ASC = "q0-asc"


def _cheb_seq(x):
    """Yield ``(U_{n-1}(x/2), U_n(x/2))`` for ``n = 0, 1, ...``."""
    prev, cur = np.zeros_like(x), np.ones_like(x)
    while True:
        yield prev, cur
        prev, cur = cur, x * cur - prev


def _hermite_prob_seq(x):
    """``He_n(x)/sqrt(n!)`` for ``n = 0, 1, ...``."""
    prev, cur = np.zeros_like(x), np.ones_like(x)
    n = 0
    while True:
        yield cur
        nxt = (x * cur - (math.sqrt(n) * prev if n else 0.0)) / math.sqrt(n + 1)
        prev, cur = cur, nxt
        n += 1


def corollary_special(case, trunc: Truncation = DEFAULT_TRUNCATION, **params) -> KernelResult:
    """Evaluate both sides of one of the ``q = 0`` / ``q = 1`` kernel identities.

    ``Q1_BigH``: ``x, y, a, b`` with ``|a| < |b|``; ``Q0_BigH``: same with
    ``x, y`` in ``[-2, 2]`` and ``|b| < 1``; ``Q1_ASC`` and ``Q0_ASC``:
    ``x, y, z, rho1, rho2``.  The series side uses Hermite (``q = 1``) or
    Chebyshev (``q = 0``) polynomials; the closed side is the Gaussian or
    rational expression.  ``q = 1`` series use a fixed 120 terms.
    """
    case = case if isinstance(case, CorollaryCase) else CorollaryCase(case)
    fixed = Truncation(max_terms=COROLLARY_Q1_TERMS, tail_tol=trunc.tail_tol)
    if case in (CorollaryCase.Q1_BigH, CorollaryCase.Q0_BigH):
        x, y, a, b = (params[k] for k in ("x", "y", "a", "b"))
        _check_ab(a, b)
        X, Y = _pts(x, y)
        rho = a / b
        if case is CorollaryCase.Q1_BigH:
            if abs(rho) > 0.8:
                raise DomainError("|a/b| <= 0.8 required for the truncated Hermite series")
            terms = (
                rho**n * u * v
                for n, (u, v) in enumerate(zip(_hermite_prob_seq(X - a), _hermite_prob_seq(Y - b)))
            )
            s, n, res = _fixed_sum(terms, COROLLARY_Q1_TERMS)
            c = np.exp(-((X - rho * Y) ** 2) / (2 * (1 - rho**2)) + (X - a) ** 2 / 2) / math.sqrt(1 - rho**2)
        else:
            if not abs(b) < 1:
                raise DomainError("|b| < 1 required")
            if np.any(np.abs(X) > 2) or np.any(np.abs(Y) > 2):
                raise DomainError("x, y must lie in [-2, 2]")
            k = np.arange(trunc.max_terms + 2)
            bound = np.abs(rho) ** k * (k + 1 + abs(a) * k) * (k + 1 + abs(b) * k)
            terms = (
                rho**n * (ux - a * ux1) * (uy - b * uy1)
                for n, ((ux1, ux), (uy1, uy)) in enumerate(zip(_cheb_seq(X), _cheb_seq(Y)))
            )
            s, n, res = _sum_series(terms, bound, trunc, rho)
            w0 = (1 - rho**2) ** 2 - rho * (1 + rho**2) * X * Y + rho**2 * (X * X + Y * Y)
            c = (1 - rho**2) * (1 - a * X + a * a) / w0
        like = (x, y)
    else:
        x, y, z, r1, r2 = (params[k] for k in ("x", "y", "z", "rho1", "rho2"))
        if not (abs(r1) < 1 and abs(r2) < 1):
            raise DomainError("|rho1|, |rho2| < 1 required")
        X, Y, Z = _pts(x, y, z)
        r12 = r1 * r2
        if case is CorollaryCase.Q1_ASC:
            if abs(r1) > 0.8:
                raise DomainError("|rho1| <= 0.8 required for the truncated Hermite series")
            lam = r1 * math.sqrt(1 - r2**2) / math.sqrt(1 - r12**2)
            u = (X - r12 * Y) / math.sqrt(1 - r12**2)
            v = (Z - r2 * Y) / math.sqrt(1 - r2**2)
            terms = (lam**n * a * b for n, (a, b) in enumerate(zip(_hermite_prob_seq(u), _hermite_prob_seq(v))))
            s, n, res = _fixed_sum(terms, COROLLARY_Q1_TERMS)
            c = math.sqrt((1 - r12**2) / (1 - r1**2)) * np.exp(
                -((X - r1 * Z) ** 2) / (2 * (1 - r1**2)) + (X - r12 * Y) ** 2 / (2 * (1 - r12**2))
            )
        else:
            if np.any(np.abs(np.stack([X, Y, Z])) > 2):
                raise DomainError("x, y, z must lie in [-2, 2]")
            k = np.arange(trunc.max_terms + 2)
            grow = (k + 1) * (1 + abs(r12) * 2 + r12**2) * (k + 1) * (1 + abs(r2) * 2 + r2**2)
            bound = np.abs(r1) ** k * grow / (1 - r12**2)
            terms = _q0_asc_terms(X, Y, Z, r1, r2)
            s, n, res = _sum_series(terms, bound, trunc, r1)
            w = lambda a, b, r: (1 - r * r) ** 2 - r * (1 + r * r) * a * b + r * r * (a * a + b * b)
            c = (1 - r1**2) * w(X, Y, r12) / ((1 - r12**2) * w(X, Z, r1))
        like = (x, y, z)
    disc = float(np.max(np.abs(s - c)))
    return KernelResult(
        _scalar_out(c, like), Method.BOTH, n, res, disc,
        series=_scalar_out(s, like), closed=_scalar_out(c, like),
    )


def _q0_asc_terms(X, Y, Z, r1, r2):
    """``1 + 1/(1 - r1^2 r2^2) sum_{n>=1} r1^n P_n(x|y,r1 r2,0) P_n(z|y,r2,0)`` term by term."""
    r12 = r1 * r2
    yield np.ones_like(X)
    sx, sz = _cheb_seq(X), _cheb_seq(Z)
    um2x, um2z = np.zeros_like(X), np.zeros_like(Z)
    next(sx), next(sz)
    n = 1
    for (ux1, ux), (uz1, uz) in zip(sx, sz):
        px = ux - r12 * Y * ux1 + r12**2 * um2x
        pz = uz - r2 * Y * uz1 + r2**2 * um2z
        yield r1**n * px * pz / (1 - r12**2)
        um2x, um2z = ux1, uz1
        n += 1


def _fixed_sum(terms, count):
    """Sum exactly ``count`` terms; the estimate is the last term plus rounding."""
    total = None
    last = None
    mag = 0.0
    for _, t in zip(range(count), terms):
        total = t if total is None else total + t
        mag = mag + np.abs(t)
        last = t
    return total, count, float(np.max(np.abs(last))) + EPS * float(np.max(mag))
