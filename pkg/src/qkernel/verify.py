"""
Quadrature over ``S(q)`` and the identity-verification harness.

Every identity in :data:`CATALOG` evaluates its two sides by independent
routes (series against product, quadrature against a stated norm, exact
rational reassembly against a recurrence) on a parameter grid and condenses
the per-point residuals into an :class:`IdentityReport`.

Residual kinds
--------------
``absolute``  ``|lhs - rhs|``
``scaled``    ``|lhs - rhs| / max(1, |rhs|)``; equal to ``absolute`` while
              values stay O(1), relative once they do not
``relative``  ``|lhs - rhs| / |rhs|`` (norms and normalizations)
``exact``     rational arithmetic; only a zero residual passes
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np

from . import connect, families as fam, kernels as ker, measures as meas
from .families import Family, PolySpec, Support, support
from .qcore import (
    DEFAULT_TRUNCATION,
    DomainError,
    Truncation,
    q_binomial,
    q_binomial_exact,
    q_factorial,
    q_factorial_exact,
    q_pochhammer,
    q_pochhammer_exact,
    q_pochhammer_inf,
    qvalue,
)

__all__ = [
    "QuadratureRule",
    "GridSpec",
    "PointResult",
    "IdentityReport",
    "Identity",
    "CATALOG",
    "TOPICS",
    "STANDARD_Q",
    "STANDARD_SPAN",
    "DEFAULT_ORDER",
    "gauss_rule",
    "density_rule",
    "orthogonality_norm",
    "check_orthogonality",
    "orthogonality_error",
    "gram_matrix",
    "run_identity_suite",
    "run_all",
    "report_to_json",
    "report_to_csv",
    "write_reports",
]

DEFAULT_ORDER = 128
NORMALIZATION_TOL = 1e-8
# numpy's Gauss-Hermite weights underflow beyond this order
MAX_HERMITE_ORDER = 150
# the smallest positive double: only an exactly zero residual passes
EXACT_TOL = math.ulp(0.0)
# relative rounding allowance for bounds that are attained exactly
BOUND_SLACK = 1e-12

STANDARD_Q = (-0.5, 0.0, 0.3, 0.7, 0.9)
STANDARD_RHO = (0.2, 0.5, 0.8)
STANDARD_AB = ((0.2, 0.7), (0.45, 0.5), (-0.3, 0.8))
# fraction of the half-width of S(q) covered by the standard grid
STANDARD_SPAN = 0.6


# -- quadrature ------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Nodes in increasing order with positive weights."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be positive")
        if len(self.nodes) != len(self.weights):
            raise ValueError("nodes and weights differ in length")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_rule(order: int, support: Support, gaussian: bool = False) -> QuadratureRule:
    """Gauss--Legendre rule mapped affinely onto a bounded ``support``.

    For the unbounded support of ``q = 1`` pass ``gaussian=True``: the rule
    is then Gauss--Hermite for the standard normal weight, i.e.
    ``integrate(g)`` approximates ``E[g(Z)]`` and the weights sum to 1.
    """
    if int(order) != order or order < 1:
        raise DomainError("order must be a positive integer")
    if not support.bounded:
        if not gaussian:
            raise DomainError("unbounded support needs gaussian=True")
        t, w = np.polynomial.hermite_e.hermegauss(int(order))
        return QuadratureRule(t, w / math.sqrt(2 * math.pi), int(order))
    t, w = np.polynomial.legendre.leggauss(int(order))
    half = support.length / 2
    mid = (support.upper + support.lower) / 2
    return QuadratureRule(mid + half * t, half * w, int(order))


def density_rule(order: int, q, loc: float = 0.0, scale: float = 1.0) -> QuadratureRule:
    """Rule for ``int g(x) dx`` with ``g`` one of the densities times a polynomial.

    For ``|q| < 1`` the substitution ``x = (2/sqrt(1-q)) cos(theta)`` turns
    the square-root endpoint behaviour into a smooth periodic integrand, and
    Gauss--Legendre in ``theta`` converges geometrically.  For ``q = 1`` the
    nodes are Gauss--Hermite nodes placed at ``loc + scale * t`` and the
    weights carry ``exp(t^2/2)`` so the rule integrates Gaussian-type
    integrands in ``dx``; its order is capped at 150.
    """
    q = float(qvalue(q))
    if int(order) != order or order < 1:
        raise DomainError("order must be a positive integer")
    if q == 1:
        n = min(int(order), MAX_HERMITE_ORDER)
        t, w = np.polynomial.hermite_e.hermegauss(n)
        return QuadratureRule(loc + scale * t, scale * w * np.exp(t * t / 2), n)
    c = 2.0 / math.sqrt(1.0 - q)
    t, w = np.polynomial.legendre.leggauss(int(order))
    theta = (t + 1) * math.pi / 2
    nodes = c * np.cos(theta)
    weights = c * np.sin(theta) * w * math.pi / 2
    return QuadratureRule(nodes[::-1].copy(), weights[::-1].copy(), int(order))


# -- orthogonality --------------------------------------------------------------

_ORTHOGONAL = (Family.QHermiteH, Family.BigQHermiteH, Family.ASC_P, Family.HermiteProb)


def _density_for(spec: PolySpec, trunc: Truncation):
    f, q = spec.family, float(qvalue(spec.q))
    if f not in _ORTHOGONAL:
        raise DomainError(f"{f.value} has no stated orthogonality norm here")
    if f is Family.HermiteProb:
        q = 1.0
    if f is Family.BigQHermiteH:
        if q != 1 and not abs(spec.a * math.sqrt(1 - q)) < 1:
            raise DomainError("non-orthogonal regime: |a sqrt(1-q)| >= 1")
        return (lambda x: meas.density_bn(x, spec.a, q, trunc)), spec.a, 1.0
    if f is Family.ASC_P:
        if not abs(spec.rho) < 1:
            raise DomainError("non-orthogonal regime: |rho| >= 1")
        if not fam.in_support(spec.y, q):
            raise DomainError("non-orthogonal regime: y outside S(q)")
        loc, scale = spec.rho * spec.y, math.sqrt(1 - spec.rho**2)
        return (lambda x: meas.density_cn(x, spec.y, spec.rho, q, trunc)), loc, scale
    return (lambda x: meas.density_n(x, q, trunc)), 0.0, 1.0


def orthogonality_norm(spec: PolySpec, n: int) -> float:
    """Squared norm of the degree-``n`` member: ``[n]_q!`` or ``(rho^2)_n [n]_q!``."""
    q = 1.0 if spec.family is Family.HermiteProb else float(qvalue(spec.q))
    base = float(q_factorial(n, q))
    if spec.family is Family.ASC_P:
        return float(q_pochhammer(spec.rho**2, q, n)) * base
    return base


def _rule_for(spec: PolySpec, order: int, trunc: Truncation):
    """Density rule for ``spec``, doubled once if it misses the normalization."""
    dens, loc, scale = _density_for(spec, trunc)
    q = 1.0 if spec.family is Family.HermiteProb else spec.q
    rule = density_rule(order, q, loc, scale)
    values = dens(rule.nodes)
    if abs(float(np.dot(rule.weights, values)) - 1) > NORMALIZATION_TOL:
        rule = density_rule(2 * order, q, loc, scale)
        values = dens(rule.nodes)
    return rule, values


def gram_matrix(spec: PolySpec, n_max: int, order: int = DEFAULT_ORDER,
                trunc: Truncation = DEFAULT_TRUNCATION) -> np.ndarray:
    """``G[n, m] = int p_n p_m density dx`` for ``n, m <= n_max``."""
    rule, dens = _rule_for(spec, order, trunc)
    polys = np.array([fam.evaluate(spec, k, rule.nodes) for k in range(n_max + 1)])
    return (polys * (rule.weights * dens)) @ polys.T


def check_orthogonality(spec: PolySpec, n: int, m: int, order: int = DEFAULT_ORDER,
                        trunc: Truncation = DEFAULT_TRUNCATION) -> float:
    """``int p_n p_m density dx`` minus the stated norm (0 when ``n != m``)."""
    g = gram_matrix(spec, max(n, m), order, trunc)
    target = orthogonality_norm(spec, n) if n == m else 0.0
    return float(g[n, m] - target)


def orthogonality_error(spec: PolySpec, n: int, m: int, order: int = DEFAULT_ORDER,
                        trunc: Truncation = DEFAULT_TRUNCATION) -> float:
    """:func:`check_orthogonality` divided by ``sqrt(norm_n norm_m)``."""
    scale = math.sqrt(orthogonality_norm(spec, n) * orthogonality_norm(spec, m))
    return abs(check_orthogonality(spec, n, m, order, trunc)) / scale


# -- reports --------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Overrides for an identity's default grid; ``None`` keeps the default.

    ``span`` is the fraction of the half-width of ``S(q)`` covered by the
    point grid and ``points`` the number of points per axis.
    """

    q_values: tuple | None = None
    span: float | None = None
    points: int | None = None
    rho_values: tuple | None = None

    def resolve(self, defaults: Mapping) -> "GridSpec":
        merged = {k: getattr(self, k) if getattr(self, k) is not None else defaults.get(k)
                  for k in ("q_values", "span", "points", "rho_values")}
        g = GridSpec(**merged)
        if g.span is not None and not 0 < g.span <= 1:
            raise DomainError("span must lie in (0, 1]")
        if g.points is not None and g.points < 1:
            raise DomainError("points must be positive")
        return g

    def axis(self, q) -> np.ndarray:
        """Evenly spaced points over the central ``span`` part of ``S(q)``."""
        half = support(q).upper if float(q) != 1 else 2.0
        if self.points == 1:
            return np.zeros(1)
        return np.linspace(-self.span, self.span, self.points) * half


@dataclass(frozen=True)
class PointResult:
    params: tuple
    lhs: float
    rhs: float
    residual: float
    positive: bool = True


@dataclass(frozen=True)
class IdentityReport:
    identity_id: str
    grid_size: int
    max_residual: float
    mean_residual: float
    positivity_violations: int
    tolerance: float
    passed: bool
    worst_point: tuple
    residual_kind: str = "absolute"
    points: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.max_residual < 0 or self.mean_residual < 0:
            raise ValueError("residuals are nonnegative")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        ok = self.max_residual <= self.tolerance and self.positivity_violations == 0
        if self.passed != ok:
            raise ValueError("passed must equal (max_residual <= tolerance and no violations)")


@dataclass(frozen=True)
class Identity:
    identity_id: str
    topic: str
    statement: str
    kind: str
    tolerance: float
    defaults: dict
    runner: Callable[[GridSpec, Truncation], list]


def _residual(lhs, rhs, kind):
    lhs, rhs = np.asarray(lhs, dtype=float), np.asarray(rhs, dtype=float)
    d = np.abs(lhs - rhs)
    if kind == "scaled":
        return d / np.maximum(1.0, np.abs(rhs))
    if kind == "relative":
        return d / np.abs(rhs)
    return d


def _points(names, columns, lhs, rhs, kind, positive=None) -> list:
    """Flatten broadcast arrays into :class:`PointResult` rows (C order)."""
    arrays = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in columns],
                                 np.asarray(lhs, dtype=float), np.asarray(rhs, dtype=float))
    cols, lhs, rhs = arrays[:-2], arrays[-2], arrays[-1]
    res = _residual(lhs, rhs, kind)
    pos = np.ones(lhs.shape, dtype=bool) if positive is None else np.broadcast_to(positive, lhs.shape)
    out = []
    for idx in np.ndindex(lhs.shape):
        params = tuple((nm, float(c[idx])) for nm, c in zip(names, cols))
        out.append(PointResult(params, float(lhs[idx]), float(rhs[idx]), float(res[idx]), bool(pos[idx])))
    return out


# -- runners: kernels -----------------------------------------------------------

def _nonneg(r) -> np.ndarray:
    """Sign check of a series side: negative only beyond its own error estimate.

    Where a kernel is ~1e-12 the rounding floor of its series can exceed the
    true value, so a raw ``>= 0`` test would flag rounding noise.
    """
    return np.asarray(r.series if r.series is not None else r.value) >= -r.residual_estimate


def _mehler(g: GridSpec, trunc):
    out = []
    for q in g.q_values:
        ax = g.axis(q)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        for rho in g.rho_values:
            r = ker.poisson_mehler(X, Y, rho, q, trunc, method="both")
            out += _points(("q", "rho", "x", "y"), (q, rho, X, Y), r.series, r.closed, "absolute",
                           _nonneg(r))
    return out


def _thm_i(g: GridSpec, trunc):
    out = []
    for q in g.q_values:
        ax = g.axis(q)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        for a, b in STANDARD_AB:
            r = ker.bigH_kernel(X, Y, a, b, q, trunc, method="both")
            out += _points(("q", "a", "b", "x", "y"), (q, a, b, X, Y), r.series, r.closed, "absolute",
                           _nonneg(r))
    return out


def _thm_ii(g: GridSpec, trunc):
    out = []
    for q in g.q_values:
        ax = g.axis(q)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        for a, b in STANDARD_AB:
            # the kernel in product form: its series is accurate in absolute terms
            # only, and where it is ~1e-12 that error dominates the product
            k = ker.bigH_kernel(X, Y, a, b, q, trunc, method="closed").value
            rec = ker.bigH_kernel_reciprocal(X, Y, a, b, q, trunc, method="series").value
            out += _points(("q", "a", "b", "x", "y"), (q, a, b, X, Y), k * rec, 1.0, "absolute")
    return out


def _grid3(g, q):
    ax = g.axis(q)
    return np.meshgrid(ax, ax, ax, indexing="ij")


def _thm_iii(g: GridSpec, trunc):
    out = []
    names = ("q", "rho1", "rho2", "x", "y", "z")
    for q in g.q_values:
        X, Y, Z = _grid3(g, q)
        for r1 in g.rho_values:
            for r2 in g.rho_values:
                r = ker.asc_kernel(X, Y, Z, r1, r2, q, trunc, method="both")
                ratio = ker.asc_kernel_fcn_ratio(X, Y, Z, r1, r2, q, trunc)
                c = np.asarray(r.closed)
                # report the worse of the two comparisons against the closed form
                s_res = _residual(r.series, c, "scaled")
                f_res = _residual(ratio, c, "scaled")
                lhs = np.where(f_res > s_res, ratio, r.series)
                out += _points(names, (q, r1, r2, X, Y, Z), lhs, c, "scaled", _nonneg(r))
            # rho2 = 0 reduces to the Poisson--Mehler kernel in (x, z)
            red = ker.asc_kernel(X, Y, Z, r1, 0.0, q, trunc, method="series")
            pm = ker.poisson_mehler(X, Z, r1, q, trunc, method="closed").value
            out += _points(names, (q, r1, 0.0, X, Y, Z), red.value, pm, "scaled", _nonneg(red))
    return out


def _genasc(g: GridSpec, trunc):
    out = []
    for q in g.q_values:
        X, Y, Z = _grid3(g, q)
        for r1 in g.rho_values:
            for r2 in g.rho_values:
                r = ker.asc_kernel_general(X, Y, Z, r1, r2, q, trunc, method="both")
                out += _points(("q", "rho1", "rho2", "x", "y", "z"), (q, r1, r2, X, Y, Z),
                               r.series, r.closed, "scaled", _nonneg(r))
    return out


NICE_PAIRS = ((0.5, 0.35), (0.3, 0.6))


def _nice(g: GridSpec, trunc):
    out = []
    for q in g.q_values:
        X, Y, Z = _grid3(g, q)
        for r1, r2 in NICE_PAIRS:
            v = ker.inversion_result(X, Y, Z, r1, r2, q, trunc).value
            out += _points(("q", "rho1", "rho2", "x", "y", "z"), (q, r1, r2, X, Y, Z), v, 1.0, "absolute")
    return out


PHI_SCALES = (-0.8, -0.4, 0.4, 0.8)


def _phi_1(g: GridSpec, trunc):
    out = []
    for q in g.q_values:
        x = g.axis(q)
        for s in PHI_SCALES:
            a = s / math.sqrt(1 - q)
            v = ker.phi_reciprocal_series(x, a, q, trunc).value * meas.phi(x, a, q, trunc)
            out += _points(("q", "a", "x"), (q, a, x), v, 1.0, "absolute")
    return out


def _phi_2(g: GridSpec, trunc):
    out = []
    for q in g.q_values:
        x = g.axis(q)
        for s in PHI_SCALES:
            t = s / math.sqrt(1 - q)
            out += _points(("q", "t", "x"), (q, t, x), ker.phi_series(x, t, q, trunc).value,
                           meas.phi(x, t, q, trunc), "scaled")
    return out


def _chasc(g: GridSpec, trunc):
    out = []
    for q in g.q_values:
        ax = g.axis(q)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        for rho in g.rho_values:
            for s in PHI_SCALES:
                t = s / math.sqrt(1 - q)
                r = ker.asc_generating_function(X, Y, rho, t, q, trunc, method="both")
                out += _points(("q", "rho", "t", "x", "y"), (q, rho, t, X, Y), r.series, r.closed, "scaled")
    return out


def _exp_ratio(g: GridSpec, trunc):
    """Density-ratio expansions: ``f_CN / f_bN`` and ``f_CN / f_CN`` as kernel series."""
    out = []
    for q in g.q_values:
        ax = g.axis(q)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        for a, b in STANDARD_AB:
            s = ker.bigH_kernel(X, Y, a, b, q, trunc, method="series").value
            ratio = meas.density_cn(X, Y, a / b, q, trunc) / meas.density_bn(X, a, q, trunc)
            out += _points(("q", "a", "b", "x", "y"), (q, a, b, X, Y), s, ratio, "scaled")
        X, Y, Z = _grid3(g, q)
        for r1 in g.rho_values:
            for r2 in g.rho_values:
                s = ker.asc_kernel(X, Y, Z, r1, r2, q, trunc, method="series").value
                ratio = ker.asc_kernel_fcn_ratio(X, Y, Z, r1, r2, q, trunc)
                out += _points(("q", "rho1", "rho2", "x", "y", "z"), (q, r1, r2, X, Y, Z), s, ratio, "scaled")
    return out


# |a/b| <= 0.8: at a/b = 0.9 the closed-form special cases converge too slowly
# for the default term cap at q = 0
COROLLARY_AB = ((0.2, 0.7), (0.4, 0.5), (-0.3, 0.8))


def _corollary(case, tol_kind="scaled"):
    def run(g: GridSpec, trunc):
        out = []
        ax = np.linspace(-g.span, g.span, g.points) * 2.0
        if case in (ker.CorollaryCase.Q1_BigH, ker.CorollaryCase.Q0_BigH):
            X, Y = np.meshgrid(ax, ax, indexing="ij")
            for a, b in COROLLARY_AB:
                r = ker.corollary_special(case, trunc, x=X, y=Y, a=a, b=b)
                out += _points(("a", "b", "x", "y"), (a, b, X, Y), r.series, r.closed, tol_kind, _nonneg(r))
        else:
            X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
            for r1 in g.rho_values:
                for r2 in g.rho_values:
                    r = ker.corollary_special(case, trunc, x=X, y=Y, z=Z, rho1=r1, rho2=r2)
                    out += _points(("rho1", "rho2", "x", "y", "z"), (r1, r2, X, Y, Z), r.series, r.closed,
                                   tol_kind, _nonneg(r))
        return out

    return run


# -- runners: exact connection identities ------------------------------------------

EXACT_Q = (Fraction(-1, 2), Fraction(0), Fraction(3, 10), Fraction(1, 2), Fraction(9, 10), Fraction(1))
EXACT_MAX_N = 8
_A, _B = Fraction(3, 10), Fraction(7, 10)
_Y, _Z = Fraction(1, 5), Fraction(-1, 2)
_R1, _R2 = Fraction(2, 5), Fraction(7, 10)


def _exact_q(g: GridSpec):
    if g.q_values is None:
        return EXACT_Q
    return tuple(Fraction(q).limit_denominator(10**6) for q in g.q_values)


def _exact_runner(build: Callable[[int, Fraction], connect.ExpansionResult], label: tuple):
    def run(g: GridSpec, trunc):
        out = []
        for q in _exact_q(g):
            for n in range(EXACT_MAX_N + 1):
                e = build(n, q)
                # n + 2 distinct rational points pin down a degree-n identity
                for j in range(n + 2):
                    x = Fraction(2 * j - n - 1, 3)
                    lhs, rhs = e.source_value(x), e.reassemble(x)
                    res = abs(Fraction(lhs) - Fraction(rhs))
                    params = (("q", float(q)), ("n", float(n)), ("x", float(x))) + label
                    out.append(PointResult(params, float(lhs), float(rhs), float(res)))
        return out

    return run


def _qnotation(g: GridSpec, trunc):
    out = []
    for q in _exact_q(g):
        for n in range(0, 21):
            lhs = q_pochhammer(q, q, n)
            rhs = (1 - q) ** n * q_factorial(n, q)
            out.append(PointResult((("q", float(q)), ("n", float(n)), ("k", -1.0)), float(lhs), float(rhs),
                                   float(abs(lhs - rhs))))
            if q_factorial(n, q) != q_factorial_exact(n, q):
                out.append(PointResult((("q", float(q)), ("n", float(n)), ("k", -2.0)), float(q_factorial(n, q)),
                                       float(q_factorial_exact(n, q)), 1.0))
            for k in range(n + 1):
                lhs, rhs = q_binomial(n, k, q), q_binomial_exact(n, k, q)
                out.append(PointResult((("q", float(q)), ("n", float(n)), ("k", float(k))), float(lhs), float(rhs),
                                       float(abs(lhs - rhs))))
            lhs, rhs = q_pochhammer(_A, q, n), q_pochhammer_exact(_A, q, n)
            out.append(PointResult((("q", float(q)), ("n", float(n)), ("k", -3.0)), float(lhs), float(rhs),
                                   float(abs(lhs - rhs))))
    return out


# -- runners: bounds, densities, special cases ----------------------------------------

def _lemma_iv(g: GridSpec, trunc):
    out = []
    for q in g.q_values:
        x = np.linspace(-1, 1, 1001) * support(q).upper
        for a in (0.0, 0.3, -0.5):
            for n in range(11):
                peak = float(np.max(np.abs(fam.big_q_hermite(n, x, a, q))))
                bound = connect.bound_qhermite(n, a, q, trunc)
                res = max(0.0, peak / bound - 1)
                # the a = 0 bound is attained at the edge of S(q); allow rounding there
                ok = peak <= bound * (1 + BOUND_SLACK)
                out.append(PointResult((("q", q), ("a", a), ("n", float(n))), peak, bound, res, ok))
    return out


def _lemma_v(g: GridSpec, trunc):
    out = []
    for q in g.q_values:
        ax = np.linspace(-1, 1, 21) * support(q).upper
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        for rho in g.rho_values:
            lo, hi = connect.density_ratio_bounds(rho, q, trunc)
            wp, _ = meas.w_product(X, Y, rho, q, trunc)
            # f_CN / f_N in closed form, finite at the endpoints where both vanish
            ratio = q_pochhammer_inf(rho * rho, q, trunc) / wp
            excess = np.maximum(0.0, np.maximum(lo - ratio, ratio - hi)) / hi
            inside = (ratio >= lo * (1 - BOUND_SLACK)) & (ratio <= hi * (1 + BOUND_SLACK))
            arr = np.broadcast_arrays(X, Y, ratio, excess, inside)
            for idx in np.ndindex(X.shape):
                out.append(PointResult((("q", q), ("rho", rho), ("x", float(arr[0][idx])), ("y", float(arr[1][idx]))),
                                       float(arr[2][idx]), hi, float(arr[3][idx]), bool(arr[4][idx])))
    return out


def _orth_specs(g: GridSpec):
    for q in g.q_values:
        yield PolySpec(Family.QHermiteH, q=q)
        for a in (0.3, -0.5):
            yield PolySpec(Family.BigQHermiteH, q=q, a=a)
        half = support(q).upper if q != 1 else 2.0
        for y in (0.4, -0.5 * half):
            for rho in g.rho_values:
                yield PolySpec(Family.ASC_P, q=q, y=y, rho=rho)


def _spec_params(spec: PolySpec):
    base = (("family", float(_ORTHOGONAL.index(spec.family))), ("q", float(spec.q)))
    if spec.family is Family.BigQHermiteH:
        return base + (("a", spec.a),)
    if spec.family is Family.ASC_P:
        return base + (("y", spec.y), ("rho", spec.rho))
    return base


ORTH_MAX_N = 10


def _orthogonality(g: GridSpec, trunc):
    out = []
    for spec in _orth_specs(g):
        gm = gram_matrix(spec, ORTH_MAX_N, DEFAULT_ORDER, trunc)
        norms = np.array([orthogonality_norm(spec, k) for k in range(ORTH_MAX_N + 1)])
        for n in range(ORTH_MAX_N + 1):
            for m in range(n, ORTH_MAX_N + 1):
                target = norms[n] if n == m else 0.0
                res = abs(gm[n, m] - target) / math.sqrt(norms[n] * norms[m])
                out.append(PointResult(_spec_params(spec) + (("n", float(n)), ("m", float(m))),
                                       float(gm[n, m]), float(target), float(res)))
    return out


def _normalization(g: GridSpec, trunc):
    out = []
    for spec in _orth_specs(g):
        rule, dens = _rule_for(spec, DEFAULT_ORDER, trunc)
        total = float(np.dot(rule.weights, dens))
        out.append(PointResult(_spec_params(spec) + (("order", float(rule.order)),), total, 1.0,
                               abs(total - 1), bool(np.all(dens >= 0))))
    return out


LANCASTER_Q = (-0.5, 0.0, 0.3, 0.7)


def _lancaster(g: GridSpec, trunc):
    out = []
    for q in g.q_values:
        rule = density_rule(DEFAULT_ORDER, q)
        X, Y = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
        W = np.outer(rule.weights, rule.weights)
        lim = support(q).upper
        grid = np.linspace(-lim, lim, 41)
        GX, GY = np.meshgrid(grid, grid, indexing="ij")
        for rho in g.rho_values:
            total = float(np.sum(W * ker.build_lancaster_density(X, Y, rho, q, trunc)))
            ok = bool(np.all(ker.build_lancaster_density(GX, GY, rho, q, trunc) >= 0))
            out.append(PointResult((("q", q), ("rho", rho)), total, 1.0, abs(total - 1), ok))
    return out


def _special_q0(g: GridSpec, trunc):
    out = []
    x = np.linspace(-g.span, g.span, g.points) * 2.0
    for n in range(13):
        for a in (0.0, 0.4, -0.7):
            out += _points(("n", "a", "x"), (n, a, x), fam.big_q_hermite(n, x, a, 0.0),
                           fam.big_q_hermite_q0(n, x, a), "scaled")
        for y, rho in ((-0.4, 0.6), (1.2, 0.3), (0.0, 0.9)):
            out += _points(("n", "y", "rho", "x"), (n, y, rho, x), fam.asc(n, x, y, rho, 0.0),
                           fam.asc_q0(n, x, y, rho), "scaled")
    for y, rho in ((-0.4, 0.6), (1.2, 0.3), (0.0, 0.9)):
        out += _points(("n", "y", "rho", "x"), (-1, y, rho, x), meas.density_cn(x, y, rho, 0.0, trunc),
                       meas.f_cn_q0(x, y, rho), "scaled")
    out += _points(("n", "x"), (-2, x), meas.density_n(x, 0.0, trunc), meas.f_n_q0(x), "scaled")
    return out


def _special_q1(g: GridSpec, trunc):
    out = []
    x = np.linspace(-g.span, g.span, g.points) * 3.0
    for n in range(13):
        for a in (0.0, 0.4, -0.7):
            out += _points(("n", "a", "x"), (n, a, x), fam.big_q_hermite(n, x, a, 1.0),
                           fam.big_q_hermite_q1(n, x, a), "scaled")
        for y, rho in ((-0.4, 0.6), (1.2, 0.3), (0.0, 0.9)):
            out += _points(("n", "y", "rho", "x"), (n, y, rho, x), fam.asc(n, x, y, rho, 1.0),
                           fam.asc_q1(n, x, y, rho), "scaled")
    return out


def _recurrences(g: GridSpec, trunc):
    out = []
    for q in g.q_values:
        c = math.sqrt(1 - q)
        x = g.axis(q)
        for n in range(11):
            h = fam.continuous_q_hermite(n, x * c / 2, q) / c**n
            out += _points(("q", "n", "k", "x"), (q, n, 0, x), fam.q_hermite(n, x, q), h, "scaled")
            for y, rho in ((0.4, 0.5), (-0.3, 0.8)):
                p = fam.asc_standard(n, x * c / 2, rho * y * c, rho * rho, q) / c**n
                rec = fam.asc_recurrence(n, x, y, rho, q)
                out += _points(("q", "n", "k", "x"), (q, n, 1, x), rec, p, "scaled")
                out += _points(("q", "n", "k", "x"), (q, n, 2, x), rec, fam.asc_via_hermite(n, x, y, rho, q),
                               "scaled")
    return out


# -- catalog ----------------------------------------------------------------------

_STD = {"q_values": STANDARD_Q, "span": STANDARD_SPAN, "points": 5, "rho_values": STANDARD_RHO}

TOPICS = {
    "q-notation": "q-brackets, factorials, binomials and Pochhammer symbols",
    "recurrences": "three-term recurrences of the polynomial families and their rescalings",
    "measures": "generating functions, densities, orthogonality and the Poisson--Mehler formula",
    "density-expansion": "expansion of a density ratio in orthogonal polynomials",
    "special-cases": "closed forms at q = 0 and q = 1",
    "connection": "connection coefficients and the bounds built on them",
    "kernels": "kernel theorems, their corollaries and the inversion identities",
    "lancaster": "the Lancaster bivariate density",
}

_CK = ker.CorollaryCase

CATALOG: dict[str, Identity] = {
    i.identity_id: i
    for i in [
        Identity("qnotation", "q-notation", "(q;q)_n = (1-q)^n [n]_q!, Pascal recurrence, exact oracles",
                 "exact", EXACT_TOL, {}, _qnotation),
        Identity("recurrences", "recurrences",
                 "H_n = rescaled h_n; P_n = rescaled p_n = q-Hermite expansion of P_n",
                 "scaled", 1e-11, {"q_values": STANDARD_Q, "span": 1.0, "points": 7}, _recurrences),
        Identity("phi-2", "measures", "sum t^n/[n]_q! H_n(x|q) = phi(x|t,q)", "scaled", 1e-10, _STD, _phi_2),
        Identity("chasc", "measures", "sum t^n/[n]_q! P_n(x|y,rho,q) = phi(x|t,q)/phi(y|rho t,q)",
                 "scaled", 1e-10, _STD, _chasc),
        Identity("mehler", "measures",
                 "sum_{i>=0} rho^i/[i]_q! H_i(x|q) H_i(y|q) = (rho^2)_inf / prod w(x,y,rho q^k|q)",
                 "absolute", 1e-8, _STD, _mehler),
        Identity("orthogonality", "measures",
                 "int p_n p_m f = [n]_q! delta (f_N, f_bN) and (rho^2)_n [n]_q! delta (f_CN)",
                 "relative", 1e-7, _STD, _orthogonality),
        Identity("normalization", "measures", "int f_N = int f_bN = int f_CN = 1", "absolute", 1e-8,
                 _STD, _normalization),
        Identity("exp-ratio", "density-expansion",
                 "f_CN/f_bN and f_CN/f_CN equal their orthogonal-polynomial expansions", "scaled", 1e-8,
                 _STD, _exp_ratio),
        Identity("special-q0", "special-cases", "q = 0: Chebyshev forms and the Kesten--McKay density",
                 "scaled", 1e-10, {"span": 1.0, "points": 9}, _special_q0),
        Identity("special-q1", "special-cases", "q = 1: shifted and scaled Hermite polynomials",
                 "scaled", 1e-10, {"span": 1.0, "points": 9}, _special_q1),
        Identity("bigH", "connection", "H_n(x|a,q) = sum [n i] q^C(i,2) (-a)^i H_{n-i}(x|q)", "exact",
                 EXACT_TOL, {}, _exact_runner(lambda n, q: connect.expand_bigH_in_qHermite(n, _A, q), (("a", 0.3),))),
        Identity("bigH2", "connection", "H_n(x|q) = sum [n i] a^i H_{n-i}(x|a,q)", "exact", EXACT_TOL, {},
                 _exact_runner(lambda n, q: connect.expand_qHermite_in_bigH(n, _A, q), (("a", 0.3),))),
        Identity("asc-hb", "connection", "P_n(x|y,rho,q) = sum [n i] rho^(n-i) B_(n-i)(y|q) H_i(x|q)", "exact",
                 EXACT_TOL, {}, _exact_runner(lambda n, q: connect.expand_asc_in_qHermite(n, _Y, _R1, q),
                                              (("y", 0.2), ("rho", 0.4)))),
        Identity("hnap", "connection", "H_n(x|q) = sum [n i] rho^(n-i) H_(n-i)(y|q) P_i(x|y,rho,q)", "exact",
                 EXACT_TOL, {}, _exact_runner(lambda n, q: connect.expand_qHermite_in_asc(n, _Y, _R1, q),
                                              (("y", 0.2), ("rho", 0.4)))),
        Identity("lemma-i", "connection", "H_n(x|a,q) = sum [n j] (a/b)^(n-j) H_(n-j)(y|b,q) P_j(x|y,a/b,q)",
                 "exact", EXACT_TOL, {}, _exact_runner(lambda n, q: connect.connect_bigH_via_asc(n, _Y, _A, _B, q),
                                                       (("y", 0.2), ("a", 0.3), ("b", 0.7)))),
        Identity("lemma-ii", "connection", "P_n(x|y,rho,q) = sum [n i] rho^(n-i) B_(n-i)(y|a/rho,q) H_i(x|a,q)",
                 "exact", EXACT_TOL, {}, _exact_runner(lambda n, q: connect.connect_asc_via_bigH(n, _Y, _R1, _A, q),
                                                       (("y", 0.2), ("rho", 0.4), ("a", 0.3)))),
        Identity("lemma-iii", "connection",
                 "P_n(x|y,r1 r2,q) = sum [n i] r1^(n-i) P_(n-i)(z|y,r2,q) P_i(x|z,r1,q)", "exact", EXACT_TOL, {},
                 _exact_runner(lambda n, q: connect.connect_asc_product(n, _Y, _Z, _R1, _R2, q),
                               (("y", 0.2), ("z", -0.5), ("rho1", 0.4), ("rho2", 0.7)))),
        Identity("lemma-iv", "connection", "max_S |H_n(x|a,q)| <= (-|a|sqrt(1-q); |q|)_inf (1-q)^(-n/2) r_n(1|q)",
                 "relative", 1e-12, {"q_values": STANDARD_Q}, _lemma_iv),
        Identity("lemma-v", "connection", "(rho^2; q)_inf/(-|rho|; |q|)_inf^4 <= f_CN/f_N <= (rho^2; q)_inf/(|rho|; |q|)_inf^4",
                 "relative", 1e-12, {"q_values": STANDARD_Q, "rho_values": STANDARD_RHO}, _lemma_v),
        Identity("thm-i", "kernels", "big q-Hermite kernel: series = closed product, nonnegative", "absolute", 1e-8,
                 _STD, _thm_i),
        Identity("thm-ii", "kernels", "big q-Hermite kernel (product form) times its reciprocal series = 1", "absolute", 1e-6,
                 _STD, _thm_ii),
        Identity("thm-iii", "kernels", "ASC kernel: series = closed product = f_CN ratio; rho2 = 0 gives Mehler",
                 "scaled", 1e-8, _STD, _thm_iii),
        Identity("genasc", "kernels", "symmetric ASC kernel: series = closed product, nonnegative", "scaled",
                 1e-8, _STD, _genasc),
        Identity("nice", "kernels", "product of the two symmetric ASC series = 1", "absolute", 1e-6,
                 {"q_values": (0.0, 0.4, 0.8), "span": 1.0, "points": 3}, _nice),
        Identity("phi-1", "kernels", "phi(x|a,q) * sum (-a)^n q^C(n,2)/[n]_q! H_n(x|a,q) = 1", "absolute", 1e-10,
                 _STD, _phi_1),
        Identity("cor-i", "kernels", "q = 1 big Hermite kernel: Hermite series = Gaussian expression", "scaled",
                 1e-8, {"span": 1.0, "points": 5}, _corollary(_CK.Q1_BigH)),
        Identity("cor-ii", "kernels", "q = 0 big Hermite kernel: Chebyshev series = rational expression", "scaled",
                 1e-10, {"span": 1.0, "points": 5}, _corollary(_CK.Q0_BigH)),
        Identity("cor-iii", "kernels", "q = 1 ASC kernel: Hermite series = Gaussian expression", "scaled", 1e-8,
                 {"span": 1.0, "points": 5, "rho_values": STANDARD_RHO}, _corollary(_CK.Q1_ASC)),
        Identity("cor-iv", "kernels", "q = 0 ASC kernel: Chebyshev series = rational expression", "scaled", 1e-10,
                 {"span": 1.0, "points": 5, "rho_values": STANDARD_RHO}, _corollary(_CK.Q0_ASC)),
        Identity("lancaster", "lancaster", "h = f_N K f_N integrates to 1 and is nonnegative", "absolute", 1e-6,
                 {"q_values": LANCASTER_Q, "rho_values": STANDARD_RHO}, _lancaster),
    ]
}


# -- running ------------------------------------------------------------------------

def _tolerance_for(identity: Identity, tolerances) -> float:
    if tolerances is None:
        return identity.tolerance
    if isinstance(tolerances, Mapping):
        return float(tolerances.get(identity.identity_id, identity.tolerance))
    return float(tolerances)


def _check_q(g: GridSpec):
    if g.q_values is not None:
        for q in g.q_values:
            qvalue(q)


def run_identity_suite(identity_id: str, grid_spec: GridSpec | None = None, tolerances=None,
                       trunc: Truncation = DEFAULT_TRUNCATION) -> IdentityReport:
    """Sweep one catalog identity over its grid and aggregate the residuals.

    ``tolerances`` is ``None`` (catalog defaults), a number applied to this
    identity, or a mapping from identity id to tolerance.  Points are
    aggregated in the fixed order the runner produces them, so identical
    inputs give identical reports.
    """
    if identity_id not in CATALOG:
        raise DomainError(f"unknown identity {identity_id!r}; choose from {sorted(CATALOG)}")
    identity = CATALOG[identity_id]
    grid = (grid_spec or GridSpec()).resolve(identity.defaults)
    _check_q(grid)
    tol = _tolerance_for(identity, tolerances)
    if not tol > 0:
        raise DomainError("tolerance must be positive")
    points = identity.runner(grid, trunc)
    return _aggregate(identity, points, tol)


def _aggregate(identity: Identity, points: list, tol: float) -> IdentityReport:
    residuals = [p.residual for p in points]
    if any(math.isnan(r) for r in residuals):
        worst = next(i for i, r in enumerate(residuals) if math.isnan(r))
        max_res = math.inf
    else:
        worst = int(np.argmax(residuals)) if residuals else 0
        max_res = max(residuals) if residuals else 0.0
    mean_res = math.fsum(r for r in residuals if not math.isnan(r)) / len(points) if points else 0.0
    violations = sum(1 for p in points if not p.positive)
    return IdentityReport(
        identity_id=identity.identity_id,
        grid_size=len(points),
        max_residual=max_res,
        mean_residual=mean_res,
        positivity_violations=violations,
        tolerance=tol,
        passed=max_res <= tol and violations == 0,
        worst_point=points[worst].params if points else (),
        residual_kind=identity.kind,
        points=tuple(points),
    )


def run_all(grid_spec: GridSpec | None = None, tolerances=None,
            trunc: Truncation = DEFAULT_TRUNCATION, ids: Iterable[str] | None = None) -> list[IdentityReport]:
    """Run every catalog identity (or ``ids``) in catalog order."""
    return [run_identity_suite(i, grid_spec, tolerances, trunc) for i in (ids or CATALOG)]


# -- writers ---------------------------------------------------------------------------

def _summary(r: IdentityReport) -> dict:
    d = {k: v for k, v in asdict(r).items() if k != "points"}
    d["worst_point"] = dict(r.worst_point)
    d["statement"] = CATALOG[r.identity_id].statement if r.identity_id in CATALOG else ""
    return d


def report_to_json(reports, include_points: bool = True) -> str:
    """One JSON document ``{"reports": [...], "passed": bool}``."""
    reports = [reports] if isinstance(reports, IdentityReport) else list(reports)
    body = []
    for r in reports:
        d = _summary(r)
        if include_points:
            d["points"] = [
                {"params": dict(p.params), "lhs": p.lhs, "rhs": p.rhs, "residual": p.residual, "positive": p.positive}
                for p in r.points
            ]
        body.append(d)
    doc = {"reports": body, "passed": all(r.passed for r in reports)}
    return json.dumps(doc, indent=2, allow_nan=True)


def report_to_csv(reports) -> str:
    """CSV rows per grid point with ``#``-prefixed summary lines at the end."""
    reports = [reports] if isinstance(reports, IdentityReport) else list(reports)
    names: list[str] = []
    for r in reports:
        for p in r.points:
            for k, _ in p.params:
                if k not in names:
                    names.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["identity"] + names + ["lhs", "rhs", "residual", "positive"])
    for r in reports:
        for p in r.points:
            vals = dict(p.params)
            w.writerow([r.identity_id] + [repr(vals[k]) if k in vals else "" for k in names]
                       + [repr(p.lhs), repr(p.rhs), repr(p.residual), int(p.positive)])
    for r in reports:
        s = _summary(r)
        buf.write(
            f"# {r.identity_id}: passed={r.passed} grid_size={r.grid_size} max_residual={r.max_residual!r} "
            f"mean_residual={r.mean_residual!r} positivity_violations={r.positivity_violations} "
            f"tolerance={r.tolerance!r} residual_kind={r.residual_kind} worst_point={s['worst_point']}\n"
        )
    return buf.getvalue()


def write_reports(reports, path: str, fmt: str | None = None) -> None:
    """Write reports to ``path`` as JSON or CSV (inferred from the suffix)."""
    fmt = fmt or ("csv" if str(path).lower().endswith(".csv") else "json")
    text = report_to_csv(reports) if fmt == "csv" else report_to_json(reports)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
