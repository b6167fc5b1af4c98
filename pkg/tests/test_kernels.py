from __future__ import annotations

import math

import numpy as np
import pytest

from qkernel import families as fam, kernels as ker, measures as meas
from qkernel.kernels import CorollaryCase, KernelResult, Method
from qkernel.qcore import ConvergenceError, DomainError, Truncation, q_factorial, q_pochhammer, q_pochhammer_inf
from qkernel.verify import density_rule


def _brute(term, n_terms=150):
    """Plain left-to-right sum of ``term(n)`` built from the family evaluators."""
    return math.fsum(term(n) for n in range(n_terms))


# -- Poisson--Mehler ----------------------------------------------------------------

def test_poisson_mehler_geometric_case():
    r = ker.poisson_mehler(0.0, 0.0, 0.5, 0.0, method="both")
    assert r.value == pytest.approx(4 / 3, abs=1e-15)
    assert r.discrepancy <= 1e-12
    assert r.method is Method.BOTH and r.terms_used > 0


@pytest.mark.parametrize("q", [-0.5, 0.0, 0.3, 0.7])
@pytest.mark.parametrize("x, y, rho", [(0.4, -0.9, 0.5), (1.1, 1.3, -0.6), (-0.2, 0.7, 0.3)])
def test_poisson_mehler_against_brute_force(q, x, y, rho):
    s = _brute(lambda n: rho**n / q_factorial(n, q) * fam.q_hermite(n, x, q) * fam.q_hermite(n, y, q))
    r = ker.poisson_mehler(x, y, rho, q, method="both")
    assert r.series == pytest.approx(s, rel=1e-12)
    assert r.closed == pytest.approx(s, rel=1e-12)


def test_poisson_mehler_rho_zero_and_validation():
    assert ker.poisson_mehler(0.3, 0.1, 0.0, 0.5).value == 1.0
    with pytest.raises(DomainError):
        ker.poisson_mehler(0.0, 0.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        ker.poisson_mehler(9.0, 0.0, 0.5, 0.5)
    with pytest.raises(DomainError):
        ker.poisson_mehler(0.0, 0.0, 0.5, 1.0)


# -- big q-Hermite kernel and its reciprocal ----------------------------------------------

# a/b = 0.9 needs ~330 terms, more than the degree cap lets the brute-force oracle use;
# that pair is covered series-against-product in the thm-i suite
@pytest.mark.parametrize("q", [-0.5, 0.0, 0.5, 0.8])
@pytest.mark.parametrize("a, b", [(0.2, 0.7), (-0.3, 0.8)])
def test_bigh_kernel_against_brute_force(q, a, b):
    x, y = 0.6, -0.3
    lam = a / b
    s = _brute(lambda n: lam**n / q_factorial(n, q) * fam.big_q_hermite(n, x, a, q) * fam.big_q_hermite(n, y, b, q),
               fam.MAX_DEGREE)
    r = ker.bigH_kernel(x, y, a, b, q, method="both")
    assert r.series == pytest.approx(s, rel=1e-11)
    assert r.closed == pytest.approx(s, rel=1e-11)


def test_bigh_kernel_is_density_ratio():
    x, y, a, b, q = 0.7, -0.4, 0.3, 0.6, 0.5
    ratio = meas.density_cn(x, y, a / b, q) / meas.density_bn(x, a, q)
    assert ker.bigH_kernel(x, y, a, b, q).value == pytest.approx(ratio, rel=1e-12)


def test_bigh_trivial_and_validation():
    assert ker.bigH_kernel(0.3, 0.1, 0.0, 0.5, 0.5, method="both").value == 1.0
    for a, b in ((0.5, 0.5), (0.2, 0.0)):
        with pytest.raises(DomainError):
            ker.bigH_kernel(0.1, 0.1, a, b, 0.5)


def test_reciprocal_example():
    args = (0.3, -0.2, 0.25, 0.8, 0.5)
    prod = ker.bigH_kernel(*args).value * ker.bigH_kernel_reciprocal(*args).value
    assert prod == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("q", [-0.5, 0.3, 0.9])
def test_reciprocal_against_brute_force(q):
    x, y, a, b = 0.5, 0.9, 0.2, 0.7
    lam = a / b
    s = _brute(lambda n: lam**n / (q_factorial(n, q) * q_pochhammer(lam * lam, q, n))
               * fam.aux_b_shifted(n, y, b, q) * fam.asc(n, x, y, lam, q), 60)
    r = ker.bigH_kernel_reciprocal(x, y, a, b, q, method="both")
    assert r.series == pytest.approx(s, rel=1e-11)
    assert r.closed == pytest.approx(s, rel=1e-11)


# -- ASC kernels -----------------------------------------------------------------------

@pytest.mark.parametrize("q", [-0.5, 0.0, 0.6])
@pytest.mark.parametrize("r1, r2", [(0.5, 0.8), (-0.7, 0.3)])
def test_asc_kernel_triple(q, r1, r2):
    x, y, z = 0.3, -0.8, 1.1
    r = ker.asc_kernel(x, y, z, r1, r2, q, method="both")
    r12 = r1 * r2
    s = _brute(lambda n: r1**n / (q_factorial(n, q) * q_pochhammer(r12 * r12, q, n))
               * fam.asc(n, x, y, r12, q) * fam.asc(n, z, y, r2, q))
    assert r.series == pytest.approx(s, rel=1e-11)
    assert r.closed == pytest.approx(s, rel=1e-11)
    assert ker.asc_kernel_fcn_ratio(x, y, z, r1, r2, q) == pytest.approx(s, rel=1e-11)


def test_asc_kernel_rho2_zero_is_poisson_mehler():
    x, y, z = np.meshgrid(np.linspace(-1.5, 1.5, 4), [0.2, -0.9], np.linspace(-1, 1.8, 3), indexing="ij")
    red = ker.asc_kernel(x, y, z, 0.6, 0.0, 0.4, method="series").value
    pm = ker.poisson_mehler(x, z, 0.6, 0.4).value
    np.testing.assert_allclose(red, pm, rtol=1e-10)


@pytest.mark.parametrize("q", [-0.4, 0.3, 0.8])
def test_general_form_reduces_to_asc_kernel(q):
    x, y, z, r1, r2 = 0.4, -0.5, 1.0, 0.6, 0.7
    g = ker.asc_kernel_general(x, y, z, r1, r1 * r2, q, method="both")
    k = ker.asc_kernel(x, y, z, r1, r2, q, method="closed").value
    assert g.series == pytest.approx(k, rel=1e-11)
    assert g.closed == pytest.approx(k, rel=1e-11)


@pytest.mark.parametrize("q", [0.0, 0.5])
def test_general_form_with_ratio_above_one(q):
    # rho2/rho1 > 1: the second factor runs through the extended polynomials
    x, y, z, r1, r2 = 0.3, 0.2, -0.6, 0.35, 0.5
    g = ker.asc_kernel_general(x, y, z, r1, r2, q, method="both")
    assert g.series == pytest.approx(g.closed, rel=1e-10)


def test_general_form_dual_method_example():
    r = ker.asc_kernel_general(0.2, 0.5, -0.4, 0.7, 0.35, 0.3, method="both")
    assert abs(r.series - r.closed) <= 1e-9
    assert r.value > 0


def test_general_form_with_swapped_w_factors_disagrees():
    # w(x,z,rho2)/w(x,y,rho1) instead of w(x,y,rho2)/w(x,z,rho1) disagrees with the series
    x, y, z, r1, r2, q = 0.3, 0.2, -0.6, 0.35, 0.5, 0.5
    num, _ = meas.w_product(x, z, r2, q)
    den, _ = meas.w_product(x, y, r1, q)
    swapped = q_pochhammer_inf(r1 * r1, q) / q_pochhammer_inf(r2 * r2, q) * num / den
    series = ker.asc_kernel_general(x, y, z, r1, r2, q, method="series").value
    assert abs(swapped - series) > 1e-3


@pytest.mark.parametrize("q", [0.0, 0.4, 0.8])
def test_inversion_identity(q):
    lim = 2 / math.sqrt(1 - q)
    for pt in ((0.0, 0.0, 0.0), (lim, -lim, lim), (-0.5 * lim, 0.9 * lim, 0.1)):
        assert ker.inversion_identity(*pt, 0.5, 0.35, q) == pytest.approx(1.0, abs=1e-12)


# -- generating functions ----------------------------------------------------------------

@pytest.mark.parametrize("q", [-0.5, 0.0, 0.7])
@pytest.mark.parametrize("s", [-0.8, 0.4])
def test_phi_series_and_reciprocal(q, s):
    x = np.linspace(-1, 1, 5) * 2 / math.sqrt(1 - q)
    t = s / math.sqrt(1 - q)
    np.testing.assert_allclose(ker.phi_series(x, t, q).value, meas.phi(x, t, q), rtol=1e-10)
    np.testing.assert_allclose(ker.phi_reciprocal_series(x, t, q).value * meas.phi(x, t, q), 1.0, atol=1e-10)


def test_asc_generating_function():
    x, y, rho, t, q = 0.8, -0.3, 0.5, 0.6, 0.4
    s = _brute(lambda n: t**n / q_factorial(n, q) * fam.asc(n, x, y, rho, q))
    r = ker.asc_generating_function(x, y, rho, t, q, method="both")
    assert r.series == pytest.approx(s, rel=1e-12)
    assert r.closed == pytest.approx(meas.phi(x, t, q) / meas.phi(y, rho * t, q), rel=1e-12)


# -- Lancaster density ------------------------------------------------------------------------

@pytest.mark.parametrize("q", [-0.5, 0.0, 0.5])
def test_lancaster_density(q):
    rule = density_rule(96, q)
    X, Y = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
    h = ker.build_lancaster_density(X, Y, 0.6, q)
    assert np.all(h >= 0)
    assert float(np.sum(np.outer(rule.weights, rule.weights) * h)) == pytest.approx(1.0, abs=1e-10)
    # the x-marginal is f_N
    marginal = h @ rule.weights
    np.testing.assert_allclose(marginal, meas.density_n(rule.nodes, q), atol=1e-10)
    assert ker.build_lancaster_density(10.0, 0.0, 0.6, q) == 0.0


# -- corollaries -------------------------------------------------------------------------------

@pytest.mark.parametrize("case", list(CorollaryCase))
def test_corollaries(case):
    if case in (CorollaryCase.Q0_BigH, CorollaryCase.Q1_BigH):
        r = ker.corollary_special(case, x=0.4, y=-1.1, a=0.3, b=0.6)
    else:
        r = ker.corollary_special(case, x=0.4, y=-1.1, z=0.7, rho1=0.6, rho2=-0.5)
    assert r.method is Method.BOTH
    assert r.series == pytest.approx(r.closed, rel=1e-10)
    assert r.value > 0


def test_corollary_q0_matches_kernel_at_q0():
    r = ker.corollary_special(CorollaryCase.Q0_BigH, x=0.4, y=-1.1, a=0.3, b=0.6)
    assert r.closed == pytest.approx(ker.bigH_kernel(0.4, -1.1, 0.3, 0.6, 0.0).value, rel=1e-12)
    r = ker.corollary_special(CorollaryCase.Q0_ASC, x=0.4, y=-1.1, z=0.7, rho1=0.6, rho2=-0.5)
    assert r.closed == pytest.approx(ker.asc_kernel(0.4, -1.1, 0.7, 0.6, -0.5, 0.0).value, rel=1e-12)


def test_corollary_validation():
    with pytest.raises(DomainError):
        ker.corollary_special(CorollaryCase.Q1_BigH, x=0.0, y=0.0, a=0.9, b=1.0)
    with pytest.raises(DomainError):
        ker.corollary_special(CorollaryCase.Q0_BigH, x=3.0, y=0.0, a=0.1, b=0.5)
    with pytest.raises(ValueError):
        ker.corollary_special("q2-asc", x=0.0, y=0.0, z=0.0, rho1=0.1, rho2=0.1)


# -- truncation policy and result invariants ------------------------------------------------------

def test_truncation_controls_term_count():
    loose = ker.poisson_mehler(0.5, 0.2, 0.8, 0.5, Truncation(tail_tol=1e-6), method="series")
    tight = ker.poisson_mehler(0.5, 0.2, 0.8, 0.5, method="series")
    assert loose.terms_used < tight.terms_used
    assert loose.value == pytest.approx(tight.value, abs=1e-5)
    with pytest.raises(ConvergenceError):
        ker.poisson_mehler(0.5, 0.2, 0.8, 0.5, Truncation(max_terms=5), method="series")


def test_vectorized_matches_scalar():
    x = np.array([-1.0, 0.2, 1.3])
    vec = ker.asc_kernel(x, 0.4, -0.6, 0.5, 0.7, 0.3, method="series").value
    for xi, v in zip(x, vec):
        assert ker.asc_kernel(xi, 0.4, -0.6, 0.5, 0.7, 0.3, method="series").value == pytest.approx(v, rel=1e-13)
    assert isinstance(ker.asc_kernel(0.1, 0.4, -0.6, 0.5, 0.7, 0.3).value, float)


def test_method_coercion_and_result_invariants():
    assert Method.coerce("both") is Method.BOTH
    with pytest.raises(ValueError):
        Method.coerce("neither")
    with pytest.raises(ValueError):
        KernelResult(1.0, Method.SERIES, 3, 0.0, discrepancy=0.0)
    with pytest.raises(ValueError):
        KernelResult(1.0, Method.CLOSED, -1, 0.0)
