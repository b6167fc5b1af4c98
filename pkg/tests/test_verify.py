from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
import pytest

from qkernel import families as fam, measures as meas, verify
from qkernel.families import Family, PolySpec
from qkernel.qcore import DomainError, q_factorial
from qkernel.verify import CATALOG, TOPICS, GridSpec, IdentityReport, PointResult


# -- quadrature -----------------------------------------------------------------------

@pytest.mark.parametrize("q", [-0.5, 0.0, 0.7])
def test_gauss_rule_integrates_polynomials(q):
    s = fam.support(q)
    rule = verify.gauss_rule(20, s)
    exact = (s.upper**7 - s.lower**7) / 7
    assert rule.integrate(lambda x: x**6) == pytest.approx(exact, rel=1e-13)
    assert rule.weights.sum() == pytest.approx(s.length, rel=1e-14)


def test_semicircle_examples():
    # the semicircle density and its second moment, through the angle-mapped density rule
    rule = verify.density_rule(64, 0.0)
    f = meas.density_n(rule.nodes, 0.0)
    assert abs(np.dot(rule.weights, f) - 1) <= 1e-10
    assert abs(np.dot(rule.weights, rule.nodes**2 * f) - 1) <= 1e-9
    assert verify.gauss_rule(64, fam.support(0.0)).weights.sum() == pytest.approx(4.0, abs=1e-13)


def test_affine_rule_converges_only_algebraically_on_densities():
    # the square-root edge of f_N limits plain Gauss--Legendre to an O(order^-3) error,
    # which is why densities are integrated with the angle-mapped rule
    errs = [abs(verify.gauss_rule(k, fam.support(0.0)).integrate(lambda x: meas.density_n(x, 0.0)) - 1)
            for k in (16, 64)]
    assert errs[1] > 1e-7
    assert errs[0] / errs[1] == pytest.approx(64, rel=0.2)


def test_gauss_rule_gaussian_moments():
    rule = verify.gauss_rule(30, fam.support(1.0), gaussian=True)
    # E Z^{2k} = (2k-1)!!
    for k, m in ((0, 1), (1, 1), (2, 3), (3, 15), (4, 105)):
        assert rule.integrate(lambda z: z ** (2 * k)) == pytest.approx(m, rel=1e-12)
    with pytest.raises(DomainError):
        verify.gauss_rule(10, fam.support(1.0))


@pytest.mark.parametrize("q", [-0.5, 0.0, 0.3, 0.9])
def test_density_rule_normalizes_f_n(q):
    rule = verify.density_rule(64, q)
    assert np.dot(rule.weights, meas.density_n(rule.nodes, q)) == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(rule.nodes) > 0)


def test_density_rule_at_q_one_is_gaussian_in_dx():
    rule = verify.density_rule(400, 1.0, loc=0.5, scale=2.0)
    assert rule.order == verify.MAX_HERMITE_ORDER
    g = np.exp(-((rule.nodes - 0.5) ** 2) / 8) / math.sqrt(8 * math.pi)
    assert np.dot(rule.weights, g) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("kw", [
    dict(nodes=np.array([0.0, 1.0]), weights=np.array([1.0]), order=2),
    dict(nodes=np.array([1.0, 0.0]), weights=np.array([1.0, 1.0]), order=2),
    dict(nodes=np.array([0.0, 1.0]), weights=np.array([1.0, -1.0]), order=2),
    dict(nodes=np.array([0.0]), weights=np.array([1.0]), order=0),
])
def test_quadrature_rule_invariants(kw):
    with pytest.raises(ValueError):
        verify.QuadratureRule(**kw)


def test_rule_order_validation():
    with pytest.raises(DomainError):
        verify.density_rule(0, 0.5)
    with pytest.raises(DomainError):
        verify.gauss_rule(2.5, fam.support(0.5))


# -- orthogonality ----------------------------------------------------------------------

@pytest.mark.parametrize("spec", [
    PolySpec(Family.QHermiteH, q=0.5),
    PolySpec(Family.QHermiteH, q=-0.4),
    PolySpec(Family.BigQHermiteH, q=0.3, a=-0.5),
    PolySpec(Family.ASC_P, q=0.7, y=0.4, rho=0.8),
    PolySpec(Family.ASC_P, q=1.0, y=0.4, rho=0.5),
    PolySpec(Family.HermiteProb),
], ids=lambda s: s.family.value)
def test_gram_matrix_is_diagonal_with_stated_norms(spec):
    g = verify.gram_matrix(spec, 8)
    norms = np.array([verify.orthogonality_norm(spec, k) for k in range(9)])
    scaled = g / np.sqrt(np.outer(norms, norms))
    np.testing.assert_allclose(scaled, np.eye(9), atol=1e-9)
    assert np.allclose(g, g.T)


def test_orthogonality_norm_values():
    assert verify.orthogonality_norm(PolySpec(Family.QHermiteH, q=0.5), 3) == pytest.approx(q_factorial(3, 0.5))
    spec = PolySpec(Family.ASC_P, q=0.5, y=0.1, rho=0.6)
    assert verify.orthogonality_norm(spec, 2) == pytest.approx((1 - 0.36) * (1 - 0.18) * (1 + 0.5))
    assert verify.orthogonality_norm(PolySpec(Family.HermiteProb), 4) == 24


def test_check_orthogonality_and_error():
    spec = PolySpec(Family.BigQHermiteH, q=0.3, a=0.3)
    assert abs(verify.check_orthogonality(spec, 2, 5)) < 1e-10
    assert verify.orthogonality_error(spec, 4, 4) < 1e-10


@pytest.mark.parametrize("spec", [
    PolySpec(Family.ASC_P, q=0.5, y=0.1, rho=1.0),
    PolySpec(Family.ASC_P, q=0.0, y=5.0, rho=0.5),
    PolySpec(Family.BigQHermiteH, q=0.0, a=1.5),
    PolySpec(Family.ChebyshevU),
])
def test_orthogonality_outside_regime_is_rejected(spec):
    with pytest.raises(DomainError):
        verify.gram_matrix(spec, 3)


# -- grids and reports ------------------------------------------------------------------

def test_grid_spec_resolution_and_axis():
    g = GridSpec(points=3).resolve({"q_values": (0.0,), "span": 0.5, "points": 9})
    assert g.q_values == (0.0,) and g.points == 3
    np.testing.assert_allclose(g.axis(0.0), [-1.0, 0.0, 1.0])
    assert np.array_equal(GridSpec(span=1.0, points=1).axis(0.5), [0.0])
    np.testing.assert_allclose(GridSpec(span=1.0, points=2).axis(1.0), [-2.0, 2.0])


@pytest.mark.parametrize("kw", [{"span": 0.0}, {"span": 1.5}, {"points": 0}])
def test_grid_spec_validation(kw):
    with pytest.raises(DomainError):
        GridSpec(**kw).resolve({})


def _report(**kw):
    base = dict(identity_id="x", grid_size=1, max_residual=1e-9, mean_residual=1e-9, positivity_violations=0,
                tolerance=1e-8, passed=True, worst_point=())
    base.update(kw)
    return IdentityReport(**base)


def test_identity_report_invariants():
    assert _report().passed
    assert not _report(max_residual=1e-7, passed=False).passed
    assert not _report(positivity_violations=2, passed=False).passed
    with pytest.raises(ValueError):
        _report(max_residual=1e-7)
    with pytest.raises(ValueError):
        _report(positivity_violations=1)
    with pytest.raises(ValueError):
        _report(tolerance=0.0)
    with pytest.raises(ValueError):
        _report(mean_residual=-1.0)


def test_unknown_identity_and_bad_inputs():
    with pytest.raises(DomainError):
        verify.run_identity_suite("no-such")
    with pytest.raises(DomainError):
        verify.run_identity_suite("mehler", GridSpec(q_values=(1.5,)))
    with pytest.raises(DomainError):
        verify.run_identity_suite("mehler", tolerances=-1.0)


SMALL = GridSpec(q_values=(0.0, 0.5), points=3, rho_values=(0.4,))


def test_tolerances_number_or_mapping():
    r = verify.run_identity_suite("mehler", SMALL)
    assert r.tolerance == CATALOG["mehler"].tolerance and r.passed
    assert verify.run_identity_suite("mehler", SMALL, tolerances=1e-3).tolerance == 1e-3
    assert verify.run_identity_suite("mehler", SMALL, tolerances={"mehler": 2e-5}).tolerance == 2e-5
    assert verify.run_identity_suite("mehler", SMALL, tolerances={"thm-i": 2e-5}).tolerance == 1e-8


def test_tiny_tolerance_fails_cleanly():
    r = verify.run_identity_suite("thm-i", SMALL, tolerances=1e-300)
    assert not r.passed and r.max_residual > 1e-300


def test_report_consistency_and_determinism():
    a = verify.run_identity_suite("thm-iii", SMALL)
    b = verify.run_identity_suite("thm-iii", SMALL)
    assert a == b
    assert a.grid_size == len(a.points) == 2 * (1 + 1) * 27
    assert a.max_residual == max(p.residual for p in a.points)
    assert a.worst_point == max(a.points, key=lambda p: p.residual).params
    assert a.mean_residual <= a.max_residual


@pytest.mark.parametrize("identity_id", ["bigH", "lemma-iii", "qnotation"])
def test_exact_identities_have_zero_residual(identity_id):
    r = verify.run_identity_suite(identity_id)
    assert r.passed and r.max_residual == 0.0 and r.residual_kind == "exact"


# -- writers -----------------------------------------------------------------------------

def test_json_report_round_trip(tmp_path):
    reports = verify.run_all(SMALL, ids=["mehler", "phi-2"])
    doc = json.loads(verify.report_to_json(reports))
    assert doc["passed"] is True
    assert [d["identity_id"] for d in doc["reports"]] == ["mehler", "phi-2"]
    d = doc["reports"][0]
    assert len(d["points"]) == d["grid_size"] == reports[0].grid_size
    assert d["statement"] == CATALOG["mehler"].statement
    path = tmp_path / "r.json"
    verify.write_reports(reports, str(path))
    assert json.loads(path.read_text()) == doc
    slim = json.loads(verify.report_to_json(reports[0], include_points=False))
    assert "points" not in slim["reports"][0]


def test_csv_report_layout(tmp_path):
    reports = verify.run_all(SMALL, ids=["mehler", "lancaster"])
    path = tmp_path / "r.csv"
    verify.write_reports(reports, str(path))
    text = path.read_text()
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    footer = [ln for ln in text.splitlines() if ln.startswith("#")]
    rows = list(csv.DictReader(io.StringIO("\n".join(body))))
    assert rows[0].keys() >= {"identity", "q", "rho", "lhs", "rhs", "residual", "positive"}
    assert len(rows) == sum(r.grid_size for r in reports)
    assert len(footer) == 2 and footer[0].startswith("# mehler: passed=True")
    assert float(rows[0]["residual"]) == reports[0].points[0].residual


# -- catalog coverage --------------------------------------------------------------------

def test_every_identity_has_a_known_topic_and_kind():
    assert {i.topic for i in CATALOG.values()} == set(TOPICS)
    assert {i.kind for i in CATALOG.values()} <= {"absolute", "scaled", "relative", "exact"}
    for key, ident in CATALOG.items():
        assert ident.identity_id == key and ident.tolerance > 0 and ident.statement


def test_point_results_carry_parameters():
    r = verify.run_identity_suite("nice")
    assert all(isinstance(p, PointResult) for p in r.points)
    names = {k for k, _ in r.points[0].params}
    assert names == {"q", "rho1", "rho2", "x", "y", "z"}
