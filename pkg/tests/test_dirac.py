import pytest

from bw_workbench.dirac import (
    ConstraintClass,
    DiracLevelLimitError,
    InconsistentSystemError,
    LegendreError,
    classify,
    consistency_chain,
    dirac_bracket,
    dirac_bracket_table,
    dirac_matrix,
    legendre_scan,
    phase_space_of,
    poisson,
    run_dirac,
)
from bw_workbench.dynamics import numeric_oracle
from bw_workbench.linalg import determinant
from bw_workbench.modelspec import Origin, parse_model
from bw_workbench.symexpr import parse_expr, proportional
from bw_workbench.symplectic import Verdict, run_modified_bw


def _expr(m, text):
    return parse_expr(text, m.symbols)


def _toy_chain(m):
    ps = phase_space_of(m)
    hamiltonian, primaries = legendre_scan(m.lagrangian, ps)
    return ps, hamiltonian, consistency_chain(hamiltonian, primaries, ps, m.rewrites)


def test_poisson_bracket_signs(load):
    m = load("relativistic")
    ps = phase_space_of(m)
    assert poisson(_expr(m, "x1"), _expr(m, "p1"), ps) == 1
    assert poisson(_expr(m, "x0"), _expr(m, "p0"), ps) == -1
    assert poisson(_expr(m, "x1*p2"), _expr(m, "x2*p1"), ps) == _expr(m, "x2*p2 - x1*p1")


def test_legendre_scan_of_toy(load):
    m = load("toy")
    ps = phase_space_of(m)
    hamiltonian, primaries = legendre_scan(m.lagrangian, ps)
    assert hamiltonian == _expr(m, "p_x^2/2 - b*(x - y)^2/2")
    assert [p.label for p in primaries] == ["phi1"]
    assert primaries[0].expr == _expr(m, "p_y + a*x")
    assert primaries[0].solved_for == "p_y"
    assert primaries[0].origin is Origin.PRIMARY


def test_legendre_rejects_velocity_in_denominator():
    m = parse_model("[phase_space]\nx : p\n\n[lagrangian]\n1/d_x\n", name="bad")
    with pytest.raises(LegendreError):
        legendre_scan(m.lagrangian, phase_space_of(m))


def test_toy_consistency_chain(load):
    m = load("toy")
    _, _, chain = _toy_chain(m)
    assert chain.labels() == ["phi1", "chi1", "chi2"]
    assert chain.get("chi1").expr == _expr(m, "a*p_x - b*x + b*y")
    assert chain.get("chi2").expr == _expr(m, "-b*p_x + a*b*x - a*b*y")
    assert chain.get("chi2").level == 2
    assert chain.notes == ("chi1: u1 = 0",)


def test_toy_constraint_matrix(load):
    m = load("toy")
    ps, _, chain = _toy_chain(m)
    c = dirac_matrix(list(chain), ps)
    assert c.labels() == ["phi1", "chi1", "chi2"]
    assert c.entries[0][1] == _expr(m, "a^2 - b")
    assert c.entries[0][2].is_zero()
    assert c.entries[1][2] == _expr(m, "b^2 - a^2*b")
    assert c.entries[2][1] == _expr(m, "a^2*b - b^2")


def test_toy_classification(load):
    m = load("toy")
    ps, _, chain = _toy_chain(m)
    result = classify(chain, ps, m.rewrites)
    assert result.kinds == {
        "phi1": ConstraintClass.SECOND,
        "chi1": ConstraintClass.SECOND,
        "chi2": ConstraintClass.FIRST,
    }
    assert [c.label for c in result.second_class] == ["phi1", "chi1"]
    assert result.warnings == []


def test_toy_dirac_brackets(load):
    m = load("toy")
    ps, _, chain = _toy_chain(m)
    second = classify(chain, ps, m.rewrites).second_class
    bt = dirac_bracket_table(second, ps)
    assert bt.basis == ("x", "y", "p_x", "p_y")
    assert bt.bracket("x", "y") == _expr(m, "a/(a^2 - b)")
    assert bt.bracket("x", "p_x") == _expr(m, "-b/(a^2 - b)")
    assert bt.bracket("y", "p_x") == _expr(m, "-b/(a^2 - b)")
    assert bt.bracket("y", "p_y") == _expr(m, "a^2/(a^2 - b)")


def test_run_dirac_on_toy(load):
    m = load("toy")
    report = run_dirac(m)
    assert report.algorithm == "dirac"
    assert report.verdict is Verdict.SYMMETRY
    assert report.hamiltonian == _expr(m, "(b - a^2)*p_x^2/(2*b)")
    assert report.transformation["x"] == _expr(m, "-b")
    assert report.transformation["y"] == _expr(m, "-b")
    assert report.transformation["p_x"].is_zero()
    assert report.transformation["p_y"] == _expr(m, "a*b")
    assert report.extras["multiplier_fixes"] == ["chi1: u1 = 0"]
    assert [g.generator for g in report.extras["generators"]] == ["chi2"]


def test_dirac_matches_symplectic_on_toy(load):
    m = load("toy")
    dirac = run_dirac(m)
    symplectic = run_modified_bw(load("toy"))
    for a, b in (("x", "y"), ("x", "p_x"), ("y", "p_x")):
        assert str(dirac.brackets.bracket(a, b)) == str(symplectic.brackets.bracket(a, b))


def test_hypersphere_chain_is_second_class(load):
    m = load("hypersphere")
    report = run_dirac(m)
    assert report.verdict is Verdict.BRACKETS
    assert report.chain.labels() == ["phi1", "chi1", "chi2", "chi3"]
    assert report.chain.get("phi1").expr == _expr(m, "pi")
    assert report.chain.get("chi1").expr == _expr(m, "(q_1^2 + q_2^2 + q_3^2 - 1)/2")
    assert report.chain.get("chi2").expr == _expr(m, "q_1*p_1 + q_2*p_2 + q_3*p_3")
    assert all(kind is ConstraintClass.SECOND for _, kind in report.extras["classification"])


def test_hypersphere_dirac_brackets_equal_symplectic(load):
    dirac = run_dirac(load("hypersphere"))
    symplectic = run_modified_bw(load("hypersphere"))
    names = ["q_1", "q_2", "q_3", "p_1", "p_2", "p_3"]
    for a in names:
        for b in names:
            assert str(dirac.brackets.bracket(a, b)) == str(symplectic.brackets.bracket(a, b))


def test_relativistic_first_class_before_gauge(load):
    m = load("relativistic")
    report = run_dirac(m)
    assert report.extras["classification_before_gauge"] == [("phi", ConstraintClass.FIRST)]
    assert report.extras["classification"] == [("phi", ConstraintClass.SECOND), ("Sigma", ConstraintClass.SECOND)]
    generator = report.extras["generators"][0]
    assert generator.variations["x0"] == _expr(m, "-2*p0")
    assert generator.variations["x1"] == _expr(m, "-2*p1")
    assert generator.variations["p0"].is_zero()
    assert report.verdict is Verdict.BRACKETS
    assert str(report.hamiltonian) == "c*p0"


def test_relativistic_dirac_brackets(load):
    m = load("relativistic")
    dirac = run_dirac(m)
    symplectic = run_modified_bw(load("relativistic"))
    names = ["x0", "x1", "x2", "x3", "p0", "p1", "p2", "p3"]
    for a in names:
        for b in names:
            assert str(dirac.brackets.bracket(a, b)) == str(symplectic.brackets.bracket(a, b))


def test_inconsistent_hamiltonian():
    text = "[constraints]\nphi : p ; primary\n\n[phase_space]\nx : p\n\n[hamiltonian]\nx\n"
    m = parse_model(text, name="drift")
    report = run_dirac(m)
    assert report.verdict is Verdict.INCONSISTENT
    with pytest.raises(InconsistentSystemError):
        ps = phase_space_of(m)
        primaries = [c for c in m.declared if c.origin is Origin.PRIMARY]
        consistency_chain(m.hamiltonian, primaries, ps)


def test_chain_level_limit(load):
    m = load("hypersphere")
    ps = phase_space_of(m)
    hamiltonian, primaries = legendre_scan(m.lagrangian, ps)
    with pytest.raises(DiracLevelLimitError):
        consistency_chain(hamiltonian, primaries, ps, m.rewrites, max_level=1)
    report = run_dirac(m, max_level=1)
    assert report.verdict is Verdict.LEVEL_LIMIT


def test_toy_constraint_matrix_is_degenerate(load):
    m = load("toy")
    ps, _, chain = _toy_chain(m)
    assert determinant(dirac_matrix(list(chain), ps).entries).is_zero()


@pytest.mark.parametrize("name", ["toy", "hypersphere"])
def test_second_class_constraints_commute_under_dirac_brackets(load, name):
    m = load(name)
    ps = phase_space_of(m)
    hamiltonian, primaries = legendre_scan(m.lagrangian, ps)
    chain = consistency_chain(hamiltonian, primaries, ps, m.rewrites)
    second = classify(chain, ps, m.rewrites).second_class
    assert second
    for c in second:
        for z in ps.symbols():
            assert dirac_bracket(c.expr, m.symbols.gen(z), second, ps).is_zero(), (c.label, z)


@pytest.mark.parametrize("name", ["toy", "hypersphere"])
def test_dirac_brackets_satisfy_jacobi(load, name):
    report = run_dirac(load(name))
    result = numeric_oracle("jacobi", report.brackets, trials=3, seed=7)
    assert result.passed
    assert result.witness is None


def test_hypersphere_third_constraint(load):
    m = load("hypersphere")
    chi3 = run_dirac(m).chain.get("chi3").expr
    expected = _expr(m, "p_1^2 + p_2^2 + p_3^2 + lambda*(q_1^2 + q_2^2 + q_3^2)")
    assert proportional(chi3, expected)


def test_dirac_brackets_without_second_class_constraints():
    m = parse_model("[phase_space]\nx : p\ny : -p_y\n\n[hamiltonian]\np^2/2\n", name="free")
    ps = phase_space_of(m)
    bt = dirac_bracket_table([], ps)
    assert bt.basis == ("x", "y", "p", "p_y")
    assert bt.bracket("x", "p") == 1
    assert bt.bracket("y", "p_y") == -1
    assert bt.bracket("x", "y").is_zero()
