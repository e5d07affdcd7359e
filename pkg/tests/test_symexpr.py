from fractions import Fraction

import pytest

from bw_workbench.symexpr import (
    DivisionByZeroError,
    ExprError,
    ExprSyntaxError,
    PoleError,
    RewriteRule,
    RewriteSystem,
    SymbolTable,
    UndeclaredSymbolError,
    arith,
    differentiate,
    eval_at,
    is_multiple_of,
    linear_coefficients,
    normalize_sign,
    parse_expr,
    proportional,
    quadratic_coefficients,
    reduce_by,
    reduce_mod,
    split_coefficients,
    substitute,
)


def test_parse_prints_canonical_form(table):
    e = parse_expr("b*y + a*p_x - b*x", table)
    assert str(e) == "a*p_x - b*x + b*y"


def test_equal_expressions_compare_equal(table):
    left = parse_expr("(x + y)^2", table)
    right = parse_expr("x^2 + 2*x*y + y^2", table)
    assert left == right
    assert hash(left) == hash(right)


def test_unary_minus_binds_looser_than_power(table):
    x = table.gen("x")
    assert parse_expr("-x^2", table) == -(x * x)
    assert parse_expr("x^-2", table) == 1 / (x * x)


def test_indexed_names_map_to_flat_symbols():
    t = SymbolTable()
    t.declare("q_3", "coordinate")
    assert parse_expr("q[3]^2", t) == t.gen("q_3") ** 2


def test_rational_arithmetic_is_exact(table):
    e = parse_expr("x/(x^2 - y^2) - 1/(2*(x - y))", table)
    expected = parse_expr("1/(2*(x + y))", table)
    assert e == expected


def test_syntax_error_reports_position(table):
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr("x + * y", table)
    assert info.value.line == 1
    assert info.value.column == 5


def test_undeclared_identifier(table):
    with pytest.raises(UndeclaredSymbolError):
        parse_expr("x + z", table)


def test_division_by_zero(table):
    with pytest.raises(DivisionByZeroError):
        parse_expr("x/(y - y)", table)
    with pytest.raises(DivisionByZeroError):
        table.gen("x") / table.zero()


def test_arith_dispatch(table):
    x, y = table.gen("x"), table.gen("y")
    assert arith("add", x, y) == x + y
    assert arith("pow-int", x, 3) == x * x * x
    assert arith("div", x, y) * y == x


def test_differentiate_quotient(table):
    e = parse_expr("x^2*y/(1 + x)", table)
    expected = parse_expr("(x^2*y + 2*x*y)/(1 + x)^2", table)
    assert differentiate(e, "x") == expected
    assert differentiate(e, "p_x").is_zero()


def test_differentiation_matches_finite_differences(table, rng, random_expr):
    h = Fraction(1, 10 ** 5)
    for _ in range(200):
        e = random_expr()
        point = {
            "x": Fraction(rng.randint(-20, 20), 10),
            "y": Fraction(rng.randint(-20, 20), 10),
            "a": Fraction(rng.randint(-20, 20), 10),
        }
        exact = eval_at(differentiate(e, "x"), point)
        forward = dict(point, x=point["x"] + h)
        backward = dict(point, x=point["x"] - h)
        numeric = (eval_at(e, forward) - eval_at(e, backward)) / (2 * h)
        assert abs(float(numeric - exact)) <= 1e-6 * max(1.0, abs(float(exact)))


def test_substitution_is_simultaneous(table):
    x, y = table.gen("x"), table.gen("y")
    assert substitute(x - 2 * y, {"x": y, "y": x}) == y - 2 * x
    assert substitute(x * y, {"x": y + 1}) == (y + 1) * y


def test_substitution_into_a_pole(table):
    e = parse_expr("1/(x - y)", table)
    with pytest.raises(PoleError):
        substitute(e, {"x": table.gen("y")})


def test_eval_at_rational_point(table):
    e = parse_expr("(a*x + 1)/y", table)
    assert eval_at(e, {"a": 2, "x": Fraction(1, 3), "y": 5}) == Fraction(1, 3)
    with pytest.raises(PoleError):
        eval_at(e, {"a": 1, "x": 1, "y": 0})


def test_rewrite_lowers_degree():
    t = SymbolTable()
    for name in ("m", "c"):
        t.declare(name, "parameter")
    for name in ("p0", "p1"):
        t.declare(name, "momentum")
    rule = RewriteRule("p0", 2, parse_expr("p1^2 + m^2*c^2", t))
    rw = RewriteSystem((rule,), {"p0": 1})
    assert reduce_mod(parse_expr("p0^3 - p0*p1^2", t), rw) == parse_expr("m^2*c^2*p0", t)
    assert reduce_mod(parse_expr("p0^2 - p1^2 - m^2*c^2", t), rw).is_zero()
    assert str(rule) == "p0^2 -> m^2*c^2 + p1^2"


def test_split_and_linear_coefficients(table):
    e = parse_expr("a*p_x - b*x + b*y", table)
    parts = split_coefficients(e, ["x", "p_x"])
    assert parts[(1, 0)] == -table.gen("b")
    assert parts[(0, 1)] == table.gen("a")
    assert parts[(0, 0)] == table.gen("b") * table.gen("y")
    c1, c0 = linear_coefficients(e, "y")
    assert c1 == table.gen("b")
    assert linear_coefficients(parse_expr("x^2 + y", table), "x") is None
    assert quadratic_coefficients(parse_expr("x^2 + y", table), "x") is not None


def test_multiples_and_proportionality(table):
    theta = parse_expr("a*p_x - b*x + b*y", table)
    assert is_multiple_of(parse_expr("4*x*(a*p_x - b*x + b*y)", table), theta)
    assert not is_multiple_of(theta, parse_expr("x", table))
    assert proportional(theta * table.gen("a"), theta)
    assert not proportional(theta * table.gen("x"), theta)


def test_normalize_sign(table):
    e = parse_expr("-a*p_x + b*x - b*y", table)
    assert normalize_sign(e) == -e
    assert normalize_sign(-e) == -e


def test_reduce_by_relation(table):
    e = parse_expr("p_x^2 - a*x^2 + a", table)
    relation = parse_expr("(x^2 - 1)/2", table)
    assert reduce_by(e, relation, ["x", "y", "p_x"]) == parse_expr("p_x^2", table)


def test_fresh_symbols_lift_existing_expressions(table):
    theta = parse_expr("a*p_x - b*x + b*y", table)
    table.freeze()
    kappa = table.fresh("kappa", "integration-constant")
    gamma = theta - table.gen(kappa.name)
    assert kappa.name == "kappa1"
    assert gamma + table.gen("kappa1") == theta
    assert table.is_parameter("kappa1")


def test_fresh_names_are_stable(table):
    assert table.fresh("eta", "multiplier").name == "eta1"
    assert table.fresh("eta", "multiplier").name == "eta1"
    assert table.fresh("eta", "multiplier", taken={"eta1"}).name == "eta2"
    assert table.fresh("eta", "integration-constant").name == "eta3"
    with pytest.raises(ExprError):
        table.fresh("eta", "multiplier", name="eta1")


def _random_tree(table, rng, depth):
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.4:
            return table.const(Fraction(rng.randint(-5, 5), rng.randint(1, 3)))
        return table.gen(rng.choice(["x", "y", "a", "b", "p_x"]))
    op = rng.choice(["add", "sub", "mul", "div", "pow-int"])
    lhs = _random_tree(table, rng, depth - 1)
    if op == "pow-int":
        return arith(op, lhs, rng.randint(0, 2))
    rhs = _random_tree(table, rng, depth - 1)
    if op == "div" and rhs.is_zero():
        rhs = rhs + 1
    return arith(op, lhs, rhs)


def test_normal_form_is_idempotent(table, rng):
    for _ in range(1000):
        e = _random_tree(table, rng, 3)
        again = parse_expr(str(e), table)
        assert again == e
        assert str(again) == str(e)
        if not e.is_zero():
            assert normalize_sign(normalize_sign(e)) == normalize_sign(e)


def test_evaluation_is_a_ring_homomorphism(table, rng, random_expr):
    for _ in range(100):
        e, f = random_expr(), random_expr()
        point = {name: Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for name in ("x", "y", "a")}
        assert eval_at(e + f, point) == eval_at(e, point) + eval_at(f, point)
        assert eval_at(e * f, point) == eval_at(e, point) * eval_at(f, point)
        assert eval_at(-e, point) == -eval_at(e, point)


def test_substitution_is_a_homomorphism(table, random_expr):
    binding = {"x": parse_expr("y + a", table), "y": parse_expr("2*a", table)}
    for _ in range(100):
        e, f = random_expr(), random_expr()
        assert substitute(e + f, binding) == substitute(e, binding) + substitute(f, binding)
        assert substitute(e * f, binding) == substitute(e, binding) * substitute(f, binding)
