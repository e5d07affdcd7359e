"""
Equations of motion, conserved-quantity search and numeric oracles
"""
import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, combinations_with_replacement

import sympy as sp

from . import linalg
from .brackets import BracketTable
from .dirac import Transformation
from .modelspec import ConstraintDecl, Origin
from .symexpr import (
    ExprError,
    PoleError,
    SymbolKind,
    differentiate,
    eval_at,
    monomial,
    normalize_sign,
    split_coefficients,
)

log = logging.getLogger(__name__)

ORACLE_CHECKS = ("inverse", "antisymmetry", "jacobi", "determinant")
SAMPLE_BOUND = 97
RESAMPLE_BUDGET = 50

__all__ = [
    "AnsatzTooLargeError",
    "DynamicsError",
    "MotionSystem",
    "OracleError",
    "OracleResult",
    "choose_conserved",
    "conserved_search",
    "hamilton_equations",
    "numeric_oracle",
    "promote_to_constraint",
    "span_contains",
    "symmetry_report",
    "total_derivative",
]


class DynamicsError(Exception):
    pass


class AnsatzTooLargeError(DynamicsError):
    pass


class OracleError(DynamicsError):
    pass


@dataclass(frozen=True)
class MotionSystem:
    basis: tuple
    rhs: dict
    hamiltonian: object

    def as_strings(self):
        return {z: str(v) for z, v in self.rhs.items()}


def hamilton_equations(bt: BracketTable, hamiltonian):
    """z' = {z, H} under the table's bilinear extension"""
    table = hamiltonian.table
    rhs = {z: bt.apply(table.gen(z), hamiltonian) for z in bt.basis}
    return MotionSystem(tuple(bt.basis), rhs, hamiltonian)


def total_derivative(q, ms):
    total = q.table.zero()
    for z in ms.basis:
        dq = differentiate(q, z)
        if not dq.is_zero() and not ms.rhs[z].is_zero():
            total = total + dq * ms.rhs[z]
    return total


def _ansatz(basis, degree, cap):
    n = len(basis)
    exponents = []
    for d in range(1, degree + 1):
        for combo in combinations_with_replacement(range(n), d):
            exps = [0] * n
            for i in combo:
                exps[i] += 1
            exponents.append(tuple(exps))
            if len(exponents) > cap:
                raise AnsatzTooLargeError(f"degree {degree} ansatz over {n} symbols exceeds {cap} coefficients")
    return exponents


def conserved_search(ms, degree, cap=200):
    """Basis of polynomials of degree 1..degree in the basis symbols with vanishing time derivative"""
    if degree < 1:
        raise DynamicsError("degree must be at least 1")
    basis = list(ms.basis)
    table = ms.hamiltonian.table
    exponents = _ansatz(basis, degree, cap)
    monomials = [monomial(table, basis, e) for e in exponents]

    # clear the denominators of the equations of motion
    common = table.one()
    seen = set()
    for value in ms.rhs.values():
        denom = value.denominator()
        if not denom.is_parameter_only() and str(denom) not in seen:
            seen.add(str(denom))
            common = common * denom

    columns = []
    for m in monomials:
        try:
            columns.append(split_coefficients(total_derivative(m, ms) * common, basis))
        except ExprError as exc:
            raise DynamicsError(f"time derivative of {m} is not polynomial in the basis: {exc}") from exc
    keys = sorted({k for column in columns for k in column})
    if not keys:
        found = [normalize_sign(m) for m in monomials]
        log.info("every ansatz monomial is conserved (%d)", len(found))
        return found
    zero = table.zero()
    matrix = [[column.get(k, zero) for column in columns] for k in keys]
    found = []
    for vector, _ in linalg.kernel(matrix):
        q = zero
        for coefficient, m in zip(vector, monomials):
            if not coefficient.is_zero():
                q = q + coefficient * m
        if q.is_zero():
            continue
        if not total_derivative(q, ms).is_zero():
            log.warning("discarding %s: its time derivative does not vanish", q)
            continue
        found.append(normalize_sign(q))
    log.info("conserved search of degree %d over %d symbols: %d quantities", degree, len(basis), len(found))
    return found


def span_contains(basis, target):
    """Coefficients expressing target in the parameter-field span of basis, or None"""
    if target.is_zero():
        return [target.table.zero() for _ in basis]
    if not basis:
        return None
    table = target.table
    names = set(target.free_symbols())
    for b in basis:
        names |= b.free_symbols()
    variables = sorted((n for n in names if not table.is_parameter(n)), key=table.position)
    try:
        columns = [split_coefficients(b, variables) for b in basis] + [split_coefficients(-target, variables)]
    except ExprError:
        return None
    keys = sorted({k for column in columns for k in column})
    zero = table.zero()
    matrix = [[column.get(k, zero) for column in columns] for k in keys]
    for vector, _ in linalg.kernel(matrix):
        scale = vector[-1]
        if not scale.is_zero():
            return [v / scale for v in vector[:-1]]
    return None


def choose_conserved(found, candidates=(), promote=None):
    """Quantity to promote: an explicit choice, a candidate lying in the span, else the lowest degree"""
    if promote is not None:
        for c in candidates:
            if c.label == promote:
                if span_contains(found, c.expr) is None:
                    raise DynamicsError(f"{promote} is not conserved within the searched degree")
                return c.expr
        try:
            return found[int(promote)]
        except (ValueError, IndexError):
            raise DynamicsError(f"no conserved quantity matches '{promote}'") from None
    for c in candidates:
        if span_contains(found, c.expr) is not None:
            log.info("promoting %s, which lies in the conserved span", c.label)
            return c.expr
    if not found:
        return None
    return min(found, key=lambda q: q.total_degree())


def promote_to_constraint(q, label=None, level=None, model=None):
    """Q - kappa with an integration constant kappa not yet used by q or the model's chain"""
    if q.is_zero():
        raise DynamicsError("cannot promote the zero quantity")
    table = q.table
    taken = set(q.free_symbols())
    if model is not None:
        for c in model.chain:
            taken |= c.expr.free_symbols()
            if c.label.startswith("Gamma"):
                taken.add("kappa" + c.label[len("Gamma"):])
    kappa = table.fresh("kappa", SymbolKind.INTEGRATION_CONSTANT, taken=taken)
    label = label or f"Gamma{kappa.name[len('kappa'):]}"
    return ConstraintDecl(label, q - table.gen(kappa.name), Origin.EOM_DERIVED, level=level)


def symmetry_report(mode, m):
    """delta xi = eps * nu and the induced change of the potential"""
    variations = {v: mode.component(v) for v in mode.variables}
    delta = m.potential.table.zero()
    for v, component in variations.items():
        if not component.is_zero():
            delta = delta + component * differentiate(m.potential, v)
    return Transformation("zero-mode", variations, delta)


# ---------------------------------------------------------------------------
# Numeric oracles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    check: str
    passed: bool
    trials: int
    seed: int
    witness: dict = None

    def to_dict(self):
        out = {"check": self.check, "passed": self.passed, "trials": self.trials, "seed": self.seed}
        if self.witness is not None:
            out["witness"] = {k: str(v) for k, v in self.witness.items()}
        return out


def _sample(names, rng):
    point = {}
    for name in names:
        denominator = 0
        while denominator == 0:
            denominator = rng.randint(-SAMPLE_BOUND, SAMPLE_BOUND)
        point[name] = Fraction(rng.randint(-SAMPLE_BOUND, SAMPLE_BOUND), denominator)
    return point


def _matrix_symbols(*matrices):
    names = set()
    for matrix in matrices:
        for row in matrix:
            for entry in row:
                names |= entry.free_symbols()
    return names


def _evaluate(matrix, point):
    return [[eval_at(e, point) for e in row] for row in matrix]


def _check_inverse(subject, point):
    f, inverse = (_evaluate(m, point) for m in subject)
    n = len(f)
    for i in range(n):
        for j in range(n):
            value = sum(f[i][k] * inverse[k][j] for k in range(n))
            if value != (1 if i == j else 0):
                return False
    return True


def _check_antisymmetry(subject, point):
    matrix = subject.entries if isinstance(subject, BracketTable) else subject
    values = _evaluate(matrix, point)
    n = len(values)
    return all(values[i][j] == -values[j][i] for i in range(n) for j in range(n))


def _check_determinant(subject, point):
    matrix, det = subject
    numeric = sp.Matrix([[sp.Rational(v.numerator, v.denominator) for v in row] for row in _evaluate(matrix, point)])
    expected = eval_at(det, point)
    return numeric.det(method="lu") == sp.Rational(expected.numerator, expected.denominator)


class _JacobiSubject:
    """Table entries and their derivatives, differentiated once for all trials"""

    def __init__(self, bt):
        self.bt = bt
        self.derivatives = {
            (j, k, w): differentiate(bt.entries[j][k], w)
            for j in range(len(bt.basis))
            for k in range(j + 1, len(bt.basis))
            for w in bt.basis
        }

    def symbols(self):
        names = _matrix_symbols(self.bt.entries)
        for d in self.derivatives.values():
            names |= d.free_symbols()
        return names

    def check(self, point):
        basis = self.bt.basis
        n = len(basis)
        entries = _evaluate(self.bt.entries, point)
        derivs = {key: eval_at(d, point) for key, d in self.derivatives.items() if not d.is_zero()}

        def outer(i, j, k):
            # {z_i, {z_j, z_k}} = sum_w {z_i, w} d{z_j, z_k}/dw
            sign = 1
            if j > k:
                j, k, sign = k, j, -1
            if j == k:
                return Fraction(0)
            return sign * sum(entries[i][w] * derivs.get((j, k, basis[w]), 0) for w in range(n))

        for i, j, k in combinations(range(n), 3):
            if outer(i, j, k) + outer(j, k, i) + outer(k, i, j) != 0:
                return False
        return True


def numeric_oracle(check, subject, trials=10, seed=0):
    """Evaluate an identity at seeded random rational points, skipping poles"""
    if check not in ORACLE_CHECKS:
        raise DynamicsError(f"unknown oracle check '{check}'")
    if trials < 1:
        raise DynamicsError("trials must be at least 1")
    if check == "jacobi":
        jacobi = _JacobiSubject(subject)
        names, test = jacobi.symbols(), jacobi.check
    elif check == "antisymmetry":
        matrix = subject.entries if isinstance(subject, BracketTable) else subject
        names, test = _matrix_symbols(matrix), lambda p: _check_antisymmetry(subject, p)
    elif check == "inverse":
        names, test = _matrix_symbols(*subject), lambda p: _check_inverse(subject, p)
    else:
        names = _matrix_symbols(subject[0]) | subject[1].free_symbols()
        test = lambda p: _check_determinant(subject, p)
    names = sorted(names)

    for trial in range(trials):
        for attempt in range(RESAMPLE_BUDGET):
            rng = random.Random(f"{seed}:{trial}:{attempt}")
            point = _sample(names, rng)
            try:
                passed = test(point)
            except PoleError:
                continue
            break
        else:
            raise OracleError(f"{check}: no regular point found in {RESAMPLE_BUDGET} samples")
        if not passed:
            log.warning("%s oracle failed at %s", check, point)
            return OracleResult(check, False, trial + 1, seed, point)
    log.debug("%s oracle passed %d trials (seed %d)", check, trials, seed)
    return OracleResult(check, True, trials, seed)
