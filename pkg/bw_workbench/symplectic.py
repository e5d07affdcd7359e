"""
Symplectic analysis of first-order models.

Builds the symplectic matrix from the one-form, inspects its determinant and
zero-modes, turns zero-mode contractions into new constraints and iterates
until the matrix can be inverted or a symmetry is found.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import pandas as pd

from . import linalg
from .brackets import BracketTable
from .modelspec import (
    ConstraintChain,
    ConstraintDecl,
    Model,
    Origin,
    extend_with_constraint,
    without_constraints,
)
from .symexpr import (
    Expr,
    ExprError,
    PoleError,
    differentiate,
    gradient,
    is_multiple_of,
    linear_coefficients,
    normalize_sign,
    quadratic_coefficients,
    reduce_by,
    reduce_mod,
    substitute,
)

log = logging.getLogger(__name__)


class AnalysisError(Exception):
    """Base class for symplectic analysis errors"""


class SingularMatrixError(AnalysisError):
    pass


class UnsolvableConstraintError(AnalysisError):
    pass


class BranchRequiredError(AnalysisError):
    pass


class Verdict(str, Enum):
    BRACKETS = "brackets"
    SYMMETRY = "symmetry"
    LEVEL_LIMIT = "level-limit"
    INCONSISTENT = "inconsistent"

    @property
    def terminal(self):
        return self in (Verdict.BRACKETS, Verdict.SYMMETRY)


@dataclass(frozen=True)
class SymplecticMatrix:
    variables: tuple
    entries: tuple

    @property
    def dim(self):
        return len(self.variables)

    def entry(self, a, b):
        return self.entries[self.variables.index(a)][self.variables.index(b)]

    def as_strings(self):
        return [[str(e) for e in row] for row in self.entries]

    def to_frame(self):
        return pd.DataFrame(self.as_strings(), index=list(self.variables), columns=list(self.variables))


@dataclass(frozen=True)
class ZeroMode:
    variables: tuple
    components: tuple
    pivot: int

    def component(self, name):
        return self.components[self.variables.index(name)]

    def as_strings(self):
        return [str(c) for c in self.components]


@dataclass
class Candidate:
    mode: int
    contraction: Expr
    disposition: str
    label: Optional[str] = None


@dataclass
class LevelRecord:
    level: int
    variables: tuple
    one_form: dict
    potential: Expr
    matrix: SymplecticMatrix
    determinant: Expr
    zero_modes: list = field(default_factory=list)
    candidates: list = field(default_factory=list)
    injected: list = field(default_factory=list)
    note: str = ""
    warnings: list = field(default_factory=list)

    @property
    def singular(self):
        return self.determinant.is_zero()


@dataclass
class AnalysisReport:
    algorithm: str
    model: Model
    final_model: Model
    levels: list
    verdict: Verdict
    chain: ConstraintChain
    brackets: Optional[BracketTable] = None
    reduced_model: Optional[Model] = None
    hamiltonian: Optional[Expr] = None
    generator: Optional[ZeroMode] = None
    transformation: Optional[dict] = None
    delta_potential: Optional[Expr] = None
    equations: Optional[object] = None
    warnings: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def final_level(self):
        return self.levels[-1].level if self.levels else 0


# ---------------------------------------------------------------------------
# Matrix operations
# ---------------------------------------------------------------------------

def build_f(m):
    """f[a][b] = dA_b/dxi_a - dA_a/dxi_b"""
    variables = m.variables
    n = len(variables)
    grad = [[differentiate(m.one_form[beta], alpha) for alpha in variables] for beta in variables]
    rows = [[m.symbols.zero() for _ in range(n)] for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            value = grad[b][a] - grad[a][b]
            rows[a][b] = value
            rows[b][a] = -value
    return SymplecticMatrix(tuple(variables), tuple(tuple(r) for r in rows))


def determinant(f):
    if f.dim == 0:
        raise AnalysisError("empty symplectic matrix")
    return linalg.determinant(f.entries)


def kernel_basis(f):
    return [ZeroMode(f.variables, tuple(vector), pivot) for vector, pivot in linalg.kernel(f.entries)]


def invert(f):
    try:
        return tuple(tuple(row) for row in linalg.inverse(f.entries))
    except linalg.SingularMatrixError:
        raise SingularMatrixError("symplectic matrix is singular") from None


def contract(mode, m):
    """nu^T . dV/dxi"""
    total = m.symbols.zero()
    for component, slope in zip(mode.components, gradient(m.potential, mode.variables)):
        if not component.is_zero():
            total = total + component * slope
    return total


def _determinant_warnings(det):
    if det.is_constant():
        return []
    degenerate = [str(factor) for factor, _ in det.factors() if factor.is_parameter_only() and not factor.is_constant()]
    if not degenerate:
        return []
    message = "determinant vanishes for parameter values where " + " or ".join(f"{d} = 0" for d in degenerate)
    log.warning(message)
    return [message]


# ---------------------------------------------------------------------------
# Constraints
# ---------------------------------------------------------------------------

def _linear_solution(expr, symbol):
    parts = linear_coefficients(expr, symbol)
    if parts is None:
        return None
    c1, c0 = parts
    try:
        return -c0 / c1
    except ExprError:
        return None


def is_new_constraint(c, chain, rw):
    """False when c vanishes modulo the rewrites and the chain"""
    current = reduce_mod(c, rw)
    if current.is_zero():
        return False
    for member in chain:
        if not member.solved_for:
            continue
        solution = _linear_solution(member.expr, member.solved_for)
        if solution is None:
            if quadratic_coefficients(member.expr, member.solved_for) is not None and rw.rule_for(member.solved_for):
                continue
            raise UnsolvableConstraintError(f"{member.label} cannot be solved for '{member.solved_for}'")
        if member.solved_for not in current.free_symbols():
            continue
        try:
            current = reduce_mod(substitute(current, {member.solved_for: solution}), rw)
        except PoleError:
            continue
        if current.is_zero():
            return False
    for member in chain:
        if is_multiple_of(current, reduce_mod(member.expr, rw)):
            return False
    return True


def generate_constraint(mode, m, chain=None):
    """Contraction of a zero-mode with the potential gradient, or None when it adds nothing"""
    c = reduce_mod(contract(mode, m), m.rewrites)
    if c.is_zero():
        return None
    if not is_new_constraint(c, m.chain if chain is None else chain, m.rewrites):
        return None
    return normalize_sign(c)


def is_inconsistent(c):
    return not c.is_zero() and c.is_parameter_only()


def pick_linear_variable(expr, candidates):
    """Variable to solve for: numeric coefficient first, then parameter-only, then order"""
    best = None
    for position, name in enumerate(candidates):
        if name not in expr.free_symbols():
            continue
        parts = linear_coefficients(expr, name)
        if parts is None:
            continue
        coefficient = parts[0]
        rank = 0 if coefficient.is_constant() else 1 if coefficient.is_parameter_only() else 2
        if best is None or (rank, position) < best[0]:
            best = ((rank, position), name, -parts[1] / coefficient)
    return None if best is None else (best[1], best[2])


def _solve(decl, expr, rw):
    symbol = decl.solved_for
    solution = _linear_solution(expr, symbol)
    if solution is not None:
        return solution
    if quadratic_coefficients(expr, symbol) is not None:
        rule = rw.rule_for(symbol)
        if rule is None or rule.power != 2:
            raise UnsolvableConstraintError(f"{decl.label} is quadratic in '{symbol}' without a rewrite rule")
        if rw.branch(symbol) is None:
            raise BranchRequiredError(f"{decl.label}: choose a branch sign for '{symbol}' (option branch.{symbol})")
        return None
    raise UnsolvableConstraintError(f"{decl.label} cannot be solved for '{symbol}'")


def impose_on_potential(potential, expr, candidates, rw, solved_for=None):
    """Potential with one constraint set strongly to zero"""
    table = potential.table
    if solved_for:
        solution = _linear_solution(expr, solved_for)
        if solution is not None:
            return reduce_mod(substitute(potential, {solved_for: solution}), rw)
        return reduce_mod(potential, rw)
    choice = pick_linear_variable(expr, candidates)
    if choice is not None:
        name, solution = choice
        return reduce_mod(substitute(potential, {name: solution}), rw)
    variables = [s.name for s in table if not s.is_parameter]
    try:
        return reduce_mod(reduce_by(potential, expr, variables), rw)
    except ExprError as exc:
        raise UnsolvableConstraintError(f"cannot impose '{expr}': {exc}") from exc


def _define_by_rewrite(symbol, one_form, variables):
    """The symbol leaves xi and is defined through its rewrite rule"""
    if symbol not in one_form:
        return
    if not one_form[symbol].is_zero():
        raise UnsolvableConstraintError(f"'{symbol}' carries a kinetic term and cannot be defined implicitly")
    del one_form[symbol]
    variables.remove(symbol)


def strongly_impose(m, chain=None):
    """Reduced model: every chain constraint solved and eliminated, kinetic constraint terms dropped"""
    chain = m.chain if chain is None else chain
    rw = m.rewrites
    table = m.symbols
    multipliers = set(m.multipliers)
    variables = [v for v in m.variables if v not in multipliers]
    one_form = {v: m.one_form[v] for v in variables}
    potential = m.potential
    time = m.options.time
    eliminated = []
    for decl in chain:
        expr = decl.expr
        for symbol, solution in eliminated:
            if symbol in expr.free_symbols():
                expr = substitute(expr, {symbol: solution})
        symbol = decl.solved_for
        # quadratic in the solved-for symbol: checked before the rewrites reduce it to zero
        if symbol and _linear_solution(expr, symbol) is None and quadratic_coefficients(expr, symbol) is not None:
            _solve(decl, expr, rw)
            _define_by_rewrite(symbol, one_form, variables)
            continue
        expr = reduce_mod(expr, rw)
        if expr.is_zero():
            continue
        if not symbol:
            potential = impose_on_potential(potential, expr, variables, rw)
            continue
        solution = _solve(decl, expr, rw)
        if solution is None:
            _define_by_rewrite(symbol, one_form, variables)
            continue
        kinetic = substitute(one_form.pop(symbol, table.zero()), {symbol: solution})
        if symbol in variables:
            variables.remove(symbol)
        for name in variables:
            updated = substitute(one_form[name], {symbol: solution})
            if not kinetic.is_zero():
                updated = updated + kinetic * differentiate(solution, name)
            one_form[name] = updated
        potential = substitute(potential, {symbol: solution})
        if time and not kinetic.is_zero():
            potential = potential - kinetic * differentiate(solution, time)
        eliminated.append((symbol, solution))
    potential = reduce_mod(potential, rw)
    one_form = {v: reduce_mod(e, rw) for v, e in one_form.items()}
    log.debug("strong imposition of %d constraints leaves %d variables", len(chain), len(variables))
    return replace(
        m,
        name=f"{m.name}-reduced",
        variables=tuple(variables),
        one_form=one_form,
        potential=potential,
        declared=(),
        chain=ConstraintChain(),
    )


# ---------------------------------------------------------------------------
# Iterations
# ---------------------------------------------------------------------------

def _next_label(chain, prefix):
    taken = set(chain.labels())
    k = 1
    while f"{prefix}{k}" in taken:
        k += 1
    return f"{prefix}{k}"


def _record(model, level):
    f = build_f(model)
    det = determinant(f)
    return LevelRecord(
        level=level,
        variables=model.variables,
        one_form=dict(model.one_form),
        potential=model.potential,
        matrix=f,
        determinant=det,
    )


def _reduce_potential(model, decls):
    """Original rule: set each constraint strongly to zero in the potential"""
    candidates = [v for v in model.variables if v not in set(model.multipliers)]
    potential = model.potential
    for decl in decls:
        potential = impose_on_potential(potential, decl.expr, candidates, model.rewrites, decl.solved_for)
    return replace(model, potential=potential)


def _drop_idle_variables(model):
    """Remove variables absent from the potential and from every one-form component"""
    used = set(model.potential.free_symbols())
    for component in model.one_form.values():
        used |= component.free_symbols()
    multipliers = set(model.multipliers)
    idle = [v for v in model.variables if v not in multipliers and v not in used and model.one_form[v].is_zero()]
    if not idle:
        return model
    log.info("dropping variables no longer present in the Lagrangian: %s", ", ".join(idle))
    return replace(
        model,
        variables=tuple(v for v in model.variables if v not in idle),
        one_form={v: e for v, e in model.one_form.items() if v not in idle},
    )


def _iterate(model, algorithm, levels, level, max_level, classic, source=None):
    source = source or model
    rw = model.rewrites
    while True:
        if level > max_level:
            log.warning("%s: level limit %d reached", model.name, max_level)
            return AnalysisReport(algorithm, source, model, levels, Verdict.LEVEL_LIMIT, model.chain)
        record = _record(model, level)
        levels.append(record)
        log.info("%s level %d: dim %d, det %s", model.name, level, record.matrix.dim, "0" if record.singular else "nonzero")

        if not record.singular:
            record.warnings.extend(_determinant_warnings(record.determinant))
            inverse = invert(record.matrix)
            reduced = strongly_impose(model)
            report = AnalysisReport(
                algorithm,
                source,
                model,
                levels,
                Verdict.BRACKETS,
                model.chain,
                brackets=BracketTable(model.variables, inverse),
                reduced_model=reduced,
                hamiltonian=reduced.potential,
            )
            report.warnings.extend(record.warnings)
            return report

        record.zero_modes = kernel_basis(record.matrix)
        new = []
        symmetry = None
        for index, mode in enumerate(record.zero_modes):
            c = reduce_mod(contract(mode, model), rw)
            if is_inconsistent(c):
                record.candidates.append(Candidate(index, c, "inconsistent"))
                log.warning("%s level %d: zero-mode contraction is the nonzero constant %s", model.name, level, c)
                report = AnalysisReport(algorithm, source, model, levels, Verdict.INCONSISTENT, model.chain)
                report.warnings.append(f"level {level}: zero-mode {index} demands {c} = 0")
                return report
            chain = model.chain.append(*new)
            constraint = generate_constraint(mode, model, chain)
            if constraint is None:
                record.candidates.append(Candidate(index, c, "zero" if c.is_zero() else "known"))
                symmetry = symmetry or (mode, c)
                continue
            label = _next_label(chain, "Sigma")
            decl = ConstraintDecl(label, constraint, Origin.ZERO_MODE, level=level)
            record.candidates.append(Candidate(index, decl.expr, "new", label))
            new.append(decl)

        if new:
            for decl in new:
                model = extend_with_constraint(model, decl)
            if classic:
                model = _drop_idle_variables(_reduce_potential(model, new))
            record.injected = [d.label for d in new]
            level += 1
            continue

        pending = model.pending_gauge_fixings()
        if pending:
            for decl in pending:
                model = extend_with_constraint(model, replace(decl, level=level))
            if classic:
                model = _reduce_potential(model, pending)
            record.injected = [d.label for d in pending]
            record.note = "symmetry fixed by declared gauge conditions"
            log.info("%s level %d: injecting gauge fixings %s", model.name, level, ", ".join(record.injected))
            level += 1
            continue

        mode, delta = symmetry
        return AnalysisReport(
            algorithm,
            source,
            model,
            levels,
            Verdict.SYMMETRY,
            model.chain,
            generator=mode,
            delta_potential=delta,
        )


def _start(m, algorithm, max_level, classic):
    max_level = m.options.max_level if max_level is None else max_level
    if max_level < 1:
        raise AnalysisError("max_level must be at least 1")
    levels = []
    level = 0
    preinjected = [c for c in m.chain if c.origin is not Origin.PRIMARY]
    if preinjected:
        bare = without_constraints(m, [c.label for c in preinjected])
        record = _record(bare, 0)
        record.injected = [c.label for c in preinjected]
        record.note = "declared constraints injected"
        levels.append(record)
        level = 1
    model = m
    if classic and m.chain:
        model = _drop_idle_variables(_reduce_potential(m, list(m.chain)))
    return _iterate(model, algorithm, levels, level, max_level, classic, source=m)


def run_modified_bw(m, max_level=None):
    """Iterate with constraints carried kinetically and the potential never reduced mid-run"""
    return _start(m, "mbw", max_level, classic=False)


def run_classic_bw(m, max_level=None):
    """Iterate setting each new constraint strongly to zero in the potential"""
    return _start(m, "bw", max_level, classic=True)


def continue_with_constraint(report, decl, max_level=None):
    """Inject one more constraint into the last model of a report and resume the iteration"""
    model = extend_with_constraint(report.final_model, replace(decl, level=report.final_level))
    if report.levels:
        report.levels[-1].injected.append(decl.label)
    max_level = report.model.options.max_level if max_level is None else max_level
    resumed = _iterate(model, report.algorithm, list(report.levels), report.final_level + 1, max_level, report.algorithm == "bw", source=report.model)
    resumed.warnings = report.warnings + resumed.warnings
    return resumed
