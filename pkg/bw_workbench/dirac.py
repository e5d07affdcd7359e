"""
Dirac's constraint algorithm: Legendre scan, consistency chain,
first/second-class classification and Dirac brackets.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import pandas as pd

from . import linalg
from .brackets import BracketTable, canonical_table
from .modelspec import VELOCITY_PREFIX, ConstraintChain, ConstraintDecl, ModelError, Origin
from .symexpr import RewriteSystem, differentiate, reduce_mod, substitute
from .symplectic import AnalysisReport, Verdict, impose_on_potential, is_inconsistent, is_new_constraint

log = logging.getLogger(__name__)


class DiracError(Exception):
    """Base class for Dirac algorithm errors"""


class LegendreError(DiracError):
    pass


class InconsistentSystemError(DiracError):
    pass


class DiracLevelLimitError(DiracError):
    pass


class SingularConstraintMatrixError(DiracError):
    pass


class ConstraintClass(str, Enum):
    FIRST = "first-class"
    SECOND = "second-class"


@dataclass(frozen=True)
class PhaseSpace:
    pairs: tuple
    table: object
    extra: tuple = ()

    def coordinates(self):
        return [p.coordinate for p in self.pairs]

    def momenta(self):
        return [p.momentum for p in self.pairs]

    def symbols(self):
        return self.coordinates() + self.momenta() + list(self.extra)


@dataclass(frozen=True)
class DiracMatrix:
    constraints: tuple
    entries: tuple

    def labels(self):
        return [c.label for c in self.constraints]

    def as_strings(self):
        return [[str(e) for e in row] for row in self.entries]

    def to_frame(self):
        return pd.DataFrame(self.as_strings(), index=self.labels(), columns=self.labels())


@dataclass(frozen=True)
class Transformation:
    """delta z = eps * variations[z]"""

    generator: str
    variations: dict
    delta_h: Optional[object] = None


@dataclass
class Classification:
    kinds: dict
    second_class: list
    warnings: list = field(default_factory=list)

    def first_class(self, chain):
        return [c for c in chain if self.kinds[c.label] is ConstraintClass.FIRST]


def phase_space_of(m):
    if not m.phase_pairs:
        raise ModelError(f"model {m.name} has no [phase_space] section")
    return PhaseSpace(tuple(m.phase_pairs), m.symbols)


def poisson(a, b, ps):
    """{A, B} = sum sign * (dA/dq dB/dp - dA/dp dB/dq)"""
    total = ps.table.zero()
    for pair in ps.pairs:
        da_q = differentiate(a, pair.coordinate)
        db_p = differentiate(b, pair.momentum)
        da_p = differentiate(a, pair.momentum)
        db_q = differentiate(b, pair.coordinate)
        term = da_q * db_p - da_p * db_q
        if not term.is_zero():
            total = total + term * pair.sign
    return total


def legendre_scan(lagrangian, ps):
    """Canonical Hamiltonian and primary constraints of a second-order Lagrangian"""
    table = ps.table
    velocity = {}
    for pair in ps.pairs:
        name = VELOCITY_PREFIX + pair.coordinate
        if name not in table:
            raise LegendreError(f"velocity '{name}' is not declared")
        velocity[pair.coordinate] = name
    velocities = set(velocity.values())
    if lagrangian.denominator().free_symbols() & velocities:
        raise LegendreError("velocities may not appear in a denominator")

    conjugate = {pair.coordinate: differentiate(lagrangian, velocity[pair.coordinate]) for pair in ps.pairs}
    dependent = [pair for pair in ps.pairs if conjugate[pair.coordinate].free_symbols() & velocities]
    independent = [pair for pair in ps.pairs if pair not in dependent]

    primaries = []
    for k, pair in enumerate(independent, start=1):
        expr = table.gen(pair.momentum) * pair.sign - conjugate[pair.coordinate]
        primaries.append(ConstraintDecl(f"phi{k}", expr, Origin.PRIMARY, level=0, solved_for=pair.momentum))

    solution = {}
    if dependent:
        dep_velocities = [velocity[p.coordinate] for p in dependent]
        hessian, rhs = [], []
        for pair in dependent:
            momentum = conjugate[pair.coordinate]
            row = [differentiate(momentum, v) for v in dep_velocities]
            rest = momentum - sum((c * table.gen(v) for c, v in zip(row, dep_velocities)), table.zero())
            if any(c.free_symbols() & velocities for c in row) or rest.free_symbols() & velocities:
                raise LegendreError(f"momentum of '{pair.coordinate}' is not linear in the velocities it determines")
            hessian.append(row)
            rhs.append(table.gen(pair.momentum) * pair.sign - rest)
        try:
            inverse = linalg.inverse(hessian)
        except linalg.SingularMatrixError:
            raise LegendreError("velocity Hessian is singular") from None
        for i, v in enumerate(dep_velocities):
            solution[v] = sum((inverse[i][j] * rhs[j] for j in range(len(rhs))), table.zero())

    hamiltonian = -lagrangian
    for pair in dependent:
        hamiltonian = hamiltonian + table.gen(pair.momentum) * pair.sign * table.gen(velocity[pair.coordinate])
    for pair in independent:
        hamiltonian = hamiltonian + conjugate[pair.coordinate] * table.gen(velocity[pair.coordinate])
    hamiltonian = substitute(hamiltonian, solution)
    leftover = hamiltonian.free_symbols() & velocities
    if leftover:
        raise LegendreError(f"velocities {sorted(leftover)} could not be eliminated")
    log.info("Legendre scan: %d primary constraints", len(primaries))
    return hamiltonian, primaries


def _weakly_zero(e, chain, rw):
    return not is_new_constraint(e, chain, rw)


def consistency_chain(hamiltonian, primaries, ps, rw=None, max_level=10):
    """Close the primary constraints under time evolution with H_T = H_c + u_a phi_a"""
    rw = rw or RewriteSystem()
    members = list(primaries)
    queue = list(primaries)
    fixes = []
    secondary = 0
    while queue:
        chi = queue.pop(0)
        free = reduce_mod(poisson(chi.expr, hamiltonian, ps), rw)
        coefficients = [reduce_mod(poisson(chi.expr, phi.expr, ps), rw) for phi in primaries]
        active = [(k, c) for k, c in enumerate(coefficients, start=1) if not _weakly_zero(c, members, rw)]
        spawned = False
        if not _weakly_zero(free, members, rw):
            if is_inconsistent(free) and not active:
                raise InconsistentSystemError(f"consistency of {chi.label} demands {free} = 0")
            level = (chi.level or 0) + 1
            if level > max_level:
                raise DiracLevelLimitError(f"no closure after {max_level} levels")
            secondary += 1
            decl = ConstraintDecl(f"chi{secondary}", free, Origin.SECONDARY, level=level)
            members.append(decl)
            queue.append(decl)
            spawned = True
            log.debug("%s generates %s = %s", chi.label, decl.label, free)
        if active:
            value = "0" if spawned or free.is_zero() else str(-free)
            if len(active) == 1:
                k, c = active[0]
                fixes.append(f"{chi.label}: u{k} = {value if value == '0' else str(-free / c)}")
            else:
                relation = " + ".join(f"({c})*u{k}" for k, c in active)
                fixes.append(f"{chi.label}: {relation} = {value}")
    return ConstraintChain(tuple(members), tuple(fixes))


def dirac_matrix(constraints, ps):
    constraints = tuple(constraints)
    n = len(constraints)
    rows = [[ps.table.zero() for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            value = poisson(constraints[i].expr, constraints[j].expr, ps)
            rows[i][j] = value
            rows[j][i] = -value
    return DiracMatrix(constraints, tuple(tuple(r) for r in rows))


def classify(chain, ps, rw=None):
    """Largest nonsingular second-class subset, built greedily in chain order.

    The remaining constraints are first-class; their Dirac brackets with the
    whole chain are checked to vanish weakly.
    """
    rw = rw or RewriteSystem()
    members = list(chain)
    if not members:
        return Classification({}, [])
    entries = dirac_matrix(members, ps).entries
    chosen = []
    for i in range(len(members)):
        if i in chosen:
            continue
        for j in range(i + 1, len(members)):
            if j in chosen:
                continue
            trial = chosen + [i, j]
            det = linalg.determinant([[entries[a][b] for b in trial] for a in trial])
            if not det.is_zero() and not _weakly_zero(det, members, rw):
                chosen = trial
                break
    second = [members[k] for k in sorted(chosen)]
    kinds = {c.label: (ConstraintClass.SECOND if k in chosen else ConstraintClass.FIRST) for k, c in enumerate(members)}
    result = Classification(kinds, second)
    first = result.first_class(members)
    if first:
        inverse = _constraint_inverse(second, ps)
        for c in first:
            for other in members:
                if other is c:
                    continue
                value = dirac_bracket(c.expr, other.expr, second, ps, inverse)
                if not _weakly_zero(value, members, rw):
                    message = f"{c.label} has a non-vanishing bracket with {other.label} after removing the second-class set"
                    log.warning(message)
                    result.warnings.append(message)
                    break
    if len(second) % 2:
        result.warnings.append("odd number of second-class constraints")
    return result


def _constraint_inverse(second, ps):
    if not second:
        return []
    matrix = dirac_matrix(second, ps)
    try:
        return linalg.inverse(matrix.entries)
    except linalg.SingularMatrixError:
        raise SingularConstraintMatrixError("constraint bracket matrix is singular") from None


def dirac_bracket(a, b, second, ps, inverse=None):
    value = poisson(a, b, ps)
    if not second:
        return value
    inverse = inverse if inverse is not None else _constraint_inverse(second, ps)
    left = [poisson(a, c.expr, ps) for c in second]
    right = [poisson(c.expr, b, ps) for c in second]
    for i, li in enumerate(left):
        if li.is_zero():
            continue
        for j, rj in enumerate(right):
            if rj.is_zero() or inverse[i][j].is_zero():
                continue
            value = value - li * inverse[i][j] * rj
    return value


def dirac_bracket_table(second, ps, basis=None):
    """{A,B}_D = {A,B} - {A,chi_i} C^-1_ij {chi_j,B} over the basis symbols"""
    table = ps.table
    basis = list(basis or ps.symbols())
    if not second:
        pairs = [(p.coordinate, p.momentum, p.sign) for p in ps.pairs]
        return canonical_table(pairs, table, ps.extra).restrict(basis)
    gens = [table.gen(n) for n in basis]
    inverse = _constraint_inverse(second, ps)
    left = [[poisson(g, c.expr, ps) for c in second] for g in gens]
    # M[z][j] = sum_i {z, chi_i} C^-1_ij
    weighted = [
        [sum((row[i] * inverse[i][j] for i in range(len(second)) if not row[i].is_zero()), table.zero()) for j in range(len(second))]
        for row in left
    ]
    n = len(basis)
    rows = [[table.zero() for _ in range(n)] for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            value = poisson(gens[a], gens[b], ps)
            for j in range(len(second)):
                # {chi_j, w} = -{w, chi_j}
                if not weighted[a][j].is_zero() and not left[b][j].is_zero():
                    value = value + weighted[a][j] * left[b][j]
            rows[a][b] = value
            rows[b][a] = -value
    return BracketTable(tuple(basis), tuple(tuple(r) for r in rows))


def first_class_generator(c, ps, variables=None, second_class=(), hamiltonian=None, label="generator"):
    """delta z = eps {z, c}, with Dirac brackets relative to the second-class set"""
    table = ps.table
    names = list(variables or ps.symbols())
    inverse = _constraint_inverse(list(second_class), ps) if second_class else None
    variations = {n: dirac_bracket(table.gen(n), c, list(second_class), ps, inverse) for n in names}
    delta_h = None
    if hamiltonian is not None:
        delta_h = sum(
            (differentiate(hamiltonian, n) * v for n, v in variations.items() if not v.is_zero()),
            table.zero(),
        )
    return Transformation(label, variations, delta_h)


def _reduce_hamiltonian(hamiltonian, constraints, ps, rw):
    candidates = ps.symbols()
    for decl in constraints:
        hamiltonian = impose_on_potential(hamiltonian, decl.expr, candidates, rw, decl.solved_for)
    return hamiltonian


def run_dirac(m, max_level=None):
    """Full Dirac analysis of a model carrying [phase_space] and a Lagrangian or Hamiltonian"""
    max_level = m.options.max_level if max_level is None else max_level
    ps = phase_space_of(m)
    rw = m.rewrites
    if m.lagrangian is not None:
        hamiltonian, primaries = legendre_scan(m.lagrangian, ps)
    elif m.hamiltonian is not None:
        hamiltonian = m.hamiltonian
        primaries = [replace(d, multiplier=None, level=0) for d in m.declared if d.origin is Origin.PRIMARY]
    else:
        raise ModelError(f"model {m.name} has neither [lagrangian] nor [hamiltonian]")

    try:
        chain = consistency_chain(hamiltonian, primaries, ps, rw, max_level)
    except DiracLevelLimitError as exc:
        report = AnalysisReport("dirac", m, m, [], Verdict.LEVEL_LIMIT, ConstraintChain(tuple(primaries)))
        report.warnings.append(str(exc))
        return report
    except InconsistentSystemError as exc:
        report = AnalysisReport("dirac", m, m, [], Verdict.INCONSISTENT, ConstraintChain(tuple(primaries)))
        report.warnings.append(str(exc))
        return report

    classification = classify(chain, ps, rw)
    generators = [
        first_class_generator(c.expr, ps, None, classification.second_class, hamiltonian, label=c.label)
        for c in classification.first_class(chain)
    ]
    gauge = [replace(d, multiplier=None) for d in m.declared if d.origin is Origin.GAUGE_FIXING]
    full = chain.append(*gauge) if gauge else chain
    final = classify(full, ps, rw) if gauge else classification
    first = final.first_class(full)

    report = AnalysisReport(
        "dirac",
        m,
        m,
        [],
        Verdict.SYMMETRY if first else Verdict.BRACKETS,
        full,
        brackets=dirac_bracket_table(final.second_class, ps),
        hamiltonian=_reduce_hamiltonian(hamiltonian, final.second_class, ps, rw),
    )
    if first:
        transformation = first_class_generator(first[0].expr, ps, None, final.second_class, hamiltonian, label=first[0].label)
        report.transformation = transformation.variations
        report.delta_potential = transformation.delta_h
    report.warnings.extend(classification.warnings)
    if gauge:
        report.warnings.extend(w for w in final.warnings if w not in classification.warnings)
    report.extras = {
        "canonical_hamiltonian": hamiltonian,
        "classification": [(c.label, final.kinds[c.label]) for c in full],
        "classification_before_gauge": [(c.label, classification.kinds[c.label]) for c in chain],
        "dirac_matrix": dirac_matrix(list(chain), ps),
        "multiplier_fixes": list(chain.notes),
        "generators": generators,
    }
    log.info("Dirac analysis of %s: %d constraints, verdict %s", m.name, len(full), report.verdict.value)
    return report
