"""
Model description files: parsing, validation, printing and extension
"""
import logging
import os
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Optional

from .symexpr import (
    Expr,
    ExprError,
    RewriteRule,
    RewriteSystem,
    SymbolKind,
    SymbolTable,
    linear_coefficients,
    parse_expr,
    proportional,
    quadratic_coefficients,
    split_coefficients,
)

log = logging.getLogger(__name__)

SECTIONS = (
    "options",
    "parameters",
    "variables",
    "one_form",
    "potential",
    "constraints",
    "rewrites",
    "phase_space",
    "lagrangian",
    "hamiltonian",
)
VARIABLE_KINDS = ("coordinate", "momentum", "multiplier")
VELOCITY_PREFIX = "d_"


class ModelError(Exception):
    """Base class for model description errors"""


class ModelSyntaxError(ModelError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class DuplicateLabelError(ModelError):
    pass


class RangeBoundError(ModelError):
    pass


class DuplicateConstraintError(ModelError):
    pass


class Origin(str, Enum):
    PRIMARY = "primary"
    AD_HOC = "ad-hoc"
    ZERO_MODE = "zero-mode"
    EOM_DERIVED = "eom-derived"
    GAUGE_FIXING = "gauge-fixing"
    SECONDARY = "secondary"


# constraints that enter the kinetic sector as soon as the model is loaded
KINETIC_ORIGINS = frozenset({Origin.PRIMARY, Origin.AD_HOC, Origin.ZERO_MODE, Origin.EOM_DERIVED})


@dataclass(frozen=True)
class ConstraintDecl:
    label: str
    expr: Expr
    origin: Origin
    level: Optional[int] = None
    solved_for: Optional[str] = None
    multiplier: Optional[str] = None

    @property
    def provenance(self):
        if self.level is None:
            return self.origin.value
        return f"{self.origin.value}(level {self.level})"

    def to_dict(self):
        return {
            "label": self.label,
            "expr": str(self.expr),
            "origin": self.origin.value,
            "level": self.level,
            "solved_for": self.solved_for,
            "multiplier": self.multiplier,
        }


@dataclass(frozen=True)
class ConstraintChain:
    """Ordered constraints with provenance"""

    members: tuple = ()
    notes: tuple = ()

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def __getitem__(self, index):
        return self.members[index]

    def labels(self):
        return [c.label for c in self.members]

    def exprs(self):
        return [c.expr for c in self.members]

    def get(self, label):
        for c in self.members:
            if c.label == label:
                return c
        return None

    def append(self, *decls):
        return replace(self, members=self.members + tuple(decls))


@dataclass(frozen=True)
class PhasePair:
    coordinate: str
    momentum: str
    sign: int = 1


@dataclass(frozen=True)
class ModelOptions:
    max_level: int = 10
    branch_signs: Mapping[str, int] = field(default_factory=dict)
    time: Optional[str] = None
    multiplier_prefix: str = "eta"
    constants: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    location: str = ""

    def __str__(self):
        where = f" [{self.location}]" if self.location else ""
        return f"{self.code}: {self.message}{where}"


@dataclass(frozen=True, eq=False)
class Model:
    name: str
    symbols: SymbolTable
    parameters: tuple
    variables: tuple
    one_form: Mapping[str, Expr]
    potential: Expr
    declared: tuple
    chain: ConstraintChain
    rewrites: RewriteSystem
    options: ModelOptions
    lagrangian: Optional[Expr] = None
    hamiltonian: Optional[Expr] = None
    phase_pairs: tuple = ()

    @property
    def multipliers(self):
        return tuple(c.multiplier for c in self.chain)

    @property
    def dimension(self):
        return len(self.variables)

    @property
    def has_dirac_data(self):
        return bool(self.phase_pairs) and (self.lagrangian is not None or self.hamiltonian is not None)

    def pending_gauge_fixings(self):
        injected = set(self.chain.labels())
        return [c for c in self.declared if c.origin is Origin.GAUGE_FIXING and c.label not in injected]

    def kind(self, name):
        return self.symbols.get(name).kind


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_SECTION_RE = re.compile(r"^\[(\w+)\]$")
_SUM_RE = re.compile(r"sum\[(\w+)=(\w+)\.\.(\w+)\]\(")
_RANGE_RE = re.compile(r"^(\w+)\[(\w+)\.\.(\w+)\]$")
_INDEXED_RE = re.compile(r"^(\w+)\[(\d+)\]$")
_LOOP_RE = re.compile(r"^(\w+)\[(\w+)=(\w+)\.\.(\w+)\]$")
_NAME_RE = re.compile(r"^[^\W\d]\w*$")
_REWRITE_RE = re.compile(r"^(\w+)\s*\^\s*(\d+)\s*->\s*(.+)$")
_ATTR_RE = re.compile(r"^(solved_for|multiplier)=(\w+)$")


def _split_sections(text):
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        header = _SECTION_RE.match(line)
        if header:
            current = header.group(1)
            if current not in SECTIONS:
                raise ModelSyntaxError(f"unknown section [{current}]", lineno)
            if current in sections:
                raise ModelSyntaxError(f"section [{current}] appears twice", lineno)
            sections[current] = []
            continue
        if current is None:
            raise ModelSyntaxError("content outside of a section", lineno)
        sections[current].append((lineno, line))
    return sections


def _bound(token, constants, lineno):
    if token.lstrip("-").isdigit():
        return int(token)
    if token in constants:
        return constants[token]
    raise RangeBoundError(f"line {lineno}: non-concrete range bound '{token}'")


def _index_range(lo, hi, constants, lineno):
    start, stop = _bound(lo, constants, lineno), _bound(hi, constants, lineno)
    if stop < start:
        raise RangeBoundError(f"line {lineno}: empty range {start}..{stop}")
    return range(start, stop + 1)


def _substitute_index(body, var, k):
    return re.sub(rf"\[{re.escape(var)}\]", f"[{k}]", body)


def expand_sums(text, constants, lineno=None):
    """Expand every `sum[i=lo..hi](body)` into a parenthesised sum"""
    while True:
        match = _SUM_RE.search(text)
        if not match:
            return text
        depth, end = 1, match.end()
        while end < len(text) and depth:
            depth += {"(": 1, ")": -1}.get(text[end], 0)
            end += 1
        if depth:
            raise ModelSyntaxError("unbalanced parentheses in sum", lineno)
        body = text[match.end():end - 1]
        var = match.group(1)
        terms = [f"({_substitute_index(body, var, k)})" for k in _index_range(match.group(2), match.group(3), constants, lineno)]
        text = text[:match.start()] + "(" + " + ".join(terms) + ")" + text[end:]


def _expand_names(spec, constants, lineno):
    names = []
    for item in (part.strip() for part in spec.split(",")):
        if not item:
            continue
        ranged = _RANGE_RE.match(item)
        indexed = _INDEXED_RE.match(item)
        if ranged:
            names.extend(f"{ranged.group(1)}_{k}" for k in _index_range(ranged.group(2), ranged.group(3), constants, lineno))
        elif indexed:
            names.append(f"{indexed.group(1)}_{indexed.group(2)}")
        elif _NAME_RE.match(item):
            names.append(item)
        else:
            raise ModelSyntaxError(f"invalid name '{item}'", lineno)
    return names


def _split_top(line, sep):
    """Partition at the first `sep` that is not inside square brackets"""
    depth = 0
    for k, ch in enumerate(line):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif ch == sep and depth == 0:
            return line[:k], sep, line[k + 1:]
    return line, "", ""


def _expand_loop(lhs, rhs, constants, lineno):
    """`name[i=lo..hi]` on the left-hand side repeats the line for each index"""
    loop = _LOOP_RE.match(lhs)
    if not loop:
        names = _expand_names(lhs, constants, lineno)
        if len(names) != 1:
            raise ModelSyntaxError(f"expected a single name, found '{lhs}'", lineno)
        return [(names[0], rhs)]
    name, var = loop.group(1), loop.group(2)
    return [(f"{name}_{k}", _substitute_index(rhs, var, k)) for k in _index_range(loop.group(3), loop.group(4), constants, lineno)]


def _parse(text, table, constants, lineno):
    try:
        return parse_expr(expand_sums(text, constants, lineno), table)
    except ExprError as exc:
        raise ModelSyntaxError(str(exc), lineno) from exc


def _joined(lines):
    if not lines:
        return None, None
    return " ".join(text for _, text in lines), lines[0][0]


def _parse_options(lines, overrides):
    values = {"constants": {}, "branch_signs": {}}
    for lineno, line in lines:
        if "=" not in line:
            raise ModelSyntaxError(f"expected 'key = value', found '{line}'", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "name":
            values["name"] = value
        elif key == "max_level":
            if not value.isdigit():
                raise ModelSyntaxError("max_level must be an integer", lineno)
            values["max_level"] = int(value)
        elif key.startswith("branch."):
            if value not in ("+", "-"):
                raise ModelSyntaxError(f"branch sign must be '+' or '-', found '{value}'", lineno)
            values["branch_signs"][key[len("branch."):]] = 1 if value == "+" else -1
        elif key in ("time", "multiplier_prefix"):
            if not _NAME_RE.match(value):
                raise ModelSyntaxError(f"invalid {key} '{value}'", lineno)
            values[key] = value
        elif _NAME_RE.match(key) and value.lstrip("-").isdigit():
            values["constants"][key] = int(value)
        else:
            raise ModelSyntaxError(f"unknown option '{key}'", lineno)
    values["constants"].update(overrides or {})
    return values


def _parse_constraint(lineno, line, table, constants):
    if ":" not in line:
        raise ModelSyntaxError(f"expected 'label : expr ; origin', found '{line}'", lineno)
    label, rest = (part.strip() for part in line.split(":", 1))
    body, _, attrs = rest.partition(";")
    words = attrs.split()
    if not words:
        raise ModelSyntaxError(f"constraint '{label}' has no origin", lineno)
    try:
        origin = Origin(words[0])
    except ValueError:
        raise ModelSyntaxError(f"unknown origin '{words[0]}'", lineno) from None
    extra = {}
    for word in words[1:]:
        match = _ATTR_RE.match(word)
        if not match:
            raise ModelSyntaxError(f"unknown constraint attribute '{word}'", lineno)
        extra[match.group(1)] = match.group(2)
    decls = []
    for name, text in _expand_loop(label, body.strip(), constants, lineno):
        expr = _parse(text, table, constants, lineno)
        decls.append((lineno, ConstraintDecl(name, expr, origin, solved_for=extra.get("solved_for"), multiplier=extra.get("multiplier"))))
    return decls


def parse_model(text, overrides=None, name=None):
    """Parse a model file into a Model with ranges expanded and constraints injected"""
    sections = _split_sections(text)
    opts = _parse_options(sections.get("options", []), overrides)
    constants = opts["constants"]
    table = SymbolTable()

    parameters = []
    for lineno, line in sections.get("parameters", []):
        spec, _, kind = line.partition(":")
        kind = kind.strip() or "parameter"
        if kind not in ("parameter", "integration-constant"):
            raise ModelSyntaxError(f"unknown parameter kind '{kind}'", lineno)
        for n in _expand_names(spec, constants, lineno):
            _declare(table, n, kind, lineno)
            parameters.append(n)

    variables = []
    for lineno, line in sections.get("variables", []):
        spec, sep, kind = line.partition(":")
        kind = kind.strip()
        if not sep or kind not in VARIABLE_KINDS:
            raise ModelSyntaxError(f"expected 'name : {'|'.join(VARIABLE_KINDS)}', found '{line}'", lineno)
        for n in _expand_names(spec, constants, lineno):
            if n in table:
                raise DuplicateLabelError(f"line {lineno}: variable '{n}' declared twice")
            table.declare(n, kind)
            variables.append(n)

    phase_pairs = []
    for lineno, line in sections.get("phase_space", []):
        left, sep, right = line.partition(":")
        if not sep:
            raise ModelSyntaxError(f"expected 'coordinate : momentum', found '{line}'", lineno)
        right = right.strip()
        sign = -1 if right.startswith("-") else 1
        coords = _expand_names(left, constants, lineno)
        momenta = _expand_names(right.lstrip("-"), constants, lineno)
        if len(coords) != len(momenta):
            raise ModelSyntaxError("coordinate and momentum ranges differ in length", lineno)
        for q, p in zip(coords, momenta):
            if q not in table:
                table.declare(q, "coordinate")
            if p not in table:
                table.declare(p, "momentum")
            phase_pairs.append(PhasePair(q, p, sign))

    if "lagrangian" in sections:
        for pair in phase_pairs:
            table.declare(VELOCITY_PREFIX + pair.coordinate, SymbolKind.VELOCITY)

    time = opts.get("time")
    if time is not None and (time not in table or not table.is_parameter(time)):
        raise ModelSyntaxError(f"time option '{time}' must name a declared parameter")

    one_form = {v: None for v in variables}
    for lineno, line in sections.get("one_form", []):
        lhs, sep, rhs = _split_top(line, "=")
        if not sep:
            raise ModelSyntaxError(f"expected 'variable = expr', found '{line}'", lineno)
        for var, text_ in _expand_loop(lhs.strip(), rhs.strip(), constants, lineno):
            if var not in one_form:
                raise ModelSyntaxError(f"'{var}' is not a symplectic variable", lineno)
            if one_form[var] is not None:
                raise DuplicateLabelError(f"line {lineno}: one-form component of '{var}' given twice")
            one_form[var] = _parse(text_, table, constants, lineno)
    one_form = {v: (e if e is not None else table.zero()) for v, e in one_form.items()}

    potential_text, potential_line = _joined(sections.get("potential", []))
    potential = _parse(potential_text, table, constants, potential_line) if potential_text else table.zero()

    extras = {}
    for key in ("lagrangian", "hamiltonian"):
        body, lineno = _joined(sections.get(key, []))
        extras[key] = _parse(body, table, constants, lineno) if body else None

    rules = []
    for lineno, line in sections.get("rewrites", []):
        match = _REWRITE_RE.match(line)
        if not match:
            raise ModelSyntaxError(f"expected 'symbol^k -> expr', found '{line}'", lineno)
        symbol, power = match.group(1), int(match.group(2))
        if symbol not in table:
            raise ModelSyntaxError(f"undeclared identifier '{symbol}'", lineno)
        if power < 2:
            raise ModelSyntaxError("rewrite power must be at least 2", lineno)
        rules.append(RewriteRule(symbol, power, _parse(match.group(3), table, constants, lineno)))
    rewrites = RewriteSystem(tuple(rules), dict(opts["branch_signs"]))

    declared = []
    labels = set()
    for lineno, line in sections.get("constraints", []):
        for where, decl in _parse_constraint(lineno, line, table, constants):
            if decl.label in labels:
                raise DuplicateLabelError(f"line {where}: duplicate constraint label '{decl.label}'")
            labels.add(decl.label)
            declared.append(decl)

    options = ModelOptions(
        max_level=opts.get("max_level", 10),
        branch_signs=dict(opts["branch_signs"]),
        time=time,
        multiplier_prefix=opts.get("multiplier_prefix", "eta"),
        constants=dict(constants),
    )
    model = Model(
        name=opts.get("name") or name or "model",
        symbols=table,
        parameters=tuple(parameters),
        variables=tuple(variables),
        one_form=one_form,
        potential=potential,
        declared=tuple(declared),
        chain=ConstraintChain(),
        rewrites=rewrites,
        options=options,
        lagrangian=extras["lagrangian"],
        hamiltonian=extras["hamiltonian"],
        phase_pairs=tuple(phase_pairs),
    )
    for decl in declared:
        if decl.origin in KINETIC_ORIGINS:
            model = extend_with_constraint(model, decl)
    model = replace(model, declared=tuple(model.chain.get(d.label) or d for d in declared))
    table.freeze()
    log.info("parsed model %s: %d variables, %d constraints", model.name, model.dimension, len(declared))
    return model


def _declare(table, name, kind, lineno):
    if name in table:
        raise DuplicateLabelError(f"line {lineno}: symbol '{name}' declared twice")
    table.declare(name, kind)


def load_model(path, overrides=None):
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    stem = os.path.splitext(os.path.basename(path))[0]
    return parse_model(text, overrides=overrides, name=stem)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _solvability(decl, rewrites):
    """None when decl.solved_for is usable, else a reason"""
    var = decl.solved_for
    if var not in decl.expr.free_symbols():
        return f"'{var}' does not appear in {decl.label}"
    if linear_coefficients(decl.expr, var) is not None:
        return None
    if quadratic_coefficients(decl.expr, var) is not None:
        rule = rewrites.rule_for(var)
        if rule is None or rule.power != 2:
            return f"{decl.label} is quadratic in '{var}' but no '{var}^2' rewrite rule is declared"
        return None
    return f"{decl.label} is neither linear nor quadratic in '{var}'"


def validate_model(m):
    """Diagnostics for every violated model invariant (empty when valid)"""
    diagnostics = []
    table = m.symbols
    if set(m.one_form) != set(m.variables) or len(m.one_form) != len(m.variables):
        diagnostics.append(Diagnostic("one-form-size", "one-form components do not match the symplectic variables", "one_form"))

    velocities = {s.name for s in table.of_kind(SymbolKind.VELOCITY)}
    for var, component in m.one_form.items():
        if component.free_symbols() & velocities:
            diagnostics.append(Diagnostic("velocity-in-first-order", f"one-form component of '{var}' mentions a velocity", f"one_form.{var}"))
    if m.potential.free_symbols() & velocities:
        diagnostics.append(Diagnostic("velocity-in-first-order", "potential mentions a velocity", "potential"))

    multipliers = {v for v in m.variables if table.get(v).kind is SymbolKind.MULTIPLIER} | set(m.multipliers)
    for name in sorted(m.potential.free_symbols() & multipliers):
        diagnostics.append(Diagnostic("multiplier-in-potential", f"multiplier '{name}' appears in the potential", "potential"))

    declared_labels = {d.label for d in m.declared}
    for decl in m.declared + tuple(c for c in m.chain if c.label not in declared_labels):
        where = f"constraints.{decl.label}"
        if decl.expr.is_zero():
            diagnostics.append(Diagnostic("zero-constraint", f"{decl.label} is identically zero", where))
            continue
        if decl.solved_for:
            reason = _solvability(decl, m.rewrites)
            if reason:
                diagnostics.append(Diagnostic("solved-for", reason, where))
            elif quadratic_coefficients(decl.expr, decl.solved_for) and m.rewrites.branch(decl.solved_for) is None:
                diagnostics.append(Diagnostic("branch-required", f"no branch sign chosen for '{decl.solved_for}'", where))

    for rule in m.rewrites.rules:
        replacement = rule.replacement
        if rule.symbol not in replacement.free_symbols():
            continue
        if rule.symbol in replacement.denominator().free_symbols() or max(
            k[0] for k in split_coefficients(replacement, [rule.symbol])
        ) >= rule.power:
            diagnostics.append(Diagnostic("rewrite-degree", f"rule {rule} does not reduce the degree of '{rule.symbol}'", "rewrites"))

    if m.options.max_level < 1:
        diagnostics.append(Diagnostic("max-level", "max_level must be at least 1", "options"))

    coords = [p.coordinate for p in m.phase_pairs]
    momenta = [p.momentum for p in m.phase_pairs]
    if len(set(coords)) != len(coords) or len(set(momenta)) != len(momenta) or set(coords) & set(momenta):
        diagnostics.append(Diagnostic("phase-space", "phase-space pairing is not a bijection", "phase_space"))

    for diagnostic in diagnostics:
        log.debug("model %s: %s", m.name, diagnostic)
    return diagnostics


# ---------------------------------------------------------------------------
# Extension
# ---------------------------------------------------------------------------

def extend_with_constraint(m, c):
    """Inject c into the kinetic sector through one fresh multiplier variable"""
    if c.expr.is_zero():
        raise DuplicateConstraintError(f"constraint {c.label} is identically zero")
    for member in m.chain:
        if proportional(c.expr, member.expr):
            raise DuplicateConstraintError(f"constraint {c.label} is proportional to {member.label}")
    table = m.symbols
    taken = set(m.variables) | {d.multiplier for d in m.declared if d.multiplier} | set(m.multipliers)
    if c.multiplier and c.multiplier in table:
        if c.multiplier in m.variables:
            raise DuplicateConstraintError(f"multiplier '{c.multiplier}' is already a symplectic variable")
        multiplier = c.multiplier
    elif c.multiplier:
        multiplier = table.fresh(m.options.multiplier_prefix, SymbolKind.MULTIPLIER, name=c.multiplier).name
    else:
        multiplier = table.fresh(m.options.multiplier_prefix, SymbolKind.MULTIPLIER, taken=taken).name
    decl = replace(c, multiplier=multiplier)
    one_form = dict(m.one_form)
    one_form[multiplier] = c.expr
    log.debug("injected %s through multiplier %s", c.label, multiplier)
    return replace(m, variables=m.variables + (multiplier,), one_form=one_form, chain=m.chain.append(decl))


def without_constraints(m, labels):
    """The model before the given chain members were injected"""
    labels = set(labels)
    dropped = {c.multiplier for c in m.chain if c.label in labels}
    return replace(
        m,
        variables=tuple(v for v in m.variables if v not in dropped),
        one_form={v: e for v, e in m.one_form.items() if v not in dropped},
        chain=ConstraintChain(tuple(c for c in m.chain if c.label not in labels), m.chain.notes),
    )


def first_order_model(m):
    """First-order model built from the [lagrangian] section.

    The symplectic variables are the phase-space coordinates and momenta, the
    one-form is (sign*p, 0), the potential is the canonical Hamiltonian, and
    each primary constraint enters the kinetic sector through a multiplier.
    """
    from .dirac import legendre_scan, phase_space_of

    if m.lagrangian is None:
        raise ModelError(f"model {m.name} has no [lagrangian] section")
    ps = phase_space_of(m)
    hamiltonian, primaries = legendre_scan(m.lagrangian, ps)
    table = m.symbols
    variables = tuple(p.coordinate for p in m.phase_pairs) + tuple(p.momentum for p in m.phase_pairs)
    one_form = {v: table.zero() for v in variables}
    for pair in m.phase_pairs:
        one_form[pair.coordinate] = table.gen(pair.momentum) * pair.sign
    reduced = replace(
        m,
        name=f"{m.name}-first-order",
        variables=variables,
        one_form=one_form,
        potential=hamiltonian,
        declared=tuple(primaries),
        chain=ConstraintChain(),
    )
    for decl in primaries:
        reduced = extend_with_constraint(reduced, decl)
    return reduced


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def _constraint_line(c):
    attrs = [c.origin.value]
    if c.solved_for:
        attrs.append(f"solved_for={c.solved_for}")
    if c.multiplier:
        attrs.append(f"multiplier={c.multiplier}")
    return f"{c.label} : {c.expr} ; {' '.join(attrs)}"


def pretty_print(m):
    """Model file text that parses back to an equivalent model"""
    table = m.symbols
    lines = ["[options]", f"name = {m.name}", f"max_level = {m.options.max_level}"]
    lines.append(f"multiplier_prefix = {m.options.multiplier_prefix}")
    if m.options.time:
        lines.append(f"time = {m.options.time}")
    for symbol, sign in m.options.branch_signs.items():
        lines.append(f"branch.{symbol} = {'+' if sign > 0 else '-'}")
    lines += [f"{key} = {value}" for key, value in m.options.constants.items()]

    constants = [s for s in table.of_kind(SymbolKind.PARAMETER, SymbolKind.INTEGRATION_CONSTANT)]
    if constants:
        lines += ["", "[parameters]"]
        lines += [s.name if s.kind is SymbolKind.PARAMETER else f"{s.name} : {s.kind.value}" for s in constants]

    multipliers = set(m.multipliers)
    own = [v for v in m.variables if v not in multipliers]
    lines += ["", "[variables]"] + [f"{v} : {table.get(v).kind.value}" for v in own]

    lines += ["", "[one_form]"]
    lines += [f"{v} = {m.one_form[v]}" for v in own if not m.one_form[v].is_zero()]
    lines += ["", "[potential]", str(m.potential)]

    constraints = list(m.chain) + m.pending_gauge_fixings()
    if constraints:
        lines += ["", "[constraints]"] + [_constraint_line(c) for c in constraints]
    if m.rewrites.rules:
        lines += ["", "[rewrites]"] + [str(rule) for rule in m.rewrites.rules]
    if m.phase_pairs:
        lines += ["", "[phase_space]"]
        lines += [f"{p.coordinate} : {'-' if p.sign < 0 else ''}{p.momentum}" for p in m.phase_pairs]
    if m.lagrangian is not None:
        lines += ["", "[lagrangian]", str(m.lagrangian)]
    if m.hamiltonian is not None:
        lines += ["", "[hamiltonian]", str(m.hamiltonian)]
    return "\n".join(lines) + "\n"


def _same(a, b, table):
    if a is None or b is None:
        return a is None and b is None
    try:
        return parse_expr(str(b), table) == a
    except ExprError:
        return False


def models_equivalent(a, b):
    """Semantic equality of two models, independent of their symbol tables"""
    table = a.symbols
    if (a.name, a.variables, a.parameters, a.phase_pairs) != (b.name, b.variables, b.parameters, b.phase_pairs):
        return False
    if a.options != b.options:
        return False
    if any(not _same(a.one_form[v], b.one_form[v], table) for v in a.variables):
        return False
    for left, right in ((a.potential, b.potential), (a.lagrangian, b.lagrangian), (a.hamiltonian, b.hamiltonian)):
        if not _same(left, right, table):
            return False
    for left, right in ((list(a.chain), list(b.chain)), (list(a.declared), list(b.declared))):
        if len(left) != len(right):
            return False
        for x, y in zip(left, right):
            if (x.label, x.origin, x.solved_for, x.multiplier) != (y.label, y.origin, y.solved_for, y.multiplier):
                return False
            if not _same(x.expr, y.expr, table):
                return False
    if len(a.rewrites.rules) != len(b.rewrites.rules):
        return False
    for x, y in zip(a.rewrites.rules, b.rewrites.rules):
        if (x.symbol, x.power) != (y.symbol, y.power) or not _same(x.replacement, y.replacement, table):
            return False
    return True
