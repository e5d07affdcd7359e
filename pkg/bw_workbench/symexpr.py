"""
Exact symbolic kernel: multivariate rational functions over the rationals.

Expressions live in a sympy polynomial fraction field built over the symbol
table, so every value is kept in canonical form (numerator and denominator
coprime, integer coefficients, positive denominator leading coefficient).
"""
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Mapping

import sympy as sp
from sympy.polys.domains import QQ
from sympy.polys.fields import FracField
from sympy.polys.orderings import grlex

log = logging.getLogger(__name__)


class ExprError(Exception):
    """Base class for expression errors"""


class ExprSyntaxError(ExprError):
    def __init__(self, message, line=1, column=1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UndeclaredSymbolError(ExprError):
    pass


class DivisionByZeroError(ExprError):
    pass


class PoleError(ExprError):
    pass


class SubstitutionError(ExprError):
    pass


class SymbolKind(str, Enum):
    COORDINATE = "coordinate"
    MOMENTUM = "momentum"
    MULTIPLIER = "multiplier"
    PARAMETER = "parameter"
    INTEGRATION_CONSTANT = "integration-constant"
    DEFINED = "defined"
    VELOCITY = "velocity"


PARAMETER_KINDS = frozenset({SymbolKind.PARAMETER, SymbolKind.INTEGRATION_CONSTANT})


@dataclass(frozen=True)
class Symbol:
    name: str
    kind: SymbolKind
    order_index: int

    @property
    def is_parameter(self):
        return self.kind in PARAMETER_KINDS


class SymbolTable:
    """Ordered symbol declarations; the order fixes every canonical form.

    After freeze() no new names can be declared, but fresh() may still append
    generated symbols (multipliers, integration constants) at the end of the
    order. Expressions built before the table grew are lifted lazily.
    """

    def __init__(self):
        self._symbols = {}
        self._frozen = False
        self._field = None
        self._index = {}

    def declare(self, name, kind):
        if self._frozen:
            raise ExprError(f"symbol table is frozen, cannot declare '{name}'")
        return self._add(name, SymbolKind(kind))

    def _add(self, name, kind):
        if name in self._symbols:
            existing = self._symbols[name]
            if existing.kind != kind:
                raise ExprError(f"symbol '{name}' already declared as {existing.kind.value}")
            return existing
        symbol = Symbol(name, kind, len(self._symbols))
        self._symbols[name] = symbol
        self._index[name] = symbol.order_index
        self._field = None
        return symbol

    def fresh(self, prefix, kind, name=None, taken=()):
        """Generated symbol named `name` or `<prefix><k>`.

        k is the smallest index whose name is not in `taken` and not declared
        with another kind; a symbol generated earlier with the same name and
        kind is reused, so repeated analyses pick the same names.
        """
        kind = SymbolKind(kind)
        if name is None:
            k = 1
            while True:
                name = f"{prefix}{k}"
                existing = self._symbols.get(name)
                if name not in taken and (existing is None or existing.kind is kind):
                    break
                k += 1
        elif name in self._symbols:
            raise ExprError(f"symbol '{name}' already declared")
        log.debug("fresh symbol %s (%s)", name, kind.value)
        return self._add(name, kind)

    def freeze(self):
        self._frozen = True

    @property
    def frozen(self):
        return self._frozen

    def get(self, name):
        try:
            return self._symbols[name]
        except KeyError:
            raise UndeclaredSymbolError(f"undeclared identifier '{name}'") from None

    def __contains__(self, name):
        return name in self._symbols

    def __iter__(self):
        return iter(self._symbols.values())

    def __len__(self):
        return len(self._symbols)

    def names(self):
        return list(self._symbols)

    def of_kind(self, *kinds):
        wanted = {SymbolKind(k) for k in kinds}
        return [s for s in self._symbols.values() if s.kind in wanted]

    def is_parameter(self, name):
        return self.get(name).kind in PARAMETER_KINDS

    @property
    def field(self):
        if self._field is None:
            gens = tuple(sp.Symbol(n) for n in self._symbols) or (sp.Symbol("_unit"),)
            self._field = FracField(gens, QQ, grlex)
        return self._field

    def position(self, name):
        return self._index[name]

    def gen(self, name):
        index = self._index.get(name)
        if index is None:
            raise UndeclaredSymbolError(f"undeclared identifier '{name}'")
        return Expr(self, self.field.gens[index])

    def const(self, value):
        value = Fraction(value)
        return Expr(self, self.field.ground_new(QQ(value.numerator, value.denominator)))

    def zero(self):
        return Expr(self, self.field.zero)

    def one(self):
        return Expr(self, self.field.one)


def _lift_poly(poly, ring, index_map, width):
    out = {}
    for monom, coeff in poly.terms():
        target = [0] * width
        for i, e in enumerate(monom):
            if e:
                target[index_map[i]] = e
        out[tuple(target)] = coeff
    return ring.from_dict(out)


def _lift(frac, table):
    field_ = table.field
    if frac.field is field_:
        return frac
    old_names = [str(s) for s in frac.field.symbols]
    index_map = [table.position(n) if n in table else -1 for n in old_names]
    width = len(field_.symbols)
    numer = _lift_poly(frac.numer, field_.ring, index_map, width)
    denom = _lift_poly(frac.denom, field_.ring, index_map, width)
    return field_.new(numer, denom)


def _q(coeff):
    return Fraction(int(coeff.numerator), int(coeff.denominator))


def _format_poly(poly, names):
    terms = poly.terms()
    if not terms:
        return "0"
    parts = []
    for position, (monom, coeff) in enumerate(terms):
        c = _q(coeff)
        factors = []
        for name, e in zip(names, monom):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        magnitude = abs(c)
        if not factors:
            body = str(magnitude)
        elif magnitude == 1:
            body = "*".join(factors)
        elif magnitude.denominator == 1:
            body = f"{magnitude.numerator}*" + "*".join(factors)
        else:
            body = f"{magnitude.numerator}*" + "*".join(factors) + f"/{magnitude.denominator}"
        if position == 0:
            parts.append(f"-{body}" if c < 0 else body)
        else:
            parts.append(f" - {body}" if c < 0 else f" + {body}")
    return "".join(parts)


def _is_atom(poly, names):
    terms = poly.terms()
    if len(terms) != 1:
        return False
    monom, coeff = terms[0]
    if coeff < 0:
        return False
    degree = sum(monom)
    if degree == 0:
        return coeff.denominator == 1
    return coeff == 1 and degree == 1


class Expr:
    """Immutable exact rational function bound to a SymbolTable"""

    __slots__ = ("table", "_frac")

    def __init__(self, table, frac):
        self.table = table
        self._frac = frac

    @property
    def frac(self):
        if self._frac.field is not self.table.field:
            self._frac = _lift(self._frac, self.table)
        return self._frac

    def _coerce(self, other):
        if isinstance(other, Expr):
            return other.frac
        if isinstance(other, (int, Fraction)):
            return self.table.const(other).frac
        return NotImplemented

    def _wrap(self, frac):
        return Expr(self.table, frac)

    def __add__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.frac + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.frac - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(o - self.frac)

    def __mul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.frac * o)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if not o:
            raise DivisionByZeroError("division by zero expression")
        return self._wrap(self.frac / o)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if self.is_zero():
            raise DivisionByZeroError("division by zero expression")
        return self._wrap(o / self.frac)

    def __pow__(self, exponent):
        if not isinstance(exponent, int):
            raise ExprError("only integer powers are supported")
        if exponent < 0 and self.is_zero():
            raise DivisionByZeroError("negative power of zero")
        return self._wrap(self.frac ** exponent)

    def __neg__(self):
        return self._wrap(-self.frac)

    def __pos__(self):
        return self

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return not (self.frac - o)

    def __ne__(self, other):
        result = self.__eq__(other)
        return result if result is NotImplemented else not result

    def __hash__(self):
        return hash(str(self))

    def __bool__(self):
        return not self.is_zero()

    def __str__(self):
        frac = self.frac
        names = [str(s) for s in frac.field.symbols]
        numer = _format_poly(frac.numer, names)
        if frac.denom == 1:
            return numer
        denom = _format_poly(frac.denom, names)
        if len(frac.numer.terms()) > 1:
            numer = f"({numer})"
        if not _is_atom(frac.denom, names):
            denom = f"({denom})"
        return f"{numer}/{denom}"

    def __repr__(self):
        return f"Expr({str(self)!r})"

    def is_zero(self):
        return not self.frac.numer

    def numerator(self):
        frac = self.frac
        return self._wrap(frac.field.new(frac.numer, frac.field.ring.one))

    def denominator(self):
        frac = self.frac
        return self._wrap(frac.field.new(frac.denom, frac.field.ring.one))

    def free_symbols(self):
        frac = self.frac
        names = [str(s) for s in frac.field.symbols]
        found = set()
        for poly in (frac.numer, frac.denom):
            for monom in poly.monoms():
                for name, e in zip(names, monom):
                    if e:
                        found.add(name)
        return found

    def is_constant(self):
        return not self.free_symbols()

    def is_parameter_only(self):
        return all(self.table.is_parameter(n) for n in self.free_symbols())

    def to_fraction(self):
        if not self.is_constant():
            raise ExprError(f"'{self}' is not a constant")
        frac = self.frac
        return _q(frac.numer.LC) / _q(frac.denom.LC)

    def total_degree(self):
        frac = self.frac
        top = max((sum(m) for m in frac.numer.monoms()), default=0)
        bottom = max((sum(m) for m in frac.denom.monoms()), default=0)
        return top + bottom

    def leading_coefficient(self):
        terms = self.frac.numer.terms()
        if not terms:
            return Fraction(0)
        return _q(terms[0][1])

    def factors(self):
        """Irreducible factors of numerator and denominator as (Expr, multiplicity) pairs"""
        frac = self.frac
        out = []
        for poly, sign in ((frac.numer, 1), (frac.denom, -1)):
            if poly.is_ground:
                continue
            _, pairs = poly.factor_list()
            for factor, k in pairs:
                out.append((self._wrap(frac.field.new(factor, frac.field.ring.one)), sign * k))
        return out


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<num>\d+(?:\.\d+)?)|(?P<ident>[^\W\d]\w*)|(?P<op>[-+*/^()\[\]])"
)


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text):
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ExprSyntaxError(f"unexpected character '{text[pos]}'", line, pos - line_start + 1)
        kind = match.lastgroup
        if kind == "nl":
            line += 1
            line_start = match.end()
        elif kind != "ws":
            tokens.append(_Token(kind, match.group(), line, match.start() - line_start + 1))
        pos = match.end()
    tokens.append(_Token("end", "", line, pos - line_start + 1))
    return tokens


class _ExprParser:
    """Recursive descent over the expression grammar"""

    def __init__(self, text, table):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.table = table

    @property
    def current(self):
        return self.tokens[self.pos]

    def advance(self):
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, text):
        token = self.current
        if token.text != text:
            found = token.text or "end of input"
            raise ExprSyntaxError(f"expected '{text}', found '{found}'", token.line, token.column)
        return self.advance()

    def parse(self):
        value = self.expr()
        token = self.current
        if token.kind != "end":
            raise ExprSyntaxError(f"unexpected '{token.text}'", token.line, token.column)
        return value

    def expr(self):
        value = self.term()
        while self.current.text in ("+", "-"):
            op = self.advance().text
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self):
        value = self.factor()
        while self.current.text in ("*", "/"):
            token = self.advance()
            rhs = self.factor()
            if token.text == "*":
                value = value * rhs
            else:
                if rhs.is_zero():
                    raise DivisionByZeroError(f"division by zero (line {token.line}, column {token.column})")
                value = value / rhs
        return value

    def factor(self):
        if self.current.text == "-":
            self.advance()
            return -self.factor()
        if self.current.text == "+":
            self.advance()
            return self.factor()
        value = self.base()
        if self.current.text == "^":
            token = self.advance()
            sign = 1
            if self.current.text in ("-", "+"):
                sign = -1 if self.advance().text == "-" else 1
            number = self.current
            if number.kind != "num" or "." in number.text:
                raise ExprSyntaxError("exponent must be an integer", number.line, number.column)
            self.advance()
            exponent = sign * int(number.text)
            if exponent < 0 and value.is_zero():
                raise DivisionByZeroError(f"negative power of zero (line {token.line}, column {token.column})")
            value = value ** exponent
        return value

    def base(self):
        token = self.current
        if token.kind == "num":
            self.advance()
            return self.table.const(Fraction(token.text))
        if token.kind == "ident":
            self.advance()
            name = token.text
            if self.current.text == "[":
                self.advance()
                index = self.current
                if index.kind != "num" or "." in index.text:
                    raise ExprSyntaxError("non-concrete index", index.line, index.column)
                self.advance()
                self.expect("]")
                name = f"{name}_{index.text}"
            if name not in self.table:
                raise UndeclaredSymbolError(
                    f"undeclared identifier '{name}' (line {token.line}, column {token.column})"
                )
            return self.table.gen(name)
        if token.text == "(":
            self.advance()
            value = self.expr()
            self.expect(")")
            return value
        found = token.text or "end of input"
        raise ExprSyntaxError(f"unexpected '{found}'", token.line, token.column)


def parse_expr(text, symbols):
    """Parse `text` into a canonical Expr over the declared `symbols`"""
    return _ExprParser(text, symbols).parse()


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def arith(op, lhs, rhs):
    if op == "add":
        return lhs + rhs
    if op == "sub":
        return lhs - rhs
    if op == "mul":
        return lhs * rhs
    if op == "div":
        return lhs / rhs
    if op == "pow-int":
        if isinstance(rhs, Expr):
            rhs = rhs.to_fraction()
        if Fraction(rhs).denominator != 1:
            raise ExprError("exponent must be an integer")
        return lhs ** int(rhs)
    raise ExprError(f"unknown operation '{op}'")


def differentiate(e, s):
    name = s.name if isinstance(s, Symbol) else s
    table = e.table
    if name not in table:
        raise UndeclaredSymbolError(f"undeclared identifier '{name}'")
    frac = e.frac
    ring = frac.field.ring
    gen = ring.gens[table.position(name)]
    numer, denom = frac.numer, frac.denom
    d_numer = numer.diff(gen)
    d_denom = denom.diff(gen)
    if not d_denom:
        return e._wrap(frac.field.new(d_numer, denom))
    return e._wrap(frac.field.new(d_numer * denom - numer * d_denom, denom ** 2))


def gradient(e, names):
    return [differentiate(e, n) for n in names]


def _map_terms(poly, table, bindings):
    """Rebuild a polynomial as a field element with `bindings` (position -> frac) applied"""
    field_ = table.field
    ring = field_.ring
    untouched = {}
    result = field_.zero
    for monom, coeff in poly.terms():
        if not any(monom[i] for i in bindings):
            untouched[monom] = coeff
            continue
        rest = list(monom)
        value = field_.one
        for i, replacement in bindings.items():
            if monom[i]:
                value = value * replacement ** monom[i]
                rest[i] = 0
        result += field_.new(ring.term_new(tuple(rest), coeff), ring.one) * value
    if untouched:
        result += field_.new(ring.from_dict(untouched), ring.one)
    return result


def substitute(e, bindings):
    """Simultaneous substitution of symbols by expressions"""
    if not bindings:
        return e
    table = e.table
    positions = {}
    for key, value in bindings.items():
        name = key.name if isinstance(key, Symbol) else key
        symbol = table.get(name)
        if not isinstance(value, Expr):
            value = table.const(value)
        if symbol.is_parameter and name in value.free_symbols():
            raise SubstitutionError(f"parameter '{name}' bound to an expression containing itself")
        positions[table.position(name)] = value.frac
    frac = e.frac
    numer = _map_terms(frac.numer, table, positions)
    denom = _map_terms(frac.denom, table, positions)
    if not denom:
        raise PoleError(f"substitution makes the denominator of '{e}' vanish")
    return e._wrap(numer / denom)


def _eval_poly(poly, values):
    total = Fraction(0)
    for monom, coeff in poly.terms():
        term = _q(coeff)
        for i, exp in enumerate(monom):
            if exp:
                term *= values[i] ** exp
        total += term
    return total


def eval_at(e, point):
    """Exact value of `e` at a rational point given as {name: rational}"""
    table = e.table
    frac = e.frac
    names = [str(s) for s in frac.field.symbols]
    values = {}
    for i, name in enumerate(names):
        if name in point:
            values[i] = Fraction(point[name])
    for name in e.free_symbols():
        if table.position(name) not in values:
            raise ExprError(f"no value assigned to '{name}'")
    denom = _eval_poly(frac.denom, values)
    if denom == 0:
        raise PoleError(f"'{e}' has a pole at the evaluation point")
    return _eval_poly(frac.numer, values) / denom


@dataclass(frozen=True)
class RewriteRule:
    symbol: str
    power: int
    replacement: Expr

    def __str__(self):
        return f"{self.symbol}^{self.power} -> {self.replacement}"


@dataclass(frozen=True)
class RewriteSystem:
    rules: tuple = ()
    branch_signs: Mapping[str, int] = field(default_factory=dict)

    def __bool__(self):
        return bool(self.rules)

    def rule_for(self, symbol):
        for rule in self.rules:
            if rule.symbol == symbol:
                return rule
        return None

    def branch(self, symbol):
        return self.branch_signs.get(symbol)


def _reduce_poly(poly, table, rule):
    field_ = table.field
    ring = field_.ring
    index = table.position(rule.symbol)
    replacement = rule.replacement.frac
    untouched = {}
    result = field_.zero
    changed = False
    for monom, coeff in poly.terms():
        exp = monom[index]
        if exp < rule.power:
            untouched[monom] = coeff
            continue
        changed = True
        k, r = divmod(exp, rule.power)
        rest = list(monom)
        rest[index] = r
        result += field_.new(ring.term_new(tuple(rest), coeff), ring.one) * replacement ** k
    if untouched:
        result += field_.new(ring.from_dict(untouched), ring.one)
    return result, changed


def reduce_mod(e, rw):
    """Rewrite every power pattern of `rw` until none remains"""
    if not rw:
        return e
    table = e.table
    current = e
    for _ in range(64):
        frac = current.frac
        numer, denom = frac.numer, frac.denom
        changed = False
        for rule in rw.rules:
            if rule.symbol not in table:
                continue
            numer_f, c1 = _reduce_poly(numer, table, rule)
            denom_f, c2 = _reduce_poly(denom, table, rule)
            if c1 or c2:
                if not denom_f:
                    raise PoleError(f"denominator of '{e}' vanishes modulo {rule}")
                reduced = numer_f / denom_f
                numer, denom = reduced.numer, reduced.denom
                changed = True
        current = e._wrap(table.field.new(numer, denom))
        if not changed:
            return current
    raise ExprError(f"rewriting of '{e}' did not terminate")


# ---------------------------------------------------------------------------
# Polynomial structure helpers
# ---------------------------------------------------------------------------

def split_coefficients(e, variables):
    """Write e as sum of c_m * variables^m with coefficients free of `variables`.

    Returns {exponent tuple: Expr}. The denominator of e must not involve the
    variables.
    """
    table = e.table
    frac = e.frac
    positions = [table.position(v) for v in variables]
    denom_symbols = e.denominator().free_symbols()
    clash = denom_symbols.intersection(variables)
    if clash:
        raise ExprError(f"denominator of '{e}' depends on {sorted(clash)}")
    field_ = frac.field
    ring = field_.ring
    grouped = {}
    for monom, coeff in frac.numer.terms():
        key = tuple(monom[i] for i in positions)
        rest = list(monom)
        for i in positions:
            rest[i] = 0
        grouped.setdefault(key, {})[tuple(rest)] = coeff
    denom = field_.new(frac.denom, ring.one)
    return {key: e._wrap(field_.new(ring.from_dict(terms), ring.one) / denom) for key, terms in grouped.items()}


def monomial(table, variables, exponents):
    value = table.one()
    for name, exp in zip(variables, exponents):
        if exp:
            value = value * table.gen(name) ** exp
    return value


def linear_coefficients(e, s):
    """(c1, c0) with e = c1*s + c0 and c1 free of s, or None if e is not linear in s"""
    name = s.name if isinstance(s, Symbol) else s
    try:
        parts = split_coefficients(e, [name])
    except ExprError:
        return None
    if any(k[0] > 1 for k in parts) or (1,) not in parts:
        return None
    return parts[(1,)], parts.get((0,), e.table.zero())


def quadratic_coefficients(e, s):
    """(c2, c1, c0) when e is quadratic in s, else None"""
    name = s.name if isinstance(s, Symbol) else s
    try:
        parts = split_coefficients(e, [name])
    except ExprError:
        return None
    if any(k[0] > 2 for k in parts) or (2,) not in parts:
        return None
    zero = e.table.zero()
    return parts[(2,)], parts.get((1,), zero), parts.get((0,), zero)


def is_multiple_of(c, m):
    """True when c = r*m with r free of non-parameter symbols in its denominator"""
    if c.is_zero():
        return True
    if m.is_zero():
        return False
    ratio = c / m
    return ratio.denominator().is_parameter_only()


def proportional(a, b):
    """True when a/b involves parameters only"""
    if a.is_zero() or b.is_zero():
        return a.is_zero() and b.is_zero()
    return (a / b).is_parameter_only()


def normalize_sign(e):
    return -e if e.leading_coefficient() < 0 else e


def _grlex_key(monom):
    return (sum(monom), monom)


def reduce_by(e, divisor, variables):
    """Normal form of e's numerator modulo one polynomial relation.

    Division is by the leading term (grlex over `variables`) of the divisor's
    numerator; coefficients are rational functions of the remaining symbols.
    """
    variables = list(variables)
    table = e.table
    g = split_coefficients(divisor.numerator(), variables)
    g = {k: v for k, v in g.items() if not v.is_zero()}
    if not g:
        raise ExprError("cannot reduce by the zero relation")
    lead = max(g, key=_grlex_key)
    if sum(lead) == 0:
        raise ExprError(f"relation '{divisor}' does not involve the reduced variables")
    lead_coeff = g[lead]
    pending = {k: v for k, v in split_coefficients(e.numerator(), variables).items() if not v.is_zero()}
    remainder = {}
    while pending:
        m = max(pending, key=_grlex_key)
        c = pending.pop(m)
        if all(a >= b for a, b in zip(m, lead)):
            shift = tuple(a - b for a, b in zip(m, lead))
            q = c / lead_coeff
            for gm, gc in g.items():
                if gm == lead:
                    continue
                target = tuple(a + b for a, b in zip(shift, gm))
                updated = pending.get(target, table.zero()) - q * gc
                if updated.is_zero():
                    pending.pop(target, None)
                else:
                    pending[target] = updated
        else:
            remainder[m] = c
    result = table.zero()
    for m, c in remainder.items():
        result = result + c * monomial(table, variables, m)
    return result / e.denominator()
