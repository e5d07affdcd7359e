"""
Bracket tables: pairwise (generalized) brackets among a basis of symbols
"""
from dataclasses import dataclass

import pandas as pd

from .symexpr import differentiate


@dataclass(frozen=True)
class BracketTable:
    basis: tuple
    entries: tuple

    def __post_init__(self):
        if len(self.entries) != len(self.basis):
            raise ValueError("bracket table must be square over its basis")

    @property
    def table(self):
        return self.entries[0][0].table

    def index(self, name):
        return self.basis.index(name)

    def bracket(self, a, b):
        return self.entries[self.index(a)][self.index(b)]

    def apply(self, left, right):
        """Bilinear extension {A, B} = sum dA/dw {w, v} dB/dv"""
        total = self.table.zero()
        d_left = [differentiate(left, w) for w in self.basis]
        d_right = [differentiate(right, v) for v in self.basis]
        for i, da in enumerate(d_left):
            if da.is_zero():
                continue
            for j, db in enumerate(d_right):
                entry = self.entries[i][j]
                if db.is_zero() or entry.is_zero():
                    continue
                total = total + da * entry * db
        return total

    def restrict(self, names):
        names = [n for n in names if n in self.basis]
        rows = tuple(tuple(self.bracket(a, b) for b in names) for a in names)
        return BracketTable(tuple(names), rows)

    def nonzero_pairs(self):
        n = len(self.basis)
        return [
            (self.basis[i], self.basis[j], self.entries[i][j])
            for i in range(n)
            for j in range(i + 1, n)
            if not self.entries[i][j].is_zero()
        ]

    def as_strings(self):
        return [[str(e) for e in row] for row in self.entries]

    def to_frame(self):
        return pd.DataFrame(self.as_strings(), index=list(self.basis), columns=list(self.basis))


def canonical_table(pairs, table, extra=()):
    """Poisson table of (coordinate, momentum, sign) pairs; {q, p} = sign"""
    basis = []
    for q, p, _ in pairs:
        basis.extend([q, p])
    basis.extend(extra)
    n = len(basis)
    rows = [[table.zero() for _ in range(n)] for _ in range(n)]
    for q, p, sign in pairs:
        i, j = basis.index(q), basis.index(p)
        rows[i][j] = table.const(sign)
        rows[j][i] = table.const(-sign)
    return BracketTable(tuple(basis), tuple(tuple(r) for r in rows))
