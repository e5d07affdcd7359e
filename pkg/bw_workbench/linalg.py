"""
Fraction-free (Bareiss) elimination over the rational-function field.

Rows are first scaled by the lcm of their denominators, so elimination runs in
the polynomial ring with exact division and no gcd per step.
"""
import logging

from .symexpr import Expr

log = logging.getLogger(__name__)


class SingularMatrixError(ArithmeticError):
    pass


def _degree(poly):
    return max((sum(m) for m in poly.monoms()), default=0)


def _as_polynomials(matrix):
    """Polynomial rows and the per-row scale that cleared their denominators"""
    rows, scales = [], []
    for row in matrix:
        fracs = [e.frac for e in row]
        scale = fracs[0].denom
        for f in fracs[1:]:
            if f.denom != scale:
                scale = scale.lcm(f.denom)
        rows.append([f.numer if f.denom == scale else f.numer * scale.exquo(f.denom) for f in fracs])
        scales.append(scale)
    return rows, scales


def _pivot_row(rows, start, col):
    candidates = [i for i in range(start, len(rows)) if rows[i][col]]
    if not candidates:
        return None
    # least total degree keeps intermediate minors small
    return min(candidates, key=lambda i: (_degree(rows[i][col]), len(rows[i][col]), i))


def _bareiss(rows, limit, ring):
    previous = ring.one
    sign = 1
    pivots = []
    ncols = len(rows[0])
    r = 0
    for k in range(limit):
        if r == len(rows):
            break
        p = _pivot_row(rows, r, k)
        if p is None:
            continue
        if p != r:
            rows[r], rows[p] = rows[p], rows[r]
            sign = -sign
        pivot = rows[r][k]
        for i in range(r + 1, len(rows)):
            factor = rows[i][k]
            for j in range(k + 1, ncols):
                value = pivot * rows[i][j]
                if factor and rows[r][j]:
                    value = value - factor * rows[r][j]
                rows[i][j] = value.exquo(previous) if previous != 1 else value
            rows[i][k] = ring.zero
        previous = pivot
        pivots.append((r, k))
        r += 1
    return pivots, sign


def echelon(matrix, columns=None):
    """Bareiss forward elimination.

    Returns (rows, pivots, sign) where pivots lists (row, column) pairs and
    sign tracks row swaps. Only the first `columns` columns are searched for
    pivots. Rows come back scaled by their cleared denominators, which leaves
    the row space unchanged.
    """
    if not matrix:
        return [], [], 1
    table = matrix[0][0].table
    field = table.field
    rows, _ = _as_polynomials(matrix)
    limit = len(rows[0]) if columns is None else columns
    pivots, sign = _bareiss(rows, limit, field.ring)
    return [[Expr(table, field.new(p)) for p in row] for row in rows], pivots, sign


def determinant(matrix):
    n = len(matrix)
    if n == 0:
        raise ValueError("determinant of an empty matrix")
    table = matrix[0][0].table
    field = table.field
    rows, scales = _as_polynomials(matrix)
    pivots, sign = _bareiss(rows, n, field.ring)
    if len(pivots) < n:
        return table.zero()
    scale = field.ring.one
    for s in scales:
        scale = scale * s
    det = Expr(table, field.new(rows[n - 1][n - 1], scale))
    return -det if sign < 0 else det


def kernel(matrix):
    """Right null space basis; each vector has its free component set to 1"""
    rows, pivots, _ = echelon(matrix)
    if not rows:
        return []
    ncols = len(rows[0])
    table = rows[0][0].table
    pivot_cols = {k: r for r, k in pivots}
    free_cols = [k for k in range(ncols) if k not in pivot_cols]
    basis = []
    for free in free_cols:
        vector = [table.zero() for _ in range(ncols)]
        vector[free] = table.one()
        for r, k in reversed(pivots):
            total = table.zero()
            for j in range(k + 1, ncols):
                if not vector[j].is_zero() and not rows[r][j].is_zero():
                    total = total + rows[r][j] * vector[j]
            vector[k] = -total / rows[r][k]
        basis.append((vector, free))
    log.debug("kernel of %dx%d matrix has dimension %d", len(rows), ncols, len(basis))
    return basis


def inverse(matrix):
    """Gauss-Jordan on [M | I] after a Bareiss forward pass"""
    n = len(matrix)
    table = matrix[0][0].table
    augmented = [list(row) + [table.one() if i == j else table.zero() for j in range(n)] for i, row in enumerate(matrix)]
    rows, pivots, _ = echelon(augmented, columns=n)
    if len(pivots) < n:
        raise SingularMatrixError("matrix is singular")
    for r in range(n - 1, -1, -1):
        pivot = rows[r][r]
        rows[r] = [entry / pivot for entry in rows[r]]
        for i in range(r):
            factor = rows[i][r]
            if factor.is_zero():
                continue
            rows[i] = [a - factor * b for a, b in zip(rows[i], rows[r])]
    return [row[n:] for row in rows]


def multiply(a, b):
    table = a[0][0].table
    inner = len(b)
    out = []
    for row in a:
        new_row = []
        for j in range(len(b[0])):
            total = table.zero()
            for k in range(inner):
                if not row[k].is_zero() and not b[k][j].is_zero():
                    total = total + row[k] * b[k][j]
            new_row.append(total)
        out.append(new_row)
    return out


def is_identity(matrix):
    return all((entry - (1 if i == j else 0)).is_zero() for i, row in enumerate(matrix) for j, entry in enumerate(row))


def is_antisymmetric(matrix):
    n = len(matrix)
    return all((matrix[i][j] + matrix[j][i]).is_zero() for i in range(n) for j in range(i, n))
