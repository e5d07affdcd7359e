import random
from fractions import Fraction
from pathlib import Path

import pytest

from bw_workbench.modelspec import load_model
from bw_workbench.symexpr import SymbolTable

MODELS = Path(__file__).resolve().parent.parent / "models"


def model_file(name):
    return str(MODELS / f"{name}.model")


@pytest.fixture
def load():
    """Fresh copy of a bundled model; keyword arguments override integer constants"""

    def _load(name, **constants):
        return load_model(model_file(name), overrides=constants or None)

    return _load


@pytest.fixture
def table():
    t = SymbolTable()
    for name in ("a", "b"):
        t.declare(name, "parameter")
    for name in ("x", "y"):
        t.declare(name, "coordinate")
    for name in ("p_x", "p_y"):
        t.declare(name, "momentum")
    return t


@pytest.fixture
def rng():
    return random.Random(20240607)


@pytest.fixture
def random_expr(table, rng):
    """Random polynomial in x, y, a, optionally over the pole-free 1 + x^2 + y^2"""

    def _make():
        expr = table.zero()
        for _ in range(rng.randint(1, 4)):
            term = table.const(Fraction(rng.randint(-9, 9), rng.randint(1, 5)))
            for name in ("x", "y", "a"):
                exponent = rng.randint(0, 3)
                if exponent:
                    term = term * table.gen(name) ** exponent
            expr = expr + term
        if rng.random() < 0.5:
            expr = expr / (1 + table.gen("x") ** 2 + table.gen("y") ** 2)
        return expr

    return _make


def proportional_vectors(left, right):
    """True when two component lists differ by a common nonzero factor"""
    pivot = next(i for i, v in enumerate(right) if not v.is_zero())
    if left[pivot].is_zero():
        return False
    scale = left[pivot] / right[pivot]
    return all(l == scale * r for l, r in zip(left, right))
