"""
Report serialization (text, JSON, Excel) and Dirac/BW comparison
"""
import json
import logging
from dataclasses import dataclass, field
from enum import Enum

import pandas as pd

from .dirac import DiracMatrix, Transformation
from .dynamics import MotionSystem, OracleResult
from .symexpr import Expr, PARAMETER_KINDS, SymbolKind, is_multiple_of, substitute

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"


def _plain(value):
    """JSON-ready copy of report extras"""
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Expr):
        return str(value)
    if isinstance(value, DiracMatrix):
        return {"labels": value.labels(), "entries": value.as_strings()}
    if isinstance(value, Transformation):
        return {
            "generator": value.generator,
            "variations": {k: str(v) for k, v in value.variations.items()},
            "delta_h": None if value.delta_h is None else str(value.delta_h),
        }
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return str(value)


def _level_dict(record):
    return {
        "level": record.level,
        "variables": list(record.variables),
        "one_form": {v: str(e) for v, e in record.one_form.items()},
        "potential": str(record.potential),
        "matrix": record.matrix.as_strings(),
        "determinant": str(record.determinant),
        "zero_modes": [mode.as_strings() for mode in record.zero_modes],
        "candidates": [
            {"mode": c.mode, "contraction": str(c.contraction), "disposition": c.disposition, "label": c.label}
            for c in record.candidates
        ],
        "injected": list(record.injected),
        "note": record.note,
        "warnings": list(record.warnings),
    }


def to_dict(report):
    model = report.model
    out = {
        "schema_version": SCHEMA_VERSION,
        "algorithm": report.algorithm,
        "model": model.name,
        "parameters": [s.name for s in model.symbols if s.kind in PARAMETER_KINDS],
        "verdict": {"kind": report.verdict.value, "level": report.final_level},
        "levels": [_level_dict(r) for r in report.levels],
        "chain": [c.to_dict() for c in report.chain],
        "rewrites": [str(rule) for rule in model.rewrites.rules],
        "brackets": None,
        "hamiltonian": None if report.hamiltonian is None else str(report.hamiltonian),
        "reduced_model": None,
        "generator": None,
        "transformation": None,
        "delta_potential": None if report.delta_potential is None else str(report.delta_potential),
        "equations": None,
        "warnings": list(report.warnings),
        "checks": [c.to_dict() if isinstance(c, OracleResult) else _plain(c) for c in report.checks],
        "extras": _plain(report.extras),
    }
    if report.brackets is not None:
        out["brackets"] = {"basis": list(report.brackets.basis), "entries": report.brackets.as_strings()}
    if report.reduced_model is not None:
        reduced = report.reduced_model
        out["reduced_model"] = {
            "variables": list(reduced.variables),
            "one_form": {v: str(reduced.one_form[v]) for v in reduced.variables},
            "potential": str(reduced.potential),
        }
    if report.generator is not None:
        out["generator"] = {"variables": list(report.generator.variables), "components": report.generator.as_strings()}
    if report.transformation is not None:
        out["transformation"] = {k: str(v) for k, v in report.transformation.items()}
    if isinstance(report.equations, MotionSystem):
        out["equations"] = report.equations.as_strings()
    return out


def _indent(text, prefix="  "):
    return "\n".join(prefix + line for line in text.splitlines())


def to_text(report):
    model = report.model
    lines = [f"Model: {model.name}  (algorithm {report.algorithm})"]
    lines.append(f"Verdict: {report.verdict.value} at level {report.final_level}")
    if model.rewrites.rules:
        lines.append("Rewrites: " + ", ".join(str(r) for r in model.rewrites.rules))
    for record in report.levels:
        lines += ["", f"Level {record.level}", f"  variables: {', '.join(record.variables)}"]
        lines.append(f"  potential: {record.potential}")
        lines.append("  f:")
        lines.append(_indent(record.matrix.to_frame().to_string(), "    "))
        lines.append(f"  det f = {record.determinant}")
        for index, mode in enumerate(record.zero_modes):
            lines.append(f"  zero-mode {index}: ({', '.join(mode.as_strings())})")
        for c in record.candidates:
            label = f" -> {c.label}" if c.label else ""
            lines.append(f"  contraction {c.mode}: {c.contraction} [{c.disposition}]{label}")
        if record.injected:
            lines.append(f"  injected: {', '.join(record.injected)}")
        if record.note:
            lines.append(f"  note: {record.note}")

    if len(report.chain):
        lines += ["", "Constraint chain"]
        lines += [f"  {c.label} = {c.expr}   {c.provenance}" for c in report.chain]
    extras = report.extras
    if "classification" in extras:
        lines += ["", "Classification"]
        lines += [f"  {label}: {kind.value}" for label, kind in extras["classification"]]
    if extras.get("multiplier_fixes"):
        lines += ["", "Multiplier fixes"] + [f"  {fix}" for fix in extras["multiplier_fixes"]]
    if isinstance(extras.get("dirac_matrix"), DiracMatrix):
        lines += ["", "Constraint bracket matrix", _indent(extras["dirac_matrix"].to_frame().to_string())]

    if report.brackets is not None:
        lines += ["", "Brackets"]
        pairs = report.brackets.nonzero_pairs()
        lines += [f"  {{{a}, {b}}} = {value}" for a, b, value in pairs] or ["  (all zero)"]
    if report.hamiltonian is not None:
        lines += ["", f"Hamiltonian: {report.hamiltonian}"]
    if report.generator is not None:
        components = ", ".join(f"{v}: {c}" for v, c in zip(report.generator.variables, report.generator.as_strings()))
        lines += ["", f"Generator: {components}"]
    if report.transformation is not None:
        lines += ["", "Transformation (delta = eps * ...)"]
        lines += [f"  delta {v} = {value}" for v, value in report.transformation.items()]
        if report.delta_potential is not None:
            lines.append(f"  delta V = {report.delta_potential}")
    if isinstance(report.equations, MotionSystem):
        lines += ["", "Equations of motion"]
        lines += [f"  d{z}/dt = {value}" for z, value in report.equations.rhs.items()]
    if report.warnings:
        lines += ["", "Warnings"] + [f"  {w}" for w in report.warnings]
    if report.checks:
        lines += ["", "Checks"]
        for c in report.checks:
            status = "pass" if c.passed else f"FAIL at {c.witness}"
            lines.append(f"  {c.check}: {status} ({c.trials} trials, seed {c.seed})")
    return "\n".join(lines) + "\n"


def emit_report(report, fmt="text"):
    """Deterministic report bytes; fmt is 'text' or 'json'"""
    if fmt == "json":
        return (json.dumps(to_dict(report), indent=2) + "\n").encode("utf-8")
    if fmt == "text":
        return to_text(report).encode("utf-8")
    raise ValueError(f"unknown report format '{fmt}'")


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiffEntry:
    kind: str
    side: str
    label: str
    dirac: str = ""
    other: str = ""


@dataclass
class Comparison:
    algorithm: str
    verdicts: tuple
    entries: list = field(default_factory=list)
    excluded: list = field(default_factory=list)
    common_basis: list = field(default_factory=list)

    def to_frame(self):
        return pd.DataFrame(
            [[e.kind, e.side, e.label, e.dirac, e.other] for e in self.entries],
            columns=["kind", "side", "label", "dirac", self.algorithm],
        )

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "algorithm": self.algorithm,
            "verdicts": {"dirac": self.verdicts[0].value, self.algorithm: self.verdicts[1].value},
            "excluded": list(self.excluded),
            "common_basis": list(self.common_basis),
            "entries": [e.__dict__ for e in self.entries],
        }

    def to_text(self):
        lines = [f"Comparison: dirac vs {self.algorithm}"]
        lines.append(f"Verdicts: dirac {self.verdicts[0].value}, {self.algorithm} {self.verdicts[1].value}")
        if self.excluded:
            lines.append(f"Auxiliary Dirac constraints: {', '.join(self.excluded)}")
        if not self.entries:
            lines.append("No differences")
        else:
            lines.append(f"{len(self.entries)} difference(s)")
            lines.append(self.to_frame().to_string(index=False))
        return "\n".join(lines) + "\n"


def _without_constants(e):
    table = e.table
    constants = [s.name for s in table.of_kind(SymbolKind.INTEGRATION_CONSTANT)]
    present = [n for n in constants if n in e.free_symbols()]
    if not present:
        return e
    return substitute(e, {n: table.zero() for n in present})


def _matches(a, b):
    a, b = _without_constants(a), _without_constants(b)
    return is_multiple_of(a, b) and is_multiple_of(b, a)


def unmatched_dirac_constraints(dirac, other):
    """Dirac chain members over the other model's symbols with no proportional counterpart"""
    known = set(other.final_model.variables) | {s.name for s in other.model.symbols if s.is_parameter}
    others = [c.expr for c in other.chain]
    missing, excluded = [], []
    for c in dirac.chain:
        if not c.expr.free_symbols() <= known:
            excluded.append(c.label)
        elif not any(_matches(c.expr, e) for e in others):
            missing.append(c)
    return missing, excluded


def compare_reports(dirac, other):
    """Structured diff of constraint chains and the brackets shared by both tables"""
    missing, excluded = unmatched_dirac_constraints(dirac, other)
    result = Comparison(other.algorithm, (dirac.verdict, other.verdict), excluded=excluded)
    for c in missing:
        result.entries.append(DiffEntry("constraint", "dirac-only", c.label, str(c.expr), ""))
    for c in other.chain:
        if not any(_matches(c.expr, d.expr) for d in dirac.chain):
            result.entries.append(DiffEntry("constraint", f"{other.algorithm}-only", c.label, "", str(c.expr)))

    if dirac.brackets is not None and other.brackets is not None:
        common = [z for z in other.brackets.basis if z in dirac.brackets.basis]
        result.common_basis = common
        ours, theirs = dirac.brackets.restrict(common), other.brackets.restrict(common)
        for i, a in enumerate(common):
            for b in common[i + 1:]:
                left, right = ours.bracket(a, b), theirs.bracket(a, b)
                if not (left - right).is_zero():
                    result.entries.append(DiffEntry("bracket", "both", f"{{{a}, {b}}}", str(left), str(right)))
    log.info("comparison dirac vs %s: %d differences", other.algorithm, len(result.entries))
    return result


# ---------------------------------------------------------------------------
# Excel export
# ---------------------------------------------------------------------------

def write_workbook(report, path, comparison=None):
    """Levels, chain, brackets, checks and diff as sheets of one workbook"""
    levels = pd.DataFrame(
        [
            {
                "level": r.level,
                "dimension": r.matrix.dim,
                "determinant": str(r.determinant),
                "zero_modes": len(r.zero_modes),
                "injected": ", ".join(r.injected),
                "note": r.note,
            }
            for r in report.levels
        ],
        columns=["level", "dimension", "determinant", "zero_modes", "injected", "note"],
    )
    chain = pd.DataFrame([c.to_dict() for c in report.chain], columns=["label", "expr", "origin", "level", "solved_for", "multiplier"])
    checks = pd.DataFrame([c.to_dict() for c in report.checks], columns=["check", "passed", "trials", "seed", "witness"])
    with pd.ExcelWriter(path, engine="openpyxl") as writer:
        pd.DataFrame(
            {"field": ["model", "algorithm", "verdict", "hamiltonian"],
             "value": [report.model.name, report.algorithm, report.verdict.value, str(report.hamiltonian or "")]}
        ).to_excel(writer, sheet_name="summary", index=False)
        levels.to_excel(writer, sheet_name="levels", index=False)
        chain.to_excel(writer, sheet_name="chain", index=False)
        if report.brackets is not None:
            report.brackets.to_frame().to_excel(writer, sheet_name="brackets")
        checks.to_excel(writer, sheet_name="checks", index=False)
        if comparison is not None:
            comparison.to_frame().to_excel(writer, sheet_name="diff", index=False)
    log.info("workbook written to %s", path)
