"""
Command-line front-end: analyze <model> [--algo dirac|bw|mbw|compare] ...
"""
import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .config import load_settings
from .dirac import DiracError, run_dirac
from .dynamics import (
    DynamicsError,
    OracleError,
    OracleResult,
    choose_conserved,
    conserved_search,
    hamilton_equations,
    numeric_oracle,
    promote_to_constraint,
    symmetry_report,
)
from .modelspec import ModelError, first_order_model, load_model, validate_model
from .report import compare_reports, emit_report, to_dict, unmatched_dirac_constraints, write_workbook
from .symexpr import ExprError
from .symplectic import AnalysisError, Verdict, continue_with_constraint, run_classic_bw, run_modified_bw

log = logging.getLogger(__name__)

ALGORITHMS = ("dirac", "bw", "mbw", "compare")
OUTPUTS = ("text", "json", "both")


@dataclass
class RunConfig:
    model_path: str
    algorithm: str = "mbw"
    max_level: Optional[int] = None
    conserved_degree: int = 2
    promote: Optional[str] = None
    output: str = "text"
    seed: int = 0
    eom_constraints: bool = False
    json_path: Optional[str] = None
    xlsx_path: Optional[str] = None
    compare_with: str = "mbw"
    constants: dict = field(default_factory=dict)
    coefficient_cap: int = 200
    oracle_trials: int = 10

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm '{self.algorithm}'")
        if self.output not in OUTPUTS:
            raise ValueError(f"unknown output format '{self.output}'")
        if self.max_level is not None and self.max_level < 1:
            raise ValueError("max_level must be at least 1")
        if self.conserved_degree < 0:
            raise ValueError("conserved_degree must be non-negative")

    @property
    def report_path(self):
        if self.json_path:
            return Path(self.json_path)
        return Path(self.model_path).with_suffix(".report.json")


def _oracle(check, subject, config):
    try:
        return numeric_oracle(check, subject, config.oracle_trials, config.seed)
    except OracleError as exc:
        log.warning("%s check could not be evaluated: %s", check, exc)
        return OracleResult(check, False, config.oracle_trials, config.seed)


def _attach_checks(report, config):
    """Numeric oracle verdicts for every table and inverse the report carries"""
    if report.brackets is None:
        return
    for check in ("antisymmetry", "jacobi"):
        report.checks.append(_oracle(check, report.brackets, config))
    if report.algorithm != "dirac" and report.levels:
        last = report.levels[-1]
        if not last.singular:
            report.checks.append(_oracle("inverse", (last.matrix.entries, report.brackets.entries), config))
            report.checks.append(_oracle("determinant", (last.matrix.entries, last.determinant), config))
    for result in report.checks:
        if result.passed:
            continue
        if result.witness is None:
            report.warnings.append(f"{result.check} check found no point off the poles")
        else:
            report.warnings.append(f"{result.check} check failed at {result.witness}")


def _finish(report, config):
    if report.verdict is Verdict.BRACKETS and report.hamiltonian is not None:
        report.equations = hamilton_equations(report.brackets, report.hamiltonian)
    if report.verdict is Verdict.SYMMETRY and report.generator is not None:
        transformation = symmetry_report(report.generator, report.final_model)
        report.transformation = transformation.variations
        report.delta_potential = transformation.delta_h
    _attach_checks(report, config)
    return report


def _promote_conserved(report, dirac, config, max_level):
    """Promote conserved quantities to constraints until the Dirac chain is reproduced"""
    missing, _ = unmatched_dirac_constraints(dirac, report)
    for _ in range(len(missing)):
        if report.verdict is not Verdict.BRACKETS or not missing:
            break
        system = hamilton_equations(report.brackets, report.final_model.potential)
        found = conserved_search(system, config.conserved_degree, config.coefficient_cap)
        quantity = choose_conserved(found, missing, config.promote)
        if quantity is None:
            report.warnings.append("no conserved quantity found to promote")
            break
        decl = promote_to_constraint(quantity, level=report.final_level, model=report.final_model)
        log.info("promoting %s = %s", decl.label, decl.expr)
        report = continue_with_constraint(report, decl, max_level)
        missing, _ = unmatched_dirac_constraints(dirac, report)
    return report


def run_symplectic(model, algorithm, config, max_level):
    runner = run_classic_bw if algorithm == "bw" else run_modified_bw
    if not model.variables and model.lagrangian is not None:
        model = first_order_model(model)
    report = runner(model, max_level)
    if model.has_dirac_data:
        dirac = run_dirac(model, max_level)
        if config.eom_constraints:
            report = _promote_conserved(report, dirac, config, max_level)
        missing, _ = unmatched_dirac_constraints(dirac, report)
        for c in missing:
            message = f"Dirac constraint {c.label} = {c.expr} is not generated by {algorithm}"
            log.warning(message)
            report.warnings.append(message)
    return _finish(report, config)


def _write(config, text_payload, json_payload):
    if config.output in ("text", "both"):
        sys.stdout.write(text_payload)
    if config.output in ("json", "both"):
        path = config.report_path
        path.write_text(json_payload, encoding="utf-8")
        log.info("JSON report written to %s", path)


def run(config):
    """Exit code: 0 terminal verdict, 1 invalid input, 2 level limit or inconsistency"""
    try:
        model = load_model(config.model_path, overrides=config.constants)
    except OSError as exc:
        print(f"error: cannot read {config.model_path}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    except (ModelError, ExprError) as exc:
        print(f"error: {config.model_path}: {exc}", file=sys.stderr)
        return 1
    diagnostics = validate_model(model)
    if diagnostics:
        for diagnostic in diagnostics:
            print(f"error: {config.model_path}: {diagnostic}", file=sys.stderr)
        return 1

    max_level = config.max_level if config.max_level is not None else model.options.max_level
    try:
        if config.algorithm == "compare":
            dirac = _finish(run_dirac(model, max_level), config)
            other = run_symplectic(model, config.compare_with, config, max_level)
            comparison = compare_reports(dirac, other)
            text = comparison.to_text() + "\n" + emit_report(dirac).decode() + "\n" + emit_report(other).decode()
            payload = {"comparison": comparison.to_dict(), "dirac": to_dict(dirac), other.algorithm: to_dict(other)}
            _write(config, text, json.dumps(payload, indent=2) + "\n")
            if config.xlsx_path:
                write_workbook(other, config.xlsx_path, comparison)
            verdicts = (dirac.verdict, other.verdict)
        else:
            if config.algorithm == "dirac":
                report = _finish(run_dirac(model, max_level), config)
            else:
                report = run_symplectic(model, config.algorithm, config, max_level)
            _write(config, emit_report(report, "text").decode(), emit_report(report, "json").decode())
            if config.xlsx_path:
                write_workbook(report, config.xlsx_path)
            verdicts = (report.verdict,)
    except (ModelError, ExprError, AnalysisError, DiracError, DynamicsError) as exc:
        print(f"error: {model.name}: {exc}", file=sys.stderr)
        return 1
    return 0 if all(v.terminal for v in verdicts) else 2


def _assignment(text):
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=INT, found '{text}'")
    try:
        return name.strip(), int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{value}' is not an integer") from None


def build_parser(settings):
    parser = argparse.ArgumentParser(prog="analyze", description="Symplectic and Dirac analysis of constrained models")
    parser.add_argument("model", help="model file")
    parser.add_argument("--algo", choices=ALGORITHMS, default="mbw")
    parser.add_argument("--max-level", type=int, default=settings.max_level)
    parser.add_argument("--eom-constraints", action="store_true", help="promote conserved quantities to constraints")
    parser.add_argument("--degree", type=int, default=settings.conserved_degree, help="conserved-search degree")
    parser.add_argument("--promote", default=None, help="Dirac constraint label or conserved-basis index to promote")
    parser.add_argument("--compare-with", choices=("bw", "mbw"), default="mbw")
    parser.add_argument("--json", dest="json_path", default=None, help="JSON report path")
    parser.add_argument("--xlsx", dest="xlsx_path", default=None, help="Excel workbook path")
    parser.add_argument("--output", choices=OUTPUTS, default=None)
    parser.add_argument("--seed", type=int, default=settings.seed)
    parser.add_argument("--set", dest="constants", type=_assignment, action="append", default=[], metavar="NAME=INT")
    parser.add_argument("--log-level", default=settings.log_level)
    return parser


def main(argv=None):
    settings = load_settings()
    args = build_parser(settings).parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    output = args.output or ("both" if args.json_path else "text")
    try:
        config = RunConfig(
            model_path=args.model,
            algorithm=args.algo,
            max_level=args.max_level,
            conserved_degree=args.degree,
            promote=args.promote,
            output=output,
            seed=args.seed,
            eom_constraints=args.eom_constraints,
            json_path=args.json_path,
            xlsx_path=args.xlsx_path,
            compare_with=args.compare_with,
            constants=dict(args.constants),
            coefficient_cap=settings.coefficient_cap,
            oracle_trials=settings.oracle_trials,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(config)
