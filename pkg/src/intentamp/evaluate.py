"""Constraint grading and run-level aggregation.

Grading operates on declared return values (parsed literals), never on
executed code. An instance counts as correct only if every active
constraint holds for every test input.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .benchgen import ConstraintSpec
from .errors import BaselineMissing, DatasetMismatch, LiteralParseError

_KINDS = {ast.List: "list", ast.Tuple: "tuple", ast.Set: "set"}


@dataclass
class ReturnValue:
    """A parsed candidate output: collection kind plus typed elements."""

    kind: str  # "list" | "tuple" | "set" | "scalar"
    elements: list  # (tag, value) pairs; tag is "int", "float", or "bool"

    def __repr__(self):
        return f"ReturnValue({self.kind}, {self.elements})"


def _parse_element(node):
    # Allow a single leading minus; anything else is outside the grammar.
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        tag, value = _parse_element(node.operand)
        return tag, -value
    if isinstance(node, ast.Constant):
        value = node.value
        if isinstance(value, bool):
            # Booleans parse but are deliberately not integers for grading.
            return "bool", value
        if isinstance(value, int):
            return "int", value
        if isinstance(value, float):
            return "float", value
    raise LiteralParseError(f"non-numeric or nested element: {ast.dump(node)}")


def parse_return_value(text: str) -> ReturnValue:
    """Parse a flat numeric literal: [..], (..), {..}, or a bare number.

    int vs float is distinguished by literal form (1 is int, 1.0 is float);
    set literals with duplicate elements are rejected.
    """
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise LiteralParseError(f"not a literal: {text!r}") from exc
    node = tree.body
    if type(node) in _KINDS:
        kind = _KINDS[type(node)]
        elements = [_parse_element(el) for el in node.elts]
        if kind == "set":
            if not elements:
                raise LiteralParseError("empty set literal is not expressible")
            if len(set(elements)) != len(elements):
                raise LiteralParseError(f"duplicate elements in set literal: {text!r}")
        return ReturnValue(kind, elements)
    if isinstance(node, ast.Dict):
        raise LiteralParseError("mappings are outside the return-value grammar")
    return ReturnValue("scalar", [_parse_element(node)])


_LITERAL_CANDIDATE_RE = re.compile(
    r"[\[\(\{][^\[\]\(\)\{\}]*[\]\)\}]|-?\d+\.\d+|-?\d+"
)


def extract_literal(text: str):
    """First parseable literal in decoded output, preferring text after the
    last 'return' marker. Returns (ReturnValue, None) or (None, reason)."""
    regions = []
    marker = text.rfind("return")
    if marker != -1:
        regions.append(text[marker + len("return"):])
    regions.append(text)
    for region in regions:
        for match in _LITERAL_CANDIDATE_RE.finditer(region):
            try:
                return parse_return_value(match.group()), None
            except LiteralParseError:
                continue
    return None, "no parseable literal in output"


_REL_CHECK = {
    "ge": lambda x, n: x >= n,
    "le": lambda x, n: x <= n,
    "gt": lambda x, n: x > n,
    "lt": lambda x, n: x < n,
}


@dataclass
class GradeResult:
    per_constraint: dict  # constraint name -> bool (AND across test inputs)
    overall: bool
    per_input: dict = field(default_factory=dict)  # n -> {constraint: bool}


def check_constraints(spec: ConstraintSpec, value: ReturnValue, n: int) -> dict:
    """Grade one value against one test input; returns constraint -> pass."""
    result = {}
    if spec.return_format is not None:
        result["return_format"] = value.kind == spec.return_format
    if spec.data_type is not None:
        result["data_type"] = all(tag == spec.data_type for tag, _ in value.elements)
    if spec.length is not None:
        result["length"] = len(value.elements) == spec.length
    if spec.value is not None:
        rel = _REL_CHECK[spec.value]
        result["value"] = all(rel(v, n) for tag, v in value.elements)
    return result


def grade_instance(spec: ConstraintSpec, value: ReturnValue, test_inputs) -> GradeResult:
    per_input = {n: check_constraints(spec, value, n) for n in test_inputs}
    names = spec.active()
    per_constraint = {
        name: all(per_input[n][name] for n in test_inputs) for name in names
    }
    overall = all(per_constraint.values())
    return GradeResult(per_constraint, overall, per_input)


@dataclass
class EvalReport:
    mode: str
    accuracy: float
    per_level: dict        # level -> accuracy
    per_constraint: dict   # constraint -> compliance rate
    counts: dict           # level -> instance count
    constraint_counts: dict
    total: int
    manifest_hash: str = ""

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "accuracy": self.accuracy,
            "per_level": {str(k): v for k, v in sorted(self.per_level.items())},
            "per_constraint": dict(sorted(self.per_constraint.items())),
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
            "constraint_counts": dict(sorted(self.constraint_counts.items())),
            "total": self.total,
            "manifest_hash": self.manifest_hash,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            mode=d["mode"],
            accuracy=d["accuracy"],
            per_level={int(k): v for k, v in d["per_level"].items()},
            per_constraint=dict(d["per_constraint"]),
            counts={int(k): v for k, v in d["counts"].items()},
            constraint_counts=dict(d["constraint_counts"]),
            total=int(d["total"]),
            manifest_hash=d.get("manifest_hash", ""),
        )


def evaluate_run(instances, records, mode: str, manifest_hash: str = "",
                 run_manifest_hash: str | None = None) -> EvalReport:
    """Grade one decode run against its dataset.

    records: iterable of dicts {problem_id, text | raw_text | error}; at
    most one per instance. Missing outputs and parse failures count as
    failures on every active constraint.
    """
    if run_manifest_hash is not None and manifest_hash and run_manifest_hash != manifest_hash:
        raise DatasetMismatch(
            f"run built against manifest {run_manifest_hash} but dataset is {manifest_hash}"
        )
    by_id = {}
    for rec in records:
        pid = rec["problem_id"]
        if pid in by_id:
            raise ValueError(f"duplicate output record for problem {pid}")
        by_id[pid] = rec

    level_pass: dict[int, list] = {}
    constraint_pass: dict[str, list] = {}
    passed = 0
    for inst in instances:
        rec = by_id.get(inst.id)
        grade = None
        if rec is not None and "error" not in rec:
            text = rec.get("raw_text", rec.get("text", ""))
            value, _why = extract_literal(text)
            if value is not None:
                grade = grade_instance(inst.spec, value, inst.test_inputs)
        names = inst.spec.active()
        if grade is None:
            grade = GradeResult({name: False for name in names}, False)
        level_pass.setdefault(inst.level, []).append(grade.overall)
        for name in names:
            constraint_pass.setdefault(name, []).append(grade.per_constraint[name])
        passed += grade.overall

    total = len(instances)
    return EvalReport(
        mode=mode,
        accuracy=passed / total if total else 0.0,
        per_level={lvl: sum(v) / len(v) for lvl, v in level_pass.items()},
        per_constraint={c: sum(v) / len(v) for c, v in constraint_pass.items()},
        counts={lvl: len(v) for lvl, v in level_pass.items()},
        constraint_counts={c: len(v) for c, v in constraint_pass.items()},
        total=total,
        manifest_hash=manifest_hash,
    )


def relative_improvement(value: float, baseline: float) -> str:
    """Table annotation: (x - b) / b as a signed percentage, 'n/a' if b = 0."""
    if baseline == 0:
        return "n/a"
    return f"{100.0 * (value - baseline) / baseline:+.1f}%"


def compare_modes(reports, baseline_mode: str = "greedy"):
    """Accuracy per mode with relative improvement over the baseline.

    Returns (rows, table_text); rows are dicts with mode, accuracy and the
    rendered relative-improvement annotation.
    """
    reports = list(reports)
    hashes = {r.manifest_hash for r in reports}
    if len(hashes) > 1:
        raise DatasetMismatch(f"reports span different dataset manifests: {sorted(hashes)}")
    baseline = next((r for r in reports if r.mode == baseline_mode), None)
    if baseline is None:
        raise BaselineMissing(f"no report for baseline mode {baseline_mode!r}")
    rows = []
    for report in reports:
        rows.append({
            "mode": report.mode,
            "accuracy": report.accuracy,
            "relative_improvement": relative_improvement(report.accuracy, baseline.accuracy),
        })
    width = max(len(r["mode"]) for r in rows)
    lines = [f"{'Method'.ljust(width)}  Accuracy  vs {baseline_mode}"]
    for row in rows:
        lines.append(
            f"{row['mode'].ljust(width)}  {100.0 * row['accuracy']:8.1f}  {row['relative_improvement']}"
        )
    return rows, "\n".join(lines) + "\n"


def load_records(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def load_report(path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
