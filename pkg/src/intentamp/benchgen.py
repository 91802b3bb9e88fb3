"""Rule-based generator for multi-constraint code-generation problems.

Each problem combines up to four primitive constraints (return format,
element data type, element value relative to the input n, collection
length) into a docstring prompt with recorded intent-span offsets, so
masking never depends on pattern matching. Every emitted instance carries
a constructive witness literal per test input proving feasibility.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import ExhaustedSpace, InfeasibleSpec
from .masking import WHOLE_INTENT, IntentSpan

GENERATOR_VERSION = "1"

DATA_TYPES = ("int", "float")
RETURN_FORMATS = ("list", "tuple", "set")
RELATIONS = ("ge", "le", "gt", "lt")
LENGTH_RANGE = (1, 100)
DEFAULT_TEST_INPUTS = (1, 2, 10, 100)
DEFAULT_COUNTS = {2: 300, 3: 100, 4: 100}

# Canonical constraint order used for prompt sentences and span labels.
CONSTRAINT_ORDER = ("return_format", "data_type", "value", "length")

REL_PHRASE = {
    "ge": "greater than or equal to",
    "le": "less than or equal to",
    "gt": "greater than",
    "lt": "less than",
}

_TYPE_PLURAL = {"int": "integers", "float": "floats"}

def _all_subsets():
    # A length constraint needs a collection noun; whenever another slot is
    # available the subset must include return_format, so the bare-length
    # default phrasing only ever appears at level 1.
    names = CONSTRAINT_ORDER
    out = []
    for bits in range(1, 1 << len(names)):
        subset = tuple(n for i, n in enumerate(names) if bits >> i & 1)
        if "length" in subset and len(subset) >= 2 and "return_format" not in subset:
            continue
        out.append(subset)
    return out


_VALID_SUBSETS = {
    level: [s for s in _all_subsets() if len(s) == level] for level in (1, 2, 3, 4)
}


@dataclass(frozen=True)
class ConstraintSpec:
    """Active constraint primitives; level = number of present fields."""

    data_type: str | None = None      # "int" | "float"
    return_format: str | None = None  # "list" | "tuple" | "set"
    length: int | None = None         # exact element count
    value: str | None = None          # relation to n: "ge" | "le" | "gt" | "lt"

    def __post_init__(self):
        if self.data_type is not None and self.data_type not in DATA_TYPES:
            raise ValueError(f"bad data_type {self.data_type!r}")
        if self.return_format is not None and self.return_format not in RETURN_FORMATS:
            raise ValueError(f"bad return_format {self.return_format!r}")
        if self.length is not None and self.length < 1:
            raise ValueError("length must be positive")
        if self.value is not None and self.value not in RELATIONS:
            raise ValueError(f"bad value relation {self.value!r}")
        if self.level == 0:
            raise ValueError("at least one constraint must be present")

    @property
    def level(self) -> int:
        return sum(
            getattr(self, name) is not None
            for name in ("data_type", "return_format", "length", "value")
        )

    def active(self) -> tuple:
        return tuple(n for n in CONSTRAINT_ORDER if getattr(self, n) is not None)

    def to_dict(self) -> dict:
        return {
            "data_type": self.data_type,
            "return_format": self.return_format,
            "length": self.length,
            "value": self.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConstraintSpec":
        return cls(
            data_type=d.get("data_type"),
            return_format=d.get("return_format"),
            length=d.get("length"),
            value=d.get("value"),
        )


@dataclass
class ProblemInstance:
    id: str
    level: int
    spec: ConstraintSpec
    prompt_text: str
    intent_spans: list[IntentSpan]
    test_inputs: tuple
    witnesses: dict  # test input n -> satisfying literal string

    def whole_span(self) -> IntentSpan:
        for span in self.intent_spans:
            if span.label == WHOLE_INTENT:
                return span
        raise ValueError(f"instance {self.id} lacks a whole-intent span")

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "level": self.level,
            "spec": self.spec.to_dict(),
            "prompt": self.prompt_text,
            "spans": [
                {"start": s.start, "end": s.end, "label": s.label}
                for s in self.intent_spans
            ],
            "test_inputs": list(self.test_inputs),
            "witnesses": {str(n): w for n, w in self.witnesses.items()},
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ProblemInstance":
        return cls(
            id=rec["id"],
            level=int(rec["level"]),
            spec=ConstraintSpec.from_dict(rec["spec"]),
            prompt_text=rec["prompt"],
            intent_spans=[
                IntentSpan(int(s["start"]), int(s["end"]), s["label"])
                for s in rec["spans"]
            ],
            test_inputs=tuple(rec["test_inputs"]),
            witnesses={int(n): w for n, w in rec["witnesses"].items()},
        )


@dataclass
class DatasetManifest:
    counts: dict
    seed: int
    version: str = GENERATOR_VERSION
    total: int = 0
    dataset_sha256: str = ""

    def to_dict(self) -> dict:
        return {
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
            "seed": self.seed,
            "version": self.version,
            "total": self.total,
            "dataset_sha256": self.dataset_sha256,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        return cls(
            counts={int(k): v for k, v in d["counts"].items()},
            seed=int(d["seed"]),
            version=d["version"],
            total=int(d["total"]),
            dataset_sha256=d["dataset_sha256"],
        )


# --- feasibility -------------------------------------------------------------


def _int_elements(spec: ConstraintSpec, n: int, count: int, distinct: bool):
    """Distinct-capable positive integer witnesses, or None if infeasible."""
    rel = spec.value
    if rel is None:
        base, step = 1, 1
    elif rel == "ge":
        base, step = n, 1
    elif rel == "gt":
        base, step = n + 1, 1
    elif rel == "le":
        if distinct and count > n:
            return None
        base, step = n, -1
    else:  # lt
        if n - 1 < 1:
            return None
        if distinct and count > n - 1:
            return None
        base, step = n - 1, -1
    if distinct:
        return [base + i * step for i in range(count)]
    return [base] * count


def _float_elements(spec: ConstraintSpec, n: int, count: int, distinct: bool):
    """Positive float witnesses; any admissible interval has room to spare."""
    rel = spec.value
    if rel is None:
        values = [1.0 + i for i in range(count)]
    elif rel == "ge":
        values = [float(n) + i for i in range(count)]
    elif rel == "gt":
        values = [n + 0.5 + i for i in range(count)]
    else:  # le / lt: fractions of n stay positive and strictly below n
        values = [n / (i + 2) for i in range(count)]
    if not distinct:
        values = [values[0]] * count
    return values


def _render_literal(kind: str, elements: list) -> str:
    inner = ", ".join(repr(e) for e in elements)
    if kind == "list":
        return f"[{inner}]"
    if kind == "tuple":
        return f"({inner},)" if len(elements) == 1 else f"({inner})"
    return "{" + inner + "}"


def witness_value(spec: ConstraintSpec, n: int) -> str | None:
    """A literal satisfying all active constraints for input n, or None.

    Witness elements are drawn from the positive numbers, matching the
    benchmark's "positive integer n" framing; this is what makes e.g. 99
    distinct integers below 100 feasible but 99 below 50 not.
    """
    kind = spec.return_format or "list"
    count = spec.length if spec.length is not None else 1
    distinct = kind == "set"
    if spec.data_type == "int":
        elements = _int_elements(spec, n, count, distinct)
    else:
        # Unspecified type defaults to floats, which are always feasible.
        elements = _float_elements(spec, n, count, distinct)
    if elements is None:
        return None
    return _render_literal(kind, elements)


def is_feasible(spec: ConstraintSpec, test_inputs=DEFAULT_TEST_INPUTS) -> bool:
    return all(witness_value(spec, n) is not None for n in test_inputs)


# --- prompt rendering ---------------------------------------------------------


def _sentences(spec: ConstraintSpec) -> list:
    """(label, sentence or sub-labelled parts) in canonical order.

    The return-format and data-type constraints share one sentence when
    both are active ("return a tuple of floats."); each then owns a
    non-overlapping sub-span of it.
    """
    fmt, typ = spec.return_format, spec.data_type
    noun = _TYPE_PLURAL[typ] if typ else "values"
    parts = []
    if fmt and typ:
        parts.append([("return_format", f"return a {fmt}"), ("data_type", f" of {noun}.")])
    elif fmt:
        parts.append([("return_format", f"return a {fmt}.")])
    elif typ:
        parts.append([("data_type", f"return {noun}.")])
    if spec.value:
        parts.append([("value", f"The {noun} should be {REL_PHRASE[spec.value]} n.")])
    if spec.length is not None:
        coll = fmt or "list"
        parts.append([("length", f"The length of the {coll} should be {spec.length}.")])
    return parts


def render_prompt(spec: ConstraintSpec) -> tuple[str, list[IntentSpan]]:
    """Render the fixed def-plus-docstring prompt and per-constraint spans.

    Returns the prompt text and spans: one per active constraint plus the
    whole-intent span covering the docstring body. Every sentence sits on
    its own line; all content lines except the last end with one trailing
    space.
    """
    header = "def func(n):\n    '''\n"
    indent = "    "
    sentence_groups = _sentences(spec)
    lines = [(None, "Given a positive integer n,")] + [
        (group, "".join(text for _, text in group)) for group in sentence_groups
    ]
    text = header
    spans: list[IntentSpan] = []
    # Whole-intent span matches what the docstring-pattern locator returns:
    # everything between the triple quotes, newlines and indent included.
    body_start = len(header) - 1
    for i, (group, line) in enumerate(lines):
        text += indent
        line_start = len(text)
        if group:
            offset = line_start
            for label, part in group:
                spans.append(IntentSpan(offset, offset + len(part), label))
                offset += len(part)
        text += line
        trailing = " " if i < len(lines) - 1 else ""
        text += trailing + "\n"
    text += indent + "'''\n"
    body_end = len(text) - len("'''\n")
    spans.append(IntentSpan(body_start, body_end, WHOLE_INTENT))
    return text, spans


# --- sampling and dataset emission -------------------------------------------

_MAX_RESAMPLES = 10_000


def _sample_params(subset, rng: random.Random) -> ConstraintSpec:
    kwargs = {}
    if "return_format" in subset:
        kwargs["return_format"] = rng.choice(RETURN_FORMATS)
    if "data_type" in subset:
        kwargs["data_type"] = rng.choice(DATA_TYPES)
    if "value" in subset:
        kwargs["value"] = rng.choice(RELATIONS)
    if "length" in subset:
        kwargs["length"] = rng.randint(*LENGTH_RANGE)
    return ConstraintSpec(**kwargs)


def sample_spec(level: int, rng: random.Random,
                test_inputs=DEFAULT_TEST_INPUTS) -> ConstraintSpec:
    """Uniformly choose active primitives and parameters; resample until
    feasible on every test input."""
    if level not in (1, 2, 3, 4):
        raise ValueError(f"level must be in [1, 4], got {level}")
    for _ in range(_MAX_RESAMPLES):
        subset = rng.choice(_VALID_SUBSETS[level])
        spec = _sample_params(subset, rng)
        if is_feasible(spec, test_inputs):
            return spec
    raise InfeasibleSpec(f"no feasible level-{level} spec after {_MAX_RESAMPLES} samples")


def enumerate_specs(level: int, test_inputs=DEFAULT_TEST_INPUTS):
    """Every distinct feasible spec at a level, in deterministic order."""
    for subset in _VALID_SUBSETS[level]:
        formats = RETURN_FORMATS if "return_format" in subset else (None,)
        types = DATA_TYPES if "data_type" in subset else (None,)
        relations = RELATIONS if "value" in subset else (None,)
        lengths = (
            range(LENGTH_RANGE[0], LENGTH_RANGE[1] + 1) if "length" in subset else (None,)
        )
        for fmt in formats:
            for typ in types:
                for rel in relations:
                    for length in lengths:
                        spec = ConstraintSpec(
                            data_type=typ, return_format=fmt, length=length, value=rel
                        )
                        if is_feasible(spec, test_inputs):
                            yield spec


def build_instance(spec: ConstraintSpec, instance_id: str,
                   test_inputs=DEFAULT_TEST_INPUTS) -> ProblemInstance:
    prompt_text, spans = render_prompt(spec)
    witnesses = {}
    for n in test_inputs:
        witness = witness_value(spec, n)
        if witness is None:
            raise InfeasibleSpec(f"spec {spec} infeasible for n={n}")
        witnesses[n] = witness
    return ProblemInstance(
        id=instance_id,
        level=spec.level,
        spec=spec,
        prompt_text=prompt_text,
        intent_spans=spans,
        test_inputs=tuple(test_inputs),
        witnesses=witnesses,
    )


def generate_dataset(counts: dict | None = None, seed: int = 0,
                     test_inputs=DEFAULT_TEST_INPUTS):
    """Emit the requested number of distinct instances per level.

    Returns (manifest, instances). Instances are deduplicated by spec;
    requesting more than the feasible space holds raises ExhaustedSpace.
    """
    counts = dict(counts) if counts else dict(DEFAULT_COUNTS)
    rng = random.Random(seed)
    instances: list[ProblemInstance] = []
    for level in sorted(counts):
        want = counts[level]
        if want < 0:
            raise ValueError("counts must be non-negative")
        if want == 0:
            continue
        available = sum(1 for _ in enumerate_specs(level, test_inputs))
        if want > available:
            raise ExhaustedSpace(
                f"level {level}: requested {want} instances but only "
                f"{available} distinct feasible specs exist"
            )
        seen = set()
        emitted = 0
        while emitted < want:
            spec = sample_spec(level, rng, test_inputs)
            if spec in seen:
                continue
            seen.add(spec)
            instances.append(
                build_instance(spec, f"cc-{level}-{emitted:04d}", test_inputs)
            )
            emitted += 1
    manifest = DatasetManifest(counts=counts, seed=seed, total=len(instances))
    manifest.dataset_sha256 = hashlib.sha256(
        serialize_dataset(instances).encode("utf-8")
    ).hexdigest()
    return manifest, instances


def serialize_dataset(instances) -> str:
    return "".join(
        json.dumps(inst.to_record(), sort_keys=True, separators=(",", ":")) + "\n"
        for inst in instances
    )


def write_dataset(out_dir, manifest: DatasetManifest, instances) -> tuple[Path, Path]:
    """Write dataset.jsonl + manifest.json atomically (tmp file + rename)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset_path = out_dir / "dataset.jsonl"
    manifest_path = out_dir / "manifest.json"
    for path, payload in (
        (dataset_path, serialize_dataset(instances)),
        (manifest_path, json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n"),
    ):
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(payload, encoding="utf-8")
        tmp.replace(path)
    return dataset_path, manifest_path


def load_dataset(dataset_path) -> list[ProblemInstance]:
    instances = []
    with open(dataset_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                instances.append(ProblemInstance.from_record(json.loads(line)))
    return instances


def load_manifest(manifest_path) -> DatasetManifest:
    with open(manifest_path, encoding="utf-8") as fh:
        return DatasetManifest.from_dict(json.load(fh))
