import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intentamp.benchgen import (
    DEFAULT_COUNTS,
    DEFAULT_TEST_INPUTS,
    ConstraintSpec,
    ProblemInstance,
    build_instance,
    enumerate_specs,
    generate_dataset,
    is_feasible,
    load_dataset,
    render_prompt,
    sample_spec,
    serialize_dataset,
    witness_value,
    write_dataset,
)
from intentamp.errors import ExhaustedSpace
from intentamp.masking import WHOLE_INTENT, locate_intent_span

from oracles import validate_constraints

import ast
import random

# The reference four-constraint prompt, byte for byte (note the trailing
# spaces on every sentence line except the last).
REFERENCE_PROMPT = (
    "def func(n):\n"
    "    '''\n"
    "    Given a positive integer n, \n"
    "    return a tuple of floats. \n"
    "    The floats should be less than n. \n"
    "    The length of the tuple should be 2.\n"
    "    '''\n"
)


class TestConstraintSpec:
    def test_level_counts_active_fields(self):
        assert ConstraintSpec(data_type="int").level == 1
        assert ConstraintSpec(data_type="int", return_format="list").level == 2
        spec = ConstraintSpec(data_type="float", return_format="tuple",
                              length=2, value="lt")
        assert spec.level == 4

    def test_rejects_empty_and_bad_values(self):
        with pytest.raises(ValueError):
            ConstraintSpec()
        with pytest.raises(ValueError):
            ConstraintSpec(data_type="str")
        with pytest.raises(ValueError):
            ConstraintSpec(return_format="dict")
        with pytest.raises(ValueError):
            ConstraintSpec(data_type="int", length=0)
        with pytest.raises(ValueError):
            ConstraintSpec(data_type="int", value="eq")

    def test_dict_round_trip(self):
        spec = ConstraintSpec(data_type="int", return_format="set", value="ge")
        assert ConstraintSpec.from_dict(spec.to_dict()) == spec


class TestFeasibility:
    def test_distinct_positives_below_bound(self):
        # 99 distinct positive integers strictly below 100 exist; 99 below 50
        # do not.
        spec = ConstraintSpec(data_type="int", return_format="set",
                              length=99, value="lt")
        assert witness_value(spec, 100) is not None
        assert witness_value(spec, 50) is None
        assert not is_feasible(spec)

    def test_int_lt_one_is_infeasible(self):
        spec = ConstraintSpec(data_type="int", return_format="list",
                              length=1, value="lt")
        assert witness_value(spec, 1) is None
        assert not is_feasible(spec)
        assert is_feasible(spec, test_inputs=(2, 10))

    def test_float_lt_always_feasible(self):
        spec = ConstraintSpec(data_type="float", return_format="set",
                              length=99, value="lt")
        assert is_feasible(spec)

    def test_witnesses_actually_satisfy_their_specs(self):
        rng = random.Random(17)
        for _ in range(200):
            level = rng.choice((2, 3, 4))
            spec = sample_spec(level, rng)
            for n in DEFAULT_TEST_INPUTS:
                literal = witness_value(spec, n)
                assert literal is not None
                value = ast.literal_eval(literal)
                kind = type(value).__name__
                if kind not in ("list", "tuple", "set"):
                    kind, value = "scalar", [value]
                elements = [(type(v).__name__, v) for v in value]
                results = validate_constraints(spec, kind, elements, n)
                assert all(results.values()), (spec, n, literal, results)


class TestRenderPrompt:
    def test_reference_prompt_is_byte_exact(self):
        spec = ConstraintSpec(data_type="float", return_format="tuple",
                              length=2, value="lt")
        text, spans = render_prompt(spec)
        assert text == REFERENCE_PROMPT

    def test_level_one_single_sentence(self):
        text, spans = render_prompt(ConstraintSpec(data_type="int"))
        assert "return integers.\n" in text
        labels = [s.label for s in spans]
        assert labels.count(WHOLE_INTENT) == 1
        assert "data_type" in labels

    def test_whole_span_matches_docstring_locator(self):
        rng = random.Random(5)
        for level in (1, 2, 3, 4):
            for _ in range(25):
                spec = sample_spec(level, rng)
                text, spans = render_prompt(spec)
                whole = next(s for s in spans if s.label == WHOLE_INTENT)
                located = locate_intent_span(text, "codeconstraints-docstring")[0]
                assert (whole.start, whole.end) == (located.start, located.end)

    def test_constraint_spans_slice_to_their_sentences(self):
        spec = ConstraintSpec(data_type="float", return_format="tuple",
                              length=2, value="lt")
        text, spans = render_prompt(spec)
        by_label = {s.label: s.slice(text) for s in spans}
        assert by_label["return_format"] == "return a tuple"
        assert by_label["data_type"] == " of floats."
        assert by_label["value"] == "The floats should be less than n."
        assert by_label["length"] == "The length of the tuple should be 2."

    def test_spans_lie_inside_whole_intent(self):
        rng = random.Random(9)
        for _ in range(50):
            spec = sample_spec(rng.choice((2, 3, 4)), rng)
            text, spans = render_prompt(spec)
            whole = next(s for s in spans if s.label == WHOLE_INTENT)
            for s in spans:
                if s.label == WHOLE_INTENT:
                    continue
                assert whole.start <= s.start < s.end <= whole.end


class TestEnumeration:
    def test_level_one_hand_count(self):
        # data_type alone: 2; return_format alone: 3; value alone: 4;
        # length alone: 100 (the only level where a bare length is legal).
        specs = list(enumerate_specs(1))
        assert len(specs) == len(set(specs))
        counts = {}
        for spec in specs:
            counts[spec.active()] = counts.get(spec.active(), 0) + 1
        assert counts[("data_type",)] == 2
        assert counts[("return_format",)] == 3
        assert counts[("value",)] == 4
        assert counts[("length",)] == 100
        assert len(specs) == 109

    def test_level_two_space_exceeds_default_count(self):
        assert sum(1 for _ in enumerate_specs(2)) >= DEFAULT_COUNTS[2]

    def test_length_requires_return_format(self):
        for level in (2, 3, 4):
            for spec in enumerate_specs(level):
                if spec.length is not None:
                    assert spec.return_format is not None


class TestGenerateDataset:
    def test_default_shape(self):
        manifest, instances = generate_dataset(seed=7)
        assert manifest.total == len(instances) == 500
        by_level = {}
        for inst in instances:
            by_level[inst.level] = by_level.get(inst.level, 0) + 1
            assert inst.level == inst.spec.level
        assert by_level == DEFAULT_COUNTS

    def test_specs_are_distinct_within_level(self):
        _, instances = generate_dataset(counts={2: 50, 3: 50}, seed=1)
        for level in (2, 3):
            specs = [i.spec for i in instances if i.level == level]
            assert len(specs) == len(set(specs))

    def test_byte_identical_regeneration(self):
        first = serialize_dataset(generate_dataset(counts={2: 40}, seed=3)[1])
        second = serialize_dataset(generate_dataset(counts={2: 40}, seed=3)[1])
        assert first == second

    def test_seed_changes_output(self):
        a = serialize_dataset(generate_dataset(counts={2: 40}, seed=0)[1])
        b = serialize_dataset(generate_dataset(counts={2: 40}, seed=1)[1])
        assert a != b

    def test_exhausted_space(self):
        with pytest.raises(ExhaustedSpace):
            generate_dataset(counts={1: 1000}, seed=0)

    def test_manifest_hash_matches_serialization(self):
        import hashlib

        manifest, instances = generate_dataset(counts={2: 10}, seed=2)
        digest = hashlib.sha256(
            serialize_dataset(instances).encode("utf-8")
        ).hexdigest()
        assert manifest.dataset_sha256 == digest

    def test_write_and_load_round_trip(self, tmp_path):
        manifest, instances = generate_dataset(counts={2: 15, 3: 5}, seed=4)
        dataset_path, manifest_path = write_dataset(tmp_path, manifest, instances)
        loaded = load_dataset(dataset_path)
        assert [i.to_record() for i in loaded] == [i.to_record() for i in instances]
        on_disk = json.loads(manifest_path.read_text())
        assert on_disk["dataset_sha256"] == manifest.dataset_sha256

    def test_record_round_trip_preserves_everything(self):
        spec = ConstraintSpec(data_type="int", return_format="list",
                              length=3, value="ge")
        inst = build_instance(spec, "cc-4-0000")
        again = ProblemInstance.from_record(
            json.loads(json.dumps(inst.to_record()))
        )
        assert again.to_record() == inst.to_record()
        assert again.spec == spec
        assert again.witnesses == inst.witnesses


@given(seed=st.integers(0, 10_000), level=st.sampled_from([1, 2, 3, 4]))
@settings(max_examples=60, deadline=None)
def test_sampled_specs_are_feasible_and_well_formed(seed, level):
    rng = random.Random(seed)
    spec = sample_spec(level, rng)
    assert spec.level == level
    assert is_feasible(spec)
    if spec.length is not None and level >= 2:
        assert spec.return_format is not None
