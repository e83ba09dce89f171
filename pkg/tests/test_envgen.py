import dataclasses
import json

import numpy as np
import pytest
from pydantic import ValidationError

from src.envgen import (
    WorldSpec,
    export_jsonl,
    generate_dataset,
    generate_world,
    import_jsonl,
    make_edit_triplet,
    semantic_distance,
    spurious_probe_accuracy,
    summarize,
    validate_triplet,
)
from src.errors import TripletFormatError
from src.model import PromptVec

RECORD_KEYS = {
    "record_id", "shift", "src", "image", "pred", "alt", "rephrase", "image_rephrase",
    "loc", "loc_ans", "m_loc", "m_loc_q", "m_loc_a", "facts", "concepts",
}


def _first(records, shift):
    return next(r for r in records if r.shift == shift)


# ---------------------------------------------------------------- world

def test_world_is_deterministic():
    a = generate_world(WorldSpec(seed=3))
    b = generate_world(WorldSpec(seed=3))
    assert np.array_equal(a.fact_table, b.fact_table)
    assert np.array_equal(a.img_entity, b.img_entity)
    assert a.epsilon == b.epsilon


def test_fact_table_within_vocabulary(world):
    spec = world.spec
    assert world.fact_table.shape == (spec.n_entities, spec.n_attributes)
    assert world.fact_table.min() >= 0 and world.fact_table.max() < spec.V
    assert len(list(world.all_facts())) == spec.n_entities * spec.n_attributes


def test_facts_are_separated_beyond_epsilon(world):
    assert world.min_separation > world.epsilon
    assert world.epsilon == pytest.approx(0.3 * world.min_separation)


def test_concepts_are_entity_and_attribute(world):
    fact = world.fact(2, 1)
    assert world.concepts(fact) == frozenset({2, world.spec.n_entities + 1})


def test_world_spec_validation():
    with pytest.raises(ValidationError):
        WorldSpec(d_img=4, d_spurious=4)
    with pytest.raises(ValidationError):
        WorldSpec(spurious_strength=1.5)


# ---------------------------------------------------------------- triplets

def test_generated_records_are_valid(world):
    records = generate_dataset(world, 200)
    for record in records:
        assert validate_triplet(record, world) == [], record.record_id


@pytest.mark.slow
def test_large_dataset_is_valid(world):
    for record in generate_dataset(world, 10_000):
        assert validate_triplet(record, world) == []


def test_record_depends_only_on_index(world, records):
    again = generate_dataset(world, 5, start=10)
    for original, regenerated in zip(records[10:15], again):
        assert original.record_id == regenerated.record_id
        assert np.array_equal(original.src.x, regenerated.src.x)
        assert original.facts == regenerated.facts


def test_zero_radius_rephrase_matches_source():
    world = generate_world(WorldSpec(seed=3, epsilon=0.0))
    for record in generate_dataset(world, 10):
        assert semantic_distance(world, record.rephrase, record.src) == 0.0
        assert np.array_equal(record.rephrase.x, record.src.x)
        assert validate_triplet(record, world) == []


def test_easy_shift_shares_no_concept(records):
    for record in records:
        shared = record.concepts["loc"] & record.concepts["src"]
        assert (len(shared) == 0) == (record.shift == "easy")


def test_loc_prompt_is_text_only(records):
    assert all(not np.any(r.loc.m) for r in records)
    assert all(r.alt != r.src.y for r in records)


def test_make_edit_triplet_rejects_bad_targets(world):
    fact = world.fact(0, 0)
    with pytest.raises(ValueError):
        make_edit_triplet(world, fact, fact.value, "easy")
    with pytest.raises(ValueError):
        make_edit_triplet(world, fact, world.spec.V, "easy")
    with pytest.raises(ValueError):
        make_edit_triplet(world, fact, (fact.value + 1) % world.spec.V, "medium")


def test_tampered_rephrase_fact_is_reported(world, records):
    record = records[0]
    src_fact = record.facts["src"]
    other = world.fact((src_fact.entity + 1) % world.spec.n_entities, src_fact.attribute)
    tampered = dataclasses.replace(record, facts={**record.facts, "rephrase": other})
    assert "rephrase: k mismatch" in validate_triplet(tampered, world)


def test_rephrase_outside_neighborhood_is_reported(world, records):
    record = records[0]
    shift = np.zeros_like(record.src.x)
    shift[0] = 10.0 * (world.epsilon + 1.0)
    far = PromptVec(record.src.m, record.src.x + shift, record.src.y)
    problems = validate_triplet(dataclasses.replace(record, rephrase=far), world)
    assert "rephrase: outside semantic neighborhood" in problems


def test_relabelled_hard_record_is_reported(world, records):
    record = _first(records, "hard")
    assert "loc: easy shift shares concepts" in validate_triplet(dataclasses.replace(record, shift="easy"), world)


def test_summarize_counts(records):
    counts = summarize(records)
    assert counts["total"] == len(records)
    assert counts["easy"] + counts["hard"] == len(records)
    assert counts["easy"] > 0 and counts["hard"] > 0


def test_spurious_probe_depends_on_strength():
    unrelated = []
    for seed in range(10):
        world = generate_world(WorldSpec(seed=seed, spurious_strength=0.0))
        unrelated.append(spurious_probe_accuracy(generate_dataset(world, 200), world))
    chance = 1.0 / WorldSpec().V
    assert abs(np.mean(unrelated) - chance) < 0.05

    world = generate_world(WorldSpec(seed=0, spurious_strength=1.0))
    assert spurious_probe_accuracy(generate_dataset(world, 200), world) > 2 * chance


# ---------------------------------------------------------------- JSONL

def test_export_import_is_byte_identical(world, records, tmp_path):
    first = export_jsonl(records[:8], tmp_path / "a.jsonl", world=world.spec)
    spec, loaded = import_jsonl(first)
    assert spec == world.spec
    second = export_jsonl(loaded, tmp_path / "b.jsonl", world=spec)
    assert first.read_bytes() == second.read_bytes()


def test_exported_records_carry_every_key(world, records, tmp_path):
    path = export_jsonl(records[:3], tmp_path / "d.jsonl", world=world.spec)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 4
    assert set(json.loads(lines[0])) == {"_world"}
    for line in lines[1:]:
        assert set(json.loads(line)) == RECORD_KEYS


def test_import_without_header(records, tmp_path):
    path = export_jsonl(records[:2], tmp_path / "plain.jsonl")
    spec, loaded = import_jsonl(path)
    assert spec is None
    assert [r.record_id for r in loaded] == [0, 1]


def test_spaced_locality_answer_key_is_accepted(world, records, tmp_path):
    path = export_jsonl(records[:2], tmp_path / "d.jsonl", world=world.spec)
    lines = path.read_text(encoding="utf-8").splitlines()
    payload = json.loads(lines[1])
    payload["loc ans"] = payload.pop("loc_ans")
    lines[1] = json.dumps(payload)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    _, loaded = import_jsonl(path)
    assert loaded[0].loc.y == records[0].loc.y
    again = export_jsonl(loaded, tmp_path / "e.jsonl")
    assert "loc_ans" in json.loads(again.read_text(encoding="utf-8").splitlines()[0])


def test_missing_field_names_line_and_field(world, records, tmp_path):
    path = export_jsonl(records[:2], tmp_path / "d.jsonl", world=world.spec)
    lines = path.read_text(encoding="utf-8").splitlines()
    payload = json.loads(lines[1])
    del payload["alt"]
    lines[1] = json.dumps(payload)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    with pytest.raises(TripletFormatError) as excinfo:
        import_jsonl(path)
    assert excinfo.value.line_number == 2
    assert excinfo.value.field == "alt"
    assert "alt" in str(excinfo.value)


def test_invalid_json_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text("{not json}\n", encoding="utf-8")
    with pytest.raises(TripletFormatError) as excinfo:
        import_jsonl(path)
    assert excinfo.value.line_number == 1


def test_late_world_header_rejected(world, records, tmp_path):
    path = export_jsonl(records[:1], tmp_path / "d.jsonl")
    header = json.dumps({"_world": world.spec.model_dump()})
    path.write_text(path.read_text(encoding="utf-8") + header + "\n", encoding="utf-8")
    with pytest.raises(TripletFormatError) as excinfo:
        import_jsonl(path)
    assert excinfo.value.field == "_world"
