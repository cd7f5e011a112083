import hashlib
import json

import numpy as np
import pytest

from semtraj.chomp import compliance_delta
from semtraj.dataset import (
    DatasetError,
    PipelineConfig,
    check_sample_invariants,
    generate_dataset,
    generate_sample,
    load_dataset,
    sample_from_json,
    sample_to_json,
    scan_for_holdout,
    split,
    split_assign,
)
from semtraj.language import default_lexicon

CFG = PipelineConfig()


def file_hash(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def test_generate_sample_deterministic():
    a = generate_sample(3, CFG)
    b = generate_sample(3, CFG)
    assert a.command_text == b.command_text
    assert a.command_ast == b.command_ast
    np.testing.assert_array_equal(a.xi_o, b.xi_o)
    np.testing.assert_array_equal(a.xi_mod, b.xi_mod)
    np.testing.assert_array_equal(a.world.positions(), b.world.positions())


def test_generate_sample_is_compliant_and_valid():
    for seed in range(5):
        s = generate_sample(seed, CFG)
        check_sample_invariants(s, CFG.lexicon)
        assert compliance_delta(s.xi_o, s.xi_mod, s.command_ast, s.world) > \
            CFG.compliance_threshold


def test_sample_json_roundtrip():
    s = generate_sample(11, CFG)
    line = sample_to_json(s)
    s2 = sample_from_json(line)
    assert sample_to_json(s2) == line
    np.testing.assert_array_equal(s2.xi_mod, s.xi_mod)
    assert s2.command_ast == s.command_ast


def test_generate_dataset_deterministic(tmp_path):
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    generate_dataset(6, 100, p1, CFG)
    generate_dataset(6, 100, p2, CFG)
    assert file_hash(p1) == file_hash(p2)
    lines = p1.read_text().splitlines()
    assert len(lines) == 7  # header + 6 records
    meta = json.loads(lines[0])
    assert meta == {"format": "semtraj-dataset", "version": 1, "n_waypoints": 100}


def test_load_reserialize_byte_identical(tmp_path):
    p = tmp_path / "d.jsonl"
    generate_dataset(5, 40, p, CFG)
    samples = load_dataset(p, CFG.lexicon)
    lines = [sample_to_json(s) for s in samples]
    original = p.read_text().splitlines()[1:]
    assert lines == original


def test_load_validates_invariants(tmp_path):
    p = tmp_path / "d.jsonl"
    generate_dataset(1, 7, p, CFG)
    lines = p.read_text().splitlines()
    doc = json.loads(lines[1])
    doc["xi_mod"][0] = [0.42, 0.42]  # break shared endpoints
    p.write_text(lines[0] + "\n" + json.dumps(doc, separators=(",", ":")) + "\n")
    with pytest.raises(DatasetError):
        load_dataset(p, CFG.lexicon)


def test_malformed_record_reports_line(tmp_path):
    p = tmp_path / "d.jsonl"
    generate_dataset(1, 7, p, CFG)
    with open(p, "a", encoding="utf-8") as f:
        f.write('{"seed":1,"world":{}}\n')
    with pytest.raises(DatasetError, match="line 3"):
        load_dataset(p, CFG.lexicon)


def test_split_partition_properties(tmp_path):
    p = tmp_path / "d.jsonl"
    generate_dataset(30, 500, p, CFG)
    outs = split(p, (0.6, 0.2, 0.2))
    all_lines = set(p.read_text().splitlines()[1:])
    seen = []
    for out in outs:
        lines = open(out).read().splitlines()[1:]
        seen.extend(lines)
    assert set(seen) == all_lines and len(seen) == len(all_lines)
    outs2 = split(p, (0.6, 0.2, 0.2),
                  out_paths=[str(tmp_path / f"again{i}.jsonl") for i in range(3)])
    for a, b in zip(outs, outs2):
        assert open(a).read().splitlines()[1:] == open(b).read().splitlines()[1:]


def test_split_degenerate_all_train(tmp_path):
    p = tmp_path / "d.jsonl"
    generate_dataset(4, 900, p, CFG)
    outs = split(p, (1.0, 0.0, 0.0))
    assert len(open(outs[0]).read().splitlines()) == 5
    assert len(open(outs[1]).read().splitlines()) == 1  # header only
    assert len(open(outs[2]).read().splitlines()) == 1


def test_split_rejects_bad_fractions(tmp_path):
    with pytest.raises(ValueError):
        split(tmp_path / "x.jsonl", (0.5, 0.2))


def test_split_assign_deterministic():
    for seed in range(50):
        assert split_assign(seed, (0.8, 0.1, 0.1)) == split_assign(seed, (0.8, 0.1, 0.1))


def test_no_holdout_synonyms_in_generated_data(tmp_path):
    p = tmp_path / "d.jsonl"
    generate_dataset(12, 1234, p, CFG)
    assert scan_for_holdout(p, CFG.lexicon) == []


def test_pinned_generation():
    cfg = CFG.pinned()
    s = generate_sample(4, cfg)
    np.testing.assert_array_equal(s.xi_o[0], [0.05, 0.05])
    np.testing.assert_array_equal(s.xi_o[-1], [0.95, 0.95])
    check_sample_invariants(s, cfg.lexicon)
