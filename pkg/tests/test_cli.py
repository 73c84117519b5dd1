import hashlib
import json
import os

import pytest

from conftest import SCHEMA
from hinrisk import cli
from hinrisk.cli import main
from hinrisk.errors import InvariantViolation
from hinrisk.oracles import oracle_enumerate

TINY = {"n_enterprise": 200, "n_person": 500, "n_commodity": 200, "n_news": 400}


def digest(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def tree_digest(directory):
    return {n: digest(os.path.join(directory, n)) for n in sorted(os.listdir(directory))}


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_json(root / "cfg.json", {"synth": TINY, "max_paths": 12})
    assert main(["synth", "--config", cfg, "--seed", "3", "--out", str(root / "data")]) == 0
    return root, cfg


def test_synth_writes_inputs_and_manifest(data):
    root, _ = data
    names = set(os.listdir(root / "data"))
    assert {"nodes.csv", "edges.csv", "labels.csv", "attributes.csv", "ground_truth.json", "manifest.json"} <= names
    man = json.loads((root / "data" / "manifest.json").read_text())
    assert man["command"] == "synth" and man["seed"] == 3
    assert man["config"]["synth"]["n_enterprise"] == 200
    for name, h in man["artifacts"].items():
        assert digest(root / "data" / name) == h
    assert len(man["config_hash"]) == 64


def test_full_pipeline_smoke(data, capsys):
    root, cfg = data
    d = str(root / "data")
    before = tree_digest(d)
    steps = [
        ["validate"], ["ingest"], ["infer-risk"], ["features"], ["train", "--kind", "hetesim"], ["evaluate"],
        ["sweep", "--windows", "0:3650,3285:3650"],
    ]
    for step in steps:
        out = str(root / f"out_{step[0]}")
        assert main(step + ["--data", d, "--config", cfg, "--out", out]) == 0, step
        assert os.path.exists(os.path.join(out, "manifest.json"))
    assert main(["report", "--input", str(root / "out_evaluate"), "--out", str(root / "rep")]) == 0
    text = (root / "rep" / "report.md").read_text()
    for method in ("SME CV", "SME HPF", "Naive MP", "CountSim MP", "HeteSim MP"):
        assert f"| {method} |" in text
    rep = json.loads((root / "out_evaluate" / "report.json").read_text())
    assert set(rep["methods"]) == {"SME CV", "SME HPF", "Naive MP", "CountSim MP", "HeteSim MP"}
    assert os.path.exists(root / "out_train" / "model_hetesim.json")
    assert len((root / "out_features" / "metapaths.txt").read_text().splitlines()) == 12
    # no subcommand touched its inputs
    assert tree_digest(d) == before
    capsys.readouterr()


def test_enumerate_matches_oracle(tmp_path, capsys):
    assert main(["enumerate", "--max-relations", "2", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    E = SCHEMA.object_type("enterprise")
    assert len(lines) == len(oracle_enumerate(SCHEMA, E, 2))
    from hinrisk.metapath import parse_metapath

    got = {tuple(r.key for r in parse_metapath(s, SCHEMA).relation_types) for s in lines}
    assert got == oracle_enumerate(SCHEMA, E, 2)
    assert (tmp_path / "metapaths.txt").read_text().splitlines() == lines


def test_rerun_is_checksum_identical(data, capsys):
    root, cfg = data
    mans = []
    for run in ("a", "b"):
        out = root / f"repro_{run}"
        assert main(["evaluate", "--data", str(root / "data"), "--config", cfg, "--out", str(out)]) == 0
        mans.append(json.loads((out / "manifest.json").read_text()))
    assert mans[0] == mans[1]
    assert tree_digest(root / "repro_a") == tree_digest(root / "repro_b")
    capsys.readouterr()


def test_synth_rerun_identical(tmp_path):
    cfg = write_json(tmp_path / "c.json", {"synth": TINY})
    for run in ("a", "b"):
        assert main(["synth", "--config", cfg, "--out", str(tmp_path / run)]) == 0
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")


def test_precedence_flags_over_file_over_defaults(tmp_path):
    cfg = write_json(tmp_path / "c.json", {"top_k": 7, "folds": 3, "seed": 5})
    out = tmp_path / "o"
    assert main(["enumerate", "--config", cfg, "--folds", "4", "--max-relations", "1", "--out", str(out)]) == 0
    pipe = json.loads((out / "manifest.json").read_text())["config"]["pipeline"]
    assert pipe["top_k"] == 7  # file beats default
    assert pipe["folds"] == 4  # flag beats file
    assert pipe["seed"] == 5 and pipe["max_relations"] == 1
    assert pipe["threshold"] == 0.75  # default


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main([]) == 2
    assert main(["enumerate", "--max-relations", "0", "--out", str(tmp_path / "a")]) == 2
    assert main(["enumerate", "--as-of", "5:1x", "--out", str(tmp_path / "b")]) == 2
    assert main(["enumerate", "--feature-kinds", "bogus", "--out", str(tmp_path / "c")]) == 2
    bad = write_json(tmp_path / "bad.json", {"no_such_key": 1})
    assert main(["enumerate", "--config", bad, "--out", str(tmp_path / "d")]) == 2
    assert main(["validate", "--out", str(tmp_path / "e")]) == 2
    assert main(["report", "--input", str(tmp_path), "--out", str(tmp_path / "f")]) == 2
    for name in "abcdef":
        assert not (tmp_path / name).exists()
    capsys.readouterr()


def test_data_errors_exit_3(tmp_path, capsys):
    assert main(["validate", "--data", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]) == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["command"] == "validate" and err["error"] == "DataError"
    d = tmp_path / "d"
    d.mkdir()
    (d / "nodes.csv").write_text("id,type,timestamp\na,enterprise,\n")
    (d / "edges.csv").write_text("id,src,dst,relation,timestamp\nx,a,v99,control,\n")
    assert main(["validate", "--data", str(d), "--out", str(tmp_path / "o")]) == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["module"] == "hin" and err["error"] == "DanglingEdge" and "line 2" in err["message"]
    assert not (tmp_path / "o").exists()


def separation_data(d):
    d.mkdir()
    nodes = ["id,type,timestamp"] + [f"E{i},enterprise,\nP{i},person," for i in range(8)]
    edges = ["id,src,dst,relation,timestamp"] + [f"L{i},E{i},P{i},control," for i in range(8)]
    labels = ["id,risky"] + [f"E{i},{int(i < 4)}\nP{i},{int(i < 4)}" for i in range(8)]
    for name, rows in (("nodes", nodes), ("edges", edges), ("labels", labels)):
        (d / f"{name}.csv").write_text("\n".join(rows) + "\n")


def test_separation_exit_4_and_no_partial_output(tmp_path, capsys):
    separation_data(tmp_path / "d")
    before = tree_digest(tmp_path / "d")
    out = tmp_path / "o"
    rc = main(["train", "--data", str(tmp_path / "d"), "--kind", "naive", "--top-k", "1", "--out", str(out)])
    assert rc == 4
    err = json.loads(capsys.readouterr().err.strip())
    assert err == {
        "command": "train", "module": "creditmodel", "error": "SeparationDetected",
        "message": err["message"],
    }
    assert not out.exists()
    assert not [n for n in os.listdir(tmp_path) if n.startswith(".hinrisk-stage")]
    assert tree_digest(tmp_path / "d") == before


def test_invariant_violation_exit_5(tmp_path, monkeypatch, capsys):
    def broken(*a):
        raise InvariantViolation("adjacency index out of sync")

    monkeypatch.setitem(cli.COMMANDS, "enumerate", (broken, "metapath", ""))
    assert main(["enumerate", "--out", str(tmp_path / "o")]) == 5
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "InvariantViolation" and err["module"] == "metapath"
    assert not (tmp_path / "o").exists()


def test_failure_keeps_previous_output(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["enumerate", "--max-relations", "1", "--out", str(out)]) == 0
    before = tree_digest(out)
    assert main(["validate", "--data", str(tmp_path / "none"), "--out", str(out)]) == 3
    assert tree_digest(out) == before
    capsys.readouterr()


def test_version(capsys):
    assert main(["--version"]) == 0
    assert capsys.readouterr().out.startswith("hinrisk ")
