from __future__ import annotations

import json
import os
import shutil
import subprocess
import sys

import pytest

from atm import fixture_path
from atm.cli import kb_paths, main
from atm.kb import SEED_KB_DIR
from helpers import load_fixture

RAG = str(fixture_path("rag") / "model.yaml")
RAG_KB = str(fixture_path("rag") / "kb")
BACKDOOR = str(fixture_path("backdoor") / "model.yaml")
EXTRACTION = str(fixture_path("extraction") / "model.yaml")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(autouse=True)
def no_kb_env(monkeypatch):
    monkeypatch.delenv("ATM_KB_PATH", raising=False)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


CYCLE = """\
atm-model-version: 1
name: cyc
stages: [{id: s, kind: training}]
assets:
  - {id: a, kind: dataset, stage: s}
  - {id: b, kind: model-parameters, stage: s}
edges:
  - {id: e1, mode: dependency, source: a, target: b}
  - {id: e2, mode: dependency, source: b, target: a}
"""


# -- validate ------------------------------------------------------------------

def test_validate_ok(capsys):
    assert run(capsys, "validate", "--model", RAG)[0] == 0


def test_validate_cycle_exits_one(capsys, tmp_path):
    code, _, err = run(capsys, "validate", "--model", write(tmp_path, "m.yaml", CYCLE))
    assert code == 1 and "dependency-cycle" in err


def test_validate_missing_file_exits_two(capsys, tmp_path):
    assert run(capsys, "validate", "--model", str(tmp_path / "absent.yaml"))[0] == 2


def test_validate_prints_lint_warnings_but_passes(capsys, tmp_path):
    text = """\
atm-model-version: 1
name: lint
stages: [{id: s, kind: deploy-inference}]
assets: [{id: d, kind: dataset, stage: s}]
vulnerabilities:
  - {id: v, stage: s, claims: [{asset: d, capability: make-limited-changes}]}
"""
    code, _, err = run(capsys, "validate", "--model", write(tmp_path, "m.yaml", text))
    assert code == 0 and "table1-not-present" in err


def test_usage_error_exits_one(capsys):
    assert run(capsys, "analyze")[0] == 1
    assert run(capsys, "frobnicate")[0] == 1


# -- footprint -----------------------------------------------------------------

def test_footprint_has_prompt_contribution(capsys):
    code, out, _ = run(capsys, "footprint", "--model", RAG)
    assert code == 0
    doc = json.loads(out)
    hit = [c for c in doc["claims"] if (c["asset"], c["capability"]) == ("user-prompt", "contribute")]
    assert hit and hit[0]["origin"]["kind"] == "derived" and hit[0]["origin"]["ref"] == "query-into-prompt"


def test_footprint_for_absent_adversary_is_empty(capsys, tmp_path):
    text = """\
atm-model-version: 1
name: remote-only
stages: [{id: s, kind: deploy-inference}]
assets: [{id: q, kind: inputs, stage: s}]
adversaries: [{id: remote}, {id: insider}]
vulnerabilities:
  - {id: v, stage: s, adversaries: [remote], claims: [{asset: q, capability: influence}]}
"""
    code, out, _ = run(capsys, "footprint", "--model", write(tmp_path, "m.yaml", text), "--adversary", "insider")
    assert code == 0 and json.loads(out)["claims"] == []


def test_footprint_corrupt_model_exits_one(capsys, tmp_path):
    assert run(capsys, "footprint", "--model", write(tmp_path, "m.yaml", "atm-model-version: 1\nname: [\n"))[0] == 1


def test_footprint_unknown_adversary_exits_one(capsys):
    assert run(capsys, "footprint", "--model", RAG, "--adversary", "nobody")[0] == 1


# -- analyze -------------------------------------------------------------------

def test_analyze_backdoor(capsys):
    code, out, _ = run(capsys, "analyze", "--model", BACKDOOR)
    assert code == 0
    assert "backdoor" in [a["attack"]["id"] for a in json.loads(out)["in-scope"]]


def test_analyze_is_byte_identical(capsys):
    first = run(capsys, "analyze", "--model", RAG, "--kb", "@seed", "--kb", RAG_KB)[1]
    second = run(capsys, "analyze", "--model", RAG, "--kb", "@seed", "--kb", RAG_KB)[1]
    assert first == second


def test_analyze_chain_marks_chain_enabled(capsys):
    ext = str(fixture_path("extraction") / "kb")
    code, out, _ = run(capsys, "analyze", "--model", EXTRACTION, "--kb", "@seed", "--kb", ext, "--chain")
    assert code == 0
    tdi = [a for a in json.loads(out)["in-scope"] if a["attack"]["id"] == "training-data-inference"][0]
    assert tdi["round"] > 1 and tdi["enablers"] == ["surrogate-confidence"]
    plain = json.loads(run(capsys, "analyze", "--model", EXTRACTION, "--kb", "@seed", "--kb", ext)[1])
    assert "training-data-inference" not in [a["attack"]["id"] for a in plain["in-scope"]]


def test_analyze_max_rounds_and_vector_cap(capsys):
    code, out, _ = run(capsys, "analyze", "--model", EXTRACTION, "--chain", "--max-rounds", "1", "--vector-cap", "1")
    doc = json.loads(out)
    assert code == 0 and doc["rounds"] == 1 and doc["vector-cap"] == 1
    assert all(len(a["vectors"]) <= 1 for a in doc["in-scope"])
    assert run(capsys, "analyze", "--model", EXTRACTION, "--vector-cap", "0")[0] == 1


@pytest.mark.parametrize("fmt,marker", [("markdown", "# Threat report"), ("graph", "digraph")])
def test_analyze_formats(capsys, fmt, marker):
    code, out, _ = run(capsys, "analyze", "--model", RAG, "--format", fmt)
    assert code == 0 and out.startswith(marker)


def test_analyze_writes_only_to_out(capsys, tmp_path):
    out = tmp_path / "report.json"
    code, stdout, _ = run(capsys, "analyze", "--model", BACKDOOR, "--out", str(out))
    assert code == 0 and stdout == ""
    assert json.loads(out.read_text())["kind"] == "report"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["report.json"]


def test_analyze_unwritable_out_exits_two(capsys, tmp_path):
    assert run(capsys, "analyze", "--model", BACKDOOR, "--out", str(tmp_path / "no" / "dir.json"))[0] == 2


def test_bad_kb_exits_one(capsys, tmp_path):
    bad = write(tmp_path, "bad.yaml", "atm-kb-version: 1\nid: x\nname: x\nrequirements: []\n")
    assert run(capsys, "analyze", "--model", BACKDOOR, "--kb", bad)[0] == 1
    assert run(capsys, "analyze", "--model", BACKDOOR, "--kb", str(tmp_path / "missing"))[0] == 2


# -- footprint cache -------------------------------------------------------------

def test_cache_written_reused_and_invalidated(capsys, tmp_path, monkeypatch):
    model = tmp_path / "m.yaml"
    shutil.copy(BACKDOOR, model)
    out = tmp_path / "r.json"
    cache = tmp_path / "r.json.footprint.json"
    args = ("analyze", "--model", str(model), "--out", str(out), "--cache-footprint")
    assert run(capsys, *args)[0] == 0
    first = json.loads(cache.read_text())
    assert first["cache-key"]["adversary"] == "all"
    report1 = out.read_text()

    with monkeypatch.context() as patch:
        patch.setattr("atm.cli.compute_footprint", lambda *a: pytest.fail("cache was not reused"))
        assert run(capsys, *args)[0] == 0
    assert out.read_text() == report1

    model.write_text(model.read_text().replace("capability: make-limited-changes", "capability: influence"))
    code, _, err = run(capsys, *args)
    assert code == 0 and "stale" in err
    assert json.loads(cache.read_text())["cache-key"] != first["cache-key"]
    assert "backdoor" not in [a["attack"]["id"] for a in json.loads(out.read_text())["in-scope"]]


def test_corrupt_cache_is_ignored(capsys, tmp_path):
    out = tmp_path / "r.json"
    (tmp_path / "r.json.footprint.json").write_text("{not json")
    code, _, err = run(capsys, "analyze", "--model", BACKDOOR, "--out", str(out), "--cache-footprint")
    assert code == 0 and "unreadable" in err


def test_cache_requires_out(capsys):
    assert run(capsys, "analyze", "--model", BACKDOOR, "--cache-footprint")[0] == 1


# -- whatif --------------------------------------------------------------------

def test_whatif_rag_guard_bypass(capsys):
    code, out, _ = run(capsys, "whatif", "--model", RAG, "--kb", "@seed", "--kb", RAG_KB, "--remove", "llm-guard-bypass")
    assert code == 0
    changes = json.loads(out)["changes"]
    assert {"attack": "rag-jailbreak", "before": "in-scope", "after": "out-of-scope"} in changes


def test_whatif_nothing_removed_is_empty(capsys):
    code, out, _ = run(capsys, "whatif", "--model", RAG)
    assert code == 0 and json.loads(out)["changes"] == []


def test_whatif_remove_everything(capsys):
    ids = load_fixture("rag").source_ids
    argv = ["whatif", "--model", RAG, "--kb", "@seed", "--kb", RAG_KB]
    for sid in ids:
        argv += ["--remove", sid]
    code, out, _ = run(capsys, *argv)
    assert code == 0 and json.loads(out)["in-scope-after"] == []


def test_whatif_unknown_id_exits_one(capsys):
    code, _, err = run(capsys, "whatif", "--model", RAG, "--remove", "ghost")
    assert code == 1 and "ghost" in err


def test_whatif_graph_and_markdown(capsys):
    code, out, _ = run(capsys, "whatif", "--model", RAG, "--remove", "llm-guard-bypass", "--format", "graph")
    assert code == 0 and out.startswith("digraph")
    code, out, _ = run(capsys, "whatif", "--model", RAG, "--remove", "llm-guard-bypass", "--format", "markdown")
    assert code == 0 and out.startswith("# What-if")


# -- kb ------------------------------------------------------------------------

def test_kb_lint_seed(capsys):
    code, out, _ = run(capsys, "kb", "lint")
    assert code == 0 and "warning" not in out


def test_kb_lint_redundant_is_warning(capsys, tmp_path):
    text = """\
atm-kb-version: 1
id: dup
name: Duplicate
requirements:
  - {selector: {kind: inputs}, min-capability: make-limited-changes}
  - {selector: {kind: inputs}, min-capability: make-arbitrary-changes}
"""
    code, out, _ = run(capsys, "kb", "lint", "--kb", write(tmp_path, "dup.yaml", text))
    assert code == 0 and "redundant-requirement" in out


def test_kb_malformed_exits_one(capsys, tmp_path):
    assert run(capsys, "kb", "lint", "--kb", write(tmp_path, "x.yaml", "atm-kb-version: 1\nid: [\n"))[0] == 1


def test_kb_lint_namespaces_from_model(capsys):
    ar = fixture_path("autorust")
    args = ("kb", "lint", "--kb", "@seed", "--kb", str(ar / "kb"))
    assert "custom-namespace" in run(capsys, *args)[1]
    assert "custom-namespace" not in run(capsys, *args, "--model", str(ar / "model.yaml"))[1]


def test_kb_list(capsys):
    code, out, _ = run(capsys, "kb", "list")
    lines = out.splitlines()
    assert code == 0 and lines[0].split() == ["id", "family", "requirements"]
    assert len(lines) == 7
    assert any(ln.startswith("backdoor") and "dataset[training]: contribute" in ln for ln in lines)


# -- KB path resolution ------------------------------------------------------------

def test_kb_path_precedence(monkeypatch, tmp_path):
    assert kb_paths(None) == [str(SEED_KB_DIR)]
    monkeypatch.setenv("ATM_KB_PATH", os.pathsep.join([str(tmp_path), RAG_KB]))
    assert kb_paths(None) == [str(tmp_path), RAG_KB]
    assert kb_paths(["x"]) == ["x"]


def test_env_kb_path_is_used(capsys, monkeypatch):
    monkeypatch.setenv("ATM_KB_PATH", os.pathsep.join([str(SEED_KB_DIR), RAG_KB]))
    out = json.loads(run(capsys, "analyze", "--model", RAG)[1])
    assert "rag-jailbreak" in [a["attack"]["id"] for a in out["in-scope"]]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "atm.cli", "validate", "--model", RAG],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    proc = subprocess.run([sys.executable, "-m", "atm.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("atm ")
