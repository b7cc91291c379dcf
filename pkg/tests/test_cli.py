from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import pytest

from oodhawkes.cli import main

GOLDEN = Path(__file__).parent / "golden"

SMALL_EXPERIMENT = {
    "horizon": 20.0, "mc_sequences": 10, "oracle_grid": 200, "max_pairs": 1,
    "train": {"max_epochs": 2, "early_stop_patience": 2},
}


def tree_digest(root: Path) -> dict[str, str]:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def run(*argv) -> int:
    # main() installs its own handler on the package logger; undo it for later tests
    logger = logging.getLogger("oodhawkes")
    saved = (logger.handlers[:], logger.level, logger.propagate)
    try:
        return main(["--log-level", "ERROR", *[str(a) for a in argv]])
    finally:
        logger.handlers[:] = saved[0]
        logger.setLevel(saved[1])
        logger.propagate = saved[2]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("cli") / "data"
    assert run("simulate", "--example", "Baseline", "--n-sequences", 20, "--horizon", 20,
               "--seed", 7, "--out", out) == 0
    return out


def test_missing_config_is_io_error(tmp_path, capsys):
    missing = tmp_path / "missing.json"
    assert run("simulate", "--config", missing, "--out", tmp_path / "o") == 2
    assert str(missing) in capsys.readouterr().err


def test_unknown_config_key_is_domain_error(tmp_path, capsys):
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({"n_sequences": 2, "n_sequence": 3}))
    assert run("simulate", "--config", cfg, "--out", tmp_path / "o") == 1
    assert "n_sequence" in capsys.readouterr().err


def test_bad_role_is_domain_error(dataset, tmp_path, capsys):
    # outcome id 1 used as the cause
    code = run("estimate-ate", "--data", dataset, "--cause", 1, "--outcome", 1, "--intervention", 2,
               "--out", tmp_path / "a")
    assert code == 1
    assert "error: type 1 has role Outcome" in capsys.readouterr().err


def test_simulate_seed_gives_identical_trees(tmp_path):
    for name in ("a", "b"):
        assert run("simulate", "--example", "Cause", "--n-sequences", 5, "--horizon", 10,
                   "--seed", 7, "--out", tmp_path / name) == 0
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")
    assert run("simulate", "--example", "Cause", "--n-sequences", 5, "--horizon", 10,
               "--seed", 8, "--out", tmp_path / "c") == 0
    assert (tmp_path / "a/sequences.jsonl").read_bytes() != (tmp_path / "c/sequences.jsonl").read_bytes()


def test_paper_config_matches_golden(dataset, tmp_path):
    assert run("fit", "--data", dataset, "--paper-config", "--dry-run", "--out", tmp_path / "f") == 0
    resolved = json.loads((tmp_path / "f/resolved-config.json").read_text())
    golden = json.loads((GOLDEN / "fit_paper_config.json").read_text())
    assert {"model": resolved["model"], "train": resolved["train"]} == golden
    assert not (tmp_path / "f/params.bin").exists()


def test_fit_rejects_unknown_model_key(dataset, tmp_path, capsys):
    cfg = tmp_path / "m.json"
    cfg.write_text(json.dumps({"embed_dimm": 8}))
    assert run("fit", "--data", dataset, "--model-config", cfg, "--dry-run", "--out", tmp_path / "f") == 1
    assert "embed_dimm" in capsys.readouterr().err


def test_preprocess(dataset, tmp_path):
    assert run("preprocess", "--data", dataset, "--bin-len", 10, "--stride", 5, "--out", tmp_path / "p") == 0
    lines = (tmp_path / "p/sequences.jsonl").read_text().splitlines()
    bins = json.loads((tmp_path / "p/bins.json").read_text())
    assert len(lines) == len(bins) > 20
    for line in lines:
        rec = json.loads(line)
        assert rec["T"] == 1.0
        assert all(0.0 < ev["t"] <= 1.0 for ev in rec["events"])


def test_pair_shorthand_matches_flags(dataset, tmp_path):
    assert run("estimate-ate", "--data", dataset, "--pair", "0,1,2", "--window", 0.5, "--wv", 0.7,
               "--grid-dt", 0.05, "--out", tmp_path / "x/ate.json") == 0
    assert run("estimate-ate", "--data", dataset, "--cause", 0, "--outcome", 1, "--intervention", 2,
               "--grid-dt", 0.05, "--out", tmp_path / "y") == 0
    a = json.loads((tmp_path / "x/ate.json").read_text())
    b = json.loads((tmp_path / "y/ate.json").read_text())
    assert a["tau"] == b["tau"]
    assert "overlap" in a


def test_strict_overlap_failure(dataset, tmp_path):
    # an epsilon above every propensity makes each stratum a violation
    assert run("check-overlap", "--data", dataset, "--cause", 0, "--intervention", 2,
               "--epsilon", 0.49, "--strict") == 1
    assert run("check-overlap", "--data", dataset, "--cause", 0, "--intervention", 2,
               "--epsilon", 0.49) == 0


def test_gradcheck_exit_codes(tmp_path):
    assert run("gradcheck", "--seed", 0, "--out", tmp_path / "g") == 0
    doc = json.loads((tmp_path / "g/gradcheck.json").read_text())
    assert doc["passed"] and doc["max_rel_error"] <= 1e-4
    assert run("gradcheck", "--seed", 0, "--tolerance", 0.0) == 1


def test_full_pipeline_leaves_inputs_untouched(dataset, tmp_path, capsys):
    before = tree_digest(dataset)
    ck = tmp_path / "ck"
    assert run("fit", "--data", dataset, "--max-epochs", 2, "--seed", 3, "--out", ck) == 0
    assert {"manifest.json", "params.bin", "history.csv", "resolved-config.json"} <= {
        p.name for p in ck.iterdir()}
    assert run("estimate-ate", "--data", dataset, "--pair", "0,1,2", "--intensity", f"model:{ck}",
               "--out", tmp_path / "ate") == 0
    ate = json.loads((tmp_path / "ate/ate.json").read_text())
    assert set(ate["tau"]) == {"0", "1"}
    assert run("check-overlap", "--data", dataset, "--cause", 0, "--intervention", 2,
               "--out", tmp_path / "ov") == 0
    assert tree_digest(dataset) == before
    capsys.readouterr()

    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps(SMALL_EXPERIMENT))
    res = tmp_path / "res"
    assert run("evaluate", "--plan", "baseline", "--reps", 2, "--n-sequences", 10, "--config", cfg,
               "--seed", 5, "--out", res) == 0
    table = capsys.readouterr().out
    assert (res / "summary.json").exists() and (res / "rep00").is_dir() and (res / "rep01").is_dir()
    assert run("report", "--results", res, "--out", tmp_path / "rep") == 0
    assert capsys.readouterr().out == table
    assert json.loads((tmp_path / "rep/summary.json").read_text()) == json.loads(
        (res / "summary.json").read_text())


def test_resolved_config_written_everywhere(dataset, tmp_path):
    assert run("fit", "--data", dataset, "--dry-run", "--out", tmp_path / "f") == 0
    assert run("preprocess", "--data", dataset, "--out", tmp_path / "p") == 0
    for sub in ("f", "p"):
        doc = json.loads((tmp_path / sub / "resolved-config.json").read_text())
        assert doc["command"] in ("fit", "preprocess")
    assert json.loads((dataset / "resolved-config.json").read_text())["seed"] == 7
