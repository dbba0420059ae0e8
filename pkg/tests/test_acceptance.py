"""Acceptance criteria 1-14, driven through ``polyascrp verify``.

The suite runs once per session with seed 42; each test checks the
reports of one criterion and logs one PASS/FAIL line per criterion.
"""

import json

import pytest

from polyascrp.cli import main

SEED = "42"
CRITERIA = [f"C{k:02d}" for k in range(1, 14)]


@pytest.fixture(scope="session")
def verify_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify_w1")
    status = main(["verify", "--seed", SEED, "--workers", "1", "--out", str(out)])
    manifest = out / "manifest.json"
    return status, json.loads(manifest.read_text()), manifest.read_bytes()


def _log(criterion_log, key, ok, detail=""):
    line = f"{key}: {'PASS' if ok else 'FAIL'}{' ' + detail if detail else ''}"
    criterion_log[key] = [line]
    print(line)


@pytest.mark.slow
@pytest.mark.parametrize("key", CRITERIA)
def test_criterion(verify_run, key, criterion_log):
    _, doc, _ = verify_run
    reports = [r for r in doc["reports"] if r["name"].startswith(key + " ")]
    assert reports, f"no reports for {key}"
    failed = [r["name"] for r in reports if not r["passed"]]
    worst = min(r["p_value"] for r in reports)
    _log(criterion_log, key, not failed, f"({len(reports)} reports, min p={worst:.4g})")
    assert not failed, failed


@pytest.mark.slow
def test_verify_exit_status_is_and_of_reports(verify_run):
    status, doc, _ = verify_run
    assert doc["passed"] == all(r["passed"] for r in doc["reports"])
    assert status == (0 if doc["passed"] else 1)


@pytest.mark.slow
def test_c14_manifest_is_byte_identical_across_runs_and_workers(verify_run, tmp_path, criterion_log):
    _, _, first = verify_run
    out = tmp_path / "verify_w2"
    main(["verify", "--seed", SEED, "--workers", "2", "--out", str(out)])
    same = (out / "manifest.json").read_bytes() == first
    _log(criterion_log, "C14", same, "(workers 1 vs 2)")
    assert same
