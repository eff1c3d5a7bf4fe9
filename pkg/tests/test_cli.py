import csv
import json

import pytest

from rkscars.cli import EXIT_CONFIG, EXIT_OK, EXIT_VALIDATION, RunConfig, main


def run(tmp_path, *args, lx=2, ly=2):
    return main([*args, "--lx", str(lx), "--ly", str(ly), "--out", str(tmp_path)])


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_enumerate(tmp_path, capsys):
    assert run(tmp_path, "enumerate") == EXIT_OK
    assert "18 gauge-invariant configurations" in capsys.readouterr().out
    assert (tmp_path / "sector-2x2.txt").exists()


@pytest.mark.parametrize(
    "args",
    [
        ["enumerate", "--lx", "3", "--ly", "2"],
        ["enumerate", "--lx", "2", "--ly", "2", "--stab-tol", "0.5"],
        ["enumerate", "--lx", "2", "--ly", "2", "--threads", "-1"],
        ["bogus", "--lx", "2", "--ly", "2"],
        ["enumerate", "--lx", "2"],
    ],
)
def test_config_errors(args, tmp_path):
    assert main([*args, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_downstream_commands_need_a_spectrum(tmp_path, capsys):
    for cmd in ("report", "find-scars"):
        assert run(tmp_path, cmd) == EXIT_CONFIG
    assert "spectrum" in capsys.readouterr().err
    assert run(tmp_path, "synthesize", "--scar-id", "0") == EXIT_CONFIG


def test_corrupted_spectrum_is_a_validation_failure(tmp_path):
    import numpy as np

    assert run(tmp_path, "spectrum") == EXIT_OK
    path = tmp_path / f"spectrum-{RunConfig(2, 2).spectrum_key}.npz"
    data = dict(np.load(path))
    data["eigenvalues"] = data["eigenvalues"] + 0.5
    np.savez(path, **data)
    assert run(tmp_path, "find-scars") == EXIT_VALIDATION


def test_cache_keys():
    a = RunConfig(4, 2)
    assert a.spectrum_key == RunConfig(4, 2, stab_tol=1e-9).spectrum_key
    assert a.scan_key != RunConfig(4, 2, stab_tol=1e-9).scan_key
    assert a.spectrum_key != RunConfig(4, 2, coupling=0.5).spectrum_key


def test_full_pipeline_2x2(tmp_path, capsys):
    for cmd in ("spectrum", "report", "find-scars", "construct-singlets"):
        assert run(tmp_path, cmd) == EXIT_OK
    key = RunConfig(2, 2).scan_key
    rows = read_csv(tmp_path / f"report-{key}.csv")
    assert rows[0] == ["index", "E", "kin", "pot_even", "pot_odd", "flatness", "svn", "m2"]
    assert len(rows) == 19 and all(r[7] for r in rows[1:])
    scars = json.loads((tmp_path / f"scars-{key}.json").read_text())
    assert [r["origin"] for r in scars] == ["numeric", "numeric", "analytic", "analytic"]
    singlets = json.loads((tmp_path / "singlets-2x2.json").read_text())
    assert singlets["even"]["labels"] == ["AC", "CA"]

    for sid in (0, 2):
        assert run(tmp_path, "synthesize", "--scar-id", str(sid)) == EXIT_OK
        verdict = json.loads((tmp_path / f"circuit-{key}-{sid}-verify.json").read_text())
        assert verdict["passed"] and verdict["method"] == "two-branch"
        assert len(verdict["expectations"]) == 8
    assert run(tmp_path, "verify") == EXIT_OK
    assert run(tmp_path, "synthesize", "--scar-id", "99") == EXIT_CONFIG

    qasm = tmp_path / f"circuit-{key}-0.qasm"
    qasm.write_text(qasm.read_text().replace("z q[", "x q["))
    assert run(tmp_path, "verify", "--scar-id", "0") == EXIT_VALIDATION


def test_reruns_are_byte_identical(tmp_path):
    assert run(tmp_path, "spectrum") == EXIT_OK
    key = RunConfig(2, 2).scan_key
    outputs = []
    for _ in range(2):
        assert run(tmp_path, "report") == EXIT_OK
        assert run(tmp_path, "find-scars") == EXIT_OK
        outputs.append(
            ((tmp_path / f"report-{key}.csv").read_bytes(), (tmp_path / f"scars-{key}.json").read_bytes())
        )
    assert outputs[0] == outputs[1]


def test_no_sre_leaves_m2_blank(tmp_path):
    assert run(tmp_path, "spectrum") == EXIT_OK
    assert main(["report", "--lx", "2", "--ly", "2", "--out", str(tmp_path), "--no-sre"]) == EXIT_OK
    key = RunConfig(2, 2, sre=False).scan_key
    rows = read_csv(tmp_path / f"report-{key}.csv")
    assert all(r[7] == "" for r in rows[1:])


@pytest.mark.slow
def test_4x2_report(tmp_path):
    assert run(tmp_path, "spectrum", lx=4) == EXIT_OK
    assert run(tmp_path, "report", lx=4) == EXIT_OK
    assert run(tmp_path, "find-scars", lx=4) == EXIT_OK
    key = RunConfig(4, 2).scan_key
    rows = read_csv(tmp_path / f"report-{key}.csv")
    assert len(rows) == 115 and all(r[7] for r in rows[1:])
    assert run(tmp_path, "synthesize", "--scar-id", "0", lx=4) == EXIT_OK
