import csv
import io
import json
import os
import subprocess

import numpy as np
import pytest

import ssflab


def test_philox_known_answer():
    assert ssflab.philox([0, 0, 0, 0], [0, 0]) == [0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8]


def test_free_laplacian_spectrum():
    h = ssflab.free_hamiltonian(1, [6])
    expected = 2 - 2 * np.cos(np.pi * np.arange(1, 7) / 7)
    assert np.allclose(np.linalg.eigvalsh(h), expected)


def test_counting_matches_numpy():
    rng = np.random.default_rng(3)
    for n in (5, 40, 90):
        a = rng.uniform(-1, 1, (n, n))
        a = a + a.T
        ev = np.linalg.eigvalsh(a)
        for lam in rng.uniform(ev[0] - 1, ev[-1] + 1, 10):
            if np.min(np.abs(ev - lam)) < 1e-8:
                continue
            assert ssflab.count_below(a, lam) == int(np.sum(ev < lam))


def test_ssf_and_birman_krein():
    rng = np.random.default_rng(5)
    v = rng.choice([0.0, -1.0], size=60)
    h = ssflab.hamiltonian(1, [60], v.tolist())
    h0 = ssflab.free_hamiltonian(1, [60])
    lams = [-0.73, 0.51, 1.93, 3.37]
    ev, ev0 = np.linalg.eigvalsh(h), np.linalg.eigvalsh(h0)
    expected = [int(np.sum(ev0 < l) - np.sum(ev < l)) for l in lams]
    assert ssflab.ssf(h, h0, lams) == expected
    assert all(x <= 0 for x in expected)  # negative potential pulls eigenvalues down
    trace, step, residual, tol = ssflab.birman_krein_residual(h, h0, -1.0, 2.0)
    assert abs(residual) <= tol


def test_gaussian_bound():
    assert ssflab.gaussian_bound_halfspace(1, 1.0, 1.0) == pytest.approx(2 * np.exp(-0.25))


def test_config_validation():
    assert len(ssflab.experiment_names()) == 9
    yaml = ssflab.default_config("cutoff")
    assert ssflab.validate(yaml) == []
    errs = ssflab.validate("experiment: cutoff\ngrid: {spacing: -1}\nschedule: [4, 2]\n")
    assert any(e.startswith("grid.spacing") for e in errs)
    assert any(e.startswith("schedule") for e in errs)
    with pytest.raises(ValueError):
        ssflab.run("experiment: cutoff\nbogus: 1\n")


SMALL = "experiment: cutoff\nschedule: [16, 32]\nrealizations: 4\nseed: 2\n"


def test_run_record_and_determinism():
    rec = ssflab.run(SMALL, workers=1)
    assert rec["experiment"] == "cutoff"
    assert "raw" in rec["tables"]
    assert any(c["name"] == "strictly decreasing" for c in rec["checks"])
    assert ssflab.table_csv(SMALL, "raw", 1) == ssflab.table_csv(SMALL, "raw", 3)


def test_cli_csv_and_json_agree(tmp_path):
    cli = os.environ.get("SSFLAB_CLI")
    if not cli:
        pytest.skip("SSFLAB_CLI not set")
    cfg = tmp_path / "c.yaml"
    cfg.write_text(SMALL)
    for fmt in ("csv", "json"):
        subprocess.run([cli, "cutoff", str(cfg), "--format", fmt, "--out", str(tmp_path / fmt)], check=True,
                       capture_output=True)
    tables = {t["name"]: t for t in json.loads((tmp_path / "json" / "cutoff.json").read_text())["tables"]}
    rows = list(csv.reader(io.StringIO((tmp_path / "csv" / "cutoff.csv").read_text())))
    assert rows[0] == tables["raw"]["columns"]
    assert len(rows) - 1 == len(tables["raw"]["rows"])
    for got, want in zip(rows[1:], tables["raw"]["rows"]):
        assert [float(x) for x in got] == [float(x) for x in want]
    manifest = json.loads((tmp_path / "csv" / "manifest.json").read_text())
    assert manifest["complete"] and manifest["passed"]
