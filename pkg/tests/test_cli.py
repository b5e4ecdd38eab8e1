from __future__ import annotations

import csv
import json
import os
import subprocess
import sys

import pytest

from fibdrift import __version__
from fibdrift.cli import git_hash


def run(args, cwd, env=None, check=True):
    full_env = dict(os.environ)
    full_env.pop("FIBDRIFT_THREADS", None)
    full_env.update(env or {})
    res = subprocess.run([sys.executable, "-m", "fibdrift.cli", *args], cwd=cwd, env=full_env,
                         capture_output=True, text=True, timeout=600)
    if check and res.returncode != 0:
        raise AssertionError(f"exit {res.returncode}: {res.stderr}")
    return res


def _error(res):
    return json.loads(res.stderr.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def inputs(tmp_path_factory, covering_fps, covering_systems):
    d = tmp_path_factory.mktemp("inputs")
    (d / "fp.json").write_text(json.dumps({"fixed_point": covering_fps[3].to_record()}))
    (d / "density.json").write_text(json.dumps({"density": covering_systems[3][1].to_record()}))
    return d


def test_parity_error(tmp_path):
    res = run(["solve", "--family", "covering", "--ell", "4"], tmp_path, check=False)
    assert res.returncode == 1
    rec = _error(res)
    assert rec["error_kind"] == "ParityMismatch"
    assert set(rec) == {"stage", "error_kind", "detail"}


def test_bad_tolerance(tmp_path, inputs):
    res = run(["density", "--fp", str(inputs / "fp.json"), "--tol", "-1"], tmp_path, check=False)
    assert res.returncode == 1
    assert _error(res)["stage"] == "cli"


def test_selftest(tmp_path):
    res = run(["selftest", "--steps", "200000", "--seeds", "4"], tmp_path)
    lines = [ln for ln in res.stdout.splitlines() if ln.startswith(("PASS", "FAIL"))]
    assert lines and all(ln.startswith("PASS") for ln in lines)


def test_density_provenance(tmp_path, inputs):
    fp = inputs / "fp.json"
    run(["--seed", "11", "density", "--fp", str(fp), "--out", "d.json"], tmp_path)
    doc = json.loads((tmp_path / "d.json").read_text())
    prov = doc["provenance"]
    assert prov["version"] == __version__ and prov["seed"] == 11 and prov["command"] == "density"
    assert prov["input_hashes"]["fp"] == git_hash(fp.read_bytes())
    assert prov["config"]["tol"] == 1e-12
    assert doc["density"]["residual"] <= 1e-8


def test_threads_env(tmp_path):
    run(["selftest", "--steps", "20000", "--seeds", "2"], tmp_path, env={"FIBDRIFT_THREADS": "3"})
    assert json.loads((tmp_path / "selftest.json").read_text())["provenance"]["threads"] == 3


def test_branches_csv(tmp_path, inputs):
    run(["branches", "--fp", str(inputs / "fp.json")], tmp_path)
    with open(tmp_path / "branches.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["m", "sign", "domain_lo", "domain_hi", "length"]
    assert len(rows) > 20


def test_csv_deterministic(tmp_path, inputs):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        run(["--out-dir", str(d), "contour", "--fp", str(inputs / "fp.json"), "--density",
             str(inputs / "density.json"), "--n", "300"], tmp_path)
        run(["--out-dir", str(d), "parabolic", "--eta", "1e-2", "--steps", "5000"], tmp_path)
        outs.append(((d / "contour.csv").read_bytes(), (d / "orbit.csv").read_bytes()))
    assert outs[0] == outs[1]
    header = outs[0][0].decode().splitlines()[0]
    assert header == "n,re_z,im_z,s_n,partial_sum"
    assert outs[0][1].decode().splitlines()[0] == "n,re_z,im_z,r1,r2,r3"


def test_drift_seeded(tmp_path, inputs):
    docs = []
    for k in range(2):
        run(["--seed", "4", "drift", "--fp", str(inputs / "fp.json"), "--density", str(inputs / "density.json"),
             "--steps", "20000", "--seeds", "2", "--out", f"r{k}.json"], tmp_path)
        docs.append(json.loads((tmp_path / f"r{k}.json").read_text())["report"])
    assert docs[0] == docs[1]
