import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from bnlslab.checkpoint import read_checkpoint
from bnlslab.cli import main

SMALL = {"N": 2, "p": 9, "n": 128, "L": 16}
REFERENCE = {"N": 2, "p": 9, "n": 256, "L": 16}


def write_cfg(path, **doc):
    path.write_text(json.dumps(doc, indent=2))
    return str(path)


def evolve_doc(T, amplitude=0.5, **init):
    return dict(
        kind="Evolve",
        params=SMALL,
        init=dict({"amplitude": amplitude}, **init),
        run={"dt": 1e-3, "T": T, "snapshot_every": 25, "radii": [4.0]},
    )


def rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


@pytest.fixture(scope="module")
def gs_out(tmp_path_factory):
    d = tmp_path_factory.mktemp("gs")
    cfg = write_cfg(d / "gs.json", kind="GroundState", params=REFERENCE)
    code = main(["groundstate", "--config", cfg, "--out", str(d / "out")])
    return code, d / "out"


def test_groundstate_passes(gs_out):
    code, out = gs_out
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] is True
    keys = {"s_c", "mu", "residual", "l2Q", "dl2Q", "lpQ", "JQ", "CGN", "ME_crit", "K_crit", "fx1", "pohozaev"}
    assert keys <= set(rep["constants"])
    assert rep["config"]["params"] == REFERENCE


def test_groundstate_checkpoint_feeds_evolve(gs_out, tmp_path):
    _, out = gs_out
    q = read_checkpoint(out / "Q.bin")
    assert q.t == 0.0 and q.prm.n == 256
    doc = dict(
        kind="Evolve",
        params=REFERENCE,
        init={"kind": "FromCheckpoint", "path": str(out / "Q.bin"), "amplitude": 0.5},
        run={"dt": 1e-3, "T": 0.01, "snapshot_every": 5},
    )
    direct = dict(doc, init={"amplitude": 0.5})
    assert main(["evolve", "--config", write_cfg(tmp_path / "a.json", **doc), "--out", str(tmp_path / "a")]) == 0
    assert main(["evolve", "--config", write_cfg(tmp_path / "b.json", **direct), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_underresolved_groundstate_exits_one(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "gs.json", kind="GroundState", params=SMALL)
    assert main(["groundstate", "--config", cfg, "--out", str(tmp_path)]) == 1
    out = capsys.readouterr().out
    assert "FAIL C2.sharp_constant" in out
    assert "PASS C1.ground_state" in out


def test_evolve_outputs(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "ev.json", **evolve_doc(0.1))
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert all(ln.startswith(("PASS ", "note: ")) for ln in lines)
    o = tmp_path / "o"
    for name in ("report.json", "trajectory.csv", "checkpoint.bin"):
        assert (o / name).is_file()
    rows = list(csv.DictReader((o / "trajectory.csv").open()))
    assert [float(r["t"]) for r in rows] == pytest.approx([0.0, 0.025, 0.05, 0.075, 0.1])
    rep = json.loads((o / "report.json").read_text())
    assert rep["runs"][0]["classification"] == "GlobalScattering"
    assert rep["runs"][0]["halt_reason"] == "completed"
    assert all(k.startswith("C") and "." in k for k in rep["acceptance"])


def test_resume_equivalence(tmp_path):
    full = tmp_path / "full"
    half = tmp_path / "half"
    rest = tmp_path / "rest"
    main(["evolve", "--config", write_cfg(tmp_path / "f.json", **evolve_doc(0.2)), "--out", str(full)])
    main(["evolve", "--config", write_cfg(tmp_path / "h.json", **evolve_doc(0.1)), "--out", str(half)])
    code = main(
        [
            "evolve",
            "--config",
            str(tmp_path / "f.json"),
            "--out",
            str(rest),
            "--resume",
            str(half / "checkpoint.bin"),
        ]
    )
    assert code == 0
    a = read_checkpoint(full / "checkpoint.bin")
    b = read_checkpoint(rest / "checkpoint.bin")
    assert a.t == b.t == pytest.approx(0.2)
    assert rel(b.u.data, a.u.data) <= 1e-12


def test_deterministic_rerun(tmp_path):
    cfg = write_cfg(tmp_path / "ev.json", **evolve_doc(0.05))
    main(["evolve", "--config", cfg, "--out", str(tmp_path / "r1")])
    main(["evolve", "--config", cfg, "--out", str(tmp_path / "r2")])
    for name in ("trajectory.csv", "checkpoint.bin", "plotdata/evolve_z.dat"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


def test_sweep(tmp_path, capsys):
    doc = dict(
        kind="DichotomySweep",
        params=SMALL,
        run={"dt": 1e-3, "T": 0.05, "snapshot_every": 10},
        sweep={"amplitudes": [0.5, 1.0, 1.2]},
    )
    cfg = write_cfg(tmp_path / "sw.json", **doc)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "Boundary" in out
    table = (tmp_path / "o" / "summary.dat").read_text().splitlines()
    assert table[0].startswith("#")
    cls = {ln.split()[0]: ln.split()[1] for ln in table[1:]}
    assert cls == {"0.5": "GlobalScattering", "1": "Boundary", "1.2": "AboveThreshold"}
    rows = list(csv.DictReader((tmp_path / "o" / "trajectory.csv").open()))
    assert {r["a"] for r in rows} == {"0.5", "1.2"}
    assert (tmp_path / "o" / "a=0.5" / "checkpoint.bin").is_file()


@pytest.mark.parametrize(
    "doc,needle",
    [
        (dict(kind="Evolve", params=SMALL, run={"dtt": 1e-3}), "dtt"),
        (dict(kind="Evolve", params=dict(SMALL, p=5)), "inadmissible"),
        (dict(kind="Evolve", params=SMALL, init={"amplitude": -1.0}), "amplitude"),
        (dict(kind="GroundState", params=SMALL), "does not match"),
    ],
)
def test_bad_config_exits_two(tmp_path, capsys, doc, needle):
    cfg = write_cfg(tmp_path / "bad.json", **doc)
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert needle in capsys.readouterr().err


def test_unknown_key_reports_line(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "bad.json", kind="Evolve", params=SMALL, run={"dtt": 1e-3})
    main(["evolve", "--config", cfg])
    assert "(line " in capsys.readouterr().err


def test_corrupt_resume_exits_two(tmp_path, capsys):
    bogus = tmp_path / "x.bin"
    bogus.write_bytes(b"BNLS")
    cfg = write_cfg(tmp_path / "ev.json", **evolve_doc(0.01))
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path), "--resume", str(bogus)]) == 2
    assert "CorruptCheckpoint" in capsys.readouterr().err


def test_console_script_and_threads(tmp_path):
    cfg = write_cfg(tmp_path / "ev.json", **evolve_doc(0.01))
    env = dict(os.environ, BNLS_THREADS="1")
    proc = subprocess.run(
        [sys.executable, "-m", "bnlslab.cli", "evolve", "--config", cfg, "--out", str(tmp_path / "o")],
        env=env,
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "PASS" in proc.stdout
