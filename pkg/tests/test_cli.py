import json
import math

import pytest

from selab import config as cfgmod
from selab.cli import main
from selab.errors import ConfigError

EIG = """
[problem]
family = pla
g = power 0.5

[mesh]
geometry = interval
n = 401

[action]
name = eig

[output]
stem = eig
plots = {plots}
"""

SWEEP = """
[problem]
family = pla
g = power 0.5
f = linear 1
coef.a = constant 1

[mesh]
geometry = interval
n = 201
grading = 2

[action]
name = sweep
param = lambda
grid = lin 1 8 4

[output]
stem = sw
plots = false
"""


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_eig_run_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    assert main(["eig", "--config", write(tmp_path, EIG.format(plots="true")), "--out", str(out)]) == 0
    data = json.loads((out / "eig.json").read_text())
    assert data["result"]["eigenpair"]["lambda1"] == pytest.approx(math.pi**2, abs=1e-3)
    assert (out / "eig_phi.csv").read_text().startswith("x,phi\n")
    assert (out / "eig_phi.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert "wall_clock_seconds" in json.loads((out / "eig.meta.json").read_text())


def test_reruns_are_bit_identical(tmp_path):
    cfg = write(tmp_path, SWEEP)
    blobs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        blobs.append(((out / "sw.json").read_bytes(), (out / "sw_sweep.csv").read_bytes()))
    assert blobs[0] == blobs[1]
    row = blobs[0][1].decode().splitlines()[1].split(",")
    assert row[0] == "1.0000000000000000e+00" and row[1] == "Converged"


def test_override_changes_result(tmp_path):
    out = tmp_path / "o"
    cfg = write(tmp_path, EIG.format(plots="false"))
    assert main(["eig", "--config", cfg, "--out", str(out), "--override", "mesh.n=101"]) == 0
    data = json.loads((out / "eig.json").read_text())
    assert data["config"]["mesh"]["n"] == 101


@pytest.mark.parametrize("text", [
    "[problem\nfamily = pla\n",
    EIG.format(plots="false").replace("n = 401", "n = 401\nspacing = 3"),
    EIG.format(plots="false").replace("family = pla", "family = nosuch"),
    EIG.format(plots="false").replace("n = 401", "n = 3"),
])
def test_bad_config_exits_2_without_artifacts(tmp_path, text, capsys):
    out = tmp_path / "out"
    assert main(["eig", "--config", write(tmp_path, text), "--out", str(out)]) == 2
    assert not out.exists()
    assert "config error" in capsys.readouterr().err


def test_action_mismatch(tmp_path):
    assert main(["sweep", "--config", write(tmp_path, EIG.format(plots="false"))]) == 2


def test_missing_config_argument():
    assert main(["eig"]) == 2


def test_invalid_thread_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("SELAB_THREADS", "many")
    out = tmp_path / "out"
    assert main(["eig", "--config", write(tmp_path, EIG.format(plots="false")), "--out", str(out)]) == 2
    assert not out.exists()


def test_verify_empty_directory(tmp_path):
    empty = tmp_path / "cfgs"
    empty.mkdir()
    assert main(["verify", "--configs", str(empty), "--out", str(tmp_path / "v")]) == 2


def test_config_list_grammar():
    cfg = cfgmod.read_text(SWEEP.replace("lin 1 8 4", "1, 2.5,4"))
    assert list(cfg.params["grid"]) == [1.0, 2.5, 4.0]
    cfg = cfgmod.read_text(SWEEP.replace("lin 1 8 4", "geom 1 100 3"))
    assert cfg.params["grid"] == pytest.approx([1.0, 10.0, 100.0])
    with pytest.raises(ConfigError):
        cfgmod.read_text(SWEEP.replace("[output]", "[extra]\nx = 1\n[output]"))
