import json
import subprocess
import sys

import pytest

from kgdamp.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER, EXIT_UNDECIDED, TIMESERIES_COLUMNS, main
from kgdamp.config import ConfigError, parse_config

MINIMAL_EVOLVE = """
command = "evolve"
[model]
d = 1
theta = 3
[dynamics]
alpha = 0.5
"""

SMALL_MODEL = """
[model]
d = 1
theta = 3
R = 20.0
N = 256
"""


def _write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _ndjson(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL_EVOLVE)
    assert (cfg.model.R, cfg.model.N, cfg.dynamics.dt) == (30.0, 1024, 0.01)
    assert cfg.model.nonlinearity().gamma == 1.0
    assert cfg.seed == 0


def test_dimension_out_of_range():
    with pytest.raises(ConfigError, match="1-6"):
        parse_config(MINIMAL_EVOLVE.replace("d = 1", "d = 9"))


def test_errors_are_listed_exhaustively():
    text = MINIMAL_EVOLVE.replace("alpha = 0.5", "alpha = -1\ndt = 0\nbogus = 3") + "\n[extra]\nx = 1\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    errs = "\n".join(info.value.errors)
    for needle in ("dynamics.alpha", "dynamics.dt", "dynamics.bogus: unknown key", "extra: unknown key"):
        assert needle in errs
    assert len(info.value.errors) == 4


def test_parse_error_and_command_mismatch():
    with pytest.raises(ConfigError, match="parse error"):
        parse_config("command = ")
    with pytest.raises(ConfigError, match="requested"):
        parse_config(MINIMAL_EVOLVE, command="classify")
    with pytest.raises(ConfigError, match="no command"):
        parse_config(MINIMAL_EVOLVE.replace('command = "evolve"', ""))


def test_sweep_jobs_enumeration():
    text = 'command = "sweep"\n' + SMALL_MODEL + "[dynamics]\nalpha = 0.1\n[sweep]\namplitudes = [0.5, 1.0, 1.5, 2.0]\n"
    jobs = parse_config(text).sweep_jobs()
    assert [j["amplitude"] for j in jobs] == [0.5, 1.0, 1.5, 2.0]
    assert [j["index"] for j in jobs] == [0, 1, 2, 3]


def test_gapcheck_needs_no_model():
    cfg = parse_config('command = "gapcheck"\n[gap]\nC1 = 1\nC2 = 1\nbeta1 = 2\nbeta2 = 0.5\nlipR = 0\n')
    assert cfg.gap.lipR == 0.0
    with pytest.raises(ConfigError, match="gap.lipR is required"):
        parse_config('command = "gapcheck"\n[gap]\nC1 = 1\nC2 = 1\nbeta1 = 2\nbeta2 = 0.5\n')


def test_config_hash_tracks_content():
    a = parse_config(MINIMAL_EVOLVE)
    b = parse_config(MINIMAL_EVOLVE.replace("alpha = 0.5", "alpha = 0.25"))
    assert a.config_hash == parse_config(MINIMAL_EVOLVE).config_hash
    assert a.config_hash != b.config_hash and len(a.config_hash) == 16


CLASSIFY_FTB = 'command = "classify"\n' + SMALL_MODEL + """
[initial]
kind = "profile"
amplitude = 2.0
[dynamics]
alpha = 0.1
T = 5.0
[output]
record_every = 1
"""


def test_classify_blowup_fixture(tmp_path):
    cfg = _write(tmp_path, CLASSIFY_FTB)
    assert main(["classify", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    (rec,) = _ndjson(tmp_path / "o" / "verdicts.ndjson")
    assert rec["kind"] == "FTB" and rec["record"] == "verdict"
    assert rec["schema_version"] and rec["config_hash"]
    lines = (tmp_path / "o" / "timeseries.csv").read_text().splitlines()
    assert lines[0].split(",") == list(TIMESERIES_COLUMNS) + ["config_hash"]
    assert all(line.endswith(rec["config_hash"]) for line in lines[1:])
    first = lines[1].split(",")
    assert float(first[1]) == pytest.approx(-32 / 3, abs=1e-3)


def test_outputs_are_byte_identical(tmp_path):
    text = 'command = "sweep"\nseed = 7\n' + SMALL_MODEL + """
[dynamics]
alpha = 0.5
T = 2.0
[sweep]
amplitudes = [0.5, 2.0]
noise = 0.01
"""
    cfg = _write(tmp_path, text)
    outs = []
    for k, threads in enumerate(("1", "2")):
        out = tmp_path / f"o{k}"
        assert main(["sweep", "--config", cfg, "--out", str(out), "--threads", threads]) == EXIT_OK
        outs.append((out / "verdicts.ndjson").read_bytes())
    assert outs[0] == outs[1]
    recs = [json.loads(x) for x in outs[0].decode().splitlines()]
    assert [r["index"] for r in recs] == [0, 1]
    assert recs[1]["kind"] == "FTB"


def test_evolve_csv_determinism(tmp_path):
    text = 'command = "evolve"\n' + SMALL_MODEL + '[dynamics]\nalpha = 0.5\nT = 1.0\n[initial]\nkind = "gaussian"\n'
    cfg = _write(tmp_path, text)
    blobs = []
    for k in range(2):
        out = tmp_path / f"e{k}"
        assert main(["evolve", "--config", cfg, "--out", str(out)]) == EXIT_OK
        blobs.append(((out / "timeseries.csv").read_bytes(), (out / "summary.ndjson").read_bytes()))
    assert blobs[0] == blobs[1]


def test_spectrum_report(tmp_path):
    cfg = _write(tmp_path, 'command = "spectrum"\n' + SMALL_MODEL + "[dynamics]\nalpha = 1.0\n")
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    (rec,) = _ndjson(tmp_path / "spectrum.ndjson")
    assert len(rec["mu"]) == 1 and rec["mu"][0] == pytest.approx(-3.0, abs=1e-2)
    zs = sorted(z[0] for z in rec["z"])
    assert zs == pytest.approx([-3.0, 1.0], abs=1e-2)
    assert "mu" in (tmp_path / "spectrum.txt").read_text()


def test_gapcheck_trivial_case(tmp_path):
    cfg = _write(tmp_path, 'command = "gapcheck"\n[gap]\nC1 = 1\nC2 = 1\nbeta1 = 2\nbeta2 = 0.5\nlipR = 0\n')
    assert main(["gapcheck", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    (rec,) = _ndjson(tmp_path / "gapcheck.ndjson")
    assert (rec["gamma1"], rec["gamma2"]) == (2.0, 0.5)


def test_stationary_outputs(tmp_path):
    cfg = _write(tmp_path, 'command = "stationary"\n' + SMALL_MODEL)
    assert main(["stationary", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    (rec,) = _ndjson(tmp_path / "summary.ndjson")
    assert rec["s0"] == pytest.approx(2**0.5, abs=1e-10)
    assert (tmp_path / "profile.csv").read_text().splitlines()[0] == "r,Q,config_hash"


def test_exit_codes(tmp_path):
    bad = _write(tmp_path, MINIMAL_EVOLVE.replace("d = 1", "d = 9"), "bad.toml")
    assert main(["evolve", "--config", bad]) == EXIT_CONFIG
    assert main(["evolve", "--config", str(tmp_path / "missing.toml")]) == EXIT_IO
    # no excited state exists in one dimension: a solver fault
    nodal = _write(tmp_path, 'command = "stationary"\n' + SMALL_MODEL.replace("N = 256", "N = 256\nnodes = 1"), "nodal.toml")
    assert main(["stationary", "--config", nodal, "--out", str(tmp_path)]) == EXIT_SOLVER
    undecided = _write(tmp_path, CLASSIFY_FTB.replace("amplitude = 2.0", "amplitude = 0.5").replace("T = 5.0", "T = 1.0"), "u.toml")
    assert main(["classify", "--config", undecided, "--out", str(tmp_path / "u")]) == EXIT_OK
    assert main(["classify", "--config", undecided, "--out", str(tmp_path / "u"), "--strict"]) == EXIT_UNDECIDED
    blocker = tmp_path / "file"
    blocker.write_text("")
    ok = _write(tmp_path, 'command = "gapcheck"\n[gap]\nC1 = 1\nC2 = 1\nbeta1 = 2\nbeta2 = 0.5\nlipR = 0\n', "g.toml")
    assert main(["gapcheck", "--config", ok, "--out", str(blocker / "sub")]) == EXIT_IO


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, 'command = "gapcheck"\n[gap]\nC1 = 1\nC2 = 1\nbeta1 = 2\nbeta2 = 0.5\nlipR = 0.1\n')
    proc = subprocess.run(
        [sys.executable, "-m", "kgdamp", "gapcheck", "--config", cfg, "--out", str(tmp_path)],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert "gamma1 = 1.8922616289332566" in proc.stdout
