import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from transonic.cli import main
from transonic.config import RunConfig, from_dict, load_config, with_overrides
from transonic.errors import ParseError, ValidationError
from transonic.output import SCHEMA, dumps, fmt

MINIMAL = """
mode = "background"

[gas]
gamma = 1.4

[nozzle]
r0 = 1.0
r1 = 2.0
n = 2
theta = 0.5235987755982988

[inflow]
rho = 1.0
u = 2.0
p = 1.0

[background]
r_s = 1.5
"""


@pytest.fixture
def minimal_toml(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(MINIMAL)
    return path


def test_minimal_config_loads(minimal_toml):
    cfg = load_config(minimal_toml)
    assert cfg.mode == "background"
    assert cfg.background.r_s == 1.5
    assert cfg.gas_model.k0 == pytest.approx(11 / 6)


def test_json_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"mode": "sweep", "sweep": {"count": 5}}))
    cfg = load_config(path)
    assert cfg.mode == "sweep" and cfg.sweep.count == 5


@pytest.mark.parametrize("raw,path", [
    ({"inflow": {"u": 0.5}}, "inflow"),
    ({"numerics": {"tol_outer": -1e-6}}, "numerics.tol_outer"),
    ({"numerics": {"nr": 4}}, "numerics.nr"),
    ({"gas": {"gamma": 1.0}}, "gas.gamma"),
    ({"nozzle": {"colour": 1}}, "nozzle.colour"),
    ({"extra": {}}, "extra"),
    ({"mode": "fly"}, "mode"),
    ({"numerics": {"nr": 41.5}}, "numerics.nr"),
    ({"exit": {"kind": "samples", "samples": [1.0, 2.0]}}, "exit.samples"),
    ({"background": {"r_s": 2.5}}, "background.r_s"),
])
def test_validation_errors_name_the_field(raw, path):
    with pytest.raises(ValidationError) as info:
        from_dict(raw)
    assert info.value.path == path


@given(tol=st.floats(max_value=0.0, allow_nan=False, allow_infinity=False))
def test_nonpositive_tolerances_rejected(tol):
    with pytest.raises(ValidationError):
        from_dict({"numerics": {"tol_newton": tol}})


def test_parse_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("mode = = 1")
    with pytest.raises(ParseError):
        load_config(bad)
    other = tmp_path / "run.yaml"
    other.write_text("mode: background")
    with pytest.raises(ParseError):
        load_config(other)
    with pytest.raises(ParseError):
        load_config(tmp_path / "missing.toml")


def test_overrides():
    cfg = with_overrides(RunConfig(), "solve", (21, 11), 8, 3)
    assert (cfg.mode, cfg.numerics.nr, cfg.numerics.ntheta, cfg.numerics.modes, cfg.seed) == \
        ("solve", 21, 11, 8, 3)
    with pytest.raises(ValidationError):
        with_overrides(RunConfig(), grid=(4, 4))


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trip(x):
    assert float(fmt(x)) == x


def test_json_writer_round_trip():
    obj = {"a": [1, 2.5, None, True], "b": {"c": "x\"y", "d": np.float64(1 / 3)}, "e": math.inf}
    back = json.loads(dumps(obj))
    assert back["b"]["d"] == 1 / 3 and back["e"] == "inf" and back["a"][2] is None


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_background(tmp_path, capsys, minimal_toml):
    code, out, _ = _run(capsys, "background", "--config", str(minimal_toml), "--out", str(tmp_path / "o"))
    assert code == 0
    assert {p.name for p in (tmp_path / "o").iterdir()} == {"branches.csv", "report.json"}
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["schema"] == SCHEMA and report["status"] == "pass"
    names = [inv["name"] for inv in report["invariants"]]
    assert len(names) == len(set(names))
    assert "PASS" in out


@pytest.mark.parametrize("mode", ["sweep", "demo-isentropic", "check"])
def test_cli_modes_pass(tmp_path, capsys, mode):
    code, out, _ = _run(capsys, mode, "--out", str(tmp_path), "--quiet")
    assert code == 0 and out == ""


def test_cli_locate(tmp_path, capsys):
    cfg = tmp_path / "loc.json"
    cfg.write_text(json.dumps({"exit": {"p_c": 2.786740034246401}}))
    code, _, _ = _run(capsys, "locate-shock", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet")
    assert code == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["results"]["r_s"] == pytest.approx(1.5, abs=1e-8)


def test_cli_solve_deterministic(tmp_path, capsys):
    cfg = tmp_path / "solve.json"
    cfg.write_text(json.dumps({
        "perturbation": {"upstream": "cosine", "upstream_amplitude": 0.002},
        "exit": {"kind": "cosine", "amplitude": 0.001},
    }))
    outs = []
    for k in range(2):
        d = tmp_path / f"o{k}"
        code, _, _ = _run(capsys, "solve", "--config", str(cfg), "--out", str(d), "--grid", "21x11", "--quiet")
        assert code == 0
        outs.append(d)
    names = sorted(p.name for p in outs[0].iterdir())
    assert {"front.csv", "exit_profiles.csv", "residuals.csv", "modes.csv"} <= set(names)
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_cli_errors_map_to_exit_codes(tmp_path, capsys):
    big = tmp_path / "big.json"
    big.write_text(json.dumps({"perturbation": {"deformation": "radial", "deformation_amplitude": 0.5}}))
    code, _, err = _run(capsys, "solve", "--config", str(big), "--out", str(tmp_path), "--grid", "21x11")
    assert code == 26 and "error [elliptic]" in err
    sub = tmp_path / "sub.json"
    sub.write_text(json.dumps({"inflow": {"u": 0.5}}))
    code, _, err = _run(capsys, "background", "--config", str(sub), "--out", str(tmp_path))
    assert code == 2 and "inflow" in err
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = _run(capsys, "background", "--out", str(blocker / "sub"))
    assert code == 3 and "error [io]" in err
    with pytest.raises(SystemExit):
        main(["solve", "--grid", "abc"])
