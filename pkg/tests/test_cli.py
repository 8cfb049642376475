import json

import pytest

from inls_lab import cli
from inls_lab.config import ParseError, ValidationError, config_from_dict, default_config, parse_config


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return p


SMALL = {"model": {"N": 3, "b": 1, "p": 2}, "grid": {"n": 1024, "r_max": 40},
         "evolve": {"dt": 0.01, "t_final": 0.5, "snapshot_stride": 5}}


def test_minimal_config_echoes_sc(tmp_path):
    cfg = parse_config(write(tmp_path, {"model": {"N": 3, "b": 1, "p": 2}, "evolve": {"dt": 1e-3}}))
    assert cfg.echo()["model"]["s_c"] == pytest.approx(0.5)
    assert cfg.grid.n == 8192 and cfg.criteria.R_crit == 10.0


def test_endpoint_rejected(tmp_path):
    with pytest.raises(ValidationError, match="p outside intercritical range"):
        parse_config(write(tmp_path, {"model": {"N": 3, "b": 1, "p": 3}, "evolve": {"dt": 1e-3}}))


def test_missing_dt(tmp_path):
    with pytest.raises(ValidationError, match="evolve.dt required"):
        parse_config(write(tmp_path, {"model": {"N": 3, "b": 1, "p": 2}, "evolve": {"t_final": 1}}))


@pytest.mark.parametrize("raw,msg", [
    ({"model": {"N": 3, "b": 1, "p": 2}, "evolve": {"dt": 1e-3}, "extra": {}}, "unknown key extra"),
    ({"model": {"N": 3, "b": 1, "p": 2, "q": 1}, "evolve": {"dt": 1e-3}}, "unknown key model.q"),
    ({"model": {"N": 3, "b": 1, "p": 2}, "evolve": {"dt": -1}}, "evolve.dt must be positive"),
    ({"model": {"N": 3, "b": 1, "p": 2}, "evolve": {"dt": "x"}}, "must be a number"),
    ({"model": {"N": 3, "b": 1, "p": 2}, "evolve": {"dt": 1e-3}, "init": {"family": "soliton"}}, "init.family"),
    ({"model": {"N": 3, "b": 1, "p": 2}, "evolve": {"dt": 1e-3}, "grid": {"sponge_on": 1}}, "true or false"),
    ({"model": {"N": 3, "b": 1}, "evolve": {"dt": 1e-3}}, "model.p required"),
])
def test_validation_errors(raw, msg):
    with pytest.raises(ValidationError, match=msg):
        config_from_dict(raw)


def test_parse_error_has_line(tmp_path):
    with pytest.raises(ParseError) as exc:
        parse_config(write(tmp_path, '{"model": {"N": 3},\n  "evolve": {"dt": 1e-3,}\n}'))
    assert exc.value.line == 2


def test_unknown_subcommand():
    assert cli.main(["frobnicate"]) == 2
    assert cli.dispatch("frobnicate", default_config()) == 2


def test_config_error_exit_code(tmp_path):
    p = write(tmp_path, {"model": {"N": 3, "b": 1, "p": 3}, "evolve": {"dt": 1e-3}})
    assert cli.main(["evolve", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_evolve_outputs_and_determinism(tmp_path):
    p = write(tmp_path, SMALL)
    bodies = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert cli.main(["evolve", "--config", str(p), "--out", str(out)]) == 0
        text = (out / "run_trajectory.csv").read_text()
        bodies.append(text)
        summary = json.loads((out / "run_summary.json").read_text())
        assert summary["termination"] == "horizon"
        assert summary["config"]["model"]["s_c"] == 0.5
        assert (out / "run_final_field.csv").read_text().startswith("r,re_u,im_u\n")
    assert bodies[0] == bodies[1]
    header, first = bodies[0].splitlines()[:2]
    assert header == "t,mass,energy,grad_norm,local_mass,Z,dZdt_rhs,sup_norm"
    # 17 significant digits
    assert all(len(x.split("e")[0].lstrip("-").replace(".", "")) == 17 for x in first.split(","))


def test_ground_outputs(tmp_path):
    p = write(tmp_path, SMALL)
    assert cli.main(["ground", "--config", str(p), "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "run_ground.json").read_text())
    for k in ("N", "b", "p", "s_c", "mass", "energy", "grad_norm", "me_threshold",
              "grad_threshold", "residual"):
        assert k in rec
    assert (tmp_path / "run_ground.csv").read_text().startswith("r,Q\n")


def test_computation_error_removes_outputs(tmp_path, monkeypatch):
    p = write(tmp_path, SMALL)

    def boom(*a, **k):
        raise RuntimeError("fail")

    def partial(cfg, out, threads):
        out.csv("trajectory.csv", ("t",), [(0.0,)])
        boom()

    monkeypatch.setitem(cli._DISPATCH, "evolve", partial)
    assert cli.main(["evolve", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o" / "run_trajectory.csv").exists()


def test_check_exponents(tmp_path, capsys):
    assert cli.main(["check", "exponents", "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "distant_bar_sc" in text and "alpha=" in text
    assert cli.main(["evolve", "exponents", "--out", str(tmp_path)]) == 2


def test_blowup_evolve(tmp_path):
    raw = {"model": {"N": 3, "b": 1, "p": 2}, "evolve": {"dt": 1e-3, "t_final": 1.0},
           "init": {"scale": 3.0}}
    p = write(tmp_path, raw)
    assert cli.main(["evolve", "--config", str(p), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "run_summary.json").read_text())["termination"] == "blowup-stop"


def test_custom_csv_init(tmp_path):
    import numpy as np
    r = np.linspace(0, 40, 401)
    np.savetxt(tmp_path / "u0.csv", np.c_[r, np.exp(-r ** 2), 0 * r], delimiter=",",
               header="r,re,im", comments="")
    raw = dict(SMALL, init={"family": "custom-csv", "path": str(tmp_path / "u0.csv"), "scale": 1.0})
    p = write(tmp_path, raw)
    assert cli.main(["evolve", "--config", str(p), "--out", str(tmp_path)]) == 0
