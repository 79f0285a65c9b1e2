import csv
import json
import math

import pytest

from matmart.cli import COLUMNS, main, read_table
from matmart.config import ConfigError, ExperimentConfig, load_config, parse_config
from matmart.gls import theorem41_curve
from matmart.moment_bounds import build_bound_profile
from matmart.verify import bound_check_report, model_moment_profile


def write_cfg(path, doc):
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return str(path)


SMALL = {"paths": 2000, "model": {"d": 2, "n": 25}}


def run(tmp_path, command, doc=None, *extra):
    args = [command, "--out", str(tmp_path / "out")]
    if doc is not None:
        args += ["--config", write_cfg(tmp_path / "cfg.json", doc)]
    return main(args + list(extra))


# -- config


def test_defaults_materialized():
    cfg = parse_config({})
    d = cfg.to_dict()
    assert d["model"] == {"d": 2, "n": 100, "entry_law": "rademacher", "params": {},
                          "dependence": "independent"}
    assert d["kappa_mode"]["mode"] == "analytic" and len(d["kappa_mode"]["eps_grid"]) == 12
    assert parse_config(json.loads(json.dumps(d))).to_dict() == d


@pytest.mark.parametrize(
    "doc,key",
    [
        ({"model": {"d": 2, "foo": 1}}, "foo"),
        ({"bogus": 1}, "bogus"),
        ({"model": {"d": 0}}, "d"),
        ({"model": {"entry_law": "cauchy"}}, "entry_law"),
        ({"norm": {"family": "q7"}}, "family"),
        ({"moment_profile": {"family": "heavy"}}, "moment_profile"),
        ({"moment_profile": {"family": "heavy", "b": 5, "c": 1}}, "c"),
        ({"t_grid": [1.0, 5.0]}, "t_grid"),
        ({"seed": -1}, "seed"),
        ({"output": {"format": "xml"}}, "format"),
        ({"beta_scale": 0}, "beta_scale"),
    ],
)
def test_invalid_configs(tmp_path, doc, key):
    path = write_cfg(tmp_path / "bad.json", doc)
    with pytest.raises(ConfigError) as info:
        load_config(path)
    line = int(str(info.value).split(":")[1])
    text = (tmp_path / "bad.json").read_text().splitlines()
    assert f'"{key}"' in text[line - 1]


def test_invalid_json_line(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "paths": 10,\n  "seed": ,\n}\n')
    with pytest.raises(ConfigError, match=r"broken.json:3: invalid JSON"):
        load_config(p)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.json")


def test_config_objects():
    cfg = parse_config({"moment_profile": {"family": "power_log", "C": 1.0, "delta": 1.0},
                        "norm": {"family": "linf"}})
    assert cfg.norm_spec().p == math.inf
    assert cfg.entry_profile()(8.0) == pytest.approx(8 * math.log(8))
    assert isinstance(cfg, ExperimentConfig)


# -- commands and exit codes


def test_verify_positive_control(tmp_path):
    assert run(tmp_path, "verify", SMALL) == 0
    out = tmp_path / "out"
    with (out / "verify_report.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == COLUMNS["verify_report"]
    assert all(r[8] == "PASS" for r in rows[1:])
    assert not any("np." in cell for r in rows for cell in r)
    meta = json.loads((out / "verify_report.meta.json").read_text())
    assert meta["c_z"] == 2.0 and meta["passed"] is True and "aggregation" in meta
    echoed = json.loads((out / "config.json").read_text())
    assert echoed["paths"] == 2000 and echoed["model"]["entry_law"] == "rademacher"


def test_verify_negative_control(tmp_path, capsys):
    assert run(tmp_path, "verify", dict(SMALL, beta_scale=0.001)) == 1
    assert "FAIL moment" in capsys.readouterr().err


def test_bounds_condition_violated(tmp_path, capsys):
    doc = {"model": {"d": 2, "n": 10},
           "moment_profile": {"family": "heavy", "b": 3}}
    assert run(tmp_path, "bounds", doc) == 2
    err = capsys.readouterr().err
    assert "finiteness condition violated" in err
    assert "no p > max(kappa, 4) = 4 with finite rho" in err
    line = int(err.split(":")[2])
    assert '"moment_profile"' in (tmp_path / "cfg.json").read_text().splitlines()[line - 1]


def test_unknown_key_exit(tmp_path, capsys):
    assert run(tmp_path, "verify", {"model": {"foo": 1}}) == 2
    assert "unknown key 'foo'" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert main(["nonsense"]) == 2
    assert main(["verify", "--threads", "0"]) == 2


def test_bounds_outputs(tmp_path):
    assert run(tmp_path, "bounds", {"model": {"d": 3, "n": 10}, "norm": {"family": "l1"}}) == 0
    rows, meta = read_table(tmp_path / "out" / "bound_profile.csv")
    assert list(rows[0]) == COLUMNS["bound_profile"]
    assert meta["kappa"]["value"] == 0.0 and meta["c_z"] == 3.0
    rows, _ = read_table(tmp_path / "out" / "tail_curve.csv")
    vals = [float(r["bound"]) for r in rows]
    assert all(0 <= v <= 1 for v in vals)
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_entropy_command(tmp_path):
    doc = {"model": {"d": 2}, "norm": {"family": "linf"}}
    assert run(tmp_path, "entropy", doc) == 0
    _, meta = read_table(tmp_path / "out" / "entropy.csv")
    assert meta["slope"] < 0.1


def test_estimated_kappa(tmp_path):
    doc = dict(SMALL, kappa_mode={"mode": "estimated"})
    assert run(tmp_path, "bounds", doc) == 0
    _, meta = read_table(tmp_path / "out" / "bound_profile.csv")
    assert meta["kappa"]["mode"] == "estimated"
    assert 1.7 < meta["kappa"]["value"] < 2.3


def test_estimated_kappa_unresolved_cloud(tmp_path, capsys):
    doc = dict(SMALL, kappa_mode={"mode": "estimated", "cloud_size": 1024})
    assert run(tmp_path, "bounds", doc) == 2
    assert "increase cloud_size" in capsys.readouterr().err


def test_simulate_and_report(tmp_path):
    assert run(tmp_path, "simulate", SMALL) == 0
    assert run(tmp_path, "bounds", SMALL) == 0
    out = tmp_path / "out"
    assert main(["report", str(out), "--out", str(tmp_path / "merged")]) == 0
    rows, _ = read_table(tmp_path / "merged" / "report.csv")
    sources = {r["source"].split("/")[1] for r in rows}
    assert {"simulate_moments", "simulate_tails", "bound_profile", "tail_curve"} <= sources


def test_json_round_trip(tmp_path):
    doc = dict(SMALL, output={"format": "json"}, seed=11)
    assert run(tmp_path, "verify", doc) == 0
    rows, meta = read_table(tmp_path / "out" / "verify_report.json")
    cfg = parse_config(doc)
    model, spec = cfg.martingale_model(), cfg.norm_spec()
    bound = build_bound_profile(model_moment_profile(model, spec), 2.0, model.n)
    rep = bound_check_report(model, spec, bound, theorem41_curve(cfg.t_grid, bound),
                             cfg.paths, cfg.seed, cfg.p_values)
    assert rows == rep.rows
    assert meta["seed"] == 11


def test_threads_do_not_change_bytes(tmp_path):
    doc = dict(SMALL, paths=9000)
    cfg = write_cfg(tmp_path / "c.json", doc)
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "4"]) == 0
    for name in ("verify_report.csv", "verify_report.meta.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_override(tmp_path):
    doc = dict(SMALL, seed=1)
    assert run(tmp_path, "simulate", doc, "--seed", "5") == 0
    assert json.loads((tmp_path / "out" / "config.json").read_text())["seed"] == 5
