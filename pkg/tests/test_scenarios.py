"""Scenario runner mechanics: strict config validation, deterministic
artifacts, exit-code mapping, sweeps. Physics is covered per-module; the
runs here use deliberately tiny spaces."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oqslab.errors import ConfigError, NumericalError
from oqslab.scenarios import (EXIT_ASSERTION, EXIT_CONFIG, EXIT_NUMERICAL,
                              EXIT_OK, SCENARIO_KINDS, TrajectoryRecord,
                              _resolve, _SCHEMAS, compare_representations,
                              exit_code_for, load_config, run_scenario)


def _write(tmp_path, text, name="conf.toml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


TINY_TOY_L = """
scenario = "toy-L"
name = "tiny"
[space]
dim = 32
extent = 12.0
[run]
t_final = 0.5
[output]
sample_every = 10
[tolerances]
mean_abs = 1e-3
"""


# ------------------------------------------------------------- validation

def test_all_kinds_resolve_with_defaults_only():
    for kind in SCENARIO_KINDS:
        cfg = _resolve({"scenario": kind})
        assert cfg.kind == kind
        assert cfg.name == kind
        assert cfg.seed == 0
        assert set(cfg.sections) == set(_SCHEMAS[kind])


def test_missing_scenario_key_rejected():
    with pytest.raises(ConfigError, match="scenario"):
        _resolve({"name": "x"})


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError, match="unknown scenario"):
        _resolve({"scenario": "toy-X"})


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match=r"\[probe\]"):
        _resolve({"scenario": "toy-L", "probe": {"dx": 1.0}})


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="params.coupling"):
        _resolve({"scenario": "toy-L", "params": {"coupling": 0.1}})


def test_wrong_type_rejected():
    with pytest.raises(ConfigError, match="params.g"):
        _resolve({"scenario": "toy-L", "params": {"g": "strong"}})


def test_bool_not_accepted_as_number():
    with pytest.raises(ConfigError, match="space.dim"):
        _resolve({"scenario": "toy-L", "space": {"dim": True}})


def test_out_of_range_rejected():
    with pytest.raises(ConfigError, match="out of range"):
        _resolve({"scenario": "toy-L", "params": {"m1": -1.0}})


def test_bad_formats_rejected():
    with pytest.raises(ConfigError, match="formats"):
        _resolve({"scenario": "toy-L", "output": {"formats": ["yaml"]}})


def test_negative_seed_rejected():
    with pytest.raises(ConfigError, match="seed"):
        _resolve({"scenario": "toy-L", "seed": -1})


def test_duplicate_pictures_rejected():
    with pytest.raises(ConfigError, match="pictures"):
        _resolve({"scenario": "toy-oracle-exact",
                  "run": {"pictures": ["L", "L"]}})


def test_bad_transform_sign_rejected():
    with pytest.raises(ConfigError, match="transform_sign"):
        _resolve({"scenario": "toy-equivalence",
                  "state": {"transform_sign": 0}})


def test_sweep_path_must_name_schema_key():
    with pytest.raises(ConfigError, match="sweep.path"):
        _resolve({"scenario": "toy-L",
                  "sweep": {"path": "params.zeta", "values": [1.0]}})


def test_step_must_divide_t_final():
    cfg = _resolve({"scenario": "toy-L",
                    "space": {"dim": 32, "extent": 12.0},
                    "run": {"t_final": 0.5},
                    "integrator": {"step": 0.3},
                    "output": {"formats": []}})
    with pytest.raises(ConfigError, match="evenly divide"):
        run_scenario(cfg)


def test_sample_every_must_divide_steps():
    cfg = _resolve({"scenario": "toy-L",
                    "space": {"dim": 32, "extent": 12.0},
                    "run": {"t_final": 0.5},
                    "output": {"formats": [], "sample_every": 7}})
    with pytest.raises(ConfigError, match="sample_every"):
        run_scenario(cfg)


def test_missing_file_and_bad_toml(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.toml")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(_write(tmp_path, "scenario = [unclosed"))


@given(st.sampled_from([(kind, section, key)
                        for kind, schema in _SCHEMAS.items()
                        for section, keys in schema.items()
                        for key, spec in keys.items()
                        if spec[0].rstrip("?") in ("f", "i")]))
@settings(max_examples=60, deadline=None)
def test_numeric_keys_never_accept_booleans(entry):
    kind, section, key = entry
    with pytest.raises(ConfigError):
        _resolve({"scenario": kind, section: {key: True}})


def test_exit_code_mapping():
    from oqslab.errors import (InvalidParameterError, RegimeError,
                               ToleranceError)
    assert exit_code_for(ConfigError("x")) == EXIT_CONFIG
    assert exit_code_for(InvalidParameterError("x")) == EXIT_CONFIG
    assert exit_code_for(RegimeError("x")) == EXIT_CONFIG
    assert exit_code_for(OSError("x")) == EXIT_CONFIG
    assert exit_code_for(NumericalError("x")) == EXIT_NUMERICAL
    assert exit_code_for(ToleranceError("x")) == EXIT_NUMERICAL
    with pytest.raises(KeyError):
        exit_code_for(KeyError("unmapped errors propagate"))


# -------------------------------------------------------------- recording

def test_record_requires_t_first():
    with pytest.raises(ConfigError):
        TrajectoryRecord(("x", "t"))


def test_record_rejects_nan_and_backward_time():
    rec = TrajectoryRecord(("t", "v"))
    rec.append((0.0, 1.0))
    with pytest.raises(NumericalError, match="non-finite"):
        rec.append((1.0, math.nan))
    with pytest.raises(NumericalError, match="non-monotone"):
        rec.append((0.0, 2.0))
    with pytest.raises(NumericalError, match="entries"):
        rec.append((1.0, 2.0, 3.0))


def test_record_csv_has_17_digits_and_lf():
    rec = TrajectoryRecord(("t", "v"))
    rec.append((0.0, 1.0 / 3.0))
    text = rec.to_csv()
    assert "\r" not in text
    assert text.splitlines()[0] == "t,v"
    val = text.splitlines()[1].split(",")[1]
    assert float(val) == 1.0 / 3.0   # 17 significant digits round-trip
    assert np.allclose(rec.column("v"), [1.0 / 3.0])


# -------------------------------------------------------------- execution

def test_tiny_run_writes_csv_and_json(tmp_path):
    cfg = load_config(_write(tmp_path, TINY_TOY_L))
    out = tmp_path / "out"
    result = run_scenario(cfg, out_dir=out)
    assert result.exit_code == EXIT_OK
    body = (out / "trajectory.csv").read_bytes()
    assert body.decode().startswith("t,mean_x,mean_p,")
    assert b"\r" not in body
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] is True
    assert summary["scenario"] == "toy-L"
    assert summary["name"] == "tiny"
    assert summary["assertions"][0]["criterion"] == 1
    assert "timestamp" not in json.dumps(summary)


def test_failed_assertion_maps_to_exit_1(tmp_path):
    text = TINY_TOY_L.replace("mean_abs = 1e-3", "mean_abs = 1e-18")
    cfg = load_config(_write(tmp_path, text))
    result = run_scenario(cfg, out_dir=tmp_path / "o")
    assert result.exit_code == EXIT_ASSERTION
    assert result.summary["passed"] is False
    # artifacts are still written for the post-mortem
    assert (tmp_path / "o" / "summary.json").exists()


def test_reruns_are_byte_identical(tmp_path):
    cfg = load_config(_write(tmp_path, TINY_TOY_L))
    run_scenario(cfg, out_dir=tmp_path / "a")
    run_scenario(cfg, out_dir=tmp_path / "b")
    for name in ("trajectory.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()


def test_formats_control_artifacts(tmp_path):
    cfg = _resolve({"scenario": "toy-L",
                    "space": {"dim": 32, "extent": 12.0},
                    "run": {"t_final": 0.5},
                    "output": {"formats": ["json"], "sample_every": 10},
                    "tolerances": {"mean_abs": 1e-3}})
    out = tmp_path / "o"
    result = run_scenario(cfg, out_dir=out)
    assert [p.name for p in result.paths] == ["summary.json"]
    assert not (out / "trajectory.csv").exists()


def test_no_formats_writes_nothing(tmp_path):
    cfg = _resolve({"scenario": "toy-L",
                    "space": {"dim": 32, "extent": 12.0},
                    "run": {"t_final": 0.5},
                    "output": {"formats": [], "sample_every": 10},
                    "tolerances": {"mean_abs": 1e-3}})
    out = tmp_path / "never"
    result = run_scenario(cfg, out_dir=out)
    assert result.paths == ()
    assert not out.exists()


def test_output_dir_precedence(tmp_path, monkeypatch):
    raw = {"scenario": "toy-L", "name": "prec",
           "space": {"dim": 32, "extent": 12.0},
           "run": {"t_final": 0.5},
           "output": {"sample_every": 10,
                      "dir": str(tmp_path / "from-config")},
           "tolerances": {"mean_abs": 1e-3}}
    monkeypatch.setenv("OQS_OUT", str(tmp_path / "from-env"))
    run_scenario(_resolve(raw), out_dir=tmp_path / "cli")
    assert (tmp_path / "cli" / "summary.json").exists()
    run_scenario(_resolve(raw))
    assert (tmp_path / "from-config" / "summary.json").exists()
    del raw["output"]["dir"]
    run_scenario(_resolve(raw))
    assert (tmp_path / "from-env" / "prec" / "summary.json").exists()


def test_blowup_raises_numerical_error():
    # the damping of the far corner elements grows like g^2 t^3 and here
    # leaves the integrator's stability region mid-run; the runner must
    # abort with a diagnostic instead of emitting junk rows
    cfg = _resolve({"scenario": "toy-Lprime",
                    "params": {"g": 0.2},
                    "space": {"dim": 160, "p_extent": 5.0},
                    "run": {"t_final": 10.0},
                    "output": {"formats": []}})
    with np.errstate(all="ignore"):
        with pytest.raises(NumericalError):
            run_scenario(cfg)


# ------------------------------------------------------------------ sweeps

SWEEP_RAW = {
    "scenario": "toy-Lprime", "name": "sw",
    "space": {"dim": 48, "p_extent": 4.0},
    "run": {"t_final": 1.0},
    "output": {"sample_every": 10},
    "sweep": {"path": "params.g", "values": [0.0, 0.1]},
}


def test_sweep_creates_subdirs_and_aggregate(tmp_path):
    result = run_scenario(_resolve(SWEEP_RAW), out_dir=tmp_path / "s")
    assert result.exit_code == EXIT_OK
    runs = result.summary["runs"]
    assert [r["dir"] for r in runs] == ["000-params-g-0.0",
                                        "001-params-g-0.1"]
    for r in runs:
        sub = tmp_path / "s" / r["dir"]
        assert (sub / "trajectory.csv").exists()
        assert (sub / "summary.json").exists()
    agg = json.loads((tmp_path / "s" / "summary.json").read_text())
    assert agg["passed"] is True
    assert agg["sweep"]["path"] == "params.g"


def test_sweep_jobs_parallel_matches_serial(tmp_path):
    run_scenario(_resolve(SWEEP_RAW), out_dir=tmp_path / "serial", jobs=1)
    run_scenario(_resolve(SWEEP_RAW), out_dir=tmp_path / "par", jobs=2)
    for sub in ("000-params-g-0.0", "001-params-g-0.1"):
        for name in ("trajectory.csv", "summary.json"):
            assert (tmp_path / "serial" / sub / name).read_bytes() == \
                (tmp_path / "par" / sub / name).read_bytes()
    assert (tmp_path / "serial" / "summary.json").read_bytes() == \
        (tmp_path / "par" / "summary.json").read_bytes()


def test_sweep_rejects_out_of_schema_value(tmp_path):
    raw = dict(SWEEP_RAW,
               sweep={"path": "tolerances.p_const", "values": [1.0, -1.0]})
    with pytest.raises(ConfigError, match="out of range"):
        run_scenario(_resolve(raw), out_dir=tmp_path / "s")


def test_sweep_child_failure_propagates_worst_exit(tmp_path):
    # 7 passes the schema but cannot divide the 100 integrator steps, so
    # the second child fails at run time and the aggregate keeps going
    raw = dict(SWEEP_RAW,
               sweep={"path": "output.sample_every", "values": [10, 7]})
    result = run_scenario(_resolve(raw), out_dir=tmp_path / "s")
    assert result.exit_code == EXIT_CONFIG
    codes = [r["exit_code"] for r in result.summary["runs"]]
    assert codes == [EXIT_OK, EXIT_CONFIG]
    assert "ConfigError" in result.summary["runs"][1]["error"]


# ------------------------------------------------------------- comparison

TINY_COMPARE = {
    "scenario": "toy-oracle-exact", "name": "cmp",
    "params": {"m1": 1.0, "m2": 1.0, "g": 0.2},
    "env": {"var_x2": 0.5, "var_p2": 0.5},
    "state": {"mean_x": 0.5, "mean_p": 1.0, "width": 1.0},
    "space": {"dim": 24, "extent1": 9.0, "extent2": 9.0},
    "run": {"t_final": 1.0},
}


def test_compare_rejects_non_composite_kind(tmp_path):
    with pytest.raises(ConfigError, match="compare"):
        compare_representations(_resolve({"scenario": "toy-L"}),
                                out_dir=tmp_path)


def test_compare_writes_report_and_fits_cubic(tmp_path):
    result = compare_representations(_resolve(TINY_COMPARE),
                                     out_dir=tmp_path / "c")
    assert result.exit_code == EXIT_OK
    assert (tmp_path / "c" / "comparison.csv").exists()
    rep = json.loads((tmp_path / "c" / "comparison.json").read_text())
    names = {a["name"] for a in rep["assertions"]}
    assert {"cubic-coefficient-L", "cubic-coefficient-Lprime"} <= names
    target = rep["metrics"]["cubic_coefficient_target"]
    assert target == pytest.approx(1.0 * 0.2**2 / 6.0, rel=1e-12)


def test_compare_four_way_coincidence_at_zero_coupling(tmp_path):
    raw = dict(TINY_COMPARE, params={"m1": 1.0, "m2": 1.0, "g": 0.0})
    result = compare_representations(_resolve(raw), out_dir=tmp_path / "c")
    assert result.exit_code == EXIT_OK
    rep = result.summary
    assert rep["assertions"][0]["name"] == "four-way-coincidence"
    assert rep["assertions"][0]["passed"]
