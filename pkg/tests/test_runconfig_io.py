import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from epdynamics.errors import InvalidConfig
from epdynamics.io import RunManifest, jsonable, read_csv, write_csv, write_json, write_rows
from epdynamics.paths import LambdaPrototype
from epdynamics.runconfig import load_run, parse_sweep, preset_names, read_run_file
from epdynamics.spectrum import Spectrum

PATH = {"kind": "circular", "r": 0.1, "gamma": 1.0, "T": 100.0, "direction": -1}


def test_parse_sweep_forms():
    assert parse_sweep("r=0:1:3") == ("r", [0.0, 0.5, 1.0])
    assert parse_sweep("T=50:60:1") == ("T", [50.0])
    assert parse_sweep(" eps = 0.1,0.2") == ("eps", [0.1, 0.2])


@pytest.mark.parametrize("bad", ["r", "r=1:2", "r=1:2:0", "r=a,b", "=1,2", 3])
def test_parse_sweep_rejects(bad):
    with pytest.raises(InvalidConfig):
        parse_sweep(bad)


def test_bare_path_is_accepted():
    spec = load_run(dict(PATH))
    assert isinstance(spec.source(), Spectrum)
    assert spec.run["grid"] == 4097


def test_prototype_and_eps_override():
    spec = load_run({"prototype": {"prototype": "circular", "r": 0.1, "gamma": 1.0, "T": 100.0}})
    src = spec.source({"eps": 0.05})
    assert isinstance(src, LambdaPrototype)
    assert src.T == pytest.approx(math.pi / (4 * math.sqrt(0.1) * 0.05))


def test_eps_override_needs_circular_prototype():
    spec = load_run({"path": PATH})
    with pytest.raises(InvalidConfig):
        spec.source({"eps": 0.05})


@pytest.mark.parametrize(
    "d, field",
    [
        ({"path": PATH, "extra": 1}, "extra"),
        ({"path": PATH, "run": {"grid": 1}}, "run.grid"),
        ({"path": PATH, "run": {"grid": 3.5}}, "run.grid"),
        ({"path": PATH, "run": {"tol": True}}, "run.tol"),
        ({"path": PATH, "noise": {"steps_per_T": 100}}, "noise.steps_per_T"),
        ({"path": PATH, "noise": {"seed": -2}}, "noise.seed"),
        ({"path": PATH, "delay": {"crit_window_T": [1, 0]}}, "delay.crit_window_T"),
        ({"path": PATH, "oracle": {"bogus": 0}}, "oracle.bogus"),
        ({"path": PATH, "run": {"init": {"c": [[0, 0], [0, 0]]}}}, "run.init"),
        ({"path": PATH, "run": {"init": "adiabatic"}}, "run.init"),
    ],
)
def test_invalid_fields_are_named(d, field):
    with pytest.raises(InvalidConfig) as ei:
        load_run(d)
    assert field in str(ei.value)


def test_exactly_one_source():
    with pytest.raises(InvalidConfig):
        load_run({"run": {}})
    with pytest.raises(InvalidConfig):
        load_run({"path": PATH, "prototype": {"prototype": "circular", "r": 0.1, "T": 10.0}})


@pytest.mark.parametrize("init", ["stable", {"c": [[1, 0], [0, 0.5]]}, {"R": [0.2, 0.1]}])
def test_init_forms(init):
    assert load_run({"path": PATH, "run": {"init": init}}).run["init"] == init


def test_read_run_file_sources(tmp_path):
    p = tmp_path / "x.json"
    p.write_text(json.dumps(PATH))
    assert read_run_file(p) == {"path": PATH}
    assert "path" in read_run_file("fig3a")
    p.write_text(json.dumps({"command": "simulate", "config": {"path": PATH}}))
    assert read_run_file(p) == {"path": PATH}
    p.write_text("{")
    with pytest.raises(InvalidConfig, match="line 1"):
        read_run_file(p)
    with pytest.raises(InvalidConfig, match="no such file"):
        read_run_file(tmp_path / "missing.json")


@pytest.mark.parametrize("name", preset_names())
def test_presets_validate(name):
    spec = load_run(name)
    assert spec.name == name
    assert load_run(spec.to_dict()).to_dict() == spec.to_dict()


floats = st.floats(allow_nan=True, allow_infinity=True, width=64)


@given(st.lists(floats, min_size=1, max_size=20))
def test_csv_round_trip_is_exact(tmp_path_factory, xs):
    p = tmp_path_factory.mktemp("csv") / "a.csv"
    a = np.array(xs)
    write_csv(p, {"x": a, "i": np.arange(len(a))})
    back = read_csv(p)
    assert np.array_equal(back["x"], a, equal_nan=True)
    assert np.array_equal(back["i"], np.arange(len(a)))


def test_csv_rejects_ragged(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "a.csv", {"a": [1, 2], "b": [1]})


def test_rows_with_missing_cells(tmp_path):
    p = write_rows(tmp_path / "r.csv", ["a", "b"], [{"a": 1.5}, {"a": 2.0, "b": "x"}])
    d = read_csv(p)
    assert list(d["a"]) == [1.5, 2.0]
    assert d["b"] == ["", "x"]


def test_jsonable():
    out = jsonable({"a": np.array([1.0, np.nan]), "b": 1 + 2j, "c": np.int64(3), 4: (np.inf,)})
    assert out == {"a": [1.0, None], "b": [1.0, 2.0], "c": 3, "4": [None]}


def test_manifest_round_trip(tmp_path):
    f = write_json(tmp_path / "x.json", {"v": 1})
    m = RunManifest(command="simulate", config={"path": PATH}, version="0", argv=["simulate"], seeds=[3])
    m.add_output(f)
    m.write(tmp_path)
    back = RunManifest.read(tmp_path / "manifest.json")
    assert back == m
