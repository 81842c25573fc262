import json
from pathlib import Path

import numpy as np
import pytest

jsonschema = pytest.importorskip("jsonschema")

from fermat_morse import cli, io  # noqa: E402
from fermat_morse.errors import NumericalFailure  # noqa: E402

SCEN = Path(__file__).resolve().parents[1] / "scenarios"


def run(tmp_path, name, *extra):
    out = tmp_path / name
    code = cli.main(["--out", str(out), *extra])
    return code, out


def validate_all(out: Path):
    """Every JSON(L) report validates against the schema it names."""
    checked = 0
    for path in sorted(out.glob("*.json*")):
        docs = io.read_jsonl(path) if path.suffix == ".jsonl" else [json.loads(path.read_text())]
        for doc in docs:
            name, version = doc["schema"].split("@")
            assert int(version) == io.SCHEMA_VERSION
            jsonschema.validate(doc, io.load_schema(name))
            checked += 1
    return checked


def test_schemas_are_valid_documents():
    for name in io.SCHEMAS:
        schema = io.load_schema(name)
        jsonschema.Draft202012Validator.check_schema(schema)
        assert schema["properties"]["schema"]["const"] == io.schema_tag(name)


def test_to_jsonable_handles_numpy():
    doc = io.to_jsonable({"a": np.float64(1.5), "b": np.arange(3), "c": (np.int64(2),)})
    assert doc == {"a": 1.5, "b": [0, 1, 2], "c": [2]}


@pytest.mark.parametrize("command,files", [
    ("index", ["geodesics.jsonl", "index.jsonl"]),
    ("bridge", ["bridge.jsonl"]),
    ("hessian", ["hessian.jsonl"]),
    ("morse", ["morse.json"]),
])
def test_sphere_commands_write_valid_reports(tmp_path, command, files):
    code, out = run(tmp_path, command, "--scenario", str(SCEN / "sphere-rotating.yaml"),
                    "--command", command, "--p0", "0.3,0.1", "--q0=-0.2,0.5", "--l-max", "8",
                    "--m", "80", "--plot-data")
    assert code == 0
    for f in files:
        assert (out / f).exists()
    assert validate_all(out) >= 1
    if command == "hessian":
        assert list((out / "plot").glob("spectrum_*.dat"))


def test_shoot_trajectory_csv(tmp_path):
    code, out = run(tmp_path, "shoot", "--scenario", str(SCEN / "sphere.yaml"), "--command",
                    "shoot", "--p0", "0.3,0.1", "--v0", "3.0,1.0", "--plot-data")
    assert code == 0
    header = (out / "trajectories" / "geodesic_0.csv").read_text().splitlines()[0]
    assert header.split(",") == ["s", "chart_id", "x1", "x2", "v1", "v2", "alpha_speed", "F_speed"]
    data = np.loadtxt(out / "plot" / "geodesic_0.dat")
    assert data.shape[1] == 2
    validate_all(out)


def test_lens_and_timelike(tmp_path):
    code, out = run(tmp_path, "lens", "--scenario", str(SCEN / "lens.yaml"), "--command", "lens",
                    "--p0=-3,0.1", "--q0", "3,0", "--l-max", "12")
    assert code == 0
    rec = json.loads((out / "lens.json").read_text())
    assert rec["count"] == 3 and rec["parity"] == "odd"
    code, out2 = run(tmp_path, "tl", "--scenario", str(SCEN / "flat-drift.yaml"), "--command",
                     "timelike", "--p0", "0,0", "--q0", "0.5,0.2", "--s-bar", "1.0")
    assert code == 0
    assert validate_all(out) + validate_all(out2) >= 2


def test_output_is_deterministic(tmp_path):
    args = ["--scenario", str(SCEN / "sphere-tilted.yaml"), "--command", "index", "--p0",
            "0.3,0.1", "--q0=-0.2,0.5", "--l-max", "6"]
    _, a = run(tmp_path, "a", *args)
    _, b = run(tmp_path, "b", *args)
    for f in ("geodesics.jsonl", "index.jsonl"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


@pytest.mark.parametrize("extra", [
    ["--command", "connect", "--p0", "0.3,0.1"],                               # missing q0
    ["--command", "connect", "--p0", "0.3", "--q0", "1,1"],                   # wrong dimension
    ["--command", "connect", "--p0", "0,0", "--q0", "1,1", "--tol", "1e-2"],  # tolerance range
    ["--command", "timelike", "--p0", "0,0", "--q0", "1,1", "--s-bar", "-1"],
    ["--command", "connect", "--p0", "7:0,0", "--q0", "1,1"],                 # unknown chart
])
def test_configuration_errors_exit_2(tmp_path, extra):
    code, out = run(tmp_path, "bad", "--scenario", str(SCEN / "sphere.yaml"), *extra)
    assert code == 2
    assert not (out / "failure.json").exists()


def test_missing_scenario_exit_2(tmp_path):
    code, _ = run(tmp_path, "x", "--scenario", str(tmp_path / "nope.yaml"), "--command", "connect",
                  "--p0", "0,0", "--q0", "1,1")
    assert code == 2


def test_degenerate_endpoints_exit_4(tmp_path):
    code, out = run(tmp_path, "deg", "--scenario", str(SCEN / "sphere.yaml"), "--command", "index",
                    "--p0", "1,0", "--q0=-1,0", "--l-max", "5")
    assert code == 4
    doc = json.loads((out / "failure.json").read_text())
    jsonschema.validate(doc, io.load_schema("failure"))
    assert doc["exit_code"] == 4 and doc["report"]["endpoint_conjugate"]


def test_numerical_failure_exit_3(tmp_path, monkeypatch):
    def boom(*_a, **_k):
        raise NumericalFailure("step size underflow")

    monkeypatch.setattr(cli, "integrate_geodesic", boom)
    code, out = run(tmp_path, "num", "--scenario", str(SCEN / "flat.yaml"), "--command", "shoot",
                    "--p0", "0,0", "--v0", "1,0")
    assert code == 3
    assert json.loads((out / "failure.json").read_text())["error"] == "NumericalFailure"
