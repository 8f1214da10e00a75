import json

import pytest

from cli.parser import parse_mode, parse_points
from main import main
from utils.error_handler import InputError


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def _run(*argv) -> int:
    return main([str(a) for a in argv])


def _load(path):
    return json.loads(path.read_text(encoding="utf-8"))


@pytest.fixture
def grid_file(workdir):
    assert _run("generate", "grid", "--k", 16, "-o", "grid16.json") == 0
    return workdir / "grid16.json"


def test_generate_writes_space_document(grid_file):
    document = _load(grid_file)
    assert document["n"] == 289
    assert document["mesh_h"] == pytest.approx(2**0.5 / 16)


def test_generate_to_stdout(workdir, capsys):
    assert _run("generate", "carpet", "--level", 1) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["n"] == 16


def test_invariants_command(grid_file, workdir):
    assert _run("invariants", grid_file, "--samples", 4, "-o", "inv.json") == 0
    report = _load(workdir / "inv.json")
    assert report["alc_ok"] is True
    assert report["samples"] == 4
    assert report["space_ref"]


def test_straighten_command_verifies(grid_file, workdir):
    code = _run("straighten", grid_file, "--path", "0,16", "--eps", 0.9, "-o", "st.json")
    assert code == 0
    artifact = _load(workdir / "st.json")
    assert artifact["kind"] == "straighten"
    assert artifact["verification"]["ok"]
    assert artifact["marked"] == [0, 16]
    assert artifact["trace"][-1]["stage"] == "straighten.result"


def test_split_command(workdir):
    assert _run("generate", "grid", "--k", 24, "-o", "grid24.json") == 0
    code = _run("split", "grid24.json", "--path", "0,624", "--eps", 0.3, "-o", "split.json")
    assert code == 0
    artifact = _load(workdir / "split.json")
    assert len(artifact["arcs"]) == 2
    assert artifact["verification"]["ok"]
    assert "total_calls" in artifact["flow_stats"]


def test_verify_detects_tampering(grid_file, workdir):
    _run("straighten", grid_file, "--path", "0,16", "--eps", 0.9, "-o", "st.json")
    assert _run("verify", grid_file, "st.json") == 0

    artifact = _load(workdir / "st.json")
    artifact["space_ref"] = "0" * 16
    (workdir / "bad.json").write_text(json.dumps(artifact), encoding="utf-8")
    assert _run("verify", grid_file, "bad.json") == 2


def test_verify_space_only(grid_file, capsys):
    assert _run("verify", grid_file) == 0
    assert json.loads(capsys.readouterr().out)["ok"] is True


@pytest.mark.parametrize(
    "argv",
    [
        ["generate", "sphere"],
        ["straighten", "grid16.json", "--eps", "0.5"],
        ["circle", "grid16.json", "--points", "a,b"],
        [],
    ],
)
def test_bad_arguments_exit_with_input_code(grid_file, argv):
    assert main(argv) == 4


def test_missing_space_file(workdir):
    assert _run("invariants", "nowhere.json") == 4


def test_point_outside_space(grid_file):
    assert _run("bogensatz", grid_file, "--x", 0, "--y", 500) == 4


def test_render_is_byte_stable(grid_file, workdir):
    _run("straighten", grid_file, "--path", "0,288", "--eps", 0.9, "-o", "st.json")
    assert _run("render", grid_file, "st.json", "-o", "a.svg") == 0
    assert _run("render", grid_file, "st.json", "-o", "b.svg") == 0
    first = (workdir / "a.svg").read_bytes()
    assert first == (workdir / "b.svg").read_bytes()
    assert b"<polyline" in first


def test_artifacts_are_deterministic(grid_file, workdir):
    for name in ("one.json", "two.json"):
        _run("--seed", 7, "straighten", grid_file, "--path", "0,288", "--eps", 0.9, "-o", name)
    assert (workdir / "one.json").read_bytes() == (workdir / "two.json").read_bytes()


def test_parse_helpers():
    assert parse_points("0, 64,4224") == [0, 64, 4224]
    assert parse_mode("whole-arc") == "whole-arc"
    assert parse_mode("3,9") == (3, 9)
    with pytest.raises(InputError):
        parse_mode("1,2,3")
    with pytest.raises(InputError):
        parse_points("")
