import os
from types import SimpleNamespace

import pytest

from utils.config import AppConfig, get_config, override_config, reset_config
from utils.construction_trace import ConstructionTrace
from utils.error_handler import (
    ConstructionError,
    ErrorType,
    FlowCutError,
    InputError,
    MetricAxiomError,
    VerificationError,
    safe_operation,
)
from utils.file_handler import (
    document_digest,
    dumps_document,
    read_json_document,
    save_json_document,
)
from utils.flow_stats import get_total_flow_stats, reset_flow_stats, update_flow_stats


def test_config_defaults():
    config = get_config()
    assert config.seed == 0
    assert config.mesh_floor_mult == 4.0
    assert config.flow_engine == "networkx"
    assert os.path.isdir(config.data_dir)
    assert get_config() is config


def test_config_reads_environment(monkeypatch):
    monkeypatch.setenv("QCF_SEED", "11")
    monkeypatch.setenv("QCF_FLOW_ENGINE", "dinic")
    monkeypatch.setenv("QCF_CIRCLE_GAP", "0.25")
    reset_config()
    config = get_config()
    assert (config.seed, config.flow_engine, config.circle_gap_ratio) == (11, "dinic", 0.25)


def test_broken_environment_falls_back_to_defaults(monkeypatch):
    monkeypatch.setenv("QCF_THREADS", "0")
    reset_config()
    assert get_config().threads == 1


def test_override_skips_missing_values():
    override_config(seed=5, mesh_floor_mult=None)
    assert get_config().seed == 5
    assert get_config().mesh_floor_mult == 4.0


@pytest.mark.parametrize(
    "fields",
    [{"mesh_floor_mult": 0.5}, {"restarts": 0}, {"circle_gap_ratio": 1.0}, {"grid_ratio": 1.0}],
)
def test_invalid_config_is_rejected(fields):
    with pytest.raises(InputError):
        AppConfig(**fields)


def test_exit_codes():
    assert InputError("x").exit_code == 4
    assert MetricAxiomError("x", (0, 1, 2)).exit_code == 4
    assert ConstructionError("x").exit_code == 3
    assert FlowCutError("x", cut=[5, 2], flow_value=2).cut == [2, 5]
    assert VerificationError("x", ["follows"]).exit_code == 2


def test_safe_operation_keeps_application_errors():
    def broken():
        raise FlowCutError("нет потока", cut=[1], flow_value=0)

    with pytest.raises(FlowCutError):
        safe_operation(broken, ErrorType.INPUT_ERROR, show_cli_error=False, reraise=True)
    assert (
        safe_operation(broken, ErrorType.INPUT_ERROR, show_cli_error=False, default_return=-1)
        == -1
    )


def test_trace_records_in_order():
    trace = ConstructionTrace()
    trace.record("a", scale=1, thresholds={"r": 2})
    trace.record("b", case="case1", note="порог")
    entries = trace.to_list()
    assert [e["stage"] for e in entries] == ["a", "b"]
    assert entries[0]["scale"] == 1.0 and entries[0]["thresholds"] == {"r": 2.0}
    assert trace.notes() == ["порог"]


def test_flow_stats_reset():
    strategy = SimpleNamespace(
        get_augmentations=lambda: 4,
        get_nodes=lambda: 10,
        get_edges=lambda: 20,
        get_flow_value=lambda: 3,
    )
    assert update_flow_stats(strategy, "dinic")["flow_value"] == 3
    assert get_total_flow_stats()["total_flow"] == 3
    reset_flow_stats()
    assert get_total_flow_stats()["total_calls"] == 0


def test_documents_round_trip(tmp_path):
    document = {"b": [1, 2.5], "a": "точка"}
    path = save_json_document(document, str(tmp_path / "doc.json"))
    assert read_json_document(path) == document
    assert dumps_document(document).index('"a"') < dumps_document(document).index('"b"')
    assert document_digest(document) == document_digest({"a": "точка", "b": [1, 2.5]})


def test_relative_name_goes_to_data_dir():
    path = save_json_document({"n": 1}, "space.json")
    assert path == os.path.join(get_config().data_dir, "space.json")
    assert os.path.exists(path)


def test_reading_bad_documents(tmp_path):
    with pytest.raises(InputError):
        read_json_document(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(InputError):
        read_json_document(str(broken))
