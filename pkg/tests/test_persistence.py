import json
import math

import numpy as np
import pytest

from edt_lab.errors import IOFailure
from edt_lab.services.persistence_service import (
    PersistenceService,
    format_value,
    meta_path,
    output_path,
)


@pytest.fixture
def service():
    return PersistenceService()


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(np.float64(2.5)) == "2.5"
    assert format_value(math.inf) == "inf"
    assert format_value(-math.inf) == "-inf"
    assert format_value(math.nan) == "nan"
    assert format_value(True) == "1"
    assert format_value(np.bool_(False)) == "0"
    assert format_value("nwp") == "nwp"


def test_table_round_trip_keeps_full_precision(service, tmp_path):
    path = tmp_path / "law.csv"
    t = np.linspace(0.0, 1.0, 7)
    cdf = np.sqrt(t) / 3.0
    service.write_table(path, {"t": t, "cdf": cdf, "label": ["x"] * 7}, {"horizon": 1.0})

    columns, meta = service.read_table(path)
    assert list(columns) == ["t", "cdf", "label"]
    assert columns["cdf"] == cdf.tolist()
    assert columns["label"] == ["x"] * 7
    assert meta["horizon"] == 1.0
    assert meta["rows"] == 7
    assert meta["columns"] == ["t", "cdf", "label"]
    assert "written_at" in meta


def test_sidecar_is_json(service, tmp_path):
    path = service.write_rows(tmp_path / "rows.csv", [{"a": 1, "b": math.inf}], {"note": "x"})
    with open(meta_path(path), encoding="utf-8") as f:
        assert json.load(f)["note"] == "x"
    columns, _ = service.read_table(path)
    assert columns["a"] == [1]
    assert math.isinf(columns["b"][0])


def test_rewrite_keeps_backup(service, tmp_path):
    path = tmp_path / "sweep.csv"
    service.write_table(path, {"v": [1.0]})
    service.write_table(path, {"v": [2.0]})
    assert (tmp_path / "sweep.csv.bak").read_text(encoding="utf-8").splitlines() == ["v", "1"]
    assert service.read_table(path)[0]["v"] == [2]
    assert not (tmp_path / "sweep.csv.tmp").exists()


def test_creates_missing_directories(service, tmp_path):
    path = service.write_table(tmp_path / "a" / "b" / "c.csv", {"v": [0.5]})
    assert path.exists()


def test_unequal_columns_rejected(service, tmp_path):
    with pytest.raises(IOFailure):
        service.write_table(tmp_path / "bad.csv", {"a": [1, 2], "b": [1]})


def test_empty_rows_rejected(service, tmp_path):
    with pytest.raises(IOFailure):
        service.write_rows(tmp_path / "none.csv", [])


def test_unwritable_target_raises_io_failure(service, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x", encoding="utf-8")
    with pytest.raises(IOFailure):
        service.write_table(blocker / "inner.csv", {"v": [1]})


def test_missing_file_raises_io_failure(service, tmp_path):
    with pytest.raises(IOFailure) as info:
        service.read_table(tmp_path / "absent.csv")
    assert isinstance(info.value, OSError)


def test_output_path(tmp_path):
    assert str(output_path(None, "x.csv")).endswith("x.csv")
    assert output_path(str(tmp_path), "x.csv") == tmp_path / "x.csv"
    assert output_path(str(tmp_path / "new") + "/", "x.csv") == tmp_path / "new" / "x.csv"
    assert output_path(str(tmp_path / "y.csv"), "x.csv") == tmp_path / "y.csv"
