import json

import numpy as np
import pandas as pd

from multivirus_defense import EntryType, ReportComponent
from multivirus_defense.bounds import BoundReport
from multivirus_defense.components import to_jsonable


def test_text_component_detection():
    component = ReportComponent("Hello World")
    assert component.entry_type == EntryType.TEXT


def test_dataframe_component_detection():
    df = pd.DataFrame({"t": [0.0, 1.0], "mean_frac_any": [0.4, 0.1]})
    component = ReportComponent(df)
    assert component.entry_type == EntryType.TABLE


def test_error_component_detection():
    component = ReportComponent("Error message", is_error=True)
    assert component.entry_type == EntryType.ERROR


def test_number_component_detection():
    assert ReportComponent(42).entry_type == EntryType.NUMBER
    assert ReportComponent(np.float64(0.5)).entry_type == EntryType.NUMBER


def test_check_component_detection():
    assert ReportComponent(True).entry_type == EntryType.CHECK
    assert ReportComponent(np.bool_(False)).entry_type == EntryType.CHECK


def test_bound_component_detection():
    bound = BoundReport("q_final_bound", {}, 0.5, 0.3, True, 0.2)
    assert ReportComponent(bound).entry_type == EntryType.BOUND


def test_series_component_detection():
    series = pd.Series([1, 2, 3, 4])
    component = ReportComponent(series)
    assert component.entry_type == EntryType.SERIES


def test_list_component_detection():
    items = ["item1", "item2", "item3"]
    component = ReportComponent(items)
    assert component.entry_type == EntryType.LIST


def test_json_component_detection():
    component = ReportComponent({"a": 1}, is_json=True)
    assert component.entry_type == EntryType.JSON
    assert ReportComponent({"a": 1}).entry_type == EntryType.DICT


def test_array_serializes_to_lists():
    entry = ReportComponent(np.array([[1.0, 2.0]]), title="beta").serialize()
    assert entry == {"type": "array", "title": "beta", "value": [[1.0, 2.0]]}


def test_check_serializes_detail():
    entry = ReportComponent(True, title="removed", detail={"final_max": np.float64(1e-4)}).serialize()
    assert entry["value"] == {"passed": True, "final_max": 1e-4}
    json.dumps(entry)


def test_number_format():
    entry = ReportComponent(4.54545, format="{:.3f}").serialize()
    assert entry["value"] == "4.545"


def test_failed_serialization_becomes_error_entry():
    entry = ReportComponent(1.0, format="{:q}").serialize()
    assert entry["type"] == "error"
    assert "traceback" in entry
    assert entry["content"] == "1.0"


def test_to_jsonable_nested():
    value = {"a": np.int64(3), "b": (np.float32(0.5), np.zeros(2))}
    assert to_jsonable(value) == {"a": 3, "b": [0.5, [0.0, 0.0]]}
