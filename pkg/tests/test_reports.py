import numpy as np
import pandas as pd

from multivirus_defense import EntryType, ErrorReport, ScenarioReport
from multivirus_defense.bounds import BoundReport


def test_report_chaining():
    report = ScenarioReport("demo")
    result = report.add_text("Hello").add_number(42, title="Answer")
    assert result is report
    assert len(report.components) == 2


def test_report_add_methods():
    report = ScenarioReport("demo")
    report.add_text("Text entry")
    report.add_error("Error entry")
    report.add_number(99, title="Score")
    report.add_table(pd.DataFrame({"t": [0.0]}))
    report.add_array(np.zeros(2))
    report.add_json({"k": 1})

    types = [c.entry_type for c in report.components]
    assert types == [
        EntryType.TEXT,
        EntryType.ERROR,
        EntryType.NUMBER,
        EntryType.TABLE,
        EntryType.ARRAY,
        EntryType.JSON,
    ]


def test_seed_is_recorded():
    report = ScenarioReport("demo", seed=7)
    assert report.to_dict()["entries"][0] == {"type": "number", "title": "seed", "value": 7}


def test_checks_decide_passed():
    report = ScenarioReport("demo")
    report.add_check("a", True).add_check("b", np.bool_(True))
    assert report.passed
    report.add_check("c", False, worst=0.5)
    assert not report.passed
    assert report.checks == {"a": True, "b": True, "c": False}


def test_only_hard_bounds_decide_passed():
    report = ScenarioReport("demo")
    report.add_bound(BoundReport("approx", {}, 1.0, 2.0, False, -1.0, approximate=True))
    assert report.passed
    report.add_bound(BoundReport("exact", {}, 1.0, 2.0, False, -1.0))
    assert not report.passed
    assert [b.name for b in report.bounds] == ["approx", "exact"]


def test_to_dict_shape():
    report = ScenarioReport("demo")
    report.add_check("removed", True, final_max=1e-5)
    document = report.to_dict()
    assert document["kind"] == "scenario"
    assert document["passed"] is True
    assert document["entries"][0]["value"] == {"passed": True, "final_max": 1e-5}


def test_error_report_never_passes():
    report = ErrorReport("sim-mf", "StepTooLarge: halve h", trace="Traceback ...")
    assert not report.passed
    entry = report.to_dict()["entries"][0]
    assert entry["type"] == "error"
    assert entry["traceback"] == "Traceback ..."
