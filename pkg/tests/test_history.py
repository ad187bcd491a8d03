import json

from multivirus_defense import ReportHistory, ScenarioReport


def test_history_add_report():
    history = ReportHistory()
    report = ScenarioReport("fig3-coexist", seed=0)
    history.add_report(report)

    assert len(history.reports) == 1
    assert history.reports[0] is report


def test_history_render_last():
    history = ReportHistory()
    first = history.add_scenario_report_create("a")
    second = history.add_scenario_report_create("b")
    second.add_check("removed", True)

    assert len(history.reports) == 2
    assert history.reports[-1] is second
    rendered = json.loads(history.render_last())
    assert [r["name"] for r in rendered] == ["b"]
    assert first.passed


def test_history_error_report_fails():
    history = ReportHistory()
    history.add_scenario_report_create("ok")
    history.add_error_report("bad", "StepTooLarge: halve h")

    assert not history.passed
    document = json.loads(history.render_all())
    assert document["reports"][1]["entries"][0]["type"] == "error"


def test_history_write(tmp_path):
    history = ReportHistory()
    history.add_scenario_report_create("a", seed=3).add_number(1.5, title="rho_bound")
    path = tmp_path / "history.json"
    history.write(path)

    assert json.loads(path.read_text())["passed"] is True
    history.clear()
    assert history.reports == []
