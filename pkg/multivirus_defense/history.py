import json
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

from .enums import EntryRegistry, EntryType
from .reports import ErrorReport, Report, ScenarioReport


class ReportHistory:
    """
    Ordered collection of the reports produced during a run.

    The history renders every report into one JSON document and exposes the
    entry-type registry so custom content can be recorded.

    Attributes:
        reports: Reports in the order they were added
    """

    def __init__(self):
        self.reports: List[Report] = []

    def add_report(self, report: Report) -> Report:
        self.reports.append(report)
        return report

    def add_scenario_report_create(self, name: str, seed: Optional[int] = None) -> ScenarioReport:
        """Create, add and return an empty scenario report."""
        report = ScenarioReport(name, seed)
        self.add_report(report)
        return report

    def add_error_report(
        self, name: str, error_text: str, trace: Optional[str] = None
    ) -> ErrorReport:
        report = ErrorReport(name, error_text, trace)
        self.add_report(report)
        return report

    @property
    def passed(self) -> bool:
        return all(report.passed for report in self.reports)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "reports": [report.to_dict() for report in self.reports],
        }

    def render_all(self, indent: int = 2) -> str:
        """All reports as one JSON document (keys sorted, so output is stable)."""
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def render_last(self, n: int = 1, indent: int = 2) -> str:
        """JSON for the ``n`` most recent reports."""
        return json.dumps(
            [report.to_dict() for report in self.reports[-n:]], indent=indent, sort_keys=True
        )

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.render_all() + "\n")

    def clear(self):
        self.reports = []

    @staticmethod
    def register_entry_type(name: str) -> EntryType:
        return EntryRegistry.register_entry_type(name)

    @staticmethod
    def register_entry_detector(
        entry_type: EntryType, detector: Callable[[Any, dict], bool]
    ) -> None:
        EntryRegistry.register_detector(entry_type, detector)

    @staticmethod
    def register_entry_serializer(
        entry_type: EntryType, serializer: Callable[[Any, dict], Any]
    ) -> None:
        EntryRegistry.register_serializer(entry_type, serializer)

    @staticmethod
    def register_component_method(
        method_name: str, entry_type: EntryType, method_func: Optional[Callable] = None
    ) -> None:
        Report.register_component_method(method_name, entry_type, method_func)
