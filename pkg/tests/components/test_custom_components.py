from unittest.mock import patch

import pytest

from multivirus_defense.components import ReportComponent
from multivirus_defense.enums import EntryRegistry, EntryType
from multivirus_defense.history import ReportHistory
from multivirus_defense.reports import Report, ScenarioReport


class TestCustomEntries:
    def setup_method(self):
        """Save original registry state before each test."""
        self._original_custom_types = EntryRegistry._custom_types.copy()
        self._original_type_detectors = EntryRegistry._type_detectors.copy()
        self._original_serializers = EntryRegistry._serializers.copy()
        self._original_methods = Report._custom_component_methods.copy()

        EntryRegistry._custom_types = {}
        EntryRegistry._type_detectors = {}
        EntryRegistry._serializers = {}
        Report._custom_component_methods = {}

    def teardown_method(self):
        """Restore original registry state after each test."""
        for name in list(Report._custom_component_methods):
            if name not in self._original_methods and hasattr(Report, name):
                delattr(Report, name)
        EntryRegistry._custom_types = self._original_custom_types
        EntryRegistry._type_detectors = self._original_type_detectors
        EntryRegistry._serializers = self._original_serializers
        Report._custom_component_methods = self._original_methods

    def test_register_entry_type(self):
        histogram = ReportHistory.register_entry_type("histogram")

        assert isinstance(histogram, EntryType)
        assert histogram.value == "histogram"
        assert EntryRegistry.get_custom_type("histogram") == histogram
        assert histogram in EntryRegistry.get_all_types()

    def test_register_existing_type_warns(self):
        with pytest.warns(UserWarning):
            assert ReportHistory.register_entry_type("number") is EntryType.NUMBER

    def test_register_entry_detector(self):
        histogram = ReportHistory.register_entry_type("histogram")

        def is_histogram(content, kwargs):
            return isinstance(content, dict) and "bins" in content

        ReportHistory.register_entry_detector(histogram, is_histogram)

        assert EntryRegistry.get_detector(histogram) == is_histogram
        assert ReportComponent({"bins": [0, 1], "counts": [3]}).entry_type == histogram

    def test_register_entry_serializer(self):
        histogram = ReportHistory.register_entry_type("histogram")

        def serialize(content, kwargs):
            return {"total": sum(content["counts"])}

        ReportHistory.register_entry_serializer(histogram, serialize)
        entry = ReportComponent({"counts": [3, 4]}, entry_type=histogram).serialize()

        assert entry == {"type": "histogram", "value": {"total": 7}}

    def test_register_component_method(self):
        histogram = ReportHistory.register_entry_type("histogram")

        ReportHistory.register_component_method("add_histogram", histogram)

        assert hasattr(Report, "add_histogram")
        assert Report._custom_component_methods["add_histogram"] == histogram
        report = ScenarioReport("demo")
        report.add_histogram({"counts": [1]}, title="h")
        assert report.components[-1].entry_type == histogram

    def test_custom_method_with_custom_function(self):
        sweep = ReportHistory.register_entry_type("sweep")

        def add_sweep(self, values, title=None, **kwargs):
            return self.add_custom({"values": list(values)}, entry_type=sweep.value, title=title, **kwargs)

        ReportHistory.register_component_method("add_sweep", sweep, add_sweep)

        report = ScenarioReport("demo")
        with patch.object(report, "add_custom") as mock_add_custom:
            report.add_sweep((10, 50), title="alpha")
            mock_add_custom.assert_called_once_with(
                {"values": [10, 50]}, entry_type="sweep", title="alpha"
            )

    def test_existing_method_is_kept(self):
        histogram = ReportHistory.register_entry_type("histogram")
        with pytest.warns(UserWarning):
            method = Report.register_component_method("add_number", histogram)
        assert method is Report.add_number

    def test_unknown_custom_type(self):
        with pytest.raises(ValueError):
            ScenarioReport("demo").add_custom(1, entry_type="missing")

    def test_failing_serializer_is_contained(self):
        crash = ReportHistory.register_entry_type("crash")

        def crash_serializer(content, kwargs):
            raise ValueError("Simulated error in custom serializer")

        ReportHistory.register_entry_serializer(crash, crash_serializer)
        entry = ReportComponent({"data": "test"}, entry_type=crash).serialize()

        assert entry["type"] == "error"
        assert "Simulated error" in entry["value"]
