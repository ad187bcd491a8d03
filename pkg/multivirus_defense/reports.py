"""
Report classes: a named collection of components produced by one run.

``ScenarioReport`` collects the outcome of a scenario run, ``ErrorReport``
records an engine or configuration failure.
"""

import traceback
import warnings
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .bounds import BoundReport
from .components import ReportComponent
from .enums import EntryRegistry, EntryType


class Report:
    """
    A report made of typed components.

    Attributes:
        kind: Report category ('scenario', 'error', 'passivity', ...)
        name: Identifier of what the report describes
        components: Entries in insertion order
    """

    _custom_component_methods: Dict[str, EntryType] = {}

    def __init__(self, kind: str, name: str):
        self.kind = kind
        self.name = name
        self.components: List[ReportComponent] = []

    def add(self, content: Any, **kwargs):
        """
        Add a component with automatic type detection.

        Returns:
            Report: Self, for method chaining
        """
        self.components.append(ReportComponent(content, **kwargs))
        return self

    def add_text(self, text: str, **kwargs):
        return self.add(text, **kwargs)

    def add_error(self, error_text: str, trace: Optional[str] = None, **kwargs):
        """
        Add an error entry.

        Examples:
            >>> report.add_error("StepTooLarge: halve h", trace=traceback.format_exc())
        """
        return self.add(error_text, is_error=True, traceback=trace, **kwargs)

    def add_number(self, number: Union[int, float], **kwargs):
        """
        Examples:
            >>> report.add_number(4.5455, title="beta*", format="{:.3f}")
        """
        return self.add(number, **kwargs)

    def add_check(self, name: str, passed: bool, **detail):
        """
        Add a named pass/fail check; ``detail`` is stored alongside the verdict.

        Examples:
            >>> report.add_check("fixed_point", True, worst_error=0.004)
        """
        return self.add(bool(passed), title=name, detail=detail)

    def add_bound(self, bound: BoundReport, **kwargs):
        return self.add(bound, title=bound.name, **kwargs)

    def add_table(self, frame: pd.DataFrame, **kwargs):
        return self.add(frame, **kwargs)

    def add_series(self, series: pd.Series, **kwargs):
        return self.add(series, **kwargs)

    def add_array(self, array: np.ndarray, **kwargs):
        return self.add(np.asarray(array), **kwargs)

    def add_json(self, data: Union[Dict, List], **kwargs):
        return self.add(data, is_json=True, **kwargs)

    def add_list(self, items: List[Any], **kwargs):
        return self.add(items, **kwargs)

    def add_dict(self, items: Dict[str, Any], **kwargs):
        return self.add(items, **kwargs)

    def add_custom(self, content: Any, entry_type: str, **kwargs):
        """
        Add an entry of a registered custom type.

        Raises:
            ValueError: If the entry type is not registered
        """
        custom_type = EntryRegistry.get_custom_type(entry_type)
        if not custom_type:
            raise ValueError(f"Unknown custom entry type: {entry_type}")
        self.components.append(ReportComponent(content, entry_type=custom_type, **kwargs))
        return self

    @property
    def checks(self) -> Dict[str, bool]:
        return {
            c.title or f"check_{k}": bool(c.content)
            for k, c in enumerate(self.components)
            if c.entry_type is EntryType.CHECK
        }

    @property
    def bounds(self) -> List[BoundReport]:
        return [c.content for c in self.components if c.entry_type is EntryType.BOUND]

    @property
    def passed(self) -> bool:
        """All checks pass and every hard bound is satisfied."""
        return all(self.checks.values()) and all(b.satisfied for b in self.bounds if b.hard)

    def to_dict(self) -> Dict[str, Any]:
        """Serialize every component; a report-level failure becomes an error entry."""
        try:
            entries = [component.serialize() for component in self.components]
        except Exception as e:
            entries = [
                {
                    "type": EntryType.ERROR.value,
                    "value": f"Error serializing report {self.name}: {e}",
                    "traceback": traceback.format_exc(),
                }
            ]
        return {"kind": self.kind, "name": self.name, "passed": self.passed, "entries": entries}

    @classmethod
    def register_component_method(
        cls,
        method_name: str,
        entry_type: EntryType,
        method_func: Optional[Callable] = None,
    ):
        """
        Add an ``add_*`` method for a custom entry type.

        An existing method of the same name is returned unchanged with a warning.

        Examples:
            >>> HISTOGRAM = EntryRegistry.register_entry_type("histogram")
            >>> Report.register_component_method("add_histogram", HISTOGRAM)
        """
        if hasattr(cls, method_name) and method_name != "add_custom":
            warnings.warn(
                f"Method '{method_name}' already exists in Report class, returning existing method"
            )
            return getattr(cls, method_name)

        if method_func is None:

            def default_method(self, content, **kwargs):
                return self.add_custom(content, entry_type=entry_type.value, **kwargs)

            method_func = default_method

        setattr(cls, method_name, method_func)
        cls._custom_component_methods[method_name] = entry_type
        return method_func


class ScenarioReport(Report):
    """Report of one scenario run."""

    def __init__(self, name: str, seed: Optional[int] = None):
        super().__init__(kind="scenario", name=name)
        if seed is not None:
            self.add_number(seed, title="seed")


class ErrorReport(Report):
    """Report holding a single failure."""

    def __init__(self, name: str, error_text: str, trace: Optional[str] = None):
        super().__init__(kind="error", name=name)
        self.add_error(error_text, trace=trace)

    @property
    def passed(self) -> bool:
        return False
