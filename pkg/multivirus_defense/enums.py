"""
Report entry types and the registry for extending them.

Built-in entry types cover what the engines emit (numbers, checks, bound
reports, tables, arrays). Custom types can be registered together with a
detector that recognizes their content and a serializer that turns it into
JSON-compatible data.
"""

import warnings
from enum import Enum
from typing import Any, Callable, Dict, List, Optional


class EntryType(Enum):
    """
    Kinds of content a report component can hold.

    Attributes:
        TEXT: Plain text
        NUMBER: Scalar value
        CHECK: Named pass/fail acceptance check
        BOUND: A :class:`~multivirus_defense.bounds.BoundReport`
        TABLE: Pandas DataFrame
        SERIES: Pandas Series
        ARRAY: Numpy array
        JSON: Data passed through as JSON
        ERROR: Error message, optionally with a traceback
        LIST: List of entries, each serialized on its own
        DICT: Mapping of entries, each value serialized on its own
    """

    TEXT = "text"
    NUMBER = "number"
    CHECK = "check"
    BOUND = "bound"
    TABLE = "table"
    SERIES = "series"
    ARRAY = "array"
    JSON = "json"
    ERROR = "error"
    LIST = "list"
    DICT = "dict"


class EntryRegistry:
    """
    Registry of custom entry types, their detectors and their serializers.

    Detectors take ``(content, kwargs)`` and return True when the content
    belongs to their type; serializers take the same arguments and return
    JSON-compatible data.
    """

    _custom_types: Dict[str, EntryType] = {}
    _type_detectors: Dict[EntryType, Callable[[Any, Dict[str, Any]], bool]] = {}
    _serializers: Dict[EntryType, Callable[[Any, Dict[str, Any]], Any]] = {}

    @classmethod
    def register_entry_type(cls, name: str) -> EntryType:
        """
        Register a new entry type, or return the existing one with a warning.

        Examples:
            >>> HISTOGRAM = EntryRegistry.register_entry_type("histogram")
            >>> HISTOGRAM.value
            'histogram'
        """
        existing = [t.value for t in EntryType] + list(cls._custom_types)
        if name in existing:
            warnings.warn(f"Entry type '{name}' already exists, returning existing type")
            if name in cls._custom_types:
                return cls._custom_types[name]
            return EntryType(name)

        custom_type = object.__new__(EntryType)
        custom_type._name_ = name.upper()
        custom_type._value_ = name
        cls._custom_types[name] = custom_type
        return custom_type

    @classmethod
    def register_detector(
        cls, entry_type: EntryType, detector: Callable[[Any, Dict[str, Any]], bool]
    ) -> None:
        cls._type_detectors[entry_type] = detector

    @classmethod
    def register_serializer(
        cls, entry_type: EntryType, serializer: Callable[[Any, Dict[str, Any]], Any]
    ) -> None:
        cls._serializers[entry_type] = serializer

    @classmethod
    def get_custom_type(cls, name: str) -> Optional[EntryType]:
        return cls._custom_types.get(name)

    @classmethod
    def get_all_types(cls) -> List[EntryType]:
        return list(EntryType) + list(cls._custom_types.values())

    @classmethod
    def get_detector(cls, entry_type: EntryType) -> Optional[Callable]:
        return cls._type_detectors.get(entry_type)

    @classmethod
    def get_serializer(cls, entry_type: EntryType) -> Optional[Callable]:
        return cls._serializers.get(entry_type)
