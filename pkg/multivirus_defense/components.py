"""
Report components: one piece of content with automatic type detection and
guarded JSON serialization.
"""

import traceback
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from .bounds import BoundReport
from .enums import EntryRegistry, EntryType


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars and arrays (also nested in containers) to plain Python."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


class ReportComponent:
    """
    A single entry of a report.

    Attributes:
        content: The value carried by the entry
        entry_type: Detected or explicitly given type
        title: Optional label
        description: Optional explanation
        kwargs: Flags that steer detection and serialization
    """

    def __init__(
        self,
        content: Any,
        entry_type: Optional[EntryType] = None,
        title: Optional[str] = None,
        description: Optional[str] = None,
        **kwargs,
    ):
        """
        Args:
            content: The value to record
            entry_type: Force a type instead of detecting it
            title: Optional label
            description: Optional explanation
            **kwargs: Detection flags
                      - is_error: Treat a string as an error message
                      - detail: Extra fields recorded with a check
                      - is_json: Pass a dict or list through unchanged
                      - traceback: Formatted traceback for error entries
        """
        self.content = content
        self.kwargs = kwargs
        self.entry_type = entry_type or self._detect_entry_type(content)
        self.title = title
        self.description = description

    def _detect_entry_type(self, content: Any) -> EntryType:
        for entry_type in EntryRegistry._type_detectors:
            detector = EntryRegistry.get_detector(entry_type)
            if detector and detector(content, self.kwargs):
                return entry_type

        if isinstance(content, (bool, np.bool_)):
            return EntryType.CHECK
        if isinstance(content, BoundReport):
            return EntryType.BOUND
        if isinstance(content, str):
            return EntryType.ERROR if self.kwargs.get("is_error", False) else EntryType.TEXT
        if isinstance(content, pd.DataFrame):
            return EntryType.TABLE
        if isinstance(content, pd.Series):
            return EntryType.SERIES
        if isinstance(content, np.ndarray):
            return EntryType.ARRAY
        if isinstance(content, (int, float, np.integer, np.floating)):
            return EntryType.NUMBER
        if isinstance(content, (dict, list)) and self.kwargs.get("is_json", False):
            return EntryType.JSON
        if isinstance(content, (list, tuple)):
            return EntryType.LIST
        if isinstance(content, dict):
            return EntryType.DICT
        return EntryType.TEXT

    def serialize(self) -> Dict[str, Any]:
        """
        JSON-compatible form of the entry.

        A failure while serializing never propagates: the entry is replaced
        by an error entry holding the message, the traceback and the repr of
        the content.
        """
        entry: Dict[str, Any] = {"type": self.entry_type.value}
        if self.title:
            entry["title"] = self.title
        if self.description:
            entry["description"] = self.description
        try:
            entry["value"] = self._serialize_content()
        except Exception as e:
            return {
                "type": EntryType.ERROR.value,
                "title": self.title,
                "value": f"Error serializing entry of type {self.entry_type.value}: {e}",
                "traceback": traceback.format_exc(),
                "content": self._safe_repr(self.content),
            }
        if self.entry_type is EntryType.ERROR and self.kwargs.get("traceback"):
            entry["traceback"] = self.kwargs["traceback"]
        return entry

    def _serialize_content(self) -> Any:
        serializer = EntryRegistry.get_serializer(self.entry_type)
        if serializer:
            return to_jsonable(serializer(self.content, self.kwargs))

        kind = self.entry_type
        if kind is EntryType.LIST:
            return [self._serialize_collection_item(item, k) for k, item in enumerate(self.content)]
        if kind is EntryType.DICT:
            return {
                str(key): self._serialize_collection_item(value, key)
                for key, value in self.content.items()
            }
        if kind is EntryType.CHECK:
            return {"passed": bool(self.content), **to_jsonable(self.kwargs.get("detail", {}))}
        if kind is EntryType.BOUND:
            return to_jsonable(self.content.to_dict())
        if kind is EntryType.TABLE:
            return to_jsonable(self.content.to_dict(orient="list"))
        if kind is EntryType.SERIES:
            return to_jsonable(self.content.tolist())
        if kind is EntryType.NUMBER:
            fmt = self.kwargs.get("format")
            return fmt.format(self.content) if fmt else to_jsonable(self.content)
        return to_jsonable(self.content)

    def _serialize_collection_item(self, item: Any, index: Optional[Union[int, str]] = None) -> Any:
        try:
            return ReportComponent(item)._serialize_content()
        except Exception as e:
            where = f" at index/key '{index}'" if index is not None else ""
            return {
                "type": EntryType.ERROR.value,
                "value": f"Error serializing collection item{where}: {e}",
                "content": self._safe_repr(item),
            }

    @staticmethod
    def _safe_repr(value: Any) -> str:
        try:
            return repr(value)
        except Exception as e:
            return f"<unrepresentable: {e}>"
