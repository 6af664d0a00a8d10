"""
utils/output_writer.py

Writes analysis artifacts (CSV tables and JSON documents) to files or stdout
with deterministic formatting and a forced file-system sync after each write.
"""

import json
import logging
import math
import os
import sys
from typing import Any, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger('ArtifactWriter')

FORMATS = ("csv", "json")


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and complex numbers into JSON-ready values."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": _jsonable(float(np.real(value))), "im": _jsonable(float(np.imag(value)))}
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no inf/nan literals
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    return value


class ArtifactWriter:
    """
    Writer for plot-ready artifacts.

    CSV output uses shortest round-trip float formatting and LF line endings so
    identical inputs give byte-identical files.
    """

    def __init__(self, fmt: str = "csv", out_path: Optional[str] = None):
        """
        Initialize the writer.

        Args:
            fmt (str): "csv" or "json"
            out_path (str): Destination file; None writes to stdout
        """
        if fmt not in FORMATS:
            raise ValueError(f"Unsupported output format {fmt!r}; expected one of {', '.join(FORMATS)}")
        self.fmt = fmt
        self.out_path = out_path

    def render(self, frame: Optional[pd.DataFrame] = None, document: Optional[dict] = None) -> str:
        """
        Render a table and/or a document in the writer's format.

        For CSV the table is rendered; for JSON the document is rendered, with
        the table embedded under "rows" when both are given.
        """
        if self.fmt == "csv":
            if frame is None:
                frame = pd.DataFrame([_flatten(document or {})])
            return frame.to_csv(index=False, lineterminator="\n", float_format=repr_float)
        payload = dict(document or {})
        if frame is not None:
            payload["rows"] = frame.to_dict(orient="records")
        return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"

    def write(self, frame: Optional[pd.DataFrame] = None, document: Optional[dict] = None) -> str:
        """
        Render and write an artifact.

        Returns:
            str: The rendered text
        """
        text = self.render(frame, document)
        if self.out_path is None:
            sys.stdout.write(text)
            sys.stdout.flush()
            return text

        directory = os.path.dirname(self.out_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(self.out_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        self._flush_file_after_write(self.out_path)
        logger.info(f"Wrote {self.fmt} artifact to {self.out_path}")
        return text

    def _flush_file_after_write(self, file_path: str) -> None:
        """Force a file system sync after writing so sequential readers see the data."""
        try:
            with open(file_path, "r+") as f:
                f.flush()
                os.fsync(f.fileno())
        except OSError as e:
            logger.error(f"Error flushing file {file_path}: {str(e)}")


def repr_float(value: float) -> str:
    """Shortest round-trip decimal representation."""
    return repr(float(value))


def _flatten(document: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in document.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        elif isinstance(value, (list, tuple, np.ndarray)):
            flat[name] = json.dumps(_jsonable(value))
        else:
            flat[name] = _jsonable(value)
    return flat
