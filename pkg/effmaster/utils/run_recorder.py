# SPDX-License-Identifier: MIT

# pyright: reportExplicitAny=false
# pyright: reportAny=false

"""Run recording: artifact files plus a JSON record of the run."""

import csv
import json
from collections.abc import Iterable, Sequence
from datetime import datetime
from pathlib import Path
from typing import Any

import numpy as np

from ..core.algebra import Operator, dump_matrix
from .config import format_float

RECORD_FILE = "run_record.json"


def _cell(value: Any) -> str:
    match value:
        case bool() | np.bool_():
            return "true" if value else "false"
        case int() | np.integer():
            return str(int(value))
        case float() | np.floating():
            return format_float(float(value))
        case None:
            return ""
        case _:
            return str(value)


class RunRecorder:
    """Writes a run's CSV and matrix artifacts and keeps a JSON record of them.

    Artifact files carry no timestamps, so identical configs give byte-identical
    artifacts; only the JSON record is timed.
    """

    def __init__(self, output_dir: str | Path, header: Sequence[str] = ()):
        """Initialize run recorder.

        Args:
            output_dir: Directory receiving every artifact of the run.
            header: Canonical config lines embedded in every artifact as `#` comments.
        """
        self.output_dir: Path = Path(output_dir)
        self.header: list[str] = list(header)
        self.record_path: Path = self.output_dir / RECORD_FILE
        self.record_data: dict[str, Any] = {
            "command": "",
            "start_time": "",
            "end_time": "",
            "config": self.header,
            "artifacts": [],
            "warnings": [],
            "success": False,
            "exit_code": None,
            "error": None,
            "execution_time": 0.0,
        }
        self._start_time: datetime | None = None

    def start_recording(self, command: str) -> None:
        self._start_time = datetime.now()
        self.record_data.update(
            {
                "command": command,
                "start_time": self._start_time.isoformat(),
                "artifacts": [],
                "warnings": [],
            }
        )
        self.save_record()

    def _register(self, path: Path, kind: str) -> Path:
        self.record_data["artifacts"].append(
            {"file": str(path.relative_to(self.output_dir)), "kind": kind}
        )
        self.save_record()
        return path

    def write_csv(
        self,
        name: str,
        columns: Sequence[str],
        rows: Iterable[Sequence[Any]],
        extra_header: Sequence[str] = (),
    ) -> Path:
        """CSV with `,` delimiter, `#` header lines and 17-digit floats."""
        path = self.output_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            for line in [*self.header, *extra_header]:
                f.write(f"# {line}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        return self._register(path, "csv")

    def write_matrix(
        self, name: str, op: Operator | np.ndarray, extra_header: Sequence[str] = ()
    ) -> Path:
        path = dump_matrix(op, self.output_dir / name, [*self.header, *extra_header])
        return self._register(path, "matrix")

    def write_report(self, name: str, entries: dict[str, Any]) -> Path:
        """Two-column `key, value` CSV for scalar reports."""
        return self.write_csv(name, ["key", "value"], list(entries.items()))

    def record_warning(self, message: str) -> None:
        self.record_data["warnings"].append(message)
        self.save_record()

    def finalize_recording(
        self, success: bool, exit_code: int, error: str | None = None
    ) -> None:
        end_time = datetime.now()
        self.record_data.update(
            {
                "end_time": end_time.isoformat(),
                "success": success,
                "exit_code": exit_code,
                "error": error,
                "execution_time": (end_time - self._start_time).total_seconds()
                if self._start_time
                else 0.0,
            }
        )
        self.save_record()

    def save_record(self) -> None:
        """Save the current record to file."""
        try:
            self.record_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.record_path, "w", encoding="utf-8") as f:
                json.dump(self.record_data, f, indent=2, ensure_ascii=False)
        except Exception as e:
            print(f"Warning: Failed to save run record to {self.record_path}: {e}")

    def artifact_files(self) -> list[str]:
        return [a["file"] for a in self.record_data["artifacts"]]
