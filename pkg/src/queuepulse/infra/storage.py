import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from loguru import logger

from queuepulse import config

RESULTS_FILE = "results.csv"
SUMMARY_FILE = "summary.json"
MANIFEST_FILE = "manifest.json"


class ReportWriter:
    """
    Writes the three report files of a run into one directory.

    Output is deterministic for equal inputs: JSON keys are sorted, floats use
    their shortest round-trip repr and rows keep their given order.
    """

    def __init__(self, base_dir: Optional[str] = None):
        self.base_path = Path(base_dir or config.OUTPUT_DIR).resolve()
        self.base_path.mkdir(parents=True, exist_ok=True)

    def _resolve(self, file_path: str) -> Path:
        full_path = (self.base_path / file_path).resolve()
        if not full_path.is_relative_to(self.base_path):
            raise ValueError(f"Path traversal attempt: {file_path}")
        return full_path

    def write_rows(self, header: Sequence[str], rows: Iterable[Sequence[Any]], file_path: str = RESULTS_FILE) -> Path:
        path = self._resolve(file_path)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
        logger.info(f"Wrote {path}")
        return path

    def write_json(self, payload: Any, file_path: str) -> Path:
        path = self._resolve(file_path)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True, allow_nan=False)
            f.write("\n")
        logger.info(f"Wrote {path}")
        return path

    def write_summary(self, entries: List[Dict[str, Any]]) -> Path:
        return self.write_json(entries, SUMMARY_FILE)

    def write_manifest(self, manifest: Dict[str, Any]) -> Path:
        return self.write_json(manifest, MANIFEST_FILE)
