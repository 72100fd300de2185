"""
Persistence Service (CSV + JSON sidecar)
Writes result tables atomically: data goes to `<file>.tmp`, is flushed and fsynced,
then swapped in with os.replace; the previous file is kept as `<file>.bak`.
Every table gets a `<file>.meta.json` sidecar holding the resolved configuration.
"""
from __future__ import annotations

import csv
import json
import math
import os
import shutil
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Mapping, Sequence, Tuple

import numpy as np

from edt_lab.config import get_logger
from edt_lab.errors import IOFailure

logger = get_logger("edt_lab.persistence")

META_SUFFIX = ".meta.json"


def format_value(x: Any) -> str:
    """Full double precision for floats (17 significant digits); everything else via str."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return format(x, ".17g")
    return str(x)


def _parse_value(text: str) -> Any:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def meta_path(path: Path) -> Path:
    return path.with_name(path.name + META_SUFFIX)


class PersistenceService:
    def __init__(self):
        self.lock = threading.RLock()

    def _atomic_write(self, path: Path, write) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        temp_file = path.with_name(path.name + ".tmp")
        if path.exists():
            shutil.copy2(path, path.with_name(path.name + ".bak"))
        with open(temp_file, "w", encoding="utf-8", newline="") as f:
            write(f)
            f.flush()
            os.fsync(f.fileno())
        os.replace(temp_file, path)

    def write_table(self, path, columns: Mapping[str, Sequence[Any]], meta: Mapping[str, Any] | None = None) -> Path:
        """Write equal-length columns as CSV (header row first) plus the metadata sidecar."""
        path = Path(path)
        names = list(columns)
        lengths = {len(columns[n]) for n in names}
        if len(lengths) > 1:
            raise IOFailure(f"columns of {path.name} have unequal lengths {sorted(lengths)}")

        def write_rows(f):
            writer = csv.writer(f)
            writer.writerow(names)
            for row in zip(*(columns[n] for n in names)):
                writer.writerow([format_value(v) for v in row])

        sidecar = {
            "written_at": datetime.now(timezone.utc).isoformat(),
            "columns": names,
            "rows": lengths.pop() if lengths else 0,
            **dict(meta or {}),
        }
        with self.lock:
            try:
                self._atomic_write(path, write_rows)
                self._atomic_write(meta_path(path),
                                   lambda f: json.dump(sidecar, f, indent=2, default=format_value))
            except OSError as e:
                logger.error(f"[IO] Write error for {path}: {e}")
                raise IOFailure(f"could not write {path}: {e}") from e
        logger.info(f"[IO] Wrote {path} ({sidecar['rows']} rows)")
        return path

    def write_rows(self, path, rows: Sequence[Mapping[str, Any]], meta: Mapping[str, Any] | None = None) -> Path:
        """Row-dict form of write_table; the first row fixes the column order."""
        if not rows:
            raise IOFailure(f"nothing to write to {path}")
        names = list(rows[0])
        return self.write_table(path, {n: [r.get(n, "") for r in rows] for n in names}, meta)

    def read_table(self, path) -> Tuple[Dict[str, list], Dict[str, Any]]:
        """Columns (ints/floats parsed back, text otherwise) and the sidecar metadata ({} if absent)."""
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8", newline="") as f:
                reader = csv.reader(f)
                names = next(reader)
                columns: Dict[str, list] = {n: [] for n in names}
                for row in reader:
                    for n, v in zip(names, row):
                        columns[n].append(_parse_value(v))
            meta: Dict[str, Any] = {}
            side = meta_path(path)
            if side.exists():
                with open(side, "r", encoding="utf-8") as f:
                    meta = json.load(f)
        except (OSError, StopIteration, json.JSONDecodeError) as e:
            raise IOFailure(f"could not read {path}: {e}") from e
        return columns, meta


persistence_service = PersistenceService()


def output_path(out: str | None, default_name: str) -> Path:
    """--out as given; a directory (existing, or ending in a separator) gets default_name inside it."""
    if not out:
        return Path("out") / default_name
    p = Path(out)
    if p.is_dir() or out.endswith(("/", os.sep)):
        return p / default_name
    return p
