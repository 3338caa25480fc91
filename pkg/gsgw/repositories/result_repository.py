"""Result artifacts: JSONL records, JSON summaries, fixed-header CSVs and npy clouds."""
import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence

import numpy as np

from gsgw.core.logging import get_logger
from gsgw.repositories.base import BaseRepository, PathLike
from gsgw.repositories.mesh_repository import encode_npy
from gsgw.schemas.measures import Coupling
from gsgw.schemas.run import ResultRecord

logger = get_logger(__name__)

RESULTS_FILE = "results.jsonl"
PLAN_HEADER = ("i", "j", "mass")
TRACE_HEADER = ("step", "loss", "tau")
BASELINE_HEADER = ("method", "seed", "loss", "feasibility_err", "time_ms")
LANDMARK_HEADER = ("src_idx", "dst_idx")
BENCH_HEADER = ("operation", "n", "m", "mean_ms", "std_ms", "repeats")


def jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(payload: Any) -> str:
    """Deterministic JSON: sorted keys, non-finite floats as null."""
    return json.dumps(jsonable(payload), sort_keys=True, indent=2) + "\n"


class ResultRepository(BaseRepository):
    """Writes every artifact of a command run under one output directory."""

    def append_record(self, record: ResultRecord) -> Path:
        """Append one line to results.jsonl; earlier lines are kept unchanged."""
        path = self.resolve(RESULTS_FILE)
        existing = path.read_text(encoding="utf-8") if path.is_file() else ""
        line = json.dumps(jsonable(record.model_dump()), sort_keys=True)
        out = self.write_text(path, existing + line + "\n")
        logger.info(f"Appended {record.command} record", extra={"run_id": record.run_id, "path": str(out)})
        return out

    def read_records(self) -> list:
        path = self.resolve(RESULTS_FILE)
        if not path.is_file():
            return []
        return [ResultRecord.model_validate_json(line)
                for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]

    def write_summary(self, command: str, seed: int, payload: Dict[str, Any]) -> Path:
        return self.write_text(f"{command}_{seed}.json", dumps(payload))

    def write_csv(self, name: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """UTF-8 CSV with LF endings under a fixed header."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row {row!r} does not match header {header!r}")
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        return self.write_text(name, buffer.getvalue())

    def write_plan(self, name: PathLike, plan: Coupling) -> Path:
        """Nonzero entries of a plan as (i, j, mass) triples, row-major."""
        rows, cols = np.nonzero(plan.plan)
        return self.write_csv(name, PLAN_HEADER,
                              ((int(i), int(j), float(plan.plan[i, j])) for i, j in zip(rows, cols)))

    def write_npy(self, name: PathLike, array) -> Path:
        return self.write_bytes(name, encode_npy(array))
