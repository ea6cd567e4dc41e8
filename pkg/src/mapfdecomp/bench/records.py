from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, get_args, get_type_hints


@dataclass
class RunRecord:
    """One benchmark run.  ``None`` fields are written as empty CSV cells."""

    map_name: str
    agents: int
    method: str  # "raw" or "layered"
    solver: str  # "serial" or "parallel"
    rep: int
    seed: int
    success: bool
    timed_out: bool = False
    time_ms: float = 0.0
    decomp_ms_step1: float | None = None
    decomp_ms_step2: float | None = None
    decomp_ms_step3: float | None = None
    peak_memory_bytes: int | None = None
    soc: int | None = None
    makespan: int | None = None
    rate_step1: float | None = None
    rate_step2: float | None = None
    rate_step3: float | None = None
    subproblems_step1: int | None = None
    subproblems_step2: int | None = None
    subproblems_step3: int | None = None


HEADER = [f.name for f in dataclasses.fields(RunRecord)]


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str, kind):
    if text == "":
        return None
    args = [a for a in get_args(kind) if a is not type(None)]
    base = args[0] if args else kind
    if base is bool:
        return text == "true"
    return base(text)


def emit_csv(records: Iterable[RunRecord], path: str | Path) -> None:
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(HEADER)
        for rec in records:
            writer.writerow([_format(getattr(rec, name)) for name in HEADER])


def read_csv(path: str | Path) -> list[RunRecord]:
    hints = get_type_hints(RunRecord)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        return [RunRecord(**{name: _parse(cell, hints[name]) for name, cell in zip(header, row)}) for row in reader]
