"""CSV form of the per-eigenstate diagnostics table."""
from __future__ import annotations

import csv
import io

from .diagnostics import ReportRow

CSV_HEADER = ("index", "E", "kin", "pot_even", "pot_odd", "flatness", "svn", "m2")
ZERO_SNAP = 1e-13


def fmt(x: float) -> str:
    # solver round-off below ZERO_SNAP would make reruns differ in the last digits
    x = float(x)
    return f"{0.0 if abs(x) < ZERO_SNAP else x:.12e}"


def row_cells(row: ReportRow) -> list[str]:
    values = [row.energy, row.kinetic, row.pot_even, row.pot_odd, row.flatness, row.entanglement]
    return [str(row.index)] + [fmt(v) for v in values] + ["" if row.sre is None else fmt(row.sre)]


def report_csv(rows: list[ReportRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row_cells(row))
    return buf.getvalue()
