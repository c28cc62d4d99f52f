"""CSV and aligned-text rendering of error, rate and spectral tables."""

from __future__ import annotations

import csv
import io
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .analysis import ErrorTable, RateTable, SpectralTable

CSV_HEADER = ["eps_exp", "N", "dt", "value"]
ROBUST_KEY = "max"


def _dt_label(dt: float, dt0: float) -> str:
    ratio = dt0 / dt
    j = round(math.log(ratio, 4)) if ratio > 0 else 0
    if j == 0:
        return f"dt={dt0:g}"
    if math.isclose(dt0 / 4**j, dt, rel_tol=1e-12):
        return f"dt={dt0:g}/4" if j == 1 else f"dt={dt0:g}/4^{j}"
    return f"dt={dt:g}"


def _header(ladder: Sequence[Tuple[int, float]], width: int) -> List[str]:
    dt0 = ladder[0][1]
    first = "eps=2^-k".ljust(10) + "".join(f"N={n}".rjust(width) for n, _ in ladder)
    second = " " * 10 + "".join(_dt_label(dt, dt0).rjust(width) for _, dt in ladder)
    return [first, second]


def _fmt_rate(r: float) -> str:
    return "--" if not np.isfinite(r) else f"{r:.2f}"


def render_error_text(errors: ErrorTable, rates: Optional[RateTable] = None, width: int = 12) -> str:
    lines = _header(errors.ladder, width)
    rule = "-" * len(lines[0])
    lines.append(rule)
    for i, k in enumerate(errors.eps_exps):
        lines.append(f"k={k}".ljust(10) + "".join(f"{v:.2E}".rjust(width) for v in errors.values[i]))
        if rates is not None:
            lines.append(" " * 10 + "".join(_fmt_rate(r).rjust(width) for r in rates.classical[i]))
    lines.append(rule)
    lines.append("E_N,dt".ljust(10) + "".join(f"{v:.2E}".rjust(width) for v in errors.robust_row))
    if rates is not None:
        lines.append("p^N".ljust(10) + "".join(_fmt_rate(r).rjust(width) for r in rates.robust))
    lines.append(rule)
    return "\n".join(lines) + "\n"


def render_spectral_text(table: SpectralTable, width: int = 12) -> str:
    lines = _header(table.ladder, width)
    rule = "-" * len(lines[0])
    lines.append(rule)
    for i, k in enumerate(table.eps_exps):
        lines.append(f"k={k}".ljust(10) + "".join(f"{v:.5f}".rjust(width) for v in table.values[i]))
    lines.append(rule)
    return "\n".join(lines) + "\n"


def _rows_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _cell(k, n, dt, v):
    return [k, n, repr(float(dt)), repr(float(v))]


def error_csv(errors: ErrorTable) -> str:
    rows = [
        _cell(k, n, dt, errors.values[i, j])
        for i, k in enumerate(errors.eps_exps)
        for j, (n, dt) in enumerate(errors.ladder)
    ]
    rows += [_cell(ROBUST_KEY, n, dt, v) for (n, dt), v in zip(errors.ladder, errors.robust_row)]
    return _rows_csv(rows)


def rate_csv(rates: RateTable) -> str:
    """Rates keyed by the coarse column of each pair; absent rates are left empty."""

    def cell(k, n, dt, r):
        return [k, n, repr(float(dt)), repr(float(r)) if np.isfinite(r) else ""]

    rows = [
        cell(k, n, dt, rates.classical[i, j])
        for i, k in enumerate(rates.eps_exps)
        for j, (n, dt) in enumerate(rates.ladder[:-1])
    ]
    rows += [cell(ROBUST_KEY, n, dt, r) for (n, dt), r in zip(rates.ladder[:-1], rates.robust)]
    return _rows_csv(rows)


def spectral_csv(table: SpectralTable) -> str:
    return _rows_csv(
        _cell(k, n, dt, table.values[i, j])
        for i, k in enumerate(table.eps_exps)
        for j, (n, dt) in enumerate(table.ladder)
    )


def read_csv(text: str) -> List[Tuple[str, int, float, Optional[float]]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError("table CSV lacks the eps_exp,N,dt,value header")
    return [(k, int(n), float(dt), float(v) if v else None) for k, n, dt, v in rows[1:]]


def write_csv_rows(rows: Sequence[Tuple[str, int, float, Optional[float]]]) -> str:
    return _rows_csv([k, n, repr(dt), "" if v is None else repr(v)] for k, n, dt, v in rows)
