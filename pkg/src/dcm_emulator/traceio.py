"""CSV traces, key-value reports and companion gnuplot scripts."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

from .engine import Trace
from .errors import DomainError

__all__ = ["CSV_HEADER", "format_trace_csv", "write_trace_csv", "read_trace_csv",
           "format_report", "write_report", "read_report", "write_gnuplot_script"]

CSV_HEADER = "t_ns,duty,vh,im,wm,fault"


def _num(x: float) -> str:
    return "%.17g" % x


def format_trace_csv(trace: Trace) -> str:
    if len(trace) == 0:
        raise DomainError("refusing to write an empty trace")
    rows = [CSV_HEADER]
    for t, d, vh, im, wm, f in zip(trace.t.tolist(), trace.duty.tolist(), trace.vh.tolist(),
                                   trace.im.tolist(), trace.wm.tolist(), trace.fault.tolist()):
        rows.append(f"{t},{_num(d)},{_num(vh)},{_num(im)},{_num(wm)},{int(f)}")
    return "\n".join(rows) + "\n"


def write_trace_csv(trace: Trace, path: str | Path) -> None:
    """Write ``trace`` as CSV with 17 significant digits per float."""
    text = format_trace_csv(trace)
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write trace {path}: {exc.strerror or exc}") from exc


def read_trace_csv(path: str | Path) -> Trace:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise DomainError(f"{path}: not a trace file (header {lines[:1]})")
    cols: list[list] = [[], [], [], [], [], []]
    for line in lines[1:]:
        t, d, vh, im, wm, f = line.split(",")
        for col, v in zip(cols, (int(t), float(d), float(vh), float(im), float(wm), f == "1")):
            col.append(v)
    return Trace.from_columns(*cols)


def format_report(fields: Mapping[str, object]) -> str:
    def fmt(v: object) -> str:
        if v is None:
            return "none"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return _num(v)
        return str(v)

    return "".join(f"{k} = {fmt(v)}\n" for k, v in fields.items())


def write_report(fields: Mapping[str, object], path: str | Path) -> None:
    path = Path(path)
    try:
        path.write_text(format_report(fields))
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc.strerror or exc}") from exc


def read_report(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out


def write_gnuplot_script(csv_path: str | Path, script_path: str | Path, title: str = "") -> None:
    """Companion script: speed on top, current (and fault flag) below."""
    csv_path = Path(csv_path)
    script = f"""\
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 1000,700
set output '{csv_path.with_suffix('.png').name}'
set multiplot layout 2,1 title '{title}'
set ylabel 'speed (rad/s)'
plot '{csv_path.name}' using ($1*1e-9):5 with lines title 'wm'
set xlabel 'time (s)'
set ylabel 'current (A)'
plot '{csv_path.name}' using ($1*1e-9):4 with lines title 'im', \\
     '' using ($1*1e-9):($6*10) with steps title 'fault x10'
unset multiplot
"""
    Path(script_path).write_text(script)
