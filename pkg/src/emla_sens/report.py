"""Serialization of sweep results: per-payload traces, sensitivity table, summary."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .metrics import AGGREGATES, METRICS, SensitivityEntry, SensitivityReport

TRACE_COLUMNS = ["t", "payload", "actuator", "v_x", "f_x", "psi1", "psi2", "psi3_cum", "psi4",
                 "d_psi1_dm", "d_psi2_dm", "d_psi3_dm", "d_psi4_dm"]
SENSITIVITY_COLUMNS = ["payload", "actuator", "metric", "aggregate", "value", "d_value_dm"]


def fmt(x) -> str:
    """17 significant digits; non-finite values become empty fields."""
    x = float(x)
    if not math.isfinite(x):
        return ""
    return format(x, ".17g")


def parse(s: str) -> float:
    return float(s) if s != "" else float("nan")


def trace_rows(entry: SensitivityEntry, names):
    s, d = entry.series, entry.derivatives
    for k in range(len(s.t)):
        for i, name in enumerate(names):
            yield [
                fmt(s.t[k]), fmt(entry.payload), name,
                fmt(s.v_x[k, i]), fmt(s.f_x[k, i]),
                fmt(s.psi1[k, i]), fmt(s.psi2[k, i]), fmt(s.psi3[k, i]), fmt(s.psi4[k, i]),
                fmt(d["psi1"][k, i]), fmt(d["psi2"][k, i]), fmt(d["psi3"][k, i]), fmt(d["psi4"][k, i]),
            ]


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_csv(report: SensitivityReport, path) -> None:
    """Write every time sample of every payload and actuator as one CSV table.

    Undefined efficiency cells are left empty.
    """
    path = Path(path)
    rows = (row for e in report.entries for row in trace_rows(e, report.actuator_names))
    _write(path, TRACE_COLUMNS, rows)


def read_csv(path):
    """Parse a trace or sensitivity CSV back into (header, list of row dicts)."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        out = []
        for row in r:
            out.append({h: (v if h in ("actuator", "metric", "aggregate") else parse(v)) for h, v in zip(header, row)})
    return header, out


def sensitivity_rows(report: SensitivityReport):
    for e in report.entries:
        for i, name in enumerate(report.actuator_names):
            for m in METRICS:
                yield [fmt(e.payload), name, m, AGGREGATES[m],
                       fmt(e.aggregates[m][i]), fmt(e.aggregate_derivatives[m][i])]


def payload_tag(m: float) -> str:
    return f"{m:08.3f}"


def write_outputs(report: SensitivityReport, out_dir, fmt_: str = "csv") -> list:
    """Write ``metrics_<payload>``, ``sensitivity`` and ``summary.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    written = []
    names = report.actuator_names
    for e in report.entries:
        one = SensitivityReport(np.array([e.payload]), names, [e], report.delta_m, report.scheme, report.dt)
        if fmt_ == "csv":
            p = out_dir / f"metrics_{payload_tag(e.payload)}.csv"
            write_csv(one, p)
        else:
            p = out_dir / f"metrics_{payload_tag(e.payload)}.json"
            rows = [dict(zip(TRACE_COLUMNS, r)) for r in trace_rows(e, names)]
            p.write_text(json.dumps([{k: _num(v) if k != "actuator" else v for k, v in r.items()} for r in rows],
                                    indent=1) + "\n")
        written.append(p)
    if fmt_ == "csv":
        p = out_dir / "sensitivity.csv"
        _write(p, SENSITIVITY_COLUMNS, sensitivity_rows(report))
    else:
        p = out_dir / "sensitivity.json"
        rows = [dict(zip(SENSITIVITY_COLUMNS, r)) for r in sensitivity_rows(report)]
        for r in rows:
            r["payload"], r["value"], r["d_value_dm"] = _num(r["payload"]), _num(r["value"]), _num(r["d_value_dm"])
        p.write_text(json.dumps(rows, indent=1) + "\n")
    written.append(p)
    p = out_dir / "summary.json"
    p.write_text(json.dumps(summary(report), indent=2) + "\n")
    written.append(p)
    return written


def _num(s: str):
    return float(s) if s != "" else None


def _clean(a):
    return [None if not math.isfinite(float(x)) else float(x) for x in np.ravel(a)]


def summary(report: SensitivityReport) -> dict:
    names = report.actuator_names
    per = {}
    for i, name in enumerate(names):
        per[name] = {
            "energy_J": _clean([e.aggregates["psi3"][i] for e in report.entries]),
            "d_energy_dm_J_per_kg": _clean([e.aggregate_derivatives["psi3"][i] for e in report.entries]),
            "peak_force_N": _clean([e.aggregates["psi2"][i] for e in report.entries]),
            "peak_power_W": _clean([e.aggregates["psi1"][i] for e in report.entries]),
            "mean_efficiency": _clean([e.aggregates["psi4"][i] for e in report.entries]),
            "peak_motor_torque_Nm": _clean([np.max(np.abs(e.series.motor_torque[:, i])) for e in report.entries]),
            "undefined_psi4_samples": [int(e.series.undefined_psi4[i]) for e in report.entries],
        }
    total = [float(sum(e.aggregates["psi3"])) for e in report.entries]
    return {
        "payload_kg": _clean(report.payloads),
        "actuators": names,
        "delta_m_kg": report.delta_m,
        "scheme": report.scheme,
        "schemes_used": sorted({e.scheme for e in report.entries}),
        "dt_s": report.dt,
        "max_tracking_error_m": report.max_tracking_error,
        "total_energy_J": _clean(total),
        "per_actuator": per,
    }
