"""Diagnostics CSV and JSON snapshots.

Snapshot layout::

    {"format": "msgas-snapshot", "version": 1,
     "metadata": {...}, "fields": {...}, "initial": {"metadata": ..., "fields": ...}}

``fields`` holds row-major nested lists in the fixed order
``x, u, S, r, phi, lamt, mu``. ``x`` is the periodic displacement; the
position is ``x_bg @ m + x`` (recorded as ``"x_convention": "displacement"``).
JSON floats are written with shortest round-trip repr, so a reloaded state
is bitwise identical.
"""

import json
from pathlib import Path

import numpy as np

from . import dynamics as dyn

FIELD_ORDER = ("x", "u", "S", "r", "phi", "lamt", "mu")
FORMAT = "msgas-snapshot"
VERSION = 1


class SnapshotError(ValueError):
    pass


def format_float(v):
    return "%.17g" % float(v)


def csv_header(laws):
    return ",".join(["t", *laws])


def csv_line(row):
    return ",".join(format_float(v) for v in row)


def write_csv(path, laws, rows):
    lines = [csv_header(laws)] + [csv_line(r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    rows = [[float(v) for v in line.split(",")] for line in lines[1:] if line]
    return header, rows


def _state_block(state):
    meta = {
        "t": float(state.t),
        "x_convention": "displacement",
        "x_bg": np.asarray(state.x_bg, dtype=float).tolist(),
        "phi_lin": np.asarray(state.phi_lin, dtype=float).tolist(),
        "K_lin": int(state.K_lin),
    }
    arrays = {
        "x": state.disp, "u": state.u, "S": state.S, "r": state.r,
        "phi": state.phi, "lamt": state.lamt, "mu": state.mu,
    }
    fields = {name: np.asarray(arrays[name], dtype=float).tolist() for name in FIELD_ORDER}
    return meta, fields


def _state_from_block(meta, fields, grid):
    if meta.get("x_convention") != "displacement":
        raise SnapshotError("unsupported position convention")
    missing = [k for k in FIELD_ORDER if k not in fields]
    if missing:
        raise SnapshotError(f"snapshot lacks fields {missing}")
    n = grid.n
    shape = grid.shape
    expected = {
        "x": (n,) + shape, "u": (n,) + shape, "S": shape, "r": shape, "phi": shape,
        "lamt": (meta["K_lin"],) + shape, "mu": (meta["K_lin"],) + shape,
    }
    arr = {}
    for name in FIELD_ORDER:
        a = np.array(fields[name], dtype=float)
        if a.size == 0:
            a = a.reshape(expected[name])  # no Lin pairs: [] loses the grid shape
        if a.shape != expected[name]:
            raise SnapshotError(f"field {name} has shape {a.shape}, expected {expected[name]}")
        arr[name] = a
    return dyn.SimState(
        t=float(meta["t"]),
        disp=arr["x"], u=arr["u"], S=arr["S"], r=arr["r"], phi=arr["phi"],
        lamt=arr["lamt"], mu=arr["mu"],
        x_bg=np.array(meta["x_bg"], dtype=float),
        phi_lin=np.array(meta["phi_lin"], dtype=float),
    )


def save_snapshot(path, scenario, state, initial, steps=None):
    meta, fields = _state_block(state)
    meta["scenario"] = scenario.model_dump(mode="json")
    if steps is not None:
        meta["steps"] = int(steps)
    imeta, ifields = _state_block(initial)
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "metadata": meta,
        "fields": fields,
        "initial": {"metadata": imeta, "fields": ifields},
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_snapshot(path):
    """Return ``(scenario, model, state, initial)``."""
    from . import scenario as scn

    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise SnapshotError(f"{path}: not valid JSON: {err}") from None
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise SnapshotError(f"{path}: not a version-{VERSION} snapshot")
    scenario = scn.parse_scenario(doc["metadata"]["scenario"], path)
    model = scn.build_model(scenario)
    state = _state_from_block(doc["metadata"], doc["fields"], model.grid)
    initial = _state_from_block(doc["initial"]["metadata"], doc["initial"]["fields"], model.grid)
    return scenario, model, state, initial
