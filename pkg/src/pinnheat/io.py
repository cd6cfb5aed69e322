"""On-disk formats: parameter snapshots, run manifests, CSV tables, VTK legacy fields.

Snapshot file layout::

    PINNHEAT-SNAPSHOT 1\\n
    <one line of JSON header>\\n
    <n_params float64 little-endian values>

Parameters are ordered layer by layer; within a layer the (fan_in, fan_out)
weight matrix comes first in row-major order, then the bias vector.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import SimulationConfig, config_from_dict
from .fem import FemMesh, FemSolution
from .network import Architecture, NetworkParams, Normalization
from .training import HISTORY_COLUMNS, WindowSnapshot

SNAPSHOT_MAGIC = b"PINNHEAT-SNAPSHOT 1\n"
PARAM_ORDER = "layer-major; weight (fan_in, fan_out) row-major, then bias"


class FormatError(ValueError):
    pass


def _fmt(v: float) -> str:
    return repr(float(v))


def _stamp(config_hash: str, seed: int, **extra) -> str:
    items = [f"config_hash={config_hash}", f"seed={seed}"]
    items += [f"{k}={v}" for k, v in extra.items()]
    return "# " + " ".join(items) + "\n"


def write_snapshot(path, snap: WindowSnapshot, config_hash: str = "", seed: int = 0) -> Path:
    path = Path(path)
    arch = snap.params.arch
    header = {
        "window_index": snap.index,
        "t0": snap.t0,
        "t1": snap.t1,
        "arch": {"hidden_layers": arch.hidden_layers, "hidden_width": arch.hidden_width,
                 "activation": arch.activation},
        "normalization": snap.norm.to_dict(),
        "n_params": arch.n_params,
        "param_order": PARAM_ORDER,
        "final_losses": snap.final_losses,
        "config_hash": config_hash,
        "seed": seed,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(blob + b"\n")
        fh.write(snap.params.flat.astype("<f8").tobytes())
    return path


def read_snapshot(path) -> tuple[WindowSnapshot, dict]:
    data = Path(path).read_bytes()
    if not data.startswith(SNAPSHOT_MAGIC):
        raise FormatError(f"{path}: not a snapshot file")
    rest = data[len(SNAPSHOT_MAGIC):]
    nl = rest.index(b"\n")
    header = json.loads(rest[:nl])
    payload = np.frombuffer(rest[nl + 1:], dtype="<f8").astype(np.float64)
    arch = Architecture(header["arch"]["hidden_layers"], header["arch"]["hidden_width"],
                        header["arch"]["activation"])
    if payload.size != header["n_params"] or payload.size != arch.n_params:
        raise FormatError(f"{path}: expected {arch.n_params} parameters, found {payload.size}")
    snap = WindowSnapshot(header["window_index"], header["t0"], header["t1"],
                          NetworkParams(arch, payload), Normalization.from_dict(header["normalization"]),
                          header.get("final_losses", {}))
    return snap, header


def write_loss_csv(path, history: np.ndarray, config_hash: str = "", seed: int = 0,
                   window: int | None = None) -> Path:
    path = Path(path)
    extra = {} if window is None else {"window": window}
    with open(path, "w") as fh:
        fh.write(_stamp(config_hash, seed, **extra))
        fh.write(",".join(HISTORY_COLUMNS) + "\n")
        for row in history:
            fh.write(",".join([str(int(row[0]))] + [_fmt(v) for v in row[1:]]) + "\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Column names and float data of a CSV written by this module (comments skipped)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    cols = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]]).reshape(-1, len(cols))
    return cols, data


def write_table(path, columns, data, config_hash: str = "", seed: int = 0, **extra) -> Path:
    path = Path(path)
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    with open(path, "w") as fh:
        fh.write(_stamp(config_hash, seed, **extra))
        fh.write(",".join(columns) + "\n")
        for row in data:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def write_profile_csv(path, s, temps, **stamp) -> Path:
    return write_table(path, ("s_mm", "temperature_K"), np.column_stack([s, temps]), **stamp)


def write_field_csv(path, pts, u, **stamp) -> Path:
    pts = np.asarray(pts)
    return write_table(path, ("x_mm", "y_mm", "t_s", "u_K"), np.column_stack([pts[:, :3], u]), **stamp)


def write_vtk_structured_points(path, values, origin, spacing, name="temperature",
                                config_hash: str = "", seed: int = 0, t: float | None = None) -> Path:
    """ASCII legacy VTK for values on a regular (ny, nx) grid; x varies fastest."""
    values = np.asarray(values, dtype=np.float64)
    ny, nx = values.shape
    title = f"pinnheat config_hash={config_hash} seed={seed}" + ("" if t is None else f" t={t!r}")
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} 1",
        f"ORIGIN {_fmt(origin[0])} {_fmt(origin[1])} 0.0",
        f"SPACING {_fmt(spacing[0])} {_fmt(spacing[1])} 1.0",
        f"POINT_DATA {nx * ny}",
        f"SCALARS {name} double 1",
        "LOOKUP_TABLE default",
    ]
    lines += [_fmt(v) for v in values.ravel()]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def read_vtk_structured_points(path):
    """Parse the subset of legacy VTK written above; returns (values (ny, nx), origin, spacing)."""
    tokens = Path(path).read_text().split("\n")
    if not tokens[0].startswith("# vtk DataFile"):
        raise FormatError(f"{path}: missing VTK header")
    if tokens[2].strip() != "ASCII" or tokens[3].split()[1] != "STRUCTURED_POINTS":
        raise FormatError(f"{path}: only ASCII STRUCTURED_POINTS is supported")
    meta, i = {}, 4
    while not tokens[i].startswith("LOOKUP_TABLE"):
        parts = tokens[i].split()
        meta[parts[0]] = parts[1:]
        i += 1
    nx, ny, nz = map(int, meta["DIMENSIONS"])
    n = int(meta["POINT_DATA"][0])
    vals = np.array(" ".join(tokens[i + 1:]).split(), dtype=np.float64)
    if vals.size != n or n != nx * ny * nz:
        raise FormatError(f"{path}: expected {n} values, found {vals.size}")
    origin = tuple(float(v) for v in meta["ORIGIN"])
    spacing = tuple(float(v) for v in meta["SPACING"])
    return vals.reshape(ny, nx), origin, spacing


# ---------------------------------------------------------------------------
# run directories

def write_manifest(out_dir, cfg: SimulationConfig, seed: int, windows: list[dict], kind: str) -> Path:
    manifest = {"kind": kind, "config_hash": cfg.hash(), "seed": seed,
                "windows": windows, "config": cfg.to_dict()}
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(run_dir) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"{run_dir}: no manifest.json")
    return json.loads(path.read_text())


def load_snapshots(run_dir) -> list[WindowSnapshot]:
    manifest = read_manifest(run_dir)
    if manifest.get("kind") != "pinn":
        raise FormatError(f"{run_dir}: not a PINN run directory")
    return [read_snapshot(Path(run_dir) / w["snapshot"])[0] for w in manifest["windows"]]


def load_run_config(run_dir) -> SimulationConfig:
    return config_from_dict(read_manifest(run_dir)["config"])


def save_fem_solution(path, sol: FemSolution, config_hash: str = "", seed: int = 0) -> Path:
    m = sol.mesh
    np.savez(path, nodes=m.nodes, triangles=m.triangles, boundary_edges=m.boundary_edges,
             boundary_ids=m.boundary_ids, grid=np.array([m.h, m.nx, m.ny, m.length, m.width]),
             times=sol.times, u=sol.u, config_hash=np.array(config_hash), seed=np.array(seed))
    return Path(path)


def load_fem_solution(path) -> FemSolution:
    with np.load(path) as z:
        h, nx, ny, length, width = z["grid"]
        mesh = FemMesh(z["nodes"], z["triangles"], z["boundary_edges"], z["boundary_ids"],
                       float(h), int(nx), int(ny), float(length), float(width))
        return FemSolution(mesh, z["times"], z["u"])
