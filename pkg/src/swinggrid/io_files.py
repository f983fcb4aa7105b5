"""File formats and run manifests.

All formats are line-oriented text with 1-based node ids. Every file
starts with a `format <kind> <major>` line; loaders reject unknown
majors. Floats are written with 17 significant digits so a round-trip is
lossless.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid_model import GridLine, GridNode, NodeKind, PowerGrid, validate
from .layer_topology import ControlLayer
from .scenario import SweepResult

GRID_FORMAT_MAJOR = 1
LAYER_FORMAT_MAJOR = 1
FILE_FORMAT_VERSION = "1"

TIMESERIES_COLUMNS = ["t", "r", "phi", "delta_omega", "mean_omega",
                      "power_loss", "n_failed", "n_active_links"]
SWEEP_COLUMNS = ["gp", "gi", "n_c_during", "n_c_after", "n_active_final",
                 "mean_delta_omega_during", "mean_delta_omega_after",
                 "final_r", "stable", "feasible"]


class FormatError(ValueError):
    """Parse or validation failure, with the offending line number."""

    def __init__(self, path, lineno: int | None, message: str):
        loc = f"{path}:{lineno}: " if lineno is not None else f"{path}: "
        super().__init__(loc + message)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class RunManifest:
    command: str
    preset: str | None = None
    seeds: dict = field(default_factory=dict)
    datasets: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    format_version: str = FILE_FORMAT_VERSION

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def to_json(self) -> str:
        payload = {
            "format_version": self.format_version,
            "command": self.command,
            "preset": self.preset,
            "seeds": self.seeds,
            "datasets": self.datasets,
            "config": self.config,
            "config_hash": self.config_hash,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _manifest_comment(manifest: RunManifest | None) -> list[str]:
    if manifest is None:
        return []
    return [f"# manifest {manifest.to_json()}"]


def _read_format_line(path, lines, kind: str, major: int):
    for lineno, raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] != "format":
            raise FormatError(path, lineno, f"expected 'format {kind} <major>' header, got {line!r}")
        if parts[1] != kind:
            raise FormatError(path, lineno, f"expected a {kind} file, got {parts[1]!r}")
        try:
            file_major = int(parts[2])
        except ValueError:
            raise FormatError(path, lineno, f"bad format version {parts[2]!r}") from None
        if file_major != major:
            raise FormatError(path, lineno,
                              f"unsupported {kind} format major {file_major} (expected {major})")
        return
    raise FormatError(path, None, "empty file")


def save_grid(path, grid: PowerGrid, manifest: RunManifest | None = None) -> None:
    lines = [f"format grid {GRID_FORMAT_MAJOR}"]
    lines += _manifest_comment(manifest)
    for n in grid.nodes:
        kind = "generator" if n.kind is NodeKind.GENERATOR else "load"
        lines.append(f"node {n.id + 1} {kind} {_fmt(n.power)} {_fmt(n.inertia)} {_fmt(n.damping)}")
    for l in grid.lines:
        i, j = l.endpoints
        lines.append(f"edge {i + 1} {j + 1} {_fmt(l.coupling)} {_fmt(l.capacity_fraction)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_grid(path) -> PowerGrid:
    raw_lines = list(enumerate(Path(path).read_text().splitlines(), start=1))
    it = iter(raw_lines)
    _read_format_line(path, it, "grid", GRID_FORMAT_MAJOR)
    nodes: list[GridNode] = []
    lines: list[GridLine] = []
    for lineno, raw in it:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "node":
                if len(parts) != 6:
                    raise ValueError("expected: node <id> <kind> <P> <I> <gamma>")
                kind = {"generator": NodeKind.GENERATOR, "load": NodeKind.LOAD}.get(parts[2])
                if kind is None:
                    raise ValueError(f"unknown node kind {parts[2]!r}")
                nodes.append(GridNode(int(parts[1]) - 1, kind, float(parts[3]),
                                      float(parts[4]), float(parts[5])))
            elif parts[0] == "edge":
                if len(parts) != 5:
                    raise ValueError("expected: edge <i> <j> <K> <alpha>")
                lines.append(GridLine(int(parts[1]) - 1, int(parts[2]) - 1,
                                      float(parts[3]), float(parts[4])))
            else:
                raise ValueError(f"unknown directive {parts[0]!r}")
        except ValueError as exc:
            raise FormatError(path, lineno, str(exc)) from None
    nodes.sort(key=lambda n: n.id)
    grid = PowerGrid(nodes=nodes, lines=lines)
    violations = validate(grid)
    if violations:
        raise FormatError(path, None, "invalid grid: " + "; ".join(violations))
    return grid


def save_layer(path, layer: ControlLayer, manifest: RunManifest | None = None) -> None:
    """Adjacency and pinning; the gain is a run-time parameter, not stored."""
    out = [f"format layer {LAYER_FORMAT_MAJOR}"]
    out += _manifest_comment(manifest)
    for i, xi in enumerate(layer.pinning):
        out.append(f"xi {i + 1} {int(xi)}")
    ei, ej = layer.edge_arrays()
    for a, b in zip(ei, ej):
        out.append(f"edge {a + 1} {b + 1}")
    Path(path).write_text("\n".join(out) + "\n")


def load_layer(path) -> ControlLayer:
    raw_lines = list(enumerate(Path(path).read_text().splitlines(), start=1))
    it = iter(raw_lines)
    _read_format_line(path, it, "layer", LAYER_FORMAT_MAJOR)
    xi_entries: dict[int, int] = {}
    edges: list[tuple[int, int]] = []
    for lineno, raw in it:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "xi":
                if len(parts) != 3:
                    raise ValueError("expected: xi <id> <0|1>")
                val = int(parts[2])
                if val not in (0, 1):
                    raise ValueError(f"xi must be 0 or 1, got {val}")
                xi_entries[int(parts[1]) - 1] = val
            elif parts[0] == "edge":
                if len(parts) != 3:
                    raise ValueError("expected: edge <i> <j>")
                edges.append((int(parts[1]) - 1, int(parts[2]) - 1))
            else:
                raise ValueError(f"unknown directive {parts[0]!r}")
        except ValueError as exc:
            raise FormatError(path, lineno, str(exc)) from None
    if not xi_entries:
        raise FormatError(path, None, "layer file has no xi entries")
    n = max(xi_entries) + 1
    if sorted(xi_entries) != list(range(n)):
        raise FormatError(path, None, "xi entries must cover ids 1..N")
    adjacency = np.zeros((n, n), dtype=np.int8)
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise FormatError(path, None, f"bad edge ({i + 1}, {j + 1}) for N={n}")
        adjacency[i, j] = 1
        adjacency[j, i] = 1
    pinning = np.array([xi_entries[i] for i in range(n)], dtype=np.int8)
    return ControlLayer(adjacency=adjacency, pinning=pinning, gain=0.0)


def write_timeseries(path, series: dict[str, np.ndarray],
                     manifest: RunManifest | None = None) -> None:
    rows = _manifest_comment(manifest)
    rows.append(",".join(TIMESERIES_COLUMNS))
    n = series["t"].size
    for s in range(n):
        cells = []
        for col in TIMESERIES_COLUMNS:
            v = series[col][s]
            cells.append(str(int(v)) if col in ("n_failed", "n_active_links") else _fmt(v))
        rows.append(",".join(cells))
    Path(path).write_text("\n".join(rows) + "\n")


def write_sweep(path, result: SweepResult, manifest: RunManifest | None = None) -> None:
    rows = _manifest_comment(manifest)
    rows.append(",".join(SWEEP_COLUMNS))
    for ip, gp in enumerate(result.gp_values):
        for ig, gi in enumerate(result.gi_values):
            o = result.outcomes[ip][ig]
            rows.append(",".join([
                _fmt(gp), _fmt(gi), str(o.n_c_during), str(o.n_c_after),
                str(o.n_active_final), _fmt(o.mean_delta_omega_during),
                _fmt(o.mean_delta_omega_after), _fmt(o.final_r),
                str(int(o.stable)), str(int(o.feasible)),
            ]))
    Path(path).write_text("\n".join(rows) + "\n")


def write_events(path, events, manifest: RunManifest | None = None) -> None:
    payload = {
        "format_version": FILE_FORMAT_VERSION,
        "manifest": json.loads(manifest.to_json()) if manifest else None,
        # subjects are 1-based: node ids for node events, line positions
        # (order in the grid file) for trip events; -1 marks "no subject"
        "events": [{"time": e.time, "kind": e.kind,
                    "subject": e.subject + 1 if e.subject >= 0 else e.subject}
                   for e in events],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
