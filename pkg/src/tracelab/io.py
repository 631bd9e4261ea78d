"""Plain-text and CSV formats for tilings, systems, scale tables, samples and reports."""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .functions import GridFunction, HalfSpaceFunction, NormReport
from .geometry import DyadicCube, Window
from .tilings import Tiling, TilingSystem
from .weights import WeightScales


class FormatError(ValueError):
    """Malformed input file."""


def _window_header(window: Window) -> str:
    return f"{window.n} {window.M} {window.d_max} {window.k0}"


def _parse_window(line: str) -> Window:
    try:
        n, M, d, k0 = (int(v) for v in line.split())
    except ValueError as exc:
        raise FormatError(f"bad window header {line!r}") from exc
    return Window(n, M, d, k0)


def _cube_line(cube: DyadicCube, color: str | None, extra: str = "") -> str:
    parts = [str(cube.level), *map(str, cube.index), color or "-"]
    if extra:
        parts.append(extra)
    return " ".join(parts)


def _parse_cube(line: str, n: int, extra: bool = False):
    parts = line.split()
    want = n + 2 + (1 if extra else 0)
    if len(parts) != want:
        raise FormatError(f"expected {want} fields in cube record {line!r}")
    cube = DyadicCube(int(parts[0]), tuple(int(v) for v in parts[1:n + 1]))
    color = None if parts[n + 1] == "-" else parts[n + 1]
    return cube, color, (parts[n + 2] if extra else None)


def dumps_tiling(tiling: Tiling) -> str:
    lines = [_window_header(tiling.window)]
    lines += [_cube_line(c, tiling.colors.get(c)) for c in tiling.cubes]
    return "\n".join(lines) + "\n"


def loads_tiling(text: str) -> Tiling:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty tiling file")
    window = _parse_window(lines[0])
    cubes, colors = [], {}
    for ln in lines[1:]:
        cube, color, _ = _parse_cube(ln, window.n)
        cubes.append(cube)
        if color is not None:
            colors[cube] = color
    return Tiling(window, cubes, colors)


def dumps_system(system: TilingSystem) -> str:
    """Window header, parameter lines, then one block per stage.

    Cube records carry a trailing 1/0 marking membership of the selected cover.
    Floats are written with repr so reading back is exact.
    """
    out = [_window_header(system.window),
           "schedule " + " ".join(map(str, system.schedule)),
           "raw_schedule " + " ".join(map(str, system.raw_schedule)),
           f"r {system.r}",
           f"q {system.q!r}",
           f"c1 {system.c1!r}",
           f"c2 {system.c2!r}",
           f"truncated {int(system.truncated)}"]
    for s, (stage, chosen) in enumerate(zip(system.stages, system.selected)):
        keep = set(chosen)
        out.append(f"stage {s} {len(stage.cubes)}")
        out += [_cube_line(c, stage.colors.get(c), "1" if c in keep else "0")
                for c in stage.cubes]
    return "\n".join(out) + "\n"


def loads_system(text: str) -> TilingSystem:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 8:
        raise FormatError("system file too short")
    window = _parse_window(lines[0])
    fields = {}
    for ln in lines[1:8]:
        key, *vals = ln.split()
        fields[key] = vals
    try:
        schedule = [int(v) for v in fields["schedule"]]
        raw = [int(v) for v in fields["raw_schedule"]]
        r = int(fields["r"][0])
        q, c1, c2 = (float(fields[k][0]) for k in ("q", "c1", "c2"))
        truncated = bool(int(fields["truncated"][0]))
    except (KeyError, IndexError, ValueError) as exc:
        raise FormatError(f"bad system parameters: {exc}") from exc
    stages, selected = [], []
    i = 8
    while i < len(lines):
        head = lines[i].split()
        if head[0] != "stage" or len(head) != 3:
            raise FormatError(f"expected stage header, got {lines[i]!r}")
        count = int(head[2])
        cubes, colors, chosen = [], {}, []
        for ln in lines[i + 1:i + 1 + count]:
            cube, color, flag = _parse_cube(ln, window.n, extra=True)
            cubes.append(cube)
            if color is not None:
                colors[cube] = color
            if flag == "1":
                chosen.append(cube)
        if len(cubes) != count:
            raise FormatError(f"stage {head[1]} truncated")
        stages.append(Tiling(window, cubes, colors))
        selected.append(chosen)
        i += 1 + count
    return TilingSystem(window, stages, selected, schedule, r, q, c1, c2, truncated, raw)


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_text(path: str | Path) -> str:
    path = Path(path)
    try:
        return path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


def _csv_text(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(list(header))
    wr.writerows(rows)
    return buf.getvalue()


def scales_csv(scales: WeightScales) -> str:
    n = scales.window.n
    header = ["k"] + [f"m{a + 1}" for a in range(n)] + ["hat_gamma"]
    rows = []
    for k, table in enumerate(scales.hat):
        for m in np.ndindex(*table.shape):
            rows.append([k, *m, repr(float(table[m]))])
    return _csv_text(header, rows)


def grid_function_csv(phi: GridFunction) -> str:
    """First line ``n,M,d`` with its values on the second; then one row per sample."""
    n = phi.window.n
    head = _csv_text(["n", "M", "d"], [[n, phi.window.M, phi.depth]])
    rows = [[*m, repr(float(phi.values[m]))] for m in np.ndindex(*phi.values.shape)]
    return head + _csv_text([f"i{a + 1}" for a in range(n)] + ["value"], rows)


def read_grid_function(text: str, d_max: int | None = None) -> GridFunction:
    lines = text.splitlines()
    if len(lines) < 3 or lines[0].strip() != "n,M,d":
        raise FormatError("grid function CSV must start with the 'n,M,d' header")
    n, M, d = (int(v) for v in lines[1].split(","))
    window = Window(n, M, d if d_max is None else d_max)
    N = M * 2 ** d
    values = np.full((N,) * n, np.nan)
    for row in csv.reader(lines[3:]):
        if not row:
            continue
        idx = tuple(int(v) for v in row[:n])
        values[idx] = float(row[n])
    if np.isnan(values).any():
        raise FormatError("grid function CSV is missing samples")
    return GridFunction(window, d, values)


def half_space_csv(f: HalfSpaceFunction, window: Window, depth: int, t_depth: int) -> str:
    """Samples on cell centres times the graded grid t = j 2^-t_depth, j = 1..T 2^t_depth."""
    N = window.M * 2 ** depth
    c = (np.arange(N) + 0.5) * 2.0 ** -depth
    pts = np.stack([g.ravel() for g in np.meshgrid(*([c] * window.n), indexing="ij")], axis=1)
    ts = np.arange(1, int(window.T * 2 ** t_depth) + 1) * 2.0 ** -t_depth
    rows = []
    for t in ts:
        vals = f.value(pts, np.full(len(pts), t))
        rows += [[*map(repr, map(float, p)), repr(float(t)), repr(float(v))]
                 for p, v in zip(pts, vals)]
    return _csv_text([f"x{a + 1}" for a in range(window.n)] + ["t", "value"], rows)


def norm_report_csv(report: NormReport) -> str:
    """Fixed header ``name,term,value``; one row per term."""
    return _csv_text(["name", "term", "value"],
                     [[report.name, label, repr(v)] for label, v in report.breakdown])


def write_stream(stream: TextIO, text: str):
    stream.write(text)
