import csv
import io
import warnings
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from tracelab import io as tio
from tracelab.functions import NormReport
from tracelab.geometry import Window
from tracelab.harness import grid_sample, raw_system
from tracelab.render import report_svg, system_svg
from tracelab.tilings import TruncationWarning, build_admissible_system, random_tiling
from tracelab.weights import PowerWeight, WeightScales, q_parameters

SVG = "{http://www.w3.org/2000/svg}"


def power_system(n=1):
    w = PowerWeight(0.75)
    win = Window(n, 2 if n == 1 else 1, 5)
    scales = WeightScales(w, win)
    return raw_system(w, win, [0, 1, 2, 3, 5], scales), scales


def test_tiling_round_trip():
    win = Window(2, 2, 4, k0=1)
    t = random_tiling(win, np.random.default_rng(0))
    t.colors[t.cubes[0]] = "blue"
    back = tio.loads_tiling(tio.dumps_tiling(t))
    assert back.window == win and back.cubes == t.cubes and back.colors == t.colors


@pytest.mark.parametrize("n", [1, 2])
def test_system_round_trip_is_exact(n):
    system, _ = power_system(n)
    text = tio.dumps_system(system)
    back = tio.loads_system(text)
    assert back.window == system.window
    assert back.schedule == system.schedule
    assert back.q == system.q and back.c2 == system.c2
    assert [s.cubes for s in back.stages] == [s.cubes for s in system.stages]
    assert [s.colors for s in back.stages] == [s.colors for s in system.stages]
    assert [sorted(s) for s in back.selected] == [sorted(s) for s in system.selected]
    assert tio.dumps_system(back) == text


def test_built_system_round_trip_keeps_flags():
    w = PowerWeight(0.5)
    win = Window(1, 2, 3)
    q = q_parameters(w, win, 3).q_construction
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        system = build_admissible_system(w, win, [0, 1, 2, 3], q)
    back = tio.loads_system(tio.dumps_system(system))
    assert back.truncated == system.truncated and back.raw_schedule == system.raw_schedule


@pytest.mark.parametrize("text", ["", "1 2 3\n", "1 1 3 0\nschedule 0\n"])
def test_malformed_system_is_rejected(text):
    with pytest.raises(tio.FormatError):
        tio.loads_system(text)


def test_malformed_tiling_record_is_rejected():
    with pytest.raises(tio.FormatError):
        tio.loads_tiling("1 1 3 0\n2 0\n")


def test_grid_function_round_trip():
    win = Window(2, 1, 3)
    phi = grid_sample(lambda p: np.sin(3 * p[:, 0]) + p[:, 1] ** 2, win, 4)
    back = tio.read_grid_function(tio.grid_function_csv(phi))
    assert back.depth == 4 and np.array_equal(back.values, phi.values)


def test_grid_function_missing_samples():
    win = Window(1, 1, 2)
    text = tio.grid_function_csv(grid_sample(lambda p: p[:, 0], win, 2))
    with pytest.raises(tio.FormatError):
        tio.read_grid_function("\n".join(text.splitlines()[:-1]))


def test_scales_csv_rows():
    _, scales = power_system()
    rows = list(csv.reader(io.StringIO(tio.scales_csv(scales))))
    assert rows[0] == ["k", "m1", "hat_gamma"]
    assert len(rows) - 1 == sum(t.size for t in scales.hat)
    k, m, g = rows[5]
    assert float(g) == scales.hat_gamma(int(k), (int(m),))


def test_norm_report_csv_has_fixed_header():
    rep = NormReport.from_terms([("level0 m=0", 1.5), ("level1 m=0", 0.25)], name="besov")
    rows = list(csv.reader(io.StringIO(tio.norm_report_csv(rep))))
    assert rows[0] == ["name", "term", "value"]
    assert rows[1:] == [["besov", "level0 m=0", "1.5"], ["besov", "level1 m=0", "0.25"]]


def test_unreadable_path_names_the_file(tmp_path):
    missing = tmp_path / "nope.txt"
    with pytest.raises(OSError, match="nope.txt"):
        tio.read_text(missing)


@pytest.mark.parametrize("n", [1, 2])
def test_system_svg_has_one_layer_per_stage(n):
    system, _ = power_system(n)
    root = ET.fromstring(system_svg(system))
    layers = root.findall(f"{SVG}g")
    assert [g.get("id") for g in layers] == [f"stage-{s}" for s in range(len(system.stages))]
    for g, stage in zip(layers, system.stages):
        assert len(g.findall(f"{SVG}rect")) == len(stage.cubes)


def test_report_svg_parses():
    rep = NormReport.from_terms([("level0 m=0", 1.0), ("level1 m=0", 2.0), ("level1 m=1", 3.0)])
    root = ET.fromstring(report_svg(rep))
    assert len(root.findall(f"{SVG}rect")) == 2
    root = ET.fromstring(report_svg(rep, grouped=False))
    assert len(root.findall(f"{SVG}rect")) == 3
