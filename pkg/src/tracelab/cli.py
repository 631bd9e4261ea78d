"""Command line entry point ``trace-lab``.

Suites:   trace-lab <suite> --config FILE --out DIR [--seed N] [--depth D]
Tools:    trace-lab tile | norm | extend ...
Exit status: 0 pass, 1 property failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from . import io as tio
from .extension import extend_limiting
from .harness import (SUITES, ConfigError, ExperimentConfig, built_system, make_weight,
                      run_verification_suite, uniform_levels)
from .norms import BesovParams, InadmissibleSystem, besov_variable_norm, z_functional
from .render import report_svg, system_svg
from .weights import WeightScales

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return data or {}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trace-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUITES:
        sp = sub.add_parser(name, help=f"run the {name} suite")
        sp.add_argument("--config")
        sp.add_argument("--out", default="out")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--depth", type=int)

    tp = sub.add_parser("tile", help="build an admissible system and write it with an SVG")
    tp.add_argument("--config")
    tp.add_argument("--out", default="out")
    tp.add_argument("--depth", type=int)
    tp.add_argument("--schedule", type=int, nargs="+")
    tp.add_argument("--r", type=int)

    np_ = sub.add_parser("norm", help="Besov-type norm or Z functional of a sampled function")
    np_.add_argument("--phi", required=True)
    np_.add_argument("--config")
    np_.add_argument("--system")
    np_.add_argument("--kind", choices=("besov", "z"), default="besov")
    np_.add_argument("--l", type=int, default=2)
    np_.add_argument("--k-max", type=int)
    np_.add_argument("--out", default="out")

    ep = sub.add_parser("extend", help="limiting extension of a sampled function")
    ep.add_argument("--phi", required=True)
    ep.add_argument("--system", required=True)
    ep.add_argument("--config")
    ep.add_argument("--t-depth", type=int, default=4)
    ep.add_argument("--out", default="out")
    return p


def _weight_from(raw: dict, n: int):
    spec = raw.get("weight") or (raw.get("weights") or [{"kind": "constant"}])[0]
    return make_weight(spec, n)


def _run_suite(args) -> int:
    cfg = ExperimentConfig.from_dict(load_config(args.config), args.command, args.seed,
                                     args.depth)
    report = run_verification_suite(cfg)
    out = Path(args.out)
    tio.write_text(out / f"{cfg.suite}.csv", report.to_csv())
    tio.write_text(out / f"{cfg.suite}.txt", report.to_text())
    sys.stdout.write(report.to_text())
    return EXIT_OK if report.passed else EXIT_FAIL


def _run_tile(args) -> int:
    raw = load_config(args.config)
    raw.pop("suite", None)
    cfg = ExperimentConfig.from_dict(raw, "admissibility", depth=args.depth)
    win = cfg.window()
    w = cfg.weight_objects[0]
    levels = args.schedule or (cfg.schedules[0] if cfg.schedules else uniform_levels(cfg.d_max))
    system = built_system(w, win, levels, args.r or cfg.r)
    out = Path(args.out)
    tio.write_text(out / "system.txt", tio.dumps_system(system))
    if win.n <= 2:
        tio.write_text(out / "system.svg", system_svg(system))
    sys.stdout.write(f"{len(system.stages)} stages at levels {system.schedule}, q={system.q:.6g}\n")
    return EXIT_OK


def _run_norm(args) -> int:
    raw = load_config(args.config)
    phi = tio.read_grid_function(tio.read_text(args.phi))
    if args.system:
        system = tio.loads_system(tio.read_text(args.system))
        win = system.window
    else:
        win = phi.window
    w = _weight_from(raw, win.n)
    scales = WeightScales(w, win)
    if args.kind == "besov":
        k_max = args.k_max or min(win.d_max, phi.depth)
        report = besov_variable_norm(phi, scales, BesovParams(args.l, k_max))
    else:
        if not args.system:
            raise ConfigError("--kind z needs --system")
        try:
            report = z_functional(phi, system, scales)
        except InadmissibleSystem as exc:
            sys.stderr.write(f"inadmissible system: {exc}\n")
            return EXIT_FAIL
    out = Path(args.out)
    tio.write_text(out / f"{report.name}.csv", tio.norm_report_csv(report))
    tio.write_text(out / f"{report.name}.svg", report_svg(report))
    sys.stdout.write(f"{report.name} = {report.value!r}\n")
    return EXIT_OK


def _run_extend(args) -> int:
    raw = load_config(args.config)
    phi = tio.read_grid_function(tio.read_text(args.phi))
    system = tio.loads_system(tio.read_text(args.system))
    w = _weight_from(raw, system.window.n)
    f = extend_limiting(phi, system, w)
    out = Path(args.out)
    tio.write_text(out / "extension.csv",
                   tio.half_space_csv(f, system.window, phi.depth, args.t_depth))
    sys.stdout.write(f"wrote {out / 'extension.csv'}\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command in SUITES:
            return _run_suite(args)
        return {"tile": _run_tile, "norm": _run_norm, "extend": _run_extend}[args.command](args)
    except (ConfigError, tio.FormatError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
