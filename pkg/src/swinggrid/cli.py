"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 numerical
failure. Every output file embeds a manifest tracing it to its inputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io_files
from .dynamics import IntegralForm, NumericalInstability, SimConfig
from .grid_model import PowerGrid, validate
from .io_files import FormatError, RunManifest
from .layer_topology import (
    ControlLayer,
    component_count,
    derive_extended,
    derive_local,
    gen_er,
)
from .presets import PRESETS, build_grid
from .scenario import (
    PerturbationSchedule,
    SweepSpec,
    critical_scan,
    gp_curve,
    pinning_mask,
    run_scenario,
    sweep_gains,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise CliError(EXIT_USAGE, f"bad numeric list {text!r}") from None


def _load_grid(path: str, preset: str | None) -> PowerGrid:
    try:
        grid = io_files.load_grid(path)
    except FileNotFoundError:
        raise CliError(EXIT_USAGE, f"grid file not found: {path}") from None
    except FormatError as exc:
        raise CliError(EXIT_VALIDATION, str(exc)) from None
    if preset and preset != "none":
        # re-parameterize the loaded topology homogeneously
        gens = set(grid.generator_ids)
        grid = build_grid(grid.adjacency(), gens, PRESETS[preset])
    return grid


def _load_layer(value: str, grid: PowerGrid, pinning: str) -> ControlLayer:
    if value == "physical":
        layer = ControlLayer(grid.adjacency(), pinning_mask(grid, pinning), 0.0)
    else:
        try:
            layer = io_files.load_layer(value)
        except FileNotFoundError:
            raise CliError(EXIT_USAGE, f"layer file not found: {value}") from None
        except FormatError as exc:
            raise CliError(EXIT_VALIDATION, str(exc)) from None
        if layer.n != grid.n_nodes:
            raise CliError(EXIT_VALIDATION,
                           f"layer size {layer.n} does not match grid N={grid.n_nodes}")
    return layer


def _config(args) -> SimConfig:
    return SimConfig(
        dt=args.dt,
        t_end=args.t_end,
        record_stride=args.record_stride,
        integral_form=IntegralForm(args.integral_form),
        relax_tol=args.relax_tol,
    )


def _manifest(args, command: str, **datasets) -> RunManifest:
    config = {k: v for k, v in sorted(vars(args).items())
              if isinstance(v, (int, float, str, bool, type(None)))}
    return RunManifest(
        command=command,
        preset=getattr(args, "preset", None),
        seeds={"seed": args.seed} if getattr(args, "seed", None) is not None else {},
        datasets={k: str(v) for k, v in datasets.items() if v},
        config=config,
    )


def _add_common(p, with_schedule=True):
    p.add_argument("--preset", choices=[*sorted(PRESETS), "none"], default=None,
                   help="re-parameterize the grid with a named preset "
                        "('none' keeps the file's parameters)")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--record-stride", type=int, default=10)
    p.add_argument("--relax-tol", type=float, default=1e-6)
    p.add_argument("--integral-form", default="frequency-integral",
                   choices=[f.value for f in IntegralForm])
    if with_schedule:
        p.add_argument("--t-on", type=float, default=200.0)
        p.add_argument("--t-off", type=float, default=1200.0)
        p.add_argument("--t-end", type=float, default=1400.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swinggrid",
        description="Swing-equation power grids with cascading line failures "
                    "under distributed proportional-integral control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a grid file")
    p.add_argument("grid")

    p = sub.add_parser("gen-er", help="generate an Erdos-Renyi control layer")
    p.add_argument("-n", "--nodes", type=int, required=True)
    p.add_argument("-p", "--probability", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("derive-topology",
                       help="derive a generator-local or extended control layer")
    p.add_argument("variant", choices=["local", "extended"])
    p.add_argument("--grid", required=True, help="grid file (defines the generators)")
    p.add_argument("--base", default="physical",
                   help="base adjacency: 'physical' or a layer file")
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("simulate", help="run one node-fault scenario")
    p.add_argument("--grid", required=True)
    p.add_argument("--prop-layer", default="physical")
    p.add_argument("--int-layer", default="physical")
    p.add_argument("--prop-pinning", choices=["all", "generators"], default="all")
    p.add_argument("--int-pinning", choices=["all", "generators"], default="generators")
    p.add_argument("--gp", type=float, default=0.0)
    p.add_argument("--gi", type=float, default=0.0)
    p.add_argument("--node", type=int, required=True, help="faulted node (1-based)")
    p.add_argument("--cyber-cofail", action="store_true")
    p.add_argument("--timeseries", default=None)
    p.add_argument("--events", default=None)
    _add_common(p)

    p = sub.add_parser("critical-scan",
                       help="uncontrolled removal scan over every node")
    p.add_argument("--grid", required=True)
    p.add_argument("-o", "--out", required=True)
    _add_common(p)
    p.set_defaults(preset="critical-scan")

    p = sub.add_parser("gp-curve",
                       help="overload-trip count vs proportional gain for one node")
    p.add_argument("--grid", required=True)
    p.add_argument("--prop-layer", default="physical")
    p.add_argument("--prop-pinning", choices=["all", "generators"], default="all")
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--gp", required=True, help="comma-separated gain list")
    p.add_argument("-o", "--out", required=True)
    _add_common(p)

    p = sub.add_parser("sweep", help="dense (G_P, G_I) outcome map")
    p.add_argument("--grid", required=True)
    p.add_argument("--prop-layer", default="physical")
    p.add_argument("--int-layer", default="physical")
    p.add_argument("--prop-pinning", choices=["all", "generators"], default="all")
    p.add_argument("--int-pinning", choices=["all", "generators"], default="generators")
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--gp", required=True, help="comma-separated gain list")
    p.add_argument("--gi", required=True, help="comma-separated gain list")
    p.add_argument("--cyber-cofail", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--out", required=True)
    _add_common(p)

    return parser


def _cmd_validate(args) -> int:
    try:
        grid = io_files.load_grid(args.grid)
    except FileNotFoundError:
        raise CliError(EXIT_USAGE, f"grid file not found: {args.grid}") from None
    except FormatError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    violations = validate(grid)
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return EXIT_VALIDATION
    print(f"ok: N={grid.n_nodes} E={grid.n_lines} N_g={grid.n_generators}")
    return EXIT_OK


def _cmd_gen_er(args) -> int:
    try:
        adjacency = gen_er(args.nodes, args.probability, args.seed)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    layer = ControlLayer(adjacency, np.ones(args.nodes, dtype=np.int8), 0.0)
    manifest = _manifest(args, "gen-er")
    io_files.save_layer(args.out, layer, manifest)
    print(f"wrote {args.out}: N={args.nodes} edges={int(adjacency.sum()) // 2} "
          f"components={component_count(adjacency)}")
    return EXIT_OK


def _cmd_derive_topology(args) -> int:
    grid = _load_grid(args.grid, None)
    gens = set(grid.generator_ids)
    if args.base == "physical":
        base = grid.adjacency()
    else:
        base = _load_layer(args.base, grid, "all").adjacency
    derive = derive_local if args.variant == "local" else derive_extended
    out_adj = derive(base.astype(np.int8), gens)
    layer = ControlLayer(out_adj, pinning_mask(grid, "generators"), 0.0)
    manifest = _manifest(args, "derive-topology", grid=args.grid, base=args.base)
    io_files.save_layer(args.out, layer, manifest)
    print(f"wrote {args.out}: edges={int(out_adj.sum()) // 2}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    grid = _load_grid(args.grid, args.preset)
    prop = _load_layer(args.prop_layer, grid, args.prop_pinning).with_gain(args.gp)
    intg = _load_layer(args.int_layer, grid, args.int_pinning).with_gain(args.gi)
    config = _config(args)
    schedule = PerturbationSchedule(node=args.node - 1, t_on=args.t_on,
                                    t_off=args.t_off, cyber_cofail=args.cyber_cofail)
    try:
        schedule.check(config.t_end)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    try:
        outcome, series = run_scenario(grid, prop, intg, schedule, config)
    except NumericalInstability as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NUMERICAL
    manifest = _manifest(args, "simulate", grid=args.grid,
                         prop_layer=args.prop_layer, int_layer=args.int_layer)
    if args.timeseries:
        io_files.write_timeseries(args.timeseries, series, manifest)
    if args.events:
        io_files.write_events(args.events, outcome.events, manifest)
    print(f"feasible={outcome.feasible} stable={outcome.stable} "
          f"n_c_during={outcome.n_c_during} n_c_after={outcome.n_c_after} "
          f"n_active_final={outcome.n_active_final} final_r={outcome.final_r:.6g}")
    if not outcome.stable:
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_critical_scan(args) -> int:
    grid = _load_grid(args.grid, args.preset)
    config = _config(args)
    try:
        result = critical_scan(grid, config, t_on=args.t_on, t_off=args.t_off)
    except RuntimeError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NUMERICAL
    manifest = _manifest(args, "critical-scan", grid=args.grid)
    rows = [f"# manifest {manifest.to_json()}", "node,n_c,critical"]
    for node in sorted(result.n_c_by_node):
        c = result.n_c_by_node[node]
        rows.append(f"{node + 1},{c},{int(node in result.critical)}")
    Path(args.out).write_text("\n".join(rows) + "\n")
    crit = sorted(n + 1 for n in result.critical)
    print(f"critical nodes: {len(crit)} -> {crit}")
    return EXIT_OK


def _cmd_gp_curve(args) -> int:
    grid = _load_grid(args.grid, args.preset)
    prop = _load_layer(args.prop_layer, grid, args.prop_pinning)
    config = _config(args)
    gp_values = _parse_float_list(args.gp)
    schedule = PerturbationSchedule(node=args.node - 1, t_on=args.t_on, t_off=args.t_off)
    curve = gp_curve(grid, prop, args.node - 1, gp_values, config, schedule)
    manifest = _manifest(args, "gp-curve", grid=args.grid, prop_layer=args.prop_layer)
    rows = [f"# manifest {manifest.to_json()}", "gp,n_c"]
    rows += [f"{io_files._fmt(gp)},{nc}" for gp, nc in curve]
    Path(args.out).write_text("\n".join(rows) + "\n")
    print(" ".join(f"{gp:g}:{nc}" for gp, nc in curve))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    grid = _load_grid(args.grid, args.preset)
    prop = _load_layer(args.prop_layer, grid, args.prop_pinning)
    intg = _load_layer(args.int_layer, grid, args.int_pinning)
    config = _config(args)
    schedule = PerturbationSchedule(node=args.node - 1, t_on=args.t_on,
                                    t_off=args.t_off, cyber_cofail=args.cyber_cofail)
    spec = SweepSpec(
        gp_values=_parse_float_list(args.gp), gi_values=_parse_float_list(args.gi),
        grid=grid, prop_layer=prop, int_layer=intg, schedule=schedule, config=config,
    )
    try:
        spec.check()
        schedule.check(config.t_end)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    result = sweep_gains(spec, parallelism=args.workers)
    manifest = _manifest(args, "sweep", grid=args.grid,
                         prop_layer=args.prop_layer, int_layer=args.int_layer)
    io_files.write_sweep(args.out, result, manifest)
    n_ok = sum(o.n_c_after == 0 and o.stable for row in result.outcomes for o in row)
    print(f"wrote {args.out}: {len(spec.gp_values)}x{len(spec.gi_values)} cells, "
          f"{n_ok} with no overload trips")
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "gen-er": _cmd_gen_er,
    "derive-topology": _cmd_derive_topology,
    "simulate": _cmd_simulate,
    "critical-scan": _cmd_critical_scan,
    "gp-curve": _cmd_gp_curve,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
