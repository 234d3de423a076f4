"""Command-line interface.

Subcommands: propagate, evaluate, sweep, analyze-corrs, gen-synthetic.
Settings resolve as: command-line flags > --config JSON file > built-in
defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .correspondence import DEFAULT_MAG_RADIUS
from .errors import MaskpropError
from .harness import RunConfig, cmd_analyze_corrs, cmd_evaluate, cmd_propagate, cmd_sweep
from .manifest import parse_feature_key
from .metrics import DEFAULT_BOUNDARY_TOLERANCE
from .synthetic import CellSpec, SyntheticSpec, generate

RUN_DEFAULTS = {
    "affinity": "cos",
    "topk": 10,
    "temp": None,
    "memory_n": 8,
    "pin_first": True,
    "filter": "none",
    "mag_radius": DEFAULT_MAG_RADIUS,
    "mag_units": "grid",
    "layer": 3,
    "timestep": 50,
    "threads": 1,
    "seed": 0,
}


def _bool_flag(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {value!r}")


def _int_list(value: str) -> list[int]:
    try:
        return [int(part) for part in value.split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")


def _add_run_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--manifest", required=True, help="dataset manifest JSON")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--config", help="JSON file with defaults for any flag below")
    sp.add_argument("--affinity", choices=("cos", "l1", "l2"), default=None)
    sp.add_argument("--topk", type=int, default=None, help="memory pixels blended per query pixel")
    sp.add_argument("--temp", type=float, default=None, help="softmax temperature")
    sp.add_argument("--memory-n", type=int, default=None, help="memory bank capacity")
    sp.add_argument("--pin-first", type=_bool_flag, default=None, metavar="{true,false}")
    sp.add_argument("--filter", choices=("none", "mag", "oracle"), default=None)
    sp.add_argument("--mag-radius", type=float, default=None,
                    help=f"displacement cutoff (default {DEFAULT_MAG_RADIUS})")
    sp.add_argument("--mag-units", choices=("grid", "image"), default=None,
                    help="units of --mag-radius; image divides by the manifest stride")
    sp.add_argument("--layer", type=int, default=None)
    sp.add_argument("--timestep", type=int, default=None)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)


def _resolve_run_config(args: argparse.Namespace) -> RunConfig:
    settings = dict(RUN_DEFAULTS)
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        unknown = set(loaded) - set(RUN_DEFAULTS)
        if unknown:
            raise MaskpropError(f"unknown config keys {sorted(unknown)}")
        settings.update(loaded)
    for key in RUN_DEFAULTS:
        flag_value = getattr(args, key.replace("-", "_"), None)
        if flag_value is not None:
            settings[key] = flag_value
    return RunConfig(
        manifest=Path(args.manifest),
        out=Path(args.out),
        similarity=settings["affinity"],
        topk=settings["topk"],
        temperature=settings["temp"],
        memory_size=settings["memory_n"],
        pin_first=settings["pin_first"],
        filter_kind=settings["filter"],
        mag_radius=settings["mag_radius"],
        mag_units=settings["mag_units"],
        layer=settings["layer"],
        timestep=settings["timestep"],
        threads=settings["threads"],
        seed=settings["seed"],
    )


def _parse_cells(value: str) -> list[CellSpec]:
    """Parse "L3_T0:0.0,L3_T50:0.5[:sep]" into per-cell noise overrides."""
    cells = []
    for part in value.split(","):
        pieces = part.split(":")
        layer, timestep = parse_feature_key(pieces[0])
        noise = float(pieces[1]) if len(pieces) > 1 else None
        separation = float(pieces[2]) if len(pieces) > 2 else None
        cells.append(CellSpec(layer=layer, timestep=timestep, noise=noise, separation=separation))
    return cells


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maskprop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("propagate", help="propagate first-frame masks through videos")
    _add_run_flags(sp)

    se = sub.add_parser("evaluate", help="score predicted masks against ground truth")
    se.add_argument("--pred", required=True, help="prediction directory (one subdir per video)")
    se.add_argument("--gt", required=True, help="ground-truth directory (one subdir per video)")
    se.add_argument("--out", default=None, help="directory for eval.json / eval.txt")
    se.add_argument("--tolerance", type=float, default=DEFAULT_BOUNDARY_TOLERANCE,
                    help="boundary match tolerance as a fraction of the image diagonal")

    sw = sub.add_parser("sweep", help="propagate+evaluate over a layer x timestep grid")
    _add_run_flags(sw)
    sw.add_argument("--layers", type=_int_list, required=True, help="comma-separated layer indices")
    sw.add_argument("--timesteps", type=_int_list, required=True, help="comma-separated timesteps")
    sw.add_argument("--tolerance", type=float, default=DEFAULT_BOUNDARY_TOLERANCE)

    sa = sub.add_parser("analyze-corrs", help="mixed-endpoint diagnostics vs sweep quality")
    sa.add_argument("--manifest", required=True)
    sa.add_argument("--sweep", required=True, help="sweep.json produced by the sweep command")
    sa.add_argument("--out", default=None)
    sa.add_argument("--max-pairs", type=int, default=None,
                    help="per-video cap on sampled frame pairs")
    sa.add_argument("--seed", type=int, default=0)

    sg = sub.add_parser("gen-synthetic", help="generate a synthetic benchmark dataset")
    sg.add_argument("--out", required=True)
    sg.add_argument("--videos", type=int, default=1)
    sg.add_argument("--frames", type=int, default=3)
    sg.add_argument("--objects", type=int, default=1)
    sg.add_argument("--grid", type=_int_list, default=[16, 16], metavar="H,W")
    sg.add_argument("--channels", type=int, default=16)
    sg.add_argument("--noise", type=float, default=0.0)
    sg.add_argument("--seed", type=int, required=True)
    sg.add_argument("--stride", type=int, default=4)
    sg.add_argument("--separation", type=float, default=10.0)
    sg.add_argument("--decoys", type=int, default=0)
    sg.add_argument("--layers", type=_int_list, default=[3])
    sg.add_argument("--timesteps", type=_int_list, default=[50])
    sg.add_argument("--cells", type=_parse_cells, default=None,
                    help='per-cell overrides, e.g. "L3_T0:0.1,L3_T50:0.5"; '
                         "wins over --layers/--timesteps")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "propagate":
            return cmd_propagate(_resolve_run_config(args))
        if args.command == "evaluate":
            out = Path(args.out) if args.out else None
            return cmd_evaluate(Path(args.pred), Path(args.gt), out, args.tolerance)
        if args.command == "sweep":
            return cmd_sweep(_resolve_run_config(args), args.layers, args.timesteps, args.tolerance)
        if args.command == "analyze-corrs":
            out = Path(args.out) if args.out else None
            return cmd_analyze_corrs(Path(args.manifest), Path(args.sweep), out,
                                     args.max_pairs, args.seed)
        if args.command == "gen-synthetic":
            if len(args.grid) != 2:
                raise MaskpropError(f"--grid expects H,W, got {args.grid}")
            cells = args.cells
            if cells is None:
                cells = tuple(
                    CellSpec(layer=l, timestep=t) for l in args.layers for t in args.timesteps
                )
            spec = SyntheticSpec(
                videos=args.videos,
                frames=args.frames,
                objects=args.objects,
                grid_h=args.grid[0],
                grid_w=args.grid[1],
                channels=args.channels,
                noise=args.noise,
                seed=args.seed,
                stride=args.stride,
                separation=args.separation,
                decoys=args.decoys,
                cells=tuple(cells),
            )
            manifest_path = generate(spec, args.out)
            print(f"wrote {manifest_path}")
            return 0
        raise MaskpropError(f"unknown command {args.command!r}")
    except (MaskpropError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
