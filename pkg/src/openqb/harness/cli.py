"""Command-line interface.

Subcommands: run (single experiment), sweep, scaling, figure <id>, validate
(config check only).  Flags override the corresponding config fields; the
output directory can also be forced with the OPENQB_OUT_DIR environment
variable.  Exit codes: 0 success, 2 configuration error (message names the
field), 1 anything else.
"""

from __future__ import annotations

import argparse
import sys

from .config import (
    ConfigError,
    experiment_from_dict,
    load_config_file,
    scaling_from_dict,
    sweep_from_dict,
)
from .figures import FIGURE_IDS, reproduce_figure


def _add_common_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--n-traj", type=int, help="override the trajectory count")
    p.add_argument("--out-dir", help="override the output directory")
    p.add_argument("--workers", type=int, help="worker processes (0 = all cores)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="openqb",
        description="Open quantum battery simulator: Lindblad dynamics, "
                    "photodetection/homodyne monitoring, daemonic work extraction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single experiment from a config file")
    p_run.add_argument("-c", "--config", required=True)
    _add_common_overrides(p_run)
    p_run.add_argument("--t-max", type=float, help="override the time horizon")
    p_run.add_argument("--dt", type=float, help="override the integration step")
    p_run.add_argument("--n-samples", type=int, help="override the sampling-grid size")
    p_run.add_argument("--unraveling", choices=("none", "pd", "hd"))
    p_run.add_argument("--theta", type=float, help="homodyne local-oscillator phase")
    p_run.add_argument("--label", help="override the output subdirectory name")
    p_run.add_argument("--track-full-average", action="store_true",
                       help="accumulate the ensemble-averaged full state "
                            "(unraveling-consistency diagnostic)")

    p_sweep = sub.add_parser("sweep", help="run a two-axis parameter sweep")
    p_sweep.add_argument("-c", "--config", required=True)
    _add_common_overrides(p_sweep)

    p_scal = sub.add_parser("scaling", help="run a system-size scaling study")
    p_scal.add_argument("-c", "--config", required=True)
    p_scal.add_argument("--n-values", help="comma-separated sizes, e.g. 2,3,4,6")
    _add_common_overrides(p_scal)

    p_fig = sub.add_parser("figure", help="run a figure-reproduction preset")
    p_fig.add_argument("figure_id", choices=FIGURE_IDS)
    _add_common_overrides(p_fig)

    p_val = sub.add_parser("validate", help="validate a config file and exit")
    p_val.add_argument("-c", "--config", required=True)

    return parser


def _experiment_overrides(cfg, args):
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.n_traj is not None:
        updates["n_traj"] = args.n_traj
    if args.out_dir is not None:
        updates["out_dir"] = args.out_dir
    if args.workers is not None:
        updates["workers"] = args.workers
    for attr, fld in (("t_max", "t_max"), ("dt", "dt"), ("n_samples", "n_samples"),
                      ("unraveling", "unraveling"), ("theta", "theta"),
                      ("label", "label")):
        value = getattr(args, attr, None)
        if value is not None:
            updates[fld] = value
    if getattr(args, "track_full_average", False):
        updates["track_full_average"] = True
    return cfg.replace(**updates) if updates else cfg


def _template_overrides(template, args):
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.n_traj is not None:
        updates["n_traj"] = args.n_traj
    if args.out_dir is not None:
        updates["out_dir"] = args.out_dir
    if args.workers is not None:
        updates["workers"] = args.workers
    return template.replace(**updates) if updates else template


def _classify(data: dict) -> str:
    if "sweep" in data:
        return "sweep"
    if "scaling" in data:
        return "scaling"
    return "experiment"


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    # imported lazily so `openqb validate` stays snappy
    from . import runner
    from .config import ScalingSpec
    import dataclasses

    if args.command == "validate":
        data = load_config_file(args.config)
        kind = _classify(data)
        if kind == "sweep":
            sweep_from_dict(data)
        elif kind == "scaling":
            scaling_from_dict(data)
        else:
            experiment_from_dict(data)
        print(f"{args.config}: valid {kind} config")
        return 0

    if args.command == "run":
        cfg = _experiment_overrides(experiment_from_dict(load_config_file(args.config)), args)
        res = runner.run_experiment(cfg)
        for w in res.warnings:
            print(f"warning: {w}", file=sys.stderr)
        print(res.csv_path)
        print(res.meta_path)
        return 0

    if args.command == "sweep":
        spec = sweep_from_dict(load_config_file(args.config))
        spec = dataclasses.replace(spec, template=_template_overrides(spec.template, args))
        res = runner.run_sweep(spec)
        n_err = sum(1 for row in res.rows if row[-1] != "ok")
        if n_err:
            print(f"warning: {n_err} cell(s) failed (see status column)", file=sys.stderr)
        print(res.csv_path)
        print(res.meta_path)
        return 0

    if args.command == "scaling":
        data = load_config_file(args.config)
        if "scaling" in data:
            spec = scaling_from_dict(data)
        else:
            if not args.n_values:
                raise ConfigError("scaling.n_values",
                                  "required (config section or --n-values)")
            template = experiment_from_dict(data)
            spec = ScalingSpec(
                n_values=tuple(int(v) for v in args.n_values.split(",")),
                template=template,
            )
        if args.n_values and "scaling" in data:
            spec = dataclasses.replace(
                spec, n_values=tuple(int(v) for v in args.n_values.split(",")))
        spec = dataclasses.replace(spec, template=_template_overrides(spec.template, args))
        res = runner.run_scaling_study(spec)
        for name, fit in res.fits.items():
            print(f"{name}: exponent = {fit['exponent']:.4f} +- {fit['stderr']:.4f}")
        print(res.csv_path)
        print(res.meta_path)
        return 0

    if args.command == "figure":
        paths = reproduce_figure(
            args.figure_id,
            out_dir=args.out_dir or "results",
            n_traj=args.n_traj,
            seed=args.seed if args.seed is not None else 20260810,
            workers=args.workers or 0,
        )
        for p in paths:
            print(p)
        return 0

    raise RuntimeError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
