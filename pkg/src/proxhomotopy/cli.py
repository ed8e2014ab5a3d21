"""Command-line interface.

Subcommands: ``calibrate``, ``fig1`` / ``fig2`` / ``fig3``, ``invariants``,
``plotdata``.  Exit codes: 0 success, 2 configuration error, 3 calibration
missing, 4 divergence detected.
"""

import argparse
import sys

from . import calibration, experiments
from .homotopy import DivergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CALIBRATION = 3
EXIT_DIVERGENCE = 4


def _add_common_run_flags(parser):
    parser.add_argument("--config", help="key-value config file with overrides")
    parser.add_argument("--seed", help="comma-separated seed list override")
    parser.add_argument("--m", help="comma-separated measurement counts override")
    parser.add_argument("--out", help="output directory override")
    parser.add_argument(
        "--calibration", help="calibration file (for constants = calibrated)"
    )
    parser.add_argument("--t-max", type=int, help="iteration budget override")
    parser.add_argument(
        "--no-timing",
        action="store_true",
        help="write zero wall times for byte-reproducible traces",
    )


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="proxhomotopy",
        description="Structured-signal recovery experiments via proximal-gradient homotopy",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="fit schedule constants and save them")
    cal.add_argument("--out", required=True, help="output calibration file")
    cal.add_argument("--seed", default="0,1", help="comma-separated seed list")
    cal.add_argument("--eta", type=float, default=1.0)

    for name, help_text in (
        ("fig1", "sparse recovery suite"),
        ("fig2", "group-sparse recovery suite"),
        ("fig3", "low-rank recovery suite"),
    ):
        fig = sub.add_parser(name, help=help_text)
        _add_common_run_flags(fig)

    inv = sub.add_parser("invariants", help="oracle-constant structural invariant suite")
    inv.add_argument("--seed", help="comma-separated seed list (default 0..19)")
    inv.add_argument("--t-max", type=int, default=120)

    plot = sub.add_parser("plotdata", help="aggregate traces into plot series")
    plot.add_argument("traces", nargs="+", help="trace CSV files")
    plot.add_argument("--out", required=True, help="output directory")
    return parser


def _parse_int_list(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _figure_command(args, figure_defaults, runner, prefix):
    overrides = {}
    if args.config:
        overrides.update(experiments.parse_config_file(args.config))
    if args.seed:
        overrides["seeds"] = _parse_int_list(args.seed)
    if args.m:
        overrides["m_list"] = _parse_int_list(args.m)
    if args.out:
        overrides["out_dir"] = args.out
    if args.calibration:
        overrides["calibration_file"] = args.calibration
    if args.t_max:
        overrides["t_max"] = args.t_max
    if args.no_timing:
        overrides["record_timing"] = False
    config = figure_defaults(**overrides)
    result = runner(config)
    print(f"constants source: {result.constants_source}")
    for path in result.trace_paths:
        print(f"wrote {path}")
    print(f"wrote {result.summary_path}")
    return EXIT_OK


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "calibrate":
            record = calibration.calibrate_constants(
                seeds=_parse_int_list(args.seed), eta=args.eta
            )
            calibration.save_calibration(record, args.out)
            print(f"wrote {args.out}")
            for kind in sorted(record.c_rho):
                print(
                    f"{kind}: C_rho={record.c_rho[kind]:.4f} C_xi={record.c_xi[kind]:.4f}"
                )
            print(f"C_dev={record.c_dev:.4f} fingerprint={record.fingerprint}")
            return EXIT_OK
        if args.command in ("fig1", "fig2", "fig3"):
            defaults = {
                "fig1": experiments.figure1_config,
                "fig2": experiments.figure2_config,
                "fig3": experiments.figure3_config,
            }[args.command]
            runner = {
                "fig1": experiments.run_figure1,
                "fig2": experiments.run_figure2,
                "fig3": experiments.run_figure3,
            }[args.command]
            return _figure_command(args, defaults, runner, args.command)
        if args.command == "invariants":
            cfg_kwargs = {}
            if args.seed:
                cfg_kwargs["seeds"] = _parse_int_list(args.seed)
            if args.t_max:
                cfg_kwargs["t_max"] = args.t_max
            report = experiments.run_invariant_suite(
                experiments.InvariantSuiteConfig(**cfg_kwargs)
            )
            for line in report.lines():
                print(line)
            return EXIT_OK if report.passed else 1
        if args.command == "plotdata":
            written = experiments.emit_plot_data(args.traces, args.out)
            for path in written:
                print(f"wrote {path}")
            return EXIT_OK
    except experiments.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except experiments.CalibrationMissingError as exc:
        print(f"calibration error: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except calibration.CalibrationError as exc:
        print(f"calibration error: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    parser.error(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
