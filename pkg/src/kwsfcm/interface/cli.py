"""Argument parsing and subcommand dispatch.

Subcommands: noise, segment, segment-color, eval, pipeline. Parameter flags mirror the config
file keys one to one (`--kernel-sigma` is `kernel.sigma`); they are passed through as strings
and validated by RunConfig, so a bad value from a flag and from a file fail the same way.

Exit codes: 0 success, 2 usage errors (bad arguments or parameter values), 1 anything else.
"""

import argparse
import asyncio
from collections.abc import Sequence
from pathlib import Path

from loguru import logger

from ..models.config import RunConfig, read_config_file
from ..models.image import ImageFormatError
from ..models.params import Algorithm, InitMode, InvalidParameter, KernelKind, NoiseKind, WeightMode
from ..models.reports import format_value
from .commands import ErrorMsg, cmd_eval, cmd_noise, cmd_pipeline, cmd_segment, cmd_segment_color

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# (flag, config key, choices, help)
CLUSTER_FLAGS = (
    ("--algo", "algo", [str(a) for a in Algorithm], "clustering algorithm (default kwsfcm)"),
    ("--c", "c", None, "number of clusters (default 2)"),
    ("--m", "m", None, "fuzzifier, > 1 (default 2)"),
    ("--alpha", "alpha", None, "weight of the neighbourhood term (default 3.8)"),
    ("--epsilon", "epsilon", None, "stop when no centroid moves this much (default 0.001)"),
    ("--max-iter", "max_iter", None, "iteration cap (default 100)"),
    ("--init", "init", [str(i) for i in InitMode], "centroid initialisation"),
    ("--seed", "seed", None, "seed for seeded_random initialisation"),
    ("--kernel-kind", "kernel.kind", [str(k) for k in KernelKind], "kernel family"),
    ("--kernel-sigma", "kernel.sigma", None, "gaussian_rbf width (default 150)"),
    ("--kernel-a", "kernel.a", None, "gaussian_rbf exponent a"),
    ("--kernel-b", "kernel.b", None, "gaussian_rbf exponent b, in [1, 2]"),
    ("--kernel-degree", "kernel.degree", None, "polynomial degree"),
    ("--t", "susan.t", None, "SUSAN brightness threshold (default: solved from --susan-min-ratio)"),
    ("--susan-min-ratio", "susan.min_ratio", None, "response at the largest deviation (default 1/16)"),
    ("--susan-max-dev", "susan.max_dev", None, "largest intensity deviation (default 255)"),
    ("--susan-exponent", "susan.exponent", None, "similarity exponent (default 6)"),
    ("--susan-weights", "susan.weights", [str(w) for w in WeightMode], "mask weighting"),
    ("--snapshot-at", "snapshot_at", None, "comma-separated iterations whose memberships are saved"),
)
NOISE_FLAGS = (
    ("--kind", "noise.kind", [str(k) for k in NoiseKind], "noise family"),
    ("--level", "noise.level", None, "noise strength"),
    ("--noise-seed", "noise.seed", None, "noise seed"),
)
EQF_FLAGS = (
    ("--eqf-n", "eqf.n", None, "homogeneity window size (default 9)"),
    ("--eqf-alpha", "eqf.alpha", None, "edge threshold scale (default 1)"),
    ("--eqf-gamma", "eqf.gamma", None, "edge threshold gain (default 80)"),
    ("--eqf-th", "eqf.th", None, "blur threshold on inverse blurriness (default 0.1)"),
    ("--eqf-levels", "eqf.levels", None, "gray levels L (default 256)"),
    ("--entropy-base", "entropy.base", None, "logarithm base of the entropy measure (default e)"),
)


def _settings_dest(key: str) -> str:
    return "setting:" + key


def _add_flags(parser: argparse.ArgumentParser, flags) -> None:
    for flag, key, choices, help_text in flags:
        parser.add_argument(flag, dest=_settings_dest(key), choices=choices, help=help_text)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat key = value configuration file")
    parser.add_argument("--workers", type=int, default=1, help="threads per segmentation (capped by KWSFCM_THREADS)")


def _add_segmentation(parser: argparse.ArgumentParser) -> None:
    _add_common(parser)
    _add_flags(parser, CLUSTER_FLAGS)
    parser.add_argument(
        "--no-damping",
        dest=_settings_dest("damping"),
        action="store_const",
        const="false",
        help="fix every damping coefficient to 1",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kwsfcm", description="Noisy image segmentation with KWSFCM")
    parser.add_argument("--home", type=Path, help="home directory for logs (env KWSFCM_HOME)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug detail to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    noise = sub.add_parser("noise", help="corrupt an image with seeded noise")
    noise.add_argument("input", type=Path)
    noise.add_argument("output", type=Path)
    _add_common(noise)
    _add_flags(noise, NOISE_FLAGS)

    seg = sub.add_parser("segment", help="segment a gray PGM")
    seg.add_argument("input", type=Path)
    seg.add_argument("output", type=Path, help="output directory")
    _add_segmentation(seg)
    seg.add_argument("--dump-damping", type=Path, help="write the damping coefficients as a PGM heat-map")

    color = sub.add_parser("segment-color", help="segment each channel of a PPM")
    color.add_argument("input", type=Path)
    color.add_argument("output", type=Path, help="output directory")
    _add_segmentation(color)

    ev = sub.add_parser("eval", help="evaluate a segmentation")
    ev.add_argument("input", type=Path, help="gray image the labels were computed from (or graded by --eqf)")
    ev.add_argument("--labels", type=Path, help="label PGM written by segment")
    ev.add_argument("--sa", type=Path, metavar="REFERENCE", help="segmentation accuracy against a reference map")
    ev.add_argument("--entropy", action="store_true", help="entropy measure of --labels")
    ev.add_argument("--eqf", action="store_true", help="edge quality factor of the input image")
    ev.add_argument("--dump-edges", type=Path, help="write the final edge bitmap as a PGM")
    ev.add_argument("--report", type=Path, help="write the key = value report here")
    _add_common(ev)
    _add_flags(ev, EQF_FLAGS)

    pipe = sub.add_parser("pipeline", help="reference, noise, segment and evaluate over seeded runs")
    pipe.add_argument("input", type=Path, help="clean gray PGM")
    pipe.add_argument("output", type=Path, help="output directory")
    pipe.add_argument("--runs", dest=_settings_dest("runs"), help="number of seeded replications")
    _add_segmentation(pipe)
    _add_flags(pipe, NOISE_FLAGS)
    _add_flags(pipe, EQF_FLAGS)
    return parser


def run_config(ns: argparse.Namespace) -> RunConfig:
    """Merge defaults, the config file and CLI flags (in increasing precedence)."""
    settings = read_config_file(ns.config) if ns.config else {}
    prefix = _settings_dest("")
    settings |= {
        name.removeprefix(prefix): value
        for name, value in vars(ns).items()
        if name.startswith(prefix) and value is not None
    }
    output = ns.report if ns.command == "eval" else ns.output
    reference = ns.sa if ns.command == "eval" else None
    return RunConfig(input=ns.input, output=output, reference=reference, workers=ns.workers).with_settings(settings)


def dispatch(ns: argparse.Namespace) -> None:
    config = run_config(ns)
    match ns.command:
        case "noise":
            cmd_noise(config)
        case "segment":
            cmd_segment(config, dump_damping=ns.dump_damping)
        case "segment-color":
            cmd_segment_color(config)
        case "eval":
            report = cmd_eval(
                config,
                labels=ns.labels,
                sa=ns.sa is not None,
                entropy=ns.entropy,
                edge_quality=ns.eqf,
                dump_edges=ns.dump_edges,
            )
            if config.output is None:
                for key, value in report.items():
                    print(f"{key} = {format_value(value)}")
        case "pipeline":
            asyncio.run(cmd_pipeline(config))


def run(argv: Sequence[str]) -> int:
    """Parse `argv` and run the subcommand. Returns the exit code."""
    try:
        ns = build_parser().parse_args(list(argv))
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        dispatch(ns)
    except InvalidParameter as e:
        logger.error(f"Invalid parameter: {e}")
        return EXIT_USAGE
    except ErrorMsg as e:
        logger.error(str(e))
        return EXIT_FAILURE
    except (ImageFormatError, ValueError, ArithmeticError, OSError) as e:
        logger.error(f"{ns.command} failed: {type(e).__name__}: {e}")
        return EXIT_FAILURE
    return EXIT_OK
