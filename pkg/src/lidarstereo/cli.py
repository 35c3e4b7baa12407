"""Command-line interface: ``match``, ``sample``, ``eval``, ``render`` and ``sweep``.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

from .adcensus import AdCensusParams, run_adcensus
from .dataio import load_disparity, load_gray, read_calib, render_falsecolor, save_disparity
from .errors import InvalidParameterError, LidarStereoError
from .evaluation import evaluate
from .guidance import (
    GuidanceParams,
    auto_window_size,
    lidar_density,
    read_points_csv,
    write_points_csv,
)
from .sampler import SampleSpec, sample_sparse
from .sgm import Guidance, SgmParams, run_sgm

log = logging.getLogger("lidarstereo")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class StageError(LidarStereoError):
    pass


@contextmanager
def stage(name: str):
    """Prefix data errors raised inside the block with the pipeline stage."""
    try:
        yield
    except StageError:
        raise
    except (LidarStereoError, OSError) as exc:
        raise StageError(f"{name}: {exc}") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _window(text: str):
    if text == "auto":
        return "auto"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be 'auto' or an odd integer, got {text!r}") from None
    if value < 3 or value % 2 == 0:
        raise argparse.ArgumentTypeError(f"window must be odd and >= 3, got {value}")
    return value


def _add_pair_args(p):
    p.add_argument("--left", required=True, type=Path, help="left rectified image")
    p.add_argument("--right", required=True, type=Path, help="right rectified image")
    p.add_argument("--method", choices=("sgm", "adcensus"), default="sgm")
    p.add_argument("--dmin", type=int)
    p.add_argument("--dmax", type=int)
    p.add_argument("--calib", type=Path, help="Middlebury calib.txt supplying ndisp")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lidarstereo", description="LiDAR-guided dense stereo matching.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("match", help="dense matching, optionally guided by sparse points")
    _add_pair_args(p)
    p.add_argument("--fusion", choices=("none", "gauss", "riverbed"), default="none")
    p.add_argument("--window", type=_window, default="auto")
    p.add_argument("--guidance", type=Path, help="sparse points CSV (x,y,d)")
    p.add_argument("--sample-gt", type=Path, help="draw guidance from this ground truth instead")
    p.add_argument("--sample", help="sampling spec for --sample-gt, e.g. 5%% or 1:3x3")
    p.add_argument("--out", type=Path, required=True, help="output disparity (.pfm)")
    p.add_argument("--falsecolor", type=Path, help="optional false-colour PNG")

    p = sub.add_parser("sample", help="simulate sparse guidance from a ground-truth map")
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--spec", required=True, help="1:NxN, P%% or a fraction")
    p.add_argument("--pattern", choices=("random", "grid"), default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--guidance-out", type=Path, default=Path("guidance.csv"))
    p.add_argument("--holdout-out", type=Path, default=Path("holdout.csv"))

    p = sub.add_parser("eval", help="score a disparity map on holdout points")
    p.add_argument("--disp", type=Path, required=True)
    p.add_argument("--holdout", type=Path, required=True)

    p = sub.add_parser("render", help="false-colour rendering of a disparity map")
    p.add_argument("--disp", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("sweep", help="density x window grid of sample, match, eval")
    _add_pair_args(p)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--fusion", choices=("gauss", "riverbed"), default="riverbed")
    p.add_argument("--densities", required=True, help="comma list, e.g. 1:3x3,1:9x9,5%%")
    p.add_argument("--windows", required=True, help="comma list of odd sizes or 'auto'")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, help="CSV output (default stdout)")
    return parser


def _search_range(args) -> tuple[int, int]:
    if args.calib is not None:
        if args.dmin is not None or args.dmax is not None:
            raise UsageError("give either --calib or --dmin/--dmax, not both")
        if not args.calib.exists():
            raise UsageError(f"calibration file not found: {args.calib}")
        return read_calib(args.calib)
    if args.dmax is None:
        raise UsageError("a disparity range is required: --dmax (and optionally --dmin) or --calib")
    return (args.dmin or 0), args.dmax


def _require(path: Path, what: str) -> None:
    if not path.exists():
        raise UsageError(f"{what} not found: {path}")


def _matcher(method: str, d_min: int, d_max: int):
    try:
        if method == "sgm":
            return run_sgm, SgmParams(d_min=d_min, d_max=d_max)
        return run_adcensus, AdCensusParams(d_min=d_min, d_max=d_max)
    except InvalidParameterError as exc:
        raise UsageError(str(exc)) from None


def _spec(text: str, **kwargs) -> SampleSpec:
    try:
        return SampleSpec.parse(text, **kwargs)
    except InvalidParameterError as exc:
        raise UsageError(str(exc)) from None


def cmd_match(args) -> int:
    _require(args.left, "left image")
    _require(args.right, "right image")
    d_min, d_max = _search_range(args)
    if args.fusion == "none":
        if args.guidance or args.sample_gt:
            log.warning("--fusion none: ignoring the supplied guidance")
    else:
        if args.guidance is None and args.sample_gt is None:
            raise UsageError(f"--fusion {args.fusion} needs --guidance or --sample-gt with --sample")
        if args.guidance is not None and args.sample_gt is not None:
            raise UsageError("give either --guidance or --sample-gt, not both")
        if args.guidance is not None:
            _require(args.guidance, "guidance file")
        else:
            _require(args.sample_gt, "ground truth")
            if args.sample is None:
                raise UsageError("--sample-gt needs --sample")
            spec = _spec(args.sample, seed=args.seed)
    run, matcher_params = _matcher(args.method, d_min, d_max)

    with stage("reading images"):
        left, right = load_gray(args.left), load_gray(args.right)
    guidance = None
    if args.fusion != "none":
        with stage("loading guidance"):
            if args.guidance is not None:
                points = read_points_csv(args.guidance)
            else:
                points, _ = sample_sparse(load_disparity(args.sample_gt), spec)
            points.check_inside(*left.shape)
        params = GuidanceParams(window=args.window)
        if len(points):
            density = lidar_density(points, left)
            window = auto_window_size(density) if args.window == "auto" else args.window
            print(f"points={len(points)} density={density:.6f} window={window}", file=sys.stderr)
        else:
            print("points=0: guidance is empty, matching unguided", file=sys.stderr)
        guidance = Guidance(args.fusion, points, params)

    with stage("matching"):
        disparity = run(left, right, matcher_params, guidance)
    with stage("writing output"):
        save_disparity(disparity, args.out)
        if args.falsecolor is not None:
            render_falsecolor(disparity, args.falsecolor)
    return EXIT_OK


def cmd_sample(args) -> int:
    _require(args.gt, "ground truth")
    spec = _spec(args.spec, seed=args.seed, pattern=args.pattern)
    guidance, holdout = sample_sparse(load_disparity(args.gt), spec)
    write_points_csv(guidance, args.guidance_out)
    write_points_csv(holdout, args.holdout_out)
    print(f"guidance={len(guidance)} holdout={len(holdout)}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    _require(args.disp, "disparity map")
    _require(args.holdout, "holdout file")
    report = evaluate(load_disparity(args.disp), read_points_csv(args.holdout))
    print(report.to_table())
    print(report.to_json())
    return EXIT_OK


def cmd_render(args) -> int:
    _require(args.disp, "disparity map")
    render_falsecolor(load_disparity(args.disp), args.out)
    return EXIT_OK


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _sweep_cell(task):
    method, d_range, left, right, fusion, points, window, holdout = task
    run, params = _matcher(method, *d_range)
    guidance = Guidance(fusion, points, GuidanceParams(window=window))
    return evaluate(run(left, right, params, guidance), holdout)


SWEEP_HEADER = ["density", "window", "avg_error", "out1", "out2", "out3", "auto"]


def cmd_sweep(args) -> int:
    for path, what in ((args.left, "left image"), (args.right, "right image"), (args.gt, "ground truth")):
        _require(path, what)
    d_range = _search_range(args)
    _matcher(args.method, *d_range)
    densities = _split(args.densities)
    windows = _split(args.windows)
    if not densities or not windows:
        raise UsageError("--densities and --windows must each list at least one entry")
    specs = [_spec(text, seed=args.seed) for text in densities]
    try:
        windows = [_window(w) for w in windows]
    except argparse.ArgumentTypeError as exc:
        raise UsageError(str(exc)) from None
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")

    left, right, gt = load_gray(args.left), load_gray(args.right), load_disparity(args.gt)
    cells, tasks = [], []
    for spec in specs:
        points, holdout = sample_sparse(gt, spec)
        density = lidar_density(points, left) if len(points) else math.nan
        auto = auto_window_size(density) if len(points) else None
        for window in windows:
            size = auto if window == "auto" else window
            cells.append((density, size, size is not None and size == auto))
            tasks.append((args.method, d_range, left, right, args.fusion, points, window, holdout))

    results = _run_cells(tasks, args.jobs)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    failed = 0
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for (density, size, is_auto), result in zip(cells, results):
            if isinstance(result, Exception):
                failed += 1
                log.error("cell density=%s window=%s failed: %s", density, size, result)
                metrics = ["nan"] * 4
            else:
                rates = result.outlier_rate
                metrics = [f"{result.avg_error:.6f}"] + [f"{rates[t]:.6f}" for t in (1.0, 2.0, 3.0)]
            writer.writerow([f"{density:.6f}", size if size is not None else "nan", *metrics, int(is_auto)])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_DATA if failed else EXIT_OK


def _guarded(task):
    try:
        return _sweep_cell(task)
    except LidarStereoError as exc:
        return exc


def _run_cells(tasks, jobs):
    if jobs == 1:
        return [_guarded(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_guarded, tasks))


COMMANDS = {"match": cmd_match, "sample": cmd_sample, "eval": cmd_eval, "render": cmd_render, "sweep": cmd_sweep}


def _setup_logging() -> None:
    # rebind on every call so the handler follows the current sys.stderr
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    log.handlers[:] = [handler]
    log.propagate = False
    log.setLevel(logging.WARNING)


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        if args.verbose:
            log.setLevel(logging.INFO)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LidarStereoError, OSError) as exc:
        print(f"error in {getattr(args, 'command', 'lidarstereo')}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
