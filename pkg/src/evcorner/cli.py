"""Command line entry point: ``evcorner <command> ...``.

Exit status is 0 on success, 1 on usage errors (bad flags, unknown
detectors or config keys) and 2 on data errors (unreadable or malformed
inputs).
"""
from __future__ import annotations

import argparse
import csv
import io
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import normalization as nz
from .config import ConfigError, RunConfig
from .evaluation import (accuracy_cylinders, bench_report, hardware_string, metrics_csv,
                         nn_track, reduction_rate, tpr)
from .events import EVENT_DTYPE, Event, EventFormatError, SensorGeometry, read_events, write_events
from .pipeline import DETECTORS, Detector, PipelineState, Stage, label_stream
from .synth import generate, load_scene, read_truth, shapes_scene, write_truth

NORMALIZE_METHODS = ("minmax", "window", "linear", "exp", "binary", "sorted", "sits", "aed")
LABEL_COLUMNS = ["t_us", "x", "y", "p", "label", "score"]


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _run_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    return cfg.with_overrides(args.set)


def _geometry(args):
    if args.geometry is None:
        return None
    try:
        return SensorGeometry.parse(args.geometry)
    except ValueError as exc:
        raise UsageError(f"--geometry: {exc}") from None


def _load(args):
    geometry = _geometry(args)
    try:
        events, geometry = read_events(args.input, geometry=geometry)
    except OSError as exc:
        raise DataError(f"{args.input}: {exc.strerror or exc}") from None
    except (EventFormatError, ValueError) as exc:
        raise DataError(f"{args.input}: {exc}") from None
    if geometry is None:
        raise DataError(f"{args.input}: text streams need --geometry WxH")
    return events, geometry


def _fmt_score(s: float) -> str:
    return "" if np.isnan(s) else f"{s:.9g}"


def _labels_text(events, stages, scores, header: dict) -> str:
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in header.items()) + "\n")
    buf.write(",".join(LABEL_COLUMNS) + "\n")
    names = {int(s): s.text for s in Stage}
    for t, x, y, p, lab, sc in zip(events["t"].tolist(), events["x"].tolist(),
                                   events["y"].tolist(), events["p"].tolist(),
                                   stages.tolist(), scores.tolist()):
        buf.write(f"{t},{x},{y},{p},{names[lab]},{_fmt_score(sc)}\n")
    return buf.getvalue()


def read_labels(path):
    """Parse a label CSV into ``(events, stages, header)``."""
    header = {}
    rows = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    body_start = 0
    while body_start < len(lines) and lines[body_start].startswith("#"):
        for tok in lines[body_start][1:].split():
            key, _, value = tok.partition("=")
            header[key] = value
        body_start += 1
    reader = csv.reader(lines[body_start:])
    cols = next(reader, None)
    if cols != LABEL_COLUMNS:
        raise DataError(f"{path}: line {body_start + 1}: expected header {','.join(LABEL_COLUMNS)}")
    for lineno, row in enumerate(reader, start=body_start + 2):
        try:
            rows.append((int(row[0]), int(row[1]), int(row[2]), int(row[3]),
                         int(Stage.from_text(row[4]))))
        except (IndexError, ValueError, KeyError):
            raise DataError(f"{path}: line {lineno}: malformed label row {row!r}") from None
    events = np.empty(len(rows), dtype=EVENT_DTYPE)
    stages = np.empty(len(rows), dtype=np.int8)
    if rows:
        arr = np.array(rows, dtype=np.int64)
        events["t"], events["x"], events["y"], events["p"] = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]
        stages[:] = arr[:, 4]
    return events, stages, header


def _write_text(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_convert(args):
    events, geometry = _load(args)
    write_events(args.output, events, geometry, args.to)
    print(f"wrote {events.shape[0]} events to {args.output}", file=sys.stderr)


def cmd_filter(args):
    events, geometry = _load(args)
    cfg = _run_config(args)
    ev, stages, _, summary = label_stream(events, geometry, Detector.FILTER, cfg.detector)
    keep = ev[stages != Stage.NOISE]
    write_events(args.output, keep, geometry, args.to)
    print(f"kept {keep.shape[0]} of {ev.shape[0]} events "
          f"({reduction_rate(ev.shape[0], keep.shape[0]):.2f}% removed)", file=sys.stderr)


def _normalized_patch(events, geometry, cfg, index, method, radius, tau):
    """Replay the stream up to ``index`` and normalize that event's patch."""
    if not 0 <= index < events.shape[0]:
        raise DataError(f"--index {index} is outside the stream of {events.shape[0]} events")
    state = PipelineState(geometry, cfg.detector, Detector.FILTER,
                          has_polarity=bool(np.any(events["p"] != 0)))
    stages, _ = state.process(events[:index + 1])
    e = Event.from_record(events[index])
    if stages[-1] == Stage.NOISE:
        print(f"note: event {index} was filtered as noise; its patch is shown anyway",
              file=sys.stderr)
    patch = state.surface.patch(e, radius)
    tgf = state.current_tgf
    ref = tau if tau is not None else tgf
    if method in ("window", "linear", "exp", "aed") and not ref > 0:
        raise DataError(f"event {index} precedes the first threshold estimate; "
                        "pass --tau or pick a later event")
    if method == "minmax":
        return nz.normalize_minmax(patch)
    if method == "window":
        return nz.normalize_time_window(patch, tau=ref)
    if method == "linear":
        return nz.normalize_linear(patch, tau=ref)
    if method == "exp":
        return nz.normalize_exp(patch, tau_e=1.0 / ref)
    if method == "binary":
        return nz.normalize_binary(patch, cfg.detector.n_l)
    if method == "sorted":
        return nz.normalize_sorted(patch)
    if method == "sits":
        sits = np.zeros((state.surface.cells.shape[0], geometry.height, geometry.width),
                        dtype=np.int64)
        for rec, st in zip(events[:index + 1], stages):
            if st != Stage.NOISE:
                ev = Event.from_record(rec)
                nz.sits_update(sits[state.surface.grid_index(ev.p)], ev, radius)
        return nz.normalize_sits(sits[state.surface.grid_index(e.p)], e, radius)
    table = nz.build_aed_table(cfg.detector.aed_resolution, cfg.detector.aed_max_ratio,
                               cfg.detector.aed_tau)
    return nz.normalize_aed(patch, tgf=ref, table=table)


def cmd_normalize(args):
    events, geometry = _load(args)
    cfg = _run_config(args)
    norm = _normalized_patch(events, geometry, cfg, args.index, args.method,
                             args.radius, args.tau)
    buf = io.StringIO()
    buf.write(f"# method={args.method} index={args.index} config_hash={cfg.config_hash()}\n")
    for row in norm.values:
        buf.write(",".join(f"{v:.6f}" for v in row) + "\n")
    _write_text(args.output, buf.getvalue())


def cmd_detect(args):
    events, geometry = _load(args)
    cfg = _run_config(args)
    if args.surface:
        cfg = cfg.with_overrides([f"pipeline.surface={args.surface}"])
    det = Detector(args.detector)
    ev, stages, scores, summary = label_stream(events, geometry, det, cfg.detector)
    header = {"config_hash": cfg.config_hash(), "detector": det.value,
              "geometry": str(geometry),
              "harris_threshold": cfg.detector.harris_params().score_threshold}
    _write_text(args.output, _labels_text(ev, stages, scores, header))
    if args.summary:
        _write_text(args.summary,
                    f"detector={det.value}\nn_events={summary.n_events}\n"
                    f"elapsed_s={summary.elapsed_s:.9f}\n"
                    f"us_per_event={summary.us_per_event:.6f}\n"
                    f"mev_per_s={summary.mev_per_s:.6f}\n")
    print(f"{det.value}: {summary.corners} corners in {summary.n_events} events "
          f"({summary.reduction:.2f}% reduction)", file=sys.stderr)


def cmd_synth(args):
    if args.spec:
        try:
            spec = load_scene(args.spec, _geometry(args))
        except OSError as exc:
            raise DataError(f"{args.spec}: {exc.strerror or exc}") from None
        except ValueError as exc:
            raise DataError(f"{args.spec}: {exc}") from None
    else:
        spec = shapes_scene(seed=0)
        if args.geometry:
            raise UsageError("--geometry cannot resize the preset scene")
    if args.seed is not None:
        spec.seed = args.seed
    try:
        events, truth = generate(spec)
    except ValueError as exc:
        raise DataError(f"{args.spec or 'preset'}: {exc}") from None
    write_events(args.output, events, spec.geometry)
    if args.truth:
        write_truth(args.truth, truth)
    print(f"wrote {events.shape[0]} events ({spec.geometry})", file=sys.stderr)


def _read_summary(path) -> dict:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                key, _, value = line.strip().partition("=")
                if key:
                    out[key] = value
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    return out


def cmd_eval(args):
    events, stages, header = read_labels(args.labels)
    try:
        truth = read_truth(args.truth)
    except OSError as exc:
        raise DataError(f"{args.truth}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise DataError(f"{args.truth}: {exc}") from None
    signal = events[stages != Stage.NOISE]
    corners = events[stages == Stage.CORNER]
    acc = accuracy_cylinders(corners, truth)
    track = nn_track(corners)
    row = {"detector": header.get("detector", ""),
           "reduction": reduction_rate(signal.shape[0], corners.shape[0]),
           "accuracy": acc["accuracy"], "tpr": tpr(corners, signal, truth),
           "mean_lifetime_ms": track.mean_lifetime_ms, "validity": track.validity}
    if args.summary:
        timing = _read_summary(args.summary)
        row["us_per_event"] = float(timing.get("us_per_event", "nan"))
        row["mev_per_s"] = float(timing.get("mev_per_s", "nan"))
    meta = {"config_hash": header.get("config_hash", ""),
            "harris_threshold": header.get("harris_threshold", ""),
            "tp": acc["tp"], "fp": acc["fp"],
            "tpr_denominator": "post-filter signal events"}
    _write_text(args.output, metrics_csv([row], meta))


def _bench_one(payload):
    events, geometry, config, detector, runs = payload
    elapsed = []
    summary = None
    for _ in range(runs):
        _, _, _, summary = label_stream(events, geometry, detector, config)
        elapsed.append(summary.elapsed_s)
    summary.elapsed_s = statistics.median(elapsed)
    return summary


def cmd_bench(args):
    events, geometry = _load(args)
    cfg = _run_config(args)
    if args.runs < 1:
        raise UsageError("--runs must be >= 1")
    jobs = [(events, geometry, cfg.detector, d, args.runs) for d in DETECTORS]
    if args.parallel:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            summaries = list(pool.map(_bench_one, jobs))
    else:
        summaries = [_bench_one(job) for job in jobs]
    report = bench_report(summaries, cfg.config_hash())
    print(report.to_text())
    if args.output:
        _write_text(args.output, report.to_csv())


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--geometry", metavar="WxH", help="sensor size (required for text input)")
    common.add_argument("--seed", type=int, help="random seed (synth)")
    common.add_argument("--config", metavar="FILE", help="key = value parameter file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                        help="override one config key (repeatable)")

    # the shared flags live on each subcommand, so they follow the command name
    parser = _Parser(prog="evcorner", description="Event-based corner detection toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("convert", parents=[common], help="convert between text and binary")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--to", choices=("text", "binary"), help="output format (default: by extension)")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("filter", parents=[common], help="keep GF/refractory signal events")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--to", choices=("text", "binary"))
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("normalize", parents=[common], help="dump one normalized patch as CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--method", choices=NORMALIZE_METHODS, required=True)
    p.add_argument("--index", type=int, required=True, help="event index in the stream")
    p.add_argument("--radius", type=int, default=4)
    p.add_argument("--tau", type=float, help="time constant in us (default: current TGF)")
    p.add_argument("--out", dest="output", default="-")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("detect", parents=[common], help="label every event")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--detector", choices=[d.value for d in DETECTORS], default="se-harris")
    p.add_argument("--surface", choices=("full", "down2"))
    p.add_argument("--out", dest="output", default="-")
    p.add_argument("--summary", metavar="FILE", help="also write run timing here")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic scene")
    p.add_argument("--spec", help="scene file (default: the built-in shapes scene)")
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--truth", help="write vertex ground truth CSV here")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", parents=[common], help="score labels against ground truth")
    p.add_argument("--labels", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--summary", metavar="FILE", help="timing file written by detect")
    p.add_argument("--out", dest="output", default="-")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", parents=[common], help="compare detector throughput")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--parallel", action="store_true", help="one process per detector")
    p.add_argument("--out", dest="output", help="also write the table as CSV")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"evcorner: config error: {exc}", file=sys.stderr)
        return 1
    except (DataError, EventFormatError) as exc:
        print(f"evcorner: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"evcorner: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
