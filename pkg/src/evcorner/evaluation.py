"""Detector quality and speed measures.

Corner accuracy uses two tubes around each true vertex trajectory: corner
events within 3.5 px of the nearest vertex are true positives, those
between 3.5 and 5 px false positives, and anything farther is ignored.
Tracking links corner events greedily in time to their nearest trajectory
end within ``r`` pixels and ``dt`` microseconds.
"""
from __future__ import annotations

import csv
import io
import os
import platform
from dataclasses import dataclass, field

import numpy as np

from .synth import GroundTruth


@dataclass(frozen=True)
class CylinderParams:
    inner: float = 3.5
    outer: float = 5.0

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise ValueError(f"need 0 < inner < outer, got {self.inner}, {self.outer}")


@dataclass(frozen=True)
class TrackParams:
    radius: float = 3.0
    dt_us: int = 5000
    min_length: int = 10

    def __post_init__(self):
        if not (self.radius > 0 and self.dt_us > 0 and self.min_length > 0):
            raise ValueError("tracking parameters must all be positive")


def reduction_rate(input_count: int, output_count: int) -> float:
    """Percentage of input events removed."""
    if input_count <= 0:
        return 0.0
    return 100.0 * (1.0 - output_count / input_count)


def _require_truth(truth: GroundTruth):
    if truth is None or truth.n_vertices == 0 or truth.t_us.size == 0:
        raise ValueError("ground truth is empty")


def vertex_distance(events: np.ndarray, truth: GroundTruth) -> np.ndarray:
    """Distance of each event to the nearest vertex at its timestamp."""
    _require_truth(truth)
    if events.size == 0:
        return np.empty(0)
    return truth.distance_to_nearest(events["t"].astype(np.float64),
                                     events["x"], events["y"])


def accuracy_cylinders(corners: np.ndarray, truth: GroundTruth,
                       params: CylinderParams = CylinderParams()) -> dict:
    """``TP / (TP + FP)``; accuracy is NaN when no corner falls in either tube."""
    d = vertex_distance(corners, truth)
    tp = int(np.count_nonzero(d <= params.inner))
    fp = int(np.count_nonzero((d > params.inner) & (d <= params.outer)))
    acc = tp / (tp + fp) if tp + fp else float("nan")
    return {"tp": tp, "fp": fp, "accuracy": acc}


def tpr(corners: np.ndarray, signal_events: np.ndarray, truth: GroundTruth,
        params: CylinderParams = CylinderParams()) -> float:
    """Percentage of inner-tube signal events that were labeled corner."""
    inner_all = np.count_nonzero(vertex_distance(signal_events, truth) <= params.inner)
    if inner_all == 0:
        return 0.0
    inner_corners = np.count_nonzero(vertex_distance(corners, truth) <= params.inner)
    return 100.0 * inner_corners / inner_all


@dataclass
class CornerTrajectory:
    indices: list = field(default_factory=list)
    t_first: int = 0
    t_last: int = 0
    x_last: float = 0.0
    y_last: float = 0.0

    def __len__(self):
        return len(self.indices)

    @property
    def lifetime_ms(self) -> float:
        return (self.t_last - self.t_first) / 1000.0

    def is_valid(self, min_length: int) -> bool:
        # "above" the minimum length: strictly longer
        return len(self.indices) > min_length


@dataclass
class TrackResult:
    trajectories: list
    mean_lifetime_ms: float
    validity: float
    n_valid: int


def nn_track(corners: np.ndarray, params: TrackParams = TrackParams()) -> TrackResult:
    """Greedy nearest-neighbour linking of corner events in time order.

    An event extends the trajectory whose last event is closest (within
    ``radius`` px and ``dt_us``); ties go to the most recently started
    trajectory. Otherwise it starts a new one. ``mean_lifetime_ms`` averages
    over valid trajectories; ``validity`` is the percentage of corner events
    on valid trajectories.
    """
    trajectories: list[CornerTrajectory] = []
    active: list[int] = []
    r2 = params.radius * params.radius
    ts = corners["t"].astype(np.int64).tolist() if corners.size else []
    xs = corners["x"].tolist() if corners.size else []
    ys = corners["y"].tolist() if corners.size else []
    for i, (t, x, y) in enumerate(zip(ts, xs, ys)):
        active = [k for k in active if t - trajectories[k].t_last <= params.dt_us]
        best, best_d2 = -1, r2
        for k in active:
            tr = trajectories[k]
            d2 = (tr.x_last - x) ** 2 + (tr.y_last - y) ** 2
            if d2 < best_d2 or (d2 == best_d2 and (best < 0 or k > best)):
                best, best_d2 = k, d2
        if best < 0:
            trajectories.append(CornerTrajectory([i], t, t, x, y))
            active.append(len(trajectories) - 1)
        else:
            tr = trajectories[best]
            tr.indices.append(i)
            tr.t_last, tr.x_last, tr.y_last = t, x, y

    valid = [tr for tr in trajectories if tr.is_valid(params.min_length)]
    on_valid = sum(len(tr) for tr in valid)
    mean_life = float(np.mean([tr.lifetime_ms for tr in valid])) if valid else 0.0
    validity = 100.0 * on_valid / len(ts) if ts else 0.0
    return TrackResult(trajectories, mean_life, validity, len(valid))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

METRIC_COLUMNS = ["detector", "reduction", "accuracy", "tpr", "mean_lifetime_ms",
                  "validity", "us_per_event", "mev_per_s"]
TIMING_COLUMNS = ("us_per_event", "mev_per_s")


def hardware_string() -> str:
    cpu = platform.processor() or platform.machine()
    return f"{platform.system()} {cpu} x{os.cpu_count()} python{platform.python_version()}"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "nan" if np.isnan(value) else f"{value:.6f}"
    return str(value)


def metrics_csv(rows: list[dict], header: dict | None = None) -> str:
    """Metric rows as CSV, preceded by ``# key=value`` provenance lines.

    The wall-clock columns are ``us_per_event`` and ``mev_per_s``; every
    other column is deterministic for a given stream and config.
    """
    buf = io.StringIO()
    for key, value in (header or {}).items():
        buf.write(f"# {key}={value}\n")
    buf.write(f"# timing_columns={','.join(TIMING_COLUMNS)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.get(col)) for col in METRIC_COLUMNS])
    return buf.getvalue()


@dataclass
class BenchReport:
    rows: list
    config_hash: str
    hardware: str

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# config_hash={self.config_hash}\n# hardware={self.hardware}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["detector", "us_per_event", "mev_per_s", "reduction"])
        for row in self.rows:
            writer.writerow([row["detector"], f"{row['us_per_event']:.4f}",
                             f"{row['mev_per_s']:.4f}", f"{row['reduction']:.2f}"])
        return buf.getvalue()

    def to_text(self) -> str:
        head = f"{'detector':<14}{'us/event':>12}{'Mev/s':>10}{'reduction %':>14}"
        lines = [f"config {self.config_hash} on {self.hardware}", head, "-" * len(head)]
        for row in self.rows:
            lines.append(f"{row['detector']:<14}{row['us_per_event']:>12.4f}"
                         f"{row['mev_per_s']:>10.3f}{row['reduction']:>14.2f}")
        return "\n".join(lines)


def bench_report(summaries, config_hash: str = "", hardware: str | None = None) -> BenchReport:
    """Table of per-detector speed, ordered fastest first.

    ``summaries`` is a sequence of :class:`~evcorner.pipeline.RunSummary`
    (or objects with the same attributes).
    """
    summaries = list(summaries)
    if not summaries:
        raise ValueError("bench_report needs at least one detector summary")
    rows = [{"detector": s.detector, "us_per_event": s.us_per_event,
             "mev_per_s": s.mev_per_s, "reduction": s.reduction} for s in summaries]
    rows.sort(key=lambda r: r["us_per_event"])
    return BenchReport(rows, config_hash, hardware or hardware_string())
