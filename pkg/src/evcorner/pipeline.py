"""Per-event detection pipelines.

Every event goes through, in order: TGF update, optional refractory
filter, GF filter, surface update (signal events only) and then the
selected detector:

* ``esusan``       eSUSAN classification only
* ``aed-eharris``  Harris on the AED-normalized surface for every signal event
* ``g-eharris``    Harris on the binary (newest ``n_l`` cells) surface
* ``se-harris``    eSUSAN candidates refined by AED Harris

Labels always carry the raw event coordinates, also when detection runs on
the down-sampled surface.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, fields
from enum import Enum, IntEnum
from typing import Callable

import numpy as np

from . import _kernels
from .esusan import GeometricThresholds, default_masks
from .events import EVENT_DTYPE, Event, SensorGeometry, TimeSurface
from .harris import HarrisParams
from .normalization import build_aed_table
from .threshold import FilterGrid, RefractoryGrid, TgfState
from .validation import check_events

HIGH_RES_SIDE = 400


class Stage(IntEnum):
    NOISE = _kernels.NOISE
    NON_CORNER = _kernels.NON_CORNER
    CANDIDATE = _kernels.CANDIDATE
    CORNER = _kernels.CORNER

    @property
    def text(self) -> str:
        return self.name.lower().replace("_", "-")

    @classmethod
    def from_text(cls, text: str) -> "Stage":
        return cls[text.strip().upper().replace("-", "_")]


class Detector(Enum):
    ESUSAN = "esusan"
    AED_EHARRIS = "aed-eharris"
    G_EHARRIS = "g-eharris"
    SE_HARRIS = "se-harris"
    FILTER = "filter"

    @property
    def code(self) -> int:
        return _DETECTOR_CODES[self]

    @property
    def runs_harris(self) -> bool:
        return self in (Detector.AED_EHARRIS, Detector.G_EHARRIS, Detector.SE_HARRIS)


_DETECTOR_CODES = {
    Detector.ESUSAN: _kernels.ESUSAN,
    Detector.AED_EHARRIS: _kernels.AED_EHARRIS,
    Detector.G_EHARRIS: _kernels.G_EHARRIS,
    Detector.SE_HARRIS: _kernels.SE_HARRIS,
    Detector.FILTER: _kernels.FILTER_ONLY,
}

DETECTORS = tuple(d for d in Detector if d is not Detector.FILTER)


@dataclass(frozen=True)
class DetectorConfig:
    """Every tunable of the pipeline, flat so it hashes and prints simply."""

    td_us: int = 10_000
    lam: float = 1.0
    s: int = 2
    refractory_period_us: int = 0
    g: tuple = (12, 20, 31)
    g_noise: tuple = (3, 5, 8)
    sobel_size: int = 7
    harris_threshold: float | None = None
    k: float = 0.04
    sigma: float = 2.0
    aed_tau: float = 1.0
    aed_resolution: int = 4096
    aed_max_ratio: float = 2.0
    n_l: int = 25
    surface: str = "auto"
    polarity: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(int(v) for v in self.g))
        object.__setattr__(self, "g_noise", tuple(int(v) for v in self.g_noise))
        if self.surface not in ("auto", "full", "down2"):
            raise ValueError(f"surface must be auto, full or down2, got {self.surface!r}")
        if self.polarity not in ("auto", "merged", "split"):
            raise ValueError(
                f"polarity must be auto, merged or split, got {self.polarity!r}")
        if self.refractory_period_us < 0:
            raise ValueError("refractory period must be >= 0")
        if self.s < 1:
            raise ValueError("tgf.s must be >= 1")
        if self.td_us <= 0:
            raise ValueError("tgf.td_us must be > 0")
        if self.lam < 1:
            raise ValueError(f"tgf.lambda must be >= 1, got {self.lam}")
        if not 0 < self.n_l <= 81:
            raise ValueError("n_l must lie in [1, 81]")
        # validate the nested parameter groups eagerly
        self.thresholds()
        self.harris_params()

    def thresholds(self) -> GeometricThresholds:
        return GeometricThresholds(self.g, self.g_noise)

    def harris_params(self) -> HarrisParams:
        return HarrisParams(self.sobel_size, self.harris_threshold, self.k, self.sigma)

    def detection_scale(self, geometry: SensorGeometry) -> int:
        if self.surface == "full":
            return 1
        if self.surface == "down2":
            return 2
        return 2 if min(geometry.width, geometry.height) > HIGH_RES_SIDE else 1

    def polarity_mode(self, has_polarity: bool = True) -> str:
        if self.polarity != "auto":
            return self.polarity
        return "split" if has_polarity else "merged"

    def replace(self, **changes) -> "DetectorConfig":
        values = asdict(self)
        values.update(changes)
        return DetectorConfig(**values)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class EventLabel:
    event: Event
    stage: Stage
    score: float | None
    detector: Detector


class PipelineState:
    """Mutable state of one pipeline instance.

    Parameters
    ----------
    geometry : SensorGeometry
    config : DetectorConfig
    detector : Detector or str
    has_polarity : bool
        Resolves ``polarity="auto"``: split surfaces when the stream carries
        polarity.
    """

    def __init__(self, geometry: SensorGeometry, config: DetectorConfig | None = None,
                 detector: Detector | str = Detector.SE_HARRIS,
                 has_polarity: bool = True):
        self.geometry = geometry
        self.config = config = config or DetectorConfig()
        self.detector = Detector(detector)
        self.polarity_mode = config.polarity_mode(has_polarity)
        self.scale = config.detection_scale(geometry)

        self.tgf = TgfState.for_geometry(geometry, config.td_us, config.lam, config.s)
        self.filter_grid = FilterGrid(geometry, config.s)
        self.refractory = RefractoryGrid(geometry, self.polarity_mode)
        self.surface = TimeSurface(geometry, 1, self.polarity_mode)
        self.down_surface = TimeSurface(geometry, 2, self.polarity_mode)
        self.table = build_aed_table(config.aed_resolution, config.aed_max_ratio,
                                     config.aed_tau)
        self.masks = default_masks()
        self.thresholds = config.thresholds()
        self.harris = config.harris_params()

        self._istate = np.zeros(4, dtype=np.int64)
        self._fstate = np.array([0.0, self.tgf.t_c, self.tgf.lam])
        self._g, self._g_noise = self.thresholds.arrays()
        self.events_seen = 0
        self._last_t = None
        self._run(np.empty(0, dtype=EVENT_DTYPE))  # compile or load cached kernels

    @property
    def detection_surface(self) -> TimeSurface:
        return self.down_surface if self.scale == 2 else self.surface

    @property
    def current_tgf(self) -> float:
        return float(self._fstate[_kernels.F_TGF])

    def sync_tgf(self) -> TgfState:
        """Copy the compiled counters into ``self.tgf`` and return it."""
        self.tgf.tgf = float(self._fstate[_kernels.F_TGF])
        self.tgf.n_e = int(self._istate[_kernels.I_NE])
        self.tgf.intervals = int(self._istate[_kernels.I_INTERVALS])
        if self._istate[_kernels.I_HAS_START]:
            self.tgf.interval_start = int(self._istate[_kernels.I_START])
        return self.tgf

    def _run(self, events: np.ndarray):
        n = events.shape[0]
        labels = np.empty(n, dtype=np.int8)
        scores = np.empty(n, dtype=np.float64)
        t = events["t"].astype(np.int64)
        x = events["x"].astype(np.int64)
        y = events["y"].astype(np.int64)
        p = events["p"].astype(np.int64)
        h = self.harris
        _kernels.process_events(
            t, x, y, p, labels, scores,
            self._istate, self._fstate, self.tgf.td_us, self.tgf.s,
            self.filter_grid.cells[0], self.refractory.cells,
            self.config.refractory_period_us,
            self.surface.cells, self.down_surface.cells,
            self.detector.code, self.scale, self.polarity_mode == "split",
            self.masks.dx, self.masks.dy, self.masks.ends, self._g, self._g_noise,
            h.radius, h.kx, h.ky, h.window, h.k, float(h.score_threshold),
            self.table.entries, self.table.resolution / self.table.max_ratio,
            self.table.tau, self.config.n_l,
        )
        return labels, scores

    def process(self, events: np.ndarray):
        """Label a batch of events that continues the stream.

        Returns ``(stages, scores)``; scores are NaN where Harris did not run.
        """
        if events.size:
            if self._last_t is not None and int(events["t"][0]) < self._last_t:
                raise ValueError(
                    f"non-monotone timestamp: {int(events['t'][0])} after {self._last_t}")
            self._last_t = int(events["t"][-1])
        labels, scores = self._run(events)
        self.events_seen += events.shape[0]
        return labels, scores


def process_event(state: PipelineState, e: Event) -> EventLabel:
    if not state.geometry.contains(e.x, e.y):
        raise ValueError(f"event at ({e.x}, {e.y}) is outside the {state.geometry} sensor")
    arr = np.array([(e.t, e.x, e.y, e.p)], dtype=EVENT_DTYPE)
    labels, scores = state.process(arr)
    score = None if np.isnan(scores[0]) else float(scores[0])
    return EventLabel(e, Stage(int(labels[0])), score, state.detector)


@dataclass
class RunSummary:
    detector: str
    n_events: int = 0
    counts: dict = field(default_factory=lambda: {s.text: 0 for s in Stage})
    elapsed_s: float = 0.0

    @property
    def signal_events(self) -> int:
        return self.n_events - self.counts["noise"]

    @property
    def corners(self) -> int:
        return self.counts["corner"]

    @property
    def candidates(self) -> int:
        return self.counts["candidate"] + self.counts["corner"]

    @property
    def us_per_event(self) -> float:
        return 1e6 * self.elapsed_s / self.n_events if self.n_events else 0.0

    @property
    def mev_per_s(self) -> float:
        return self.n_events / self.elapsed_s / 1e6 if self.elapsed_s > 0 else 0.0

    @property
    def reduction(self) -> float:
        """Percentage of signal (post-filter) events not labeled corner."""
        if self.signal_events == 0:
            return 0.0
        return 100.0 * (1.0 - self.corners / self.signal_events)

    @property
    def input_reduction(self) -> float:
        """Percentage of all input events not labeled corner."""
        if self.n_events == 0:
            return 0.0
        return 100.0 * (1.0 - self.corners / self.n_events)


Sink = Callable[[np.ndarray, np.ndarray, np.ndarray], None]


def run_stream(state: PipelineState, events, sink: Sink | None = None,
               chunk_size: int = 1 << 16) -> RunSummary:
    """Push a whole stream through ``state``.

    Labels are handed to ``sink(events, stages, scores)`` chunk by chunk.
    Only the detection calls are timed; validation and the sink are not.
    """
    events = check_events(events, state.geometry)
    summary = RunSummary(state.detector.value)
    for start in range(0, events.shape[0], chunk_size):
        batch = events[start:start + chunk_size]
        tic = time.perf_counter()
        labels, scores = state.process(batch)
        summary.elapsed_s += time.perf_counter() - tic
        summary.n_events += batch.shape[0]
        for code, count in zip(*np.unique(labels, return_counts=True)):
            summary.counts[Stage(int(code)).text] += int(count)
        if sink is not None:
            sink(batch, labels, scores)
    return summary


class LabelCollector:
    """Sink that keeps every chunk; ``result()`` concatenates them."""

    def __init__(self):
        self._events, self._labels, self._scores = [], [], []

    def __call__(self, events, labels, scores):
        self._events.append(events)
        self._labels.append(labels)
        self._scores.append(scores)

    def result(self):
        if not self._events:
            return (np.empty(0, dtype=EVENT_DTYPE), np.empty(0, dtype=np.int8),
                    np.empty(0))
        return (np.concatenate(self._events), np.concatenate(self._labels),
                np.concatenate(self._scores))


def label_stream(events, geometry: SensorGeometry, detector: Detector | str,
                 config: DetectorConfig | None = None):
    """Fresh-state convenience: returns ``(events, stages, scores, summary)``."""
    events = check_events(events, geometry)
    state = PipelineState(geometry, config, detector,
                          has_polarity=bool(np.any(events["p"] != 0)))
    sink = LabelCollector()
    summary = run_stream(state, events, sink)
    ev, labels, scores = sink.result()
    return ev, labels, scores, summary
