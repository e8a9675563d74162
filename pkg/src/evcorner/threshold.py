"""Adaptive global time threshold (TGF) and the filters built on it.

TGF is recomputed once per accumulation interval ``TD`` from the number of
events seen in that interval::

    TGF_j = 0.05 * TGF_{j-1} + 0.95 * T_c / (lambda * N_e_j)
    T_c   = TD * W * H / s**2

The GF filter keeps one timestamp per ``s x s`` pixel group and lets an
event through when its group fired within the last TGF microseconds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import Event, SensorGeometry, TimeSurface

SMOOTH_PREVIOUS = 0.05
SMOOTH_CURRENT = 0.95

SIGNAL = True
NOISE = False


@dataclass
class TgfState:
    """Rolling statistics behind the smoothed threshold.

    ``tgf`` stays ``0.0`` until the first interval completes.
    """

    td_us: int
    t_c: float
    lam: float = 1.0
    s: int = 2
    n_e: int = 0
    tgf: float = 0.0
    interval_start: int | None = None
    intervals: int = 0

    def __post_init__(self):
        if self.td_us <= 0:
            raise ValueError(f"td_us must be > 0, got {self.td_us}")
        if self.lam < 1:
            raise ValueError(f"texture factor lambda must be >= 1, got {self.lam}")
        if self.s < 1:
            raise ValueError(f"subsampling window must be >= 1, got {self.s}")

    @classmethod
    def for_geometry(cls, geometry: SensorGeometry, td_us: int = 10_000,
                     lam: float = 1.0, s: int = 2) -> "TgfState":
        t_c = td_us * geometry.width * geometry.height / (s * s)
        return cls(td_us=int(td_us), t_c=float(t_c), lam=float(lam), s=int(s))

    @property
    def ready(self) -> bool:
        return self.intervals > 0

    def steady_state(self, n_e: int) -> float:
        """Fixed point of the smoothing recursion for a constant count."""
        return self.t_c / (self.lam * n_e)


def tgf_update(state: TgfState, e: Event | int) -> float:
    """Count one event and close the interval when ``TD`` has elapsed.

    The event that closes an interval is counted in it; the next interval
    starts at its timestamp. Returns the threshold in force after the call.
    """
    t = e.t if isinstance(e, Event) else int(e)
    if state.interval_start is None:
        state.interval_start = t
    state.n_e += 1
    if t - state.interval_start >= state.td_us:
        # n_e >= 1 here since the closing event itself was counted
        raw = state.t_c / (state.lam * state.n_e)
        if state.intervals == 0:
            state.tgf = raw
        else:
            state.tgf = SMOOTH_PREVIOUS * state.tgf + SMOOTH_CURRENT * raw
        state.intervals += 1
        state.n_e = 0
        state.interval_start = t
    return state.tgf


class FilterGrid(TimeSurface):
    """Latest timestamp per ``s x s`` pixel group (polarity merged)."""

    def __init__(self, geometry: SensorGeometry, s: int = 2):
        super().__init__(geometry, scale=s, polarity_mode="merged")

    def last(self, x: int, y: int) -> int:
        return int(self.cells[0, y // self.scale, x // self.scale])

    def stamp(self, x: int, y: int, t: int) -> None:
        self.cells[0, y // self.scale, x // self.scale] = t


def gf_filter(grid: FilterGrid, e: Event, tgf: float) -> bool:
    """Return ``SIGNAL`` (True) or ``NOISE`` (False) and stamp the group.

    Before a threshold exists (``tgf <= 0``) every event is signal. After
    that, an event is signal only if its group has fired before and did so
    at most ``tgf`` microseconds ago.
    """
    last = grid.last(e.x, e.y)
    grid.stamp(e.x, e.y, e.t)
    if tgf <= 0:
        return SIGNAL
    return last > 0 and e.t - last <= tgf


class RefractoryGrid(TimeSurface):
    """Full-resolution per-pixel stamps for the refractory filter.

    Cells start at a far-past sentinel instead of 0 so that an event at
    ``t = 0`` still counts as a previous event.
    """

    NEVER = np.iinfo(np.int64).min // 2

    def __init__(self, geometry: SensorGeometry, polarity_mode: str = "split"):
        super().__init__(geometry, scale=1, polarity_mode=polarity_mode)
        self.cells.fill(self.NEVER)


def refractory_filter(last_per_pixel: TimeSurface, e: Event, period: int) -> bool:
    """eFilter-style suppression of same-pixel, same-polarity repeats.

    Returns True when the event passes, i.e. unless the previous event on
    the same pixel and polarity grid is closer than ``period``. The pixel
    stamp is refreshed either way.
    """
    grid = last_per_pixel.cells[last_per_pixel.grid_index(e.p)]
    last = int(grid[e.y, e.x])
    grid[e.y, e.x] = e.t
    return not e.t - last < period
