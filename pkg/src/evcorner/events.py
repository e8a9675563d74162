"""Event records, sensor geometry, time surfaces and stream I/O.

Events are held as numpy structured arrays of :data:`EVENT_DTYPE`
(``t`` in integer microseconds, ``x``/``y`` pixel coordinates, ``p`` the
polarity in ``{-1, 0, +1}`` where ``0`` means the sensor reports none).
"""
from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import BinaryIO, Iterable

import numpy as np

EVENT_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])

BINARY_MAGIC = b"EVT1"
HEADER_SIZE = 16
RECORD_SIZE = EVENT_DTYPE.itemsize  # 13, packed

POLARITY_NONE = 0
MIN_SIDE = 16


class EventFormatError(ValueError):
    """Malformed or inconsistent event data; the message names the location."""


@dataclass(frozen=True, slots=True)
class Event:
    x: int
    y: int
    t: int
    p: int = POLARITY_NONE

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError(f"negative pixel coordinate ({self.x}, {self.y})")
        if self.t < 0:
            raise ValueError(f"negative timestamp {self.t}")
        if self.p not in (-1, 0, 1):
            raise ValueError(f"polarity must be -1, 0 or +1, got {self.p}")

    @classmethod
    def from_record(cls, rec) -> "Event":
        return cls(int(rec["x"]), int(rec["y"]), int(rec["t"]), int(rec["p"]))


@dataclass(frozen=True, slots=True)
class SensorGeometry:
    width: int
    height: int

    def __post_init__(self):
        if self.width < MIN_SIDE or self.height < MIN_SIDE:
            raise ValueError(
                f"sensor geometry {self.width}x{self.height} is smaller than "
                f"{MIN_SIDE}x{MIN_SIDE}"
            )
        if self.width > 0xFFFF or self.height > 0xFFFF:
            raise ValueError("sensor geometry does not fit 16-bit coordinates")

    @classmethod
    def parse(cls, text: str) -> "SensorGeometry":
        """Parse ``"WxH"`` (e.g. ``"240x180"``)."""
        try:
            w, h = text.lower().split("x")
            return cls(int(w), int(h))
        except ValueError as exc:
            raise ValueError(f"invalid geometry {text!r}, expected WxH") from exc

    def contains(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def __str__(self):
        return f"{self.width}x{self.height}"


def make_events(t, x, y, p=None) -> np.ndarray:
    """Pack column arrays into a structured event array."""
    t = np.asarray(t)
    out = np.empty(t.shape[0], dtype=EVENT_DTYPE)
    out["t"] = t
    out["x"] = x
    out["y"] = y
    out["p"] = 0 if p is None else p
    return out


def events_from_list(events: Iterable[Event]) -> np.ndarray:
    rows = [(e.t, e.x, e.y, e.p) for e in events]
    return np.array(rows, dtype=EVENT_DTYPE)


# ---------------------------------------------------------------------------
# Time surface
# ---------------------------------------------------------------------------

class TimeSurface:
    """Per-pixel latest timestamp (global SAE).

    Parameters
    ----------
    geometry : SensorGeometry
        Full-resolution sensor size.
    scale : int
        Down-sampling factor ``s`` in ``{1, 2}``; the grid is
        ``ceil(H/s) x ceil(W/s)`` and event ``(x, y)`` owns cell
        ``(x // s, y // s)``.
    polarity_mode : {"merged", "split"}
        ``split`` keeps one grid per polarity; positive events use grid 1,
        negative and polarity-free events use grid 0.
    """

    def __init__(self, geometry: SensorGeometry, scale: int = 1,
                 polarity_mode: str = "merged"):
        if scale not in (1, 2):
            raise ValueError(f"scale must be 1 or 2, got {scale}")
        if polarity_mode not in ("merged", "split"):
            raise ValueError(f"unknown polarity mode {polarity_mode!r}")
        self.geometry = geometry
        self.scale = scale
        self.polarity_mode = polarity_mode
        n_pol = 2 if polarity_mode == "split" else 1
        h = -(-geometry.height // scale)
        w = -(-geometry.width // scale)
        self.cells = np.zeros((n_pol, h, w), dtype=np.int64)

    @property
    def shape(self):
        return self.cells.shape[1:]

    def grid_index(self, p: int) -> int:
        if self.polarity_mode == "merged":
            return 0
        return 1 if p > 0 else 0

    def update(self, e: Event) -> None:
        if not self.geometry.contains(e.x, e.y):
            raise ValueError(
                f"event at ({e.x}, {e.y}) is outside the {self.geometry} sensor"
            )
        grid = self.cells[self.grid_index(e.p)]
        cy, cx = e.y // self.scale, e.x // self.scale
        if e.t > grid[cy, cx]:
            grid[cy, cx] = e.t

    def patch(self, e: Event, radius: int) -> "LocalPatch":
        grid = self.cells[self.grid_index(e.p)]
        cy, cx = e.y // self.scale, e.x // self.scale
        h, w = grid.shape
        size = 2 * radius + 1
        values = np.zeros((size, size), dtype=np.int64)
        y0, y1 = max(cy - radius, 0), min(cy + radius + 1, h)
        x0, x1 = max(cx - radius, 0), min(cx + radius + 1, w)
        values[y0 - cy + radius:y1 - cy + radius,
               x0 - cx + radius:x1 - cx + radius] = grid[y0:y1, x0:x1]
        return LocalPatch(radius, int(e.t), values)

    def copy(self) -> "TimeSurface":
        other = TimeSurface(self.geometry, self.scale, self.polarity_mode)
        other.cells[...] = self.cells
        return other


@dataclass
class LocalPatch:
    """Square timestamp window around an event, row index = y offset."""

    radius: int
    center_t: int
    values: np.ndarray

    @property
    def size(self) -> int:
        return 2 * self.radius + 1

    def at(self, ux: int, uy: int) -> int:
        return int(self.values[uy + self.radius, ux + self.radius])


def sae_update(surface: TimeSurface, e: Event) -> None:
    surface.update(e)


def local_patch(surface: TimeSurface, e: Event, radius: int = 4) -> LocalPatch:
    return surface.patch(e, radius)


# ---------------------------------------------------------------------------
# Stream I/O
# ---------------------------------------------------------------------------

def _seconds_to_us(token: str) -> int:
    return int(round(Decimal(token) * 1_000_000))


def _check_order_and_bounds(events: np.ndarray, geometry: SensorGeometry | None,
                            where) -> None:
    if events.size == 0:
        return
    t = events["t"]
    bad = np.flatnonzero(t[1:] < t[:-1])
    if bad.size:
        i = int(bad[0]) + 1
        raise EventFormatError(
            f"non-monotone timestamp at {where(i)}: {int(t[i])} after {int(t[i - 1])}"
        )
    bad_p = np.flatnonzero((events["p"] < -1) | (events["p"] > 1))
    if bad_p.size:
        i = int(bad_p[0])
        raise EventFormatError(f"invalid polarity {int(events['p'][i])} at {where(i)}")
    if geometry is not None:
        out = np.flatnonzero((events["x"] >= geometry.width)
                             | (events["y"] >= geometry.height))
        if out.size:
            i = int(out[0])
            raise EventFormatError(
                f"event ({int(events['x'][i])}, {int(events['y'][i])}) at {where(i)} "
                f"is outside the {geometry} sensor"
            )


def _read_text(data: bytes, geometry: SensorGeometry | None):
    rows = []
    lines = []
    offset = 0
    for lineno, raw in enumerate(data.splitlines(keepends=True), start=1):
        line_offset = offset
        offset += len(raw)
        stripped = raw.strip()
        if not stripped or stripped.startswith(b"#"):
            continue
        parts = stripped.split()
        try:
            if len(parts) not in (3, 4):
                raise ValueError(f"expected 3 or 4 fields, got {len(parts)}")
            t = _seconds_to_us(parts[0].decode())
            x, y = int(parts[1]), int(parts[2])
            if len(parts) == 4:
                p01 = int(parts[3])
                if p01 not in (0, 1):
                    raise ValueError(f"polarity must be 0 or 1, got {p01}")
                p = 1 if p01 else -1
            else:
                p = POLARITY_NONE
            if t < 0 or x < 0 or y < 0:
                raise ValueError("negative field")
        except (ValueError, InvalidOperation, UnicodeDecodeError) as exc:
            raise EventFormatError(
                f"malformed event at line {lineno} (byte offset {line_offset}): {exc}"
            ) from None
        rows.append((t, x, y, p))
        lines.append(lineno)
    if rows and geometry is None:
        raise EventFormatError("text event streams need an explicit sensor geometry")
    try:
        events = np.array(rows, dtype=EVENT_DTYPE) if rows else np.empty(0, EVENT_DTYPE)
    except OverflowError as exc:
        raise EventFormatError(f"field out of range: {exc}") from None
    _check_order_and_bounds(events, geometry, lambda i: f"line {lines[i]}")
    return events


def _read_binary(data: bytes, geometry: SensorGeometry | None):
    if len(data) < HEADER_SIZE or data[:4] != BINARY_MAGIC:
        raise EventFormatError("missing EVT1 header at byte offset 0")
    width, height = struct.unpack_from("<HH", data, 4)
    header_geometry = SensorGeometry(width, height)
    body = len(data) - HEADER_SIZE
    if body % RECORD_SIZE:
        n_full = body // RECORD_SIZE
        raise EventFormatError(
            f"truncated record {n_full} at byte offset {HEADER_SIZE + n_full * RECORD_SIZE}"
        )
    events = np.frombuffer(data, dtype=EVENT_DTYPE, offset=HEADER_SIZE).copy()
    geometry = geometry or header_geometry
    _check_order_and_bounds(
        events, geometry,
        lambda i: f"record {i} (byte offset {HEADER_SIZE + i * RECORD_SIZE})",
    )
    return events, geometry


def detect_format(path) -> str:
    name = os.fspath(path).lower()
    return "binary" if name.endswith((".bin", ".evt")) else "text"


def read_events(source, fmt: str | None = None,
                geometry: SensorGeometry | None = None):
    """Read an event stream.

    Parameters
    ----------
    source : path-like or binary file object
    fmt : {"text", "binary"}, optional
        Guessed from the file extension when omitted (``.bin`` is binary).
    geometry : SensorGeometry, optional
        Required for text streams; overrides the binary header otherwise.

    Returns
    -------
    events : ndarray of EVENT_DTYPE
    geometry : SensorGeometry or None
    """
    if hasattr(source, "read"):
        data = source.read()
        fmt = fmt or "binary"
    else:
        fmt = fmt or detect_format(source)
        with open(source, "rb") as fh:
            data = fh.read()
    if fmt == "binary":
        return _read_binary(data, geometry)
    if fmt == "text":
        return _read_text(data, geometry), geometry
    raise ValueError(f"unknown event format {fmt!r}")


def write_events(dest, events: np.ndarray, geometry: SensorGeometry,
                 fmt: str | None = None) -> None:
    """Write events as text (``t_seconds x y p``) or packed binary.

    Polarity-free events are written in text form with the polarity column
    omitted.
    """
    if hasattr(dest, "write"):
        fmt = fmt or "binary"
        _write(dest, events, geometry, fmt)
    else:
        fmt = fmt or detect_format(dest)
        with open(dest, "wb") as fh:
            _write(fh, events, geometry, fmt)


def _write(fh: BinaryIO, events: np.ndarray, geometry: SensorGeometry, fmt: str):
    events = np.asarray(events, dtype=EVENT_DTYPE)
    if fmt == "binary":
        fh.write(BINARY_MAGIC + struct.pack("<HH", geometry.width, geometry.height)
                 + bytes(8))
        fh.write(events.tobytes())
    elif fmt == "text":
        buf = io.StringIO()
        for t, x, y, p in zip(events["t"].tolist(), events["x"].tolist(),
                              events["y"].tolist(), events["p"].tolist()):
            stamp = f"{t // 1_000_000}.{t % 1_000_000:06d}"
            if p == 0:
                buf.write(f"{stamp} {x} {y}\n")
            else:
                buf.write(f"{stamp} {x} {y} {1 if p > 0 else 0}\n")
        fh.write(buf.getvalue().encode())
    else:
        raise ValueError(f"unknown event format {fmt!r}")
