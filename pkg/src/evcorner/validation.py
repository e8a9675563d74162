"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""
from __future__ import annotations

import numpy as np

from .events import EVENT_DTYPE, MIN_SIDE, SensorGeometry


def check_events(X, geometry: SensorGeometry | None = None) -> np.ndarray:
    """Validate an event stream and return it as a structured array.

    ``X`` may be a structured array with fields ``t, x, y, p`` or a numeric
    array of shape ``(n, 4)`` (columns ``t, x, y, p``) or ``(n, 3)`` (no
    polarity). Timestamps must be non-decreasing; coordinates must fall
    inside ``geometry`` when one is given.
    """
    if isinstance(X, np.ndarray) and X.dtype.names is not None:
        missing = {"t", "x", "y"} - set(X.dtype.names)
        if missing:
            raise ValueError(f"event array lacks fields {sorted(missing)}")
        out = np.empty(X.shape[0], dtype=EVENT_DTYPE)
        for name in ("t", "x", "y"):
            col = X[name]
            if np.any(col < 0):
                raise ValueError(f"negative values in field {name!r}")
            out[name] = col
        out["p"] = X["p"] if "p" in X.dtype.names else 0
    else:
        arr = np.asarray(X)
        if arr.ndim != 2 or arr.shape[1] not in (3, 4):
            if arr.size == 0:
                return np.empty(0, dtype=EVENT_DTYPE)
            raise ValueError(
                f"expected a structured event array or shape (n, 3|4), got {arr.shape}"
            )
        if not np.issubdtype(arr.dtype, np.number):
            raise ValueError(f"non-numeric event array of dtype {arr.dtype}")
        if np.any(arr[:, :3] < 0):
            raise ValueError("negative timestamp or coordinate")
        if np.issubdtype(arr.dtype, np.floating) and not np.all(arr == np.round(arr)):
            raise ValueError("event columns must hold integers")
        out = np.empty(arr.shape[0], dtype=EVENT_DTYPE)
        out["t"] = arr[:, 0]
        out["x"] = arr[:, 1]
        out["y"] = arr[:, 2]
        out["p"] = arr[:, 3] if arr.shape[1] == 4 else 0

    if out.size:
        if np.any((out["p"] < -1) | (out["p"] > 1)):
            raise ValueError("polarity values must lie in {-1, 0, +1}")
        t = out["t"]
        bad = np.flatnonzero(t[1:] < t[:-1])
        if bad.size:
            i = int(bad[0]) + 1
            raise ValueError(
                f"non-monotone timestamp at event {i}: {int(t[i])} after {int(t[i - 1])}"
            )
        if geometry is not None:
            outside = np.flatnonzero((out["x"] >= geometry.width)
                                     | (out["y"] >= geometry.height))
            if outside.size:
                i = int(outside[0])
                raise ValueError(
                    f"event {i} at ({int(out['x'][i])}, {int(out['y'][i])}) is "
                    f"outside the {geometry} sensor"
                )
    return out


def check_geometry(geometry, events: np.ndarray | None = None) -> SensorGeometry:
    """Resolve a geometry argument.

    Accepts a :class:`SensorGeometry`, a ``"WxH"`` string or a
    ``(width, height)`` pair. With ``None``, the geometry is inferred from
    ``events`` as the bounding box of their coordinates, padded to the
    16-pixel minimum.
    """
    if isinstance(geometry, SensorGeometry):
        return geometry
    if isinstance(geometry, str):
        return SensorGeometry.parse(geometry)
    if geometry is not None:
        w, h = geometry
        return SensorGeometry(int(w), int(h))
    if events is None or events.size == 0:
        raise ValueError("sensor geometry is unknown and cannot be inferred")
    return SensorGeometry(max(int(events["x"].max()) + 1, MIN_SIDE),
                          max(int(events["y"].max()) + 1, MIN_SIDE))


def check_positive(value, name: str, strict: bool = True):
    if strict and not value > 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    if not strict and not value >= 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return value
