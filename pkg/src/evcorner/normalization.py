"""Local SAE normalization schemes.

Every function takes a square timestamp patch (a :class:`LocalPatch` or a
2-D integer array) and returns a :class:`NormalizedPatch`. ``t_i`` is the
timestamp of the event at the patch center.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .events import Event, LocalPatch


@dataclass
class NormalizedPatch:
    radius: int
    values: np.ndarray
    vmax: float = 1.0
    method: str = ""

    @property
    def center(self) -> float:
        return float(self.values[self.radius, self.radius])


def _values(patch) -> np.ndarray:
    arr = patch.values if isinstance(patch, LocalPatch) else np.asarray(patch)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] % 2 == 0:
        raise ValueError(f"patch must be square with odd side, got {arr.shape}")
    return arr


def _radius(arr: np.ndarray) -> int:
    return arr.shape[0] // 2


def _center_t(patch, t_i):
    if t_i is not None:
        return t_i
    if isinstance(patch, LocalPatch):
        return patch.center_t
    arr = np.asarray(patch)
    return arr[arr.shape[0] // 2, arr.shape[1] // 2]


def normalize_minmax(patch) -> NormalizedPatch:
    v = _values(patch).astype(np.float64)
    lo, hi = v.min(), v.max()
    if hi == lo:
        out = np.ones_like(v)
    else:
        out = (v - lo) / (hi - lo)
    return NormalizedPatch(_radius(v), out, 1.0, "minmax")


def normalize_time_window(patch, t_i=None, tau: float = 1.0) -> NormalizedPatch:
    """1 where the cell is at most ``tau`` microseconds older than ``t_i``."""
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    v = _values(patch)
    age = _center_t(patch, t_i) - v.astype(np.float64)
    return NormalizedPatch(_radius(v), (age <= tau).astype(np.float64), 1.0, "window")


def normalize_linear(patch, t_i=None, tau: float = 1.0) -> NormalizedPatch:
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    v = _values(patch).astype(np.float64)
    age = _center_t(patch, t_i) - v
    out = np.where(age <= tau, 1.0 - age / tau, 0.0)
    return NormalizedPatch(_radius(v), out, 1.0, "linear")


def normalize_exp(patch, t_i=None, tau_e: float = 1e-4) -> NormalizedPatch:
    """Exponential decay ``exp(-tau_e * age)``; ``tau_e`` is in 1/us."""
    if not tau_e > 0:
        raise ValueError(f"tau_e must be > 0, got {tau_e}")
    v = _values(patch).astype(np.float64)
    age = _center_t(patch, t_i) - v
    return NormalizedPatch(_radius(v), np.exp(-tau_e * age), 1.0, "exp")


def _newest_first(v: np.ndarray) -> np.ndarray:
    # stable sort on -t keeps row-major order among equal stamps
    return np.argsort(-v.ravel().astype(np.float64), kind="stable")


def normalize_binary(patch, n_l: int = 25) -> NormalizedPatch:
    """Mark the ``n_l`` newest cells with 1.

    Ties between equal timestamps go to the smaller row-major index.
    """
    v = _values(patch)
    if not 0 < n_l <= v.size:
        raise ValueError(f"n_l must lie in [1, {v.size}], got {n_l}")
    flat = np.zeros(v.size)
    flat[_newest_first(v)[:n_l]] = 1.0
    return NormalizedPatch(_radius(v), flat.reshape(v.shape), 1.0, "binary")


def normalize_sorted(patch) -> NormalizedPatch:
    """Replace each cell by the rank of its timestamp (oldest = 0)."""
    v = _values(patch)
    order = np.argsort(v.ravel(), kind="stable")
    ranks = np.empty(v.size)
    ranks[order] = np.arange(v.size)
    return NormalizedPatch(_radius(v), ranks.reshape(v.shape), v.size - 1, "sorted")


def sits_update(sits_surface: np.ndarray, e: Event, radius: int = 4) -> None:
    """Speed-invariant time surface update, in place.

    Neighbours (within the frame) holding a value larger than the event
    pixel's value *before* the update are decremented by one, then the event
    pixel is set to ``(2R+1)**2``.
    """
    h, w = sits_surface.shape
    ref = sits_surface[e.y, e.x]
    y0, y1 = max(e.y - radius, 0), min(e.y + radius + 1, h)
    x0, x1 = max(e.x - radius, 0), min(e.x + radius + 1, w)
    window = sits_surface[y0:y1, x0:x1]
    window[window > ref] -= 1
    sits_surface[e.y, e.x] = (2 * radius + 1) ** 2


def normalize_sits(sits_surface: np.ndarray, e: Event, radius: int = 4) -> NormalizedPatch:
    """Cut the (zero-filled) neighbourhood of ``e`` out of a SITS surface."""
    h, w = sits_surface.shape
    size = 2 * radius + 1
    out = np.zeros((size, size))
    y0, y1 = max(e.y - radius, 0), min(e.y + radius + 1, h)
    x0, x1 = max(e.x - radius, 0), min(e.x + radius + 1, w)
    out[y0 - e.y + radius:y1 - e.y + radius,
        x0 - e.x + radius:x1 - e.x + radius] = sits_surface[y0:y1, x0:x1]
    return NormalizedPatch(radius, out, float(size * size), "sits")


# ---------------------------------------------------------------------------
# Adaptive exponential decay (AED)
# ---------------------------------------------------------------------------

def aed_exact(x):
    """``exp(-x**6)`` evaluated directly; reference for the lookup table."""
    x2 = np.square(np.asarray(x, dtype=np.float64))
    return np.exp(-(x2 * x2 * x2))


@dataclass(frozen=True)
class AedLookupTable:
    """Bucketed ``exp(-x**6)`` over ``x = age / (tau * TGF)``.

    Bucket ``k`` covers ``[k, k+1) * max_ratio / resolution`` and stores the
    function at the bucket center; ratios at or past ``max_ratio`` map to 0.
    """

    resolution: int
    max_ratio: float
    tau: float
    entries: np.ndarray = field(repr=False)

    @property
    def step(self) -> float:
        return self.max_ratio / self.resolution

    def lookup(self, x):
        x = np.asarray(x, dtype=np.float64)
        idx = np.floor(x * (self.resolution / self.max_ratio)).astype(np.int64)
        idx = np.maximum(idx, 0)
        inside = idx < self.resolution
        return np.where(inside, self.entries[np.minimum(idx, self.resolution - 1)], 0.0)


def build_aed_table(resolution: int = 4096, max_ratio: float = 2.0,
                    tau: float = 1.0) -> AedLookupTable:
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    if not max_ratio > 0 or not tau > 0:
        raise ValueError("max_ratio and tau must be > 0")
    x = (np.arange(resolution) + 0.5) * (max_ratio / resolution)
    entries = aed_exact(x)
    entries.setflags(write=False)
    return AedLookupTable(int(resolution), float(max_ratio), float(tau), entries)


def normalize_aed(patch, t_i=None, tgf: float = 0.0,
                  table: AedLookupTable | None = None) -> NormalizedPatch:
    """AED normalization ``exp(-(age / (tau * TGF))**6)`` via the table."""
    if not tgf > 0:
        raise ValueError(f"AED normalization needs a positive TGF, got {tgf}")
    table = table or default_aed_table()
    v = _values(patch).astype(np.float64)
    ratio = (_center_t(patch, t_i) - v) / (table.tau * tgf)
    return NormalizedPatch(_radius(v), table.lookup(ratio), 1.0, "aed")


_DEFAULT_TABLE = None


def default_aed_table() -> AedLookupTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = build_aed_table()
    return _DEFAULT_TABLE

