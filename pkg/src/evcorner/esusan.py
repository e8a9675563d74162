"""eSUSAN: USAN counting on a time surface with three nested disc masks.

A neighbour belongs to the USAN of event ``e`` when its timestamp is at
most TGF older than ``e``. Counts are taken over three concentric lattice
discs (``|u|^2 <= 5, 10, 17``; 21, 37 and 57 pixels) and the event is a
corner only if every count lies inside its ``[g_noise, g]`` band.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .events import LocalPatch

RADIUS = 4
DISC_RADII_SQ = (5, 10, 17)
N_MAX = (21, 37, 57)
N_EDGE = (13, 22, 33)


class CornerClass(Enum):
    CORNER = "corner"
    EDGE = "edge"
    NOISE = "noise"


_CLASS_FROM_CODE = {
    _kernels.CLS_CORNER: CornerClass.CORNER,
    _kernels.CLS_EDGE: CornerClass.EDGE,
    _kernels.CLS_NOISE: CornerClass.NOISE,
}


@dataclass(frozen=True)
class KernelMasks:
    """Nested disc offsets ``D1 ⊂ D2 ⊂ D3`` as ``(ux, uy)`` pairs.

    ``parts[r]`` lists each disc in row-major order. ``dx``/``dy`` hold all
    57 offsets ring by ring (inner disc first) for the compiled counter,
    and ``ends`` the cumulative ring boundaries.
    """

    parts: tuple
    dx: np.ndarray = field(repr=False)
    dy: np.ndarray = field(repr=False)
    ends: np.ndarray = field(repr=False)

    @property
    def n_max(self) -> tuple:
        return tuple(len(part) for part in self.parts)

    def contains(self, r: int, offset) -> bool:
        return tuple(offset) in set(self.parts[r])


def build_masks() -> KernelMasks:
    lattice = [(ux, uy) for uy in range(-RADIUS, RADIUS + 1)
               for ux in range(-RADIUS, RADIUS + 1)]
    parts = tuple(
        tuple(u for u in lattice if u[0] ** 2 + u[1] ** 2 <= r2) for r2 in DISC_RADII_SQ
    )
    rings = []
    seen = set()
    for part in parts:
        rings.extend(u for u in part if u not in seen)
        seen.update(part)
    dx = np.array([u[0] for u in rings], dtype=np.int64)
    dy = np.array([u[1] for u in rings], dtype=np.int64)
    ends = np.array([len(part) for part in parts], dtype=np.int64)
    for arr in (dx, dy, ends):
        arr.setflags(write=False)
    masks = KernelMasks(parts, dx, dy, ends)
    assert masks.n_max == N_MAX
    return masks


@dataclass(frozen=True)
class GeometricThresholds:
    """Per-part corner band ``g_noise[r] <= n_r <= g[r]``.

    The default ``g`` sits at the midpoint of ``[n_max / 2, n_edge]`` and
    ``g_noise`` near ``n_max / 8``.
    """

    g: tuple = (12, 20, 31)
    g_noise: tuple = (3, 5, 8)

    def __post_init__(self):
        if len(self.g) != 3 or len(self.g_noise) != 3:
            raise ValueError("g and g_noise need exactly three entries")
        for r in range(3):
            if not N_MAX[r] / 8 <= self.g_noise[r] < self.g[r] <= N_EDGE[r]:
                raise ValueError(
                    f"part {r + 1}: need {N_MAX[r]}/8 <= g_noise ({self.g_noise[r]}) "
                    f"< g ({self.g[r]}) <= {N_EDGE[r]}"
                )

    def arrays(self):
        return (np.asarray(self.g, dtype=np.int64),
                np.asarray(self.g_noise, dtype=np.int64))


def _patch_values(patch):
    if isinstance(patch, LocalPatch):
        return patch.values, patch.center_t
    arr = np.asarray(patch)
    return arr, arr[arr.shape[0] // 2, arr.shape[1] // 2]


def usan_membership(patch, u, tgf: float) -> int:
    """1 if the cell at offset ``u = (ux, uy)`` is within TGF of the center."""
    if not tgf > 0:
        raise ValueError(f"tgf must be > 0, got {tgf}")
    values, t_i = _patch_values(patch)
    radius = values.shape[0] // 2
    ux, uy = u
    if abs(ux) > radius or abs(uy) > radius:
        raise ValueError(f"offset {u} lies outside the radius-{radius} patch")
    return int(int(t_i) - int(values[uy + radius, ux + radius]) <= tgf)


def usan_counts(patch, masks: KernelMasks | None = None, tgf: float = 1.0,
                t_i=None) -> tuple:
    """Cumulative counts ``(n1, n2, n3)`` of USAN cells per disc."""
    masks = masks or default_masks()
    values, center_t = _patch_values(patch)
    if values.shape[0] < 2 * RADIUS + 1:
        raise ValueError(f"patch must be at least {2 * RADIUS + 1} cells wide")
    t_i = center_t if t_i is None else t_i
    radius = values.shape[0] // 2
    grid = np.ascontiguousarray(values, dtype=np.int64)
    return _kernels.usan_counts_at(grid, radius, radius, int(t_i), float(tgf),
                                   masks.dx, masks.dy, masks.ends)


def classify_corner(counts, thresholds: GeometricThresholds | None = None) -> CornerClass:
    thresholds = thresholds or GeometricThresholds()
    g, g_noise = thresholds.arrays()
    n1, n2, n3 = (int(c) for c in counts)
    return _CLASS_FROM_CODE[_kernels.classify_counts(n1, n2, n3, g, g_noise)]


def esusan_detect(patch, tgf: float, thresholds: GeometricThresholds | None = None,
                  masks: KernelMasks | None = None) -> CornerClass:
    return classify_corner(usan_counts(patch, masks, tgf), thresholds)


_MASKS = None


def default_masks() -> KernelMasks:
    global _MASKS
    if _MASKS is None:
        _MASKS = build_masks()
    return _MASKS
