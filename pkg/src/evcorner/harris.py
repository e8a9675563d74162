"""Event-based Harris scoring on normalized local time surfaces."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import _kernels
from .events import Event, TimeSurface
from .normalization import (AedLookupTable, NormalizedPatch, default_aed_table,
                            normalize_aed, normalize_binary)

DEFAULT_THRESHOLDS = {5: 8.0, 7: 16.0}


@dataclass(frozen=True)
class HarrisParams:
    """Harris configuration.

    ``score_threshold`` defaults to 16 for 7x7 Sobel kernels and 8 for
    5x5 ones.
    """

    sobel_size: int = 7
    score_threshold: float | None = None
    k: float = 0.04
    gaussian_sigma: float = 2.0
    radius: int = 4
    kx: np.ndarray = field(init=False, repr=False, compare=False)
    ky: np.ndarray = field(init=False, repr=False, compare=False)
    window: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.sobel_size % 2 == 0 or self.sobel_size < 3:
            raise ValueError(f"sobel_size must be odd and >= 3, got {self.sobel_size}")
        if self.sobel_size > 2 * self.radius + 1:
            raise ValueError(
                f"sobel_size {self.sobel_size} exceeds the {2 * self.radius + 1}-wide patch"
            )
        if not self.k > 0:
            raise ValueError(f"k must be > 0, got {self.k}")
        if not self.gaussian_sigma > 0:
            raise ValueError("gaussian_sigma must be > 0")
        if self.score_threshold is None:
            object.__setattr__(self, "score_threshold",
                               DEFAULT_THRESHOLDS.get(self.sobel_size, 16.0))
        kx, ky = sobel_kernels(self.sobel_size)
        n_valid = 2 * self.radius + 1 - self.sobel_size + 1
        object.__setattr__(self, "kx", kx)
        object.__setattr__(self, "ky", ky)
        object.__setattr__(self, "window", gaussian_window(n_valid, self.gaussian_sigma))


def _binomial(order: int) -> np.ndarray:
    return np.array([comb(order, i) for i in range(order + 1)], dtype=np.float64)


def sobel_kernels(size: int = 7):
    """Sobel derivative kernels ``(kx, ky)`` of odd ``size``.

    ``kx = smooth^T @ deriv`` where ``smooth`` is the binomial row of order
    ``size - 1`` and ``deriv`` the order ``size - 3`` binomial convolved with
    ``[-1, 0, 1]``; ``ky`` is the transpose.
    """
    if size < 3 or size % 2 == 0:
        raise ValueError(f"Sobel size must be odd and >= 3, got {size}")
    smooth = _binomial(size - 1)
    deriv = np.convolve(_binomial(size - 3), [-1.0, 0.0, 1.0])
    kx = np.outer(smooth, deriv)
    ky = np.ascontiguousarray(kx.T)
    kx.setflags(write=False)
    ky.setflags(write=False)
    return kx, ky


def gaussian_window(n: int, sigma: float) -> np.ndarray:
    """Normalized ``n x n`` Gaussian centered on the grid."""
    c = (n - 1) / 2.0
    d = np.arange(n) - c
    w = np.exp(-(d[:, None] ** 2 + d[None, :] ** 2) / (2.0 * sigma * sigma))
    w /= w.sum()
    w.setflags(write=False)
    return w


def harris_matrix(norm_patch, params: HarrisParams | None = None) -> np.ndarray:
    """2x2 structure tensor of a normalized patch.

    Gradients come from valid (fully overlapping) kernel positions only and
    are weighted by the Gaussian window before summing their outer products.
    """
    params = params or HarrisParams()
    values = norm_patch.values if isinstance(norm_patch, NormalizedPatch) else norm_patch
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.shape[0] < params.sobel_size or values.shape[1] < params.sobel_size:
        raise ValueError(
            f"patch {values.shape} is smaller than the {params.sobel_size}x"
            f"{params.sobel_size} Sobel kernel"
        )
    n_valid = values.shape[0] - params.sobel_size + 1
    window = params.window
    if window.shape[0] != n_valid:
        window = gaussian_window(n_valid, params.gaussian_sigma)
    mxx, mxy, myy = _kernels.structure_tensor(values, params.kx, params.ky, window)
    return np.array([[mxx, mxy], [mxy, myy]])


def harris_score(m, k: float = 0.04) -> float:
    m = np.asarray(m, dtype=np.float64)
    return float(_kernels.harris_response(m[0, 0], m[0, 1], m[1, 1], k))


def _detect(norm: NormalizedPatch, params: HarrisParams):
    score = harris_score(harris_matrix(norm, params), params.k)
    return score > params.score_threshold, score


def aed_eharris_detect(e: Event, surface: TimeSurface, tgf: float,
                       table: AedLookupTable | None = None,
                       params: HarrisParams | None = None):
    """Score ``e`` with Harris on its AED-normalized local surface.

    ``surface`` must already contain ``e``. Returns ``(is_corner, score)``.
    """
    params = params or HarrisParams()
    patch = surface.patch(e, params.radius)
    norm = normalize_aed(patch, patch.center_t, tgf, table or default_aed_table())
    return _detect(norm, params)


def g_eharris_detect(e: Event, surface: TimeSurface,
                     params: HarrisParams | None = None, n_l: int = 25):
    """Harris on the binary surface marking the ``n_l`` newest cells."""
    params = params or HarrisParams()
    patch = surface.patch(e, params.radius)
    return _detect(normalize_binary(patch, n_l), params)
