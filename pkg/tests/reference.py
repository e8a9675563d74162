"""Slow, explicit reference implementations used as test oracles.

Nothing here calls into the compiled kernels except ``reference_labels``,
which deliberately reuses the public per-event operations to check how the
pipeline wires them together.
"""
import math

import numpy as np

from evcorner import esusan, harris, normalization, threshold
from evcorner.events import Event, TimeSurface
from evcorner.pipeline import Detector, DetectorConfig, Stage

DISC_R2 = (5, 10, 17)


def brute_usan(patch, tgf, t_i=None):
    """Double loop over every cell of a 9x9 patch with explicit disc tests."""
    patch = np.asarray(patch)
    r = patch.shape[0] // 2
    if t_i is None:
        t_i = int(patch[r, r])
    counts = [0, 0, 0]
    for row in range(patch.shape[0]):
        for col in range(patch.shape[1]):
            ux, uy = col - r, row - r
            d2 = ux * ux + uy * uy
            similar = t_i - int(patch[row, col]) <= tgf
            for k, r2 in enumerate(DISC_R2):
                if d2 <= r2 and similar:
                    counts[k] += 1
    return tuple(counts)


def _conv_full(a, b):
    """Full 2-D convolution with explicit loops."""
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            for k in range(b.shape[0]):
                for m in range(b.shape[1]):
                    out[i + k, j + m] += a[i, j] * b[k, m]
    return out


def sobel_reference(size):
    """x-derivative Sobel kernel grown from the 3x3 one by binomial smoothing."""
    kx = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
    smooth = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]])
    while kx.shape[0] < size:
        kx = _conv_full(kx, smooth)
    return kx


def dense_harris_matrix(values, sobel_size=7, sigma=2.0):
    """Structure tensor by explicit per-pixel loops (no separability)."""
    values = np.asarray(values, dtype=np.float64)
    kx = sobel_reference(sobel_size)
    ky = kx.T
    n = values.shape[0] - sobel_size + 1
    c = (n - 1) / 2.0
    weights = np.array([[math.exp(-((i - c) ** 2 + (j - c) ** 2) / (2 * sigma * sigma))
                         for j in range(n)] for i in range(n)])
    weights /= weights.sum()
    m = np.zeros((2, 2))
    for i in range(n):
        for j in range(n):
            gx = gy = 0.0
            for a in range(sobel_size):
                for b in range(sobel_size):
                    gx += values[i + a, j + b] * kx[a, b]
                    gy += values[i + a, j + b] * ky[a, b]
            grad = np.array([gx, gy])
            m += weights[i, j] * np.outer(grad, grad)
    return m


def dense_harris_score(values, sobel_size=7, sigma=2.0, k=0.04):
    m = dense_harris_matrix(values, sobel_size, sigma)
    return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0] - k * (m[0, 0] + m[1, 1]) ** 2


def wedge_patch(angle_deg, radius=4, supersample=8):
    """Area fraction of each cell inside a wedge with its apex at the center.

    The wedge opens towards -y and is symmetric about that axis; 180 degrees
    is a half plane.
    """
    half = math.radians(angle_deg) / 2.0
    size = 2 * radius + 1
    offs = (np.arange(supersample) + 0.5) / supersample - 0.5
    out = np.zeros((size, size))
    for row in range(size):
        for col in range(size):
            x = col - radius + offs[None, :]
            y = row - radius + offs[:, None]
            # angle between (x, y) and the -y axis
            ang = np.abs(np.arctan2(x, -y))
            out[row, col] = np.mean(ang <= half + 1e-12)
    return out


def reference_labels(events, geometry, config=None, detector=Detector.SE_HARRIS,
                     has_polarity=True):
    """Per-event pipeline built from the public operations, in pure Python."""
    config = config or DetectorConfig()
    detector = Detector(detector)
    mode = config.polarity_mode(has_polarity)
    scale = config.detection_scale(geometry)
    tgf_state = threshold.TgfState.for_geometry(geometry, config.td_us, config.lam, config.s)
    filt = threshold.FilterGrid(geometry, config.s)
    refr = threshold.RefractoryGrid(geometry, mode)
    full = TimeSurface(geometry, 1, mode)
    down = TimeSurface(geometry, 2, mode)
    thresholds = config.thresholds()
    params = config.harris_params()
    table = normalization.build_aed_table(config.aed_resolution, config.aed_max_ratio,
                                          config.aed_tau)
    stages, scores = [], []
    for rec in events:
        e = Event.from_record(rec)
        score = float("nan")
        tgf = threshold.tgf_update(tgf_state, e)
        if config.refractory_period_us > 0 and not threshold.refractory_filter(
                refr, e, config.refractory_period_us):
            stage = Stage.NOISE
        elif not threshold.gf_filter(filt, e, tgf):
            stage = Stage.NOISE
        else:
            full.update(e)
            down.update(e)
            stage = None
            if tgf <= 0 or detector is Detector.FILTER:
                stage = Stage.NON_CORNER
            surface = down if scale == 2 else full
            patch = surface.patch(e, params.radius)
            if stage is None and detector in (Detector.ESUSAN, Detector.SE_HARRIS):
                cls = esusan.esusan_detect(patch, tgf, thresholds)
                if cls is not esusan.CornerClass.CORNER:
                    stage = Stage.NON_CORNER
                elif detector is Detector.ESUSAN:
                    stage = Stage.CORNER
            if stage is None:
                if detector is Detector.G_EHARRIS:
                    norm = normalization.normalize_binary(patch, config.n_l)
                else:
                    norm = normalization.normalize_aed(patch, tgf=tgf, table=table)
                score = harris.harris_score(harris.harris_matrix(norm, params), params.k)
                if score > params.score_threshold:
                    stage = Stage.CORNER
                elif detector is Detector.SE_HARRIS:
                    stage = Stage.CANDIDATE
                else:
                    stage = Stage.NON_CORNER
        stages.append(int(stage))
        scores.append(score)
    return np.array(stages, dtype=np.int8), np.array(scores)
