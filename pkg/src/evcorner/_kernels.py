"""Compiled per-event kernels shared by the detectors and the pipeline."""
import numpy as np
from numba import njit

# stage codes, mirrored by pipeline.Stage
NOISE = 0
NON_CORNER = 1
CANDIDATE = 2
CORNER = 3

# detector codes, mirrored by pipeline.Detector
ESUSAN = 0
AED_EHARRIS = 1
G_EHARRIS = 2
SE_HARRIS = 3
FILTER_ONLY = 4

# classify_corner results
CLS_CORNER = 0
CLS_EDGE = 1
CLS_NOISE = 2

# int state slots
I_NE = 0
I_START = 1
I_HAS_START = 2
I_INTERVALS = 3
# float state slots
F_TGF = 0
F_TC = 1
F_LAM = 2


@njit(cache=True)
def usan_counts_at(grid, cx, cy, t, tgf, dx, dy, ends):
    """Cumulative USAN counts over ring-ordered disc offsets.

    Offsets ``[0, ends[0])`` form the inner disc, ``[0, ends[1])`` the middle
    one and ``[0, ends[2])`` the outer one. Cells outside the grid read as 0.
    """
    h, w = grid.shape
    n1 = 0
    n2 = 0
    n3 = 0
    total = 0
    for i in range(ends[2]):
        xx = cx + dx[i]
        yy = cy + dy[i]
        v = 0
        if 0 <= xx < w and 0 <= yy < h:
            v = grid[yy, xx]
        if t - v <= tgf:
            total += 1
        if i == ends[0] - 1:
            n1 = total
        if i == ends[1] - 1:
            n2 = total
    n3 = total
    return n1, n2, n3


@njit(cache=True)
def classify_counts(n1, n2, n3, g, g_noise):
    if n3 < g_noise[2]:
        return CLS_NOISE
    if (g_noise[0] <= n1 <= g[0] and g_noise[1] <= n2 <= g[1]
            and g_noise[2] <= n3 <= g[2]):
        return CLS_CORNER
    return CLS_EDGE


@njit(cache=True)
def extract_patch(grid, cx, cy, radius, out):
    h, w = grid.shape
    size = 2 * radius + 1
    for r in range(size):
        yy = cy - radius + r
        for c in range(size):
            xx = cx - radius + c
            if 0 <= xx < w and 0 <= yy < h:
                out[r, c] = grid[yy, xx]
            else:
                out[r, c] = 0


@njit(cache=True)
def aed_normalize(patch, t, scale, entries, inv_step, out):
    """``out = table(age / scale)`` with ``scale = tau * TGF``."""
    size = patch.shape[0]
    res = entries.shape[0]
    for r in range(size):
        for c in range(size):
            ratio = (t - patch[r, c]) / scale
            if ratio < 0.0:
                ratio = 0.0
            k = int(ratio * inv_step)
            if k < res:
                out[r, c] = entries[k]
            else:
                out[r, c] = 0.0


@njit(cache=True)
def binary_normalize(patch, n_l, out):
    size = patch.shape[0]
    flat = np.empty(size * size, dtype=np.int64)
    for r in range(size):
        for c in range(size):
            flat[r * size + c] = -patch[r, c]
    order = np.argsort(flat, kind="mergesort")
    for r in range(size):
        for c in range(size):
            out[r, c] = 0.0
    for i in range(n_l):
        j = order[i]
        out[j // size, j % size] = 1.0


@njit(cache=True)
def structure_tensor(norm, kx, ky, gauss):
    """Gaussian-weighted sum of gradient outer products over valid positions.

    Gradients are valid-mode correlations of ``norm`` with ``kx``/``ky``.
    """
    size = norm.shape[0]
    ks = kx.shape[0]
    g = size - ks + 1
    mxx = 0.0
    mxy = 0.0
    myy = 0.0
    for i in range(g):
        for j in range(g):
            gx = 0.0
            gy = 0.0
            for a in range(ks):
                for b in range(ks):
                    v = norm[i + a, j + b]
                    gx += v * kx[a, b]
                    gy += v * ky[a, b]
            wgt = gauss[i, j]
            mxx += wgt * gx * gx
            mxy += wgt * gx * gy
            myy += wgt * gy * gy
    return mxx, mxy, myy


@njit(cache=True)
def harris_response(mxx, mxy, myy, k):
    tr = mxx + myy
    return (mxx * myy - mxy * mxy) - k * tr * tr


@njit(cache=True)
def process_events(t, x, y, p, labels, scores,
                   istate, fstate, td_us, s_filter,
                   filt, refr, period, full, down,
                   detector, det_scale, split,
                   dx, dy, ends, g, g_noise,
                   radius, kx, ky, gauss, k, threshold,
                   entries, inv_step, tau, n_l):
    """Run one detector over a batch of events, updating all state in place.

    ``full`` and ``down`` are ``(n_pol, H, W)`` surfaces at scale 1 and 2;
    ``det_scale`` selects which one feeds detection.
    """
    n = t.shape[0]
    size = 2 * radius + 1
    patch = np.zeros((size, size), dtype=np.int64)
    norm = np.zeros((size, size), dtype=np.float64)
    use_esusan = detector == ESUSAN or detector == SE_HARRIS
    use_harris = detector != ESUSAN
    for i in range(n):
        ti = t[i]
        xi = x[i]
        yi = y[i]
        pi = 0
        if split and p[i] > 0:
            pi = 1
        scores[i] = np.nan

        # adaptive threshold: every incoming event counts towards N_e
        if istate[I_HAS_START] == 0:
            istate[I_START] = ti
            istate[I_HAS_START] = 1
        istate[I_NE] += 1
        if ti - istate[I_START] >= td_us:
            raw = fstate[F_TC] / (fstate[F_LAM] * istate[I_NE])
            if istate[I_INTERVALS] == 0:
                fstate[F_TGF] = raw
            else:
                fstate[F_TGF] = 0.05 * fstate[F_TGF] + 0.95 * raw
            istate[I_INTERVALS] += 1
            istate[I_NE] = 0
            istate[I_START] = ti
        tgf = fstate[F_TGF]

        if period > 0:
            last_r = refr[pi, yi, xi]
            refr[pi, yi, xi] = ti
            if ti - last_r < period:
                labels[i] = NOISE
                continue

        fy = yi // s_filter
        fx = xi // s_filter
        last = filt[fy, fx]
        filt[fy, fx] = ti
        if tgf > 0.0 and not (last > 0 and ti - last <= tgf):
            labels[i] = NOISE
            continue

        if ti > full[pi, yi, xi]:
            full[pi, yi, xi] = ti
        if ti > down[pi, yi // 2, xi // 2]:
            down[pi, yi // 2, xi // 2] = ti

        if tgf <= 0.0 or detector == FILTER_ONLY:
            labels[i] = NON_CORNER
            continue

        if det_scale == 2:
            grid = down[pi]
            cx = xi // 2
            cy = yi // 2
        else:
            grid = full[pi]
            cx = xi
            cy = yi

        if use_esusan:
            n1, n2, n3 = usan_counts_at(grid, cx, cy, ti, tgf, dx, dy, ends)
            if classify_counts(n1, n2, n3, g, g_noise) != CLS_CORNER:
                labels[i] = NON_CORNER
                continue
            if not use_harris:
                labels[i] = CORNER
                continue

        extract_patch(grid, cx, cy, radius, patch)
        if detector == G_EHARRIS:
            binary_normalize(patch, n_l, norm)
        else:
            aed_normalize(patch, ti, tau * tgf, entries, inv_step, norm)
        mxx, mxy, myy = structure_tensor(norm, kx, ky, gauss)
        h = harris_response(mxx, mxy, myy, k)
        scores[i] = h
        if h > threshold:
            labels[i] = CORNER
        elif detector == SE_HARRIS:
            labels[i] = CANDIDATE
        else:
            labels[i] = NON_CORNER
