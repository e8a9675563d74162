"""Synthetic event streams from moving convex polygons.

Each pixel samples the scene at one point (its integer coordinate plus a
seeded sub-pixel jitter). A pixel fires when that point enters or leaves a
polygon: entering gives polarity ``+contrast``, leaving ``-contrast``.
Crossing times are located by coarse time stepping (at most half a pixel of
motion per step) refined by bisection. Shapes are rendered independently;
overlaps are not composited.

With ``multiplicity > 1`` each crossing becomes a burst. By default the
burst events follow each other ``burst_spacing_us`` apart. With a positive
``edge_width`` they instead model a blurred edge: event ``k`` fires when the
pixel crosses the polygon offset outward by ``delta_k``, the offsets spread
evenly over ``[-edge_width / 2, edge_width / 2]``.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from .events import EVENT_DTYPE, SensorGeometry, make_events

TRUTH_PERIOD_US = 1000
_BISECT_STEPS = 24


@dataclass
class ShapeSpec:
    vertices: np.ndarray
    velocity: tuple = (0.0, 0.0)
    angular_velocity: float = 0.0
    contrast: int = 1

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("a shape needs at least three (x, y) vertices")
        area2 = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area2 == 0:
            raise ValueError("degenerate polygon with zero area")
        if area2 < 0:
            v = v[::-1].copy()
        edges = np.roll(v, -1, axis=0) - v
        nxt = np.roll(edges, -1, axis=0)
        if np.any(edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0] < -1e-12):
            raise ValueError("polygon is not convex")
        self.vertices = v
        self.velocity = (float(self.velocity[0]), float(self.velocity[1]))
        self.angular_velocity = float(self.angular_velocity)
        if self.contrast not in (-1, 1):
            raise ValueError("contrast must be +1 or -1")

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @property
    def moving(self) -> bool:
        return self.velocity != (0.0, 0.0) or self.angular_velocity != 0.0

    def vertices_at(self, t) -> np.ndarray:
        """Vertex positions at times ``t`` (seconds), shape ``(len(t), n, 2)``."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        c = self.centroid
        rel = self.vertices - c
        ang = self.angular_velocity * t
        cos, sin = np.cos(ang)[:, None], np.sin(ang)[:, None]
        x = c[0] + self.velocity[0] * t[:, None] + cos * rel[:, 0] - sin * rel[:, 1]
        y = c[1] + self.velocity[1] * t[:, None] + sin * rel[:, 0] + cos * rel[:, 1]
        return np.stack([x, y], axis=-1)

    def max_point_speed(self) -> float:
        radius = np.max(np.hypot(*(self.vertices - self.centroid).T))
        return math.hypot(*self.velocity) + abs(self.angular_velocity) * radius

    def inside(self, px: np.ndarray, py: np.ndarray, t, offset: float = 0.0) -> np.ndarray:
        """Whether sample points lie inside the shape at time(s) ``t``.

        ``t`` broadcasts against ``px``/``py``. A nonzero ``offset`` moves
        every edge outward by that many pixels (inward when negative).
        """
        t = np.asarray(t, dtype=np.float64)
        c = self.centroid
        # map the points back into the shape's frame at time 0
        qx = px - c[0] - self.velocity[0] * t
        qy = py - c[1] - self.velocity[1] * t
        if self.angular_velocity:
            ang = -self.angular_velocity * t
            cos, sin = np.cos(ang), np.sin(ang)
            qx, qy = cos * qx - sin * qy, sin * qx + cos * qy
        v = self.vertices - c
        result = np.ones(np.broadcast(qx, qy).shape, dtype=bool)
        for i in range(v.shape[0]):
            ax, ay = v[i]
            bx, by = v[(i + 1) % v.shape[0]]
            # cross product = edge length * signed distance (left is inside)
            slack = -offset * math.hypot(bx - ax, by - ay)
            result &= (bx - ax) * (qy - ay) - (by - ay) * (qx - ax) >= slack
        return result


@dataclass
class SceneSpec:
    geometry: SensorGeometry
    shapes: list = field(default_factory=list)
    duration: float = 1.0
    noise_rate: float = 0.1
    seed: int = 0
    jitter: float = 0.25
    multiplicity: int = 1
    burst_spacing_us: int = 20
    edge_width: float = 0.0

    def burst_offsets(self) -> np.ndarray:
        if self.edge_width > 0 and self.multiplicity > 1:
            return np.linspace(0.5 * self.edge_width, -0.5 * self.edge_width,
                               self.multiplicity)
        return np.zeros(1)

    def validate(self) -> None:
        if not self.duration > 0:
            raise ValueError(f"duration must be > 0, got {self.duration}")
        if self.noise_rate < 0:
            raise ValueError("noise_rate must be >= 0")
        if not 0 <= self.jitter < 0.5:
            raise ValueError("jitter must lie in [0, 0.5)")
        if self.multiplicity < 1:
            raise ValueError("multiplicity must be >= 1")
        if self.edge_width < 0:
            raise ValueError("edge_width must be >= 0")
        times = truth_times(self.duration) / 1e6
        w, h = self.geometry.width, self.geometry.height
        for i, shape in enumerate(self.shapes):
            pos = shape.vertices_at(times)
            bad = ((pos[..., 0] < 0) | (pos[..., 0] > w - 1)
                   | (pos[..., 1] < 0) | (pos[..., 1] > h - 1)).any(axis=1)
            if bad.any():
                t_bad = times[np.argmax(bad)]
                raise ValueError(f"shape {i} leaves the {self.geometry} frame at t={t_bad:.3f} s")


@dataclass
class GroundTruth:
    """Vertex trajectories sampled every millisecond.

    ``t_us`` has shape ``(n_samples,)``; ``xy`` has shape
    ``(n_vertices, n_samples, 2)``.
    """

    t_us: np.ndarray
    xy: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.xy.shape[0]

    def positions_at(self, t_us) -> np.ndarray:
        """Linearly interpolated vertex positions, shape ``(n_vertices, len(t), 2)``."""
        t_us = np.atleast_1d(np.asarray(t_us, dtype=np.float64))
        out = np.empty((self.n_vertices, t_us.shape[0], 2))
        for v in range(self.n_vertices):
            out[v, :, 0] = np.interp(t_us, self.t_us, self.xy[v, :, 0])
            out[v, :, 1] = np.interp(t_us, self.t_us, self.xy[v, :, 1])
        return out

    def distance_to_nearest(self, t_us, x, y) -> np.ndarray:
        pos = self.positions_at(t_us)
        d = np.hypot(pos[..., 0] - np.asarray(x, dtype=np.float64),
                     pos[..., 1] - np.asarray(y, dtype=np.float64))
        return d.min(axis=0)


def truth_times(duration: float) -> np.ndarray:
    end = int(round(duration * 1e6))
    t = np.arange(0, end + 1, TRUTH_PERIOD_US, dtype=np.int64)
    if t[-1] != end:
        t = np.append(t, end)
    return t


def _shape_events(shape: ShapeSpec, spec: SceneSpec, jx: np.ndarray, jy: np.ndarray,
                  offset: float = 0.0):
    w, h = spec.geometry.width, spec.geometry.height
    if not shape.moving:
        return [np.empty(0, dtype=np.int64)] * 4
    speed = shape.max_point_speed()
    n_steps = max(1, math.ceil(spec.duration * speed / 0.5))
    dt = spec.duration / n_steps

    # pixels the shape can touch during the run
    pos = shape.vertices_at(np.linspace(0.0, spec.duration, n_steps + 1))
    # an outward offset moves a vertex by up to offset / sin(angle / 2)
    pad = 1 + int(math.ceil(4 * max(offset, 0.0)))
    x0 = max(int(np.floor(pos[..., 0].min())) - pad, 0)
    x1 = min(int(np.ceil(pos[..., 0].max())) + pad + 1, w)
    y0 = max(int(np.floor(pos[..., 1].min())) - pad, 0)
    y1 = min(int(np.ceil(pos[..., 1].max())) + pad + 1, h)
    gy, gx = np.mgrid[y0:y1, x0:x1]
    px = gx + jx[y0:y1, x0:x1]
    py = gy + jy[y0:y1, x0:x1]

    xs, ys, ts, ps = [], [], [], []
    prev = shape.inside(px, py, 0.0, offset)
    for step in range(1, n_steps + 1):
        t_hi = step * dt
        cur = shape.inside(px, py, t_hi, offset)
        changed = np.nonzero(cur != prev)
        if changed[0].size:
            cx, cy = px[changed], py[changed]
            lo = np.full(cx.shape, t_hi - dt)
            hi = np.full(cx.shape, t_hi)
            start_state = prev[changed]
            for _ in range(_BISECT_STEPS):
                mid = 0.5 * (lo + hi)
                same = shape.inside(cx, cy, mid, offset) == start_state
                lo = np.where(same, mid, lo)
                hi = np.where(same, hi, mid)
            xs.append(gx[changed])
            ys.append(gy[changed])
            ts.append(np.rint(hi * 1e6).astype(np.int64))
            ps.append(np.where(start_state, -shape.contrast, shape.contrast))
        prev = cur
    if not xs:
        return [np.empty(0, dtype=np.int64)] * 4
    return [np.concatenate(a).astype(np.int64) for a in (ts, xs, ys, ps)]


def generate(spec: SceneSpec):
    """Render ``spec`` into a time-sorted event array and vertex ground truth."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    w, h = spec.geometry.width, spec.geometry.height
    jx = rng.uniform(-spec.jitter, spec.jitter, size=(h, w))
    jy = rng.uniform(-spec.jitter, spec.jitter, size=(h, w))

    cols = [[], [], [], []]
    offsets = spec.burst_offsets()
    for shape in spec.shapes:
        for delta in offsets:
            for acc, arr in zip(cols, _shape_events(shape, spec, jx, jy, delta)):
                acc.append(arr)
    t, x, y, p = (np.concatenate(c) if c else np.empty(0, dtype=np.int64) for c in cols)
    if spec.multiplicity > 1 and offsets.size == 1 and t.size:
        spacing = np.arange(spec.multiplicity) * spec.burst_spacing_us
        t = (t[:, None] + spacing[None, :]).ravel()
        x, y, p = (np.repeat(a, spec.multiplicity) for a in (x, y, p))
        keep = t <= int(round(spec.duration * 1e6))
        t, x, y, p = t[keep], x[keep], y[keep], p[keep]

    n_noise = rng.poisson(spec.noise_rate * w * h * spec.duration)
    end_us = int(round(spec.duration * 1e6))
    t = np.concatenate([t, rng.integers(0, end_us + 1, n_noise)])
    x = np.concatenate([x, rng.integers(0, w, n_noise)])
    y = np.concatenate([y, rng.integers(0, h, n_noise)])
    p = np.concatenate([p, rng.choice(np.array([-1, 1]), n_noise)])

    order = np.lexsort((x, y, t))
    events = make_events(t[order], x[order], y[order], p[order])

    times = truth_times(spec.duration)
    if spec.shapes:
        xy = np.concatenate([s.vertices_at(times / 1e6).transpose(1, 0, 2)
                             for s in spec.shapes])
    else:
        xy = np.empty((0, times.shape[0], 2))
    return events, GroundTruth(times, xy)


# ---------------------------------------------------------------------------
# Scene files
# ---------------------------------------------------------------------------

def _floats(text: str) -> list:
    return [float(tok) for tok in text.replace(",", " ").split()]


def parse_scene(text: str, geometry: SensorGeometry | None = None) -> SceneSpec:
    """Parse a scene file.

    A ``[scene]`` section holds global keys; every section named
    ``[shape ...]`` adds a polygon::

        [scene]
        width = 240
        height = 180
        duration = 1.0
        noise_rate = 0.1
        seed = 3

        [shape a]
        vertices = 20,20 60,20 60,60 20,60
        velocity = 80, 40
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"invalid scene file: {exc}") from None
    if "scene" not in parser:
        raise ValueError("scene file lacks a [scene] section")
    sc = parser["scene"]
    known = {"width", "height", "duration", "noise_rate", "seed", "jitter",
             "multiplicity", "burst_spacing_us", "edge_width"}
    unknown = set(sc) - known
    if unknown:
        raise ValueError(f"unknown scene keys: {sorted(unknown)}")
    if geometry is None:
        geometry = SensorGeometry(sc.getint("width", 240), sc.getint("height", 180))
    spec = SceneSpec(
        geometry=geometry,
        duration=sc.getfloat("duration", 1.0),
        noise_rate=sc.getfloat("noise_rate", 0.1),
        seed=sc.getint("seed", 0),
        jitter=sc.getfloat("jitter", 0.25),
        multiplicity=sc.getint("multiplicity", 1),
        burst_spacing_us=sc.getint("burst_spacing_us", 20),
        edge_width=sc.getfloat("edge_width", 0.0),
    )
    for name in parser.sections():
        if not name.startswith("shape"):
            if name != "scene":
                raise ValueError(f"unknown section [{name}]")
            continue
        sec = parser[name]
        unknown = set(sec) - {"vertices", "velocity", "angular_velocity", "contrast"}
        if unknown:
            raise ValueError(f"[{name}]: unknown keys {sorted(unknown)}")
        try:
            coords = _floats(sec["vertices"])
            if len(coords) % 2:
                raise ValueError("odd number of vertex coordinates")
            vel = _floats(sec.get("velocity", "0 0"))
            if len(vel) != 2:
                raise ValueError("velocity needs two components")
            spec.shapes.append(ShapeSpec(
                np.array(coords).reshape(-1, 2), tuple(vel),
                sec.getfloat("angular_velocity", 0.0), sec.getint("contrast", 1)))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"[{name}]: {exc}") from None
    return spec


def format_scene(spec: SceneSpec) -> str:
    lines = ["[scene]",
             f"width = {spec.geometry.width}",
             f"height = {spec.geometry.height}",
             f"duration = {spec.duration!r}",
             f"noise_rate = {spec.noise_rate!r}",
             f"seed = {spec.seed}",
             f"jitter = {spec.jitter!r}",
             f"multiplicity = {spec.multiplicity}",
             f"burst_spacing_us = {spec.burst_spacing_us}",
             f"edge_width = {spec.edge_width!r}"]
    for i, shape in enumerate(spec.shapes):
        verts = " ".join(f"{float(x)!r},{float(y)!r}" for x, y in shape.vertices)
        lines += ["", f"[shape {i}]", f"vertices = {verts}",
                  f"velocity = {shape.velocity[0]!r}, {shape.velocity[1]!r}",
                  f"angular_velocity = {shape.angular_velocity!r}",
                  f"contrast = {shape.contrast}"]
    return "\n".join(lines) + "\n"


def load_scene(path, geometry: SensorGeometry | None = None) -> SceneSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_scene(fh.read(), geometry)


def write_truth(path, truth: GroundTruth) -> None:
    """Write ``vertex_id,t_us,x,y`` rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("vertex_id,t_us,x,y\n")
        for v in range(truth.n_vertices):
            for t, (x, y) in zip(truth.t_us.tolist(), truth.xy[v].tolist()):
                fh.write(f"{v},{t},{x:.6f},{y:.6f}\n")


def read_truth(path) -> GroundTruth:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        raise ValueError(f"{path}: ground truth is empty")
    ids = data[:, 0].astype(np.int64)
    vertex_ids = np.unique(ids)
    first = data[ids == vertex_ids[0]]
    t_us = first[:, 1].astype(np.int64)
    xy = np.empty((vertex_ids.size, t_us.size, 2))
    for k, v in enumerate(vertex_ids):
        rows = data[ids == v]
        if rows.shape[0] != t_us.size or np.any(rows[:, 1].astype(np.int64) != t_us):
            raise ValueError(f"{path}: vertex {v} is sampled on a different time grid")
        xy[k] = rows[:, 2:4]
    return GroundTruth(t_us, xy)


def shapes_scene(seed: int = 0, noise_rate: float = 0.0, duration: float = 1.0,
                 multiplicity: int = 3, edge_width: float = 1.5) -> SceneSpec:
    """Preset 240x180 scene of translating polygons (a shapes-like setup).

    Every crossing emits ``multiplicity`` events spread over an
    ``edge_width`` pixel blur, as a high contrast edge seen through real
    optics crosses several log-intensity thresholds.
    """
    def poly(cx, cy, r, n, phase=0.0):
        ang = phase + 2 * np.pi * np.arange(n) / n
        return np.stack([cx + r * np.cos(ang), cy + r * np.sin(ang)], axis=1)

    shapes = [
        ShapeSpec(np.array([[20, 20], [52, 20], [52, 52], [20, 52]]), (90.0, 55.0)),
        ShapeSpec(poly(190, 40, 18, 3, np.pi / 2), (-70.0, 60.0)),
        ShapeSpec(poly(60, 140, 16, 5), (110.0, -45.0)),
        ShapeSpec(np.array([[150, 120], [195, 125], [185, 160], [145, 150]]), (-60.0, -50.0)),
    ]
    return SceneSpec(SensorGeometry(240, 180), shapes, duration=duration,
                     noise_rate=noise_rate, seed=seed, multiplicity=multiplicity,
                     edge_width=edge_width)
