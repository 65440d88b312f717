"""Chart specifications and plain rendering with exact per-mark geometry.

Every pixel of a rendered chart is owned by exactly one mark or by the
background. Ownership is decided on pixel centres and, where shapes
overlap, the lower mark id wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import imaging
from .errors import RenderError, ValidationError

KINDS = ("bar", "pie", "area", "network")
MIN_MARK_PX = 4
MARGIN = 0.08
BAR_FILL = 0.6
PIE_RADIUS = 0.42
DEFAULT_EDGE_COLOR = (90, 90, 90)
PALETTE = [
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40), (148, 103, 189),
    (140, 86, 75), (227, 119, 194), (127, 127, 127), (188, 189, 34), (23, 190, 207),
]


@dataclass
class Datum:
    label: str
    value: float
    color: tuple | None = None


@dataclass
class Series:
    x: list
    y: list
    color: tuple | None = None
    label: str = ""


@dataclass
class Node:
    id: str
    radius: float | None = None
    weight: float | None = None
    color: tuple | None = None
    position: tuple | None = None


@dataclass
class Edge:
    source: str
    target: str
    width: float = 3.0
    color: tuple | None = None


@dataclass
class ChartSpec:
    kind: str
    canvas: tuple = (512, 512)
    data: list = field(default_factory=list)
    series: list = field(default_factory=list)
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    background: tuple = (255, 255, 255)

    @classmethod
    def bar(cls, values, colors=None, labels=None, **kw):
        return cls("bar", data=_data(values, colors, labels), **kw)

    @classmethod
    def pie(cls, values, colors=None, labels=None, **kw):
        return cls("pie", data=_data(values, colors, labels), **kw)


def _data(values, colors, labels):
    out = []
    for i, v in enumerate(values):
        out.append(Datum(
            label=labels[i] if labels else str(i),
            value=v,
            color=tuple(colors[i]) if colors else None,
        ))
    return out


@dataclass(eq=False)
class MarkGeometry:
    """Geometry of one mark at canvas resolution.

    ``kind`` is one of bar, slice, band, node, edge. ``params`` carries the
    kind-specific description (rectangle, angles, boundary, centre, path).
    """

    mark_id: int
    kind: str
    mask: np.ndarray
    bbox: tuple
    anchor: tuple
    color: tuple
    params: dict
    label: str = ""

    @property
    def area(self):
        return int(self.mask.sum())


@dataclass(eq=False)
class PlainVisualization:
    kind: str
    image: np.ndarray
    marks: list
    background_mask: np.ndarray
    owner: np.ndarray
    edge_layer: np.ndarray | None = None

    @property
    def canvas(self):
        return (self.image.shape[1], self.image.shape[0])

    def mark(self, mark_id):
        for m in self.marks:
            if m.mark_id == mark_id:
                return m
        raise KeyError(mark_id)

    def stylized_marks(self):
        """Marks that receive a sub-prompt (everything except network edges)."""
        return [m for m in self.marks if m.kind != "edge"]


# -- validation -----------------------------------------------------------------

def _finite(v):
    try:
        return math.isfinite(float(v))
    except (TypeError, ValueError):
        return False


def _check_color(problems, path, color):
    if color is None:
        return
    if len(color) != 3 or not all(isinstance(c, (int, np.integer)) and 0 <= c <= 255 for c in color):
        problems.append((path, f"invalid RGB color {color!r}"))


def validate_spec(spec, latent_factor=8):
    """Return ``spec`` unchanged or raise ValidationError listing every problem."""
    problems = []
    if spec.kind not in KINDS:
        raise ValidationError([("kind", f"unknown chart kind {spec.kind!r}")])
    w, h = spec.canvas
    if not (isinstance(w, (int, np.integer)) and isinstance(h, (int, np.integer)) and w > 0 and h > 0):
        problems.append(("canvas", f"canvas must be positive integers, got {spec.canvas!r}"))
    elif w % latent_factor or h % latent_factor:
        problems.append(("canvas", f"canvas {w}x{h} is not a multiple of {latent_factor}"))

    if spec.kind in ("bar", "pie"):
        if not spec.data:
            problems.append(("data", "no data values"))
        for i, d in enumerate(spec.data):
            if not _finite(d.value):
                problems.append((f"data[{i}].value", f"non-finite value at index {i}"))
            elif d.value < 0:
                problems.append((f"data[{i}].value", f"negative value at index {i}"))
            elif spec.kind == "pie" and d.value == 0:
                problems.append((f"data[{i}].value", f"pie slice value must be positive at index {i}"))
            _check_color(problems, f"data[{i}].color", d.color)
        if spec.kind == "pie" and len(spec.data) < 2:
            problems.append(("data", "pie requires at least 2 slices"))

    elif spec.kind == "area":
        if not spec.series:
            problems.append(("series", "no series"))
        for k, s in enumerate(spec.series):
            p = f"series[{k}]"
            if len(s.x) != len(s.y):
                problems.append((p, "x and y lengths differ"))
            if len(s.x) < 2:
                problems.append((p, "a series needs at least 2 points"))
            if not all(_finite(v) for v in s.x):
                problems.append((f"{p}.x", "non-finite x"))
            elif any(b <= a for a, b in zip(s.x, s.x[1:])):
                problems.append((f"{p}.x", "x must be strictly ascending"))
            for i, v in enumerate(s.y):
                if not _finite(v):
                    problems.append((f"{p}.y[{i}]", f"non-finite value at index {i}"))
                elif v < 0:
                    problems.append((f"{p}.y[{i}]", f"negative value at index {i}"))
            _check_color(problems, f"{p}.color", s.color)

    else:
        ids = set()
        if not spec.nodes:
            problems.append(("nodes", "network has no nodes"))
        for i, n in enumerate(spec.nodes):
            p = f"nodes[{i}]"
            if n.id in ids:
                problems.append((f"{p}.id", f"duplicate node id {n.id}"))
            ids.add(n.id)
            if n.radius is not None:
                if not _finite(n.radius) or n.radius <= 0:
                    problems.append((f"{p}.radius", "radius must be positive"))
            elif n.weight is not None:
                if not _finite(n.weight) or n.weight <= 0:
                    problems.append((f"{p}.weight", "weight must be positive"))
            if n.position is not None:
                if len(n.position) != 2 or not all(_finite(c) and 0 <= c <= 1 for c in n.position):
                    problems.append((f"{p}.position", "position must lie in [0,1]^2"))
            _check_color(problems, f"{p}.color", n.color)
        seen = set()
        for j, e in enumerate(spec.edges):
            p = f"edges[{j}]"
            for end in (e.source, e.target):
                if end not in ids:
                    problems.append((p, f"unknown node id {end}"))
            if e.source == e.target:
                problems.append((p, f"self-loop on {e.source}"))
            key = frozenset((e.source, e.target))
            if key in seen:
                problems.append((p, f"duplicate edge {e.source}-{e.target}"))
            seen.add(key)
            if not _finite(e.width) or e.width <= 0:
                problems.append((f"{p}.width", "stroke width must be positive"))
            _check_color(problems, f"{p}.color", e.color)
    if problems:
        raise ValidationError(problems)
    return spec


# -- rendering ------------------------------------------------------------------

def _color(c, i):
    return tuple(int(v) for v in c) if c is not None else PALETTE[i % len(PALETTE)]


def _plot_box(w, h):
    m = int(round(MARGIN * min(w, h)))
    return m, m, w - 2 * m, h - 2 * m


def _bar_shapes(spec):
    w, h = spec.canvas
    left, top, pw, ph = _plot_box(w, h)
    n = len(spec.data)
    vmax = max(d.value for d in spec.data)
    if vmax <= 0:
        raise RenderError("all bar values are zero")
    slot = pw / n
    bar_w = int(round(slot * BAR_FILL))
    bottom = top + ph
    shapes = []
    for i, d in enumerate(spec.data):
        bh = int(round(d.value / vmax * ph))
        x0 = int(round(left + i * slot + (slot - bar_w) / 2))
        rect = (x0, bottom - bh, bar_w, bh)
        mask = np.zeros((h, w), bool)
        mask[bottom - bh:bottom, x0:x0 + bar_w] = True
        params = {"rect": rect, "value": float(d.value), "drawable_height": ph}
        shapes.append(("bar", mask, _color(d.color, i), params, d.label))
    return shapes


def pie_angles(values):
    """Clockwise-from-12-o'clock (start, end) angles; the last end is exactly 2*pi."""
    v = np.asarray(values, dtype=np.float64)
    ends = 2 * math.pi * np.cumsum(v) / v.sum()
    ends[-1] = 2 * math.pi
    starts = np.concatenate([[0.0], ends[:-1]])
    return list(zip(starts.tolist(), ends.tolist()))


def pixel_angles(w, h, center):
    """Clockwise angle from 12 o'clock of every pixel centre, in [0, 2*pi)."""
    ys, xs = np.mgrid[0:h, 0:w]
    dx = xs + 0.5 - center[0]
    dy = ys + 0.5 - center[1]
    theta = np.mod(np.arctan2(dx, -dy), 2 * math.pi)
    return theta, np.hypot(dx, dy)


def _pie_shapes(spec):
    w, h = spec.canvas
    center = (w / 2, h / 2)
    radius = PIE_RADIUS * min(w, h)
    angles = pie_angles([d.value for d in spec.data])
    theta, r = pixel_angles(w, h, center)
    inside = r <= radius
    ends = np.array([e for _, e in angles])
    idx = np.searchsorted(ends, theta, side="left")
    shapes = []
    for i, (d, (a0, a1)) in enumerate(zip(spec.data, angles)):
        if (a1 - a0) * radius < 1.0:
            raise RenderError(f"pie slice {i} spans less than 1px of arc")
        mask = inside & (idx == i)
        params = {"start_angle": a0, "end_angle": a1, "center": center, "radius": radius,
                  "value": float(d.value)}
        shapes.append(("slice", mask, _color(d.color, i), params, d.label))
    return shapes


def _area_shapes(spec):
    w, h = spec.canvas
    left, top, pw, ph = _plot_box(w, h)
    xmin = min(s.x[0] for s in spec.series)
    xmax = max(s.x[-1] for s in spec.series)
    span = (xmax - xmin) or 1.0
    cols = np.arange(pw)
    xdata = xmin + (cols + 0.5) / pw * span
    ys = []
    for s in spec.series:
        y = np.interp(xdata, s.x, s.y, left=0.0, right=0.0)
        ys.append(y)
    cum = np.cumsum(ys, axis=0)
    total = cum[-1].max()
    if total <= 0:
        raise RenderError("area chart has zero total height")
    cum_px = cum / total * ph
    bottom = top + ph
    rows = np.arange(h)
    height_above = bottom - (rows + 0.5)
    shapes = []
    lower = np.zeros(pw)
    for k, s in enumerate(spec.series):
        upper = cum_px[k]
        band = (height_above[:, None] >= lower[None, :]) & (height_above[:, None] < upper[None, :])
        mask = np.zeros((h, w), bool)
        mask[:, left:left + pw] = band
        boundary = [(float(left + c + 0.5), float(bottom - upper[c])) for c in range(pw)]
        params = {"boundary": boundary, "series": k}
        shapes.append(("band", mask, _color(s.color, k), params, s.label or str(k)))
        lower = upper
    return shapes


def network_layout(spec, seed=0):
    """Return node positions in [0,1]^2, computing a seeded spring layout if any are missing."""
    if all(n.position is not None for n in spec.nodes):
        return {n.id: tuple(n.position) for n in spec.nodes}
    import networkx as nx

    g = nx.Graph()
    g.add_nodes_from(n.id for n in spec.nodes)
    g.add_edges_from((e.source, e.target) for e in spec.edges)
    fixed = [n.id for n in spec.nodes if n.position is not None]
    init = {n.id: tuple(n.position) for n in spec.nodes if n.position is not None} or None
    pos = nx.spring_layout(g, seed=seed, pos=init, fixed=fixed or None)
    pts = np.array([pos[n.id] for n in spec.nodes], dtype=np.float64)
    if not fixed:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        pts = (pts - lo) / np.where(hi - lo > 0, hi - lo, 1.0)
    pts = np.clip(pts, 0.0, 1.0)
    return {n.id: (float(p[0]), float(p[1])) for n, p in zip(spec.nodes, pts)}


def with_layout(spec, seed=0):
    """Copy of a network spec with every node position filled in."""
    if spec.kind != "network":
        return spec
    pos = network_layout(spec, seed)
    return replace(spec, nodes=[replace(n, position=pos[n.id]) for n in spec.nodes])


def _node_radii(spec):
    weights = [n.weight for n in spec.nodes if n.radius is None and n.weight is not None]
    wmax = max(weights) if weights else 1.0
    scale = min(spec.canvas) / 512
    out = []
    for n in spec.nodes:
        if n.radius is not None:
            out.append(float(n.radius))
        elif n.weight is not None:
            out.append((8 + 16 * math.sqrt(n.weight / wmax)) * scale)
        else:
            out.append(16 * scale)
    return out


def _segment_distance(xs, ys, p, q):
    d = np.array(q) - np.array(p)
    L2 = float(d @ d)
    if L2 == 0:
        return np.hypot(xs - p[0], ys - p[1])
    t = np.clip(((xs - p[0]) * d[0] + (ys - p[1]) * d[1]) / L2, 0.0, 1.0)
    return np.hypot(xs - (p[0] + t * d[0]), ys - (p[1] + t * d[1]))


def _network_shapes(spec, seed):
    w, h = spec.canvas
    left, top, pw, ph = _plot_box(w, h)
    radii = _node_radii(spec)
    rmax = max(radii)
    pos = network_layout(spec, seed)
    ys, xs = np.mgrid[0:h, 0:w]
    xs = xs + 0.5
    ys = ys + 0.5
    centers = {}
    shapes = []
    for i, (n, r) in enumerate(zip(spec.nodes, radii)):
        px, py = pos[n.id]
        c = (left + rmax + px * max(pw - 2 * rmax, 0), top + rmax + py * max(ph - 2 * rmax, 0))
        centers[n.id] = c
        mask = np.hypot(xs - c[0], ys - c[1]) <= r
        shapes.append(("node", mask, _color(n.color, i), {"center": c, "radius": r, "id": n.id}, n.id))
    for e in spec.edges:
        p, q = centers[e.source], centers[e.target]
        mask = _segment_distance(xs, ys, p, q) <= e.width / 2
        color = tuple(e.color) if e.color is not None else DEFAULT_EDGE_COLOR
        params = {"path": [p, q], "width": float(e.width), "source": e.source, "target": e.target}
        shapes.append(("edge", mask, color, params, f"{e.source}-{e.target}"))
    return shapes


def render_plain(spec, seed=0):
    """Flat-colour rendering plus exact, pairwise-disjoint mark masks.

    ``seed`` only matters for networks whose node positions are missing.
    """
    w, h = spec.canvas
    builders = {"bar": _bar_shapes, "pie": _pie_shapes, "area": _area_shapes}
    shapes = _network_shapes(spec, seed) if spec.kind == "network" else builders[spec.kind](spec)

    owner = np.full((h, w), -1, dtype=np.int32)
    for i, (_, shape, *_rest) in enumerate(shapes):
        owner[shape & (owner == -1)] = i

    image = imaging.solid(w, h, spec.background)
    marks = []
    for i, (kind, _, color, params, label) in enumerate(shapes):
        mask = owner == i
        box = imaging.mask_bbox(mask)
        if box is None:
            raise RenderError(f"mark {i} ({kind} {label!r}) is completely hidden")
        # edges are drawn as plain strokes, so only stylized marks need a usable size
        if kind != "edge" and (box[2] < MIN_MARK_PX or box[3] < MIN_MARK_PX):
            raise RenderError(f"mark {i} ({kind} {label!r}) is smaller than {MIN_MARK_PX}x{MIN_MARK_PX}px")
        image[mask] = np.asarray(color) / 255.0
        marks.append(MarkGeometry(i, kind, mask, box, (box[0], box[1]), color, params, label))

    edge_layer = None
    if spec.kind == "network":
        edge_layer = np.zeros((h, w, 4))
        for m in marks:
            if m.kind == "edge":
                edge_layer[m.mask, :3] = np.asarray(m.color) / 255.0
                edge_layer[m.mask, 3] = 1.0
    return PlainVisualization(spec.kind, image, marks, owner == -1, owner, edge_layer)


def background_mask(plain):
    """Complement of the union of all mark masks."""
    union = np.zeros(plain.image.shape[:2], bool)
    for m in plain.marks:
        union |= m.mask
    return ~union
