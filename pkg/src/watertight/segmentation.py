"""Trimmed-domain segmentation and patch normalization.

A domain curve (the trim) is split into segments monotone in both
parameter coordinates, the retained region is decomposed into rectangle
cells plus curved trapezoids whose curved edge spans two adjacent curve
breakpoints, each trapezoid is classified into one of eight rotationally
equivalent cases, its curved edge is fitted by a low-degree polynomial in
canonical coordinates, and every cell is normalized to a standard-domain
Bezier patch: rectangles by plain subpatch extraction, trapezoids by
rotating the control net to the canonical case, composing with the fitted
boundary polynomial, and rotating back.

Conventions used throughout:

* Graph frame: each monotone segment is read as a single-valued graph,
  either u = f(v) or v = g(u).  The dependent coordinate is the "band"
  axis; a trapezoid cell occupies the band between the two breakpoint
  values and extends along the independent axis from the curve to the
  domain edge on the retained side.
* Canonical frame: a trapezoid is rotated (a quarter-turn relabeling of
  the control net, no arithmetic) so its retained region becomes
  {0 <= x <= f(y)} with f mapping [0,1] into [0,1] and reaching 1 at one
  endpoint (the through-vertex).  f may vanish at the other endpoint,
  which collapses one patch edge; such degenerate cells are legal.
* Cell membership is half-open (lower/left edges inclusive, upper/right
  exclusive except at the domain boundary), so tiling is assertable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .bezier import (
    BezierSurface,
    BoundaryPolynomial,
    Edge,
    PiecewiseBezierCurve,
    compose_reparameterize,
    extract_subpatch,
    flip_net_u,
    flip_net_v,
    rotate_edge,
    rotate_net,
)
from .errors import AmbiguousCaseError, DegenerateCellError, FitError

RECTANGLE = "rectangle"
TRAPEZOID = "trapezoid"

_COORD_TOL = 1e-9


class GraphAxis(Enum):
    """Which coordinate is the single-valued function of the other."""

    U_OF_V = "u(v)"
    V_OF_U = "v(u)"


@dataclass(eq=False)
class MonotoneSegment:
    """A stretch of the domain curve monotone (or constant) in both coordinates."""

    curve: PiecewiseBezierCurve
    w_range: tuple
    axis: GraphAxis
    host_range: tuple
    u_trend: int
    v_trend: int

    def breakpoint_span(self):
        """(index, w) pairs of parent breakpoints covered by this segment."""
        lo, hi = self.w_range
        out = []
        for k, w in enumerate(self.curve.breakpoints):
            if lo - 1e-12 <= w <= hi + 1e-12:
                out.append((k, float(w)))
        return out


@dataclass(frozen=True)
class TrapezoidCase:
    """One of the eight trapezoid configurations and its canonicalizing rotation."""

    case_id: int
    rotation_quarter_turns: int
    canonical_corner: tuple


@dataclass(eq=False)
class DomainCell:
    """A rectangle or curved-trapezoid sub-region of the parameter domain."""

    kind: str
    bounds: tuple
    axis: GraphAxis | None = None
    keep_side: str | None = None
    toward_far_edge: bool | None = None
    w_span: tuple | None = None
    source_breakpoints: tuple | None = None
    parent_curve: PiecewiseBezierCurve | None = None
    retained_sample: tuple | None = None
    case: TrapezoidCase | None = None
    boundary_fn: BoundaryPolynomial | None = None
    patch_bounds: tuple | None = None
    fit_residual: float = 0.0

    def __post_init__(self):
        u0, u1, v0, v1 = self.bounds
        if not (0.0 <= u0 < u1 <= 1.0 and 0.0 <= v0 < v1 <= 1.0):
            raise DegenerateCellError(f"cell bounds {self.bounds} degenerate")
        if self.patch_bounds is None:
            self.patch_bounds = self.bounds


@dataclass(eq=False)
class PatchMap:
    """Forward map from a normalized patch's parameters to domain parameters."""

    patch_bounds: tuple
    rotation: int
    flip_t: bool
    back_rotation: int
    flip_edge_axis: bool
    edge: Edge
    f: BoundaryPolynomial

    def to_domain(self, p1: float, p2: float):
        if self.flip_edge_axis:
            if self.edge in (Edge.U0, Edge.U1):
                p2 = 1.0 - p2
            else:
                p1 = 1.0 - p1
        x, y = _unrotate(p1, p2, self.back_rotation)
        if self.flip_t:
            y = 1.0 - y
        xhat = x * float(self.f(y))
        a, b = _unrotate(xhat, y, self.rotation)
        u0, u1, v0, v1 = self.patch_bounds
        return u0 + a * (u1 - u0), v0 + b * (v1 - v0)


@dataclass(eq=False)
class PatchDecomposition:
    """Cells of one trimmed surface and their normalized patches."""

    cells: list
    patches: list
    curved_edges: list
    maps: list
    breakpoints: np.ndarray
    boundary_indices: list = field(default_factory=list)


class _NeedsSplit(Exception):
    """Internal: the fit tolerance needs extra curve splits at these params."""

    def __init__(self, params):
        super().__init__(f"needs splits at {params}")
        self.params = list(params)


# ---------------------------------------------------------------------------
# Rotation helpers on the unit square
# ---------------------------------------------------------------------------

def _rotate_point(a: float, b: float, quarter_turns: int):
    """Apply (a, b) -> (1-b, a) the given number of times."""
    for _ in range(quarter_turns % 4):
        a, b = 1.0 - b, a
    return a, b


def _unrotate(a: float, b: float, quarter_turns: int):
    for _ in range(quarter_turns % 4):
        a, b = b, 1.0 - a
    return a, b


# ---------------------------------------------------------------------------
# Monotone splitting
# ---------------------------------------------------------------------------

def monotone_split_params(curve: PiecewiseBezierCurve, refine_tol: float = 1e-10):
    """Interior parameters where du/dw or dv/dw changes sign."""
    n_seg = len(curve.segments)
    ws = np.linspace(0.0, 1.0, 64 * n_seg + 1)
    derivs = np.array([curve.derivative_at(w) for w in ws])
    scale = max(float(np.abs(derivs).max()), 1e-30)
    params = []
    for comp in range(2):
        g = derivs[:, comp]
        signs = np.where(np.abs(g) <= 1e-12 * scale, 0, np.sign(g)).astype(int)
        last_nonzero = None
        last_idx = None
        for i, s in enumerate(signs):
            if s == 0:
                continue
            if last_nonzero is not None and s != last_nonzero:
                lo, hi = ws[last_idx], ws[i]
                root = brentq(
                    lambda w: curve.derivative_at(w)[comp], lo, hi, xtol=refine_tol
                )
                params.append(float(root))
            last_nonzero = s
            last_idx = i
    return sorted(p for p in params if 1e-9 < p < 1.0 - 1e-9)


def _trend(values: np.ndarray) -> int:
    """+1 strictly increasing, -1 strictly decreasing, 0 constant; else raises."""
    diffs = np.diff(values)
    span = float(values.max() - values.min())
    if span <= 1e-10:
        return 0
    if np.all(diffs > -1e-12):
        return 1
    if np.all(diffs < 1e-12):
        return -1
    raise DegenerateCellError("coordinate not monotone over segment")


def split_monotone(curve: PiecewiseBezierCurve, snap_tol: float = 1e-5):
    """Split the domain curve into segments monotone in both coordinates.

    Split parameters snap to existing breakpoints when within snap_tol;
    otherwise the curve is subdivided, so segment endpoints always coincide
    with breakpoints of the (possibly refined) parent curve.
    """
    all_pts = np.vstack([seg.control_points for seg in curve.segments])
    span = max(float(np.ptp(all_pts[:, 0])), float(np.ptp(all_pts[:, 1])))
    if span <= 1e-12:
        raise ValueError("degenerate (single-point) domain curve")
    raw = monotone_split_params(curve)
    cuts = {0.0, 1.0}
    inserts = []
    for p in raw:
        near = curve.breakpoints[np.argmin(np.abs(curve.breakpoints - p))]
        if abs(near - p) <= snap_tol:
            cuts.add(float(near))
        else:
            inserts.append(p)
            cuts.add(p)
    refined = curve.subdivide_at(inserts) if inserts else curve
    cut_list = sorted(cuts)

    segments = []
    for lo, hi in zip(cut_list[:-1], cut_list[1:]):
        ws = np.linspace(lo, hi, 101)
        pts = np.array([refined.evaluate(w) for w in ws])
        u_trend = _trend(pts[:, 0])
        v_trend = _trend(pts[:, 1])
        if v_trend != 0:
            axis = GraphAxis.U_OF_V
            host = (float(min(pts[0, 1], pts[-1, 1])), float(max(pts[0, 1], pts[-1, 1])))
        elif u_trend != 0:
            axis = GraphAxis.V_OF_U
            host = (float(min(pts[0, 0], pts[-1, 0])), float(max(pts[0, 0], pts[-1, 0])))
        else:
            raise DegenerateCellError("segment constant in both coordinates")
        segments.append(
            MonotoneSegment(
                curve=refined,
                w_range=(float(lo), float(hi)),
                axis=axis,
                host_range=host,
                u_trend=u_trend,
                v_trend=v_trend,
            )
        )
    return segments


# ---------------------------------------------------------------------------
# Domain decomposition
# ---------------------------------------------------------------------------

def _graph_indices(axis: GraphAxis):
    """(independent index, dependent index) into (u, v)."""
    return (1, 0) if axis is GraphAxis.U_OF_V else (0, 1)


def _cell_bounds_from_graph(axis: GraphAxis, x_extent, y_extent):
    if axis is GraphAxis.U_OF_V:
        return (y_extent[0], y_extent[1], x_extent[0], x_extent[1])
    return (x_extent[0], x_extent[1], y_extent[0], y_extent[1])


def _arc_cross_coordinate(cell: DomainCell, y_value: float) -> float:
    """Independent coordinate of the cell's arc at the given band coordinate."""
    xi, yi = _graph_indices(cell.axis)
    w0, w1 = cell.w_span
    curve = cell.parent_curve

    def dep(w):
        return curve.evaluate(w)[yi] - y_value

    d0, d1 = dep(w0), dep(w1)
    if abs(d0) <= 1e-13:
        return float(curve.evaluate(w0)[xi])
    if abs(d1) <= 1e-13:
        return float(curve.evaluate(w1)[xi])
    w = brentq(dep, w0, w1, xtol=1e-14)
    return float(curve.evaluate(w)[xi])


def decompose_domain(segment: MonotoneSegment, keep_side: str,
                     emit_rectangles: bool = True):
    """Cells for one monotone segment: one trapezoid per breakpoint interval.

    ``keep_side`` names the retained side in the dependent coordinate:
    "below" keeps dependent <= curve, "above" keeps dependent >= curve.
    Each trapezoid's curved edge spans two adjacent breakpoints and passes
    through the cell corner at the interval's near end; the cell extends
    along the independent axis to the domain edge on the retained side.
    """
    if keep_side not in ("below", "above"):
        raise ValueError("keep_side must be 'below' or 'above'")
    xi, yi = _graph_indices(segment.axis)
    span = segment.breakpoint_span()
    if len(span) < 2:
        raise DegenerateCellError("segment endpoints must lie at breakpoints")
    curve = segment.curve
    cells = []
    y_values = []
    for (k0, w0), (k1, w1) in zip(span[:-1], span[1:]):
        p0 = curve.evaluate(w0)
        p1 = curve.evaluate(w1)
        x0, y0 = float(p0[xi]), float(p0[yi])
        x1, y1 = float(p1[xi]), float(p1[yi])
        y_values.extend([y0, y1])
        if abs(y1 - y0) <= 1e-12:
            continue
        if abs(x1 - x0) <= 1e-12:
            raise DegenerateCellError(
                "curved edge constant in the independent coordinate"
            )
        f_increasing = (y1 - y0 > 0) == (x1 - x0 > 0)
        toward_far = (keep_side == "below") == f_increasing
        x_extent = (min(x0, x1), 1.0) if toward_far else (0.0, max(x0, x1))
        y_extent = (min(y0, y1), max(y0, y1))
        if x_extent[1] - x_extent[0] <= 1e-12:
            raise DegenerateCellError("keep side inconsistent with curve position")
        y_mid = 0.5 * (y_extent[0] + y_extent[1])
        cell = DomainCell(
            kind=TRAPEZOID,
            bounds=_cell_bounds_from_graph(segment.axis, x_extent, y_extent),
            axis=segment.axis,
            keep_side=keep_side,
            toward_far_edge=toward_far,
            w_span=(w0, w1),
            source_breakpoints=(k0, k1),
            parent_curve=curve,
        )
        x_arc = _arc_cross_coordinate(cell, y_mid)
        far = 1.0 if toward_far else 0.0
        sample_graph = (0.5 * (x_arc + far), y_mid)
        cell.retained_sample = (
            (sample_graph[1], sample_graph[0])
            if segment.axis is GraphAxis.U_OF_V
            else sample_graph
        )
        cells.append(cell)

    if emit_rectangles and y_values:
        y_min, y_max = min(y_values), max(y_values)
        if keep_side == "below" and y_min > 1e-12:
            bounds = _cell_bounds_from_graph(segment.axis, (0.0, 1.0), (0.0, y_min))
            cells.append(_rectangle_cell(bounds))
        if keep_side == "above" and y_max < 1.0 - 1e-12:
            bounds = _cell_bounds_from_graph(segment.axis, (0.0, 1.0), (y_max, 1.0))
            cells.append(_rectangle_cell(bounds))
    return cells


def _rectangle_cell(bounds) -> DomainCell:
    u0, u1, v0, v1 = bounds
    cell = DomainCell(kind=RECTANGLE, bounds=bounds)
    cell.retained_sample = (0.5 * (u0 + u1), 0.5 * (v0 + v1))
    return cell


def cell_contains(cell: DomainCell, u: float, v: float) -> bool:
    """Half-open membership; the curved edge itself belongs to its trapezoid."""
    u0, u1, v0, v1 = cell.bounds

    def in_range(x, lo, hi):
        upper_ok = x < hi or (hi == 1.0 and x <= 1.0)
        return lo <= x and upper_ok

    if not (in_range(u, u0, u1) and in_range(v, v0, v1)):
        return False
    if cell.kind == RECTANGLE:
        return True
    xi, yi = _graph_indices(cell.axis)
    point = (u, v)
    x_arc = _arc_cross_coordinate(cell, point[yi])
    if cell.toward_far_edge:
        return point[xi] >= x_arc
    return point[xi] <= x_arc


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

def _local_coords(cell: DomainCell, u: float, v: float):
    u0, u1, v0, v1 = cell.bounds
    return (u - u0) / (u1 - u0), (v - v0) / (v1 - v0)


def _case_id(corner: tuple, rotation: int) -> int:
    base = 1 if corner == (1, 1) else 5
    return base + rotation


def _classify_candidates(cell: DomainCell):
    """All rotations putting the cell into the canonical {x <= f(y)} form.

    Returns (candidates, corners_on_curve); candidates are ordered with the
    f(1) = 1 family first, then by rotation count.
    """
    curve = cell.parent_curve
    w0, w1 = cell.w_span
    e0 = _local_coords(cell, *curve.evaluate(w0))
    e1 = _local_coords(cell, *curve.evaluate(w1))
    sample = _local_coords(cell, *cell.retained_sample)

    corners_on_curve = sum(
        1
        for (ca, cb) in ((0, 0), (0, 1), (1, 0), (1, 1))
        for e in (e0, e1)
        if abs(e[0] - ca) <= _COORD_TOL and abs(e[1] - cb) <= _COORD_TOL
    )

    candidates = []
    for r in range(4):
        r0 = _rotate_point(*e0, r)
        r1 = _rotate_point(*e1, r)
        ys = sorted((r0[1], r1[1]))
        if not (abs(ys[0]) <= _COORD_TOL and abs(ys[1] - 1.0) <= _COORD_TOL):
            continue
        xs = (r0[0], r1[0])
        hi = max(xs)
        if abs(hi - 1.0) > _COORD_TOL:
            continue
        through = r0 if r0[0] >= r1[0] else r1
        corner = (1, int(round(through[1])))
        # Retained sample must sit on the {x <= f(y)} side.
        sx, sy = _rotate_point(*sample, r)
        x_arc = _rotated_arc_x(cell, r, sy)
        if sx > x_arc + _COORD_TOL:
            continue
        candidates.append(TrapezoidCase(_case_id(corner, r), r, corner))
    candidates.sort(
        key=lambda c: (c.canonical_corner != (1, 1), c.rotation_quarter_turns)
    )
    return candidates, corners_on_curve


def classify_trapezoid(cell: DomainCell, strict: bool = True) -> TrapezoidCase:
    """Case id (1..8) and the quarter-turn rotation onto the canonical form.

    The canonical form has the curve as a single-valued graph x = f(y) with
    the retained region {x <= f(y)} and f reaching exactly 1 at one endpoint
    (the through-vertex, at canonical corner (1,0) or (1,1)).

    With strict=True a curve passing through two cell corners (possible only
    for degenerate trapezoids whose f vanishes at one end) raises
    AmbiguousCaseError; with strict=False the family with f(1) = 1 wins.
    """
    if cell.kind != TRAPEZOID:
        raise ValueError("only trapezoid cells carry a case")
    candidates, corners_on_curve = _classify_candidates(cell)
    if not candidates:
        raise AmbiguousCaseError("cell does not match any of the eight cases")
    if len(candidates) > 1 and strict and corners_on_curve >= 2:
        raise AmbiguousCaseError(
            "curve passes through two cell corners; re-split the cell"
        )
    return candidates[0]


def _rotated_arc_x(cell: DomainCell, rotation: int, y_value: float) -> float:
    """x of the cell's arc at rotated-frame height y_value."""
    curve = cell.parent_curve
    w0, w1 = cell.w_span

    def height(w):
        local = _local_coords(cell, *curve.evaluate(w))
        return _rotate_point(*local, rotation)[1] - y_value

    h0, h1 = height(w0), height(w1)
    if abs(h0) <= 1e-12:
        w = w0
    elif abs(h1) <= 1e-12:
        w = w1
    else:
        w = brentq(height, w0, w1, xtol=1e-14)
    local = _local_coords(cell, *curve.evaluate(w))
    return _rotate_point(*local, rotation)[0]


# ---------------------------------------------------------------------------
# Boundary polynomial fitting
# ---------------------------------------------------------------------------

def fit_boundary_polynomial(edge_fn, degree: int, tol: float, samples: int = 64):
    """Least-squares polynomial fit of a single-valued edge, endpoints exact.

    ``edge_fn`` maps [0,1] to the edge's cross coordinate.  Returns
    (BoundaryPolynomial, max_residual); raises FitError when the residual
    exceeds tol.
    """
    if degree < 1:
        raise ValueError("fit degree must be at least 1")
    ts = np.linspace(0.0, 1.0, samples)
    values = getattr(edge_fn, "values", None)
    ys = np.asarray(values(ts)) if values else np.array([float(edge_fn(t)) for t in ts])
    y0, y1 = ys[0], ys[-1]
    coeffs = np.zeros(degree + 1)
    coeffs[0] = y0
    coeffs[1] = y1 - y0
    if degree >= 2:
        # Basis functions t^i (1 - t), i = 1..degree-1, vanish at both ends.
        linear = y0 + (y1 - y0) * ts
        basis = np.stack([ts**i * (1.0 - ts) for i in range(1, degree)], axis=1)
        sol, *_ = np.linalg.lstsq(basis, ys - linear, rcond=None)
        for i, c in enumerate(sol, start=1):
            coeffs[i] += c
            coeffs[i + 1] -= c
    poly = BoundaryPolynomial(coeffs)
    dense = np.linspace(0.0, 1.0, 257)
    if values:
        residual = float(np.abs(poly(dense) - values(dense)).max())
    else:
        residual = float(max(abs(float(poly(t)) - float(edge_fn(t))) for t in dense))
    if residual > tol:
        raise FitError(
            f"degree-{degree} fit misses tolerance {tol:.3e}; "
            "raise the degree or re-split the cell",
            residual,
        )
    return poly, residual


class _CanonicalEdge:
    """The cell's arc as x = f(y) in the rotated canonical frame.

    Inverts y(w) through a sampled table plus a few Newton steps instead of
    bisecting per query; the fit evaluates this a few hundred times per cell.
    """

    def __init__(self, cell: DomainCell, rotation: int, samples: int = 257):
        self.cell = cell
        self.rotation = rotation
        w0, w1 = cell.w_span
        self.w0, self.w1 = w0, w1
        ws = np.linspace(w0, w1, samples)
        pts = cell.parent_curve.evaluate_many(ws)
        u0, u1, v0, v1 = cell.bounds
        a = (pts[:, 0] - u0) / (u1 - u0)
        b = (pts[:, 1] - v0) / (v1 - v0)
        for _ in range(rotation % 4):
            a, b = 1.0 - b, a
        if b[-1] < b[0]:
            ws, a, b = ws[::-1], a[::-1], b[::-1]
        self.ws, self.xs, self.ys = ws, a, b

    def _points(self, ws):
        u0, u1, v0, v1 = self.cell.bounds
        pts = self.cell.parent_curve.evaluate_many(ws)
        a = (pts[:, 0] - u0) / (u1 - u0)
        b = (pts[:, 1] - v0) / (v1 - v0)
        for _ in range(self.rotation % 4):
            a, b = 1.0 - b, a
        return a, b

    def _dys(self, ws):
        u0, u1, v0, v1 = self.cell.bounds
        d = self.cell.parent_curve.derivative_many(ws)
        da = d[:, 0] / (u1 - u0)
        db = d[:, 1] / (v1 - v0)
        for _ in range(self.rotation % 4):
            da, db = -db, da
        return db

    def values(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        ws = np.interp(np.clip(ts, self.ys[0], self.ys[-1]), self.ys, self.ws)
        x, y = self._points(ws)
        for _ in range(8):
            err = y - ts
            if np.abs(err).max() <= 1e-13:
                break
            dy = self._dys(ws)
            dy = np.where(dy == 0.0, 1.0, dy)
            ws = np.clip(ws - err / dy, self.w0, self.w1)
            x, y = self._points(ws)
        x = np.where(ts <= self.ys[0], self.xs[0], x)
        x = np.where(ts >= self.ys[-1], self.xs[-1], x)
        return x

    def __call__(self, t):
        return float(self.values([t])[0])


def _canonical_edge_fn(cell: DomainCell, rotation: int):
    return _CanonicalEdge(cell, rotation)


def fit_cell(cell: DomainCell, fit_degree: int, fit_tol: float) -> DomainCell:
    """Classify a trapezoid, fit its boundary polynomial, widen for overshoot.

    Tries every canonical rotation candidate at each degree up to the cap
    (degenerate cells admit two orientations, and near curve extrema only
    one of them has bounded slope).  When no combination meets the
    tolerance, raises _NeedsSplit carrying the arc's parametric midpoint.
    Fills case, boundary_fn, fit_residual, and patch_bounds in place.
    """
    candidates, _ = _classify_candidates(cell)
    if not candidates:
        raise AmbiguousCaseError("cell does not match any of the eight cases")
    last_error = None
    for degree in range(fit_degree, 4):
        for case in candidates:
            edge_fn = _canonical_edge_fn(cell, case.rotation_quarter_turns)
            try:
                poly, residual = fit_boundary_polynomial(edge_fn, degree, fit_tol)
            except FitError as err:
                last_error = err
                continue
            try:
                patch_bounds, poly = _absorb_unit_range(
                    cell, case.rotation_quarter_turns, poly
                )
            except FitError as err:
                last_error = err
                continue
            cell.case = case
            cell.boundary_fn = poly
            cell.fit_residual = float(residual)
            cell.patch_bounds = patch_bounds
            return cell
    w0, w1 = cell.w_span
    raise _NeedsSplit([0.5 * (w0 + w1)]) from last_error


def tighten_cell(cell: DomainCell):
    """Shrink a trapezoid to the arc's bounding box, plus a filler rectangle.

    Used when the full-extent cell cannot be fitted: near a curve extremum
    the band-axis orientation has unbounded slope, while the tight box also
    admits the cross orientation.  The tight cell plus filler covers exactly
    the same region as the original cell.
    """
    xi, yi = _graph_indices(cell.axis)
    curve = cell.parent_curve
    w0, w1 = cell.w_span
    p0, p1 = curve.evaluate(w0), curve.evaluate(w1)
    x_lo, x_hi = sorted((float(p0[xi]), float(p1[xi])))
    y_lo, y_hi = sorted((float(p0[yi]), float(p1[yi])))
    tight = DomainCell(
        kind=TRAPEZOID,
        bounds=_cell_bounds_from_graph(cell.axis, (x_lo, x_hi), (y_lo, y_hi)),
        axis=cell.axis,
        keep_side=cell.keep_side,
        toward_far_edge=cell.toward_far_edge,
        w_span=cell.w_span,
        source_breakpoints=cell.source_breakpoints,
        parent_curve=curve,
    )
    y_mid = 0.5 * (y_lo + y_hi)
    x_arc = _arc_cross_coordinate(tight, y_mid)
    x_side = x_hi if cell.toward_far_edge else x_lo
    sample_graph = (0.5 * (x_arc + x_side), y_mid)
    tight.retained_sample = (
        (sample_graph[1], sample_graph[0])
        if cell.axis is GraphAxis.U_OF_V
        else sample_graph
    )
    if cell.toward_far_edge:
        filler_extent = (x_hi, 1.0)
    else:
        filler_extent = (0.0, x_lo)
    filler = None
    if filler_extent[1] - filler_extent[0] > 1e-12:
        filler = _rectangle_cell(
            _cell_bounds_from_graph(cell.axis, filler_extent, (y_lo, y_hi))
        )
    return tight, filler


def _absorb_unit_range(cell: DomainCell, rotation: int, poly: BoundaryPolynomial):
    """Stretch the extraction box so the fitted polynomial maps into [0,1].

    A least-squares fit may leave [0,1] by about its residual (overshoot past
    the through-vertex, undershoot past a collapsed end).  Extending the box
    along the canonical x axis and remapping f affinely absorbs both without
    changing the composed geometry: u = s*f(t) lands on the same domain
    points either way.
    """
    lo, hi = poly.unit_range()
    d0 = max(0.0, -lo)
    d1 = max(0.0, hi - 1.0)
    if d0 == 0.0 and d1 == 0.0:
        return cell.bounds, poly

    for local_edge in Edge:
        if rotate_edge(local_edge, rotation)[0] is Edge.U1:
            break
    u0, u1, v0, v1 = cell.bounds
    du, dv = u1 - u0, v1 - v0
    if local_edge is Edge.U1:
        u1 += d1 * du
        u0 -= d0 * du
    elif local_edge is Edge.U0:
        u0 -= d1 * du
        u1 += d0 * du
    elif local_edge is Edge.V1:
        v1 += d1 * dv
        v0 -= d0 * dv
    else:
        v0 -= d1 * dv
        v1 += d0 * dv
    if not (0.0 <= u0 < u1 <= 1.0 and 0.0 <= v0 < v1 <= 1.0):
        raise FitError(
            "fit range excursion cannot be absorbed at the domain boundary",
            max(d0, d1),
        )
    coeffs = poly.coefficients.copy()
    coeffs[0] += d0
    coeffs = coeffs / (d0 + max(1.0, hi))
    return (u0, u1, v0, v1), BoundaryPolynomial(coeffs)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def _w_increases_canonical_t(cell: DomainCell, rotation: int) -> bool:
    curve = cell.parent_curve
    w0, w1 = cell.w_span
    y0 = _rotate_point(*_local_coords(cell, *curve.evaluate(w0)), rotation)[1]
    y1 = _rotate_point(*_local_coords(cell, *curve.evaluate(w1)), rotation)[1]
    return y1 > y0


def _normalize_trapezoid(surface: BezierSurface, cell: DomainCell):
    """Returns (patch, curved_edge, PatchMap); edge parameter runs with w."""
    if cell.case is None or cell.boundary_fn is None:
        raise ValueError("trapezoid cell must be classified and fitted first")
    r = cell.case.rotation_quarter_turns
    sub = extract_subpatch(surface, *cell.patch_bounds)
    canonical = BezierSurface(rotate_net(sub.control_net, r))
    composed = compose_reparameterize(canonical, cell.boundary_fn)
    net = composed.control_net
    flip_t = not _w_increases_canonical_t(cell, r)
    if flip_t:
        net = flip_net_v(net)
    back = (4 - r) % 4
    net = rotate_net(net, back)
    edge, sign = rotate_edge(Edge.U1, back)
    flip_edge_axis = sign == -1
    if flip_edge_axis:
        net = flip_net_v(net) if edge in (Edge.U0, Edge.U1) else flip_net_u(net)
    patch = BezierSurface(net)
    pmap = PatchMap(
        patch_bounds=cell.patch_bounds,
        rotation=r,
        flip_t=flip_t,
        back_rotation=back,
        flip_edge_axis=flip_edge_axis,
        edge=edge,
        f=cell.boundary_fn,
    )
    return patch, edge, pmap


def normalize_patch(surface: BezierSurface, cell: DomainCell) -> BezierSurface:
    """Standard-domain patch covering the cell's retained region exactly."""
    if cell.kind == RECTANGLE:
        return extract_subpatch(surface, *cell.bounds)
    return _normalize_trapezoid(surface, cell)[0]


def rectangle_map(cell: DomainCell) -> PatchMap:
    return PatchMap(
        patch_bounds=cell.bounds,
        rotation=0,
        flip_t=False,
        back_rotation=0,
        flip_edge_axis=False,
        edge=Edge.U1,
        f=BoundaryPolynomial(np.array([1.0])),
    )


# ---------------------------------------------------------------------------
# Whole-trim driver
# ---------------------------------------------------------------------------

def _segment_keep_side(segment: MonotoneSegment, keep_fn) -> str:
    """Decide below/above for one segment by probing both sides of its midpoint."""
    xi, yi = _graph_indices(segment.axis)
    w_mid = 0.5 * (segment.w_range[0] + segment.w_range[1])
    pt = segment.curve.evaluate(w_mid)
    eps = 1e-4
    lo = pt.copy()
    hi = pt.copy()
    lo[yi] = max(pt[yi] - eps, 0.0)
    hi[yi] = min(pt[yi] + eps, 1.0)
    keep_lo = bool(keep_fn(lo[0], lo[1]))
    keep_hi = bool(keep_fn(hi[0], hi[1]))
    if keep_lo == keep_hi:
        raise DegenerateCellError(
            "keep side inconsistent with curve position at segment midpoint"
        )
    return "below" if keep_lo else "above"


def decompose_trim(curve: PiecewiseBezierCurve, keep_fn):
    """Decompose the retained side of a trim curve into cells that tile it.

    Trapezoids come from each monotone segment; leftover full-width bands in
    the shared dependent coordinate become rectangles when the keep test
    retains them.  All non-constant segments must share one graph axis.
    """
    segments = split_monotone(curve)
    axes = {s.axis for s in segments if not (s.u_trend == 0 or s.v_trend == 0)} or {
        segments[0].axis
    }
    if len(axes) > 1:
        raise DegenerateCellError("mixed graph orientations are not supported")
    axis = axes.pop()
    xi, yi = _graph_indices(axis)

    cells = []
    cut_values = {0.0, 1.0}
    covered = []
    for seg in segments:
        side = _segment_keep_side(seg, keep_fn)
        seg_cells = decompose_domain(seg, side, emit_rectangles=False)
        for cell in seg_cells:
            if not keep_fn(*cell.retained_sample):
                raise DegenerateCellError(
                    "trapezoid extension leaves the retained region"
                )
            y_ext = (cell.bounds[0], cell.bounds[1]) if axis is GraphAxis.U_OF_V else (
                cell.bounds[2], cell.bounds[3]
            )
            covered.append(y_ext)
            cut_values.update(y_ext)
        if not seg_cells:
            w_mid = 0.5 * (seg.w_range[0] + seg.w_range[1])
            cut_values.add(float(seg.curve.evaluate(w_mid)[yi]))
        cells.extend(seg_cells)

    cuts = sorted(cut_values)
    pending = None
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 1e-12:
            continue
        mid = 0.5 * (lo + hi)
        if any(c0 - 1e-12 <= mid <= c1 + 1e-12 for c0, c1 in covered):
            if pending is not None:
                cells.append(_leftover_rectangle(axis, pending))
                pending = None
            continue
        kept = set()
        for x in (0.2, 0.5, 0.8):
            uv = (x, mid) if axis is GraphAxis.V_OF_U else (mid, x)
            kept.add(bool(keep_fn(*uv)))
        if len(kept) > 1:
            raise DegenerateCellError("leftover band is only partially retained")
        if kept.pop():
            pending = (pending[0], hi) if pending else (lo, hi)
        elif pending is not None:
            cells.append(_leftover_rectangle(axis, pending))
            pending = None
    if pending is not None:
        cells.append(_leftover_rectangle(axis, pending))
    return segments, cells


def _leftover_rectangle(axis: GraphAxis, y_extent) -> DomainCell:
    bounds = _cell_bounds_from_graph(axis, (0.0, 1.0), y_extent)
    return _rectangle_cell(bounds)


def build_patch_decomposition(surface: BezierSurface, curve: PiecewiseBezierCurve,
                              keep_fn, fit_degree: int = 2,
                              fit_tol: float = 1e-4) -> PatchDecomposition:
    """Decompose, classify, fit, and normalize one trimmed surface.

    Raises the internal _NeedsSplit (caught by the pipeline) when some cell
    cannot meet the fit tolerance at the degree cap.
    """
    segments, cells = decompose_trim(curve, keep_fn)
    needed = []
    fitted_cells = []
    for cell in cells:
        if cell.kind != TRAPEZOID:
            fitted_cells.append(cell)
            continue
        try:
            fit_cell(cell, fit_degree, fit_tol)
            fitted_cells.append(cell)
            continue
        except _NeedsSplit:
            pass
        tight, filler = tighten_cell(cell)
        try:
            fit_cell(tight, fit_degree, fit_tol)
            fitted_cells.append(tight)
            if filler is not None:
                fitted_cells.append(filler)
        except _NeedsSplit as err:
            needed.extend(err.params)
    if needed:
        raise _NeedsSplit(needed)
    cells = fitted_cells

    patches = []
    curved_edges = []
    maps = []
    for cell in cells:
        if cell.kind == RECTANGLE:
            patches.append(extract_subpatch(surface, *cell.bounds))
            curved_edges.append(None)
            maps.append(rectangle_map(cell))
        else:
            patch, edge, pmap = _normalize_trapezoid(surface, cell)
            patches.append(patch)
            curved_edges.append(edge)
            maps.append(pmap)

    boundary = sorted(
        (i for i, c in enumerate(cells) if c.kind == TRAPEZOID),
        key=lambda i: cells[i].w_span[0],
    )
    parent = segments[0].curve
    return PatchDecomposition(
        cells=cells,
        patches=patches,
        curved_edges=curved_edges,
        maps=maps,
        breakpoints=parent.breakpoints.copy(),
        boundary_indices=boundary,
    )
