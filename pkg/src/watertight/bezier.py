"""Bernstein/Bezier algebra.

Curves and tensor-product surfaces over the standard [0,1] domains:
de Casteljau evaluation and subdivision, subpatch extraction, degree
elevation and least-squares reduction, Bernstein/monomial basis changes,
and the curved-trapezoid reparameterization (s, t) -> (s*f(t), t) that
turns a trapezoid-domain restriction of a surface into a standard patch.

All arithmetic is double precision.  Long accumulations (basis changes,
polynomial products) go through math.fsum so the composition stays exact
to about 1e-9 at the supported degree caps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, ReductionError, UnsupportedDegreeError

# Past these caps the monomial/Bernstein round trip loses too many digits
# to honor the composition exactness guarantee.
MAX_SURFACE_DEGREE = 10
MAX_BOUNDARY_DEGREE = 3

_UNIT_SLACK = 1e-12


# ---------------------------------------------------------------------------
# Bernstein basis and de Casteljau primitives
# ---------------------------------------------------------------------------

def all_bernstein(degree: int, x: float) -> np.ndarray:
    """All degree-`degree` Bernstein basis values at x, by the stable recurrence."""
    if degree < 0:
        raise IndexError("degree must be non-negative")
    vals = np.zeros(degree + 1)
    vals[0] = 1.0
    u = 1.0 - x
    for j in range(1, degree + 1):
        saved = 0.0
        for k in range(j):
            temp = vals[k]
            vals[k] = saved + u * temp
            saved = x * temp
        vals[j] = saved
    return vals


def bernstein_basis(k: int, degree: int, x: float) -> float:
    """B_{k,degree}(x) = C(degree,k) x^k (1-x)^(degree-k)."""
    if not 0 <= k <= degree:
        raise IndexError(f"basis index {k} out of range for degree {degree}")
    return float(all_bernstein(degree, x)[k])


def de_casteljau(points: np.ndarray, t: float) -> np.ndarray:
    """Evaluate the Bezier combination of a control polygon at t.

    Exact endpoint selection: t == 0.0 and t == 1.0 return the first/last
    control point bitwise, which stitched-boundary evaluation relies on.
    """
    pts = np.asarray(points, dtype=float)
    if t == 0.0:
        return pts[0].copy()
    if t == 1.0:
        return pts[-1].copy()
    while pts.shape[0] > 1:
        pts = (1.0 - t) * pts[:-1] + t * pts[1:]
    return pts[0]


def de_casteljau_split(points: np.ndarray, t: float):
    """Subdivide a control polygon at t; returns (left, right) polygons."""
    pts = np.asarray(points, dtype=float)
    left = [pts[0]]
    right = [pts[-1]]
    while pts.shape[0] > 1:
        pts = (1.0 - t) * pts[:-1] + t * pts[1:]
        left.append(pts[0])
        right.append(pts[-1])
    return np.array(left), np.array(right[::-1])


def _subsegment_polygon(points: np.ndarray, t0: float, t1: float) -> np.ndarray:
    """Control polygon of the restriction to [t0, t1], mapped onto [0,1]."""
    pts = np.asarray(points, dtype=float)
    if t0 > 0.0:
        pts = de_casteljau_split(pts, t0)[1]
        t1 = (t1 - t0) / (1.0 - t0)
    if t1 < 1.0:
        pts = de_casteljau_split(pts, t1)[0]
    return pts


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class BezierCurve:
    """A Bezier curve of degree len(control_points) - 1, in 2D or 3D."""

    control_points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.control_points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("control_points must be a (degree+1, dim) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("control points must be finite")
        self.control_points = pts

    @property
    def degree(self) -> int:
        return self.control_points.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.control_points.shape[1]

    def evaluate(self, t: float) -> np.ndarray:
        if not 0.0 <= t <= 1.0:
            raise DomainError(f"curve parameter {t} outside [0, 1]")
        return de_casteljau(self.control_points, t)

    def derivative(self) -> "BezierCurve":
        d = self.degree
        if d == 0:
            return BezierCurve(np.zeros((1, self.dim)))
        return BezierCurve(d * np.diff(self.control_points, axis=0))

    def split(self, t: float):
        left, right = de_casteljau_split(self.control_points, t)
        return BezierCurve(left), BezierCurve(right)

    def subsegment(self, t0: float, t1: float) -> "BezierCurve":
        if not (0.0 <= t0 < t1 <= 1.0):
            raise DomainError(f"invalid subsegment interval [{t0}, {t1}]")
        return BezierCurve(_subsegment_polygon(self.control_points, t0, t1))

    def reversed(self) -> "BezierCurve":
        return BezierCurve(self.control_points[::-1].copy())


def eval_curve(curve, t: float) -> np.ndarray:
    """Evaluate a BezierCurve or PiecewiseBezierCurve at a global parameter."""
    return curve.evaluate(t)


def degree_elevate_curve(curve: BezierCurve, target: int) -> BezierCurve:
    """Exact re-expression of a curve at a higher (or equal) degree."""
    if target < curve.degree:
        raise ValueError(f"target degree {target} below current {curve.degree}")
    pts = curve.control_points
    while pts.shape[0] - 1 < target:
        d = pts.shape[0] - 1
        new = np.empty((d + 2, pts.shape[1]))
        new[0] = pts[0]
        new[-1] = pts[-1]
        for i in range(1, d + 1):
            a = i / (d + 1)
            new[i] = a * pts[i - 1] + (1.0 - a) * pts[i]
        pts = new
    return BezierCurve(pts.copy())


def degree_reduce_curve(curve: BezierCurve, target: int, tol: float) -> BezierCurve:
    """Least-squares degree reduction with interpolated endpoints.

    Fits over 10*degree uniform samples; raises ReductionError carrying the
    achieved deviation when the dense-sampled error exceeds tol.
    """
    if not 0 <= target < curve.degree:
        raise ValueError(f"target degree {target} not below current {curve.degree}")
    n_samples = max(10 * curve.degree, 4 * (target + 1))
    ts = np.linspace(0.0, 1.0, n_samples)
    values = np.array([curve.evaluate(t) for t in ts])
    basis = np.array([all_bernstein(target, t) for t in ts])

    if target == 0:
        cps = values.mean(axis=0, keepdims=True)
    elif target == 1:
        cps = np.array([curve.control_points[0], curve.control_points[-1]])
    else:
        p0 = curve.control_points[0]
        pn = curve.control_points[-1]
        rhs = values - np.outer(basis[:, 0], p0) - np.outer(basis[:, -1], pn)
        interior, *_ = np.linalg.lstsq(basis[:, 1:-1], rhs, rcond=None)
        cps = np.vstack([p0, interior, pn])

    reduced = BezierCurve(cps)
    dense = np.linspace(0.0, 1.0, 257)
    deviation = max(
        float(np.linalg.norm(curve.evaluate(t) - reduced.evaluate(t))) for t in dense
    )
    if deviation > tol:
        raise ReductionError(
            f"cannot reduce degree {curve.degree} curve to {target} within {tol:.3e}",
            deviation,
        )
    return reduced


@dataclass(eq=False)
class PiecewiseBezierCurve:
    """Bezier segments chained over strictly increasing breakpoints in [0,1].

    Adjacent segments must share their junction control point exactly; the
    global parameter spans [0,1].
    """

    segments: list
    breakpoints: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 1 or bp.shape[0] != len(self.segments) + 1:
            raise ValueError("need len(segments) + 1 breakpoints")
        if not (bp[0] == 0.0 and bp[-1] == 1.0):
            raise ValueError("global parameter must span [0, 1]")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        dims = {seg.dim for seg in self.segments}
        if len(dims) != 1:
            raise ValueError("segments must share one dimension")
        for a, b in zip(self.segments[:-1], self.segments[1:]):
            if not np.array_equal(a.control_points[-1], b.control_points[0]):
                raise ValueError("adjacent segments must share their junction point")
        self.breakpoints = bp

    @property
    def dim(self) -> int:
        return self.segments[0].dim

    @property
    def is_closed(self) -> bool:
        first = self.segments[0].control_points[0]
        last = self.segments[-1].control_points[-1]
        return bool(np.linalg.norm(first - last) <= 1e-12)

    def locate(self, t: float):
        """Segment index and local parameter for a global t."""
        if not 0.0 <= t <= 1.0:
            raise DomainError(f"global parameter {t} outside [0, 1]")
        idx = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        idx = min(max(idx, 0), len(self.segments) - 1)
        lo, hi = self.breakpoints[idx], self.breakpoints[idx + 1]
        return idx, (t - lo) / (hi - lo)

    def evaluate(self, t: float) -> np.ndarray:
        idx, local = self.locate(t)
        return de_casteljau(self.segments[idx].control_points, local)

    def derivative_at(self, t: float) -> np.ndarray:
        """Derivative with respect to the global parameter."""
        idx, local = self.locate(t)
        span = self.breakpoints[idx + 1] - self.breakpoints[idx]
        return self.segments[idx].derivative().evaluate(local) / span

    def _batch(self, ts: np.ndarray, polygons) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        idx = np.searchsorted(self.breakpoints, ts, side="right") - 1
        idx = np.clip(idx, 0, len(self.segments) - 1)
        lo = self.breakpoints[idx]
        hi = self.breakpoints[idx + 1]
        local = (ts - lo) / (hi - lo)
        out = np.empty((ts.shape[0], self.dim))
        for seg_idx in np.unique(idx):
            mask = idx == seg_idx
            pts = np.broadcast_to(
                polygons[seg_idx], (int(mask.sum()),) + polygons[seg_idx].shape
            ).copy()
            w = local[mask][:, None, None]
            while pts.shape[1] > 1:
                pts = (1.0 - w) * pts[:, :-1] + w * pts[:, 1:]
            out[mask] = pts[:, 0]
        return out

    def evaluate_many(self, ts: np.ndarray) -> np.ndarray:
        """Vectorized evaluation at many global parameters."""
        return self._batch(ts, [seg.control_points for seg in self.segments])

    def derivative_many(self, ts: np.ndarray) -> np.ndarray:
        """Vectorized global-parameter derivatives at many parameters."""
        ts = np.asarray(ts, dtype=float)
        idx = np.clip(
            np.searchsorted(self.breakpoints, ts, side="right") - 1,
            0,
            len(self.segments) - 1,
        )
        spans = self.breakpoints[idx + 1] - self.breakpoints[idx]
        polys = [seg.derivative().control_points for seg in self.segments]
        return self._batch(ts, polys) / spans[:, None]

    def subdivide_at(self, params) -> "PiecewiseBezierCurve":
        """Insert breakpoints at the given global parameters (exact splits)."""
        segments = list(self.segments)
        breaks = list(self.breakpoints)
        for t in sorted(set(float(p) for p in params)):
            if any(abs(t - b) <= 1e-13 for b in breaks):
                continue
            if not 0.0 < t < 1.0:
                raise DomainError(f"split parameter {t} outside (0, 1)")
            idx = int(np.searchsorted(breaks, t, side="right")) - 1
            lo, hi = breaks[idx], breaks[idx + 1]
            left, right = segments[idx].split((t - lo) / (hi - lo))
            segments[idx:idx + 1] = [left, right]
            breaks.insert(idx + 1, t)
        return PiecewiseBezierCurve(segments, np.array(breaks))

    def segment_index_of(self, w0: float, w1: float) -> int:
        """Index of the segment spanning exactly [w0, w1]."""
        for i in range(len(self.segments)):
            if abs(self.breakpoints[i] - w0) <= 1e-12 and abs(self.breakpoints[i + 1] - w1) <= 1e-12:
                return i
        raise DomainError(f"no segment spans [{w0}, {w1}]")


# ---------------------------------------------------------------------------
# Surfaces
# ---------------------------------------------------------------------------

class Edge(Enum):
    """One of the four parameter-square edges of a surface patch."""

    U0 = "u=0"
    U1 = "u=1"
    V0 = "v=0"
    V1 = "v=1"


@dataclass(eq=False)
class BezierSurface:
    """Tensor-product Bezier surface with an (m+1, n+1, 3) control net."""

    control_net: np.ndarray

    def __post_init__(self):
        net = np.asarray(self.control_net, dtype=float)
        if net.ndim != 3 or net.shape[2] != 3 or net.shape[0] < 1 or net.shape[1] < 1:
            raise ValueError("control_net must have shape (m+1, n+1, 3)")
        if not np.all(np.isfinite(net)):
            raise ValueError("control points must be finite")
        self.control_net = net

    @property
    def degree_u(self) -> int:
        return self.control_net.shape[0] - 1

    @property
    def degree_v(self) -> int:
        return self.control_net.shape[1] - 1

    def evaluate(self, u: float, v: float) -> np.ndarray:
        """Tensor de Casteljau: collapse u across all columns, then v.

        Parameters 0.0/1.0 short-circuit to exact control-net selections so
        boundary evaluation reduces to arithmetic on edge control points only.
        """
        if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
            raise DomainError(f"surface parameters ({u}, {v}) outside [0, 1]^2")
        net = self.control_net
        if u == 0.0:
            rows = net[0]
        elif u == 1.0:
            rows = net[-1]
        else:
            a = net
            while a.shape[0] > 1:
                a = (1.0 - u) * a[:-1] + u * a[1:]
            rows = a[0]
        return de_casteljau(rows, v)

    def evaluate_grid(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        """Vectorized evaluation on the outer product of parameter arrays."""
        us = np.asarray(us, dtype=float)
        vs = np.asarray(vs, dtype=float)
        if us.size and (us.min() < 0.0 or us.max() > 1.0):
            raise DomainError("u samples outside [0, 1]")
        if vs.size and (vs.min() < 0.0 or vs.max() > 1.0):
            raise DomainError("v samples outside [0, 1]")
        a = np.broadcast_to(self.control_net, (us.size,) + self.control_net.shape).copy()
        w = us[:, None, None, None]
        while a.shape[1] > 1:
            a = (1.0 - w) * a[:, :-1] + w * a[:, 1:]
        b = np.broadcast_to(a[:, 0][:, None], (us.size, vs.size) + a.shape[2:]).copy()
        w = vs[None, :, None, None]
        while b.shape[2] > 1:
            b = (1.0 - w) * b[:, :, :-1] + w * b[:, :, 1:]
        return b[:, :, 0]

    def evaluate_many(self, uv: np.ndarray) -> np.ndarray:
        """Vectorized evaluation at (K, 2) parameter pairs."""
        uv = np.asarray(uv, dtype=float)
        a = np.broadcast_to(
            self.control_net, (uv.shape[0],) + self.control_net.shape
        ).copy()
        w = uv[:, 0][:, None, None, None]
        while a.shape[1] > 1:
            a = (1.0 - w) * a[:, :-1] + w * a[:, 1:]
        b = a[:, 0]
        w = uv[:, 1][:, None, None]
        while b.shape[1] > 1:
            b = (1.0 - w) * b[:, :-1] + w * b[:, 1:]
        return b[:, 0]

    def partial_u(self) -> "BezierSurface":
        net = self.control_net
        if self.degree_u == 0:
            return BezierSurface(np.zeros_like(net))
        return BezierSurface(self.degree_u * np.diff(net, axis=0))

    def partial_v(self) -> "BezierSurface":
        net = self.control_net
        if self.degree_v == 0:
            return BezierSurface(np.zeros_like(net))
        return BezierSurface(self.degree_v * np.diff(net, axis=1))

    def normal(self, u: float, v: float) -> np.ndarray:
        su = self.partial_u().evaluate(u, v)
        sv = self.partial_v().evaluate(u, v)
        n = np.cross(su, sv)
        norm = np.linalg.norm(n)
        if norm == 0.0:
            return n
        return n / norm

    def edge_curve(self, edge: Edge) -> BezierCurve:
        net = self.control_net
        if edge is Edge.U0:
            return BezierCurve(net[0].copy())
        if edge is Edge.U1:
            return BezierCurve(net[-1].copy())
        if edge is Edge.V0:
            return BezierCurve(net[:, 0].copy())
        return BezierCurve(net[:, -1].copy())

    def with_edge(self, edge: Edge, control_points: np.ndarray) -> "BezierSurface":
        """Copy with one boundary row/column replaced (values copied verbatim)."""
        cps = np.asarray(control_points, dtype=float)
        net = self.control_net.copy()
        if edge in (Edge.U0, Edge.U1):
            if cps.shape != (self.degree_v + 1, 3):
                raise ValueError("edge control point count mismatch")
            net[0 if edge is Edge.U0 else -1] = cps
        else:
            if cps.shape != (self.degree_u + 1, 3):
                raise ValueError("edge control point count mismatch")
            net[:, 0 if edge is Edge.V0 else -1] = cps
        return BezierSurface(net)

    def elevated_u(self, target: int) -> "BezierSurface":
        net = self.control_net
        cols = [
            degree_elevate_curve(BezierCurve(net[:, j]), target).control_points
            for j in range(net.shape[1])
        ]
        return BezierSurface(np.stack(cols, axis=1))

    def elevated_v(self, target: int) -> "BezierSurface":
        net = self.control_net
        rows = [
            degree_elevate_curve(BezierCurve(net[i]), target).control_points
            for i in range(net.shape[0])
        ]
        return BezierSurface(np.stack(rows, axis=0))


def eval_surface(surface: BezierSurface, u: float, v: float) -> np.ndarray:
    return surface.evaluate(u, v)


def extract_subpatch(surface: BezierSurface, u0: float, u1: float,
                     v0: float, v1: float) -> BezierSurface:
    """Patch equal to the surface restricted to [u0,u1] x [v0,v1], same bidegree."""
    if not (0.0 <= u0 < u1 <= 1.0 and 0.0 <= v0 < v1 <= 1.0):
        raise DomainError(f"invalid subpatch box [{u0},{u1}]x[{v0},{v1}]")
    net = _subpatch_net(surface.control_net, u0, u1, v0, v1)
    return BezierSurface(net)


def _subpatch_net(net: np.ndarray, u0: float, u1: float, v0: float, v1: float) -> np.ndarray:
    net = _extract_axis0(net, u0, u1)
    net = _extract_axis0(net.transpose(1, 0, 2), v0, v1).transpose(1, 0, 2)
    return net.copy()


def _extract_axis0(pts: np.ndarray, a: float, b: float) -> np.ndarray:
    if a > 0.0:
        pts = _split_axis0(pts, a)[1]
        b = (b - a) / (1.0 - a)
    if b < 1.0:
        pts = _split_axis0(pts, b)[0]
    return pts


def _split_axis0(pts: np.ndarray, t: float):
    left = [pts[0]]
    right = [pts[-1]]
    while pts.shape[0] > 1:
        pts = (1.0 - t) * pts[:-1] + t * pts[1:]
        left.append(pts[0])
        right.append(pts[-1])
    return np.array(left), np.array(right[::-1])


# ---------------------------------------------------------------------------
# Net relabelings (exact; no arithmetic on coordinates)
# ---------------------------------------------------------------------------

def rotate_net(net: np.ndarray, quarter_turns: int) -> np.ndarray:
    """Control net of the surface precomposed with a quarter-turn rotation.

    One turn maps S to S'(x, y) = S(y, 1 - x), i.e. the new patch traverses
    the old one rotated 90 degrees counterclockwise in the parameter square.
    """
    out = np.asarray(net)
    for _ in range(quarter_turns % 4):
        out = out.transpose(1, 0, 2)[::-1]
    return out.copy()


def flip_net_u(net: np.ndarray) -> np.ndarray:
    return np.asarray(net)[::-1].copy()


def flip_net_v(net: np.ndarray) -> np.ndarray:
    return np.asarray(net)[:, ::-1].copy()


# Edge images under one quarter turn of rotate_net: (edge, direction_sign).
# With S'(x, y) = S(y, 1-x): old V1 becomes new U0 (forward), old V0 becomes
# new U1 (forward), old U0/U1 become new V0/V1 reversed.
_EDGE_ROT = {
    Edge.U0: (Edge.V0, -1),
    Edge.U1: (Edge.V1, -1),
    Edge.V0: (Edge.U1, 1),
    Edge.V1: (Edge.U0, 1),
}


def rotate_edge(edge: Edge, quarter_turns: int, direction: int = 1):
    """Where an edge of the original net lands after rotate_net, with direction.

    Returns (edge, sign); sign -1 means the edge parameter now runs reversed.
    """
    sign = direction
    for _ in range(quarter_turns % 4):
        edge, s = _EDGE_ROT[edge]
        sign *= s
    return edge, sign


# ---------------------------------------------------------------------------
# Basis conversion
# ---------------------------------------------------------------------------

def monomial_from_bernstein(coeffs: np.ndarray) -> np.ndarray:
    """Monomial coefficients a_0..a_l of a polynomial given in Bernstein form.

    Works on scalar coefficient vectors or on (l+1, d) point-valued ones.
    """
    b = np.asarray(coeffs, dtype=float)
    flat = b.reshape(b.shape[0], -1)
    l = b.shape[0] - 1
    out = np.zeros_like(flat)
    for j in range(l + 1):
        clj = math.comb(l, j)
        for col in range(flat.shape[1]):
            out[j, col] = math.fsum(
                (-1.0) ** (j - k) * clj * math.comb(j, k) * flat[k, col]
                for k in range(j + 1)
            )
    return out.reshape(b.shape)


def bernstein_from_monomial(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of monomial_from_bernstein (same degree, exact round trip)."""
    a = np.asarray(coeffs, dtype=float)
    flat = a.reshape(a.shape[0], -1)
    l = a.shape[0] - 1
    out = np.zeros_like(flat)
    for k in range(l + 1):
        for col in range(flat.shape[1]):
            out[k, col] = math.fsum(
                math.comb(k, j) / math.comb(l, j) * flat[j, col]
                for j in range(k + 1)
            )
    return out.reshape(a.shape)


# ---------------------------------------------------------------------------
# Boundary polynomial and reparameterization
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class BoundaryPolynomial:
    """f(t) = sum a_i t^i driving the trapezoid substitution u = s * f(t).

    Coefficients are monomial, ascending.  Trailing zero coefficients are
    trimmed so `degree` reflects the true degree.
    """

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be a finite 1D sequence")
        scale = max(1.0, float(np.abs(c).max()))
        while c.shape[0] > 1 and abs(c[-1]) <= 1e-14 * scale:
            c = c[:-1]
        self.coefficients = c

    @property
    def degree(self) -> int:
        return self.coefficients.shape[0] - 1

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(t, self.coefficients)

    def derivative_coefficients(self) -> np.ndarray:
        c = self.coefficients
        if c.shape[0] == 1:
            return np.zeros(1)
        return c[1:] * np.arange(1, c.shape[0])

    def unit_range(self):
        """(min, max) of f over [0,1] via samples plus derivative root isolation."""
        ts = list(np.linspace(0.0, 1.0, 257))
        dc = self.derivative_coefficients()
        if dc.shape[0] > 1 or dc[0] != 0.0:
            for root in np.polynomial.polynomial.polyroots(dc):
                if abs(root.imag) < 1e-9 and -1e-9 < root.real < 1.0 + 1e-9:
                    ts.append(min(max(float(root.real), 0.0), 1.0))
        values = self(np.array(ts))
        return float(values.min()), float(values.max())

    def validate_unit_range(self):
        lo, hi = self.unit_range()
        if lo < -_UNIT_SLACK or hi > 1.0 + _UNIT_SLACK:
            raise DomainError(
                f"boundary polynomial range [{lo:.3e}, {hi:.3e}] leaves [0, 1]"
            )


def _poly_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Convolution of monomial coefficients; b may be point-valued (len, d)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    vec = b.ndim == 2
    nb = b.shape[0]
    out_len = a.shape[0] + nb - 1
    out = np.zeros((out_len, b.shape[1])) if vec else np.zeros(out_len)
    for k in range(out_len):
        terms = [(a[i], b[k - i]) for i in range(a.shape[0]) if 0 <= k - i < nb]
        if vec:
            for col in range(b.shape[1]):
                out[k, col] = math.fsum(ai * bi[col] for ai, bi in terms)
        else:
            out[k] = math.fsum(ai * bi for ai, bi in terms)
    return out


def compose_reparameterize(surface: BezierSurface, f: BoundaryPolynomial) -> BezierSurface:
    """Exact Bezier form of (s, t) -> surface(s * f(t), t).

    Output bidegree is (m, m*p + n) for input bidegree (m, n) and deg f = p.
    Expands the Bernstein factors of the substituted argument in the monomial
    basis, multiplies out, and converts each coordinate back to tensor
    Bernstein form.
    """
    m, n = surface.degree_u, surface.degree_v
    p = f.degree
    if m > MAX_SURFACE_DEGREE or n > MAX_SURFACE_DEGREE:
        raise UnsupportedDegreeError(
            f"surface bidegree ({m}, {n}) exceeds cap {MAX_SURFACE_DEGREE}"
        )
    if p > MAX_BOUNDARY_DEGREE:
        raise UnsupportedDegreeError(
            f"boundary degree {p} exceeds cap {MAX_BOUNDARY_DEGREE}"
        )
    f.validate_unit_range()

    out_n = m * p + n
    rows_mono = [monomial_from_bernstein(surface.control_net[i]) for i in range(m + 1)]

    fpow = [np.array([1.0])]
    for _ in range(m):
        fpow.append(_poly_mul(fpow[-1], f.coefficients))

    # S(s*f(t), t) = sum_q s^q f(t)^q A_q(t) with
    # A_q(t) = sum_{i<=q} (-1)^(q-i) C(m,i) C(m-i, q-i) * (row i as poly in t).
    mono = np.zeros((m + 1, out_n + 1, 3))
    for q in range(m + 1):
        terms = np.array([
            (-1.0) ** (q - i) * math.comb(m, i) * math.comb(m - i, q - i) * rows_mono[i]
            for i in range(q + 1)
        ])
        a_q = np.array([
            [math.fsum(terms[:, j, col]) for col in range(3)]
            for j in range(n + 1)
        ])
        g_q = _poly_mul(fpow[q], a_q)
        mono[q, :g_q.shape[0]] = g_q

    net = _bernstein_from_monomial_axis(mono, axis=0)
    net = _bernstein_from_monomial_axis(net, axis=1)
    return BezierSurface(net)


def _bernstein_from_monomial_axis(values: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(values, axis, 0)
    out = bernstein_from_monomial(moved)
    return np.moveaxis(out, 0, axis)
