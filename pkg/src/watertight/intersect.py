"""Surface-surface intersection data.

Marches one intersection branch between two Bezier surfaces, inverts the
points onto both parameter domains, interpolates the space curve and the two
domain curves, lifts domain curves back onto the surfaces, and measures the
gap between an approximate intersection curve and a surface.

All three curves share one global parameterization (normalized 3D chord
length, breakpoints at the intersection points) so the k-th breakpoint of
the space curve and of both domain curves names the same intersection point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .bezier import BezierCurve, BezierSurface, PiecewiseBezierCurve
from .errors import InversionError, NoIntersectionError

log = logging.getLogger(__name__)

_NEWTON_MAX_ITER = 50
_PARAM_TOL = 1e-12


@dataclass(eq=False)
class IntersectionPoint:
    """A 3D intersection point with its parameter pairs on both surfaces."""

    position: np.ndarray
    params_a: np.ndarray
    params_b: np.ndarray
    residual_a: float
    residual_b: float

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.params_a = np.asarray(self.params_a, dtype=float)
        self.params_b = np.asarray(self.params_b, dtype=float)


@dataclass(eq=False)
class IntersectionData:
    """Intersection points plus the interpolated space and domain curves.

    ``lifted_a``/``lifted_b`` are dense polylines of the domain curves mapped
    through their surfaces; they lie exactly on the surfaces by construction.
    """

    points: list
    curve_c: PiecewiseBezierCurve
    domain_curve_a: PiecewiseBezierCurve
    domain_curve_b: PiecewiseBezierCurve
    lifted_a: np.ndarray
    lifted_b: np.ndarray
    closed: bool = False


@dataclass(eq=False)
class GapReport:
    """Distance statistics between a curve and a surface."""

    max_gap: float
    rms_gap: float
    sample_count: int
    worst_point: np.ndarray = field(default_factory=lambda: np.zeros(3))
    flagged: int = 0

    def __post_init__(self):
        self.worst_point = np.asarray(self.worst_point, dtype=float)
        if self.rms_gap > self.max_gap + 1e-15:
            raise ValueError("rms gap cannot exceed max gap")


# ---------------------------------------------------------------------------
# Point inversion
# ---------------------------------------------------------------------------

def invert_point(surface: BezierSurface, point: np.ndarray, seed) -> np.ndarray:
    """Parameters (u, v) minimizing |S(u, v) - point|, by damped Gauss-Newton.

    Parameters are clamped into [0,1]^2; converged when the (clamped) update
    drops below 1e-12.  Raises InversionError after 50 iterations.
    """
    point = np.asarray(point, dtype=float)
    params = np.clip(np.asarray(seed, dtype=float), 0.0, 1.0)
    su = surface.partial_u()
    sv = surface.partial_v()
    for _ in range(_NEWTON_MAX_ITER):
        r = surface.evaluate(*params) - point
        jac = np.column_stack([su.evaluate(*params), sv.evaluate(*params)])
        jtj = jac.T @ jac
        jtr = jac.T @ r
        try:
            step = np.linalg.solve(jtj, -jtr)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jtj, -jtr, rcond=None)[0]
        new_params = np.clip(params + step, 0.0, 1.0)
        update = np.linalg.norm(new_params - params)
        params = new_params
        if update < _PARAM_TOL:
            return params
    residual = float(np.linalg.norm(surface.evaluate(*params) - point))
    raise InversionError("point inversion did not converge", params, residual)


def _grid_argmin(surface: BezierSurface, point: np.ndarray, grid: int) -> np.ndarray:
    ts = np.linspace(0.0, 1.0, grid)
    pts = surface.evaluate_grid(ts, ts)
    d2 = np.sum((pts - point) ** 2, axis=2)
    i, j = np.unravel_index(np.argmin(d2), d2.shape)
    return np.array([ts[i], ts[j]])


# ---------------------------------------------------------------------------
# Marching
# ---------------------------------------------------------------------------

def _refine_match(s1, s2, q, tol, su1, sv1, su2, sv2):
    """Gauss-Newton on S1(u,v) = S2(s,t) from a 4-parameter seed."""
    q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
    for _ in range(_NEWTON_MAX_ITER):
        r = s1.evaluate(q[0], q[1]) - s2.evaluate(q[2], q[3])
        jac = np.column_stack([
            su1.evaluate(q[0], q[1]),
            sv1.evaluate(q[0], q[1]),
            -su2.evaluate(q[2], q[3]),
            -sv2.evaluate(q[2], q[3]),
        ])
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        new_q = np.clip(q + step, 0.0, 1.0)
        update = np.linalg.norm(new_q - q)
        q = new_q
        if update < _PARAM_TOL:
            break
    r = s1.evaluate(q[0], q[1]) - s2.evaluate(q[2], q[3])
    return q, float(np.linalg.norm(r))


def _corrector(s1, s2, q, plane_normal, plane_point, tol, partials):
    """Newton on [S1 - S2; n.(S1 - plane_point)] = 0; returns (q, residual) or None."""
    su1, sv1, su2, sv2 = partials
    q = np.asarray(q, dtype=float).copy()
    for _ in range(_NEWTON_MAX_ITER):
        if np.any(q < -0.2) or np.any(q > 1.2):
            return None
        qc = np.clip(q, 0.0, 1.0)
        p1 = s1.evaluate(qc[0], qc[1])
        p2 = s2.evaluate(qc[2], qc[3])
        f = np.empty(4)
        f[:3] = p1 - p2
        f[3] = plane_normal @ (p1 - plane_point)
        j1u = su1.evaluate(qc[0], qc[1])
        j1v = sv1.evaluate(qc[0], qc[1])
        jac = np.zeros((4, 4))
        jac[:3, 0] = j1u
        jac[:3, 1] = j1v
        jac[:3, 2] = -su2.evaluate(qc[2], qc[3])
        jac[:3, 3] = -sv2.evaluate(qc[2], qc[3])
        jac[3, 0] = plane_normal @ j1u
        jac[3, 1] = plane_normal @ j1v
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return None
        q = q + step
        if np.linalg.norm(step) < _PARAM_TOL:
            break
    qc = np.clip(q, 0.0, 1.0)
    residual = float(np.linalg.norm(s1.evaluate(qc[0], qc[1]) - s2.evaluate(qc[2], qc[3])))
    if residual > tol or np.any(q < -1e-9) or np.any(q > 1.0 + 1e-9):
        return None
    return np.clip(q, 0.0, 1.0), residual


def _boundary_finish(s1, s2, q, tol, partials):
    """Clamp exited parameters and re-solve the remaining ones."""
    su1, sv1, su2, sv2 = partials
    q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
    fixed = np.zeros(4, dtype=bool)
    for k in range(4):
        if q[k] in (0.0, 1.0):
            fixed[k] = True
    if fixed.all():
        return None
    for _ in range(_NEWTON_MAX_ITER):
        r = s1.evaluate(q[0], q[1]) - s2.evaluate(q[2], q[3])
        jac = np.column_stack([
            su1.evaluate(q[0], q[1]),
            sv1.evaluate(q[0], q[1]),
            -su2.evaluate(q[2], q[3]),
            -sv2.evaluate(q[2], q[3]),
        ])
        jac[:, fixed] = 0.0
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        new_q = np.clip(q + step, 0.0, 1.0)
        update = np.linalg.norm(new_q - q)
        q = new_q
        if update < _PARAM_TOL:
            break
    r = s1.evaluate(q[0], q[1]) - s2.evaluate(q[2], q[3])
    residual = float(np.linalg.norm(r))
    if residual > tol:
        return None
    return q, residual


def _make_point(s1, s2, q) -> IntersectionPoint:
    p1 = s1.evaluate(q[0], q[1])
    p2 = s2.evaluate(q[2], q[3])
    position = 0.5 * (p1 + p2)
    return IntersectionPoint(
        position=position,
        params_a=q[:2].copy(),
        params_b=q[2:].copy(),
        residual_a=float(np.linalg.norm(p1 - position)),
        residual_b=float(np.linalg.norm(p2 - position)),
    )


def _march_direction(s1, s2, q0, direction, step, tol, partials, start_pos, max_points):
    """March from q0 along +-direction; returns (points, closed)."""
    points = []
    q = q0.copy()
    prev_pos = s1.evaluate(q[0], q[1])
    prev_dir = None
    for _ in range(max_points):
        n1 = s1.normal(q[0], q[1])
        n2 = s2.normal(q[2], q[3])
        d = np.cross(n1, n2)
        norm = np.linalg.norm(d)
        if norm < 1e-10:
            log.warning("tangential contact; truncating intersection branch")
            break
        d = direction * d / norm
        if prev_dir is not None and d @ prev_dir < 0:
            d = -d
        target = prev_pos + step * d
        result = _corrector(s1, s2, q, d, target, tol, partials)
        if result is None:
            boundary = _boundary_finish(s1, s2, _predict(s1, s2, q, d, step, partials), tol, partials)
            if boundary is not None:
                bq, _ = boundary
                bpos = 0.5 * (s1.evaluate(bq[0], bq[1]) + s2.evaluate(bq[2], bq[3]))
                if points and np.linalg.norm(bpos - prev_pos) < 0.5 * step:
                    points[-1] = _make_point(s1, s2, bq)
                elif np.linalg.norm(bpos - prev_pos) > 1e-9:
                    points.append(_make_point(s1, s2, bq))
            break
        q, _ = result
        pt = _make_point(s1, s2, q)
        new_pos = pt.position
        if len(points) >= 4 and np.linalg.norm(new_pos - start_pos) < 0.6 * step:
            return points, True
        points.append(pt)
        prev_dir = d
        prev_pos = new_pos
    return points, False


def _predict(s1, s2, q, d, step, partials):
    su1, sv1, su2, sv2 = partials
    j1 = np.column_stack([su1.evaluate(q[0], q[1]), sv1.evaluate(q[0], q[1])])
    j2 = np.column_stack([su2.evaluate(q[2], q[3]), sv2.evaluate(q[2], q[3])])
    duv = np.linalg.lstsq(j1, step * d, rcond=None)[0]
    dst = np.linalg.lstsq(j2, step * d, rcond=None)[0]
    return np.concatenate([q[:2] + duv, q[2:] + dst])


def march_intersection(s1: BezierSurface, s2: BezierSurface, step: float,
                       tol: float, max_points: int = 4000) -> list:
    """Ordered intersection points along one branch.

    Seeds from a coarse-grid proximity search, refines with Gauss-Newton,
    then steps along the cross product of the surface normals with a
    step-plane Newton corrector.  Closed loops return with the first point
    repeated at the end.  Returns [] when no seed converges.
    """
    if step <= 0 or tol <= 0:
        raise ValueError("step and tol must be positive")
    partials = (s1.partial_u(), s1.partial_v(), s2.partial_u(), s2.partial_v())

    grid = min(max(int(np.ceil(2.0 / step)), 8), 32)
    ts = np.linspace(0.0, 1.0, grid)
    pts1 = s1.evaluate_grid(ts, ts).reshape(-1, 3)
    pts2 = s2.evaluate_grid(ts, ts).reshape(-1, 3)
    tree = cKDTree(pts2)
    dist, nearest = tree.query(pts1)
    order = np.argsort(dist)

    seed = None
    for idx in order[:8]:
        i1, j1 = divmod(int(idx), grid)
        i2, j2 = divmod(int(nearest[idx]), grid)
        q0 = np.array([ts[i1], ts[j1], ts[i2], ts[j2]])
        q, residual = _refine_match(s1, s2, q0, tol, *partials)
        if residual <= tol:
            seed = q
            break
    if seed is None:
        return []

    start = _make_point(s1, s2, seed)
    forward, closed = _march_direction(
        s1, s2, seed, +1.0, step, tol, partials, start.position, max_points
    )
    if closed:
        chain = [start] + forward
        closing = IntersectionPoint(
            position=start.position.copy(),
            params_a=start.params_a.copy(),
            params_b=start.params_b.copy(),
            residual_a=start.residual_a,
            residual_b=start.residual_b,
        )
        chain.append(closing)
        return chain
    backward, _ = _march_direction(
        s1, s2, seed, -1.0, step, tol, partials, start.position, max_points
    )
    return list(reversed(backward)) + [start] + forward


# ---------------------------------------------------------------------------
# Interpolation
# ---------------------------------------------------------------------------

def _chord_parameters(points: np.ndarray) -> np.ndarray:
    chords = np.linalg.norm(np.diff(points, axis=0), axis=1)
    if np.any(chords <= 0.0):
        raise ValueError("coincident consecutive interpolation points")
    w = np.concatenate([[0.0], np.cumsum(chords)])
    w = w / w[-1]
    w[0], w[-1] = 0.0, 1.0
    return w


def _turn_correction(d0: np.ndarray, d1: np.ndarray) -> float:
    """Chord-to-arc tangent magnitude factor from the turn between chords.

    The three-point rule underestimates |T| by sin(theta)/theta on an arc
    turning by theta per chord; this factor cancels that exactly and tends
    to 1 for collinear data.
    """
    n0 = np.linalg.norm(d0)
    n1 = np.linalg.norm(d1)
    if n0 == 0.0 or n1 == 0.0:
        return 1.0
    cosang = float(np.clip(d0 @ d1 / (n0 * n1), -1.0, 1.0))
    theta = float(np.arccos(cosang))
    if theta < 1e-8:
        return 1.0
    return theta / np.sin(theta)


def _three_point_tangents(points: np.ndarray, w: np.ndarray, closed: bool) -> np.ndarray:
    """Tangents w.r.t. the global parameter: parabola rule through each point
    triple with arc-corrected magnitude; parabolic one-sided rule at open ends."""
    n = points.shape[0]
    tangents = np.zeros_like(points)
    delta = np.diff(points, axis=0) / np.diff(w)[:, None]
    for i in range(1, n - 1):
        h0 = w[i] - w[i - 1]
        h1 = w[i + 1] - w[i]
        bessel = (h1 * delta[i - 1] + h0 * delta[i]) / (h0 + h1)
        tangents[i] = bessel * _turn_correction(delta[i - 1], delta[i])
    if closed:
        h0 = w[-1] - w[-2]
        h1 = w[1] - w[0]
        wrap = (h1 * delta[-1] + h0 * delta[0]) / (h0 + h1)
        wrap = wrap * _turn_correction(delta[-1], delta[0])
        tangents[0] = wrap
        tangents[-1] = wrap
    else:
        tangents[0] = 2.0 * delta[0] - tangents[1]
        tangents[-1] = 2.0 * delta[-1] - tangents[-2]
    return tangents


def _hermite_to_bezier(points, tangents, w) -> PiecewiseBezierCurve:
    segments = []
    for i in range(points.shape[0] - 1):
        h = w[i + 1] - w[i]
        cps = np.array([
            points[i],
            points[i] + tangents[i] * (h / 3.0),
            points[i + 1] - tangents[i + 1] * (h / 3.0),
            points[i + 1],
        ])
        cps[0] = points[i]
        cps[-1] = points[i + 1]
        segments.append(BezierCurve(cps))
    return PiecewiseBezierCurve(segments, w.copy())


def interpolate_space_curve(points) -> PiecewiseBezierCurve:
    """C1 piecewise-cubic interpolant through the points (chord-length params).

    Two points yield a single linear segment.  A closed chain (first point
    repeated at the end) gets a periodic tangent at the seam.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two interpolation points")
    if pts.shape[0] == 2:
        return PiecewiseBezierCurve([BezierCurve(pts.copy())], np.array([0.0, 1.0]))
    w = _chord_parameters(pts)
    closed = bool(np.linalg.norm(pts[0] - pts[-1]) <= 1e-12)
    tangents = _three_point_tangents(pts, w, closed)
    return _hermite_to_bezier(pts, tangents, w)


def interpolate_domain_curve(params, breakpoints=None) -> PiecewiseBezierCurve:
    """2D interpolant through parameter pairs, clamped into [0,1]^2.

    When ``breakpoints`` is given (the space curve's parameterization) it is
    used instead of the 2D chord lengths, keeping breakpoints aligned across
    the space and domain curves.
    """
    pts = np.asarray(params, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise ValueError("need at least two 2D parameter pairs")
    if pts.shape[0] == 2:
        return PiecewiseBezierCurve([BezierCurve(pts.copy())], np.array([0.0, 1.0]))
    w = np.asarray(breakpoints, dtype=float) if breakpoints is not None else _chord_parameters(pts)
    closed = bool(np.linalg.norm(pts[0] - pts[-1]) <= 1e-12)
    tangents = _three_point_tangents(pts, w, closed)
    curve = _hermite_to_bezier(pts, tangents, w)
    clamped = [BezierCurve(np.clip(s.control_points, 0.0, 1.0)) for s in curve.segments]
    return PiecewiseBezierCurve(clamped, curve.breakpoints)


def lift_domain_curve(surface: BezierSurface, curve: PiecewiseBezierCurve,
                      samples: int) -> np.ndarray:
    """Sample the domain curve and map each point through the surface."""
    if samples < 2:
        raise ValueError("need at least two samples")
    out = np.empty((samples, 3))
    for k, t in enumerate(np.linspace(0.0, 1.0, samples)):
        uv = np.clip(curve.evaluate(t), 0.0, 1.0)
        out[k] = surface.evaluate(uv[0], uv[1])
    return out


# ---------------------------------------------------------------------------
# Gap measurement
# ---------------------------------------------------------------------------

def measure_gap(curve: PiecewiseBezierCurve, surface: BezierSurface,
                samples: int, seed_curve: PiecewiseBezierCurve | None = None) -> GapReport:
    """Max/rms distance from uniform curve samples to the surface.

    Inversion is seeded from the matching domain-curve parameter when given
    (the curves share their parameterization), else from a coarse grid; a
    failed inversion falls back to a dense grid search and flags the sample.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    distances = np.empty(samples)
    flagged = 0
    worst = np.zeros(3)
    ts = np.linspace(0.0, 1.0, samples)
    for k, t in enumerate(ts):
        point = curve.evaluate(t)
        if seed_curve is not None:
            seed = np.clip(seed_curve.evaluate(t), 0.0, 1.0)
        else:
            seed = _grid_argmin(surface, point, 33)
        try:
            uv = invert_point(surface, point, seed)
            dist = float(np.linalg.norm(surface.evaluate(uv[0], uv[1]) - point))
        except InversionError:
            uv = _grid_argmin(surface, point, 129)
            dist = float(np.linalg.norm(surface.evaluate(uv[0], uv[1]) - point))
            flagged += 1
        distances[k] = dist
    idx = int(np.argmax(distances))
    worst = curve.evaluate(ts[idx])
    return GapReport(
        max_gap=float(distances.max()),
        rms_gap=float(np.sqrt(np.mean(distances**2))),
        sample_count=samples,
        worst_point=worst,
        flagged=flagged,
    )


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def build_intersection_data(s1: BezierSurface, s2: BezierSurface, step: float,
                            tol: float, lift_samples_per_segment: int = 40) -> IntersectionData:
    """March, interpolate, and lift: the full intersection record."""
    points = march_intersection(s1, s2, step, tol)
    if len(points) < 2:
        raise NoIntersectionError("no intersection branch found")
    positions = np.array([p.position for p in points])
    params_a = np.array([p.params_a for p in points])
    params_b = np.array([p.params_b for p in points])
    curve_c = interpolate_space_curve(positions)
    domain_a = interpolate_domain_curve(params_a, breakpoints=curve_c.breakpoints)
    domain_b = interpolate_domain_curve(params_b, breakpoints=curve_c.breakpoints)
    n_lift = lift_samples_per_segment * len(curve_c.segments) + 1
    closed = bool(np.linalg.norm(positions[0] - positions[-1]) <= 1e-12)
    return IntersectionData(
        points=points,
        curve_c=curve_c,
        domain_curve_a=domain_a,
        domain_curve_b=domain_b,
        lifted_a=lift_domain_curve(s1, domain_a, n_lift),
        lifted_b=lift_domain_curve(s2, domain_b, n_lift),
        closed=closed,
    )
