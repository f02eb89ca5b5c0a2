"""Bernstein/Bezier algebra tests.

Derived expectations are checked against independent oracles computed here:
direct basis summation for evaluation, pointwise sampling for subdivision,
elevation and composition, and hand-evaluated polynomials for basis changes.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from watertight import (
    BezierCurve,
    BezierSurface,
    BoundaryPolynomial,
    DomainError,
    PiecewiseBezierCurve,
    ReductionError,
    UnsupportedDegreeError,
    bernstein_basis,
    bernstein_from_monomial,
    compose_reparameterize,
    degree_elevate_curve,
    degree_reduce_curve,
    extract_subpatch,
    monomial_from_bernstein,
)
from watertight.bezier import Edge, all_bernstein, rotate_edge, rotate_net


def direct_bernstein(k, l, x):
    """Naive closed form, the oracle for the recurrence."""
    return math.comb(l, k) * x**k * (1.0 - x) ** (l - k)


def direct_surface_eval(net, u, v):
    """Direct double Bernstein sum with compensated accumulation."""
    m = net.shape[0] - 1
    n = net.shape[1] - 1
    out = np.zeros(3)
    for c in range(3):
        out[c] = math.fsum(
            direct_bernstein(i, m, u) * direct_bernstein(j, n, v) * net[i, j, c]
            for i in range(m + 1)
            for j in range(n + 1)
        )
    return out


def random_surface(rng, m, n, scale=10.0):
    return BezierSurface(rng.uniform(-scale, scale, size=(m + 1, n + 1, 3)))


def random_unit_polynomial(rng, p):
    """Valid boundary polynomial: Bernstein coefficients in [0,1] guarantee range."""
    bern = rng.uniform(0.0, 1.0, size=p + 1)
    return BoundaryPolynomial(monomial_from_bernstein(bern))


def bilinear_flat():
    net = np.array([
        [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]],
    ])
    return BezierSurface(net)


class TestBernsteinBasis:
    def test_known_value(self):
        assert bernstein_basis(1, 3, 0.5) == pytest.approx(0.375, abs=1e-15)

    def test_endpoint(self):
        assert bernstein_basis(0, 4, 0.0) == 1.0

    def test_partition_of_unity_degree7(self):
        total = math.fsum(bernstein_basis(k, 7, 0.3) for k in range(8))
        assert abs(total - 1.0) <= 1e-14

    def test_out_of_range_index(self):
        with pytest.raises(IndexError):
            bernstein_basis(4, 3, 0.5)
        with pytest.raises(IndexError):
            bernstein_basis(-1, 3, 0.5)

    @given(
        l=st.integers(min_value=0, max_value=12),
        x=st.floats(min_value=0.0, max_value=1.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_partition_of_unity_property(self, l, x):
        assert abs(math.fsum(all_bernstein(l, x)) - 1.0) <= 1e-13

    def test_matches_direct_form(self):
        for l in range(9):
            for x in np.linspace(0.0, 1.0, 11):
                for k in range(l + 1):
                    assert bernstein_basis(k, l, x) == pytest.approx(
                        direct_bernstein(k, l, x), abs=1e-14
                    )


class TestSurfaceEvaluation:
    def test_bilinear_center(self):
        s = bilinear_flat()
        assert np.allclose(s.evaluate(0.5, 0.5), [0.5, 0.5, 0.0], atol=1e-15)

    def test_corner_interpolation(self):
        rng = np.random.default_rng(7)
        s = random_surface(rng, 3, 2)
        assert np.array_equal(s.evaluate(0.0, 0.0), s.control_net[0, 0])
        assert np.array_equal(s.evaluate(1.0, 0.0), s.control_net[-1, 0])
        assert np.array_equal(s.evaluate(0.0, 1.0), s.control_net[0, -1])
        assert np.array_equal(s.evaluate(1.0, 1.0), s.control_net[-1, -1])

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(11)
        s = random_surface(rng, 3, 3)
        got = s.evaluate(0.3, 0.7)
        want = direct_surface_eval(s.control_net, 0.3, 0.7)
        assert np.linalg.norm(got - want) <= 1e-13

    def test_domain_check(self):
        s = bilinear_flat()
        with pytest.raises(DomainError):
            s.evaluate(-0.1, 0.5)
        with pytest.raises(DomainError):
            s.evaluate(0.5, 1.1)

    def test_convex_hull_box(self):
        rng = np.random.default_rng(13)
        s = random_surface(rng, 4, 3)
        lo = s.control_net.reshape(-1, 3).min(axis=0) - 1e-12
        hi = s.control_net.reshape(-1, 3).max(axis=0) + 1e-12
        for u in np.linspace(0, 1, 9):
            for v in np.linspace(0, 1, 9):
                p = s.evaluate(u, v)
                assert np.all(p >= lo) and np.all(p <= hi)

    def test_grid_matches_scalar(self):
        rng = np.random.default_rng(17)
        s = random_surface(rng, 3, 2)
        us = np.linspace(0, 1, 7)
        vs = np.linspace(0, 1, 5)
        grid = s.evaluate_grid(us, vs)
        for i, u in enumerate(us):
            for j, v in enumerate(vs):
                assert np.array_equal(grid[i, j], s.evaluate(u, v))


class TestPiecewiseCurve:
    def test_linear_midpoint(self):
        seg = BezierCurve(np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]))
        c = PiecewiseBezierCurve([seg], np.array([0.0, 1.0]))
        assert np.allclose(c.evaluate(0.5), [0.5, 0.5, 0.5], atol=1e-15)

    def test_breakpoint_returns_shared_junction(self):
        j = np.array([1.0, 2.0, 3.0])
        a = BezierCurve(np.array([[0.0, 0.0, 0.0], j]))
        b = BezierCurve(np.array([j, [2.0, 0.0, 1.0]]))
        c = PiecewiseBezierCurve([a, b], np.array([0.0, 0.4, 1.0]))
        assert np.array_equal(c.evaluate(0.4), j)

    def test_two_segment_local_parameter(self):
        rng = np.random.default_rng(3)
        cps1 = rng.standard_normal((4, 3))
        cps2 = rng.standard_normal((4, 3))
        cps2[0] = cps1[-1]
        a, b = BezierCurve(cps1), BezierCurve(cps2)
        c = PiecewiseBezierCurve([a, b], np.array([0.0, 0.5, 1.0]))
        # Manual segment-local evaluation as the oracle.
        want = b.evaluate((0.75 - 0.5) / 0.5)
        assert np.allclose(c.evaluate(0.75), want, atol=1e-15)

    def test_junction_mismatch_rejected(self):
        a = BezierCurve(np.array([[0.0, 0.0], [1.0, 1.0]]))
        b = BezierCurve(np.array([[1.0, 1.0 + 1e-9], [2.0, 0.0]]))
        with pytest.raises(ValueError):
            PiecewiseBezierCurve([a, b], np.array([0.0, 0.5, 1.0]))

    def test_subdivide_preserves_values(self):
        rng = np.random.default_rng(5)
        cps = rng.standard_normal((4, 2))
        c = PiecewiseBezierCurve([BezierCurve(cps)], np.array([0.0, 1.0]))
        c2 = c.subdivide_at([0.25, 0.7])
        assert len(c2.segments) == 3
        for t in np.linspace(0, 1, 23):
            assert np.allclose(c.evaluate(t), c2.evaluate(t), atol=1e-13)

    def test_out_of_range(self):
        seg = BezierCurve(np.array([[0.0, 0.0], [1.0, 1.0]]))
        c = PiecewiseBezierCurve([seg], np.array([0.0, 1.0]))
        with pytest.raises(DomainError):
            c.evaluate(1.5)


class TestSubpatchExtraction:
    def test_full_domain_identity(self):
        rng = np.random.default_rng(19)
        s = random_surface(rng, 3, 3)
        sub = extract_subpatch(s, 0.0, 1.0, 0.0, 1.0)
        assert np.array_equal(sub.control_net, s.control_net)

    def test_bilinear_half(self):
        sub = extract_subpatch(bilinear_flat(), 0.0, 0.5, 0.0, 1.0)
        corners = sub.control_net
        assert np.allclose(corners[0, 0], [0.0, 0.0, 0.0], atol=1e-15)
        assert np.allclose(corners[1, 0], [0.5, 0.0, 0.0], atol=1e-15)
        assert np.allclose(corners[0, 1], [0.0, 1.0, 0.0], atol=1e-15)
        assert np.allclose(corners[1, 1], [0.5, 1.0, 0.0], atol=1e-15)

    def test_sampled_equality_oracle(self):
        rng = np.random.default_rng(23)
        s = random_surface(rng, 3, 3)
        sub = extract_subpatch(s, 0.25, 0.75, 0.25, 0.75)
        assert sub.degree_u == 3 and sub.degree_v == 3
        for a in np.linspace(0, 1, 11):
            for b in np.linspace(0, 1, 11):
                want = s.evaluate(0.25 + a * 0.5, 0.25 + b * 0.5)
                assert np.linalg.norm(sub.evaluate(a, b) - want) <= 1e-12

    def test_invalid_interval(self):
        s = bilinear_flat()
        with pytest.raises(DomainError):
            extract_subpatch(s, 0.5, 0.5, 0.0, 1.0)
        with pytest.raises(DomainError):
            extract_subpatch(s, 0.0, 1.2, 0.0, 1.0)

    @given(data=st.data())
    @settings(max_examples=30, deadline=None)
    def test_subdivision_exactness_property(self, data):
        seed = data.draw(st.integers(min_value=0, max_value=2**31 - 1))
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 5))
        n = int(rng.integers(1, 5))
        s = random_surface(rng, m, n)
        u0, u1 = sorted(rng.uniform(0.0, 1.0, 2))
        v0, v1 = sorted(rng.uniform(0.0, 1.0, 2))
        if u1 - u0 < 1e-3 or v1 - v0 < 1e-3:
            return
        sub = extract_subpatch(s, u0, u1, v0, v1)
        for a in np.linspace(0, 1, 5):
            for b in np.linspace(0, 1, 5):
                want = s.evaluate(u0 + a * (u1 - u0), v0 + b * (v1 - v0))
                assert np.linalg.norm(sub.evaluate(a, b) - want) <= 1e-12


class TestDegreeElevation:
    def test_linear_to_quadratic_midpoint(self):
        c = BezierCurve(np.array([[0.0, 0.0, 0.0], [2.0, 2.0, 0.0]]))
        e = degree_elevate_curve(c, 2)
        assert np.allclose(
            e.control_points,
            [[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [2.0, 2.0, 0.0]],
            atol=1e-15,
        )

    def test_identity_at_same_degree(self):
        rng = np.random.default_rng(29)
        c = BezierCurve(rng.standard_normal((4, 3)))
        e = degree_elevate_curve(c, 3)
        assert np.array_equal(e.control_points, c.control_points)

    def test_cubic_to_degree9_pointwise(self):
        rng = np.random.default_rng(31)
        c = BezierCurve(rng.standard_normal((4, 3)))
        e = degree_elevate_curve(c, 9)
        assert e.degree == 9
        for t in np.linspace(0, 1, 21):
            assert np.linalg.norm(c.evaluate(t) - e.evaluate(t)) <= 1e-12

    def test_target_below_degree_rejected(self):
        c = BezierCurve(np.zeros((4, 3)))
        with pytest.raises(ValueError):
            degree_elevate_curve(c, 2)

    @given(
        seed=st.integers(min_value=0, max_value=2**31 - 1),
        target=st.integers(min_value=3, max_value=12),
    )
    @settings(max_examples=40, deadline=None)
    def test_elevation_exactness_property(self, seed, target):
        rng = np.random.default_rng(seed)
        c = BezierCurve(rng.uniform(-10, 10, size=(4, 3)))
        e = degree_elevate_curve(c, target)
        for t in np.linspace(0, 1, 9):
            assert np.linalg.norm(c.evaluate(t) - e.evaluate(t)) <= 1e-12


class TestDegreeReduction:
    def test_recovers_elevated_cubic(self):
        rng = np.random.default_rng(37)
        cubic = BezierCurve(rng.standard_normal((4, 3)))
        elevated = degree_elevate_curve(cubic, 5)
        reduced = degree_reduce_curve(elevated, 3, tol=1e-8)
        assert np.allclose(reduced.control_points, cubic.control_points, atol=1e-10)

    def test_line_stored_as_cubic(self):
        p0 = np.array([0.0, 0.0, 0.0])
        p1 = np.array([3.0, 3.0, 3.0])
        cps = np.array([p0, p0 + (p1 - p0) / 3, p0 + 2 * (p1 - p0) / 3, p1])
        reduced = degree_reduce_curve(BezierCurve(cps), 1, tol=1e-9)
        assert np.allclose(reduced.control_points, [p0, p1], atol=1e-12)

    def test_infeasible_reduction_reports_deviation(self):
        cps = np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, -1.0, 0.0], [1.0, 0.0, 0.0]])
        curve = BezierCurve(cps)
        line = BezierCurve(cps[[0, -1]])
        actual = max(
            np.linalg.norm(curve.evaluate(t) - line.evaluate(t))
            for t in np.linspace(0, 1, 257)
        )
        with pytest.raises(ReductionError) as err:
            degree_reduce_curve(curve, 1, tol=1e-9)
        assert err.value.deviation == pytest.approx(actual, rel=1e-9)


class TestBasisConversion:
    def test_degree_one(self):
        assert np.allclose(monomial_from_bernstein(np.array([0.0, 1.0])), [0.0, 1.0])

    def test_round_trip_degree6(self):
        rng = np.random.default_rng(41)
        b = rng.uniform(-5, 5, size=7)
        back = bernstein_from_monomial(monomial_from_bernstein(b))
        assert np.allclose(back, b, atol=1e-11)

    def test_shifted_square(self):
        # (t - 0.5)^2 has monomial coefficients (0.25, -1, 1); verify the
        # Bernstein form by evaluating both at t in {0, 0.5, 1}.
        bern = bernstein_from_monomial(np.array([0.25, -1.0, 1.0]))
        assert np.allclose(bern, [0.25, -0.25, 0.25], atol=1e-14)
        for t in (0.0, 0.5, 1.0):
            direct = (t - 0.5) ** 2
            via_basis = math.fsum(bern[k] * direct_bernstein(k, 2, t) for k in range(3))
            assert via_basis == pytest.approx(direct, abs=1e-14)

    def test_point_valued_round_trip(self):
        rng = np.random.default_rng(43)
        b = rng.uniform(-5, 5, size=(5, 3))
        back = bernstein_from_monomial(monomial_from_bernstein(b))
        assert np.allclose(back, b, atol=1e-11)


class TestBoundaryPolynomial:
    def test_trailing_zeros_trimmed(self):
        f = BoundaryPolynomial(np.array([0.5, 0.25, 0.0]))
        assert f.degree == 1

    def test_range_with_interior_extremum(self):
        # 4t(1-t) peaks at exactly 1.0 at t=0.5, found via the derivative root.
        f = BoundaryPolynomial(np.array([0.0, 4.0, -4.0]))
        lo, hi = f.unit_range()
        assert lo == pytest.approx(0.0, abs=1e-12)
        assert hi == pytest.approx(1.0, abs=1e-12)
        f.validate_unit_range()

    def test_out_of_range_rejected(self):
        f = BoundaryPolynomial(np.array([0.0, 4.4, -4.0]))
        with pytest.raises(DomainError):
            f.validate_unit_range()


class TestComposition:
    def test_constant_one_is_identity(self):
        rng = np.random.default_rng(47)
        s = random_surface(rng, 2, 3)
        out = compose_reparameterize(s, BoundaryPolynomial(np.array([1.0])))
        assert out.degree_u == 2 and out.degree_v == 3
        assert np.allclose(out.control_net, s.control_net, atol=1e-12)

    def test_bilinear_with_linear_f(self):
        s = bilinear_flat()
        out = compose_reparameterize(s, BoundaryPolynomial(np.array([0.0, 1.0])))
        assert (out.degree_u, out.degree_v) == (1, 2)
        want = np.array([
            [[0.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 1.0, 0.0]],
            [[0.0, 0.0, 0.0], [0.5, 0.5, 0.0], [1.0, 1.0, 0.0]],
        ])
        assert np.allclose(out.control_net, want, atol=1e-13)
        # Pointwise oracle: the composed map is (s*t, t, 0).
        for a in np.linspace(0, 1, 5):
            for b in np.linspace(0, 1, 5):
                assert np.allclose(out.evaluate(a, b), [a * b, b, 0.0], atol=1e-13)

    def test_degree_law_bicubic_quadratic(self):
        rng = np.random.default_rng(53)
        s = random_surface(rng, 3, 3)
        f = random_unit_polynomial(rng, 2)
        assert f.degree == 2
        out = compose_reparameterize(s, f)
        assert (out.degree_u, out.degree_v) == (3, 9)

    def test_composition_exactness(self):
        rng = np.random.default_rng(59)
        for _ in range(10):
            m = int(rng.integers(1, 5))
            n = int(rng.integers(1, 5))
            p = int(rng.integers(1, 4))
            s = random_surface(rng, m, n)
            f = random_unit_polynomial(rng, p)
            out = compose_reparameterize(s, f)
            assert out.degree_v == m * f.degree + n
            worst = 0.0
            for a in np.linspace(0, 1, 21):
                for b in np.linspace(0, 1, 21):
                    want = s.evaluate(min(max(a * float(f(b)), 0.0), 1.0), b)
                    worst = max(worst, float(np.linalg.norm(out.evaluate(a, b) - want)))
            assert worst <= 1e-9

    def test_degree_caps(self):
        rng = np.random.default_rng(61)
        big = random_surface(rng, 11, 2)
        with pytest.raises(UnsupportedDegreeError):
            compose_reparameterize(big, BoundaryPolynomial(np.array([1.0])))
        s = random_surface(rng, 2, 2)
        quartic = BoundaryPolynomial(np.array([0.1, 0.1, 0.1, 0.1, 0.1]))
        with pytest.raises(UnsupportedDegreeError):
            compose_reparameterize(s, quartic)

    def test_range_violation_rejected(self):
        s = bilinear_flat()
        with pytest.raises(DomainError):
            compose_reparameterize(s, BoundaryPolynomial(np.array([0.0, 2.0])))


class TestAffineEquivariance:
    @staticmethod
    def _random_affine(rng):
        a = rng.uniform(-2, 2, size=(3, 3))
        b = rng.uniform(-5, 5, size=3)
        return lambda pts: pts @ a.T + b

    def test_ops_commute_with_affine(self):
        rng = np.random.default_rng(67)
        apply = self._random_affine(rng)
        s = random_surface(rng, 3, 2, scale=3.0)
        s_t = BezierSurface(apply(s.control_net.reshape(-1, 3)).reshape(s.control_net.shape))

        for u, v in [(0.3, 0.8), (0.0, 1.0), (0.6, 0.2)]:
            assert np.allclose(apply(s.evaluate(u, v)[None])[0], s_t.evaluate(u, v), atol=1e-11)

        sub = extract_subpatch(s, 0.2, 0.9, 0.1, 0.7)
        sub_t = extract_subpatch(s_t, 0.2, 0.9, 0.1, 0.7)
        assert np.allclose(
            apply(sub.control_net.reshape(-1, 3)).reshape(sub.control_net.shape),
            sub_t.control_net,
            atol=1e-11,
        )

        c = BezierCurve(rng.uniform(-3, 3, size=(4, 3)))
        c_t = BezierCurve(apply(c.control_points))
        e = degree_elevate_curve(c, 7)
        e_t = degree_elevate_curve(c_t, 7)
        assert np.allclose(apply(e.control_points), e_t.control_points, atol=1e-11)

        f = random_unit_polynomial(rng, 2)
        comp = compose_reparameterize(s, f)
        comp_t = compose_reparameterize(s_t, f)
        assert np.allclose(
            apply(comp.control_net.reshape(-1, 3)).reshape(comp.control_net.shape),
            comp_t.control_net,
            atol=1e-11,
        )


class TestNetRelabelings:
    def test_rotation_is_evaluation_rotation(self):
        rng = np.random.default_rng(71)
        s = random_surface(rng, 3, 2)
        rot = BezierSurface(rotate_net(s.control_net, 1))
        # One turn: rotated(x, y) == original(y, 1 - x).
        for x in np.linspace(0, 1, 6):
            for y in np.linspace(0, 1, 6):
                assert np.allclose(rot.evaluate(x, y), s.evaluate(y, 1.0 - x), atol=1e-13)

    def test_four_turns_identity(self):
        rng = np.random.default_rng(73)
        s = random_surface(rng, 2, 4)
        assert np.array_equal(rotate_net(s.control_net, 4), s.control_net)

    def test_edge_tracking_matches_geometry(self):
        rng = np.random.default_rng(79)
        s = random_surface(rng, 3, 3)
        for r in range(4):
            rot = BezierSurface(rotate_net(s.control_net, r))
            for edge in Edge:
                new_edge, sign = rotate_edge(edge, r)
                orig = s.edge_curve(edge)
                moved = rot.edge_curve(new_edge)
                want = orig.control_points if sign == 1 else orig.control_points[::-1]
                assert np.array_equal(moved.control_points, want)
