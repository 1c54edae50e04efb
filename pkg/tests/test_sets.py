"""Tests for perturbation sets and symmetric convex hulls"""

import dataclasses
import math

import numpy as np
import pytest
from scipy.spatial import Delaunay

from shadowrec.core import (
    DimensionMismatchError,
    Field,
    IndexOutOfRangeError,
    Seminorm,
    SeminormFamily,
    SpecError,
)
from shadowrec.sets import (
    BoundSet,
    HullKind,
    HullRep,
    UnsupportedFieldError,
    contains,
    draw_uniform,
    draw_vertex,
    gauge,
    in_bound_set,
    random_member,
    scale,
    sup_norm_over,
    sup_seminorm,
    symmetric_convex_hull,
)


@pytest.fixture
def cross_polytope() -> HullRep:
    """conv of (+-1, 0) and (0, +-1)"""
    return symmetric_convex_hull(BoundSet.polytope([[1.0, 0.0], [0.0, 1.0]]))


@pytest.mark.unit
class TestBoundSet:
    """Test cases for perturbation set construction"""

    def test_ball_needs_positive_radius(self, inf_norm):
        """Radius must be positive"""
        with pytest.raises(SpecError):
            BoundSet.ball(inf_norm, 0.0, 1)

    def test_reversed_interval(self):
        """lo must not exceed hi"""
        with pytest.raises(SpecError):
            BoundSet.interval(2.0, 1.0)

    def test_complex_polytope_unsupported(self):
        """Polytopes are real only"""
        with pytest.raises(UnsupportedFieldError):
            BoundSet.polytope([[1.0, 0.0]], field=Field.COMPLEX)

    def test_polytope_points_are_read_only(self):
        """Vertex arrays are frozen"""
        bound_set = BoundSet.polytope([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ValueError):
            bound_set.points[0, 0] = 2.0

    def test_to_dict(self, inf_norm):
        """Schema of the configuration document"""
        assert BoundSet.interval(-1.0, 2.0).to_dict() == {"kind": "interval", "lo": -1.0, "hi": 2.0}
        assert BoundSet.ball(inf_norm, 0.5, 1).to_dict() == {
            "kind": "ball", "seminorm": {"kind": "p", "p": "inf"}, "radius": 0.5
        }


@pytest.mark.unit
class TestSymmetricConvexHull:
    """Test cases for conv(V^b)"""

    def test_interval_becomes_symmetric(self):
        """[lo, hi] becomes [-max|.|, max|.|]"""
        hull = symmetric_convex_hull(BoundSet.interval(-3.0, 1.0))
        assert hull.kind is HullKind.SYMMETRIC_INTERVAL
        assert hull.radius == 3.0

    def test_ball_is_kept(self, unit_ball):
        """Balls centred at 0 are already balanced and convex"""
        hull = symmetric_convex_hull(unit_ball)
        assert hull.kind is HullKind.SCALED_BALL
        assert hull.radius == 1.0

    def test_one_dimensional_polytope(self):
        """A real polytope in K^1 is a symmetric interval"""
        hull = symmetric_convex_hull(BoundSet.polytope([[0.5], [-2.0]]))
        assert hull.kind is HullKind.SYMMETRIC_INTERVAL
        assert hull.radius == 2.0

    def test_polytope_is_closed_under_negation(self, cross_polytope):
        """Vertices include their negatives"""
        assert cross_polytope.kind is HullKind.SYMMETRIC_POLYTOPE
        assert sorted(map(tuple, cross_polytope.vertices.tolist())) == [
            (-1.0, 0.0), (0.0, -1.0), (0.0, 1.0), (1.0, 0.0)
        ]
        assert cross_polytope.facets is not None

    def test_degenerate_polytope_has_no_facets(self):
        """Lower-dimensional sets fall back to the LP"""
        hull = symmetric_convex_hull(BoundSet.polytope([[1.0, 1.0]]))
        assert hull.facets is None


@pytest.mark.unit
class TestContains:
    """Test cases for membership in scaled hulls"""

    def test_interval_membership(self):
        """1.5 is in conv([1, 2]^b) = [-2, 2]"""
        hull = symmetric_convex_hull(BoundSet.interval(1.0, 2.0))
        assert contains(hull, np.array([1.5]))
        assert contains(hull, np.array([-2.0]))
        assert not contains(hull, np.array([2.1]))
        assert gauge(hull, np.array([1.5])) == 0.75

    def test_scaled_ball(self, unit_ball):
        """lambda * B(0, 1)"""
        hull = scale(symmetric_convex_hull(unit_ball), 3.0)
        assert contains(hull, np.array([2.9]))
        assert contains(hull, np.array([-3.0]))
        assert not contains(hull, np.array([3.1]))
        assert contains(hull, np.array([3.1]), tol=0.2)

    def test_complex_ball(self):
        """Complex vectors are measured by modulus"""
        hull = symmetric_convex_hull(BoundSet.ball(Seminorm.p_norm(2), 1.0, 1, Field.COMPLEX))
        assert contains(hull, np.array([0.6 + 0.7j]))
        assert not contains(hull, np.array([0.8 + 0.7j]))

    def test_cross_polytope(self, cross_polytope):
        """|v_1| + |v_2| <= 1"""
        assert contains(cross_polytope, np.array([0.4, 0.4]))
        assert contains(cross_polytope, np.array([-0.4, 0.5]))
        assert not contains(cross_polytope, np.array([0.8, 0.8]))
        assert gauge(cross_polytope, np.array([0.8, 0.8])) == pytest.approx(1.6)

    def test_polytope_tolerance(self, cross_polytope):
        """A point just outside is accepted within tol"""
        vec = np.array([1.05, 0.0])
        assert not contains(cross_polytope, vec)
        assert contains(cross_polytope, vec, tol=0.1)

    def test_lp_path_agrees_with_facets(self, cross_polytope):
        """The LP decides the same as the facet description"""
        lp_hull = dataclasses.replace(cross_polytope, facets=None)
        assert contains(lp_hull, np.array([0.4, 0.4]))
        assert not contains(lp_hull, np.array([0.8, 0.8]))
        assert gauge(lp_hull, np.array([0.8, 0.8])) == pytest.approx(1.6, abs=1e-6)

    def test_degenerate_polytope(self):
        """Membership in a segment through the origin"""
        hull = symmetric_convex_hull(BoundSet.polytope([[1.0, 1.0]]))
        assert contains(hull, np.array([0.5, 0.5]))
        assert not contains(hull, np.array([0.5, 0.6]))
        assert gauge(hull, np.array([0.5, 0.5])) == pytest.approx(0.5, abs=1e-6)
        assert gauge(hull, np.array([1.0, 0.0])) == math.inf

    def test_zero_factor(self, cross_polytope):
        """0 * H = {0}"""
        hull = scale(cross_polytope, 0.0)
        assert contains(hull, np.zeros(2))
        assert not contains(hull, np.array([0.1, 0.0]))

    def test_dimension_mismatch(self, cross_polytope):
        """Queries must live in the hull's space"""
        with pytest.raises(DimensionMismatchError):
            contains(cross_polytope, np.array([0.1]))

    def test_negative_scale(self, cross_polytope):
        """Scale factors are nonnegative"""
        with pytest.raises(SpecError):
            scale(cross_polytope, -1.0)

    def test_negative_tolerance(self, cross_polytope):
        """Tolerances are nonnegative"""
        with pytest.raises(SpecError):
            contains(cross_polytope, np.zeros(2), tol=-1.0)

    def test_agrees_with_triangulation(self):
        """Random symmetric polygons against scipy's Delaunay point location"""
        rng = np.random.default_rng(11)
        checked = 0
        for _ in range(20):
            hull = symmetric_convex_hull(BoundSet.polytope(rng.normal(size=(4, 2))))
            lp_hull = dataclasses.replace(hull, facets=None)
            triangulation = Delaunay(hull.vertices)
            for query in rng.normal(size=(25, 2)):
                g = gauge(hull, query)
                if abs(g - 1.0) < 1e-6:
                    continue
                expected = bool(triangulation.find_simplex(query) >= 0)
                assert contains(hull, query) == expected
                assert contains(lp_hull, query) == expected
                checked += 1
        assert checked > 400


@pytest.mark.unit
class TestSupremum:
    """Test cases for exact suprema of seminorms over V"""

    def test_ball_conversions(self):
        """p-norm conversion constants on K^2"""
        inf_ball = BoundSet.ball(Seminorm.p_norm(math.inf), 1.0, 2)
        one_ball = BoundSet.ball(Seminorm.p_norm(1), 1.0, 2)

        assert sup_norm_over(inf_ball, Seminorm.p_norm(2)) == pytest.approx(math.sqrt(2.0))
        assert sup_norm_over(inf_ball, Seminorm.p_norm(1)) == pytest.approx(2.0)
        assert sup_norm_over(one_ball, Seminorm.p_norm(math.inf)) == pytest.approx(1.0)

    def test_weighted_ball(self):
        """Weighted-sup ball is a box with half-widths r / w_i"""
        ball = BoundSet.ball(Seminorm.weighted_sup([1.0, 2.0]), 2.0, 2)
        assert sup_norm_over(ball, Seminorm.p_norm(1)) == pytest.approx(3.0)

    def test_interval_and_polytope(self):
        """Maxima are attained at endpoints and vertices"""
        assert sup_norm_over(BoundSet.interval(-3.0, 1.0), Seminorm.p_norm(math.inf)) == 3.0
        polytope = BoundSet.polytope([[1.0, 2.0], [-3.0, 0.5]])
        assert sup_norm_over(polytope, Seminorm.p_norm(1)) == 3.5

    def test_sup_seminorm_index(self, unit_ball, line_family):
        """Family indices are checked"""
        assert sup_seminorm(unit_ball, line_family, 0) == 1.0
        with pytest.raises(IndexOutOfRangeError):
            sup_seminorm(unit_ball, line_family, 1)

    def test_sup_seminorm_dimension(self, unit_ball):
        """The set must live in the family's space"""
        family = SeminormFamily.normed_space(Seminorm.p_norm(1), 2)
        with pytest.raises(DimensionMismatchError):
            sup_seminorm(unit_ball, family, 0)


@pytest.mark.unit
class TestMembershipInV:
    """Test cases for membership in V itself"""

    def test_interval_is_not_symmetrised(self):
        """0 is not in [1, 2]"""
        bound_set = BoundSet.interval(1.0, 2.0)
        assert in_bound_set(bound_set, np.array([1.5]))
        assert not in_bound_set(bound_set, np.array([0.0]))

    def test_polytope(self):
        """Convex combinations of the vertices"""
        bound_set = BoundSet.polytope([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        assert in_bound_set(bound_set, np.array([0.25, 0.25]))
        assert not in_bound_set(bound_set, np.array([-0.25, 0.25]))

    def test_points(self):
        """Finite point sets only contain their points"""
        bound_set = BoundSet.finite_points([[1.0], [-1.0]])
        assert in_bound_set(bound_set, np.array([1.0]))
        assert not in_bound_set(bound_set, np.array([0.0]))


@pytest.mark.unit
class TestSampling:
    """Test cases for drawing from sets and hulls"""

    @pytest.mark.parametrize("p", [1, 2, math.inf])
    @pytest.mark.parametrize("vector_field", [Field.REAL, Field.COMPLEX])
    def test_ball_draws_stay_inside(self, p, vector_field):
        """Uniform draws from a ball lie in the ball"""
        seminorm = Seminorm.p_norm(p)
        bound_set = BoundSet.ball(seminorm, 0.7, 3, vector_field)
        rng = np.random.default_rng(5)
        for _ in range(200):
            assert seminorm(draw_uniform(bound_set, rng)) <= 0.7

    def test_interval_draws(self):
        """Uniform draws from [lo, hi]"""
        bound_set = BoundSet.interval(1.0, 2.0)
        rng = np.random.default_rng(0)
        draws = [draw_uniform(bound_set, rng)[0] for _ in range(100)]
        assert all(1.0 <= x <= 2.0 for x in draws)

    def test_vertex_draws(self):
        """Vertex draws return an endpoint"""
        bound_set = BoundSet.interval(1.0, 2.0)
        rng = np.random.default_rng(0)
        draws = {draw_vertex(bound_set, rng)[0] for _ in range(50)}
        assert draws == {1.0, 2.0}

    def test_ball_has_no_vertices(self, unit_ball):
        """Balls cannot be vertex sampled"""
        with pytest.raises(SpecError):
            draw_vertex(unit_ball, np.random.default_rng(0))

    def test_random_member_is_contained(self, cross_polytope):
        """Random convex combinations lie in factor * conv(V^b)"""
        hull = scale(cross_polytope, 2.5)
        rng = np.random.default_rng(9)
        for _ in range(50):
            assert contains(hull, random_member(hull, rng), tol=1e-9)
