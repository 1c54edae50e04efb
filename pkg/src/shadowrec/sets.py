"""Perturbation sets, their symmetric convex hulls and membership tests"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .core import (
    DimensionMismatchError,
    Field,
    Seminorm,
    SeminormFamily,
    SeminormKind,
    ShadowrecError,
    SpecError,
    check_vector,
    seminorm_eval,
)


logger = logging.getLogger(__name__)

# HiGHS works to a primal feasibility tolerance of about 1e-7; optimal
# gauges are compared with this much slack.
_LP_SLACK = 1e-9

# Facet enumeration is only attempted up to this dimension.
_MAX_FACET_DIMENSION = 8

_INF_NORM = Seminorm.p_norm(math.inf)


class UnsupportedFieldError(ShadowrecError, ValueError):
    """Set representation not available over the requested field"""
    pass


class SetKind(str, Enum):
    BALL = "ball"
    INTERVAL = "interval"
    POLYTOPE = "polytope"
    POINTS = "points"


@dataclass(frozen=True, eq=False)
class BoundSet:
    """
    Bounded perturbation set V

    Balls are centred at the origin. Intervals live in the real line.
    Polytopes (convex hull of ``points``) and finite point sets are real only.
    """

    kind: SetKind
    dimension: int
    field: Field = Field.REAL
    seminorm: Optional[Seminorm] = None
    radius: float = 0.0
    lo: float = 0.0
    hi: float = 0.0
    points: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.kind is SetKind.BALL:
            if self.seminorm is None:
                raise SpecError("A ball needs a seminorm")
            if not (math.isfinite(self.radius) and self.radius > 0.0):
                raise SpecError(f"Ball radius must be positive and finite, got {self.radius}")
            if (self.seminorm.kind is SeminormKind.WEIGHTED_SUP
                    and len(self.seminorm.weights) != self.dimension):
                raise DimensionMismatchError("Ball seminorm weights do not match the dimension")
        elif self.kind is SetKind.INTERVAL:
            if self.field is not Field.REAL or self.dimension != 1:
                raise UnsupportedFieldError("Intervals are subsets of the real line (d = 1)")
            if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo > self.hi:
                raise SpecError(f"Invalid interval [{self.lo}, {self.hi}]")
        else:
            if self.field is not Field.REAL:
                raise UnsupportedFieldError(
                    f"{self.kind.value} sets are only supported over the real field; "
                    "their balanced hull over C is not polyhedral.\n"
                    "Use a ball for complex runs."
                )
            pts = np.asarray(self.points, dtype=float) if self.points is not None else None
            if pts is None or pts.ndim != 2 or pts.shape[0] == 0:
                raise SpecError(f"A {self.kind.value} set needs a nonempty list of points")
            if pts.shape[1] != self.dimension:
                raise DimensionMismatchError(
                    f"Points of dimension {pts.shape[1]} in a space of dimension {self.dimension}"
                )
            if not np.all(np.isfinite(pts)):
                raise SpecError("Set points must be finite")
            pts = pts.copy()
            pts.setflags(write=False)
            object.__setattr__(self, "points", pts)

    @classmethod
    def ball(
        cls, seminorm: Seminorm, radius: float, dimension: int, field: Field = Field.REAL
    ) -> "BoundSet":
        return cls(SetKind.BALL, dimension, field, seminorm=seminorm, radius=float(radius))

    @classmethod
    def interval(cls, lo: float, hi: float) -> "BoundSet":
        return cls(SetKind.INTERVAL, 1, Field.REAL, lo=float(lo), hi=float(hi))

    @classmethod
    def polytope(cls, vertices: Sequence[Sequence[float]], field: Field = Field.REAL) -> "BoundSet":
        pts = np.atleast_2d(np.asarray(vertices))
        if np.iscomplexobj(pts):
            raise UnsupportedFieldError("Polytope vertices must be real")
        return cls(SetKind.POLYTOPE, pts.shape[1], field, points=pts)

    @classmethod
    def finite_points(cls, points: Sequence[Sequence[float]], field: Field = Field.REAL) -> "BoundSet":
        pts = np.atleast_2d(np.asarray(points))
        if np.iscomplexobj(pts):
            raise UnsupportedFieldError("Finite point sets must be real")
        return cls(SetKind.POINTS, pts.shape[1], field, points=pts)

    def to_dict(self) -> dict:
        if self.kind is SetKind.BALL:
            return {"kind": "ball", "seminorm": self.seminorm.to_dict(),  # type: ignore[union-attr]
                    "radius": self.radius}
        if self.kind is SetKind.INTERVAL:
            return {"kind": "interval", "lo": self.lo, "hi": self.hi}
        key = "vertices" if self.kind is SetKind.POLYTOPE else "points"
        return {"kind": self.kind.value, key: self.points.tolist()}  # type: ignore[union-attr]


class HullKind(str, Enum):
    SCALED_BALL = "scaled_ball"
    SYMMETRIC_INTERVAL = "symmetric_interval"
    SYMMETRIC_POLYTOPE = "symmetric_polytope"


@dataclass(frozen=True, eq=False)
class HullRep:
    """
    The set ``factor * conv(V^b)``

    ``radius`` is the base radius of a ball or symmetric interval;
    ``vertices`` is a vertex list closed under negation. ``facets`` holds
    rows ``(a, b)`` with ``a.x <= b`` describing the base polytope when it is
    full-dimensional.
    """

    kind: HullKind
    dimension: int
    field: Field = Field.REAL
    seminorm: Optional[Seminorm] = None
    radius: float = 0.0
    vertices: Optional[np.ndarray] = None
    facets: Optional[np.ndarray] = None
    factor: float = 1.0

    @classmethod
    def scaled_ball(
        cls, seminorm: Seminorm, radius: float, dimension: int, field: Field = Field.REAL
    ) -> "HullRep":
        return cls(HullKind.SCALED_BALL, dimension, field, seminorm=seminorm, radius=float(radius))

    @classmethod
    def symmetric_interval(cls, r: float) -> "HullRep":
        if r < 0.0:
            raise SpecError(f"Symmetric interval half-width must be nonnegative, got {r}")
        return cls(HullKind.SYMMETRIC_INTERVAL, 1, Field.REAL, radius=float(r))

    @classmethod
    def symmetric_polytope(cls, vertices: Sequence[Sequence[float]]) -> "HullRep":
        """Close a real vertex list under negation and precompute facets"""
        pts = np.atleast_2d(np.asarray(vertices, dtype=float))
        sym = np.unique(np.vstack([pts, -pts]), axis=0)
        sym.setflags(write=False)
        return cls(
            HullKind.SYMMETRIC_POLYTOPE,
            sym.shape[1],
            Field.REAL,
            vertices=sym,
            facets=_facets(sym),
        )

    @property
    def native_norm(self) -> Seminorm:
        """Norm in which membership tolerances are measured"""
        if self.kind is HullKind.SCALED_BALL:
            return self.seminorm  # type: ignore[return-value]
        return _INF_NORM

    def describe(self) -> dict:
        data: dict = {"kind": self.kind.value, "factor": self.factor}
        if self.kind is HullKind.SCALED_BALL:
            data["seminorm"] = self.seminorm.to_dict()  # type: ignore[union-attr]
            data["radius"] = self.radius
        elif self.kind is HullKind.SYMMETRIC_INTERVAL:
            data["radius"] = self.radius
        else:
            data["vertices"] = self.vertices.tolist()  # type: ignore[union-attr]
        return data


def _facets(sym: np.ndarray) -> Optional[np.ndarray]:
    d = sym.shape[1]
    if d < 2 or d > _MAX_FACET_DIMENSION:
        return None
    try:
        hull = ConvexHull(sym)
    except (ValueError, RuntimeError) as e:
        # Degenerate (lower-dimensional) sets are left to the LP
        logger.debug(f"No facet description for symmetric polytope: {e}")
        return None
    normals = hull.equations[:, :-1]
    offsets = -hull.equations[:, -1]
    if np.any(offsets <= 0.0):
        return None
    facets = np.hstack([normals, offsets[:, None]])
    facets.setflags(write=False)
    return facets


def symmetric_convex_hull(bound_set: BoundSet) -> HullRep:
    """
    Construct conv(V^b) for a perturbation set

    Over the reals conv(V^b) = conv(V u -V). Balls centred at the origin are
    already balanced and convex.

    Raises:
        UnsupportedFieldError: For polytopes or point sets over the complex field
    """
    if bound_set.kind is SetKind.BALL:
        return HullRep.scaled_ball(
            bound_set.seminorm, bound_set.radius,  # type: ignore[arg-type]
            bound_set.dimension, bound_set.field
        )
    if bound_set.kind is SetKind.INTERVAL:
        return HullRep.symmetric_interval(max(abs(bound_set.lo), abs(bound_set.hi)))
    if bound_set.field is not Field.REAL:
        raise UnsupportedFieldError("Polytope hulls are only available over the real field")
    if bound_set.dimension == 1:
        return HullRep.symmetric_interval(float(np.max(np.abs(bound_set.points))))
    return HullRep.symmetric_polytope(bound_set.points)  # type: ignore[arg-type]


def scale(hull: HullRep, lam: float) -> HullRep:
    """
    Positive scaling lam * H

    Raises:
        SpecError: For negative or non-finite lam
    """
    if not (math.isfinite(lam) and lam >= 0.0):
        raise SpecError(f"Scale factor must be a nonnegative number, got {lam}")
    return replace(hull, factor=hull.factor * lam)


def _check_member_shape(hull: HullRep, vec: np.ndarray) -> None:
    check_vector(vec, hull.dimension, hull.field)
    if hull.kind is not HullKind.SCALED_BALL and np.iscomplexobj(vec) and np.any(vec.imag != 0.0):
        raise DimensionMismatchError("Complex vector queried against a real hull")


def _polytope_gauge_lp(vertices: np.ndarray, vec: np.ndarray, tol: float) -> float:
    """min sum(w) subject to w >= 0 and |U^T w - v|_inf <= tol"""
    m = vertices.shape[0]
    target = np.real(vec).astype(float)
    a_ub = np.vstack([vertices.T, -vertices.T])
    b_ub = np.concatenate([target + tol, -target + tol])
    res = linprog(np.ones(m), A_ub=a_ub, b_ub=b_ub, bounds=(0, None), method="highs")
    if res.status == 0:
        return float(res.fun)
    if res.status == 2:
        return math.inf
    logger.warning(f"Polytope gauge LP ended with status {res.status}: {res.message}")
    return math.inf


def _facet_gauge(facets: np.ndarray, vec: np.ndarray) -> float:
    values = facets[:, :-1] @ np.real(vec) / facets[:, -1]
    return max(0.0, float(np.max(values)))


def contains(hull: HullRep, vec: np.ndarray, tol: float = 0.0) -> bool:
    """
    Membership of v in the closed set represented by H, up to tol

    The tolerance is measured in the hull's native norm (the ball's seminorm,
    the modulus for intervals, the sup norm for polytopes).

    Raises:
        DimensionMismatchError: If v does not live in the hull's space
    """
    if tol < 0.0:
        raise SpecError(f"Tolerance must be nonnegative, got {tol}")
    _check_member_shape(hull, vec)

    if hull.kind is HullKind.SCALED_BALL:
        return hull.seminorm(vec) <= hull.radius * hull.factor + tol  # type: ignore[misc]
    if hull.kind is HullKind.SYMMETRIC_INTERVAL:
        return abs(vec[0]) <= hull.radius * hull.factor + tol

    if hull.facets is not None:
        normals, offsets = hull.facets[:, :-1], hull.facets[:, -1]
        if _facet_gauge(hull.facets, vec) <= hull.factor:
            return True
        excess = (normals @ np.real(vec) - hull.factor * offsets) / np.sum(np.abs(normals), axis=1)
        if float(np.max(excess)) > tol + _LP_SLACK * max(1.0, hull.factor):
            return False

    if hull.factor == 0.0:
        return _INF_NORM(vec) <= tol
    gauge_value = _polytope_gauge_lp(hull.vertices, vec, tol)  # type: ignore[arg-type]
    logger.debug(f"LP membership decision: gauge {gauge_value} against factor {hull.factor}")
    return gauge_value <= hull.factor + _LP_SLACK * max(1.0, hull.factor)


def gauge(hull: HullRep, vec: np.ndarray) -> float:
    """
    Smallest lam >= 0 with v in lam * conv(V^b) (the base set, factor ignored)

    Returns ``inf`` when v is outside the span of the base set.
    """
    _check_member_shape(hull, vec)
    if hull.kind is HullKind.SCALED_BALL:
        return hull.seminorm(vec) / hull.radius  # type: ignore[misc]
    if hull.kind is HullKind.SYMMETRIC_INTERVAL:
        modulus = abs(vec[0])
        if hull.radius == 0.0:
            return 0.0 if modulus == 0.0 else math.inf
        return modulus / hull.radius
    if hull.facets is not None:
        return _facet_gauge(hull.facets, vec)
    return _polytope_gauge_lp(hull.vertices, vec, 0.0)  # type: ignore[arg-type]


def _p_conversion(dimension: int, source_p: float, target_p: float) -> float:
    # sup of ||v||_target over the unit ball of ||.||_source in K^d
    inv = lambda p: 0.0 if p == math.inf else 1.0 / p  # noqa: E731
    return float(dimension) ** max(0.0, inv(target_p) - inv(source_p))


def _ball_sup(ball_norm: Seminorm, radius: float, dimension: int, target: Seminorm) -> float:
    if ball_norm.kind is SeminormKind.P_NORM:
        if target.kind is SeminormKind.P_NORM:
            return radius * _p_conversion(dimension, ball_norm.p, target.p)
        # a unit coordinate vector is extremal for any p-norm ball
        return radius * max(target.weights)
    half_widths = radius / np.asarray(ball_norm.weights)
    if target.kind is SeminormKind.WEIGHTED_SUP:
        return float(np.max(np.asarray(target.weights) * half_widths))
    return target(half_widths)


def sup_norm_over(bound_set: BoundSet, seminorm: Seminorm) -> float:
    """Exact supremum of a seminorm over V"""
    if bound_set.kind is SetKind.BALL:
        return _ball_sup(
            bound_set.seminorm, bound_set.radius,  # type: ignore[arg-type]
            bound_set.dimension, seminorm
        )
    if bound_set.kind is SetKind.INTERVAL:
        return max(seminorm(np.array([bound_set.lo])), seminorm(np.array([bound_set.hi])))
    # convex functions attain their max over a polytope at a vertex
    return max(seminorm(p) for p in bound_set.points)  # type: ignore[union-attr]


def sup_seminorm(bound_set: BoundSet, family: SeminormFamily, i: int) -> float:
    """
    Exact supremum of the i-th family seminorm over V

    Raises:
        IndexOutOfRangeError: If i is not a family index
    """
    seminorm_eval(family, i, np.zeros(family.dimension))
    if bound_set.dimension != family.dimension:
        raise DimensionMismatchError(
            f"Set of dimension {bound_set.dimension} used with a family on {family.dimension}"
        )
    return sup_norm_over(bound_set, family[i])


def in_bound_set(bound_set: BoundSet, vec: np.ndarray, tol: float = 0.0) -> bool:
    """Membership in V itself (not its hull), up to tol in the sup norm"""
    check_vector(vec, bound_set.dimension, bound_set.field)
    if bound_set.kind is SetKind.BALL:
        return bound_set.seminorm(vec) <= bound_set.radius + tol  # type: ignore[misc]
    if np.iscomplexobj(vec) and np.any(vec.imag != 0.0):
        return False
    real = np.real(vec).astype(float)
    if bound_set.kind is SetKind.INTERVAL:
        return bound_set.lo - tol <= real[0] <= bound_set.hi + tol
    pts = bound_set.points
    if bound_set.kind is SetKind.POINTS:
        return bool(np.min(np.max(np.abs(pts - real), axis=1)) <= tol)  # type: ignore[operator]
    if pts.shape[0] == 1:  # type: ignore[union-attr]
        return _INF_NORM(real - pts[0]) <= tol  # type: ignore[index]
    m = pts.shape[0]  # type: ignore[union-attr]
    a_ub = np.vstack([pts.T, -pts.T])  # type: ignore[union-attr]
    b_ub = np.concatenate([real + tol, -real + tol])
    res = linprog(
        np.zeros(m), A_ub=a_ub, b_ub=b_ub, A_eq=np.ones((1, m)), b_eq=[1.0],
        bounds=(0, None), method="highs"
    )
    return bool(res.status == 0)


# Sampling


def _sample_ball(
    seminorm: Seminorm, radius: float, dimension: int, field: Field, rng: np.random.Generator
) -> np.ndarray:
    complex_field = field is Field.COMPLEX

    def disks(half_widths: np.ndarray) -> np.ndarray:
        if not complex_field:
            return rng.uniform(-1.0, 1.0, dimension) * half_widths
        moduli = half_widths * np.sqrt(rng.uniform(0.0, 1.0, dimension))
        return moduli * np.exp(2j * np.pi * rng.uniform(0.0, 1.0, dimension))

    if seminorm.kind is SeminormKind.WEIGHTED_SUP:
        vec = disks(radius / np.asarray(seminorm.weights))
    elif seminorm.p == math.inf:
        vec = disks(np.full(dimension, radius))
    elif seminorm.p == 2.0:
        k = 2 * dimension if complex_field else dimension
        direction = rng.standard_normal(k)
        direction /= np.linalg.norm(direction)
        point = direction * radius * rng.uniform(0.0, 1.0) ** (1.0 / k)
        vec = point[:dimension] + 1j * point[dimension:] if complex_field else point
    else:
        if complex_field:
            # moduli of a uniform point in the complex l1 ball follow Dirichlet(2, ..., 2, 1)
            moduli = rng.dirichlet([2.0] * dimension + [1.0])[:dimension] * radius
            vec = moduli * np.exp(2j * np.pi * rng.uniform(0.0, 1.0, dimension))
        else:
            weights = rng.dirichlet(np.ones(dimension + 1))[:dimension]
            vec = weights * rng.choice([-1.0, 1.0], dimension) * radius

    value = seminorm(vec)
    while value > radius:
        vec = vec * (radius / value) * (1.0 - 4.0 * np.finfo(float).eps)
        value = seminorm(vec)
    return vec


def draw_uniform(bound_set: BoundSet, rng: np.random.Generator) -> np.ndarray:
    """One random element of V (exactly uniform except for polytopes, see below)"""
    if bound_set.kind is SetKind.BALL:
        return _sample_ball(
            bound_set.seminorm, bound_set.radius, bound_set.dimension,  # type: ignore[arg-type]
            bound_set.field, rng
        )
    if bound_set.kind is SetKind.INTERVAL:
        return np.array([rng.uniform(bound_set.lo, bound_set.hi)])
    pts = bound_set.points
    if bound_set.kind is SetKind.POINTS:
        return pts[rng.integers(pts.shape[0])].copy()  # type: ignore[union-attr]
    # random convex combination of the vertices
    weights = rng.dirichlet(np.ones(pts.shape[0]))  # type: ignore[union-attr]
    return weights @ pts


def draw_vertex(bound_set: BoundSet, rng: np.random.Generator) -> np.ndarray:
    """
    One extreme point of V chosen uniformly

    Raises:
        SpecError: For balls, which have no finite vertex list
    """
    if bound_set.kind is SetKind.BALL:
        raise SpecError("Balls have no vertex list to sample from")
    if bound_set.kind is SetKind.INTERVAL:
        return np.array([bound_set.lo if rng.integers(2) == 0 else bound_set.hi])
    pts = bound_set.points
    return pts[rng.integers(pts.shape[0])].copy()  # type: ignore[union-attr]


def random_member(hull: HullRep, rng: np.random.Generator) -> np.ndarray:
    """Random element of factor * conv(V^b) as a random convex combination"""
    if hull.kind is HullKind.SCALED_BALL:
        return _sample_ball(
            hull.seminorm, hull.radius * hull.factor, hull.dimension,  # type: ignore[arg-type]
            hull.field, rng
        ) if hull.factor > 0.0 else np.zeros(hull.dimension, dtype=hull.field.dtype)
    if hull.kind is HullKind.SYMMETRIC_INTERVAL:
        return np.array([rng.uniform(-1.0, 1.0) * hull.radius * hull.factor])
    weights = rng.dirichlet(np.ones(hull.vertices.shape[0]))  # type: ignore[union-attr]
    return hull.factor * (weights @ hull.vertices)


__all__ = [
    "UnsupportedFieldError",
    "SetKind",
    "BoundSet",
    "HullKind",
    "HullRep",
    "symmetric_convex_hull",
    "scale",
    "contains",
    "gauge",
    "sup_norm_over",
    "sup_seminorm",
    "in_bound_set",
    "draw_uniform",
    "draw_vertex",
    "random_member",
]
