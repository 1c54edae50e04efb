"""Orbits of x_{n+1} = a_n x_n + b_n, defects and pseudo-orbit generation"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .core import (
    EPS,
    CoefficientSpec,
    CompensatedSum,
    Field,
    ForcingSpec,
    ShadowrecError,
    SpecError,
    coeff_at,
    forcing_at,
    make_vector,
)
from .sets import BoundSet, SetKind, draw_uniform, draw_vertex, in_bound_set


logger = logging.getLogger(__name__)

VectorLike = Union[np.ndarray, Sequence[complex], Sequence[float]]


class HorizonExceededError(ShadowrecError, IndexError):
    """Index beyond the horizon on which a specification is defined"""
    pass


class SamplerError(ShadowrecError, ValueError):
    """Sampler that cannot draw from the given perturbation set"""
    pass


def _result_field(*fields: Field) -> Field:
    return Field.COMPLEX if Field.COMPLEX in fields else Field.REAL


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def check_horizon(coefficients: CoefficientSpec, steps: int) -> None:
    """
    Check that a_0..a_{steps-1} are defined

    Raises:
        HorizonExceededError: If an explicit coefficient list is too short
    """
    if steps < 0:
        raise SpecError(f"Horizon must be nonnegative, got {steps}")
    limit = coefficients.horizon
    if limit is not None and steps > limit:
        raise HorizonExceededError(
            f"Horizon {steps} needs coefficients a_0..a_{steps - 1}, "
            f"but the explicit list only defines {limit}"
        )


def coefficient_array(coefficients: CoefficientSpec, steps: int) -> np.ndarray:
    """Coefficients a_0..a_{steps-1} as an array"""
    check_horizon(coefficients, steps)
    values = [coeff_at(coefficients, n) for n in range(steps)]
    return np.array(values, dtype=coefficients.field.dtype)  # type: ignore[union-attr]


def forcing_array(forcing: ForcingSpec, steps: int) -> np.ndarray:
    """Forcing vectors b_0..b_{steps-1} as a (steps, d) array"""
    out = np.zeros((steps, forcing.dimension), dtype=forcing.field.dtype)
    for n in range(steps):
        out[n] = forcing_at(forcing, n)
    return out


@dataclass(frozen=True)
class Magnitude:
    """
    Nonnegative number kept as ``mantissa * 2**exponent``

    Products of many coefficient moduli stay representable far beyond the
    double range; ``value`` is exact whenever the number itself fits.
    """

    mantissa: float
    exponent: int = 0

    @classmethod
    def from_float(cls, value: float) -> "Magnitude":
        if value < 0.0 or not math.isfinite(value):
            raise SpecError(f"Magnitudes are finite and nonnegative, got {value}")
        mantissa, exponent = math.frexp(value)
        return cls(mantissa, exponent)

    @property
    def log(self) -> float:
        if self.mantissa == 0.0:
            return -math.inf
        return math.log(self.mantissa) + self.exponent * math.log(2.0)

    @property
    def value(self) -> float:
        try:
            return math.ldexp(self.mantissa, self.exponent)
        except OverflowError:
            return math.inf

    def __mul__(self, other: "Magnitude") -> "Magnitude":
        mantissa, shift = math.frexp(self.mantissa * other.mantissa)
        return Magnitude(mantissa, self.exponent + other.exponent + shift)

    def __float__(self) -> float:
        return self.value


def partial_product_abs(coefficients: CoefficientSpec, i: int, j: int) -> Magnitude:
    """
    |a_i * ... * a_j| without overflow or underflow

    The empty product (j = i - 1) is 1.

    Raises:
        HorizonExceededError: If j is beyond an explicit coefficient list
    """
    if i < 0 or j < i - 1:
        raise SpecError(f"Invalid product range [{i}, {j}]")
    check_horizon(coefficients, j + 1)
    mantissa, exponent = 1.0, 0
    for k in range(i, j + 1):
        mantissa, shift = math.frexp(mantissa * abs(coeff_at(coefficients, k)))
        exponent += shift
    if i <= j:
        return Magnitude(mantissa, exponent)
    return Magnitude.from_float(1.0)


def log_abs_prefix(coefficients: np.ndarray) -> np.ndarray:
    """L[k] = log|a_0 ... a_{k-1}| for k = 0..len(coefficients)"""
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(coefficients))
    return np.concatenate([[0.0], np.cumsum(logs)])


@dataclass(frozen=True, eq=False)
class Orbit:
    """Exact orbit y_0..y_N of a recurrence, one row per index"""

    states: np.ndarray
    coefficients: CoefficientSpec
    forcing: ForcingSpec

    def __post_init__(self) -> None:
        if self.states.ndim != 2 or self.states.shape[0] == 0:
            raise SpecError(f"Orbit states must be a (N+1, d) array, got shape {self.states.shape}")
        if not self.states.flags.writeable:
            return
        states = self.states.copy()
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    @property
    def field(self) -> Field:
        return Field.COMPLEX if np.iscomplexobj(self.states) else Field.REAL

    def __len__(self) -> int:
        return self.states.shape[0]

    def __getitem__(self, n: int) -> np.ndarray:
        return self.states[n]


def propagate(
    y0: VectorLike, coefficients: CoefficientSpec, forcing: ForcingSpec, horizon: int
) -> Orbit:
    """
    Iterate y_{n+1} = a_n y_n + b_n from y_0 for ``horizon`` steps

    Raises:
        HorizonExceededError: If the coefficients are not defined up to the horizon
    """
    check_horizon(coefficients, horizon)
    vector_field = _result_field(coefficients.field, forcing.field,  # type: ignore[arg-type]
                                 Field.COMPLEX if np.iscomplexobj(y0) else Field.REAL)
    start = make_vector(y0, vector_field, forcing.dimension)

    states = np.empty((horizon + 1, forcing.dimension), dtype=vector_field.dtype)
    states[0] = start
    for n in range(horizon):
        states[n + 1] = coeff_at(coefficients, n) * states[n] + forcing_at(forcing, n)
    return Orbit(_readonly(states), coefficients, forcing)


def closed_form(
    x0: VectorLike, coefficients: CoefficientSpec, forcing: ForcingSpec, n: int
) -> np.ndarray:
    """
    Evaluate x_n from x_0 without iterating

    x_n = a_0...a_{n-1} x_0 + sum_{k=1}^{n-1} a_k...a_{n-1} b_{k-1} + b_{n-1},
    with the suffix products accumulated from k = n-1 downward.

    Raises:
        SpecError: For n < 2 (use propagate for x_0 and x_1)
        HorizonExceededError: If n is beyond the coefficient horizon
    """
    if n < 2:
        raise SpecError(f"The closed form is evaluated for n >= 2, got n={n}; use propagate instead")
    check_horizon(coefficients, n)
    vector_field = _result_field(coefficients.field, forcing.field,  # type: ignore[arg-type]
                                 Field.COMPLEX if np.iscomplexobj(x0) else Field.REAL)
    start = make_vector(x0, vector_field, forcing.dimension)

    total = CompensatedSum(forcing.dimension, vector_field)
    total.add(np.asarray(forcing_at(forcing, n - 1), dtype=vector_field.dtype))
    suffix: complex = 1.0
    for k in range(n - 1, 0, -1):
        suffix *= coeff_at(coefficients, k)
        total.add(suffix * forcing_at(forcing, k - 1))
    suffix *= coeff_at(coefficients, 0)
    total.add(suffix * start)
    return total.value


def defects(
    states: Union[np.ndarray, Sequence[VectorLike]],
    coefficients: CoefficientSpec,
    forcing: ForcingSpec
) -> np.ndarray:
    """
    Recompute c_n = x_{n+1} - a_n x_n - b_n for every step of a trajectory

    Returns:
        Read-only (len(states) - 1, d) array

    Raises:
        SpecError: If fewer than two states are given
        HorizonExceededError: If the coefficients run out
    """
    arr = np.asarray(states)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.shape[0] < 2:
        raise SpecError("Defects need a trajectory of at least two states")
    steps = arr.shape[0] - 1
    a = coefficient_array(coefficients, steps)
    b = forcing_array(forcing, steps)
    out = arr[1:] - a[:, None] * arr[:-1] - b
    return _readonly(np.array(out))


def step_rounding_scale(
    states: np.ndarray, coefficients: np.ndarray, forcing: np.ndarray
) -> np.ndarray:
    """Per-step bound on the rounding error of a recomputed defect (sup norm)"""
    mags = np.max(np.abs(states), axis=1)
    return 8.0 * EPS * (mags[1:] + np.abs(coefficients) * mags[:-1] + np.max(np.abs(forcing), axis=1))


class SamplerKind(str, Enum):
    UNIFORM = "uniform"
    VERTEX = "vertex"
    CONSTANT = "constant"


@dataclass(frozen=True, eq=False)
class Sampler:
    """How the defect c_n is drawn from V at each step"""

    kind: SamplerKind
    vector: Optional[np.ndarray] = None

    @classmethod
    def uniform(cls) -> "Sampler":
        return cls(SamplerKind.UNIFORM)

    @classmethod
    def vertex(cls) -> "Sampler":
        return cls(SamplerKind.VERTEX)

    @classmethod
    def constant(cls, vector: VectorLike, field: Field = Field.REAL) -> "Sampler":
        return cls(SamplerKind.CONSTANT, make_vector(vector, field))

    def to_dict(self) -> dict:
        data: dict = {"kind": self.kind.value}
        if self.vector is not None:
            if np.iscomplexobj(self.vector):
                data["vector"] = [[c.real, c.imag] for c in self.vector.tolist()]
            else:
                data["vector"] = self.vector.tolist()
        return data


def check_sampler(sampler: Sampler, bound_set: BoundSet) -> None:
    """
    Check that a sampler can draw from a set

    Raises:
        SamplerError: For a vertex sampler on a ball or a constant outside V
    """
    if sampler.kind is SamplerKind.VERTEX and bound_set.kind is SetKind.BALL:
        raise SamplerError(
            "The vertex sampler needs a set with a finite vertex list.\n"
            "Use an interval, polytope or point set, or switch to the uniform sampler."
        )
    if sampler.kind is SamplerKind.CONSTANT:
        if sampler.vector is None or sampler.vector.shape[0] != bound_set.dimension:
            raise SamplerError(f"The constant sampler needs a vector of dimension {bound_set.dimension}")
        if not in_bound_set(bound_set, sampler.vector, tol=0.0):
            raise SamplerError(
                f"Constant defect {sampler.vector.tolist()} is not an element of the perturbation set"
            )


@dataclass(frozen=True, eq=False)
class PseudoOrbit:
    """
    Trajectory x_0..x_N with its recomputed defects c_0..c_{N-1}

    ``defect_law`` declares the defects beyond the horizon when they are
    known (constant sampler). ``violations`` lists the steps whose
    recomputed defect lies outside V beyond floating-point slack.
    """

    states: np.ndarray
    defects: np.ndarray
    bound_set: BoundSet
    coefficients: CoefficientSpec
    forcing: ForcingSpec
    defect_law: Optional[ForcingSpec] = None
    violations: Tuple[int, ...] = ()

    @classmethod
    def from_states(
        cls,
        states: Union[np.ndarray, Sequence[VectorLike]],
        coefficients: CoefficientSpec,
        forcing: ForcingSpec,
        bound_set: BoundSet,
        defect_law: Optional[ForcingSpec] = None,
        tol: float = 0.0
    ) -> "PseudoOrbit":
        """
        Wrap a trajectory, recomputing its defects and auditing them against V

        Args:
            states: Trajectory x_0..x_N
            coefficients: Coefficient law the defects are measured against
            forcing: Forcing law the defects are measured against
            bound_set: Declared container V of the defects
            defect_law: Law of the defects beyond x_N, when known
            tol: Membership tolerance on top of the per-step rounding slack
        """
        arr = np.array(states)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        arr.setflags(write=False)
        recomputed = defects(arr, coefficients, forcing)

        steps = arr.shape[0] - 1
        slack = step_rounding_scale(
            arr, coefficient_array(coefficients, steps), forcing_array(forcing, steps)
        )
        violations = tuple(
            n for n in range(steps)
            if not in_bound_set(bound_set, recomputed[n], tol=tol + float(slack[n]))
        )
        if violations:
            logger.warning(
                f"{len(violations)} recomputed defects lie outside the perturbation set "
                f"(first at n={violations[0]})"
            )
        return cls(arr, recomputed, bound_set, coefficients, forcing, defect_law, violations)

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    @property
    def field(self) -> Field:
        return Field.COMPLEX if np.iscomplexobj(self.states) else Field.REAL


def generate_pseudo_orbit(
    x0: VectorLike,
    coefficients: CoefficientSpec,
    forcing: ForcingSpec,
    bound_set: BoundSet,
    horizon: int,
    sampler: Sampler,
    seed: int
) -> PseudoOrbit:
    """
    Iterate x_{n+1} = a_n x_n + b_n + c_n with c_n drawn from V

    Args:
        x0: Starting point
        coefficients: Coefficient law
        forcing: Forcing law
        bound_set: Perturbation set V the defects are drawn from
        horizon: Number of steps N
        sampler: Defect sampler
        seed: Seed of the random generator (one generator per call)

    Returns:
        PseudoOrbit with recomputed defects

    Raises:
        SamplerError: If the sampler cannot draw from V
        HorizonExceededError: If the coefficients are not defined up to the horizon
    """
    check_sampler(sampler, bound_set)
    check_horizon(coefficients, horizon)
    if bound_set.dimension != forcing.dimension:
        raise SpecError(
            f"Perturbation set of dimension {bound_set.dimension} with forcing of "
            f"dimension {forcing.dimension}"
        )

    vector_field = _result_field(
        coefficients.field, forcing.field, bound_set.field,  # type: ignore[arg-type]
        Field.COMPLEX if np.iscomplexobj(x0) else Field.REAL
    )
    rng = np.random.default_rng(seed)
    states = np.empty((horizon + 1, forcing.dimension), dtype=vector_field.dtype)
    states[0] = make_vector(x0, vector_field, forcing.dimension)

    for n in range(horizon):
        if sampler.kind is SamplerKind.CONSTANT:
            c = sampler.vector
        elif sampler.kind is SamplerKind.VERTEX:
            c = draw_vertex(bound_set, rng)
        else:
            c = draw_uniform(bound_set, rng)
        states[n + 1] = coeff_at(coefficients, n) * states[n] + forcing_at(forcing, n) + c

    defect_law = None
    if sampler.kind is SamplerKind.CONSTANT:
        defect_law = ForcingSpec.constant(sampler.vector, vector_field)  # type: ignore[arg-type]

    logger.debug(f"Generated pseudo-orbit: N={horizon}, sampler={sampler.kind.value}, seed={seed}")
    return PseudoOrbit.from_states(states, coefficients, forcing, bound_set, defect_law)


__all__ = [
    "HorizonExceededError",
    "SamplerError",
    "check_horizon",
    "coefficient_array",
    "forcing_array",
    "Magnitude",
    "partial_product_abs",
    "log_abs_prefix",
    "Orbit",
    "propagate",
    "closed_form",
    "defects",
    "step_rounding_scale",
    "SamplerKind",
    "Sampler",
    "check_sampler",
    "PseudoOrbit",
    "generate_pseudo_orbit",
]
