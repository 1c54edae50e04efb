"""Scalar fields, vectors, seminorm families and sequence specifications"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np


logger = logging.getLogger(__name__)

Scalar = Union[float, complex]

EPS = float(np.finfo(np.float64).eps)


class ShadowrecError(Exception):
    """Base exception for shadowrec errors"""
    pass


class SpecError(ShadowrecError, ValueError):
    """Invalid construction of a specification or seminorm"""
    pass


class IndexOutOfRangeError(ShadowrecError, IndexError):
    """Index outside the domain of a finite specification"""
    pass


class AsymptoticsUnavailableError(ShadowrecError, ValueError):
    """Asymptotic information requested from a sequence without a tail law"""
    pass


class DimensionMismatchError(ShadowrecError, ValueError):
    """Vector dimension does not match the space it is used in"""
    pass


class FieldMismatchError(ShadowrecError, ValueError):
    """Complex value supplied where the real field is required"""
    pass


class Field(str, Enum):
    """Scalar field of the space"""

    REAL = "real"
    COMPLEX = "complex"

    @property
    def dtype(self) -> type:
        return np.float64 if self is Field.REAL else np.complex128


def make_scalar(value: Union[Scalar, Sequence[float]], scalar_field: Field) -> Scalar:
    """
    Coerce a value into a scalar of the given field

    Args:
        value: Number, complex number or ``[re, im]`` pair
        scalar_field: Target field

    Returns:
        ``float`` for the real field, ``complex`` for the complex field

    Raises:
        FieldMismatchError: If a value with nonzero imaginary part is given for the real field
    """
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise SpecError(f"Complex scalars are written as [re, im], got {value!r}")
        value = complex(float(value[0]), float(value[1]))

    number = complex(value)
    if not (math.isfinite(number.real) and math.isfinite(number.imag)):
        raise SpecError(f"Scalar must be finite, got {value!r}")

    if scalar_field is Field.REAL:
        if number.imag != 0.0:
            raise FieldMismatchError(f"Scalar {value!r} is not real")
        return float(number.real)
    return number


def infer_field(values: Iterable[Scalar]) -> Field:
    """Complex if any value has a nonzero imaginary part, real otherwise"""
    for value in values:
        if isinstance(value, (list, tuple)) or complex(value).imag != 0.0:
            return Field.COMPLEX
    return Field.REAL


def make_vector(
    values: Union[Sequence[Scalar], np.ndarray, Scalar],
    vector_field: Field,
    dimension: Optional[int] = None
) -> np.ndarray:
    """
    Build a read-only vector of the given field

    Args:
        values: Components (a bare scalar is a one-dimensional vector)
        vector_field: Field of the components
        dimension: Expected dimension, checked when given

    Returns:
        Read-only one-dimensional array of dtype float64 or complex128

    Raises:
        DimensionMismatchError: If the shape or dimension is wrong
        FieldMismatchError: If complex components are given for the real field
    """
    if isinstance(values, (list, tuple)) and values and isinstance(values[0], (list, tuple)):
        values = [make_scalar(v, Field.COMPLEX) for v in values]

    arr = np.asarray(values)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionMismatchError(f"A vector must be a nonempty flat list, got shape {arr.shape}")

    if vector_field is Field.REAL and np.iscomplexobj(arr):
        if np.any(arr.imag != 0.0):
            raise FieldMismatchError("Complex components supplied for a real-field vector")
        arr = arr.real

    vec = np.array(arr, dtype=vector_field.dtype)
    if not np.all(np.isfinite(vec)):
        raise SpecError("Vector components must be finite")
    if dimension is not None and vec.shape[0] != dimension:
        raise DimensionMismatchError(
            f"Expected a vector of dimension {dimension}, got {vec.shape[0]}"
        )
    vec.setflags(write=False)
    return vec


def zero_vector(dimension: int, vector_field: Field) -> np.ndarray:
    """Read-only zero vector"""
    vec = np.zeros(dimension, dtype=vector_field.dtype)
    vec.setflags(write=False)
    return vec


def field_of(vec: np.ndarray) -> Field:
    return Field.COMPLEX if np.iscomplexobj(vec) else Field.REAL


def check_vector(vec: np.ndarray, dimension: int, vector_field: Field) -> None:
    """
    Check that a vector lives in the expected space

    Raises:
        DimensionMismatchError: On a shape mismatch
        FieldMismatchError: On a complex vector in a real space
    """
    if vec.ndim != 1 or vec.shape[0] != dimension:
        raise DimensionMismatchError(
            f"Expected a vector of dimension {dimension}, got shape {vec.shape}"
        )
    if vector_field is Field.REAL and np.iscomplexobj(vec) and np.any(vec.imag != 0.0):
        raise FieldMismatchError("Complex vector supplied in a real space")


class CompensatedSum:
    """
    Kahan summation over vectors

    Keeps a running carry so that long series of small terms added to a
    large partial sum do not lose their low-order bits.
    """

    def __init__(self, dimension: int, vector_field: Field):
        self.total = np.zeros(dimension, dtype=vector_field.dtype)
        self.carry = np.zeros(dimension, dtype=vector_field.dtype)

    def add(self, value: np.ndarray) -> None:
        value = value - self.carry
        previous = self.total
        self.total = previous + value
        self.carry = (self.total - previous) - value

    @property
    def value(self) -> np.ndarray:
        out = self.total.copy()
        out.setflags(write=False)
        return out


# Seminorms


class SeminormKind(str, Enum):
    P_NORM = "p"
    WEIGHTED_SUP = "weighted_sup"


_ALLOWED_P = (1.0, 2.0, math.inf)


@dataclass(frozen=True)
class Seminorm:
    """
    A p-norm (p in {1, 2, inf}) or a weighted sup over component moduli

    Instances are callables returning the (nonnegative) value on a vector.
    """

    kind: SeminormKind
    p: float = math.inf
    weights: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind is SeminormKind.P_NORM:
            if float(self.p) not in _ALLOWED_P:
                raise SpecError(f"Unsupported p-norm: p={self.p} (use 1, 2 or inf)")
            object.__setattr__(self, "p", float(self.p))
        else:
            weights = tuple(float(w) for w in self.weights)
            if not weights or any(not (math.isfinite(w) and w > 0.0) for w in weights):
                raise SpecError("Weighted-sup seminorms need positive, finite weights")
            object.__setattr__(self, "weights", weights)

    @classmethod
    def p_norm(cls, p: float) -> "Seminorm":
        return cls(SeminormKind.P_NORM, p=p)

    @classmethod
    def weighted_sup(cls, weights: Sequence[float]) -> "Seminorm":
        return cls(SeminormKind.WEIGHTED_SUP, weights=tuple(weights))

    def __call__(self, vec: np.ndarray) -> float:
        moduli = np.abs(vec)
        if self.kind is SeminormKind.WEIGHTED_SUP:
            if moduli.shape[0] != len(self.weights):
                raise DimensionMismatchError(
                    f"Weighted-sup seminorm has {len(self.weights)} weights, "
                    f"vector has dimension {moduli.shape[0]}"
                )
            return float(np.max(np.asarray(self.weights) * moduli))
        if self.p == math.inf:
            return float(np.max(moduli))
        if self.p == 1.0:
            return math.fsum(moduli.tolist())
        return math.hypot(*moduli.tolist())

    def describe(self) -> str:
        if self.kind is SeminormKind.WEIGHTED_SUP:
            return f"weighted-sup{list(self.weights)}"
        return "inf-norm" if self.p == math.inf else f"{int(self.p)}-norm"

    def to_dict(self) -> dict:
        if self.kind is SeminormKind.WEIGHTED_SUP:
            return {"kind": self.kind.value, "weights": list(self.weights)}
        return {"kind": self.kind.value, "p": "inf" if self.p == math.inf else int(self.p)}


@dataclass(frozen=True)
class SeminormFamily:
    """
    Finite family of seminorms on K^d

    Stands in for the topology of a locally convex space. In normed mode the
    family holds exactly one norm.
    """

    seminorms: Tuple[Seminorm, ...]
    dimension: int
    normed: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "seminorms", tuple(self.seminorms))
        if not self.seminorms:
            raise SpecError("A seminorm family needs at least one seminorm")
        if self.dimension < 1:
            raise SpecError(f"Dimension must be at least 1, got {self.dimension}")
        for seminorm in self.seminorms:
            if seminorm.kind is SeminormKind.WEIGHTED_SUP and len(seminorm.weights) != self.dimension:
                raise DimensionMismatchError(
                    f"{seminorm.describe()} does not match dimension {self.dimension}"
                )
        if self.normed and len(self.seminorms) != 1:
            raise SpecError("Normed mode requires exactly one norm in the family")

    @classmethod
    def normed_space(cls, seminorm: Seminorm, dimension: int) -> "SeminormFamily":
        return cls((seminorm,), dimension, normed=True)

    def __len__(self) -> int:
        return len(self.seminorms)

    def __getitem__(self, i: int) -> Seminorm:
        return self.seminorms[i]

    def evaluate_all(self, vec: np.ndarray) -> Tuple[float, ...]:
        return tuple(seminorm(vec) for seminorm in self.seminorms)

    def verify_axioms(
        self,
        vector_field: Field = Field.REAL,
        samples: int = 1000,
        seed: int = 0,
        rtol: float = 1e-12
    ) -> List[str]:
        """
        Check nonnegativity, absolute homogeneity and the triangle inequality

        Args:
            vector_field: Field the random vectors are drawn from
            samples: Number of random triples checked per seminorm
            seed: Random seed
            rtol: Relative tolerance

        Returns:
            Descriptions of violated axioms (empty when all hold)
        """
        rng = np.random.default_rng(seed)
        failures: List[str] = []
        d = self.dimension

        def draw() -> np.ndarray:
            vec = rng.normal(size=d) * 10.0 ** rng.uniform(-3, 3)
            if vector_field is Field.COMPLEX:
                vec = vec + 1j * rng.normal(size=d)
            return vec

        for i, seminorm in enumerate(self.seminorms):
            for _ in range(samples):
                u, v = draw(), draw()
                lam = complex(rng.normal(), rng.normal()) if vector_field is Field.COMPLEX \
                    else float(rng.normal())
                pu, pv = seminorm(u), seminorm(v)
                if pu < 0.0:
                    failures.append(f"seminorm {i}: negative value {pu}")
                if abs(seminorm(lam * u) - abs(lam) * pu) > rtol * max(1.0, abs(lam) * pu):
                    failures.append(f"seminorm {i}: homogeneity fails for |lambda|={abs(lam)}")
                if seminorm(u + v) > (pu + pv) * (1.0 + rtol):
                    failures.append(f"seminorm {i}: triangle inequality fails")
        if failures:
            logger.warning(f"{len(failures)} seminorm axiom violations found")
        return failures

    def to_list(self) -> List[dict]:
        return [seminorm.to_dict() for seminorm in self.seminorms]


def seminorm_eval(family: SeminormFamily, i: int, vec: np.ndarray) -> float:
    """
    Evaluate the i-th seminorm of a family

    Raises:
        IndexOutOfRangeError: If i is not a family index
        DimensionMismatchError: If the vector dimension differs from the family's
    """
    if not 0 <= i < len(family):
        raise IndexOutOfRangeError(f"Seminorm index {i} outside family of size {len(family)}")
    if vec.ndim != 1 or vec.shape[0] != family.dimension:
        raise DimensionMismatchError(
            f"Vector of shape {vec.shape} used with a family on dimension {family.dimension}"
        )
    return family.seminorms[i](vec)


# Coefficient and forcing sequences


class CoefficientKind(str, Enum):
    CONSTANT = "constant"
    PERIODIC = "periodic"
    EVENTUALLY_CONSTANT = "eventually_constant"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class CoefficientSpec:
    """
    Declarative coefficient sequence (a_n) with a tail law

    ``values`` holds the constant (one entry), the period, the prefix of an
    eventually constant law, or the finite list. Zero entries are rejected
    unless ``allow_zero`` is set.
    """

    kind: CoefficientKind
    values: Tuple[Scalar, ...]
    tail: Optional[Scalar] = None
    field: Optional[Field] = None
    allow_zero: bool = False

    def __post_init__(self) -> None:
        raw = list(self.values) + ([self.tail] if self.tail is not None else [])
        scalar_field = self.field or infer_field(raw)
        values = tuple(make_scalar(v, scalar_field) for v in self.values)
        tail = make_scalar(self.tail, scalar_field) if self.tail is not None else None

        if self.kind in (CoefficientKind.CONSTANT, CoefficientKind.PERIODIC) and not values:
            raise SpecError(f"A {self.kind.value} coefficient law needs at least one value")
        if self.kind is CoefficientKind.CONSTANT and len(values) != 1:
            raise SpecError("A constant coefficient law holds exactly one value")
        if self.kind is CoefficientKind.EVENTUALLY_CONSTANT and tail is None:
            raise SpecError("An eventually constant coefficient law needs a tail value")
        if self.kind is not CoefficientKind.EVENTUALLY_CONSTANT and tail is not None:
            raise SpecError(f"A {self.kind.value} coefficient law takes no tail value")

        if not self.allow_zero:
            entries = values + ((tail,) if tail is not None else ())
            if any(v == 0 for v in entries):
                raise SpecError("Coefficients must be nonzero (a_n in K \\ {0})")

        object.__setattr__(self, "values", values)
        object.__setattr__(self, "tail", tail)
        object.__setattr__(self, "field", scalar_field)

    @classmethod
    def constant(
        cls, value: Scalar, field: Optional[Field] = None, allow_zero: bool = False
    ) -> "CoefficientSpec":
        return cls(CoefficientKind.CONSTANT, (value,), field=field, allow_zero=allow_zero)

    @classmethod
    def periodic(cls, values: Sequence[Scalar], field: Optional[Field] = None) -> "CoefficientSpec":
        return cls(CoefficientKind.PERIODIC, tuple(values), field=field)

    @classmethod
    def eventually_constant(
        cls, prefix: Sequence[Scalar], tail: Scalar, field: Optional[Field] = None
    ) -> "CoefficientSpec":
        return cls(CoefficientKind.EVENTUALLY_CONSTANT, tuple(prefix), tail=tail, field=field)

    @classmethod
    def explicit(cls, values: Sequence[Scalar], field: Optional[Field] = None) -> "CoefficientSpec":
        return cls(CoefficientKind.EXPLICIT, tuple(values), field=field)

    @property
    def horizon(self) -> Optional[int]:
        """Number of defined indices, or None for total laws"""
        return len(self.values) if self.kind is CoefficientKind.EXPLICIT else None

    @property
    def period(self) -> int:
        """Length of the non-asymptotic part (period, prefix or list length)"""
        if self.kind is CoefficientKind.CONSTANT:
            return 1
        return max(1, len(self.values))

    def to_dict(self) -> dict:
        def encode(v: Scalar) -> Union[float, List[float]]:
            return [v.real, v.imag] if isinstance(v, complex) else v

        data: dict = {"kind": self.kind.value}
        if self.kind is CoefficientKind.CONSTANT:
            data["value"] = encode(self.values[0])
        elif self.kind is CoefficientKind.EVENTUALLY_CONSTANT:
            data["prefix"] = [encode(v) for v in self.values]
            data["tail"] = encode(self.tail)  # type: ignore[arg-type]
        else:
            data["values"] = [encode(v) for v in self.values]
        return data


def coeff_at(spec: CoefficientSpec, n: int) -> Scalar:
    """
    Return a_n according to the specification's law

    Raises:
        IndexOutOfRangeError: For negative n or n beyond a finite list
    """
    if n < 0:
        raise IndexOutOfRangeError(f"Coefficient index must be nonnegative, got {n}")
    if spec.kind is CoefficientKind.CONSTANT:
        return spec.values[0]
    if spec.kind is CoefficientKind.PERIODIC:
        return spec.values[n % len(spec.values)]
    if spec.kind is CoefficientKind.EVENTUALLY_CONSTANT:
        return spec.values[n] if n < len(spec.values) else spec.tail  # type: ignore[return-value]
    if n >= len(spec.values):
        raise IndexOutOfRangeError(
            f"Coefficient index {n} beyond the explicit list of length {len(spec.values)}"
        )
    return spec.values[n]


def tail_bounds(spec: CoefficientSpec) -> Tuple[float, float]:
    """
    Exact liminf and limsup of |a_n|

    Raises:
        AsymptoticsUnavailableError: For explicit finite lists
    """
    if spec.kind is CoefficientKind.EXPLICIT:
        raise AsymptoticsUnavailableError(
            "An explicit coefficient list has no tail law; liminf/limsup are undefined.\n"
            "Use a constant, periodic or eventually constant law instead."
        )
    if spec.kind is CoefficientKind.PERIODIC:
        moduli = [abs(v) for v in spec.values]
        return min(moduli), max(moduli)
    value = spec.values[0] if spec.kind is CoefficientKind.CONSTANT else spec.tail
    return abs(value), abs(value)  # type: ignore[arg-type]


class ForcingKind(str, Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    PERIODIC = "periodic"
    EXPLICIT = "explicit"


@dataclass(frozen=True, eq=False)
class ForcingSpec:
    """
    Declarative forcing sequence (b_n)

    An explicit list continues with its tail law (zero, constant or periodic)
    after its last entry, so every forcing law is total.
    """

    kind: ForcingKind
    dimension: int
    field: Field = Field.REAL
    vectors: Tuple[np.ndarray, ...] = ()
    tail: Optional["ForcingSpec"] = None

    def __post_init__(self) -> None:
        vectors = tuple(make_vector(v, self.field, self.dimension) for v in self.vectors)
        if self.kind in (ForcingKind.CONSTANT, ForcingKind.PERIODIC) and not vectors:
            raise SpecError(f"A {self.kind.value} forcing law needs at least one vector")
        if self.kind is ForcingKind.CONSTANT and len(vectors) != 1:
            raise SpecError("A constant forcing law holds exactly one vector")

        tail = self.tail
        if self.kind is ForcingKind.EXPLICIT:
            if tail is None:
                tail = ForcingSpec(ForcingKind.ZERO, self.dimension, self.field)
            if tail.kind is ForcingKind.EXPLICIT:
                raise SpecError("The tail of an explicit forcing list must be zero, constant or periodic")
            if tail.dimension != self.dimension or tail.field is not self.field:
                raise DimensionMismatchError("Forcing tail does not match the forcing space")
        elif tail is not None:
            raise SpecError(f"A {self.kind.value} forcing law takes no tail")

        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "tail", tail)

    @classmethod
    def zero(cls, dimension: int, field: Field = Field.REAL) -> "ForcingSpec":
        return cls(ForcingKind.ZERO, dimension, field)

    @classmethod
    def constant(cls, vector: Sequence[Scalar], field: Optional[Field] = None) -> "ForcingSpec":
        vec_field = field or infer_field(np.atleast_1d(np.asarray(vector)).tolist())
        vec = make_vector(vector, vec_field)
        return cls(ForcingKind.CONSTANT, vec.shape[0], vec_field, (vec,))

    @classmethod
    def periodic(
        cls, vectors: Sequence[Sequence[Scalar]], field: Optional[Field] = None
    ) -> "ForcingSpec":
        flat = [c for v in vectors for c in np.atleast_1d(np.asarray(v)).tolist()]
        vec_field = field or infer_field(flat)
        vecs = tuple(make_vector(v, vec_field) for v in vectors)
        if not vecs:
            raise SpecError("A periodic forcing law needs at least one vector")
        return cls(ForcingKind.PERIODIC, vecs[0].shape[0], vec_field, vecs)

    @classmethod
    def explicit(
        cls,
        vectors: Sequence[Sequence[Scalar]],
        tail: Optional["ForcingSpec"] = None,
        field: Optional[Field] = None
    ) -> "ForcingSpec":
        flat = [c for v in vectors for c in np.atleast_1d(np.asarray(v)).tolist()]
        vec_field = field or (tail.field if tail is not None else infer_field(flat))
        vecs = tuple(make_vector(v, vec_field) for v in vectors)
        if not vecs and tail is None:
            raise SpecError("An empty explicit forcing list needs a tail law")
        dimension = vecs[0].shape[0] if vecs else tail.dimension  # type: ignore[union-attr]
        return cls(ForcingKind.EXPLICIT, dimension, vec_field, vecs, tail)

    def to_dict(self) -> dict:
        def encode(v: np.ndarray) -> list:
            if self.field is Field.COMPLEX:
                return [[c.real, c.imag] for c in v.tolist()]
            return v.tolist()

        data: dict = {"kind": self.kind.value}
        if self.kind is ForcingKind.CONSTANT:
            data["vector"] = encode(self.vectors[0])
        elif self.kind in (ForcingKind.PERIODIC, ForcingKind.EXPLICIT):
            data["vectors"] = [encode(v) for v in self.vectors]
        if self.kind is ForcingKind.EXPLICIT and self.tail is not None:
            data["tail"] = self.tail.to_dict()
        return data


def forcing_at(spec: ForcingSpec, n: int) -> np.ndarray:
    """Return b_n according to the specification's law"""
    if n < 0:
        raise IndexOutOfRangeError(f"Forcing index must be nonnegative, got {n}")
    if spec.kind is ForcingKind.ZERO:
        return zero_vector(spec.dimension, spec.field)
    if spec.kind is ForcingKind.CONSTANT:
        return spec.vectors[0]
    if spec.kind is ForcingKind.PERIODIC:
        return spec.vectors[n % len(spec.vectors)]
    if n < len(spec.vectors):
        return spec.vectors[n]
    return forcing_at(spec.tail, n - len(spec.vectors))  # type: ignore[arg-type]


# Regimes


class Regime(str, Enum):
    EXPANDING = "expanding"
    CONTRACTING = "contracting"
    CRITICAL = "critical"


@dataclass(frozen=True)
class RegimeClassification:
    """Regime of a coefficient law with the tail moduli it was decided on"""

    regime: Regime
    liminf_abs: float
    limsup_abs: float

    @classmethod
    def from_bounds(cls, liminf_abs: float, limsup_abs: float) -> "RegimeClassification":
        if liminf_abs > 1.0:
            regime = Regime.EXPANDING
        elif limsup_abs < 1.0:
            regime = Regime.CONTRACTING
        else:
            regime = Regime.CRITICAL
        return cls(regime, liminf_abs, limsup_abs)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "liminf_abs": self.liminf_abs,
            "limsup_abs": self.limsup_abs,
        }


__all__ = [
    "EPS",
    "Scalar",
    "ShadowrecError",
    "SpecError",
    "IndexOutOfRangeError",
    "AsymptoticsUnavailableError",
    "DimensionMismatchError",
    "FieldMismatchError",
    "Field",
    "make_scalar",
    "infer_field",
    "make_vector",
    "zero_vector",
    "field_of",
    "check_vector",
    "CompensatedSum",
    "SeminormKind",
    "Seminorm",
    "SeminormFamily",
    "seminorm_eval",
    "CoefficientKind",
    "CoefficientSpec",
    "coeff_at",
    "tail_bounds",
    "ForcingKind",
    "ForcingSpec",
    "forcing_at",
    "Regime",
    "RegimeClassification",
]
