"""Run configuration loading and validation"""

import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .core import (
    CoefficientSpec,
    Field,
    ForcingSpec,
    Seminorm,
    SeminormFamily,
    ShadowrecError,
    make_scalar,
    make_vector,
)
from .recurrence import Sampler, check_horizon, check_sampler
from .sets import BoundSet


logger = logging.getLogger(__name__)

SEED_ENV_VAR = "SHADOWREC_SEED"

TOP_LEVEL_FIELDS = (
    "field", "dimension", "x0", "coefficients", "forcing", "perturbation",
    "seminorms", "horizon", "q", "tolerance", "seed", "sampler", "output",
)


class ConfigError(ShadowrecError, ValueError):
    """Invalid run configuration"""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        location = ""
        if field:
            location = f"field '{field}'"
            if line is not None:
                location += f" (line {line})"
            location += ": "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")
        self.field = field
        self.line = line


@dataclass
class OutputPaths:
    """File names of the per-index CSV and the JSON summary, relative to --out"""

    csv: str = "shadow.csv"
    summary: str = "summary.json"


@dataclass
class RunConfig:
    """Validated description of one shadowing run"""

    coefficients: CoefficientSpec
    perturbation: BoundSet
    horizon: int
    field: Field = Field.REAL
    dimension: int = 1
    x0: Optional[np.ndarray] = None
    forcing: Optional[ForcingSpec] = None
    seminorms: Optional[SeminormFamily] = None
    q: Optional[float] = None
    tolerance: float = 1e-12
    seed: int = 0
    sampler: Sampler = dataclasses.field(default_factory=Sampler.uniform)
    output: OutputPaths = dataclasses.field(default_factory=OutputPaths)

    def __post_init__(self) -> None:
        if self.x0 is None:
            self.x0 = make_vector([0.0] * self.dimension, self.field)
        if self.forcing is None:
            self.forcing = ForcingSpec.zero(self.dimension, self.field)
        if self.seminorms is None:
            self.seminorms = SeminormFamily.normed_space(Seminorm.p_norm(math.inf), self.dimension)

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert configuration to a JSON-compatible dictionary

        Returns:
            Configuration in the input document's schema
        """
        if self.field is Field.COMPLEX:
            x0 = [[c.real, c.imag] for c in self.x0.tolist()]  # type: ignore[union-attr]
        else:
            x0 = self.x0.tolist()  # type: ignore[union-attr]
        return {
            "field": self.field.value,
            "dimension": self.dimension,
            "x0": x0,
            "coefficients": self.coefficients.to_dict(),
            "forcing": self.forcing.to_dict(),  # type: ignore[union-attr]
            "perturbation": self.perturbation.to_dict(),
            "seminorms": {
                "family": self.seminorms.to_list(),  # type: ignore[union-attr]
                "normed": self.seminorms.normed,  # type: ignore[union-attr]
            },
            "horizon": self.horizon,
            "q": self.q,
            "tolerance": self.tolerance,
            "seed": self.seed,
            "sampler": self.sampler.to_dict(),
            "output": {"csv": self.output.csv, "summary": self.output.summary},
        }


def _line_of(text: Optional[str], path: str) -> Optional[int]:
    """Line of the key that ends a dotted path, located by walking its segments"""
    if not text or not path:
        return None
    pos = 0
    for segment in path.split("."):
        if segment.isdigit():
            continue
        found = text.find(f'"{segment}"', pos)
        if found < 0:
            return None
        pos = found
    return text.count("\n", 0, pos) + 1


class _Parser:
    """Walks a configuration mapping, reporting errors with dotted paths"""

    def __init__(self, text: Optional[str] = None):
        self.text = text

    def error(self, path: str, message: str) -> ConfigError:
        return ConfigError(message, field=path, line=_line_of(self.text, path))

    def mapping(self, value: Any, path: str, allowed: Sequence[str]) -> Mapping[str, Any]:
        if not isinstance(value, dict):
            raise self.error(path, f"expected an object, got {type(value).__name__}")
        for key in value:
            if key not in allowed:
                dotted = f"{path}.{key}" if path else key
                raise self.error(dotted, f"unknown field (allowed: {', '.join(allowed)})")
        return value

    def require(self, data: Mapping[str, Any], key: str, path: str) -> Any:
        if key not in data:
            dotted = f"{path}.{key}" if path else key
            raise ConfigError("required field is missing", field=dotted, line=_line_of(self.text, path))
        return data[key]

    def number(self, value: Any, path: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(path, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise self.error(path, "number must be finite")
        return float(value)

    def integer(self, value: Any, path: str) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(path, f"expected an integer, got {value!r}")
        return value

    def scalar(self, value: Any, scalar_field: Field, path: str) -> complex:
        try:
            return make_scalar(value, scalar_field)
        except (ShadowrecError, TypeError, ValueError) as e:
            raise self.error(path, str(e))

    def vector(self, value: Any, scalar_field: Field, dimension: int, path: str) -> np.ndarray:
        if not isinstance(value, list):
            raise self.error(path, f"expected a list of {dimension} components")
        components = [self.scalar(v, scalar_field, f"{path}.{i}") for i, v in enumerate(value)]
        try:
            return make_vector(components, scalar_field, dimension)
        except ShadowrecError as e:
            raise self.error(path, str(e))

    def vectors(self, value: Any, scalar_field: Field, dimension: int, path: str) -> List[np.ndarray]:
        if not isinstance(value, list):
            raise self.error(path, "expected a list of vectors")
        return [self.vector(v, scalar_field, dimension, f"{path}.{i}") for i, v in enumerate(value)]

    def coefficients(self, value: Any, scalar_field: Field) -> CoefficientSpec:
        path = "coefficients"
        kind = self.require(self.mapping(value, path, ("kind", "value", "values", "prefix", "tail")),
                            "kind", path)
        try:
            if kind == "constant":
                self.mapping(value, path, ("kind", "value"))
                a = self.scalar(self.require(value, "value", path), scalar_field, f"{path}.value")
                return CoefficientSpec.constant(a, field=scalar_field)
            if kind in ("periodic", "explicit"):
                self.mapping(value, path, ("kind", "values"))
                raw = self.require(value, "values", path)
                if not isinstance(raw, list):
                    raise self.error(f"{path}.values", "expected a list of scalars")
                values = [self.scalar(v, scalar_field, f"{path}.values.{i}") for i, v in enumerate(raw)]
                if kind == "periodic":
                    return CoefficientSpec.periodic(values, field=scalar_field)
                return CoefficientSpec.explicit(values, field=scalar_field)
            if kind == "eventually_constant":
                self.mapping(value, path, ("kind", "prefix", "tail"))
                raw = self.require(value, "prefix", path)
                if not isinstance(raw, list):
                    raise self.error(f"{path}.prefix", "expected a list of scalars")
                prefix = [self.scalar(v, scalar_field, f"{path}.prefix.{i}") for i, v in enumerate(raw)]
                tail = self.scalar(self.require(value, "tail", path), scalar_field, f"{path}.tail")
                return CoefficientSpec.eventually_constant(prefix, tail, field=scalar_field)
        except ConfigError:
            raise
        except ShadowrecError as e:
            raise self.error(path, str(e))
        raise self.error(
            f"{path}.kind",
            f"unknown coefficient law {kind!r} (use constant, periodic, eventually_constant or explicit)"
        )

    def forcing(self, value: Any, scalar_field: Field, dimension: int, path: str = "forcing") -> ForcingSpec:
        kind = self.require(self.mapping(value, path, ("kind", "vector", "vectors", "tail")),
                            "kind", path)
        try:
            if kind == "zero":
                self.mapping(value, path, ("kind",))
                return ForcingSpec.zero(dimension, scalar_field)
            if kind == "constant":
                self.mapping(value, path, ("kind", "vector"))
                vec = self.vector(self.require(value, "vector", path), scalar_field, dimension,
                                  f"{path}.vector")
                return ForcingSpec.constant(vec, scalar_field)
            if kind == "periodic":
                self.mapping(value, path, ("kind", "vectors"))
                vecs = self.vectors(self.require(value, "vectors", path), scalar_field, dimension,
                                    f"{path}.vectors")
                return ForcingSpec.periodic(vecs, scalar_field)
            if kind == "explicit":
                self.mapping(value, path, ("kind", "vectors", "tail"))
                vecs = self.vectors(self.require(value, "vectors", path), scalar_field, dimension,
                                    f"{path}.vectors")
                tail = None
                if "tail" in value:
                    tail = self.forcing(value["tail"], scalar_field, dimension, f"{path}.tail")
                return ForcingSpec.explicit(vecs, tail or ForcingSpec.zero(dimension, scalar_field), scalar_field)
        except ConfigError:
            raise
        except ShadowrecError as e:
            raise self.error(path, str(e))
        raise self.error(f"{path}.kind", f"unknown forcing law {kind!r} (use zero, constant, periodic or explicit)")

    def seminorm(self, value: Any, dimension: int, path: str) -> Seminorm:
        kind = self.require(self.mapping(value, path, ("kind", "p", "weights")), "kind", path)
        try:
            if kind == "p":
                self.mapping(value, path, ("kind", "p"))
                p = self.require(value, "p", path)
                if p == "inf":
                    return Seminorm.p_norm(math.inf)
                return Seminorm.p_norm(self.number(p, f"{path}.p"))
            if kind == "weighted_sup":
                self.mapping(value, path, ("kind", "weights"))
                raw = self.require(value, "weights", path)
                if not isinstance(raw, list) or len(raw) != dimension:
                    raise self.error(f"{path}.weights", f"expected {dimension} positive weights")
                return Seminorm.weighted_sup([self.number(w, f"{path}.weights.{i}") for i, w in enumerate(raw)])
        except ConfigError:
            raise
        except ShadowrecError as e:
            raise self.error(path, str(e))
        raise self.error(f"{path}.kind", f"unknown seminorm {kind!r} (use p or weighted_sup)")

    def seminorms(self, value: Any, dimension: int) -> SeminormFamily:
        path = "seminorms"
        normed = False
        if isinstance(value, dict):
            self.mapping(value, path, ("family", "normed"))
            normed = value.get("normed", False)
            if not isinstance(normed, bool):
                raise self.error(f"{path}.normed", "expected true or false")
            value = self.require(value, "family", path)
            path = f"{path}.family"
        if not isinstance(value, list) or not value:
            raise self.error(path, "expected a nonempty list of seminorms")
        family = [self.seminorm(v, dimension, f"{path}.{i}") for i, v in enumerate(value)]
        try:
            return SeminormFamily(tuple(family), dimension, normed)
        except ShadowrecError as e:
            raise self.error(path, str(e))

    def perturbation(self, value: Any, scalar_field: Field, dimension: int) -> BoundSet:
        path = "perturbation"
        kind = self.require(
            self.mapping(value, path, ("kind", "seminorm", "radius", "lo", "hi", "vertices", "points")),
            "kind", path
        )
        try:
            if kind == "ball":
                self.mapping(value, path, ("kind", "seminorm", "radius"))
                seminorm = self.seminorm(self.require(value, "seminorm", path), dimension, f"{path}.seminorm")
                radius = self.number(self.require(value, "radius", path), f"{path}.radius")
                if radius <= 0.0:
                    raise self.error(f"{path}.radius", "radius must be positive")
                return BoundSet.ball(seminorm, radius, dimension, scalar_field)
            if kind == "interval":
                self.mapping(value, path, ("kind", "lo", "hi"))
                if scalar_field is not Field.REAL or dimension != 1:
                    raise self.error(path, "intervals need the real field and dimension 1")
                lo = self.number(self.require(value, "lo", path), f"{path}.lo")
                hi = self.number(self.require(value, "hi", path), f"{path}.hi")
                if lo > hi:
                    raise self.error(path, f"empty interval [{lo}, {hi}]")
                return BoundSet.interval(lo, hi)
            if kind in ("polytope", "points"):
                key = "vertices" if kind == "polytope" else "points"
                self.mapping(value, path, ("kind", key))
                if scalar_field is not Field.REAL:
                    raise self.error(
                        path,
                        f"{kind} sets are only supported over the real field; use a ball for complex runs"
                    )
                pts = self.vectors(self.require(value, key, path), Field.REAL, dimension, f"{path}.{key}")
                if not pts:
                    raise self.error(f"{path}.{key}", "expected at least one point")
                if kind == "polytope":
                    return BoundSet.polytope(pts)
                return BoundSet.finite_points(pts)
        except ConfigError:
            raise
        except ShadowrecError as e:
            raise self.error(path, str(e))
        raise self.error(f"{path}.kind", f"unknown set {kind!r} (use ball, interval, polytope or points)")

    def sampler(self, value: Any, scalar_field: Field, dimension: int) -> Sampler:
        path = "sampler"
        kind = self.require(self.mapping(value, path, ("kind", "vector")), "kind", path)
        if kind == "uniform":
            self.mapping(value, path, ("kind",))
            return Sampler.uniform()
        if kind == "vertex":
            self.mapping(value, path, ("kind",))
            return Sampler.vertex()
        if kind == "constant":
            vec = self.vector(self.require(value, "vector", path), scalar_field, dimension, f"{path}.vector")
            return Sampler.constant(vec, scalar_field)
        raise self.error(f"{path}.kind", f"unknown sampler {kind!r} (use uniform, vertex or constant)")

    def output(self, value: Any) -> OutputPaths:
        data = self.mapping(value, "output", ("csv", "summary"))
        paths = OutputPaths()
        for key in ("csv", "summary"):
            if key in data:
                if not isinstance(data[key], str) or not data[key]:
                    raise self.error(f"output.{key}", "expected a file name")
                setattr(paths, key, data[key])
        return paths


def parse_run_config(data: Any, text: Optional[str] = None) -> RunConfig:
    """
    Validate a configuration mapping and build a RunConfig

    Args:
        data: Decoded JSON document
        text: Source text, used to report line numbers

    Returns:
        RunConfig with every specification constructed

    Raises:
        ConfigError: On the first invalid or unknown field
    """
    parser = _Parser(text)
    doc = parser.mapping(data, "", TOP_LEVEL_FIELDS)

    field_name = doc.get("field", "real")
    if field_name not in ("real", "complex"):
        raise parser.error("field", f"expected 'real' or 'complex', got {field_name!r}")
    scalar_field = Field(field_name)

    dimension = parser.integer(doc.get("dimension", 1), "dimension")
    if dimension < 1:
        raise parser.error("dimension", "dimension must be at least 1")

    coefficients = parser.coefficients(parser.require(doc, "coefficients", ""), scalar_field)
    perturbation = parser.perturbation(parser.require(doc, "perturbation", ""), scalar_field, dimension)

    horizon = parser.integer(parser.require(doc, "horizon", ""), "horizon")
    if horizon < 2:
        raise parser.error("horizon", f"horizon must be at least 2, got {horizon}")
    try:
        check_horizon(coefficients, horizon)
    except ShadowrecError as e:
        raise parser.error("horizon", str(e))

    x0 = parser.vector(doc["x0"], scalar_field, dimension, "x0") if "x0" in doc \
        else make_vector([0.0] * dimension, scalar_field)
    forcing = parser.forcing(doc["forcing"], scalar_field, dimension) if "forcing" in doc \
        else ForcingSpec.zero(dimension, scalar_field)
    seminorms = parser.seminorms(doc["seminorms"], dimension) if "seminorms" in doc else None

    q = None
    if doc.get("q") is not None:
        q = parser.number(doc["q"], "q")

    tolerance = parser.number(doc.get("tolerance", 1e-12), "tolerance")
    if tolerance <= 0.0:
        raise parser.error("tolerance", f"tolerance must be positive, got {tolerance}")

    seed = parser.integer(doc.get("seed", 0), "seed")
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR}={env_seed!r} is not an integer", field="seed")
        logger.debug(f"Seed overridden by {SEED_ENV_VAR}: {seed}")

    sampler = parser.sampler(doc["sampler"], scalar_field, dimension) if "sampler" in doc \
        else Sampler.uniform()
    try:
        check_sampler(sampler, perturbation)
    except ShadowrecError as e:
        raise parser.error("sampler", str(e))

    output = parser.output(doc["output"]) if "output" in doc else OutputPaths()

    return RunConfig(
        coefficients=coefficients,
        perturbation=perturbation,
        horizon=horizon,
        field=scalar_field,
        dimension=dimension,
        x0=x0,
        forcing=forcing,
        seminorms=seminorms,
        q=q,
        tolerance=tolerance,
        seed=seed,
        sampler=sampler,
        output=output,
    )


def _read_json(path: Path) -> Tuple[Any, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"File not found: {path}")
    except UnicodeDecodeError:
        raise ConfigError(
            f"Unable to decode {path} as UTF-8\n"
            "Please ensure the file is saved with UTF-8 encoding"
        )
    except OSError as e:
        raise ConfigError(f"Failed to read {path}: {e}")

    try:
        return json.loads(text), text
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg} (column {e.colno})", line=e.lineno)


def load_run_config(path: Path) -> RunConfig:
    """
    Load and validate a UTF-8 JSON run configuration

    Args:
        path: Configuration file

    Returns:
        RunConfig instance

    Raises:
        ConfigError: If the file is missing, unreadable, not JSON or invalid
    """
    data, text = _read_json(path)
    config = parse_run_config(data, text)
    logger.info(f"Loaded configuration from {path}")
    return config


def parse_set_document(data: Any, text: Optional[str] = None) -> BoundSet:
    """
    Build a real perturbation set from ``{"dimension": d, "perturbation": {...}}``

    The perturbation object uses the run configuration's schema; the
    dimension defaults to 1.

    Raises:
        ConfigError: On invalid or unknown fields
    """
    parser = _Parser(text)
    doc = parser.mapping(data, "", ("dimension", "perturbation"))
    dimension = parser.integer(doc.get("dimension", 1), "dimension")
    if dimension < 1:
        raise parser.error("dimension", "dimension must be at least 1")
    return parser.perturbation(parser.require(doc, "perturbation", ""), Field.REAL, dimension)


def load_set_document(path: Path) -> BoundSet:
    """Load a perturbation set file (see parse_set_document)"""
    data, text = _read_json(path)
    bound_set = parse_set_document(data, text)
    logger.info(f"Loaded {bound_set.kind.value} set of dimension {bound_set.dimension} from {path}")
    return bound_set


__all__ = [
    "SEED_ENV_VAR",
    "ConfigError",
    "OutputPaths",
    "RunConfig",
    "parse_run_config",
    "load_run_config",
    "parse_set_document",
    "load_set_document",
]
