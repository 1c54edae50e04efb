"""Shadow orbits, stability constants and divergence certificates"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .core import (
    EPS,
    CoefficientKind,
    CoefficientSpec,
    CompensatedSum,
    Field,
    ForcingKind,
    ForcingSpec,
    Regime,
    RegimeClassification,
    Scalar,
    Seminorm,
    SeminormFamily,
    ShadowrecError,
    SpecError,
    coeff_at,
    forcing_at,
    make_vector,
    seminorm_eval,
    tail_bounds,
)
from .recurrence import (
    Orbit,
    PseudoOrbit,
    coefficient_array,
    defects,
    log_abs_prefix,
    partial_product_abs,
    propagate,
)
from .sets import BoundSet, HullRep, contains, scale, sup_norm_over, symmetric_convex_hull


logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-12

# Cap on series terms summed from a declared defect law
MAX_SERIES_TERMS = 1_000_000

DIVERGENCE_CEILING = 1e12

# Audit rows may exceed the predicted bound r/(r-1) by at most this factor
AUDIT_BOUND_FACTOR = 100.0

AUDIT_MAX_HORIZON = 1000


class RegimeError(ShadowrecError, ValueError):
    """Coefficient law outside the regime a construction requires"""
    pass


class HorizonInsufficientError(ShadowrecError, ValueError):
    """Pseudo-orbit too short to reach the requested truncation tolerance"""

    def __init__(self, message: str, required_horizon: Optional[int] = None):
        super().__init__(message)
        self.required_horizon = required_horizon


def classify_regime(coefficients: CoefficientSpec) -> RegimeClassification:
    """
    Classify a coefficient law as expanding, contracting or critical

    Raises:
        AsymptoticsUnavailableError: For explicit coefficient lists
    """
    liminf_abs, limsup_abs = tail_bounds(coefficients)
    classification = RegimeClassification.from_bounds(liminf_abs, limsup_abs)
    logger.debug(
        f"Regime {classification.regime.value}: liminf|a_n|={liminf_abs}, limsup|a_n|={limsup_abs}"
    )
    return classification


def _first_index_from(coefficients: CoefficientSpec, holds: Callable[[float], bool]) -> int:
    # the tail law satisfies the predicate, so only the prefix needs scanning
    n0 = 0
    if coefficients.kind is CoefficientKind.EVENTUALLY_CONSTANT:
        for k, value in enumerate(coefficients.values):
            if not holds(abs(value)):
                n0 = k + 1
    return n0


def _critical_message(classification: RegimeClassification) -> str:
    return (
        f"Coefficient law is in the critical regime "
        f"(liminf|a_n|={classification.liminf_abs}, limsup|a_n|={classification.limsup_abs}).\n"
        "No shadow construction applies when liminf|a_n| <= 1 <= limsup|a_n|.\n"
        "Use 'shadowrec audit' to explore this boundary empirically."
    )


def choose_q(coefficients: CoefficientSpec, q_override: Optional[float] = None) -> Tuple[float, int]:
    """
    Choose the ratio q and the index n0 from which it bounds |a_n|

    Expanding laws: q in (1, liminf|a_n|), default the midpoint, and
    |a_n| >= q for n >= n0. Contracting laws: q in (limsup|a_n|, 1),
    default the midpoint, and |a_n| <= q for n >= n0.

    Raises:
        RegimeError: For critical laws or an override outside the open interval
    """
    classification = classify_regime(coefficients)

    if classification.regime is Regime.EXPANDING:
        lo, hi = 1.0, classification.liminf_abs
        q = (lo + hi) / 2.0 if q_override is None else float(q_override)
        if not lo < q < hi:
            raise RegimeError(
                f"q={q} is outside (1, liminf|a_n|) = (1, {hi}).\n"
                "Pick q strictly between 1 and the liminf of |a_n|."
            )
        n0 = _first_index_from(coefficients, lambda m: m >= q)
    elif classification.regime is Regime.CONTRACTING:
        lo, hi = classification.limsup_abs, 1.0
        q = (lo + hi) / 2.0 if q_override is None else float(q_override)
        if not lo < q < hi:
            raise RegimeError(
                f"q={q} is outside (limsup|a_n|, 1) = ({lo}, 1).\n"
                "Pick q strictly between the limsup of |a_n| and 1."
            )
        n0 = _first_index_from(coefficients, lambda m: m <= q)
    else:
        raise RegimeError(_critical_message(classification))

    logger.debug(f"Chose q={q}, n0={n0}")
    return q, n0


class SeriesEstimate(NamedTuple):
    value: np.ndarray
    truncation_bound: float
    terms_used: int


def _radius_norms(family: SeminormFamily, hull: HullRep) -> List[Seminorm]:
    return list(family.seminorms) + [hull.native_norm]


def _max_norm(norms: Sequence[Seminorm], vec: np.ndarray) -> float:
    return max(norm(vec) for norm in norms)


def _law_radius(law: ForcingSpec, norms: Sequence[Seminorm]) -> float:
    if law.kind is ForcingKind.ZERO:
        return 0.0
    vectors = list(law.vectors)
    if law.tail is not None:
        vectors.extend(law.tail.vectors)
    return max((_max_norm(norms, v) for v in vectors), default=0.0)


class _TailSums:
    """
    Sums of sum_k c_{j+k} / (a_j ... a_{j+k}) over a pseudo-orbit

    Defects come from the recorded trajectory up to its horizon, then from
    the declared defect law when there is one. Tail bounds use the largest
    defect still ahead (recorded or future) and the ratio q from n0 on.
    """

    def __init__(
        self,
        recorded: np.ndarray,
        law: Optional[ForcingSpec],
        coefficients: CoefficientSpec,
        q: float,
        n0: int,
        norms: Sequence[Seminorm],
        set_radius: float
    ):
        self.recorded = recorded
        self.law = law
        self.coefficients = coefficients
        self.q = q
        self.n0 = n0
        self.horizon = recorded.shape[0]
        self.future_radius = _law_radius(law, norms) if law is not None else set_radius

        radii = np.array([_max_norm(norms, c) for c in recorded] + [0.0])
        self.suffix_radii = np.maximum.accumulate(radii[::-1])[::-1]

    def radius_from(self, j: int) -> float:
        if j < self.horizon:
            return max(float(self.suffix_radii[j]), self.future_radius)
        return self.future_radius

    def defect(self, j: int) -> np.ndarray:
        if j < self.horizon:
            return self.recorded[j]
        return forcing_at(self.law, j)  # type: ignore[arg-type]

    def unknown_tail_factor(self, j: int) -> float:
        """Bound on sum_k 1/|a_j ... a_{j+k}| over all k >= 0"""
        total, log_prod = 0.0, 0.0
        for k in range(j, max(j, self.n0)):
            log_prod += math.log(abs(coeff_at(self.coefficients, k)))
            total += math.exp(-log_prod)
        return total + math.exp(-log_prod) / (self.q - 1.0)

    def required_horizon(self, tol: float) -> int:
        start = max(self.horizon, self.n0)
        log_prod = float(log_abs_prefix(coefficient_array(self.coefficients, start))[-1])
        bound = self.future_radius * math.exp(-log_prod) / (self.q - 1.0)
        if bound <= tol:
            return start
        return start + math.ceil(math.log(bound / tol) / math.log(self.q))

    def sum_from(self, start: int, tol: float) -> SeriesEstimate:
        """
        Sum the tail series anchored at ``start`` until its bound is below tol

        Raises:
            HorizonInsufficientError: If the recorded defects run out first
        """
        dimension = self.recorded.shape[1]
        complex_sum = np.iscomplexobj(self.recorded) or self.coefficients.field is Field.COMPLEX
        acc = CompensatedSum(dimension, Field.COMPLEX if complex_sum else Field.REAL)

        weight: Scalar = 1.0
        log_prod = 0.0
        j = start
        while True:
            if j >= self.n0:
                radius = self.radius_from(j)
                bound = radius * math.exp(-log_prod) / (self.q - 1.0) if radius > 0.0 else 0.0
                if bound <= tol:
                    logger.debug(
                        f"Series from n={start}: {j - start} terms, truncation bound {bound:.3g}"
                    )
                    return SeriesEstimate(acc.value, bound, j - start)
            if (j >= self.horizon and self.law is None) or j - start >= MAX_SERIES_TERMS:
                required = self.required_horizon(tol) if self.law is None else None
                current = self.radius_from(j) * math.exp(-log_prod) / (self.q - 1.0)
                raise HorizonInsufficientError(
                    f"Horizon N={self.horizon} leaves a truncation bound of {current:.3g} "
                    f"above tol={tol:.3g}.\n"
                    f"Increase the horizon to at least {required} or loosen the tolerance.",
                    required_horizon=required
                )
            a = coeff_at(self.coefficients, j)
            weight = weight / a
            log_prod += math.log(abs(a))
            acc.add(self.defect(j) * weight)
            j += 1


def _rebase(pseudo_orbit: PseudoOrbit, coefficients: CoefficientSpec, forcing: ForcingSpec) -> PseudoOrbit:
    # defects are always measured against the laws the construction uses
    if coefficients is pseudo_orbit.coefficients and forcing is pseudo_orbit.forcing:
        return pseudo_orbit
    return PseudoOrbit.from_states(
        pseudo_orbit.states, coefficients, forcing, pseudo_orbit.bound_set, pseudo_orbit.defect_law
    )


def _tail_sums(
    pseudo_orbit: PseudoOrbit,
    coefficients: CoefficientSpec,
    family: SeminormFamily,
    q: float,
    n0: int
) -> Tuple[_TailSums, HullRep]:
    if pseudo_orbit.dimension != family.dimension:
        raise SpecError(
            f"Seminorm family on dimension {family.dimension} used with a pseudo-orbit "
            f"of dimension {pseudo_orbit.dimension}"
        )
    hull = symmetric_convex_hull(pseudo_orbit.bound_set)
    norms = _radius_norms(family, hull)
    set_radius = max(sup_norm_over(pseudo_orbit.bound_set, norm) for norm in norms)
    sums = _TailSums(
        pseudo_orbit.defects, pseudo_orbit.defect_law, coefficients, q, n0, norms, set_radius
    )
    return sums, hull


def series_s(
    pseudo_orbit: PseudoOrbit,
    coefficients: CoefficientSpec,
    family: SeminormFamily,
    tol: float = DEFAULT_TOLERANCE,
    q_override: Optional[float] = None
) -> SeriesEstimate:
    """
    s = sum_n c_n / (a_0 ... a_n), summed until the tail bound is below tol

    Args:
        pseudo_orbit: Pseudo-orbit supplying the defects
        coefficients: Expanding coefficient law
        family: Seminorm family the bound must hold in
        tol: Truncation tolerance
        q_override: Ratio q, defaults to the midpoint of (1, liminf|a_n|)

    Returns:
        SeriesEstimate with the value, its truncation bound and the number of terms

    Raises:
        RegimeError: If the law is not expanding
        HorizonInsufficientError: If the pseudo-orbit is too short for tol
    """
    if tol <= 0.0:
        raise SpecError(f"Tolerance must be positive, got {tol}")
    _require_regime(coefficients, Regime.EXPANDING)
    q, n0 = choose_q(coefficients, q_override)
    rebased = _rebase(pseudo_orbit, coefficients, pseudo_orbit.forcing)
    sums, _ = _tail_sums(rebased, coefficients, family, q, n0)
    return sums.sum_from(0, tol)


def tail_difference(
    pseudo_orbit: PseudoOrbit,
    coefficients: CoefficientSpec,
    n: int,
    family: SeminormFamily,
    tol: float = DEFAULT_TOLERANCE,
    q_override: Optional[float] = None
) -> Tuple[np.ndarray, float]:
    """
    x_n - y_n for the unique shadow, as minus the tail series anchored at n

    Returns:
        (difference, truncation bound)

    Raises:
        HorizonInsufficientError: If the pseudo-orbit is too short for tol
    """
    if not 0 <= n <= pseudo_orbit.horizon:
        raise SpecError(f"Index {n} outside the pseudo-orbit horizon 0..{pseudo_orbit.horizon}")
    _require_regime(coefficients, Regime.EXPANDING)
    q, n0 = choose_q(coefficients, q_override)
    rebased = _rebase(pseudo_orbit, coefficients, pseudo_orbit.forcing)
    sums, _ = _tail_sums(rebased, coefficients, family, q, n0)
    estimate = sums.sum_from(n, tol)
    diff = -estimate.value
    diff.setflags(write=False)
    return diff, estimate.truncation_bound


def _require_regime(coefficients: CoefficientSpec, regime: Regime) -> RegimeClassification:
    classification = classify_regime(coefficients)
    if classification.regime is Regime.CRITICAL:
        raise RegimeError(_critical_message(classification))
    if classification.regime is not regime:
        raise RegimeError(
            f"This construction needs the {regime.value} regime, "
            f"but the coefficient law is {classification.regime.value}"
        )
    return classification


def required_horizon(
    coefficients: CoefficientSpec,
    bound_set: BoundSet,
    family: SeminormFamily,
    tol: float = DEFAULT_TOLERANCE,
    q_override: Optional[float] = None
) -> int:
    """
    Smallest horizon N whose worst-case truncation bound for s is at most tol

    Defects beyond N are only known to lie in V, so the bound is
    R / ((q - 1) |a_0 ... a_{N-1}|) with R the largest seminorm over V.

    Raises:
        RegimeError: If the law is not expanding
    """
    _require_regime(coefficients, Regime.EXPANDING)
    q, n0 = choose_q(coefficients, q_override)
    norms = _radius_norms(family, symmetric_convex_hull(bound_set))
    radius = max(sup_norm_over(bound_set, norm) for norm in norms)
    log_prod = 0.0
    for j in range(MAX_SERIES_TERMS):
        if j >= n0 and radius * math.exp(-log_prod) / (q - 1.0) <= tol:
            return j
        log_prod += math.log(abs(coeff_at(coefficients, j)))
    raise HorizonInsufficientError(f"No horizon below {MAX_SERIES_TERMS} reaches tol={tol:.3g}")


class ShadowVariant(str, Enum):
    EXPANDING = "expanding"
    CONSTANT_EXPANDING = "constant_expanding"
    CONTRACTING = "contracting"
    CONSTANT_CONTRACTING = "constant_contracting"


@dataclass(frozen=True, eq=False)
class IndexVerdict:
    """Containment of x_n - y_n in the error set at one index"""

    n: int
    diff: np.ndarray
    distances: Tuple[float, ...]
    truncation_bound: float
    tolerance: float
    guaranteed: bool
    contained: bool


@dataclass(frozen=True, eq=False)
class ShadowResult:
    """
    Exact orbit y shadowing a pseudo-orbit, with its error set and verdicts

    ``tolerance`` in each IndexVerdict is the total slack the containment
    test used (user tol + truncation bound + floating-point slack).
    """

    variant: ShadowVariant
    regime: RegimeClassification
    y: Orbit
    pseudo_orbit: PseudoOrbit
    s: np.ndarray
    q: float
    n0: int
    stability_constant: float
    error_set: HullRep
    containment: Tuple[IndexVerdict, ...]
    truncation_bound: float
    terms_used: int
    tolerance: float
    diagnostics: Dict[str, float] = field(default_factory=dict)

    @property
    def verdict(self) -> bool:
        """All guaranteed containments hold"""
        return all(v.contained for v in self.containment if v.guaranteed)

    @property
    def failures(self) -> List[int]:
        return [v.n for v in self.containment if v.guaranteed and not v.contained]

    @property
    def differences(self) -> np.ndarray:
        return np.array([v.diff for v in self.containment])


def _verdicts(
    diffs: np.ndarray,
    bounds: np.ndarray,
    slack: np.ndarray,
    error_set: HullRep,
    family: SeminormFamily,
    n0: int,
    tol: float
) -> Tuple[IndexVerdict, ...]:
    out = []
    for n in range(diffs.shape[0]):
        diff = diffs[n]
        total = tol + float(bounds[n]) + float(slack[n])
        out.append(IndexVerdict(
            n=n,
            diff=diff,
            distances=family.evaluate_all(diff),
            truncation_bound=float(bounds[n]),
            tolerance=total,
            guaranteed=n >= n0,
            contained=contains(error_set, diff, total),
        ))
    return tuple(out)


def _max_residual(y: Orbit, coefficients: CoefficientSpec, forcing: ForcingSpec) -> float:
    if y.horizon < 1:
        return 0.0
    residuals = defects(y.states, coefficients, forcing)
    return float(np.max(np.abs(residuals)))


def _log_result(result: ShadowResult) -> None:
    if result.verdict:
        logger.info(
            f"{result.variant.value} shadow: q={result.q}, n0={result.n0}, "
            f"constant={result.stability_constant}, all guaranteed containments hold"
        )
    else:
        logger.warning(
            f"{result.variant.value} shadow: {len(result.failures)} guaranteed containments fail "
            f"(first at n={result.failures[0]})"
        )


def _expanding_shadow(
    variant: ShadowVariant,
    pseudo_orbit: PseudoOrbit,
    coefficients: CoefficientSpec,
    forcing: ForcingSpec,
    family: SeminormFamily,
    q: float,
    n0: int,
    stability_constant: float,
    tol: float
) -> ShadowResult:
    if tol <= 0.0:
        raise SpecError(f"Tolerance must be positive, got {tol}")
    classification = classify_regime(coefficients)
    rebased = _rebase(pseudo_orbit, coefficients, forcing)
    if rebased.violations:
        logger.warning(
            f"{len(rebased.violations)} defects lie outside the perturbation set; "
            "the containment guarantee does not cover them"
        )
    sums, hull = _tail_sums(rebased, coefficients, family, q, n0)
    series = sums.sum_from(0, tol)

    horizon = rebased.horizon
    a = coefficient_array(coefficients, horizon)
    log_prefix = log_abs_prefix(a)

    # T_N starts the backward recursion T_n = (c_n + T_{n+1}) / a_n
    if rebased.defect_law is not None:
        end = sums.sum_from(horizon, tol)
        tail_end, bound_end = end.value, end.truncation_bound
    else:
        tail_end = np.zeros(rebased.dimension, dtype=rebased.states.dtype)
        bound_end = sums.future_radius * sums.unknown_tail_factor(horizon)

    dtype = np.result_type(rebased.states.dtype, a.dtype)
    tails = np.zeros((horizon + 1, rebased.dimension), dtype=dtype)
    tails[horizon] = tail_end
    for n in range(horizon - 1, -1, -1):
        tails[n] = (rebased.defects[n] + tails[n + 1]) / a[n]
    tails[0] = series.value

    bounds = bound_end * np.exp(-(log_prefix[horizon] - log_prefix))
    bounds[0] = series.truncation_bound

    states = rebased.states + tails
    states.setflags(write=False)
    y = Orbit(states, coefficients, forcing)
    diffs = -tails

    error_set = scale(hull, stability_constant)
    native = hull.native_norm
    radius = sums.future_radius
    steps_left = horizon - np.arange(horizon + 1) + 1
    magnitudes = np.array([native(x) + native(v) for x, v in zip(rebased.states, states)])
    slack = 8.0 * EPS * steps_left * (magnitudes + radius * stability_constant)

    containment = _verdicts(diffs, bounds, slack, error_set, family, n0, tol)
    # indices near the horizon whose verdict rests on a loose truncation bound
    loose = int(np.count_nonzero(bounds > tol))
    if loose:
        logger.info(f"{loose} indices carry a truncation bound above tol={tol:g}")
    s = series.value
    result = ShadowResult(
        variant=variant,
        regime=classification,
        y=y,
        pseudo_orbit=rebased,
        s=s,
        q=q,
        n0=n0,
        stability_constant=stability_constant,
        error_set=error_set,
        containment=containment,
        truncation_bound=series.truncation_bound,
        terms_used=series.terms_used,
        tolerance=tol,
        diagnostics={
            "max_residual": _max_residual(y, coefficients, forcing),
            "defect_violations": float(len(rebased.violations)),
            "defect_radius": radius,
            "loose_indices": float(loose),
        },
    )
    _log_result(result)
    return result


def shadow_expanding(
    pseudo_orbit: PseudoOrbit,
    coefficients: CoefficientSpec,
    forcing: ForcingSpec,
    family: SeminormFamily,
    q_override: Optional[float] = None,
    tol: float = DEFAULT_TOLERANCE
) -> ShadowResult:
    """
    Unique bounded shadow of a pseudo-orbit when liminf|a_n| > 1

    y_0 = x_0 + s and y_n = x_n + sum_k c_{n+k} / (a_n ... a_{n+k}), so that
    x_n - y_n lies in conv(V^b) / (q - 1) for every n >= n0.

    Args:
        pseudo_orbit: Pseudo-orbit to shadow
        coefficients: Expanding coefficient law
        forcing: Forcing law
        family: Seminorm family for distances and truncation bounds
        q_override: Ratio q in (1, liminf|a_n|)
        tol: Truncation tolerance of the series

    Raises:
        RegimeError: If the law is not expanding
        HorizonInsufficientError: If the pseudo-orbit is too short for tol
    """
    _require_regime(coefficients, Regime.EXPANDING)
    q, n0 = choose_q(coefficients, q_override)
    return _expanding_shadow(
        ShadowVariant.EXPANDING, pseudo_orbit, coefficients, forcing, family,
        q, n0, 1.0 / (q - 1.0), tol
    )


def shadow_constant_expanding(
    pseudo_orbit: PseudoOrbit,
    a: Scalar,
    forcing: ForcingSpec,
    family: SeminormFamily,
    tol: float = DEFAULT_TOLERANCE
) -> ShadowResult:
    """
    Shadow for the constant coefficient a with |a| > 1

    Uses q = |a|, so the error set is conv(V^b) / (|a| - 1) for every n >= 0.
    """
    modulus = abs(a)
    if not modulus > 1.0:
        raise RegimeError(f"Constant expanding shadows need |a| > 1, got |a|={modulus}")
    coefficients = _same_constant(pseudo_orbit, a)
    return _expanding_shadow(
        ShadowVariant.CONSTANT_EXPANDING, pseudo_orbit, coefficients, forcing, family,
        modulus, 0, 1.0 / (modulus - 1.0), tol
    )


def _same_constant(pseudo_orbit: PseudoOrbit, a: Scalar, allow_zero: bool = False) -> CoefficientSpec:
    spec = pseudo_orbit.coefficients
    if spec.kind is CoefficientKind.CONSTANT and spec.values[0] == a:
        return spec
    return CoefficientSpec.constant(a, allow_zero=allow_zero)


def contracting_constant(coefficients: CoefficientSpec, q: float, n0: int) -> float:
    """M = sum_{k=1}^{n0-1} |a_k ... a_{n0-1}| + 1 / (1 - q)"""
    prefix = math.fsum(partial_product_abs(coefficients, k, n0 - 1).value for k in range(1, n0))
    return prefix + 1.0 / (1.0 - q)


def _contracting_shadow(
    variant: ShadowVariant,
    pseudo_orbit: PseudoOrbit,
    coefficients: CoefficientSpec,
    forcing: ForcingSpec,
    family: SeminormFamily,
    q: float,
    n0: int,
    stability_constant: float,
    tol: float
) -> Tuple[ShadowResult, np.ndarray]:
    classification = classify_regime(coefficients)
    rebased = _rebase(pseudo_orbit, coefficients, forcing)
    if rebased.violations:
        logger.warning(
            f"{len(rebased.violations)} defects lie outside the perturbation set; "
            "the containment guarantee does not cover them"
        )
    if rebased.dimension != family.dimension:
        raise SpecError(
            f"Seminorm family on dimension {family.dimension} used with a pseudo-orbit "
            f"of dimension {rebased.dimension}"
        )
    horizon = rebased.horizon
    y = propagate(rebased.states[0], coefficients, forcing, horizon)
    a = coefficient_array(coefficients, horizon)

    # e_{n+1} = a_n e_n + c_n with e_0 = 0 is x_n - y_n without cancellation
    dtype = np.result_type(rebased.states.dtype, a.dtype)
    diffs = np.zeros((horizon + 1, rebased.dimension), dtype=dtype)
    for n in range(horizon):
        diffs[n + 1] = a[n] * diffs[n] + rebased.defects[n]

    hull = symmetric_convex_hull(rebased.bound_set)
    native = hull.native_norm
    radius = sup_norm_over(rebased.bound_set, native)
    steps = np.arange(horizon + 1) + 1
    magnitudes = np.array([native(d) for d in diffs])
    slack = 8.0 * EPS * steps * (magnitudes + radius * stability_constant)

    error_set = scale(hull, stability_constant)
    containment = _verdicts(diffs, np.zeros(horizon + 1), slack, error_set, family, n0, tol)
    result = ShadowResult(
        variant=variant,
        regime=classification,
        y=y,
        pseudo_orbit=rebased,
        s=np.zeros(rebased.dimension, dtype=dtype),
        q=q,
        n0=n0,
        stability_constant=stability_constant,
        error_set=error_set,
        containment=containment,
        truncation_bound=0.0,
        terms_used=0,
        tolerance=tol,
        diagnostics={
            "max_residual": _max_residual(y, coefficients, forcing),
            "defect_violations": float(len(rebased.violations)),
            "defect_radius": radius,
        },
    )
    return result, diffs


def shadow_contracting(
    pseudo_orbit: PseudoOrbit,
    coefficients: CoefficientSpec,
    forcing: ForcingSpec,
    family: SeminormFamily,
    q_override: Optional[float] = None,
    tol: float = DEFAULT_TOLERANCE
) -> ShadowResult:
    """
    Shadow starting at y_0 = x_0 when limsup|a_n| < 1

    The error set is M * conv(V^b) with
    M = sum_{k=1}^{n0-1} |a_k ... a_{n0-1}| + 1 / (1 - q).

    Raises:
        RegimeError: If the law is not contracting
    """
    _require_regime(coefficients, Regime.CONTRACTING)
    q, n0 = choose_q(coefficients, q_override)
    result, _ = _contracting_shadow(
        ShadowVariant.CONTRACTING, pseudo_orbit, coefficients, forcing, family,
        q, n0, contracting_constant(coefficients, q, n0), tol
    )
    _log_result(result)
    return result


def shadow_constant_contracting(
    pseudo_orbit: PseudoOrbit,
    a: Scalar,
    forcing: ForcingSpec,
    family: SeminormFamily,
    tol: float = DEFAULT_TOLERANCE
) -> ShadowResult:
    """
    Shadow for the constant coefficient a with |a| < 1 (a = 0 allowed)

    The differences are cross-checked against
    x_n - y_n = sum_{k=1}^n a^{n-k} c_{k-1}; the largest relative
    discrepancy is reported as ``formula_discrepancy``.
    """
    modulus = abs(a)
    if not modulus < 1.0:
        raise RegimeError(f"Constant contracting shadows need |a| < 1, got |a|={modulus}")
    coefficients = _same_constant(pseudo_orbit, a, allow_zero=True)
    result, diffs = _contracting_shadow(
        ShadowVariant.CONSTANT_CONTRACTING, pseudo_orbit, coefficients, forcing, family,
        modulus, 0, 1.0 / (1.0 - modulus), tol
    )

    recorded = result.pseudo_orbit.defects
    discrepancy = 0.0
    for n in range(1, diffs.shape[0]):
        powers = np.power(complex(a) if isinstance(a, complex) else float(a),
                          np.arange(n - 1, -1, -1))
        expected = powers @ recorded[:n]
        scale_n = max(float(np.max(np.abs(expected))), float(np.max(np.abs(recorded[:n]))), 1e-300)
        discrepancy = max(discrepancy, float(np.max(np.abs(expected - diffs[n]))) / scale_n)
    result.diagnostics["formula_discrepancy"] = discrepancy
    if discrepancy > 1e-10:
        logger.warning(f"Finite-sum cross-check differs by {discrepancy:.3g} (relative)")

    _log_result(result)
    return result


def construct_shadow(
    pseudo_orbit: PseudoOrbit,
    family: SeminormFamily,
    q_override: Optional[float] = None,
    tol: float = DEFAULT_TOLERANCE
) -> ShadowResult:
    """
    Build the shadow matching the regime of the pseudo-orbit's coefficient law

    Constant laws use the sharper constant-coefficient constructions unless a
    q override is given.

    Raises:
        RegimeError: For critical laws
    """
    coefficients = pseudo_orbit.coefficients
    forcing = pseudo_orbit.forcing
    classification = classify_regime(coefficients)
    is_constant = coefficients.kind is CoefficientKind.CONSTANT and q_override is None

    if classification.regime is Regime.EXPANDING:
        if is_constant:
            return shadow_constant_expanding(
                pseudo_orbit, coefficients.values[0], forcing, family, tol
            )
        return shadow_expanding(pseudo_orbit, coefficients, forcing, family, q_override, tol)
    if classification.regime is Regime.CONTRACTING:
        if is_constant:
            return shadow_constant_contracting(
                pseudo_orbit, coefficients.values[0], forcing, family, tol
            )
        return shadow_contracting(pseudo_orbit, coefficients, forcing, family, q_override, tol)
    raise RegimeError(_critical_message(classification))


@dataclass(frozen=True, eq=False)
class DivergenceCertificate:
    """
    Certified lower bounds on the distance between x_n and another exact orbit

    ``lower_bound_log`` holds (n, log of a lower bound on p(x_n - y'_n)) for
    the indices where the bound is positive.
    """

    alt_y0: np.ndarray
    y0: np.ndarray
    offset: float
    uncertainty: float
    lower_bound_log: Tuple[Tuple[int, float], ...]
    verdict: str
    ceiling: float
    ceiling_index: Optional[int]
    seminorm_index: int

    def lower_bound_at(self, n: int) -> float:
        for index, value in self.lower_bound_log:
            if index == n:
                return math.exp(value) if value < 700.0 else math.inf
        return 0.0


def uniqueness_divergence(
    pseudo_orbit: PseudoOrbit,
    coefficients: CoefficientSpec,
    forcing: ForcingSpec,
    alt_y0: Sequence[Scalar],
    horizon: int,
    family: SeminormFamily,
    tol: float = DEFAULT_TOLERANCE,
    ceiling: float = DIVERGENCE_CEILING,
    seminorm_index: int = 0,
    q_override: Optional[float] = None
) -> DivergenceCertificate:
    """
    Certify that the exact orbit from alt_y0 drifts away from the pseudo-orbit

    With delta = (x_0 + s) - alt_y0 and P_n = |a_0 ... a_{n-1}|,
    p(x_n - y'_n) >= P_n * (p(delta) - rho) - R / (q - 1) for n >= n0, where
    rho bounds the uncertainty of s and R bounds p over the defects.

    Args:
        pseudo_orbit: Pseudo-orbit x
        coefficients: Expanding coefficient law
        forcing: Forcing law
        alt_y0: Start of the competing exact orbit
        horizon: Last index certified
        family: Seminorm family
        tol: Truncation tolerance for s
        ceiling: Distance whose first certified crossing is reported
        seminorm_index: Seminorm p of the family the bounds are stated in
        q_override: Ratio q in (1, liminf|a_n|)

    Returns:
        DivergenceCertificate with verdict "diverges" or "inconclusive"
    """
    _require_regime(coefficients, Regime.EXPANDING)
    q, n0 = choose_q(coefficients, q_override)
    rebased = _rebase(pseudo_orbit, coefficients, forcing)
    sums, _ = _tail_sums(rebased, coefficients, family, q, n0)
    series = sums.sum_from(0, tol)

    alt = make_vector(alt_y0, rebased.field, rebased.dimension)
    y0 = rebased.states[0] + series.value
    y0.setflags(write=False)

    def seminorm(v: np.ndarray) -> float:
        return seminorm_eval(family, seminorm_index, v)

    delta = seminorm(y0 - alt)
    uncertainty = max(tol, series.truncation_bound) + 8.0 * EPS * (seminorm(y0) + seminorm(alt))

    p = family[seminorm_index]
    defect_radius = max(
        sup_norm_over(rebased.bound_set, p),
        max((p(c) for c in rebased.defects), default=0.0),
        _law_radius(rebased.defect_law, [p]) if rebased.defect_law is not None else 0.0,
    )
    drift = defect_radius / (q - 1.0)

    lower: List[Tuple[int, float]] = []
    ceiling_index = None
    margin = delta - uncertainty
    if margin > 0.0:
        log_prefix = log_abs_prefix(coefficient_array(coefficients, horizon))
        for n in range(n0, horizon + 1):
            log_p = float(log_prefix[n])
            inner = margin - drift * math.exp(-log_p)
            if inner <= 0.0:
                continue
            value = log_p + math.log(inner)
            lower.append((n, value))
            if ceiling_index is None and value >= math.log(ceiling):
                ceiling_index = n

    verdict = "diverges" if lower else "inconclusive"
    if verdict == "inconclusive":
        logger.warning(
            f"Divergence inconclusive: offset {delta:.3g} against uncertainty {uncertainty:.3g}"
        )
    else:
        logger.info(f"Divergence certified from n={lower[0][0]}; ceiling {ceiling:g} at n={ceiling_index}")

    alt.setflags(write=False)
    return DivergenceCertificate(
        alt_y0=alt,
        y0=y0,
        offset=delta,
        uncertainty=uncertainty,
        lower_bound_log=tuple(lower),
        verdict=verdict,
        ceiling=ceiling,
        ceiling_index=ceiling_index,
        seminorm_index=seminorm_index,
    )


@dataclass(frozen=True)
class AuditRow:
    y0: float
    sup: float
    log_sup: float
    argmax: int
    bounded: bool


@dataclass(frozen=True)
class RemarkAudit:
    """
    Distances between x_{n+1} = r x_n + 1, x_0 = 0 and the exact orbits r^n y_0

    For r > 1 the constant-coefficient construction predicts the bounded
    shadow y_0 = 1/(r-1) with |x_n - y_n| <= r/(r-1) when V = (-r, r).
    A row is bounded when its distance does not grow over the second half
    of the horizon and its sup stays within `limit`.
    """

    r: float
    horizon: int
    limit: float
    rows: Tuple[AuditRow, ...]
    candidate: Optional[AuditRow]
    predicted_y0: Optional[float]
    predicted_constant: Optional[float]
    predicted_bound: Optional[float]

    @property
    def any_bounded(self) -> bool:
        return any(row.bounded for row in self.rows)

    @property
    def min_sup(self) -> float:
        return min((row.sup for row in self.rows), default=math.inf)

    @property
    def divergent_case(self) -> bool:
        """r = 1, where no exact orbit stays close"""
        return self.r == 1.0

    @property
    def contradicts_remark(self) -> bool:
        """A bounded shadow exists although the remark claims none does"""
        return self.candidate is not None and self.candidate.bounded


def audit_grid(lo: float, hi: float, step: float) -> List[float]:
    """Grid lo, lo + step, ..., <= hi with values rounded to 12 decimals"""
    if not step > 0.0 or hi < lo:
        raise SpecError(f"Invalid grid {lo}:{hi}:{step}; need lo <= hi and step > 0")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def _audit_row(r: float, y0: float, horizon: int, limit: float) -> AuditRow:
    n = np.arange(horizon + 1, dtype=float)
    middle = horizon // 2
    if r == 1.0:
        diffs = np.abs(n - y0)
        argmax = int(np.argmax(diffs))
        sup = float(diffs[argmax])
        log_sup = math.log(sup) if sup > 0.0 else -math.inf
        growing = bool(diffs[horizon] > diffs[middle])
        return AuditRow(
            y0=y0, sup=sup, log_sup=log_sup, argmax=argmax, bounded=not growing and sup <= limit
        )

    k = 1.0 / (r - 1.0)
    # x_n - r^n y_0 = r^n (k - y_0) - k
    inner = (k - y0) - k * np.power(r, -n)
    with np.errstate(divide="ignore"):
        logs = n * math.log(r) + np.log(np.abs(inner))
    argmax = int(np.argmax(logs))
    log_sup = float(logs[argmax])
    sup = math.exp(log_sup) if log_sup < 709.0 else math.inf
    growing = bool(logs[horizon] > logs[middle] + 1e-9)
    return AuditRow(
        y0=y0, sup=sup, log_sup=log_sup, argmax=argmax, bounded=not growing and sup <= limit
    )


def audit_limit(r: float, horizon: int, bound_factor: float = AUDIT_BOUND_FACTOR) -> float:
    """
    Largest sup distance an audit row may reach and still count as bounded

    For r > 1 this is bound_factor * r/(r-1). For r = 1 it is a quarter of
    the horizon, below the N/2 that |n - y_0| reaches on 0..N for every y_0.
    """
    if r == 1.0:
        return horizon / 4.0
    return bound_factor * r / (r - 1.0)


def remark_audit(
    r: float,
    grid: Tuple[float, float, float],
    horizon: int,
    bound_factor: float = AUDIT_BOUND_FACTOR
) -> RemarkAudit:
    """
    Audit x_{n+1} - r x_n = 1, x_0 = 0 against the exact orbits y_n = r^n y_0

    Args:
        r: Coefficient in [1, 2)
        grid: (lo, hi, step) of the starting values y_0 tried
        horizon: Last index N (at most 1000)
        bound_factor: Multiple of the predicted bound r/(r-1) a bounded row may reach

    Returns:
        RemarkAudit with one row per grid value plus the analytic candidate

    Raises:
        SpecError: If r is outside [1, 2), the horizon outside 1..1000 or
            bound_factor is not positive
    """
    if not 1.0 <= r < 2.0:
        raise SpecError(f"r must lie in [1, 2), got {r}")
    if not 1 <= horizon <= AUDIT_MAX_HORIZON:
        raise SpecError(f"Audit horizon must lie in 1..{AUDIT_MAX_HORIZON}, got {horizon}")
    if not bound_factor > 0.0:
        raise SpecError(f"Bound factor must be positive, got {bound_factor}")

    limit = audit_limit(r, horizon, bound_factor)
    rows = tuple(_audit_row(r, y0, horizon, limit) for y0 in audit_grid(*grid))

    candidate = None
    predicted_y0 = predicted_constant = predicted_bound = None
    if r > 1.0:
        predicted_y0 = 1.0 / (r - 1.0)
        predicted_constant = 1.0 / (r - 1.0)
        predicted_bound = r / (r - 1.0)
        candidate = _audit_row(r, predicted_y0, horizon, limit)

    audit = RemarkAudit(
        r=r,
        horizon=horizon,
        limit=limit,
        rows=rows,
        candidate=candidate,
        predicted_y0=predicted_y0,
        predicted_constant=predicted_constant,
        predicted_bound=predicted_bound,
    )
    logger.info(
        f"Audit r={r}: {len(rows)} starting values, min sup {audit.min_sup:.6g}, "
        f"bounded shadow {'found' if audit.any_bounded or audit.contradicts_remark else 'not found'}"
    )
    return audit




__all__ = [
    "DEFAULT_TOLERANCE",
    "RegimeError",
    "HorizonInsufficientError",
    "classify_regime",
    "choose_q",
    "SeriesEstimate",
    "series_s",
    "tail_difference",
    "required_horizon",
    "ShadowVariant",
    "IndexVerdict",
    "ShadowResult",
    "shadow_expanding",
    "shadow_constant_expanding",
    "contracting_constant",
    "shadow_contracting",
    "shadow_constant_contracting",
    "construct_shadow",
    "DivergenceCertificate",
    "uniqueness_divergence",
    "AuditRow",
    "RemarkAudit",
    "audit_grid",
    "audit_limit",
    "remark_audit",
]
