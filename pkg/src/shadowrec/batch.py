"""Randomized verification of the shadowing guarantees"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from .config import ConfigError, RunConfig
from .core import (
    CoefficientSpec,
    Field,
    ForcingSpec,
    Regime,
    Scalar,
    Seminorm,
    SeminormFamily,
    ShadowrecError,
    make_vector,
)
from .recurrence import PseudoOrbit, Sampler, generate_pseudo_orbit
from .sets import BoundSet, SetKind, draw_uniform, draw_vertex, gauge
from .shadowing import (
    RegimeError,
    ShadowResult,
    classify_regime,
    construct_shadow,
    required_horizon,
    uniqueness_divergence,
)


logger = logging.getLogger(__name__)

# Steps added to the horizon the truncation tolerance requires
HORIZON_MARGIN = 5

UNIQUENESS_OFFSET = 1e-3

UNIQUENESS_HORIZON = 400

RESIDUAL_RTOL = 1e-9

FORMULA_RTOL = 1e-10

EXPANDING_MODULI = (1.1, 4.0)

CONTRACTING_MODULI = (0.05, 0.9)

# Prefix moduli of eventually constant laws are unconstrained by the regime
PREFIX_MODULI = (0.5, 3.0)

MAX_PREFIX = 3

MAX_PERIOD = 4


@dataclass(frozen=True, eq=False)
class TrialInstance:
    """One randomly drawn shadowing problem"""

    trial: int
    seed: int
    coefficients: CoefficientSpec
    forcing: ForcingSpec
    bound_set: BoundSet
    sampler: Sampler
    x0: np.ndarray
    horizon: int


@dataclass
class TrialOutcome:
    trial: int
    variant: str = ""
    horizon: int = 0
    utilization: float = 0.0
    checks: Dict[str, bool] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(self.checks.values())

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            'status': 'passed' if self.passed else 'failed',
            'variant': self.variant,
            'horizon': self.horizon,
            'utilization': self.utilization,
            'checks': dict(self.checks),
        }
        if self.error is not None:
            data['error'] = self.error
        return data


def _random_scalar(rng: np.random.Generator, low: float, high: float, scalar_field: Field) -> Scalar:
    modulus = float(rng.uniform(low, high))
    if scalar_field is Field.COMPLEX:
        return complex(modulus * np.exp(2j * np.pi * rng.uniform()))
    return modulus if rng.integers(2) == 0 else -modulus


def random_coefficients(rng: np.random.Generator, regime: Regime, scalar_field: Field) -> CoefficientSpec:
    """
    Draw a constant, periodic or eventually constant law in the given regime

    Raises:
        RegimeError: For the critical regime, which has no guarantee to check
    """
    if regime is Regime.EXPANDING:
        low, high = EXPANDING_MODULI
    elif regime is Regime.CONTRACTING:
        low, high = CONTRACTING_MODULI
    else:
        raise RegimeError("Randomized verification needs an expanding or contracting law")

    kind = rng.integers(3)
    if kind == 0:
        return CoefficientSpec.constant(_random_scalar(rng, low, high, scalar_field), scalar_field)
    if kind == 1:
        period = int(rng.integers(2, MAX_PERIOD + 1))
        values = [_random_scalar(rng, low, high, scalar_field) for _ in range(period)]
        return CoefficientSpec.periodic(values, scalar_field)
    length = int(rng.integers(1, MAX_PREFIX + 1))
    prefix = [_random_scalar(rng, *PREFIX_MODULI, scalar_field) for _ in range(length)]
    return CoefficientSpec.eventually_constant(
        prefix, _random_scalar(rng, low, high, scalar_field), scalar_field
    )


def _random_vector(rng: np.random.Generator, dimension: int, scalar_field: Field) -> np.ndarray:
    vec = rng.normal(size=dimension)
    if scalar_field is Field.COMPLEX:
        vec = vec + 1j * rng.normal(size=dimension)
    return make_vector(vec, scalar_field)


def random_bound_set(rng: np.random.Generator, dimension: int, scalar_field: Field) -> BoundSet:
    """Ball, interval (d = 1) or polytope; complex runs always get a ball"""
    choices = ["ball"]
    if scalar_field is Field.REAL:
        choices.append("polytope")
        if dimension == 1:
            choices.append("interval")
    kind = choices[int(rng.integers(len(choices)))]

    if kind == "ball":
        p = [1.0, 2.0, math.inf][int(rng.integers(3))]
        return BoundSet.ball(Seminorm.p_norm(p), float(rng.uniform(0.1, 2.0)), dimension, scalar_field)
    if kind == "interval":
        lo = float(rng.uniform(-2.0, 1.0))
        return BoundSet.interval(lo, lo + float(rng.uniform(0.1, 2.0)))
    count = dimension + int(rng.integers(2, 5))
    return BoundSet.polytope(rng.normal(size=(count, dimension)))


def random_sampler(rng: np.random.Generator, bound_set: BoundSet) -> Sampler:
    """Uniform, vertex (sets with vertices) or a constant element of V"""
    kind = int(rng.integers(3))
    is_ball = bound_set.kind is SetKind.BALL
    if kind == 1 and not is_ball:
        return Sampler.vertex()
    if kind == 2:
        # half a ball sample stays strictly inside for the exact membership check
        vector = 0.5 * draw_uniform(bound_set, rng) if is_ball else draw_vertex(bound_set, rng)
        return Sampler.constant(vector, bound_set.field)
    return Sampler.uniform()


def random_forcing(rng: np.random.Generator, dimension: int, scalar_field: Field) -> ForcingSpec:
    kind = int(rng.integers(3))
    if kind == 0:
        return ForcingSpec.zero(dimension, scalar_field)
    if kind == 1:
        return ForcingSpec.constant(_random_vector(rng, dimension, scalar_field), scalar_field)
    period = int(rng.integers(2, MAX_PERIOD + 1))
    return ForcingSpec.periodic(
        [_random_vector(rng, dimension, scalar_field) for _ in range(period)], scalar_field
    )


def random_instance(config: RunConfig, regime: Regime, trial: int) -> TrialInstance:
    """
    Draw the problem of one trial from the generator seeded with seed + trial

    Expanding instances get the horizon their truncation tolerance needs;
    contracting instances use the configured horizon.
    """
    seed = config.seed + trial
    rng = np.random.default_rng(seed)
    coefficients = random_coefficients(rng, regime, config.field)
    bound_set = random_bound_set(rng, config.dimension, config.field)
    sampler = random_sampler(rng, bound_set)
    forcing = random_forcing(rng, config.dimension, config.field)
    x0 = _random_vector(rng, config.dimension, config.field)

    horizon = config.horizon
    if regime is Regime.EXPANDING:
        needed = required_horizon(coefficients, bound_set, config.seminorms, config.tolerance)  # type: ignore[arg-type]
        horizon = max(2, needed + HORIZON_MARGIN)

    return TrialInstance(trial, seed, coefficients, forcing, bound_set, sampler, x0, horizon)


def _utilization(result: ShadowResult) -> float:
    """Largest gauge of x_n - y_n relative to the error set over guaranteed indices"""
    if result.stability_constant == 0.0:
        return 0.0
    worst = 0.0
    for verdict in result.containment:
        if verdict.guaranteed:
            worst = max(worst, gauge(result.error_set, verdict.diff) / result.stability_constant)
    return worst


def _residual_ok(result: ShadowResult) -> bool:
    magnitude = float(np.max(np.abs(result.y.states)))
    return result.diagnostics["max_residual"] <= RESIDUAL_RTOL * (1.0 + magnitude)


def _diverges(
    result: ShadowResult,
    pseudo_orbit: PseudoOrbit,
    instance: TrialInstance,
    family: SeminormFamily,
    tol: float
) -> bool:
    offset = np.full(instance.x0.shape[0], UNIQUENESS_OFFSET)
    index = int(np.argmax(family.evaluate_all(offset)))
    certificate = uniqueness_divergence(
        pseudo_orbit,
        instance.coefficients,
        instance.forcing,
        result.y.states[0] + offset,
        max(UNIQUENESS_HORIZON, instance.horizon),
        family,
        tol=tol,
        seminorm_index=index,
    )
    return certificate.verdict == "diverges"


def verify_instance(instance: TrialInstance, family: SeminormFamily, tol: float) -> TrialOutcome:
    """
    Build the shadow of one random pseudo-orbit and check every guarantee

    Checks: containment from n0 on, exactness of y, the finite-sum formula
    (constant contracting laws) and divergence of a nearby exact orbit
    (expanding laws).
    """
    outcome = TrialOutcome(trial=instance.trial, horizon=instance.horizon)
    pseudo_orbit = generate_pseudo_orbit(
        instance.x0, instance.coefficients, instance.forcing, instance.bound_set,
        instance.horizon, instance.sampler, instance.seed
    )
    result = construct_shadow(pseudo_orbit, family, tol=tol)

    outcome.variant = result.variant.value
    outcome.utilization = _utilization(result)
    outcome.checks['containment'] = result.verdict
    outcome.checks['residual'] = _residual_ok(result)
    if 'formula_discrepancy' in result.diagnostics:
        outcome.checks['formula'] = result.diagnostics['formula_discrepancy'] <= FORMULA_RTOL
    if result.regime.regime is Regime.EXPANDING:
        outcome.checks['uniqueness'] = _diverges(result, pseudo_orbit, instance, family, tol)
    return outcome


class BatchVerifier:
    """
    Run the guarantee checks over many random instances in parallel
    """

    def __init__(self, config: RunConfig, max_workers: int = 4):
        """
        Initialize batch verifier

        Args:
            config: Run configuration; its coefficient law fixes the regime,
                its field, dimension, seminorms, tolerance and seed are reused
            max_workers: Maximum concurrent trials

        Raises:
            RegimeError: If the configured law is critical
        """
        self.config = config
        self.max_workers = max_workers
        self.regime = classify_regime(config.coefficients).regime
        if self.regime is Regime.CRITICAL:
            raise RegimeError(
                "Randomized verification needs an expanding or contracting coefficient law.\n"
                "Use 'shadowrec audit' to explore the critical regime."
            )
        self._stats: Dict[str, Any] = {
            'trials': 0,
            'passed': 0,
            'failed': 0,
            'worst_utilization': 0.0,
            'worst_trial': None,
            'start_time': None,
            'end_time': None
        }

    def run(self, trials: int) -> Dict[str, Any]:
        """
        Verify ``trials`` random instances

        Args:
            trials: Number of instances, at least 1

        Returns:
            Dictionary with statistics and per-trial results

        Raises:
            ConfigError: If trials < 1
        """
        if trials < 1:
            raise ConfigError(f"trials must be at least 1, got {trials}", field="trials")

        family = self.config.seminorms
        axiom_failures = family.verify_axioms(self.config.field, samples=200, seed=self.config.seed)  # type: ignore[union-attr]
        if axiom_failures:
            raise ConfigError(f"seminorm family violates the axioms: {axiom_failures[0]}", field="seminorms")

        self._stats['trials'] = trials
        self._stats['start_time'] = time.time()
        results: Dict[int, Dict[str, Any]] = {}

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            future_to_trial = {
                executor.submit(self._run_single_trial, trial, family): trial  # type: ignore[arg-type]
                for trial in range(trials)
            }

            for future in as_completed(future_to_trial):
                trial = future_to_trial[future]
                outcome = future.result()
                results[trial] = outcome.to_dict()

                if outcome.passed:
                    self._stats['passed'] += 1
                    logger.debug(f"Trial {trial} passed ({outcome.variant}, N={outcome.horizon})")
                else:
                    self._stats['failed'] += 1
                    failed = [name for name, ok in outcome.checks.items() if not ok]
                    logger.error(f"Trial {trial} failed: {outcome.error or ', '.join(failed)}")

                if outcome.utilization > self._stats['worst_utilization']:
                    self._stats['worst_utilization'] = outcome.utilization
                    self._stats['worst_trial'] = trial

        self._stats['end_time'] = time.time()

        return {
            'statistics': self._stats.copy(),
            'results': dict(sorted(results.items())),
            'duration': self._stats['end_time'] - self._stats['start_time']
        }

    def _run_single_trial(self, trial: int, family: SeminormFamily) -> TrialOutcome:
        try:
            instance = random_instance(self.config, self.regime, trial)
            return verify_instance(instance, family, self.config.tolerance)
        except ShadowrecError as e:
            return TrialOutcome(trial=trial, error=str(e))


__all__ = [
    "TrialInstance",
    "TrialOutcome",
    "random_coefficients",
    "random_bound_set",
    "random_sampler",
    "random_forcing",
    "random_instance",
    "verify_instance",
    "BatchVerifier",
]
