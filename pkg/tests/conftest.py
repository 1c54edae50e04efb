"""Pytest configuration and shared fixtures"""

import json
import math
import sys
import tempfile
from pathlib import Path
from typing import Any, Callable, Dict, Generator

import pytest


# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from shadowrec.config import SEED_ENV_VAR  # noqa: E402
from shadowrec.core import CoefficientSpec, ForcingSpec, Seminorm, SeminormFamily  # noqa: E402
from shadowrec.recurrence import PseudoOrbit, Sampler, generate_pseudo_orbit  # noqa: E402
from shadowrec.sets import BoundSet  # noqa: E402


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Create a temporary directory for tests"""
    with tempfile.TemporaryDirectory() as tmp:
        yield Path(tmp)


@pytest.fixture
def write_json_file(temp_dir: Path) -> Callable[..., Path]:
    """Write a JSON document into the temporary directory"""
    def write(data: Dict[str, Any], name: str = "run.json") -> Path:
        path = temp_dir / name
        path.write_text(json.dumps(data, indent=2), encoding="utf-8")
        return path
    return write


@pytest.fixture(autouse=True)
def no_seed_override(monkeypatch: pytest.MonkeyPatch) -> None:
    """Run every test without a SHADOWREC_SEED from the shell"""
    monkeypatch.delenv(SEED_ENV_VAR, raising=False)


@pytest.fixture
def capture_logs() -> Generator[Any, None, None]:
    """Capture log messages during tests"""
    import logging
    from io import StringIO

    log_buffer = StringIO()
    handler = logging.StreamHandler(log_buffer)
    handler.setLevel(logging.DEBUG)

    package_logger = logging.getLogger("shadowrec")
    original_level = package_logger.level
    package_logger.setLevel(logging.DEBUG)
    package_logger.addHandler(handler)

    class LogCapture:
        def get_output(self) -> str:
            return log_buffer.getvalue()

    yield LogCapture()

    package_logger.removeHandler(handler)
    package_logger.setLevel(original_level)
    log_buffer.close()


@pytest.fixture
def inf_norm() -> Seminorm:
    return Seminorm.p_norm(math.inf)


@pytest.fixture
def line_family(inf_norm: Seminorm) -> SeminormFamily:
    """Normed family on K^1"""
    return SeminormFamily.normed_space(inf_norm, 1)


@pytest.fixture
def unit_ball(inf_norm: Seminorm) -> BoundSet:
    """V = [-1, 1] as a ball"""
    return BoundSet.ball(inf_norm, 1.0, 1)


@pytest.fixture
def no_forcing() -> ForcingSpec:
    return ForcingSpec.zero(1)


@pytest.fixture
def doubling_orbit(unit_ball: BoundSet, no_forcing: ForcingSpec) -> PseudoOrbit:
    """x_{n+1} = 2 x_n + 1 from x_0 = 0, so x_n = 2^n - 1 and the shadow is y_n = 2^n"""
    return generate_pseudo_orbit(
        [0.0], CoefficientSpec.constant(2.0), no_forcing, unit_ball, 20, Sampler.constant([1.0]), 0
    )


@pytest.fixture
def halving_orbit(unit_ball: BoundSet, no_forcing: ForcingSpec) -> PseudoOrbit:
    """x_{n+1} = x_n / 2 + 1 from x_0 = 0"""
    return generate_pseudo_orbit(
        [0.0], CoefficientSpec.constant(0.5), no_forcing, unit_ball, 60, Sampler.constant([1.0]), 0
    )


@pytest.fixture
def run_config_data() -> Dict[str, Any]:
    """Constant a = 2 with a constant defect of 0.5 in the ball of radius 0.5"""
    return {
        "coefficients": {"kind": "constant", "value": 2},
        "perturbation": {"kind": "ball", "seminorm": {"kind": "p", "p": "inf"}, "radius": 0.5},
        "horizon": 60,
        "x0": [0.0],
        "sampler": {"kind": "constant", "vector": [0.5]},
    }


# Markers for test organization
def pytest_configure(config):
    """Register custom markers"""
    config.addinivalue_line(
        "markers", "unit: mark test as a unit test"
    )
    config.addinivalue_line(
        "markers", "slow: mark test as slow running"
    )
