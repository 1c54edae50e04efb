"""Machine-readable reports: per-index CSV tables and JSON summaries"""

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import SeminormFamily
from .shadowing import IndexVerdict, RemarkAudit, ShadowResult


logger = logging.getLogger(__name__)


def format_number(value: Any) -> str:
    """17 significant digits, so every double round-trips"""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def vector_columns(prefix: str, dimension: int, is_complex: bool) -> List[str]:
    if is_complex:
        return [f"{prefix}_{i + 1}_{part}" for i in range(dimension) for part in ("re", "im")]
    return [f"{prefix}_{i + 1}" for i in range(dimension)]


def vector_cells(vec: np.ndarray, is_complex: bool) -> List[str]:
    if is_complex:
        return [format_number(part) for c in np.asarray(vec, dtype=complex) for part in (c.real, c.imag)]
    return [format_number(c) for c in np.real(vec)]


def _encode_vector(vec: np.ndarray) -> list:
    if np.iscomplexobj(vec):
        return [[c.real, c.imag] for c in vec.tolist()]
    return [float(c) for c in vec.tolist()]


def _writer(stream: IO[str]) -> Any:
    return csv.writer(stream, lineterminator="\n")


@dataclass(frozen=True, eq=False)
class Report:
    """
    Record of one shadowing run

    The verdict is the conjunction of the per-index verdicts from n0 on.
    """

    variant: str
    regime: Dict[str, Any]
    q: float
    n0: int
    s: np.ndarray
    stability_constant: float
    error_set: Dict[str, Any]
    truncation_bound: float
    terms_used: int
    tolerance: float
    states: np.ndarray
    shadow: np.ndarray
    rows: Tuple[IndexVerdict, ...]
    seminorms: Tuple[str, ...]
    diagnostics: Dict[str, float]
    config: Optional[Dict[str, Any]] = None

    @classmethod
    def from_result(
        cls,
        result: ShadowResult,
        family: Optional[SeminormFamily] = None,
        config: Optional[Dict[str, Any]] = None
    ) -> "Report":
        return cls(
            variant=result.variant.value,
            regime=result.regime.to_dict(),
            q=result.q,
            n0=result.n0,
            s=result.s,
            stability_constant=result.stability_constant,
            error_set=result.error_set.describe(),
            truncation_bound=result.truncation_bound,
            terms_used=result.terms_used,
            tolerance=result.tolerance,
            states=result.pseudo_orbit.states,
            shadow=result.y.states,
            rows=result.containment,
            seminorms=tuple(_seminorm_names(result, family)),
            diagnostics=dict(result.diagnostics),
            config=config,
        )

    @property
    def is_complex(self) -> bool:
        return bool(np.iscomplexobj(self.states) or np.iscomplexobj(self.shadow))

    @property
    def verdict(self) -> bool:
        return all(row.contained for row in self.rows if row.n >= self.n0)

    @property
    def failures(self) -> List[int]:
        return [row.n for row in self.rows if row.n >= self.n0 and not row.contained]

    def header(self) -> List[str]:
        d = self.states.shape[1]
        return (
            ["n"]
            + vector_columns("x", d, self.is_complex)
            + vector_columns("y", d, self.is_complex)
            + vector_columns("diff", d, self.is_complex)
            + [f"dist_{j + 1}" for j in range(len(self.seminorms))]
            + ["truncation_bound", "tolerance", "guaranteed", "contained"]
        )

    def table(self) -> Iterable[List[str]]:
        for row in self.rows:
            yield (
                [format_number(row.n)]
                + vector_cells(self.states[row.n], self.is_complex)
                + vector_cells(self.shadow[row.n], self.is_complex)
                + vector_cells(row.diff, self.is_complex)
                + [format_number(d) for d in row.distances]
                + [
                    format_number(row.truncation_bound),
                    format_number(row.tolerance),
                    format_number(row.guaranteed),
                    format_number(row.contained),
                ]
            )

    def write_csv(self, stream: IO[str]) -> None:
        writer = _writer(stream)
        writer.writerow(self.header())
        writer.writerows(self.table())

    def summary(self) -> Dict[str, Any]:
        distances = np.array([row.distances for row in self.rows if row.n >= self.n0])
        data: Dict[str, Any] = {
            "variant": self.variant,
            "regime": self.regime,
            "q": self.q,
            "n0": self.n0,
            "s": _encode_vector(self.s),
            "stability_constant": self.stability_constant,
            "error_set": self.error_set,
            "truncation_bound": self.truncation_bound,
            "terms_used": self.terms_used,
            "tolerance": self.tolerance,
            "seminorms": list(self.seminorms),
            "max_distances": distances.max(axis=0).tolist() if distances.size else [],
            "indices": len(self.rows),
            "verdict": "all_contained" if self.verdict else "containment_failed",
            "failures": self.failures,
            "diagnostics": self.diagnostics,
        }
        if self.config is not None:
            data["config"] = self.config
        return data

    def write(self, out_dir: Path, csv_name: str = "shadow.csv", summary_name: str = "summary.json") -> Tuple[Path, Path]:
        """
        Write the CSV table and the JSON summary sidecar

        Args:
            out_dir: Output directory, created when missing
            csv_name: File name of the per-index table
            summary_name: File name of the summary

        Returns:
            Paths of the two files written
        """
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / csv_name
        summary_path = out_dir / summary_name

        with open(csv_path, "w", encoding="utf-8", newline="") as f:
            self.write_csv(f)
        write_json(summary_path, self.summary())
        logger.info(f"Wrote {len(self.rows)} rows to {csv_path} and summary to {summary_path}")
        return csv_path, summary_path


def _seminorm_names(result: ShadowResult, family: Optional[SeminormFamily]) -> List[str]:
    if family is not None:
        return [seminorm.describe() for seminorm in family.seminorms]
    first = result.containment[0] if result.containment else None
    count = len(first.distances) if first is not None else 0
    return [f"seminorm_{j + 1}" for j in range(count)]


def write_json(path: Path, data: Dict[str, Any]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


AUDIT_HEADER = ["kind", "y0", "sup", "log_sup", "argmax", "bounded"]


def write_audit_csv(audit: RemarkAudit, stream: IO[str]) -> None:
    """One row per grid value, then the analytic candidate when r > 1"""
    writer = _writer(stream)
    writer.writerow(AUDIT_HEADER)
    rows = [("grid", row) for row in audit.rows]
    if audit.candidate is not None:
        rows.append(("candidate", audit.candidate))
    for kind, row in rows:
        writer.writerow([
            kind,
            format_number(row.y0),
            format_number(row.sup),
            format_number(row.log_sup),
            format_number(row.argmax),
            format_number(row.bounded),
        ])


def audit_summary(audit: RemarkAudit) -> Dict[str, Any]:
    return {
        "r": audit.r,
        "horizon": audit.horizon,
        "limit": audit.limit,
        "grid_points": len(audit.rows),
        "min_sup": audit.min_sup,
        "any_bounded": audit.any_bounded,
        "predicted_y0": audit.predicted_y0,
        "predicted_constant": audit.predicted_constant,
        "predicted_bound": audit.predicted_bound,
        "candidate_sup": audit.candidate.sup if audit.candidate is not None else None,
        "contradicts_remark": audit.contradicts_remark,
        "divergent_case": audit.divergent_case,
    }


def hull_header(dimension: int) -> List[str]:
    return ["row"] + vector_columns("v", dimension, False) + ["contained", "gauge"]


def write_hull_csv(
    dimension: int,
    verdicts: Sequence[Tuple[int, np.ndarray, bool, float]],
    stream: IO[str]
) -> None:
    """Rows of (source row number, query, contained, gauge)"""
    writer = _writer(stream)
    writer.writerow(hull_header(dimension))
    for row, vec, contained, gauge_value in verdicts:
        writer.writerow(
            [format_number(row)] + vector_cells(vec, False)
            + [format_number(contained), format_number(gauge_value)]
        )


__all__ = [
    "format_number",
    "Report",
    "write_json",
    "write_audit_csv",
    "audit_summary",
    "write_hull_csv",
]
