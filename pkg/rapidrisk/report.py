"""
Assessment reports, printed summaries and per-record tables.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import jsonlines  # type: ignore
import numpy as np

from . import _terms as terms
from ._core import ConfigurationError, __version__
from .risk import RapidResult, RecordRisk

TOOL_NAME = "rapidrisk"
SCHEMA_PATH = Path(__file__).parent / "schemas" / "assessment_report.schema.json"
"""The published JSON schema every AssessmentReport validates against."""
JSONL_SUFFIX = ".jsonl"


class OutputError(ConfigurationError):
    """
    Error raised when a report or table cannot be written as requested.
    """


def file_digest(path: Union[str, Path]) -> str:
    """
    Returns:
        str: The hex sha256 digest of the file's bytes.

    """
    h = hashlib.sha256()
    with open(path, "rb") as file:
        for chunk in iter(lambda: file.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    if isinstance(obj, Mapping):
        return dict(obj)
    raise TypeError(f"{type(obj)} is not JSON serializable.")


@dataclass
class AssessmentReport:
    """
    Everything needed to reproduce and audit one CLI run. Apart from timing,
    the serialized report depends only on the inputs and settings.
    """

    command: str
    inputs: Dict[str, Any]
    config: Dict[str, Any]
    results: Dict[str, Any]
    records: Optional[str] = None
    timing: Dict[str, float] = field(default_factory=dict)

    def to_dict(self, include_timing: bool = True) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            terms.TOOL: {terms.NAME: TOOL_NAME, terms.VERSION: __version__, "command": self.command},
            terms.INPUTS: self.inputs,
            terms.CONFIG: self.config,
            terms.RESULTS: self.results,
            "records": self.records,
        }
        if include_timing:
            out[terms.TIMING] = self.timing
        return out

    def dumps(self, include_timing: bool = True) -> str:
        """
        Returns:
            str: Canonical JSON (sorted keys, two-space indent).

        """
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=2, default=_plain) + "\n"

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


def describe_inputs(**paths: Union[None, str, Path, Sequence[Union[str, Path]]]) -> Dict[str, Any]:
    """
    Args:
        **paths: Input role to a path or list of paths. None values are
            skipped.

    Returns:
        Dict[str, Any]: Role to {"path", "sha256"} (or a list of them).

    """
    out: Dict[str, Any] = {}
    for role, value in paths.items():
        if value is None:
            continue
        if isinstance(value, (str, Path)):
            out[role] = {"path": str(value), terms.SHA256: file_digest(value)}
        else:
            out[role] = [{"path": str(p), terms.SHA256: file_digest(p)} for p in value]
    return out


def render_summary(result: RapidResult) -> str:
    """
    A short block in the style of:

        Risk level: 15.5 %
        Records at risk: 155 / 1000
        Threshold (tau): 0.3

    """
    name = terms.TAU if result.is_categorical else terms.EPSILON
    return "\n".join(
        [
            f"Risk level: {result.score * 100:.1f} %",
            f"Records at risk: {result.n_at_risk} / {result.n_evaluated}",
            f"Threshold ({name}): {result.threshold:g}",
        ]
    )


def render_details(result: RapidResult) -> str:
    """
    The summary plus the attacker, evaluation mode and attacker quality.
    """
    lines = [render_summary(result)]
    lines.append(f"Attacker: {result.attacker.get(terms.FAMILY, 'unknown')}")
    lines.append(f"Evaluation mode: {result.mode}")
    if result.is_categorical:
        lines.append(f"Baseline: {result.baseline}")
        if result.accuracy is not None:
            lines.append(f"Attacker accuracy: {result.accuracy:.3f}")
    else:
        metric = result.metric.name if result.metric is not None else "unknown"
        lines.append(f"Error metric: {metric}")
        if result.mae is not None:
            lines.append(f"Mean absolute error: {result.mae:.4g}")
    return "\n".join(lines)


def high_risk_records(result: RapidResult, limit: Optional[int] = 10) -> List[RecordRisk]:
    """
    Args:
        result (RapidResult): An assessment.
        limit (int, optional): Most records to return. Defaults to 10; None
            returns all.

    Returns:
        List[RecordRisk]: At-risk records, highest normalized gain (or lowest
        error) first, ties kept in row order.

    """
    flagged = [rec for rec in result.records if rec.at_risk]
    if result.is_categorical:
        flagged.sort(key=lambda rec: -rec.r)  # type: ignore
    else:
        flagged.sort(key=lambda rec: rec.e)  # type: ignore
    return flagged if limit is None else flagged[:limit]


def record_rows(result: RapidResult, **extra: Any) -> List[Dict[str, Any]]:
    """
    Args:
        result (RapidResult): An assessment.
        **extra: Constant columns put in front of every row (attacker,
            replicate, ...).

    Returns:
        List[Dict[str, Any]]: One dict per evaluated record.

    """
    return [{**extra, **rec.to_dict()} for rec in result.records]


def write_records(rows: Sequence[Dict[str, Any]], path: Union[str, Path]) -> None:
    """
    Writes a per-record table as JSON-lines when path ends in .jsonl and as
    CSV otherwise.

    Raises:
        OutputError: If there are no rows to write.

    """
    if not rows:
        raise OutputError("There are no records to write.")
    path = Path(path)
    if path.suffix == JSONL_SUFFIX:
        with jsonlines.open(path, "w") as writer:  # type: ignore
            writer.write_all(list(rows))  # type: ignore
        return
    header = list(rows[0].keys())
    with open(path, "w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if row[h] is None else row[h] for h in header])


def read_flags(path: Union[str, Path]) -> Dict[int, bool]:
    """
    Reads the row and at_risk columns back from a per-record table.

    Returns:
        Dict[int, bool]: Row identifier to at-risk flag.

    Raises:
        OutputError: If the table lacks the row or at_risk column.

    """
    path = Path(path)
    if path.suffix == JSONL_SUFFIX:
        with jsonlines.open(path) as reader:  # type: ignore
            rows = [dict(obj) for obj in reader]  # type: ignore
    else:
        with open(path, encoding="utf-8", newline="") as file:
            rows = list(csv.DictReader(file))
    if not rows or terms.ROW not in rows[0] or terms.AT_RISK not in rows[0]:
        raise OutputError(f"{path} is not a per-record table with row and at_risk columns.")
    flags = {}
    for row in rows:
        flag = row[terms.AT_RISK]
        flags[int(row[terms.ROW])] = flag if isinstance(flag, bool) else str(flag) == "True"
    return flags


def result_block(result: RapidResult, interval: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    """
    The JSON form of one assessment inside a report.
    """
    out = result.summary()
    if interval is not None:
        out[terms.INTERVALS] = dict(interval)
    return out
