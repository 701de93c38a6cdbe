"""Accuracy/diversity trade-off rates.

``tpr`` is the compounded Trade-off Profit Rate of a model against a
baseline point: the mean of the relative accuracy change and the
relative diversity change. ``tcr`` (Trade-off Conversion Rate) divides
the relative diversity change of CE -> RL training by its relative
accuracy change, both taken relative to the RL point. TCR is reported as
a raw ratio; whether lower or higher is preferable is left to the reader.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "TradeoffPoint",
    "TradeoffError",
    "tpr",
    "tpr_values",
    "tcr",
    "zero_tpr_boundary",
    "tradeoff_report",
    "report_to_json",
    "boundary_to_csv",
]

SCHEMA_VERSION = 1
BOUNDARY_SAMPLES = 41


class TradeoffError(ValueError):
    pass


@dataclass(frozen=True)
class TradeoffPoint:
    label: str
    acc: float
    div: float

    def __post_init__(self):
        for name in ("acc", "div"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise TradeoffError(f"{self.label}: {name} must be a positive finite number, got {v!r}")

    def as_dict(self) -> dict:
        return {"label": self.label, "acc": self.acc, "div": self.div}


def tpr_values(acc: float, div: float, b: TradeoffPoint) -> float:
    return 0.5 * ((acc - b.acc) / b.acc + (div - b.div) / b.div)


def tpr(a: TradeoffPoint, b: TradeoffPoint) -> float:
    """Signed fraction; multiply by 100 for percent."""
    return tpr_values(a.acc, a.div, b)


def tcr(ce: TradeoffPoint, rl: TradeoffPoint) -> float:
    if ce.acc == rl.acc:
        raise TradeoffError(f"{rl.label}: TCR undefined, CE and RL accuracy are equal ({rl.acc})")
    div_change = abs(ce.div - rl.div) / rl.div
    acc_change = abs(ce.acc - rl.acc) / rl.acc
    return div_change / acc_change


def zero_tpr_boundary(b: TradeoffPoint, acc_values: Sequence[float]) -> list[tuple[float, float]]:
    """Points (acc, div) with tpr = 0 against ``b``: div = b.div * (2 - acc / b.acc)."""
    return [(float(a), b.div * (2.0 - a / b.acc)) for a in acc_values]


def _boundary_grid(b: TradeoffPoint, n: int = BOUNDARY_SAMPLES) -> list[float]:
    hi = 2.0 * b.acc
    return [hi * i / (n - 1) for i in range(n)]


def tradeoff_report(points: Sequence[TradeoffPoint], baseline: TradeoffPoint,
                    ce_rl_pairs: Sequence[tuple[str, TradeoffPoint, TradeoffPoint]] = (),
                    boundary_acc: Sequence[float] | None = None) -> dict:
    """TPR of every point against ``baseline``, TCR of every (label, ce, rl) pair,
    and samples of the zero-TPR line. TPR rows are in input order."""
    if not points:
        raise TradeoffError("tradeoff report needs at least one point")
    rows = [{**p.as_dict(), "tpr": tpr(p, baseline)} for p in points]
    tcr_rows = []
    for label, ce, rl in ce_rl_pairs:
        try:
            tcr_rows.append({"label": label, "tcr": tcr(ce, rl)})
        except TradeoffError as exc:
            raise TradeoffError(f"pair {label!r}: {exc}") from None
    acc = boundary_acc if boundary_acc is not None else _boundary_grid(baseline)
    return {
        "schema_version": SCHEMA_VERSION,
        "baseline": baseline.as_dict(),
        "tpr": rows,
        "tcr": tcr_rows,
        "boundary": [list(p) for p in zero_tpr_boundary(baseline, acc)],
    }


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def boundary_to_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["acc", "div"])
    for acc, div in report["boundary"]:
        w.writerow([repr(acc), repr(div)])
    return buf.getvalue()
