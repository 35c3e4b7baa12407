"""Accuracy of a dense disparity map at held-out ground-truth points."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyReportError
from .guidance import SparseDisparitySet

DEFAULT_THRESHOLDS = (1.0, 2.0, 3.0)


def _key(threshold: float) -> str:
    return f"outliers_gt_{threshold:g}px"


@dataclass(frozen=True)
class EvalReport:
    """Average absolute error and outlier rates over the scored points.

    ``outlier_rate`` maps each threshold to the fraction of scored points
    whose error is strictly greater than it. Points where the evaluated map is
    invalid are counted in ``skipped`` and excluded from ``n``.
    """

    n: int
    avg_error: float
    outlier_rate: dict = field(default_factory=dict)
    skipped: int = 0

    def to_dict(self) -> dict:
        out = {"n": self.n, "skipped": self.skipped, "avg_error": self.avg_error}
        for t, rate in sorted(self.outlier_rate.items()):
            out[_key(t)] = rate
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_table(self) -> str:
        rows = [("n", str(self.n)), ("skipped", str(self.skipped)), ("avg_error", f"{self.avg_error:.4f}")]
        rows += [(f">{t:g}px", f"{100.0 * r:.2f}%") for t, r in sorted(self.outlier_rate.items())]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v:>10}" for k, v in rows)


def evaluate(disparity, holdout: SparseDisparitySet, thresholds=DEFAULT_THRESHOLDS) -> EvalReport:
    """Score ``disparity`` against the holdout points.

    Raises:
        EmptyReportError: if no holdout point has a valid disparity.
    """
    disparity = np.asarray(disparity, dtype=np.float64)
    holdout.check_inside(*disparity.shape)
    computed = disparity[holdout.y, holdout.x]
    ok = np.isfinite(computed)
    n = int(ok.sum())
    if n == 0:
        raise EmptyReportError(f"none of the {len(holdout)} holdout points has a valid disparity")
    err = np.abs(computed[ok] - holdout.d[ok])
    rates = {float(t): float(np.count_nonzero(err > t)) / n for t in sorted(thresholds)}
    return EvalReport(n=n, avg_error=float(err.mean()), outlier_rate=rates, skipped=len(holdout) - n)
