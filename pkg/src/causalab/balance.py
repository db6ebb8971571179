"""Covariate balance diagnostics: absolute standardized mean differences
with the 0.1 flagging rule, plus per-covariate distribution details.

The aSMD uses the Love-plot convention |mean_t - mean_c| / sqrt((v_t + v_c)/2)
with sample variance (n-1) for unweighted continuous covariates, frequency-
weighted population variance under weights, and p(1-p) for binary covariates.
Adjusted values are recomputed directly on the adjusted cohort or on the
weighted samples; a zero pooled variance with differing means is reported as
undefined (None) rather than infinity so it cannot poison sorting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .dataset import ColumnKind, Dataset, binary_flags
from .errors import (
    BothAdjustmentsGivenError,
    ColumnKindError,
    CovariateMissingError,
    EmptyGroupError,
    NonPositiveWeightError,
    UnknownCovariateError,
)
from .propensity import WeightVector

log = logging.getLogger(__name__)

ASMD_THRESHOLD = 0.1

MODE_COHORT = "cohort_adjusted"
MODE_WEIGHTS = "weight_adjusted"


def _weighted_moments(values: np.ndarray, weights: np.ndarray | None, kind: ColumnKind) -> tuple[float, float]:
    """(mean, variance) under the aSMD conventions documented above."""
    keep = ~np.isnan(values)
    values = values[keep]
    if weights is not None:
        weights = weights[keep]
    if values.size == 0:
        raise EmptyGroupError("group has no usable values")

    if weights is None:
        mean = float(values.mean())
        if kind is ColumnKind.BINARY:
            return mean, mean * (1.0 - mean)
        var = float(values.var(ddof=1)) if values.size > 1 else 0.0
        return mean, var

    total = float(weights.sum())
    mean = float((weights * values).sum() / total)
    if kind is ColumnKind.BINARY:
        return mean, mean * (1.0 - mean)
    var = float((weights * (values - mean) ** 2).sum() / total)
    return mean, var


def smd(
    treated_values,
    control_values,
    kind: ColumnKind = ColumnKind.CONTINUOUS,
    weights_t=None,
    weights_c=None,
) -> float | None:
    """Absolute standardized mean difference; None when undefined.

    Undefined means zero pooled variance with unequal means. Zero pooled
    variance with equal means is exact balance and returns 0.
    """
    treated = np.asarray(treated_values, dtype=float)
    control = np.asarray(control_values, dtype=float)
    if treated.size == 0 or control.size == 0:
        raise EmptyGroupError("both groups must be nonempty")

    wt = None if weights_t is None else np.asarray(weights_t, dtype=float)
    wc = None if weights_c is None else np.asarray(weights_c, dtype=float)
    for w, v, side in ((wt, treated, "treated"), (wc, control, "control")):
        if w is None:
            continue
        if len(w) != len(v):
            raise NonPositiveWeightError(f"{side} weights length mismatch")
        if (w <= 0).any() or not np.isfinite(w).all():
            raise NonPositiveWeightError(f"{side} weights must be positive and finite")

    mean_t, var_t = _weighted_moments(treated, wt, kind)
    mean_c, var_c = _weighted_moments(control, wc, kind)
    pooled = 0.5 * (var_t + var_c)
    if pooled == 0.0:
        return 0.0 if mean_t == mean_c else None
    return abs(mean_t - mean_c) / float(np.sqrt(pooled))


@dataclass(frozen=True)
class BalanceRow:
    name: str
    unadjusted: float | None
    adjusted: float | None
    flagged: bool


@dataclass(frozen=True)
class BalanceReport:
    mode: str
    rows: tuple[BalanceRow, ...]
    n_treated: int
    n_control: int
    ess_treated: float
    ess_control: float

    def row(self, name: str) -> BalanceRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise UnknownCovariateError(f"covariate {name!r} not in report")

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "covariates": [
                {"name": r.name, "unadjusted": r.unadjusted, "adjusted": r.adjusted, "flagged": r.flagged}
                for r in self.rows
            ],
            "n_treated": self.n_treated,
            "n_control": self.n_control,
            "ess_treated": self.ess_treated,
            "ess_control": self.ess_control,
        }


def _split(ds: Dataset, covariate: str, treatment: str) -> tuple[np.ndarray, np.ndarray, ColumnKind]:
    col = ds.column(covariate)
    if col.kind is ColumnKind.CATEGORICAL:
        raise ColumnKindError(f"covariate {covariate!r} is categorical; one-hot expand it first")
    flags = binary_flags(ds, treatment)
    return col.values[flags == 1.0], col.values[flags == 0.0], col.kind


def effective_sample_size(weights: np.ndarray) -> float:
    total = float(weights.sum())
    return total * total / float((weights * weights).sum())


def balance_report(
    unadjusted: Dataset,
    covariates: list[str],
    treatment: str,
    adjusted: Dataset | None = None,
    weights: WeightVector | None = None,
) -> BalanceReport:
    """Unadjusted vs adjusted aSMD per covariate.

    Provide either an adjusted cohort (matching workflows) or IPW weights
    aligned to the unadjusted rows (weighting workflows), not both. With
    neither, the adjusted values repeat the unadjusted ones. Reported group
    sizes describe the cohort behind the adjusted column; effective sizes are
    (sum w)^2 / sum w^2 under weighting.
    """
    if adjusted is not None and weights is not None:
        raise BothAdjustmentsGivenError("pass an adjusted cohort or weights, not both")
    for name in covariates:
        if not unadjusted.has_column(name):
            raise CovariateMissingError(f"covariate {name!r} not in unadjusted cohort")
        if adjusted is not None and not adjusted.has_column(name):
            raise CovariateMissingError(f"covariate {name!r} not in adjusted cohort")

    if weights is not None and len(weights.weights) != unadjusted.n_rows:
        raise NonPositiveWeightError("weights must align with the unadjusted rows")

    mode = MODE_WEIGHTS if weights is not None else MODE_COHORT
    rows = []
    for name in covariates:
        t_un, c_un, kind = _split(unadjusted, name, treatment)
        unadj = smd(t_un, c_un, kind)
        if weights is not None:
            flags = binary_flags(unadjusted, treatment)
            adj = smd(t_un, c_un, kind,
                      weights_t=weights.weights[flags == 1.0],
                      weights_c=weights.weights[flags == 0.0])
        elif adjusted is not None:
            t_adj, c_adj, kind_adj = _split(adjusted, name, treatment)
            adj = smd(t_adj, c_adj, kind_adj)
        else:
            adj = unadj
        flagged = adj is not None and adj > ASMD_THRESHOLD
        rows.append(BalanceRow(name, unadj, adj, flagged))

    basis = adjusted if adjusted is not None else unadjusted
    flags = binary_flags(basis, treatment)
    n_treated = int((flags == 1.0).sum())
    n_control = int((flags == 0.0).sum())
    if n_treated == 0 or n_control == 0:
        raise EmptyGroupError("both treatment groups must be nonempty")
    if weights is not None:
        ess_t = effective_sample_size(weights.weights[flags == 1.0])
        ess_c = effective_sample_size(weights.weights[flags == 0.0])
    else:
        ess_t, ess_c = float(n_treated), float(n_control)

    return BalanceReport(mode, tuple(rows), n_treated, n_control, ess_t, ess_c)


def sort_report(report: BalanceReport, key: str = "adjusted", descending: bool = False) -> BalanceReport:
    """Stable sort of the report rows; ties break by name ascending and
    undefined values always sort last."""
    if key not in ("adjusted", "unadjusted", "name"):
        raise UnknownCovariateError(f"unknown sort key {key!r}")
    rows = sorted(report.rows, key=lambda r: r.name)
    if key != "name":
        value = lambda r: getattr(r, key)
        rows = sorted(rows, key=lambda r: 0.0 if value(r) is None else value(r), reverse=descending)
        rows = sorted(rows, key=lambda r: value(r) is None)
    elif descending:
        rows = list(reversed(rows))
    return replace(report, rows=tuple(rows))


# --- per-covariate details ----------------------------------------------------


@dataclass(frozen=True)
class CovariateDetail:
    covariate: str
    bin_edges: tuple[float, ...]
    unadjusted_treated: tuple[float, ...]
    unadjusted_control: tuple[float, ...]
    adjusted_treated: tuple[float, ...]
    adjusted_control: tuple[float, ...]
    unadjusted_mean_treated: float
    unadjusted_mean_control: float
    adjusted_mean_treated: float
    adjusted_mean_control: float
    flagged: bool

    def to_json(self) -> dict:
        return {
            "covariate": self.covariate,
            "bin_edges": list(self.bin_edges),
            "unadjusted": {
                "treated": list(self.unadjusted_treated),
                "control": list(self.unadjusted_control),
                "mean_treated": self.unadjusted_mean_treated,
                "mean_control": self.unadjusted_mean_control,
            },
            "adjusted": {
                "treated": list(self.adjusted_treated),
                "control": list(self.adjusted_control),
                "mean_treated": self.adjusted_mean_treated,
                "mean_control": self.adjusted_mean_control,
            },
            "flagged": self.flagged,
        }


N_DETAIL_BINS = 20


def _hist(values: np.ndarray, weights: np.ndarray | None, lo: float, hi: float) -> np.ndarray:
    keep = ~np.isnan(values)
    values = values[keep]
    w = None if weights is None else weights[keep]
    width = (hi - lo) / N_DETAIL_BINS
    idx = np.clip(np.floor((values - lo) / width).astype(int), 0, N_DETAIL_BINS - 1)
    return np.bincount(idx, weights=w, minlength=N_DETAIL_BINS).astype(float)


def _weighted_mean(values: np.ndarray, weights: np.ndarray | None) -> float:
    keep = ~np.isnan(values)
    values = values[keep]
    if weights is None:
        return float(values.mean())
    w = weights[keep]
    return float((w * values).sum() / w.sum())


def details_view(
    report: BalanceReport,
    unadjusted: Dataset,
    treatment: str,
    adjusted: Dataset | None = None,
    weights: WeightVector | None = None,
    show: list[str] | None = None,
) -> list[CovariateDetail]:
    """Distribution details per covariate for the details panel.

    By default only flagged covariates are included, sorted by adjusted aSMD
    descending; ``show`` overrides the default and may include well-balanced
    covariates. All four histograms of a covariate share bin edges (20 bins
    over the pooled min-max).
    """
    if adjusted is not None and weights is not None:
        raise BothAdjustmentsGivenError("pass an adjusted cohort or weights, not both")
    if show is None:
        flagged = [r for r in report.rows if r.flagged]
        flagged.sort(key=lambda r: (-(r.adjusted or 0.0), r.name))
        show = [r.name for r in flagged]
    else:
        for name in show:
            report.row(name)  # raises UnknownCovariateError

    details = []
    for name in show:
        t_un, c_un, _ = _split(unadjusted, name, treatment)
        if adjusted is not None:
            t_adj, c_adj, _ = _split(adjusted, name, treatment)
            wt = wc = None
        else:
            t_adj, c_adj = t_un, c_un
            if weights is not None:
                flags = binary_flags(unadjusted, treatment)
                wt = weights.weights[flags == 1.0]
                wc = weights.weights[flags == 0.0]
            else:
                wt = wc = None

        pooled = np.concatenate([t_un, c_un, t_adj, c_adj])
        pooled = pooled[~np.isnan(pooled)]
        if pooled.size == 0:
            raise EmptyGroupError(f"covariate {name!r} has no usable values")
        lo, hi = float(pooled.min()), float(pooled.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, N_DETAIL_BINS + 1)

        details.append(CovariateDetail(
            covariate=name,
            bin_edges=tuple(edges.tolist()),
            unadjusted_treated=tuple(_hist(t_un, None, lo, hi).tolist()),
            unadjusted_control=tuple(_hist(c_un, None, lo, hi).tolist()),
            adjusted_treated=tuple(_hist(t_adj, wt, lo, hi).tolist()),
            adjusted_control=tuple(_hist(c_adj, wc, lo, hi).tolist()),
            unadjusted_mean_treated=_weighted_mean(t_un, None),
            unadjusted_mean_control=_weighted_mean(c_un, None),
            adjusted_mean_treated=_weighted_mean(t_adj, wt),
            adjusted_mean_control=_weighted_mean(c_adj, wc),
            flagged=report.row(name).flagged,
        ))
    return details
