"""Treatment-effect estimation and subgroup exploration.

Matched pairs yield individual treatment effects (treated minus control
outcome); their mean is the matched ATE with a seeded percentile-bootstrap
confidence interval. The IPW route uses the normalized (Hajek) estimator on
the full cohort. Faceting splits the individual effects by up to three
variables (binary by value, continuous at a threshold defaulting to the
variable mean) and flags opposite-signed cell means as a possible Simpson's
paradox.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .dataset import ColumnKind, Dataset, binary_flags
from .errors import (
    AllMissingError,
    ColumnKindError,
    EmptyGroupError,
    EmptyInputError,
    LengthMismatchError,
    MissingOutcomeError,
    TooManyVariablesError,
    UnknownVariableError,
)
from .matching import MatchResult
from .propensity import WeightVector

log = logging.getLogger(__name__)

KDE_GRID_POINTS = 128


@dataclass
class EffectRecord:
    method: str  # "matched" | "ipw"
    ate: float
    ci_low: float
    ci_high: float
    ites: np.ndarray | None = None

    def to_json(self) -> dict:
        doc = {
            "method": self.method,
            "ate": self.ate,
            "ci": [self.ci_low, self.ci_high],
        }
        if self.ites is not None:
            doc["ites"] = self.ites.tolist()
        return doc


def _outcome_values(ds: Dataset, outcome: str) -> np.ndarray:
    if not ds.has_column(outcome):
        raise MissingOutcomeError(f"outcome column {outcome!r} not in dataset")
    col = ds.column(outcome)
    if col.kind is ColumnKind.CATEGORICAL:
        raise MissingOutcomeError(f"outcome column {outcome!r} is not numeric")
    return col.values.astype(float)


def pair_effects(result: MatchResult, ds: Dataset, outcome: str) -> np.ndarray:
    """Per-pair outcome difference, treated minus control, in pair order.

    Pairs with a missing outcome on either side are dropped (count logged).
    """
    y = _outcome_values(ds, outcome)
    if not result.pairs:
        return np.empty(0)
    treated_ids = [t for t, _, _ in result.pairs]
    control_ids = [c for _, c, _ in result.pairs]
    ites = y[ds.positions_of(treated_ids)] - y[ds.positions_of(control_ids)]
    keep = ~np.isnan(ites)
    if not keep.all():
        log.info("pair_effects: dropped %d pairs with missing outcomes", int((~keep).sum()))
    return ites[keep]


def _bootstrap_ci(values: np.ndarray, statistic, n_boot: int, seed) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    stats = np.empty(n_boot)
    n = len(values)
    for b in range(n_boot):
        stats[b] = statistic(rng.integers(0, n, size=n))
    stats = stats[np.isfinite(stats)]
    if stats.size == 0:
        raise EmptyGroupError("every bootstrap resample was degenerate")
    lo, hi = np.percentile(stats, [2.5, 97.5])
    return float(lo), float(hi)


def ate_matched(ites, n_boot: int = 1000, seed: int | None = None) -> EffectRecord:
    """Mean of the individual effects with a percentile-bootstrap CI over pairs."""
    ites = np.asarray(ites, dtype=float)
    if ites.size == 0:
        raise EmptyInputError("no individual treatment effects")
    if n_boot < 1:
        raise EmptyInputError("n_boot must be at least 1")
    ate = float(ites.mean())
    lo, hi = _bootstrap_ci(ites, lambda idx: ites[idx].mean(), n_boot, seed)
    return EffectRecord("matched", ate, lo, hi, ites=ites)


def _hajek(wy_t, w_t, wy_c, w_c) -> float:
    denom_t, denom_c = w_t.sum(), w_c.sum()
    if denom_t <= 0 or denom_c <= 0:
        return np.nan
    return wy_t.sum() / denom_t - wy_c.sum() / denom_c


def ate_ipw(
    ds: Dataset,
    treatment: str,
    outcome: str,
    weights: WeightVector,
    n_boot: int = 1000,
    seed: int | None = None,
) -> EffectRecord:
    """Normalized (Hajek) weighted difference in group means, bootstrap over rows.

    Rescaling every weight by a constant leaves the estimate unchanged.
    Degenerate resamples with an empty group are skipped.
    """
    y = _outcome_values(ds, outcome)
    flags = binary_flags(ds, treatment)
    w = weights.weights
    if len(w) != len(y):
        raise LengthMismatchError("weights must align with dataset rows")

    keep = ~np.isnan(y)
    if not keep.all():
        log.info("ate_ipw: dropped %d rows with missing outcomes", int((~keep).sum()))
        y, flags, w = y[keep], flags[keep], w[keep]
    treated = flags == 1.0
    if treated.all() or not treated.any():
        raise EmptyGroupError("both treatment groups must be nonempty")

    wy = w * y
    wt_mask = treated.astype(float)
    ate = _hajek(wy[treated], w[treated], wy[~treated], w[~treated])

    def stat(idx):
        m = wt_mask[idx]
        return _hajek(wy[idx] * m, w[idx] * m, wy[idx] * (1 - m), w[idx] * (1 - m))

    lo, hi = _bootstrap_ci(y, stat, n_boot, seed)
    return EffectRecord("ipw", float(ate), lo, hi)


# --- subgroup faceting --------------------------------------------------------


def default_threshold(values) -> float:
    """Arithmetic mean ignoring missing values."""
    values = np.asarray(values, dtype=float)
    values = values[~np.isnan(values)]
    if values.size == 0:
        raise AllMissingError("no non-missing values to average")
    return float(values.mean())


@dataclass(frozen=True)
class SubgroupSpec:
    """Up to three split variables; continuous ones split at
    ``thresholds[name]`` (default: the variable mean)."""

    variables: tuple[str, ...] = ()
    thresholds: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "thresholds", tuple(self.thresholds))
        if len(self.variables) > 3:
            raise TooManyVariablesError("at most three subgroup variables")
        if len(set(self.variables)) != len(self.variables):
            raise TooManyVariablesError("subgroup variables must be distinct")

    @property
    def threshold_map(self) -> dict[str, float]:
        return dict(self.thresholds)


@dataclass(frozen=True)
class SubgroupCell:
    key: tuple[tuple[str, str], ...]  # ((variable, side), ...)
    n: int
    mean: float | None
    median: float | None
    q1: float | None
    q3: float | None
    whisker_low: float | None
    whisker_high: float | None
    density: tuple[float, ...]

    def to_json(self) -> dict:
        return {
            "key": [[v, s] for v, s in self.key],
            "n": self.n,
            "mean": self.mean,
            "median": self.median,
            "q1": self.q1,
            "q3": self.q3,
            "whisker_low": self.whisker_low,
            "whisker_high": self.whisker_high,
            "density": list(self.density),
        }


@dataclass(frozen=True)
class SubgroupTable:
    cells: tuple[SubgroupCell, ...]
    grid: tuple[float, ...]
    sign_flip_overall: bool
    n_total: int

    def to_json(self) -> dict:
        return {
            "cells": [c.to_json() for c in self.cells],
            "grid": list(self.grid),
            "sign_flip_overall": self.sign_flip_overall,
            "n": self.n_total,
        }


def _silverman_bandwidth(values: np.ndarray) -> float:
    n = len(values)
    sd = float(values.std(ddof=1)) if n > 1 else 0.0
    iqr = float(np.subtract(*np.percentile(values, [75, 25]))) if n > 1 else 0.0
    spread = min(x for x in (sd, iqr / 1.34) if x > 0) if (sd > 0 or iqr > 0) else 0.0
    return 0.9 * spread * n ** (-0.2) if spread > 0 else 0.0


def _kde(values: np.ndarray, grid: np.ndarray, bandwidth: float) -> np.ndarray:
    z = (grid[:, None] - values[None, :]) / bandwidth
    return np.exp(-0.5 * z * z).sum(axis=1) / (len(values) * bandwidth * np.sqrt(2 * np.pi))


def _sides(ds: Dataset, name: str, threshold_map: dict[str, float], positions: np.ndarray):
    """(ordered side labels, membership masks) for one split variable."""
    if not ds.has_column(name):
        raise UnknownVariableError(f"unknown subgroup variable {name!r}")
    col = ds.column(name)
    values = col.values[positions]
    if col.kind is ColumnKind.BINARY:
        vals = values.astype(float)
        return ["0", "1"], [vals == 0.0, vals == 1.0]
    if col.kind is ColumnKind.CONTINUOUS:
        cutoff = threshold_map.get(name)
        if cutoff is None:
            cutoff = default_threshold(values)
        vals = values.astype(float)
        label = f"{cutoff:g}"
        return [f"<{label}", f">={label}"], [vals < cutoff, vals >= cutoff]
    raise ColumnKindError(f"subgroup variable {name!r} is categorical; one-hot expand it first")


def facet(ites, ds: Dataset, spec: SubgroupSpec, unit_ids=None) -> SubgroupTable:
    """Split the individual effects into subgroup cells.

    ``ds`` supplies the covariate values; by default its rows align
    positionally with ``ites``. For matched pairs pass ``unit_ids`` with the
    row id whose covariates represent each pair (conventionally the treated
    unit). Units missing any split variable are dropped first. Cells cover
    every side combination, share the same density grid over the global
    effect range, and partition the kept units.
    """
    ites = np.asarray(ites, dtype=float)
    if ites.size == 0:
        raise EmptyInputError("no individual treatment effects")
    if unit_ids is None:
        if ds.n_rows != len(ites):
            raise LengthMismatchError("dataset rows must align with effects")
        positions = np.arange(len(ites))
    else:
        if len(unit_ids) != len(ites):
            raise LengthMismatchError("unit_ids must align with effects")
        positions = ds.positions_of(list(unit_ids))

    # Complete cases over the split variables.
    missing = np.zeros(len(ites), dtype=bool)
    for name in spec.variables:
        if not ds.has_column(name):
            raise UnknownVariableError(f"unknown subgroup variable {name!r}")
        missing |= ds.column(name).missing_mask()[positions]
    if missing.any():
        log.info("facet: dropped %d units missing subgroup variables", int(missing.sum()))
        ites, positions = ites[~missing], positions[~missing]
        if ites.size == 0:
            raise EmptyInputError("no units left after dropping missing values")

    threshold_map = spec.threshold_map
    per_variable = [_sides(ds, name, threshold_map, positions) for name in spec.variables]

    cell_masks: list[tuple[tuple[tuple[str, str], ...], np.ndarray]] = []
    if not spec.variables:
        cell_masks.append(((), np.ones(len(ites), dtype=bool)))
    else:
        side_indices = [range(len(sides)) for sides, _ in per_variable]
        for combo in itertools.product(*side_indices):
            key = tuple(
                (spec.variables[v], per_variable[v][0][s]) for v, s in enumerate(combo)
            )
            mask = np.ones(len(ites), dtype=bool)
            for v, s in enumerate(combo):
                mask &= per_variable[v][1][s]
            cell_masks.append((key, mask))

    # Shared density grid over the global effect range, padded by the largest
    # cell bandwidth so kernel mass stays on the grid.
    bandwidths = {}
    for key, mask in cell_masks:
        values = ites[mask]
        if values.size:
            bandwidths[key] = _silverman_bandwidth(values)
    span = float(ites.max() - ites.min())
    fallback = span / 10 if span > 0 else 1.0
    bandwidths = {k: (b if b > 0 else fallback) for k, b in bandwidths.items()}
    pad = 5.0 * max(bandwidths.values())
    grid = np.linspace(float(ites.min()) - pad, float(ites.max()) + pad, KDE_GRID_POINTS)

    cells = []
    means = []
    for key, mask in cell_masks:
        values = ites[mask]
        if values.size == 0:
            cells.append(SubgroupCell(key, 0, None, None, None, None, None, None,
                                      tuple(np.zeros(KDE_GRID_POINTS).tolist())))
            continue
        q1, med, q3 = np.percentile(values, [25, 50, 75])
        iqr = q3 - q1
        inside = values[(values >= q1 - 1.5 * iqr) & (values <= q3 + 1.5 * iqr)]
        density = _kde(values, grid, bandwidths[key])
        mean = float(values.mean())
        means.append(mean)
        cells.append(SubgroupCell(
            key=key,
            n=int(values.size),
            mean=mean,
            median=float(med),
            q1=float(q1),
            q3=float(q3),
            whisker_low=float(inside.min()),
            whisker_high=float(inside.max()),
            density=tuple(density.tolist()),
        ))

    sign_flip = any(m > 0 for m in means) and any(m < 0 for m in means)
    return SubgroupTable(tuple(cells), tuple(grid.tolist()), sign_flip, int(ites.size))
