"""Greedy 1:1 nearest-neighbor matching on propensity score or covariates.

Treated units are processed hardest-first (descending propensity) by default;
each takes its nearest eligible control within the caliper, with distance ties
broken by the smaller control row id. The algorithm is deliberately greedy,
not optimal, and fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .dataset import Dataset, binary_flags, numeric_matrix
from .errors import (
    LengthMismatchError,
    MissingScoresError,
    NoControlsError,
    ScoreOutOfRangeError,
    SingularCovarianceError,
)
from .propensity import logit


class Metric(str, Enum):
    PROPENSITY = "propensity"        # |p_t - p_c|
    LOGIT = "logit"                  # |logit(p_t) - logit(p_c)|
    MAHALANOBIS = "mahalanobis"      # pooled-covariance distance on covariates


class MatchOrder(str, Enum):
    DESCENDING_PROPENSITY = "descending_propensity"
    DATA = "data"


@dataclass(frozen=True)
class MatchSpec:
    metric: Metric = Metric.LOGIT
    covariates: tuple[str, ...] = ()
    caliper: float | None = None
    with_replacement: bool = False
    order: MatchOrder = MatchOrder.DESCENDING_PROPENSITY

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "order", MatchOrder(self.order))
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if self.caliper is not None and not self.caliper > 0:
            raise ScoreOutOfRangeError("caliper must be positive")
        if self.metric is Metric.MAHALANOBIS and not self.covariates:
            raise MissingScoresError("mahalanobis metric needs at least one covariate")

    def to_json(self) -> dict:
        return {
            "metric": self.metric.value,
            "covariates": list(self.covariates),
            "caliper": self.caliper,
            "with_replacement": self.with_replacement,
            "order": self.order.value,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MatchSpec":
        return cls(
            metric=Metric(doc.get("metric", Metric.LOGIT.value)),
            covariates=tuple(doc.get("covariates", ())),
            caliper=doc.get("caliper"),
            with_replacement=bool(doc.get("with_replacement", False)),
            order=MatchOrder(doc.get("order", MatchOrder.DESCENDING_PROPENSITY.value)),
        )


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...]  # (treated id, control id, distance)
    unmatched_treated: tuple[int, ...]
    unmatched_control: tuple[int, ...]
    spec: MatchSpec

    def to_json(self) -> dict:
        return {
            "pairs": [[t, c, d] for t, c, d in self.pairs],
            "unmatched_treated": list(self.unmatched_treated),
            "unmatched_control": list(self.unmatched_control),
            "spec": self.spec.to_json(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MatchResult":
        return cls(
            pairs=tuple((int(t), int(c), float(d)) for t, c, d in doc["pairs"]),
            unmatched_treated=tuple(int(i) for i in doc["unmatched_treated"]),
            unmatched_control=tuple(int(i) for i in doc["unmatched_control"]),
            spec=MatchSpec.from_json(doc.get("spec", {})),
        )


def default_logit_caliper(scores) -> float:
    """0.2 standard deviations of the score logits, the usual convention."""
    values = logit(np.asarray(scores, dtype=float))
    sd = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return 0.2 * sd if sd > 0 else np.inf


def _pooled_inverse_covariance(x: np.ndarray, treated: np.ndarray) -> np.ndarray:
    groups = [x[treated], x[~treated]]
    k = x.shape[1]
    weighted = np.zeros((k, k))
    dof = 0
    for g in groups:
        if len(g) > 1:
            weighted += (len(g) - 1) * np.cov(g, rowvar=False).reshape(k, k)
            dof += len(g) - 1
    if dof == 0:
        raise SingularCovarianceError("too few units to estimate a covariance")
    cov = weighted / dof
    trace = float(np.trace(cov))
    try:
        return np.linalg.inv(cov)
    except np.linalg.LinAlgError:
        pass
    if trace <= 0:
        raise SingularCovarianceError("covariates have zero total variance")
    ridged = cov + (1e-8 * trace / k) * np.eye(k)
    try:
        return np.linalg.inv(ridged)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError("covariance singular even after ridge repair") from None


def match(ds: Dataset, treatment: str, spec: MatchSpec, scores=None) -> MatchResult:
    """Greedy 1:1 matching; see module docstring for the exact rule.

    Propensity metrics require ``scores`` aligned positionally with the
    dataset rows; a missing caliper for the logit metric defaults to
    0.2 SD of the logits (recorded in the returned spec).
    """
    flags = binary_flags(ds, treatment)
    treated_mask = flags == 1.0
    ids = ds.row_ids

    needs_scores = spec.metric in (Metric.PROPENSITY, Metric.LOGIT) or (
        spec.order is MatchOrder.DESCENDING_PROPENSITY
    )
    if needs_scores and scores is None:
        raise MissingScoresError(
            "scores are required for propensity metrics and descending-propensity order"
        )
    if scores is not None:
        scores = np.asarray(scores, dtype=float)
        if len(scores) != ds.n_rows:
            raise LengthMismatchError("scores must align with dataset rows")
        if ((scores <= 0) | (scores >= 1)).any():
            raise ScoreOutOfRangeError("scores must lie strictly inside (0, 1)")

    control_pos = np.flatnonzero(~treated_mask)  # ascending row id
    treated_pos = np.flatnonzero(treated_mask)
    if control_pos.size == 0:
        raise NoControlsError("no control units to match against")

    caliper = spec.caliper
    if caliper is None:
        caliper = default_logit_caliper(scores) if spec.metric is Metric.LOGIT else np.inf
    resolved = replace(spec, caliper=None if not np.isfinite(caliper) else float(caliper))

    # Per-unit match coordinates under the chosen metric.
    if spec.metric is Metric.PROPENSITY:
        coord = scores
        dist_to_controls = lambda i, avail: np.abs(coord[i] - coord[avail])
    elif spec.metric is Metric.LOGIT:
        coord = logit(scores)
        dist_to_controls = lambda i, avail: np.abs(coord[i] - coord[avail])
    else:
        x = numeric_matrix(ds, list(spec.covariates))
        usable = ~np.isnan(x).any(axis=1)
        inv_cov = _pooled_inverse_covariance(x[usable], treated_mask[usable])

        def dist_to_controls(i, avail):
            diff = x[avail] - x[i]
            return np.sqrt(np.einsum("ij,jk,ik->i", diff, inv_cov, diff))

        treated_pos = treated_pos[usable[treated_pos]]
        control_pos = control_pos[usable[control_pos]]

    if spec.order is MatchOrder.DESCENDING_PROPENSITY:
        # Hardest-to-match first; ties resolved by ascending row id.
        order = np.lexsort((ids[treated_pos], -scores[treated_pos]))
        treated_order = treated_pos[order]
    else:
        treated_order = treated_pos

    available = control_pos.copy()
    used_controls: set[int] = set()
    pairs: list[tuple[int, int, float]] = []

    for i in treated_order:
        pool = available if not spec.with_replacement else control_pos
        if pool.size == 0:
            continue
        distances = dist_to_controls(i, pool)
        best = int(np.argmin(distances))  # first minimum = smallest control id
        if distances[best] > caliper:
            continue
        chosen = int(pool[best])
        pairs.append((int(ids[i]), int(ids[chosen]), float(distances[best])))
        used_controls.add(chosen)
        if not spec.with_replacement:
            available = available[available != chosen]

    # Units skipped for missing covariates count as unmatched too, hence the
    # full-group complements.
    matched_treated = {t for t, _, _ in pairs}
    unmatched_treated = sorted(
        int(i) for i in ids[treated_mask] if int(i) not in matched_treated
    )
    unmatched_control = sorted(
        int(i) for i in ids[~treated_mask] if int(i) not in {ids[p] for p in used_controls}
    )

    return MatchResult(tuple(pairs), tuple(unmatched_treated), tuple(unmatched_control), resolved)


def matched_cohort(ds: Dataset, result: MatchResult) -> Dataset:
    """Rows of all paired units, original row ids preserved.

    A zero-pair result yields a legal empty cohort; downstream statistics
    will reject it themselves.
    """
    wanted: set[int] = set()
    for t, c, _ in result.pairs:
        wanted.add(t)
        wanted.add(c)
    return ds.subset(wanted)
