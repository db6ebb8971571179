"""Propensity-score estimation and inverse-probability weighting.

The estimator is ridge-penalized logistic regression fit by iteratively
reweighted least squares (IRLS, i.e. Newton steps with step-halving) on
internally standardized covariates. The ridge term keeps coefficients finite
under perfect separation; the intercept is never penalized. Fitted scores are
clipped away from 0 and 1 so downstream inverse weights stay finite.

Externally computed scores are accepted everywhere scores are consumed; this
module is just the built-in default.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, binary_flags, drop_missing, numeric_matrix
from .errors import (
    DegenerateTreatmentError,
    EmptyInputError,
    LengthMismatchError,
    MissingCovariateError,
    MissingValuesError,
    ScoreOutOfRangeError,
)

log = logging.getLogger(__name__)

SCORE_CLIP = 1e-6


def sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta, dtype=float)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ez = np.exp(eta[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logit(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)


@dataclass
class PropensityModel:
    covariate_names: tuple[str, ...]
    intercept: float
    coefficients: np.ndarray  # per covariate, original (unstandardized) scale
    converged: bool
    n_iterations: int
    ridge: float
    constant_covariates: tuple[str, ...] = ()
    n_dropped_rows: int = 0
    loglik_trace: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if len(self.coefficients) != len(self.covariate_names):
            raise LengthMismatchError("one coefficient per covariate required")
        if not np.isfinite(self.coefficients).all() or not np.isfinite(self.intercept):
            raise ScoreOutOfRangeError("non-finite model coefficients")

    def to_json(self) -> dict:
        return {
            "covariates": list(self.covariate_names),
            "intercept": self.intercept,
            "coefficients": self.coefficients.tolist(),
            "lambda": self.ridge,
            "converged": self.converged,
            "n_iterations": self.n_iterations,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PropensityModel":
        return cls(
            covariate_names=tuple(doc["covariates"]),
            intercept=float(doc["intercept"]),
            coefficients=np.asarray(doc["coefficients"], dtype=float),
            converged=bool(doc["converged"]),
            n_iterations=int(doc["n_iterations"]),
            ridge=float(doc["lambda"]),
        )


@dataclass
class WeightVector:
    weights: np.ndarray
    stabilized: bool = False

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if not np.isfinite(self.weights).all() or (self.weights <= 0).any():
            raise ScoreOutOfRangeError("weights must be finite and positive")

    def to_json(self) -> dict:
        return {"weights": self.weights.tolist(), "stabilized": self.stabilized}


# --- penalized likelihood ----------------------------------------------------


def penalized_loglik(design: np.ndarray, y: np.ndarray, beta: np.ndarray, ridge: float) -> float:
    """Bernoulli log-likelihood minus (ridge/2) * ||slopes||^2.

    ``design`` includes the intercept column first; beta[0] is unpenalized.
    """
    eta = design @ beta
    # log(1 + exp(eta)) computed stably
    ll = float(y @ eta - np.logaddexp(0.0, eta).sum())
    return ll - 0.5 * ridge * float(beta[1:] @ beta[1:])


def penalized_gradient(design: np.ndarray, y: np.ndarray, beta: np.ndarray, ridge: float) -> np.ndarray:
    """Analytic gradient of :func:`penalized_loglik` with respect to beta."""
    p = sigmoid(design @ beta)
    grad = design.T @ (y - p)
    grad[1:] -= ridge * beta[1:]
    return grad


def _irls(design: np.ndarray, y: np.ndarray, ridge: float, tol: float, max_iter: int):
    n, k = design.shape
    beta = np.zeros(k)
    penalty_mask = np.ones(k)
    penalty_mask[0] = 0.0
    pll = penalized_loglik(design, y, beta, ridge)
    trace = [pll]
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        p = sigmoid(design @ beta)
        w = np.clip(p * (1.0 - p), 1e-12, None)
        grad = penalized_gradient(design, y, beta, ridge)
        hessian = design.T @ (design * w[:, None]) + ridge * np.diag(penalty_mask)
        try:
            delta = np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(hessian, grad, rcond=None)[0]

        # Step-halving: never accept a step that lowers the penalized
        # log-likelihood.
        step = 1.0
        accepted = False
        for _ in range(40):
            candidate = beta + step * delta
            cand_pll = penalized_loglik(design, y, candidate, ridge)
            if cand_pll >= pll:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True  # numerically at the optimum
            break
        change = float(np.max(np.abs(candidate - beta)))
        beta, pll = candidate, cand_pll
        trace.append(pll)
        if change < tol:
            converged = True
            break

    return beta, converged, iterations, tuple(trace)


def fit_propensity(
    ds: Dataset,
    covariates: list[str],
    treatment: str,
    ridge: float = 1e-6,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> PropensityModel:
    """Fit P(T=1 | covariates) on complete cases.

    Covariates are standardized internally and the fitted coefficients are
    back-transformed to the original scale. Constant covariates are excluded
    from the design (their coefficient is reported as 0 and their names in
    ``constant_covariates``). Non-convergence is reported in the model, not
    raised.
    """
    used = list(covariates) + [treatment]
    complete, n_dropped = drop_missing(ds, used)
    if n_dropped:
        log.info("fit_propensity: dropped %d incomplete rows", n_dropped)

    y = binary_flags(complete, treatment)
    if y.min() == y.max():
        raise DegenerateTreatmentError("treatment column has a single class")

    x = numeric_matrix(complete, covariates)
    means = x.mean(axis=0)
    sds = x.std(axis=0)
    active = sds > 0
    constant = tuple(name for name, keep in zip(covariates, active) if not keep)
    if constant:
        log.warning("fit_propensity: constant covariates get coefficient 0: %s", constant)

    z = (x[:, active] - means[active]) / sds[active]
    design = np.column_stack([np.ones(len(y)), z])
    beta, converged, iterations, trace = _irls(design, y, ridge, tol, max_iter)

    slopes = np.zeros(len(covariates))
    slopes[active] = beta[1:] / sds[active]
    intercept = float(beta[0] - np.sum(beta[1:] * means[active] / sds[active]))

    return PropensityModel(
        covariate_names=tuple(covariates),
        intercept=intercept,
        coefficients=slopes,
        converged=converged,
        n_iterations=iterations,
        ridge=ridge,
        constant_covariates=constant,
        n_dropped_rows=n_dropped,
        loglik_trace=trace,
    )


def predict(model: PropensityModel, ds: Dataset) -> np.ndarray:
    """Scores sigmoid(intercept + X beta), clipped to [1e-6, 1 - 1e-6]."""
    for name in model.covariate_names:
        if not ds.has_column(name):
            raise MissingCovariateError(f"model covariate {name!r} not in dataset")
    x = numeric_matrix(ds, list(model.covariate_names))
    if np.isnan(x).any():
        raise MissingValuesError("prediction requires complete covariate rows")
    eta = model.intercept + x @ model.coefficients
    return np.clip(sigmoid(eta), SCORE_CLIP, 1.0 - SCORE_CLIP)


# --- weights and score diagnostics ------------------------------------------


def ipw_weights(scores, treatment_flags, stabilized: bool = False) -> WeightVector:
    """1/p for treated rows and 1/(1-p) for controls; optionally stabilized
    by the empirical marginal treatment rates."""
    scores = np.asarray(scores, dtype=float)
    flags = np.asarray(treatment_flags, dtype=float)
    if len(scores) != len(flags):
        raise LengthMismatchError("scores and treatment flags differ in length")
    if len(scores) == 0:
        raise EmptyInputError("no samples")
    if ((scores <= 0) | (scores >= 1) | ~np.isfinite(scores)).any():
        raise ScoreOutOfRangeError("scores must lie strictly inside (0, 1)")
    if not np.isin(flags, (0.0, 1.0)).all():
        raise ScoreOutOfRangeError("treatment flags must be 0/1")

    treated = flags == 1.0
    weights = np.where(treated, 1.0 / scores, 1.0 / (1.0 - scores))
    if stabilized:
        rate = float(treated.mean())
        weights = weights * np.where(treated, rate, 1.0 - rate)
    return WeightVector(weights, stabilized=stabilized)


def propensity_histogram(scores, treatment_flags, n_bins: int = 20) -> dict:
    """Per-group counts over equal-width bins spanning the fixed [0, 1] domain.

    The domain is fixed (not data min/max) so successive refinement rounds
    stay visually comparable. The last bin is closed on the right, so a score
    of exactly 1.0 lands in it.
    """
    scores = np.asarray(scores, dtype=float)
    flags = np.asarray(treatment_flags, dtype=float)
    if len(scores) != len(flags):
        raise LengthMismatchError("scores and treatment flags differ in length")
    if len(scores) == 0:
        raise EmptyInputError("no samples")
    if n_bins < 1:
        raise EmptyInputError("n_bins must be at least 1")
    if ((scores < 0) | (scores > 1)).any():
        raise ScoreOutOfRangeError("scores must lie in [0, 1]")

    idx = np.clip(np.floor(scores * n_bins).astype(int), 0, n_bins - 1)
    treated = np.bincount(idx[flags == 1.0], minlength=n_bins)
    control = np.bincount(idx[flags == 0.0], minlength=n_bins)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    return {
        "bin_edges": edges.tolist(),
        "treated": treated.tolist(),
        "control": control.tolist(),
    }


def select_by_score(scores, lo: float, hi: float, row_ids=None) -> tuple[list[int], list[int]]:
    """Rows whose score lies in the closed range [lo, hi], plus the complement.

    Both endpoints are inclusive, matching a pixel-brush mental model. Returns
    (selection, inverse) as row-id lists partitioning all rows.
    """
    if lo > hi:
        raise ScoreOutOfRangeError(f"range lower bound {lo} exceeds upper bound {hi}")
    scores = np.asarray(scores, dtype=float)
    ids = np.arange(len(scores)) if row_ids is None else np.asarray(row_ids)
    if len(ids) != len(scores):
        raise LengthMismatchError("row_ids and scores differ in length")
    inside = (scores >= lo) & (scores <= hi)
    return ids[inside].tolist(), ids[~inside].tolist()
