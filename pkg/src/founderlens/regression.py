"""Community-level outcome regressions and the ensemble significance rule.

Both model families share one right-hand side: five founder-trait means plus
the founder count. The binary sustainability outcome gets a logistic fit via
iteratively reweighted least squares with Wald standard errors and Tjur's R2;
continuous outcomes get OLS with classical standard errors and t p-values.
A trait-outcome link counts as supported only when at least three of the four
trait-source regressions are significant with one shared sign.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .calibration import TRAITS
from .errors import ContractError, SampleSizeError, ValidationError
from .learners import FAMILIES, adjusted_r2

logger = logging.getLogger(__name__)

PREDICTORS = TRAITS + ("n_founders",)
TERMS = ("intercept",) + PREDICTORS

IRLS_TOL = 1e-8
IRLS_MAX_ITER = 100
# coefficient magnitudes past this are a separation symptom, not a real MLE
SEPARATION_BOUND = 30.0

VERDICTS = ("supported_positive", "supported_negative", "unsupported")


@dataclass(frozen=True, eq=False)
class RegressionDesign:
    """Per-community rows: five trait means, n_founders, one outcome."""

    family: str  # logistic | linear
    trait_source: str  # which learner family produced the trait means
    outcome: str
    predictor_names: tuple
    X: np.ndarray
    y: np.ndarray
    community_ids: tuple = ()
    standardized: bool = False

    def __post_init__(self):
        if self.family not in ("logistic", "linear"):
            raise ValidationError(f"unknown regression family {self.family!r}")
        if self.X.ndim != 2 or self.X.shape != (len(self.y), len(self.predictor_names)):
            raise ValidationError("design shape must be (n_rows, n_predictors)")
        if not (np.isfinite(self.X).all() and np.isfinite(self.y).all()):
            raise ValidationError("design contains missing or non-finite cells")
        if self.family == "logistic" and not set(np.unique(self.y)) <= {0.0, 1.0}:
            raise ValidationError("logistic outcomes must be 0/1")

    @property
    def n(self) -> int:
        return len(self.y)


def build_design(
    trait_rows: Mapping,
    outcome_rows: Mapping,
    *,
    trait_source: str,
    outcome: str,
    family: str,
    standardize: bool = False,
    log_outcome: bool = False,
) -> RegressionDesign:
    """Join founder-trait means with one outcome column.

    trait_rows: community_id -> CommunityFounderTraits; outcome_rows:
    community_id -> CommunityOutcomes. Communities missing either side, or
    with the outcome undefined, drop out; the per-metric N is whatever
    remains. standardize rescales predictors (and linear outcomes) to z
    scores so coefficients read as standardized betas.
    """
    if trait_source not in FAMILIES:
        raise ValidationError(f"unknown trait source {trait_source!r}")
    rows = []
    values = []
    ids = []
    for cid in sorted(trait_rows):
        if cid not in outcome_rows:
            continue
        out = outcome_rows[cid]
        value = getattr(out, outcome, None)
        if outcome == "sustained":
            value = 1.0 if out.sustained else 0.0
        if value is None:
            continue
        traits = trait_rows[cid]
        rows.append(list(traits.traits[trait_source]) + [float(traits.n_founders)])
        values.append(float(value))
        ids.append(cid)
    if not rows:
        raise SampleSizeError(f"no communities with trait means and outcome {outcome!r}")
    X = np.asarray(rows, dtype=float)
    y = np.asarray(values, dtype=float)
    if log_outcome:
        if family == "logistic":
            raise ValidationError("log transform applies to linear outcomes only")
        if (y <= 0).any():
            raise ValidationError(f"outcome {outcome!r} has non-positive values; cannot take log")
        y = np.log(y)
    if standardize:
        sd = X.std(axis=0)
        if (sd == 0).any():
            flat = [PREDICTORS[j] for j in np.flatnonzero(sd == 0)]
            raise ValidationError(f"cannot standardize constant predictors: {flat}")
        X = (X - X.mean(axis=0)) / sd
        if family == "linear":
            ysd = y.std()
            if ysd == 0:
                raise ValidationError(f"outcome {outcome!r} is constant; cannot standardize")
            y = (y - y.mean()) / ysd
    return RegressionDesign(
        family=family,
        trait_source=trait_source,
        outcome=outcome,
        predictor_names=PREDICTORS,
        X=X,
        y=y,
        community_ids=tuple(ids),
        standardized=standardize,
    )


@dataclass(frozen=True, eq=False)
class FitResult:
    family: str
    trait_source: str
    outcome: str
    terms: tuple
    coefficients: np.ndarray
    standard_errors: np.ndarray
    p_values: np.ndarray
    fit_statistic: float
    fit_statistic_name: str
    residuals: np.ndarray
    n: int
    converged: bool = True
    separation_flag: bool = False

    def __post_init__(self):
        k = len(self.terms)
        if not (len(self.coefficients) == len(self.standard_errors) == len(self.p_values) == k):
            raise ValidationError("coefficient, SE, and p-value lengths must match terms")
        if ((self.p_values < 0) | (self.p_values > 1)).any():
            raise ValidationError("p-values must lie in [0,1]")

    def term_index(self, term: str) -> int:
        try:
            return self.terms.index(term)
        except ValueError:
            raise ContractError(f"unknown regression term {term!r}")


def _named_collinear_columns(design_matrix: np.ndarray, names: Sequence[str]) -> list:
    kept: list[int] = []
    offenders = []
    for j in range(design_matrix.shape[1]):
        candidate = design_matrix[:, kept + [j]]
        if np.linalg.matrix_rank(candidate) == len(kept) + 1:
            kept.append(j)
        else:
            offenders.append(names[j])
    return offenders


def fit_ols(design: RegressionDesign) -> FitResult:
    """Least squares with classical SEs and t-based two-sided p-values."""
    if design.family != "linear":
        raise ValidationError("fit_ols expects a linear design")
    n, p = design.X.shape
    k = p + 1
    if n <= k + 1:
        raise SampleSizeError(f"OLS needs n > {k + 1}, got {n}")
    D = np.column_stack([np.ones(n), design.X])
    if np.linalg.matrix_rank(D) < k:
        offenders = _named_collinear_columns(D, ["intercept", *design.predictor_names])
        raise ValidationError(f"design is rank-deficient; collinear columns: {offenders}")
    gram_inv = np.linalg.inv(D.T @ D)
    coef = gram_inv @ (D.T @ design.y)
    residuals = design.y - D @ coef
    sse = float(residuals @ residuals)
    sigma2 = sse / (n - k)
    se = np.sqrt(np.diag(gram_inv) * sigma2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, coef / se, np.inf)
    p_values = 2.0 * stats.t.sf(np.abs(t), df=n - k)
    total = float(((design.y - design.y.mean()) ** 2).sum())
    r2 = 1.0 - sse / total if total > 0 else 0.0
    return FitResult(
        family="linear",
        trait_source=design.trait_source,
        outcome=design.outcome,
        terms=TERMS,
        coefficients=coef,
        standard_errors=se,
        p_values=p_values,
        fit_statistic=adjusted_r2(r2, n, p),
        fit_statistic_name="adjusted_r2",
        residuals=residuals,
        n=n,
    )


def tjur_r2(fitted_probs: np.ndarray, outcomes: np.ndarray) -> float:
    """Mean fitted probability among positives minus mean among negatives."""
    fitted_probs = np.asarray(fitted_probs, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    ones = fitted_probs[outcomes == 1]
    zeros = fitted_probs[outcomes == 0]
    if len(ones) == 0 or len(zeros) == 0:
        raise ValidationError("Tjur's R2 is undefined with a single outcome class")
    return float(ones.mean() - zeros.mean())


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(eta, -30.0, 30.0)))


def fit_logistic(design: RegressionDesign) -> FitResult:
    """Maximum likelihood by IRLS with Wald SEs from the observed information.

    Complete separation shows up as runaway coefficients; the fit is then
    flagged, kept at the iteration cap, and downstream marginal effects
    refuse to use it.
    """
    if design.family != "logistic":
        raise ValidationError("fit_logistic expects a logistic design")
    classes = set(np.unique(design.y))
    if classes != {0.0, 1.0}:
        raise ValidationError("logistic fit needs both outcome classes present")
    n, p = design.X.shape
    k = p + 1
    D = np.column_stack([np.ones(n), design.X])
    beta = np.zeros(k)
    converged = False
    separation = False
    for _ in range(IRLS_MAX_ITER):
        pi = _sigmoid(D @ beta)
        w = np.maximum(pi * (1.0 - pi), 1e-10)
        info = D.T @ (D * w[:, None])
        score = D.T @ (design.y - pi)
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            separation = True
            break
        beta = beta + step
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            separation = True
        if np.max(np.abs(step)) < IRLS_TOL:
            converged = True
            break
    if separation:
        logger.warning(
            "logistic fit for %s/%s shows separation symptoms; result flagged",
            design.trait_source,
            design.outcome,
        )
        converged = False
    pi = _sigmoid(D @ beta)
    w = np.maximum(pi * (1.0 - pi), 1e-10)
    info = D.T @ (D * w[:, None])
    cov = np.linalg.pinv(info)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / se, np.inf)
    p_values = 2.0 * stats.norm.sf(np.abs(z))
    return FitResult(
        family="logistic",
        trait_source=design.trait_source,
        outcome=design.outcome,
        terms=TERMS,
        coefficients=beta,
        standard_errors=se,
        p_values=p_values,
        fit_statistic=tjur_r2(pi, design.y),
        fit_statistic_name="tjur_r2",
        residuals=design.y - pi,
        n=n,
        converged=converged,
        separation_flag=separation,
    )


def fit_design(design: RegressionDesign) -> FitResult:
    return fit_logistic(design) if design.family == "logistic" else fit_ols(design)


def log_likelihood(design: RegressionDesign, coefficients: np.ndarray) -> float:
    """Bernoulli log-likelihood of a logistic design at given coefficients."""
    D = np.column_stack([np.ones(design.n), design.X])
    eta = np.clip(D @ np.asarray(coefficients, dtype=float), -30.0, 30.0)
    return float(np.sum(design.y * eta - np.log1p(np.exp(eta))))


def average_marginal_effect(fit: FitResult, design: RegressionDesign, j: int) -> float:
    """c_j times the mean of pi(1-pi): the per-unit average probability change."""
    if fit.family != "logistic":
        raise ValidationError("marginal effects are defined for the logistic fit")
    if not fit.converged:
        raise ContractError("refusing marginal effects from a non-converged fit")
    if not 0 <= j < len(design.predictor_names):
        raise ContractError(f"predictor index {j} out of range")
    D = np.column_stack([np.ones(design.n), design.X])
    pi = _sigmoid(D @ fit.coefficients)
    return float(fit.coefficients[j + 1] * np.mean(pi * (1.0 - pi)))


def ensemble_verdict(fits: Mapping, term: str, alpha: float = 0.05) -> str:
    """Majority vote over the four trait-source fits for one term.

    Supported iff at least 3 of 4 are significant at alpha and every
    significant coefficient carries the same sign.
    """
    missing = [f for f in FAMILIES if f not in fits]
    if missing:
        raise ContractError(f"ensemble verdict needs all four fits; missing {missing}")
    signs = []
    for source in FAMILIES:
        fit = fits[source]
        idx = fit.term_index(term)
        if fit.p_values[idx] < alpha:
            coef = fit.coefficients[idx]
            signs.append(0 if coef == 0 else (1 if coef > 0 else -1))
    if len(signs) >= 3 and len(set(signs)) == 1 and signs[0] != 0:
        return "supported_positive" if signs[0] > 0 else "supported_negative"
    return "unsupported"


def fit_to_dict(fit: FitResult) -> dict:
    """JSON-safe snapshot of a fit; arrays become lists."""
    return {
        "family": fit.family,
        "trait_source": fit.trait_source,
        "outcome": fit.outcome,
        "terms": list(fit.terms),
        "coefficients": [float(v) for v in fit.coefficients],
        "standard_errors": [float(v) for v in fit.standard_errors],
        "p_values": [float(v) for v in fit.p_values],
        "fit_statistic": float(fit.fit_statistic),
        "fit_statistic_name": fit.fit_statistic_name,
        "residuals": [float(v) for v in fit.residuals],
        "n": int(fit.n),
        "converged": bool(fit.converged),
        "separation_flag": bool(fit.separation_flag),
    }


def fit_from_dict(payload: Mapping) -> FitResult:
    return FitResult(
        family=payload["family"],
        trait_source=payload["trait_source"],
        outcome=payload["outcome"],
        terms=tuple(payload["terms"]),
        coefficients=np.asarray(payload["coefficients"], dtype=float),
        standard_errors=np.asarray(payload["standard_errors"], dtype=float),
        p_values=np.asarray(payload["p_values"], dtype=float),
        fit_statistic=float(payload["fit_statistic"]),
        fit_statistic_name=payload["fit_statistic_name"],
        residuals=np.asarray(payload["residuals"], dtype=float),
        n=int(payload["n"]),
        converged=bool(payload["converged"]),
        separation_flag=bool(payload["separation_flag"]),
    )
