"""Goodness-of-fit and model-selection statistics.

The objective for a model over N points is J = sum of squared residuals,
so J = N * RMSE^2. Model comparison shares one error-variance estimate:
J* is the mean J of the thirteen individual predictors on the evaluation
set and sigma_hat2 = J* / N. With that fixed variance,

    AIC  = J / sigma_hat2 + 2 k
    AICc = AIC + 2 k (k + 1) / (N - k - 1)

where k counts the calibrated weights: 1 for an individual predictor (its
own implicit weight), the member count for an ensemble, and the summed
member count across strata for a stratified ensemble.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InputError


def rmse(predicted, observed):
    predicted = np.asarray(predicted, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    if predicted.shape != observed.shape:
        raise InputError(f"shape mismatch: {predicted.shape} vs {observed.shape}")
    if predicted.size == 0:
        raise InputError("rmse of zero points")
    return float(np.sqrt(np.mean((predicted - observed) ** 2)))


def j_star(j_values):
    """Mean objective over a set of models on a common evaluation set."""
    j_values = np.asarray(j_values, dtype=np.float64)
    if j_values.size == 0:
        raise InputError("j_star of zero models")
    return float(np.mean(j_values))


def sigma_hat2(j_star_value, n_points):
    """Shared error-variance estimate J* / N."""
    if n_points <= 0:
        raise InputError("n_points must be positive")
    return float(j_star_value) / float(n_points)


@dataclass(frozen=True)
class FitSummary:
    """One model's fit on one evaluation set."""

    n_points: int
    n_params: int
    rmse: float
    j: float

    def __post_init__(self):
        if self.n_points <= 0:
            raise InputError("n_points must be positive")
        if self.n_params < 0:
            raise InputError("n_params must be non-negative")
        expected = self.n_points * self.rmse ** 2
        scale = max(abs(expected), 1e-300)
        if abs(self.j - expected) > 1e-10 * scale:
            raise InputError(f"inconsistent J: {self.j} vs N*RMSE^2 = {expected}")

    @classmethod
    def from_predictions(cls, predicted, observed, n_params):
        predicted = np.asarray(predicted, dtype=np.float64)
        observed = np.asarray(observed, dtype=np.float64)
        r = rmse(predicted, observed)
        return cls(n_points=predicted.size, n_params=n_params,
                   rmse=r, j=predicted.size * r ** 2)

    @classmethod
    def from_rmse(cls, rmse_value, n_points, n_params):
        return cls(n_points=n_points, n_params=n_params,
                   rmse=float(rmse_value), j=n_points * float(rmse_value) ** 2)


@dataclass(frozen=True)
class SelectionContext:
    """Shared variance context for comparing models on one evaluation set."""

    j_star: float
    sigma_hat2: float

    def __post_init__(self):
        if self.sigma_hat2 <= 0.0:
            raise InputError("sigma_hat2 must be positive")

    @classmethod
    def from_j_values(cls, j_values, n_points):
        js = j_star(j_values)
        return cls(j_star=js, sigma_hat2=sigma_hat2(js, n_points))


def aic(fit, context):
    return fit.j / context.sigma_hat2 + 2.0 * fit.n_params


def aicc(fit, context):
    denom = fit.n_points - fit.n_params - 1
    if denom <= 0:
        raise InputError(
            f"AICc undefined for n_points={fit.n_points}, n_params={fit.n_params}")
    return aic(fit, context) + 2.0 * fit.n_params * (fit.n_params + 1) / denom


REPORT_COLUMNS = ("model", "n_points", "n_params", "rmse", "j", "aic", "aicc")


def write_report(path, rows):
    """Tab-delimited model comparison table.

    rows: (model name, FitSummary or None, aic, aicc); None marks a model
    that could not be evaluated on this dataset.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for model, fit, aic_value, aicc_value in rows:
            if fit is None:
                writer.writerow((model, "", "", "not_evaluable", "", "", ""))
                continue
            writer.writerow((
                model, fit.n_points, fit.n_params,
                f"{fit.rmse:.6f}", f"{fit.j:.6f}",
                f"{aic_value:.2f}", f"{aicc_value:.2f}",
            ))
