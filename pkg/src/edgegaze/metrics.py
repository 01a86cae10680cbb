"""Accuracy and statistical evaluation: Euclidean error, RMSE, R², k-fold
splits, one-way ANOVA with an incomplete-beta F survival function."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc


def euclid_errors(preds, truths) -> np.ndarray:
    """Per-sample Euclidean distance in cm between predicted and true points."""
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.shape != truths.shape:
        raise ValueError(f"shape mismatch: {preds.shape} vs {truths.shape}")
    if preds.ndim != 2 or preds.shape[1] != 2:
        raise ValueError(f"expected (n, 2) gaze points, got {preds.shape}")
    return np.sqrt(np.sum((preds - truths) ** 2, axis=1))


def mean_euclid(distances) -> float:
    distances = np.asarray(distances, dtype=np.float64)
    if distances.size == 0:
        raise ValueError("no distances")
    return float(distances.mean())


def rmse(distances) -> float:
    """Root mean square of the distances (>= their mean, by Jensen)."""
    distances = np.asarray(distances, dtype=np.float64)
    if distances.size == 0:
        raise ValueError("no distances")
    return float(np.sqrt(np.mean(distances ** 2)))


def r_squared(preds, truths) -> float:
    """1 - SS_res/SS_tot pooled over both coordinates."""
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.shape != truths.shape:
        raise ValueError(f"shape mismatch: {preds.shape} vs {truths.shape}")
    ss_res = float(np.sum((preds - truths) ** 2))
    ss_tot = float(np.sum((truths - truths.mean(axis=0)) ** 2))
    if ss_tot == 0.0:
        raise ValueError("R^2 undefined: zero total variance in the truths")
    return 1.0 - ss_res / ss_tot


def kfold_indices(n: int, k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Seeded shuffle split into k disjoint folds with sizes differing by <= 1."""
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    order = np.random.default_rng(seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(order, k)]


@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    df_between: int
    df_within: int
    p_value: float


def anova_oneway(groups) -> AnovaResult:
    """Standard one-way ANOVA over >= 2 groups of >= 2 samples each.

    The p-value is the F survival function computed with the regularized
    incomplete beta: I_{dfw/(dfw + dfb F)}(dfw/2, dfb/2).
    """
    arrays = [np.asarray(g, dtype=np.float64).ravel() for g in groups]
    if len(arrays) < 2:
        raise ValueError("ANOVA needs at least 2 groups")
    if any(a.size < 2 for a in arrays):
        raise ValueError("every group needs at least 2 samples")
    n_total = sum(a.size for a in arrays)
    grand = np.concatenate(arrays).mean()
    ss_between = sum(a.size * (a.mean() - grand) ** 2 for a in arrays)
    ss_within = sum(float(np.sum((a - a.mean()) ** 2)) for a in arrays)
    df_between = len(arrays) - 1
    df_within = n_total - len(arrays)
    if ss_within == 0.0:
        raise ValueError("zero within-group variance: F is undefined"
                         if ss_between > 0 else
                         "zero variance everywhere: F is undefined")
    f_stat = (ss_between / df_between) / (ss_within / df_within)
    p = float(betainc(df_within / 2.0, df_between / 2.0,
                      df_within / (df_within + df_between * f_stat)))
    return AnovaResult(f_stat=float(f_stat), df_between=df_between,
                       df_within=df_within, p_value=p)


@dataclass
class EvalResult:
    """Accuracy summary for one model; mirrors the comparison-table layout."""

    model: str
    mean_euclid_cm: float
    rmse_cm: float
    r2: float
    n: int
    fold_rmse_cm: list[float] = field(default_factory=list)
    fold_r2: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("n must be positive")
        if not 0.0 <= self.mean_euclid_cm <= self.rmse_cm + 1e-12:
            raise ValueError(
                f"need 0 <= mean ({self.mean_euclid_cm}) <= rmse ({self.rmse_cm})")

    CSV_HEADER = "model,rmse_cm,r2,mean_euclid_cm,n,fold_rmse_cm,fold_r2"

    def csv_row(self) -> str:
        folds_rmse = ";".join(repr(v) for v in self.fold_rmse_cm)
        folds_r2 = ";".join(repr(v) for v in self.fold_r2)
        return (f"{self.model},{self.rmse_cm!r},{self.r2!r},"
                f"{self.mean_euclid_cm!r},{self.n},{folds_rmse},{folds_r2}")

    @staticmethod
    def to_csv(results: list["EvalResult"]) -> str:
        return EvalResult.CSV_HEADER + "\n" + "\n".join(r.csv_row() for r in results) + "\n"

    @staticmethod
    def to_markdown(results: list["EvalResult"]) -> str:
        lines = ["| Model | RMSE (cm) | R² | Mean Euclid (cm) | n |",
                 "| --- | --- | --- | --- | --- |"]
        for r in results:
            lines.append(f"| {r.model} | {r.rmse_cm:.4f} | {r.r2:.4f} "
                         f"| {r.mean_euclid_cm:.4f} | {r.n} |")
        return "\n".join(lines) + "\n"


def evaluate_predictions(model: str, preds, truths,
                         fold_assignments=None) -> EvalResult:
    """Bundle the standard metrics (optionally per fold) into an EvalResult."""
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    distances = euclid_errors(preds, truths)
    result = EvalResult(model=model,
                        mean_euclid_cm=mean_euclid(distances),
                        rmse_cm=rmse(distances),
                        r2=r_squared(preds, truths),
                        n=len(distances))
    if fold_assignments is not None:
        for fold in fold_assignments:
            d = distances[fold]
            result.fold_rmse_cm.append(rmse(d))
            result.fold_r2.append(r_squared(preds[fold], truths[fold]))
    return result
