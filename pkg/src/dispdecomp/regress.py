"""Least-squares fitting with named columns.

The engine is deliberately small: ordinary least squares through a
column-pivoted Householder QR factorization (never the normal equations),
with rank deficiency reported as a hard error that names a minimal set of
linearly dependent columns. Everything downstream (decompositions,
sensitivity analysis, benchmarking) is built on these two entry points.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.linalg

__all__ = ["EstimationError", "OlsFit", "fit_ols", "partial_r2"]

# Relative pivot threshold below which a diagonal entry of R marks the
# corresponding column as linearly dependent on the better-pivoted ones.
RANK_TOL = 1e-10

INTERCEPT = "intercept"


class EstimationError(ValueError):
    """Raised when a model cannot be estimated from the given data."""


@dataclass(frozen=True, eq=False)
class OlsFit:
    """Result of a least-squares fit.

    coefficients maps design column names (including "intercept" when one
    was fitted) to estimates, in design order. residual_sd uses the n - p
    denominator, p counting the intercept.
    """

    coefficients: dict[str, float]
    residuals: np.ndarray
    residual_sd: float
    r_squared: float
    n: int
    p: int

    def __post_init__(self) -> None:
        self.residuals.setflags(write=False)

    @property
    def intercept(self) -> float:
        return self.coefficients.get(INTERCEPT, 0.0)

    def coef(self, name: str) -> float:
        try:
            return self.coefficients[name]
        except KeyError:
            raise EstimationError(f"fit has no coefficient for {name!r}") from None

    def predict(self, columns: Mapping[str, np.ndarray], n: int | None = None) -> np.ndarray:
        """Evaluate the fitted linear function on new columns.

        n is only needed for intercept-only fits, where no column exists
        to infer the output length from.
        """
        acc: np.ndarray | None = None
        for name, beta in self.coefficients.items():
            if name == INTERCEPT:
                continue
            try:
                col = columns[name]
            except KeyError:
                raise EstimationError(f"predict: missing column {name!r}") from None
            term = beta * np.asarray(col, dtype=np.float64)
            acc = term if acc is None else acc + term
        if acc is None:
            if n is None:
                raise EstimationError("predict: length n required for an intercept-only fit")
            return np.full(n, self.intercept)
        return self.intercept + acc


def _dependent_set(r: np.ndarray, piv: np.ndarray, k: int, names: list[str]) -> list[str]:
    """Minimal set of mutually dependent columns, from the pivoted R factor.

    Column piv[k] is the first one whose pivot collapsed; expressing it in
    the basis of the k preceding pivot columns and keeping the columns with
    non-negligible weight yields a minimal dependent set.
    """
    dep = names[piv[k]]
    if k == 0:
        return [dep]
    coef = scipy.linalg.solve_triangular(r[:k, :k], r[:k, k], check_finite=False)
    scale = np.max(np.abs(coef)) if coef.size else 0.0
    if scale == 0.0:
        return [dep]
    involved = [names[piv[j]] for j in range(k) if abs(coef[j]) > 1e-8 * scale]
    members = involved + [dep]
    return sorted(members, key=names.index)


def fit_ols(
    columns: Mapping[str, np.ndarray],
    response: np.ndarray,
    intercept: bool = True,
) -> OlsFit:
    """Least squares of response on the named columns (QR, column pivoting).

    Raises EstimationError when n < p (insufficient observations) or when
    the design is rank deficient; the rank error names a minimal set of
    linearly dependent columns so the caller can see what to drop. An
    n == p full-rank design interpolates (residual_sd 0, zero residuals).
    """
    y = np.asarray(response, dtype=np.float64)
    if y.ndim != 1:
        raise EstimationError("response must be one-dimensional")
    n = y.size
    names: list[str] = ([INTERCEPT] if intercept else []) + list(columns)
    p = len(names)
    if p == 0:
        raise EstimationError("empty design: no columns and no intercept")
    design = np.empty((n, p))
    if intercept:
        design[:, 0] = 1.0
    for j, (name, col) in enumerate(columns.items(), start=1 if intercept else 0):
        arr = np.asarray(col, dtype=np.float64)
        if arr.shape != (n,):
            raise EstimationError(
                f"column {name!r} has shape {arr.shape}, expected ({n},)"
            )
        design[:, j] = arr
    if n < p:
        raise EstimationError(
            f"insufficient observations: {n} rows for {p} design columns"
        )
    if not np.isfinite(design).all() or not np.isfinite(y).all():
        raise EstimationError("non-finite values in design or response")

    q, r, piv = scipy.linalg.qr(design, mode="economic", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(r))
    top = diag[0] if diag.size else 0.0
    deficient = np.nonzero(diag <= RANK_TOL * top)[0]
    if top == 0.0 or deficient.size:
        k = 0 if top == 0.0 else int(deficient[0])
        dep = _dependent_set(r, piv, k, names)
        raise EstimationError(
            "design columns are linearly dependent: " + ", ".join(dep)
        )

    beta_piv = scipy.linalg.solve_triangular(r, q.T @ y, check_finite=False)
    beta = np.empty(p)
    beta[piv] = beta_piv
    # One step of iterative refinement; on well-scaled problems this lands
    # small-integer solutions exactly instead of within a few ulp.
    resid0 = y - design @ beta
    delta = scipy.linalg.solve_triangular(r, q.T @ resid0, check_finite=False)
    beta[piv] += delta
    residuals = y - design @ beta
    ssr = float(residuals @ residuals)
    # n == p is an interpolating fit: residuals are identically zero and
    # there are no degrees of freedom left, so residual_sd is 0 by convention.
    residual_sd = 0.0 if n == p else float(np.sqrt(max(ssr, 0.0) / (n - p)))
    if intercept:
        centered = y - y.mean()
        sst = float(centered @ centered)
    else:
        sst = float(y @ y)
    r_squared = 1.0 if sst == 0.0 else 1.0 - ssr / sst
    r_squared = min(1.0, max(0.0, r_squared))
    coefficients = {name: float(b) for name, b in zip(names, beta)}
    return OlsFit(
        coefficients=coefficients,
        residuals=residuals,
        residual_sd=residual_sd,
        r_squared=r_squared,
        n=n,
        p=p,
    )


def partial_r2(
    columns: Mapping[str, np.ndarray],
    response: np.ndarray,
    focal: str,
    controls: Iterable[str],
) -> float:
    """Partial R-squared of the focal column given the control columns.

    Both models include an intercept. Defined as
    (R2_full - R2_reduced) / (1 - R2_reduced), clamped to [0, 1]; raises
    EstimationError when the reduced model is already perfect.
    """
    control_names = list(controls)
    if focal in control_names:
        raise EstimationError(f"focal column {focal!r} also appears in controls")
    missing = [c for c in control_names + [focal] if c not in columns]
    if missing:
        raise EstimationError(f"unknown column {missing[0]!r}")
    reduced = fit_ols({c: columns[c] for c in control_names}, response)
    if reduced.r_squared >= 1.0 - 1e-12:
        raise EstimationError(
            f"response fully explained without focal column {focal!r}"
        )
    full = fit_ols({c: columns[c] for c in control_names + [focal]}, response)
    value = (full.r_squared - reduced.r_squared) / (1.0 - reduced.r_squared)
    return min(1.0, max(0.0, value))
