"""Classical baseline estimators: OLS, polynomial regression with AIC degree
selection, nonlinear ARX series models, and two-stage least squares.

All fits go through an SVD-based least-squares solve with a condition-number
guard; rank-deficient designs raise instead of silently falling back to a
pseudo-inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CONDITION_LIMIT = 1e12


class SingularDesignError(ValueError):
    """Design matrix is rank deficient or numerically singular."""


def solve_least_squares(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares solve via SVD with a condition-number guard.

    ``y`` may be a vector or a matrix of stacked right-hand sides.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    if s[0] <= 0.0 or s[-1] <= 0.0 or s[0] / s[-1] > CONDITION_LIMIT:
        raise SingularDesignError("singular design")
    uy = u.T @ y
    scaled = uy / s if uy.ndim == 1 else uy / s[:, None]
    return vt.T @ scaled


@dataclass(frozen=True)
class LinearFit:
    """Intercept plus slope coefficients over labelled design columns."""

    intercept: float
    coefficients: np.ndarray
    design_description: tuple[str, ...] = field(default=())

    def __post_init__(self):
        coefs = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        object.__setattr__(self, "coefficients", coefs)
        if self.design_description and len(self.design_description) != coefs.shape[0]:
            raise ValueError("design_description length does not match coefficients")
        if not np.isfinite(coefs).all() or not np.isfinite(self.intercept):
            raise ValueError("non-finite fit coefficients")

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return self.intercept + X @ self.coefficients


def fit_ols(X, y, design_description: tuple[str, ...] = ()) -> LinearFit:
    """Ordinary least squares with an intercept.

    Parameters
    ----------
    X : (N, p) array
        Regressors, without a constant column.
    y : (N,) array
        Outcomes.

    Raises
    ------
    SingularDesignError
        If the intercept-augmented design is rank deficient.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more than {p} rows to fit {p} slopes")
    design = np.column_stack([np.ones(n), X])
    theta = solve_least_squares(design, y)
    return LinearFit(float(theta[0]), theta[1:], design_description)


@dataclass(frozen=True)
class PolyFit:
    """Polynomial regression of a single regressor.

    The regressor is standardized internally before powers are formed, which
    keeps the design well conditioned at degree 5 on inputs like ``[5, 50]``.
    Raw-scale predictions are invariant to that standardization.
    """

    degree: int
    linear_fit: LinearFit
    input_mean: float
    input_scale: float

    def _standardized(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        return (x - self.input_mean) / self.input_scale

    def predict(self, x) -> np.ndarray:
        z = self._standardized(x)
        powers = np.column_stack([z**j for j in range(1, self.degree + 1)])
        return self.linear_fit.predict(powers)

    def derivative(self, x) -> np.ndarray:
        """Analytic d(prediction)/dx in the raw input scale."""
        z = self._standardized(x)
        coefs = self.linear_fit.coefficients
        out = np.zeros_like(z)
        for j in range(1, self.degree + 1):
            out += coefs[j - 1] * j * z ** (j - 1)
        return out / self.input_scale

    def raw_coefficients(self) -> np.ndarray:
        """Coefficients ``(c_0, ..., c_degree)`` of the fitted polynomial in x."""
        poly = np.polynomial.Polynomial(
            np.concatenate([[self.linear_fit.intercept], self.linear_fit.coefficients])
        )
        shift = np.polynomial.Polynomial([-self.input_mean / self.input_scale, 1.0 / self.input_scale])
        raw = poly(shift)
        coefs = np.zeros(self.degree + 1)
        coefs[: len(raw.coef)] = raw.coef
        return coefs


def fit_polynomial(x, y, degree: int) -> PolyFit:
    """Least-squares polynomial fit of stated degree on a standardized regressor."""
    if degree < 1:
        raise ValueError("degree must be >= 1")
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] <= degree + 1:
        raise ValueError("need more rows than polynomial degree + 1")
    mean = float(x.mean())
    scale = float(x.std(ddof=0))
    if scale <= 0.0:
        raise SingularDesignError("singular design")
    z = (x - mean) / scale
    powers = np.column_stack([z**j for j in range(1, degree + 1)])
    fit = fit_ols(powers, y, tuple(f"x^{j}" for j in range(1, degree + 1)))
    return PolyFit(degree, fit, mean, scale)


def _rss(fit: PolyFit, x, y) -> float:
    resid = np.asarray(y, dtype=float) - fit.predict(x)
    return float(resid @ resid)


def select_degree_aic(x, y, max_degree: int) -> int:
    """Polynomial degree minimizing AIC; ties go to the smaller degree.

    AIC uses the Gaussian concentrated form ``N * ln(RSS / N) + 2 * (d + 1)``.
    Residual sums below numerical noise are floored at a common value so that
    an exactly-interpolating family resolves ties toward the lowest degree.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    n = y.shape[0]
    if n <= max_degree + 2:
        raise ValueError("need more rows than max_degree + 2")
    floor = n * (1e-10 * max(1.0, float(np.sqrt(np.mean(y**2))))) ** 2
    best_degree, best_aic = None, np.inf
    for degree in range(1, max_degree + 1):
        rss = max(_rss(fit_polynomial(x, y, degree), x, y), floor)
        aic = n * np.log(rss / n) + 2.0 * (degree + 1)
        if aic < best_aic - 1e-12:
            best_degree, best_aic = degree, aic
    return best_degree


@dataclass(frozen=True)
class ARXFit:
    """Autoregressive model with a polynomial exogenous term.

    Predicts ``y_t`` from ``(1, R_t, ..., R_t^p, y_{t-1}, ..., y_{t-q})``.
    """

    exog_order: int
    ar_order: int
    intercept: float
    exog_coefficients: np.ndarray
    ar_coefficients: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "exog_coefficients", np.atleast_1d(np.asarray(self.exog_coefficients, float))
        )
        object.__setattr__(
            self, "ar_coefficients", np.atleast_1d(np.asarray(self.ar_coefficients, float))
        )
        if self.exog_coefficients.shape[0] != self.exog_order:
            raise ValueError("exogenous coefficient count does not match order")
        if self.ar_coefficients.shape[0] != self.ar_order:
            raise ValueError("AR coefficient count does not match order")

    def predict_step(self, R_t: float, lags) -> float:
        """One-step prediction from ``R_t`` and ``lags = (y_{t-1}, ..., y_{t-q})``."""
        lags = np.asarray(lags, dtype=float).ravel()
        if lags.shape[0] != self.ar_order:
            raise ValueError("lag vector length does not match AR order")
        powers = np.array([R_t**j for j in range(1, self.exog_order + 1)])
        return float(
            self.intercept + powers @ self.exog_coefficients + lags @ self.ar_coefficients
        )

    def predict_series(self, y, R) -> np.ndarray:
        """One-step-ahead predictions of ``y_t`` using realized lags.

        Returns predictions for ``t = q, ..., T-1`` (0-indexed).
        """
        y = np.asarray(y, dtype=float).ravel()
        R = np.asarray(R, dtype=float).ravel()
        q = self.ar_order
        X = arx_design(y, R, self.exog_order, q)[0]
        theta = np.concatenate(
            [[self.intercept], self.exog_coefficients, self.ar_coefficients]
        )
        return X @ theta


def arx_design(y, R, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Supervised design for an ARX(p, q) fit.

    Rows cover ``t = q .. T-1``: features ``(1, R_t, ..., R_t^p, y_{t-1}, ...,
    y_{t-q})``, targets ``y_t``.
    """
    y = np.asarray(y, dtype=float).ravel()
    R = np.asarray(R, dtype=float).ravel()
    if y.shape[0] != R.shape[0]:
        raise ValueError("series lengths differ")
    T = y.shape[0]
    if T <= p + q + 1:
        raise ValueError("series too short for requested orders")
    t = np.arange(q, T)
    cols = [np.ones(T - q)]
    cols.extend(R[t] ** j for j in range(1, p + 1))
    cols.extend(y[t - ell] for ell in range(1, q + 1))
    return np.column_stack(cols), y[t]


def fit_arx(y, R, p: int, q: int) -> ARXFit:
    """OLS fit of an ARX(p, q) model; the first q periods serve as lags only.

    Constant regressor columns (a flat series or flat exogenous path) are
    redundant with the intercept; they are dropped from the solve and their
    coefficients reported as zero, leaving an intercept-only representation.
    """
    if p < 1 or q < 1:
        raise ValueError("orders must be >= 1")
    X, target = arx_design(y, R, p, q)
    keep = np.ptp(X[:, 1:], axis=0) > 0.0
    theta = np.zeros(X.shape[1])
    cols = np.concatenate([[True], keep])
    solved = solve_least_squares(X[:, cols], target)
    theta[cols] = solved
    return ARXFit(p, q, float(theta[0]), theta[1 : 1 + p], theta[1 + p :])


def select_arx_order_aic(y, R, exog_orders, ar_orders) -> tuple[int, int]:
    """ARX orders minimizing AIC on the common usable sample; ties prefer the
    smaller (q, p) pair."""
    y = np.asarray(y, dtype=float).ravel()
    R = np.asarray(R, dtype=float).ravel()
    q_max = max(ar_orders)
    n_eff = y.shape[0] - q_max
    floor = n_eff * (1e-10 * max(1.0, float(np.sqrt(np.mean(y**2))))) ** 2
    best, best_aic = None, np.inf
    for q in sorted(ar_orders):
        for p in sorted(exog_orders):
            fit = fit_arx(y, R, p, q)
            pred = fit.predict_series(y, R)[q_max - q :]
            resid = y[q_max:] - pred
            rss = max(float(resid @ resid), floor)
            aic = n_eff * np.log(rss / n_eff) + 2.0 * (1 + p + q)
            if aic < best_aic - 1e-12:
                best, best_aic = (p, q), aic
    return best


def fit_2sls(y, X, Z, design_description: tuple[str, ...] = ()) -> LinearFit:
    """Two-stage least squares with an intercept in both stages.

    Requires at least as many instruments as regressors. When the instrument
    count equals the regressor count this reduces to the just-identified
    estimator ``(Z'X)^{-1} Z'y``.

    Raises
    ------
    SingularDesignError
        With message ``"rank-deficient projected design"`` when the projected
        first-stage regressors are (numerically) collinear, e.g. under an
        irrelevant instrument.
    """
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Z.ndim == 1:
        Z = Z[:, None]
    n, p = X.shape
    if Z.shape[0] != n or y.shape[0] != n:
        raise ValueError("row counts differ")
    if Z.shape[1] < p:
        raise ValueError("need at least as many instruments as regressors")
    ones = np.ones((n, 1))
    Xc = np.hstack([ones, X])
    Zc = np.hstack([ones, Z])
    try:
        first_stage = solve_least_squares(Zc, Xc)
    except SingularDesignError as exc:
        raise SingularDesignError("singular instrument design") from exc
    X_hat = Zc @ first_stage
    try:
        theta = solve_least_squares(X_hat, y)
    except SingularDesignError as exc:
        raise SingularDesignError("rank-deficient projected design") from exc
    return LinearFit(float(theta[0]), theta[1:], design_description)
