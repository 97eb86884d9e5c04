"""scikit-learn compatible regressors on a Gaussian RBF expansion."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .basis import design_matrix, make_basis
from .core import Dataset
from .gic import approx_gic, gamma_select
from .ridge import DEFAULT_MAX_ITER, DEFAULT_TOL, RidgeConfig, ridge_fit, ridge_gic, ridge_select
from .svreg import SvrOptions, svr_fit


class _RBFRegressor(RegressorMixin, BaseEstimator):
    def _expand(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True, ensure_min_samples=2)
        dom = self.domain
        if dom is None:
            dom = np.column_stack([X.min(0), X.max(0)])
        basis = make_basis(dom, self.n_centers, self.width_scale, dims=X.shape[1])
        ds = Dataset(X, y, domain=basis.domain)
        self.basis_ = basis
        self.n_features_in_ = X.shape[1]
        return design_matrix(basis, ds), ds.ys

    def _store(self, fit):
        self.fit_result_ = fit
        self.coef_ = np.array(fit.beta)
        self.noise_var_ = fit.alpha
        self.gic_ = fit.gic
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but the model was fitted with {self.n_features_in_}"
            )
        return self.basis_.evaluate(X) @ self.coef_


class GICRidge(_RBFRegressor):
    """Ridge on an RBF basis with the noise variance estimated jointly.

    With ``lam=None`` the penalty is chosen from ``lambda_grid`` by the
    expected-mode GIC.
    """

    def __init__(self, lam=None, lambda_grid=None, n_centers=None, width_scale=1.0,
                 domain=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
        self.lam = lam
        self.lambda_grid = lambda_grid
        self.n_centers = n_centers
        self.width_scale = width_scale
        self.domain = domain
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        dm, y = self._expand(X, y)
        if self.lam is None:
            lam, fit = ridge_select(dm, y, self.lambda_grid, self.tol, self.max_iter)
        else:
            lam = float(self.lam)
            fit = ridge_fit(dm, y, RidgeConfig(lam, self.tol, self.max_iter))
            if fit.converged:
                fit = fit.with_gic(ridge_gic(dm, y, fit))
        self.lambda_ = lam
        return self._store(fit)


class SmoothlyVaryingRidge(_RBFRegressor):
    """Ridge with one tuning parameter per basis function, smoothed over the centre grid.

    Leaving either gamma as ``None`` selects ``(gamma1, gamma2)`` from
    ``gamma_grid`` by the approximate GIC.
    """

    def __init__(self, gamma1=None, gamma2=None, gamma_grid=None, n_centers=None,
                 width_scale=1.0, domain=None, boundary_mode="paper", tol=1e-6,
                 max_iter=500, n_jobs=1):
        self.gamma1 = gamma1
        self.gamma2 = gamma2
        self.gamma_grid = gamma_grid
        self.n_centers = n_centers
        self.width_scale = width_scale
        self.domain = domain
        self.boundary_mode = boundary_mode
        self.tol = tol
        self.max_iter = max_iter
        self.n_jobs = n_jobs

    def fit(self, X, y):
        dm, y = self._expand(X, y)
        g1 = 1.0 if self.gamma1 is None else self.gamma1
        g2 = 1.0 if self.gamma2 is None else self.gamma2
        opts = SvrOptions(g1, g2, tol=self.tol, max_iter=self.max_iter,
                          boundary_mode=self.boundary_mode)
        if self.gamma1 is None or self.gamma2 is None:
            gam, fit = gamma_select(dm, y, self.gamma_grid, opts, n_jobs=self.n_jobs)
        else:
            gam = (float(g1), float(g2))
            fit = svr_fit(dm, y, opts)
            fit = fit.with_gic(approx_gic(dm, y, fit))
        self.gammas_ = gam
        self.lambda_ = np.array(fit.lam)
        return self._store(fit)
