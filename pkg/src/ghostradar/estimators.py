"""scikit-learn style wrappers around the estimators and the detector.

Each ``fit`` call consumes one snapshot (a length-``M`` complex vector) and
stores the result in trailing-underscore attributes. The detector is a binary
classifier over snapshots: label ``1`` means first-order multipath (H1).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_probability, check_snapshot, check_snapshots
from .array import ArrayGeometry, ula
from .cscd_h0 import StopConfigH0, cscd_h0, omp_h0
from .cscd_h1 import StopConfigH1, cscd_h1, gomp_h1
from .glrt import H1, detect

ESTIMATORS = ("cscd", "grid-baseline")


def _geometry(geometry) -> ArrayGeometry:
    return ula() if geometry is None else geometry


def canonical_method(method: str) -> str:
    if method == "omp-baseline":
        return "grid-baseline"
    if method not in ESTIMATORS:
        raise ValueError(f"method must be one of {ESTIMATORS}, got {method!r}")
    return method


class DirectPathEstimator(BaseEstimator):
    """Direct-path angles of one snapshot under H0.

    Parameters
    ----------
    geometry : ArrayGeometry, optional
        Defaults to the 6 x 8 half-wavelength ULA.
    method : {"cscd", "grid-baseline"}
        Continuous refinement or plain on-grid OMP.
    max_iter, refine_iter, grid_step, eps, eps1, sigma2
        See :class:`~ghostradar.cscd_h0.StopConfigH0`.

    Attributes
    ----------
    estimate_ : EstimateH0
    theta0_ : ndarray of shape (k0_,)
        Angles in degrees.
    alpha_ : ndarray of shape (k0_,)
    k0_ : int
    residual_norm_ : float
    """

    def __init__(self, geometry=None, method="cscd", max_iter=10, refine_iter=10, grid_step=2.0,
                 eps=None, eps1=0.4, sigma2=1.0):
        self.geometry = geometry
        self.method = method
        self.max_iter = max_iter
        self.refine_iter = refine_iter
        self.grid_step = grid_step
        self.eps = eps
        self.eps1 = eps1
        self.sigma2 = sigma2

    def _config(self) -> StopConfigH0:
        return StopConfigH0(self.max_iter, self.refine_iter, self.grid_step, self.eps, self.eps1,
                            self.sigma2)

    def estimate(self, z):
        """Run the estimator without touching fitted state."""
        geom = _geometry(self.geometry)
        z = check_snapshot(z, geom.n_virtual)
        fn = cscd_h0 if canonical_method(self.method) == "cscd" else omp_h0
        return fn(z, geom, self._config())

    def fit(self, z, y=None):
        est = self.estimate(z)
        self.estimate_ = est
        self.theta0_ = est.theta0
        self.alpha_ = est.alpha
        self.k0_ = est.k0
        self.residual_norm_ = est.residual_norm
        return self


class MixedPathEstimator(BaseEstimator):
    """Direct paths and reciprocal first-order pairs of one snapshot under H1.

    Parameters
    ----------
    geometry : ArrayGeometry, optional
    method : {"cscd", "grid-baseline"}
        Levenberg-Marquardt refinement or group OMP.
    max_iter, refine_iter, grid_step, eps, sigma2, max_retries, eps2, delta_r, mu0_scale, selection
        See :class:`~ghostradar.cscd_h1.StopConfigH1`.

    Attributes
    ----------
    estimate_ : EstimateH1
    theta1_, phi1_ : ndarray of shape (k1_,)
        Departure and arrival angles of the pairs, ``theta1_ < phi1_``.
    theta0_ : ndarray of shape (k0_,)
    beta_ : ndarray of shape (2 * k1_ + k0_,)
    k0_, k1_ : int
    residual_norm_ : float
    """

    def __init__(self, geometry=None, method="cscd", max_iter=10, refine_iter=10, grid_step=2.0,
                 eps=None, sigma2=1.0, max_retries=3, eps2=0.0, delta_r=1.0, mu0_scale=1e-2,
                 selection="margin"):
        self.geometry = geometry
        self.method = method
        self.max_iter = max_iter
        self.refine_iter = refine_iter
        self.grid_step = grid_step
        self.eps = eps
        self.sigma2 = sigma2
        self.max_retries = max_retries
        self.eps2 = eps2
        self.delta_r = delta_r
        self.mu0_scale = mu0_scale
        self.selection = selection

    def _config(self) -> StopConfigH1:
        return StopConfigH1(self.max_iter, self.refine_iter, self.grid_step, self.eps, self.sigma2,
                            self.max_retries, self.eps2, self.delta_r, self.mu0_scale, self.selection)

    def estimate(self, z):
        geom = _geometry(self.geometry)
        z = check_snapshot(z, geom.n_virtual)
        fn = cscd_h1 if canonical_method(self.method) == "cscd" else gomp_h1
        return fn(z, geom, self._config())

    def fit(self, z, y=None):
        est = self.estimate(z)
        self.estimate_ = est
        self.theta1_ = est.angles.theta1
        self.phi1_ = est.angles.phi1
        self.theta0_ = est.angles.theta0
        self.beta_ = est.beta
        self.k0_ = est.k0
        self.k1_ = est.k1
        self.residual_norm_ = est.residual_norm
        return self


class GhostDetector(ClassifierMixin, BaseEstimator):
    """GLRT for first-order multipath with estimated angle sets.

    Nothing is learned from data: the threshold follows analytically from
    ``pfa`` and the estimated model orders, so ``fit`` only validates the
    settings and records the input width.

    Parameters
    ----------
    geometry : ArrayGeometry, optional
    pfa : float
        Nominal false-alarm probability.
    method : {"cscd", "grid-baseline"}
    sigma2 : float
        Noise variance for the default residual thresholds of both estimators.
    """

    def __init__(self, geometry=None, pfa=1e-2, method="cscd", sigma2=1.0):
        self.geometry = geometry
        self.pfa = pfa
        self.method = method
        self.sigma2 = sigma2

    def fit(self, X=None, y=None):
        geom = _geometry(self.geometry)
        check_probability(self.pfa, "pfa")
        canonical_method(self.method)
        if X is not None:
            check_snapshots(X, geom.n_virtual)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = geom.n_virtual
        return self

    def detect(self, z):
        """Full :class:`~ghostradar.glrt.GlrtOutcome` for one snapshot."""
        check_is_fitted(self, "classes_")
        geom = _geometry(self.geometry)
        z = check_snapshot(z, geom.n_virtual)
        h0 = DirectPathEstimator(geom, self.method, sigma2=self.sigma2).estimate(z)
        h1 = MixedPathEstimator(geom, self.method, sigma2=self.sigma2).estimate(z)
        return detect(geom, z, h0, h1, self.pfa)

    def decision_function(self, X):
        """``log(statistic / threshold)``; positive means H1.

        ``-inf`` when the H1 estimate holds no pair (infinite threshold).
        """
        out = []
        for z in check_snapshots(X, _geometry(self.geometry).n_virtual):
            o = self.detect(z)
            with np.errstate(divide="ignore"):
                out.append(np.log(o.statistic) - np.log(o.threshold))
        return np.array(out)

    def predict(self, X):
        return np.array([int(self.detect(z).decision == H1)
                         for z in check_snapshots(X, _geometry(self.geometry).n_virtual)])
