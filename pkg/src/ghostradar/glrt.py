"""Subspace GLRT for first-order multipath and its closed-form performance.

With ``P0`` and ``P1`` the orthogonal complements of the direct-path and the
full (pairs + direct) response matrices, the statistic is
``||P0 z||^2 / ||P1 z||^2 = 1 + X`` where, under H0, ``X`` is Fisher-Snedecor
with ``(2K1, m)`` shape parameters, ``m = M - K0 - 2K1``. Tail probabilities are
evaluated through the regularized incomplete beta function with argument
``u = x / (1 + x)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .array import ArrayGeometry, build_response, direct_matrix, projector_complement
from .exceptions import DegenerateDenominator, NoConvergence

H0 = "H0"
H1 = "H1"

#: Relative energy below which a projected snapshot counts as zero.
ZERO_RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class TheoryModel:
    """Parameters of the ideal-GLRT performance curves."""

    M: int
    K0: int
    K1: int
    rho1: float = 0.0

    def __post_init__(self):
        if self.K1 < 1:
            raise ValueError("the GLRT needs K1 >= 1")
        if self.K0 < 0:
            raise ValueError("K0 must be non-negative")
        if self.m < 1:
            raise ValueError(f"M - K0 - 2K1 = {self.m} must be at least 1")
        if self.rho1 < 0:
            raise ValueError("rho1 must be non-negative")

    @property
    def m(self) -> int:
        return self.M - self.K0 - 2 * self.K1

    @property
    def a(self) -> int:
        return 2 * self.K1


@dataclass(frozen=True)
class GlrtOutcome:
    statistic: float
    threshold: float
    decision: str

    @property
    def x(self) -> float:
        return self.statistic - 1.0


def _pair_array(pair_angles) -> np.ndarray:
    return np.asarray(pair_angles, dtype=float).reshape(-1, 2)


def _h1_matrix(geom: ArrayGeometry, direct, pairs) -> np.ndarray:
    return build_response(geom, direct, _pair_array(pairs)).entries


def glrt_statistic(geom: ArrayGeometry, z, theta0, pairs, direct_h1=None, strict: bool = False) -> float:
    """``||P(theta0) z||^2 / ||P(pairs, direct_h1) z||^2``.

    Parameters
    ----------
    theta0 : sequence of float
        Direct-path angles of the H0 model.
    pairs : sequence of (dod, doa)
        First-order pairs of the H1 model.
    direct_h1 : sequence of float, optional
        Direct-path angles of the H1 model; defaults to ``theta0``. The two
        direct sets come from independent estimators and need not agree.
    strict : bool
        Raise :class:`DegenerateDenominator` instead of applying the
        zero-residual convention.

    Notes
    -----
    When ``||P1 z||^2 < 1e-12 ||z||^2`` the statistic is ``1`` if the
    numerator is also below that floor (H0 explains the data) and ``inf``
    otherwise.
    """
    z = np.asarray(z, dtype=complex)
    direct_h1 = theta0 if direct_h1 is None else direct_h1
    a0 = direct_matrix(geom, theta0)
    a1 = _h1_matrix(geom, direct_h1, pairs)
    num = float(np.linalg.norm(projector_complement(a0, geom.n_virtual) @ z) ** 2)
    den = float(np.linalg.norm(projector_complement(a1, geom.n_virtual) @ z) ** 2)
    floor = ZERO_RESIDUAL_TOL * max(float(np.vdot(z, z).real), np.finfo(float).tiny)
    if den < floor:
        if strict:
            raise DegenerateDenominator("snapshot lies in the H1 subspace")
        return 1.0 if num < floor else np.inf
    return num / den


def projector_sperp(geom: ArrayGeometry, theta0, pairs) -> np.ndarray:
    """Projector ``P0 - P1`` onto the part of ``range(P0)`` removed by the pairs."""
    a0 = direct_matrix(geom, theta0)
    a1 = _h1_matrix(geom, theta0, pairs)
    return projector_complement(a0, geom.n_virtual) - projector_complement(a1, geom.n_virtual)


def pdf_h0(x, model: TheoryModel):
    """Density of ``X = statistic - 1`` under H0."""
    x = np.asarray(x, dtype=float)
    a, m = model.a, model.m
    with np.errstate(divide="ignore"):
        logp = (special.xlogy(a - 1, x) - (m + a) * np.log1p(x) - special.betaln(a, m))
    out = np.where(x >= 0, np.exp(logp), 0.0)
    return out if out.ndim else float(out)


def pdf_h1(x, model: TheoryModel):
    """Density of ``X`` under H1: the H0 density scaled by ``1 + rho1``."""
    s = 1.0 + model.rho1
    return pdf_h0(np.asarray(x, dtype=float) / s, model) / s


def rho1_exact(geom: ArrayGeometry, theta0, pairs, k_beta_diag, sigma2: float) -> float:
    """``Trace(A^H P_sperp A K_beta) / (2 K1 sigma2)`` with exact matrices.

    ``k_beta_diag`` holds the variances of the ``2K1`` first-order amplitudes
    (column order of the response matrix) or one scalar for all of them.
    Direct-path variances do not contribute because ``P_sperp`` annihilates
    the direct columns.
    """
    pairs = _pair_array(pairs)
    k1 = len(pairs)
    if k1 == 0:
        raise ValueError("rho1 needs at least one first-order pair")
    e = build_response(geom, (), pairs).entries
    kb = np.broadcast_to(np.asarray(k_beta_diag, dtype=float), (2 * k1,))
    ps = projector_sperp(geom, theta0, pairs)
    gram = np.einsum("mi,mn,ni->i", e.conj(), ps, e).real
    return float(gram @ kb / (2 * k1 * sigma2))


def _u_of_lambda(lambda_g) -> np.ndarray:
    lam = np.asarray(lambda_g, dtype=float)
    if np.any(lam < 1):
        raise ValueError("thresholds must be >= 1")
    return 1.0 - 1.0 / lam


def pfa(lambda_g, model: TheoryModel):
    """False-alarm probability ``1 - I_{1 - 1/lambda}(2K1, m)``."""
    out = special.betaincc(model.a, model.m, _u_of_lambda(lambda_g))
    return out if np.ndim(out) else float(out)


def pd(lambda_g, model: TheoryModel):
    """Detection probability ``1 - I_y(2K1, m)``, ``y = (lambda - 1)/(lambda + rho1)``."""
    lam = np.asarray(lambda_g, dtype=float)
    _u_of_lambda(lam)
    y = (lam - 1.0) / (lam + model.rho1)
    out = special.betaincc(model.a, model.m, y)
    return out if np.ndim(out) else float(out)


def threshold_for_pfa(pfa_target: float, model: TheoryModel, max_steps: int = 200,
                      tol: float = 1e-12) -> float:
    """Invert :func:`pfa` by bisection on ``u = 1 - 1/lambda``.

    The false-alarm probability is a decreasing function of ``u`` on ``[0, 1)``.
    The result depends only on ``(K0, K1, M)``, never on noise power or angles.
    """
    if not 0.0 < pfa_target < 1.0:
        raise ValueError("pfa_target must lie in (0, 1)")
    a, m = model.a, model.m
    lo, hi = 0.0, 1.0
    mid = 0.5
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        err = special.betaincc(a, m, mid) - pfa_target
        if abs(err) <= 0.1 * tol or mid in (lo, hi):
            break
        if err > 0:
            lo = mid
        else:
            hi = mid
    err = abs(special.betaincc(a, m, mid) - pfa_target)
    if err > tol:
        raise NoConvergence(f"bisection stopped at pfa error {err:.3e}")
    return 1.0 / (1.0 - mid)


def detect(geom: ArrayGeometry, z, est_h0, est_h1, pfa_target: float) -> GlrtOutcome:
    """GLRT decision with estimated angle sets.

    The threshold comes from the ideal-GLRT false-alarm curve evaluated at the
    model orders of the H1 estimate. An H1 estimate without any first-order
    pair cannot support the alternative: the threshold is infinite and the
    decision is H0 (the statistic is still reported).
    """
    stat = glrt_statistic(geom, z, est_h0.theta0, est_h1.pair_angles, est_h1.theta0)
    if est_h1.k1 == 0:
        return GlrtOutcome(stat, np.inf, H0)
    lam = threshold_for_pfa(pfa_target, TheoryModel(geom.n_virtual, est_h1.k0, est_h1.k1))
    return GlrtOutcome(stat, lam, H1 if stat > lam else H0)


def ideal_detect(geom: ArrayGeometry, z, theta0, pairs, pfa_target: float) -> GlrtOutcome:
    """GLRT decision with known (true) matrices."""
    pairs = _pair_array(pairs)
    model = TheoryModel(geom.n_virtual, len(np.atleast_1d(theta0)) if np.size(theta0) else 0, len(pairs))
    lam = threshold_for_pfa(pfa_target, model)
    stat = glrt_statistic(geom, z, theta0, pairs)
    return GlrtOutcome(stat, lam, H1 if stat > lam else H0)
