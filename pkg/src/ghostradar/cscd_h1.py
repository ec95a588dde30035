"""Mixed direct / first-order path estimation under H1.

Every outer iteration builds two competing candidates from the current
accepted set: one with an extra direct path and one with an extra reciprocal
pair. Both are refined with Levenberg-Marquardt on ``||P z||^2`` (the pair
angles move both of their columns) and the type is chosen from the two
residual norms. Without the refinement this is a group OMP.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from . import objective as obj
from .array import ArrayGeometry, rx_matrix, tx_matrix
from .cscd_h0 import angle_grid, grid_select_direct
from .exceptions import RankDeficient, SingularSystem

#: Atoms closer than this (degrees) duplicate a column: a pair whose DOD and
#: DOA meet, or two direct atoms (or two pairs) that coincide.
COLLAPSE_DEG = 0.01

#: Type-selection rules. ``margin``: the pair must beat the direct candidate's
#: residual norm by more than ``delta_r``. ``literal``: the pair is taken
#: unless the direct candidate wins by at least ``delta_r``.
SELECTION_RULES = ("margin", "literal")


@dataclass(frozen=True)
class StopConfigH1:
    """Stopping and refinement settings of the mixed greedy loop.

    Attributes
    ----------
    max_iter, refine_iter, grid_step, eps, sigma2
        As in :class:`~ghostradar.cscd_h0.StopConfigH0`.
    max_retries : int
        Damping inflations per LM iteration, ``J``.
    eps2 : float
        Minimum residual-norm improvement per outer iteration.
    delta_r : float
        Residual-norm margin used to choose between the two candidates.
    mu0_scale : float
        Initial damping as a fraction of ``max(diag(H))``.
    selection : {"margin", "literal"}
        How ``delta_r`` is applied, see :data:`SELECTION_RULES`.
    """

    max_iter: int = 10
    refine_iter: int = 10
    grid_step: float = 2.0
    eps: float | None = None
    sigma2: float = 1.0
    max_retries: int = 3
    eps2: float = 0.0
    delta_r: float = 1.0
    mu0_scale: float = 1e-2
    selection: str = "margin"

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.refine_iter < 0:
            raise ValueError("refine_iter must be >= 0")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")
        if self.eps is not None and not self.eps > 0:
            raise ValueError("eps must be positive")
        if not np.isfinite(self.delta_r):
            raise ValueError("delta_r must be finite")
        if not self.mu0_scale > 0:
            raise ValueError("mu0_scale must be positive")
        if self.selection not in SELECTION_RULES:
            raise ValueError(f"selection must be one of {SELECTION_RULES}")

    def epsilon(self, n_virtual: int) -> float:
        return float(np.sqrt(self.sigma2 * n_virtual)) if self.eps is None else float(self.eps)


@dataclass(frozen=True)
class MixedAngleSet:
    """Angles of ``K1`` pairs and ``K0`` direct paths, in degrees.

    Stacked as ``[theta1; phi1; theta0]`` with ``theta1[k] < phi1[k]``.
    """

    theta1: np.ndarray = field(default_factory=lambda: np.zeros(0))
    phi1: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta0: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        t1 = np.asarray(self.theta1, dtype=float).ravel()
        p1 = np.asarray(self.phi1, dtype=float).ravel()
        if t1.shape != p1.shape:
            raise ValueError("theta1 and phi1 must have the same length")
        if np.any(t1 == p1):
            raise ValueError("a pair needs distinct departure and arrival angles")
        object.__setattr__(self, "theta1", np.minimum(t1, p1))
        object.__setattr__(self, "phi1", np.maximum(t1, p1))
        object.__setattr__(self, "theta0", np.asarray(self.theta0, dtype=float).ravel())

    @property
    def k1(self) -> int:
        return int(self.theta1.size)

    @property
    def k0(self) -> int:
        return int(self.theta0.size)

    @property
    def n_columns(self) -> int:
        return 2 * self.k1 + self.k0

    @property
    def pair_angles(self) -> np.ndarray:
        return np.column_stack([self.theta1, self.phi1]).reshape(-1, 2)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.theta1, self.phi1, self.theta0])

    @classmethod
    def from_stacked(cls, vec, k1: int) -> "MixedAngleSet":
        t1, p1, t0 = obj.split_angles(vec, k1)
        return cls(t1, p1, t0)

    def with_direct(self, theta: float) -> "MixedAngleSet":
        return MixedAngleSet(self.theta1, self.phi1, np.append(self.theta0, theta))

    def with_pair(self, dod: float, doa: float) -> "MixedAngleSet":
        return MixedAngleSet(np.append(self.theta1, dod), np.append(self.phi1, doa), self.theta0)


@dataclass
class EstimateH1:
    angles: MixedAngleSet
    beta: np.ndarray
    residual_norm: float
    trace: list = field(default_factory=list)

    @property
    def k0(self) -> int:
        return self.angles.k0

    @property
    def k1(self) -> int:
        return self.angles.k1

    @property
    def theta0(self) -> np.ndarray:
        return self.angles.theta0

    @property
    def pair_angles(self) -> np.ndarray:
        return self.angles.pair_angles

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def to_dict(self) -> dict:
        return {
            "k0": self.k0,
            "k1": self.k1,
            "theta1_deg": self.angles.theta1.tolist(),
            "phi1_deg": self.angles.phi1.tolist(),
            "theta0_deg": self.angles.theta0.tolist(),
            "beta": [[float(b.real), float(b.imag)] for b in self.beta],
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
        }


@functools.lru_cache(maxsize=32)
def _pair_atoms(geom: ArrayGeometry, grid_t: tuple, grid_r: tuple):
    return (tx_matrix(geom, np.asarray(grid_t)), rx_matrix(geom, np.asarray(grid_r)),
            tx_matrix(geom, np.asarray(grid_r)), rx_matrix(geom, np.asarray(grid_t)))


def pair_scores(residual, grid_t, grid_r, geom: ArrayGeometry) -> np.ndarray:
    """Score matrix ``s[i, j] = |r^H a1| + |r^H a2|`` for ``(grid_t[i], grid_r[j])``.

    ``a1 = kron(a_T(grid_t[i]), a_R(grid_r[j]))`` and
    ``a2 = kron(a_T(grid_r[j]), a_R(grid_t[i]))``. Entries violating
    ``grid_t[i] < grid_r[j]`` are ``-inf``.
    """
    gt = np.asarray(grid_t, dtype=float)
    gr = np.asarray(grid_r, dtype=float)
    at_t, ar_r, at_r, ar_t = _pair_atoms(geom, tuple(gt), tuple(gr))
    # r^H kron(a_T(x), a_R(y)) = a_T(x)^T conj(R) a_R(y) with R[m, n] = r[m * M_R + n]
    R = np.conj(np.asarray(residual, dtype=complex)).reshape(geom.n_tx, geom.n_rx)
    c1 = at_t.T @ R @ ar_r
    c2 = (at_r.T @ R @ ar_t).T
    score = np.abs(c1) + np.abs(c2)
    score[~(gt[:, None] < gr[None, :])] = -np.inf
    return score


def grid_select_pair(residual, grid_t, grid_r, geom: ArrayGeometry) -> tuple[float, float]:
    """Grid pair ``dod < doa`` best correlated with the residual.

    Ties go to the lexicographically smallest ``(dod, doa)``.
    """
    gt = np.sort(np.asarray(grid_t, dtype=float))
    gr = np.sort(np.asarray(grid_r, dtype=float))
    if gt.size == 0 or gr.size == 0:
        raise ValueError("empty angle grid")
    score = pair_scores(residual, gt, gr, geom)
    if not np.isfinite(score).any():
        raise ValueError("no grid pair satisfies dod < doa")
    i, j = np.unravel_index(int(np.argmax(score)), score.shape)
    return float(gt[i]), float(gr[j])


def group_gradient(geom: ArrayGeometry, angles: MixedAngleSet, z) -> np.ndarray:
    """Gradient of ``||P z||^2`` as ``[g_T; g_R; g_0]``, per radian."""
    return obj.gradient(obj.evaluate(geom, angles.stacked(), angles.k1, z))


def group_hessian(geom: ArrayGeometry, angles: MixedAngleSet, z) -> np.ndarray:
    """Gauss-Newton Hessian of ``||P z||^2`` in the same stacking, per radian squared."""
    return obj.hessian(obj.evaluate(geom, angles.stacked(), angles.k1, z))


def _canonical(vec: np.ndarray, k1: int) -> np.ndarray:
    t1, p1, t0 = obj.split_angles(vec, k1)
    return np.concatenate([np.minimum(t1, p1), np.maximum(t1, p1), t0])


def _collapsed(vec: np.ndarray, k1: int) -> bool:
    t1, p1, t0 = obj.split_angles(vec, k1)
    if np.any(np.abs(t1 - p1) < COLLAPSE_DEG):
        return True
    d0 = np.abs(t0[:, None] - t0[None, :])
    d1 = np.maximum(np.abs(t1[:, None] - t1[None, :]), np.abs(p1[:, None] - p1[None, :]))
    return bool(np.any(d0[np.triu_indices(t0.size, 1)] < COLLAPSE_DEG)
                or np.any(d1[np.triu_indices(t1.size, 1)] < COLLAPSE_DEG))


def lm_refine(geom: ArrayGeometry, angles_init: MixedAngleSet, z, cfg: StopConfigH1 | None = None,
              step_tol: float = 1e-6):
    """Levenberg-Marquardt refinement of a mixed angle set.

    Returns
    -------
    angles : MixedAngleSet
    residual : ndarray
        ``z - A A^+ z`` at the returned angles.

    Raises
    ------
    RankDeficient
        If the initial set is rank deficient.
    SingularSystem
        If ``H + mu I`` cannot be solved; callers skip the iteration.

    Notes
    -----
    Damping starts at ``mu0_scale * max(diag(H))``. A trial step is rejected
    (gain ratio treated as non-positive) when it leaves ``[-90, 90]`` after
    clamping would be needed, collapses two columns onto each other or makes the response rank
    deficient. Rejected steps leave the angles unchanged with ``mu`` inflated.
    """
    cfg = cfg or StopConfigH1()
    k1 = angles_init.k1
    theta = angles_init.stacked()
    st = obj.evaluate(geom, theta, k1, z)
    mu = None
    for _ in range(cfg.refine_iter):
        if theta.size == 0:
            break
        g, H = obj.gradient(st), obj.hessian(st)
        if mu is None:
            mu = cfg.mu0_scale * max(float(np.max(np.diag(H))), np.finfo(float).tiny)

        def attempt(mu):
            try:
                h = np.linalg.solve(H + mu * np.eye(H.shape[0]), -g)
            except np.linalg.LinAlgError as exc:
                raise SingularSystem("damped Gauss-Newton system is singular") from exc
            if not np.all(np.isfinite(h)):
                raise SingularSystem("damped Gauss-Newton step is not finite")
            step = np.rad2deg(h)
            if np.linalg.norm(step) < step_tol:
                return h, 1.0, None
            trial = np.clip(theta + step, -90.0, 90.0)
            if _collapsed(trial, k1):
                return h, -np.inf, None
            try:
                st_new = obj.evaluate(geom, trial, k1, z)
            except RankDeficient:
                return h, -np.inf, None
            pred = 0.5 * h @ (mu * h - g)
            gain = (st.value - st_new.value) / pred if pred > 0 else -np.inf
            return h, gain, (trial, st_new)

        h, gain, new = attempt(mu)
        j = 0
        while gain <= 0 and j < cfg.max_retries:
            j += 1
            mu *= 2.0 ** j
            h, gain, new = attempt(mu)
        if new is None and gain > 0:
            break  # stationary point
        if gain > 0:
            theta = _canonical(new[0], k1)
            st = new[1] if np.array_equal(theta, new[0]) else obj.evaluate(geom, theta, k1, z)
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * gain - 1.0) ** 3)
            if np.linalg.norm(np.rad2deg(h)) < step_tol:
                break
    return MixedAngleSet.from_stacked(theta, k1), st.pz


def _fit(geom: ArrayGeometry, angles: MixedAngleSet, z):
    st = obj.evaluate(geom, angles.stacked(), angles.k1, z)
    return st.alpha, st.pz


def _candidate(geom, angles: MixedAngleSet, z, cfg: StopConfigH1, refine: bool):
    """Refined candidate and its residual, or ``None`` when it is unusable."""
    if angles.n_columns >= geom.n_virtual:
        return None
    try:
        if refine:
            try:
                return lm_refine(geom, angles, z, cfg)
            except SingularSystem:
                pass
        return angles, _fit(geom, angles, z)[1]
    except RankDeficient:
        return None


def _prefer_pair(r1: float, r2: float, cfg: StopConfigH1) -> bool:
    if cfg.selection == "literal":
        return r2 - r1 < cfg.delta_r
    return r1 - r2 > cfg.delta_r


def _greedy_h1(z, geom: ArrayGeometry, cfg: StopConfigH1, refine: bool) -> EstimateH1:
    z = np.asarray(z, dtype=complex)
    if z.shape != (geom.n_virtual,):
        raise ValueError(f"snapshot must have length {geom.n_virtual}, got {z.shape}")
    eps = cfg.epsilon(geom.n_virtual)
    grid = angle_grid(cfg.grid_step)
    current = MixedAngleSet()
    r = z.copy()
    r_norm = float(np.linalg.norm(r))
    trace = []
    t = 0
    while r_norm > eps:
        t += 1
        direct = _candidate(geom, current.with_direct(grid_select_direct(r, grid, geom)), z, cfg, refine)
        pair = _candidate(geom, current.with_pair(*grid_select_pair(r, grid, grid, geom)), z, cfg, refine)
        if direct is None and pair is None:
            break
        n1 = float(np.linalg.norm(direct[1])) if direct is not None else np.inf
        n2 = float(np.linalg.norm(pair[1])) if pair is not None else np.inf
        if direct is None or (pair is not None and _prefer_pair(n1, n2, cfg)):
            chosen, kind = pair, "pair"
        else:
            chosen, kind = direct, "direct"
        prev = r_norm
        current, r = chosen
        r_norm = float(np.linalg.norm(r))
        trace.append({"t": t, "added": kind, "r_direct": n1, "r_pair": n2, "residual_norm": r_norm})
        if t >= cfg.max_iter or prev - r_norm <= cfg.eps2:
            break
    beta, r = _fit(geom, current, z)
    return EstimateH1(current, beta, float(np.linalg.norm(r)), trace)


def cscd_h1(z, geom: ArrayGeometry, cfg: StopConfigH1 | None = None) -> EstimateH1:
    """Competitive direct / pair insertion with Levenberg-Marquardt refinement."""
    return _greedy_h1(z, geom, cfg or StopConfigH1(), refine=True)


def gomp_h1(z, geom: ArrayGeometry, cfg: StopConfigH1 | None = None) -> EstimateH1:
    """Group OMP: the same competitive insertion with on-grid atoms only."""
    return _greedy_h1(z, geom, cfg or StopConfigH1(), refine=False)
