"""Direct-path angle estimation under H0.

Greedy sparse recovery: each outer iteration picks the grid angle best
correlated with the residual, appends it, refines all angles jointly in the
continuous domain with safeguarded Gauss-Newton steps, then refits the
amplitudes by least squares. Without the refinement this is plain OMP on the
angle grid.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from . import objective as obj
from .array import ArrayGeometry, direct_matrix, least_squares_fit
from .exceptions import RankDeficient


@dataclass(frozen=True)
class StopConfigH0:
    """Stopping rules of the greedy loop.

    Attributes
    ----------
    max_iter : int
        Maximum number of outer iterations (atoms), ``T``.
    refine_iter : int
        Maximum Gauss-Newton iterations per outer iteration, ``I``.
    grid_step : float
        Spacing of the angle grid on ``[-90, 90]`` in degrees.
    eps : float or None
        Residual-norm target; ``None`` means ``sqrt(sigma2 * M)``.
    eps1 : float
        Minimum residual-norm improvement per outer iteration.
    sigma2 : float
        Noise variance used for the default ``eps``.
    """

    max_iter: int = 10
    refine_iter: int = 10
    grid_step: float = 2.0
    eps: float | None = None
    eps1: float = 0.4
    sigma2: float = 1.0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.refine_iter < 0:
            raise ValueError("refine_iter must be >= 0")
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")
        if self.eps is not None and not self.eps > 0:
            raise ValueError("eps must be positive")

    def epsilon(self, n_virtual: int) -> float:
        return float(np.sqrt(self.sigma2 * n_virtual)) if self.eps is None else float(self.eps)


@dataclass
class EstimateH0:
    theta0: np.ndarray
    alpha: np.ndarray
    residual_norm: float
    trace: list = field(default_factory=list)

    @property
    def k0(self) -> int:
        return int(self.theta0.size)

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def to_dict(self) -> dict:
        return {
            "k0": self.k0,
            "theta0_deg": self.theta0.tolist(),
            "alpha": [[float(a.real), float(a.imag)] for a in self.alpha],
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
        }


def angle_grid(step: float = 2.0) -> np.ndarray:
    """Uniform grid on ``[-90, 90]`` degrees, endpoints included when reachable."""
    n = int(np.floor(180.0 / step + 1e-9))
    return -90.0 + step * np.arange(n + 1)


@functools.lru_cache(maxsize=32)
def _direct_atoms(geom: ArrayGeometry, grid: tuple) -> np.ndarray:
    return direct_matrix(geom, np.asarray(grid))


def grid_select_direct(residual, grid, geom: ArrayGeometry) -> float:
    """Grid angle maximizing ``|r^H a(theta)|``; ties go to the smallest angle."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty angle grid")
    order = np.argsort(grid, kind="stable")
    grid = grid[order]
    corr = np.abs(_direct_atoms(geom, tuple(grid)).conj().T @ residual)
    return float(grid[int(np.argmax(corr))])


def gn_gradient(geom: ArrayGeometry, theta0, z) -> np.ndarray:
    """Gradient of ``||P(theta0) z||^2`` with respect to the direct angles, per radian."""
    return obj.gradient(obj.evaluate(geom, theta0, 0, z))


def gn_hessian(geom: ArrayGeometry, theta0, z) -> np.ndarray:
    """Gauss-Newton Hessian of ``||P(theta0) z||^2``, per radian squared."""
    return obj.hessian(obj.evaluate(geom, theta0, 0, z))


def _newton_step(H: np.ndarray, g: np.ndarray) -> np.ndarray | None:
    """Solve ``H h = -g``; regularize once when ``H`` is (near) singular."""
    k = g.size
    for reg in (0.0, 1e-8 * np.trace(H) / k):
        Hr = H + reg * np.eye(k)
        try:
            cond = np.linalg.cond(Hr)
            if np.isfinite(cond) and cond < 1e14:
                return np.linalg.solve(Hr, -g)
        except np.linalg.LinAlgError:
            pass
    return None


def _inside(angles) -> bool:
    return bool(np.all(np.abs(angles) <= 90.0))


def gn_refine(geom: ArrayGeometry, theta0_init, z, n_iter: int = 10, max_halvings: int = 8,
              step_tol: float = 1e-6) -> np.ndarray:
    """Refine direct-path angles with backtracking Gauss-Newton.

    A step is accepted only if it lowers the objective; otherwise it is halved
    up to ``max_halvings`` times (steps leaving ``[-90, 90]`` are halved too).
    Stops early when the step falls below ``step_tol`` degrees or no
    decrease can be found.
    """
    theta = np.array(theta0_init, dtype=float)
    try:
        st = obj.evaluate(geom, theta, 0, z)
    except RankDeficient:
        return theta
    for _ in range(n_iter):
        h = _newton_step(obj.hessian(st), obj.gradient(st))
        if h is None:
            break
        step = np.rad2deg(h)
        if np.linalg.norm(step) < step_tol:
            break
        scale = 1.0
        for _ in range(max_halvings + 1):
            trial = theta + scale * step
            scale *= 0.5
            if not _inside(trial):
                continue
            try:
                st_new = obj.evaluate(geom, trial, 0, z)
            except RankDeficient:
                continue
            if st_new.value < st.value:
                theta, st = trial, st_new
                break
        else:
            break
    return theta


def _greedy_h0(z, geom: ArrayGeometry, cfg: StopConfigH0, refine: bool) -> EstimateH0:
    z = np.asarray(z, dtype=complex)
    if z.shape != (geom.n_virtual,):
        raise ValueError(f"snapshot must have length {geom.n_virtual}, got {z.shape}")
    eps = cfg.epsilon(geom.n_virtual)
    grid = angle_grid(cfg.grid_step)
    theta = np.zeros(0)
    alpha = np.zeros(0, dtype=complex)
    r = z.copy()
    r_norm = float(np.linalg.norm(r))
    trace = []
    t = 0
    while r_norm > eps and theta.size < geom.n_virtual - 1:
        t += 1
        picked = grid_select_direct(r, grid, geom)
        cand = np.append(theta, picked)
        if refine:
            cand = gn_refine(geom, cand, z, cfg.refine_iter)
        try:
            cand_alpha, cand_r = least_squares_fit(direct_matrix(geom, cand), z)
        except RankDeficient:
            break
        prev = r_norm
        theta, alpha, r = cand, cand_alpha, cand_r
        r_norm = float(np.linalg.norm(r))
        trace.append({"t": t, "grid_angle": picked, "residual_norm": r_norm})
        if t >= cfg.max_iter or prev - r_norm <= cfg.eps1:
            break
    return EstimateH0(theta, alpha, r_norm, trace)


def cscd_h0(z, geom: ArrayGeometry, cfg: StopConfigH0 | None = None) -> EstimateH0:
    """Greedy grid selection with continuous Gauss-Newton refinement."""
    return _greedy_h0(z, geom, cfg or StopConfigH0(), refine=True)


def omp_h0(z, geom: ArrayGeometry, cfg: StopConfigH0 | None = None) -> EstimateH0:
    """On-grid orthogonal matching pursuit with the same stopping rules."""
    return _greedy_h0(z, geom, cfg or StopConfigH0(), refine=False)
