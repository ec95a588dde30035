"""Ground-truth scenes and synthesis of noisy virtual-array snapshots.

Random streams: trial ``i`` of a run seeded with ``seed`` uses
``numpy.random.SeedSequence(seed, spawn_key=(i,))``, i.e. the ``i``-th child
that ``SeedSequence(seed).spawn`` would hand out. Results therefore do not
depend on how trials are scheduled across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .array import ArrayGeometry, build_response, direct_matrix, virtual_matrix
from .exceptions import SceneTooDense


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for trial ``index`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def complex_normal(rng: np.random.Generator, variance: float, size) -> np.ndarray:
    """Circular complex Gaussian draws ``CN(0, variance)``."""
    if variance < 0:
        raise ValueError("variance must be non-negative")
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def db_to_linear(db: float) -> float:
    return 0.0 if np.isneginf(db) else float(10.0 ** (db / 10.0))


def _ratio(signal: float, noise: float) -> float:
    if noise > 0:
        return signal / noise
    return np.inf if signal > 0 else 0.0


@dataclass(frozen=True)
class DirectPath:
    theta: float
    alpha: complex = 0j

    def __post_init__(self):
        if not -90.0 <= self.theta <= 90.0:
            raise ValueError(f"direct-path angle {self.theta} outside [-90, 90]")


@dataclass(frozen=True)
class FirstOrderPair:
    """Reciprocal first-order path pair.

    ``beta1`` weights ``kron(a_T(dod), a_R(doa))`` and ``beta2`` weights
    ``kron(a_T(doa), a_R(dod))``. Stored canonically with ``dod < doa``; the
    amplitudes are swapped along with the angles so the signal is unchanged.
    """

    dod: float
    doa: float
    beta1: complex = 0j
    beta2: complex = 0j

    def __post_init__(self):
        for a in (self.dod, self.doa):
            if not -90.0 <= a <= 90.0:
                raise ValueError(f"pair angle {a} outside [-90, 90]")
        if self.dod == self.doa:
            raise ValueError("a first-order pair needs dod != doa")
        if self.dod > self.doa:
            d, a, b1, b2 = self.doa, self.dod, self.beta2, self.beta1
            object.__setattr__(self, "dod", d)
            object.__setattr__(self, "doa", a)
            object.__setattr__(self, "beta1", b1)
            object.__setattr__(self, "beta2", b2)


@dataclass(frozen=True)
class Scene:
    direct: tuple[DirectPath, ...] = ()
    pairs: tuple[FirstOrderPair, ...] = ()
    sigma2: float = 1.0
    sigma_alpha2: float = 0.0
    sigma_beta2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "direct", tuple(self.direct))
        object.__setattr__(self, "pairs", tuple(self.pairs))
        if self.sigma2 < 0:
            raise ValueError("noise variance must be non-negative")

    @property
    def k0(self) -> int:
        return len(self.direct)

    @property
    def k1(self) -> int:
        return len(self.pairs)

    @property
    def rho0(self) -> float:
        return _ratio(self.sigma_alpha2, self.sigma2)

    @property
    def rho1(self) -> float:
        return _ratio(self.sigma_beta2, self.sigma2)

    @property
    def direct_angles(self) -> np.ndarray:
        return np.array([p.theta for p in self.direct], dtype=float)

    @property
    def pair_angles(self) -> np.ndarray:
        return np.array([(p.dod, p.doa) for p in self.pairs], dtype=float).reshape(-1, 2)

    @property
    def amplitudes(self) -> np.ndarray:
        """Amplitudes in response-matrix column order ``[beta_1; beta_2; alpha]``."""
        b1 = [p.beta1 for p in self.pairs]
        b2 = [p.beta2 for p in self.pairs]
        a = [p.alpha for p in self.direct]
        return np.array(b1 + b2 + a, dtype=complex)

    def response(self, geom: ArrayGeometry):
        return build_response(geom, self.direct_angles, self.pair_angles)

    def with_amplitudes(self, alpha, beta) -> "Scene":
        """Copy with direct amplitudes ``alpha`` and pair amplitudes ``beta``.

        ``beta`` is ordered like the response matrix: all ``beta1`` then all
        ``beta2``.
        """
        alpha = np.asarray(alpha, dtype=complex).ravel()
        beta = np.asarray(beta, dtype=complex).ravel()
        k1 = self.k1
        direct = tuple(DirectPath(p.theta, complex(a)) for p, a in zip(self.direct, alpha))
        pairs = tuple(FirstOrderPair(p.dod, p.doa, complex(beta[k]), complex(beta[k1 + k]))
                      for k, p in enumerate(self.pairs))
        return Scene(direct, pairs, self.sigma2, self.sigma_alpha2, self.sigma_beta2)

    def to_dict(self) -> dict:
        def c(x):
            return [float(np.real(x)), float(np.imag(x))]

        return {
            "direct": [{"theta_deg": p.theta, "alpha": c(p.alpha)} for p in self.direct],
            "pairs": [{"dod_deg": p.dod, "doa_deg": p.doa, "beta1": c(p.beta1), "beta2": c(p.beta2)}
                      for p in self.pairs],
            "sigma2": self.sigma2,
            "sigma_alpha2": self.sigma_alpha2,
            "sigma_beta2": self.sigma_beta2,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scene":
        def c(x):
            if x is None:
                return 0j
            return complex(x[0], x[1])

        direct = [DirectPath(d["theta_deg"], c(d.get("alpha"))) for d in data.get("direct", [])]
        pairs = [FirstOrderPair(p["dod_deg"], p["doa_deg"], c(p.get("beta1")), c(p.get("beta2")))
                 for p in data.get("pairs", [])]
        return cls(tuple(direct), tuple(pairs), float(data.get("sigma2", 1.0)),
                   float(data.get("sigma_alpha2", 0.0)), float(data.get("sigma_beta2", 0.0)))


@dataclass(frozen=True)
class Snapshot:
    z: np.ndarray
    truth: Scene | None = field(default=None, compare=False)
    seed: int | None = None


def draw_scene_amplitudes(rng: np.random.Generator, k0: int, k1: int,
                          sigma_alpha2: float, sigma_beta2: float):
    """Draw ``alpha ~ CN(0, sigma_alpha2 I_K0)`` and ``beta ~ CN(0, sigma_beta2 I_2K1)``."""
    alpha = complex_normal(rng, sigma_alpha2, k0)
    beta = complex_normal(rng, sigma_beta2, 2 * k1)
    return alpha, beta


def noiseless_signal(geom: ArrayGeometry, scene: Scene) -> np.ndarray:
    """Sum of all path contributions of ``scene`` without noise."""
    z = np.zeros(geom.n_virtual, dtype=complex)
    for p in scene.pairs:
        cols = virtual_matrix(geom, [p.dod, p.doa], [p.doa, p.dod])
        z += p.beta1 * cols[:, 0] + p.beta2 * cols[:, 1]
    if scene.direct:
        z += direct_matrix(geom, scene.direct_angles) @ np.array([p.alpha for p in scene.direct])
    return z


def synthesize(geom: ArrayGeometry, scene: Scene, rng: np.random.Generator | None = None,
               seed: int | None = None) -> Snapshot:
    """Noisy snapshot ``z = sum of path responses + w`` with ``w ~ CN(0, sigma2 I)``.

    Raises
    ------
    SceneTooDense
        If ``K0 + 2*K1 >= M``.
    """
    if scene.k0 + 2 * scene.k1 >= geom.n_virtual:
        raise SceneTooDense(f"K0 + 2K1 = {scene.k0 + 2 * scene.k1} >= M = {geom.n_virtual}")
    if rng is None:
        rng = np.random.default_rng(seed)
    z = noiseless_signal(geom, scene)
    if scene.sigma2 > 0:
        z = z + complex_normal(rng, scene.sigma2, geom.n_virtual)
    return Snapshot(z, truth=scene, seed=seed)


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene.to_dict(), indent=2))


def load_scene(path) -> Scene:
    return Scene.from_dict(json.loads(Path(path).read_text()))


def save_snapshot_csv(z, path) -> None:
    """Write one row per virtual element: ``index,re,im``."""
    z = np.asarray(z, dtype=complex)
    lines = ["index,re,im"] + [f"{i},{float(v.real)!r},{float(v.imag)!r}" for i, v in enumerate(z)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_snapshot_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    order = np.argsort(data[:, 0])
    return data[order, 1] + 1j * data[order, 2]
