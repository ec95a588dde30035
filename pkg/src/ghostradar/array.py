"""Array geometry, steering vectors and the virtual-array linear algebra.

Angles are in degrees at every public interface and converted to radians
internally. Angle derivatives are returned per radian.

The virtual steering vector of a colocated MIMO array for a path departing
at ``dod`` and arriving at ``doa`` is ``kron(a_tx(dod), a_rx(doa))``; a
direct path has ``dod == doa``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import DegeneratePair, RankDeficient

#: Carrier wavelength of a 79 GHz radar, in meters.
WAVELENGTH_79GHZ = 0.0038

#: Relative singular-value tolerance used by :func:`pseudo_inverse`.
RANK_TOL = 1e-10

DIRECT = "direct"
FIRST_ORDER = "first-order"


@dataclass(frozen=True)
class ArrayGeometry:
    """Element positions of a colocated linear MIMO array.

    Parameters
    ----------
    tx_positions, rx_positions : sequence of float
        Element positions in meters, relative to the reference element.
    wavelength : float
        Carrier wavelength in meters.
    name : str, optional
        Free-form label; not used in any computation.
    """

    tx_positions: tuple[float, ...]
    rx_positions: tuple[float, ...]
    wavelength: float = WAVELENGTH_79GHZ
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        tx = tuple(float(p) for p in np.ravel(self.tx_positions))
        rx = tuple(float(p) for p in np.ravel(self.rx_positions))
        object.__setattr__(self, "tx_positions", tx)
        object.__setattr__(self, "rx_positions", rx)
        object.__setattr__(self, "wavelength", float(self.wavelength))
        if not tx or not rx:
            raise ValueError("a MIMO array needs at least one TX and one RX element")
        if not np.all(np.isfinite(tx + rx)):
            raise ValueError("element positions must be finite")
        if not (self.wavelength > 0 and np.isfinite(self.wavelength)):
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")

    @property
    def n_tx(self) -> int:
        return len(self.tx_positions)

    @property
    def n_rx(self) -> int:
        return len(self.rx_positions)

    @property
    def n_virtual(self) -> int:
        """Virtual array size ``M = M_T * M_R``."""
        return self.n_tx * self.n_rx

    @property
    def virtual_positions(self) -> np.ndarray:
        """Positions of the virtual elements, in Kronecker order."""
        return (np.asarray(self.tx_positions)[:, None] + np.asarray(self.rx_positions)[None, :]).ravel()

    def beamwidth_deg(self) -> float:
        """Rayleigh width ``wavelength / virtual aperture`` in degrees."""
        extent = np.ptp(self.virtual_positions)
        if extent <= 0:
            return 180.0
        return float(np.rad2deg(self.wavelength / extent))

    def to_dict(self) -> dict:
        return {
            "tx_positions_m": list(self.tx_positions),
            "rx_positions_m": list(self.rx_positions),
            "wavelength_m": self.wavelength,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArrayGeometry":
        return cls(
            tx_positions=data["tx_positions_m"],
            rx_positions=data["rx_positions_m"],
            wavelength=data.get("wavelength_m", WAVELENGTH_79GHZ),
            name=data.get("name", "custom"),
        )


def ula(n_tx: int = 6, n_rx: int = 8, wavelength: float = WAVELENGTH_79GHZ,
        tx_spacing: float | None = None) -> ArrayGeometry:
    """MIMO array with uniform TX and RX lines.

    Both lines are spaced ``wavelength / 2`` by default, so each steering
    vector is free of grating lobes on its own. Pass
    ``tx_spacing = n_rx * wavelength / 2`` for the filled layout whose
    virtual array is a single ``n_tx * n_rx`` element half-wavelength ULA; its
    TX line then has grating lobes, which lets one reciprocal pair imitate two
    direct paths.
    """
    half = wavelength / 2
    tx = np.arange(n_tx) * (half if tx_spacing is None else tx_spacing)
    rx = np.arange(n_rx) * half
    return ArrayGeometry(tuple(tx), tuple(rx), wavelength, name=f"ula{n_tx}x{n_rx}")


# Illustrative 6x8 sparse layout in half-wavelength units; not the layout of
# any published radar. Virtual aperture is 69 half-wavelengths (ULA: 12).
_SLA_TX_UNITS = (0, 8, 16, 28, 40, 56)
_SLA_RX_UNITS = (0, 1, 2, 3, 6, 7, 10, 13)


def example_sla(wavelength: float = WAVELENGTH_79GHZ) -> ArrayGeometry:
    """Illustrative 6 TX x 8 RX sparse linear array.

    Positions are integer multiples of half a wavelength and span a larger
    virtual aperture than :func:`ula` with the same element counts. Narrower
    mainlobe, higher sidelobes.
    """
    half = wavelength / 2
    return ArrayGeometry(
        tuple(u * half for u in _SLA_TX_UNITS),
        tuple(u * half for u in _SLA_RX_UNITS),
        wavelength,
        name="sla6x8",
    )


def _as_angles(angles) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(angles, dtype=float))
    if arr.ndim != 1:
        raise ValueError("angles must be a scalar or 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError("angles must be finite")
    if np.any(np.abs(arr) > 90.0):
        raise ValueError("angles must lie in [-90, 90] degrees")
    return arr


def _steer(positions: Sequence[float], wavelength: float, angles_deg) -> np.ndarray:
    pos = np.asarray(positions)
    k = 2.0 * np.pi / wavelength
    phase = k * np.outer(pos, np.sin(np.deg2rad(angles_deg)))
    return np.exp(1j * phase) / np.sqrt(len(pos))


def _steer_deriv(positions: Sequence[float], wavelength: float, angles_deg) -> np.ndarray:
    # d/dtheta exp(j k d sin(theta)) = j k d cos(theta) exp(...)
    pos = np.asarray(positions)
    k = 2.0 * np.pi / wavelength
    rad = np.deg2rad(angles_deg)
    base = _steer(pos, wavelength, angles_deg)
    return 1j * k * np.outer(pos, np.cos(rad)) * base


def _kron_columns(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker (Khatri-Rao) product of two matrices."""
    n = left.shape[1]
    return (left[:, None, :] * right[None, :, :]).reshape(left.shape[0] * right.shape[0], n)


def steering_tx(geom: ArrayGeometry, angle: float) -> np.ndarray:
    """TX steering vector ``a_T(angle)``, unit norm, length ``M_T``."""
    return _steer(geom.tx_positions, geom.wavelength, _as_angles(angle))[:, 0]


def steering_rx(geom: ArrayGeometry, angle: float) -> np.ndarray:
    """RX steering vector ``a_R(angle)``, unit norm, length ``M_R``."""
    return _steer(geom.rx_positions, geom.wavelength, _as_angles(angle))[:, 0]


def tx_matrix(geom: ArrayGeometry, angles) -> np.ndarray:
    return _steer(geom.tx_positions, geom.wavelength, _as_angles(angles))


def rx_matrix(geom: ArrayGeometry, angles) -> np.ndarray:
    return _steer(geom.rx_positions, geom.wavelength, _as_angles(angles))


def virtual_steering(geom: ArrayGeometry, dod: float, doa: float) -> np.ndarray:
    """Virtual-array response ``kron(a_T(dod), a_R(doa))``."""
    return np.kron(steering_tx(geom, dod), steering_rx(geom, doa))


def virtual_matrix(geom: ArrayGeometry, dods, doas) -> np.ndarray:
    """Columns ``kron(a_T(dods[k]), a_R(doas[k]))`` stacked into an ``M x K`` matrix."""
    return _kron_columns(tx_matrix(geom, dods), rx_matrix(geom, doas))


def direct_matrix(geom: ArrayGeometry, angles) -> np.ndarray:
    """Direct-path steering matrix ``A(Theta_0)``."""
    angles = _as_angles(angles) if np.size(angles) else np.zeros(0)
    if angles.size == 0:
        return np.zeros((geom.n_virtual, 0), dtype=complex)
    return virtual_matrix(geom, angles, angles)


def steering_derivative(geom: ArrayGeometry, dod: float, doa: float, wrt: str) -> np.ndarray:
    """Derivative of :func:`virtual_steering` with respect to one angle, per radian.

    ``wrt`` is ``"dod"``, ``"doa"`` or ``"both"`` (the total derivative of a
    direct column ``a(theta)`` when ``dod == doa == theta``).
    """
    dod_a, doa_a = _as_angles(dod), _as_angles(doa)
    wl = geom.wavelength
    if wrt == "dod":
        return np.kron(_steer_deriv(geom.tx_positions, wl, dod_a)[:, 0],
                       _steer(geom.rx_positions, wl, doa_a)[:, 0])
    if wrt == "doa":
        return np.kron(_steer(geom.tx_positions, wl, dod_a)[:, 0],
                       _steer_deriv(geom.rx_positions, wl, doa_a)[:, 0])
    if wrt == "both":
        return (steering_derivative(geom, dod, doa, "dod")
                + steering_derivative(geom, dod, doa, "doa"))
    raise ValueError(f"wrt must be 'dod', 'doa' or 'both', got {wrt!r}")


@dataclass(frozen=True)
class ResponseMatrix:
    """Response matrix with per-column provenance.

    Column order: ``kron(a_T(dod_k), a_R(doa_k))`` for every pair ``k``, then
    the swapped columns ``kron(a_T(doa_k), a_R(dod_k))``, then the direct
    columns. ``column_kinds[i]`` is ``(kind, dod, doa)``.
    """

    entries: np.ndarray
    column_kinds: tuple[tuple[str, float, float], ...]

    @property
    def shape(self):
        return self.entries.shape

    @property
    def n_pairs(self) -> int:
        return sum(kind == FIRST_ORDER for kind, _, _ in self.column_kinds) // 2

    @property
    def n_direct(self) -> int:
        return sum(kind == DIRECT for kind, _, _ in self.column_kinds)


def build_response(geom: ArrayGeometry, direct_angles=(), pair_angles=()) -> ResponseMatrix:
    """Assemble the response matrix of a set of direct paths and first-order pairs.

    Raises
    ------
    DegeneratePair
        If any pair has ``dod == doa``.
    """
    direct = np.asarray(direct_angles, dtype=float).ravel()
    pairs = np.asarray(pair_angles, dtype=float).reshape(-1, 2)
    if np.any(pairs[:, 0] == pairs[:, 1]):
        raise DegeneratePair("first-order pair with dod == doa duplicates a direct column")
    dods, doas = pairs[:, 0], pairs[:, 1]
    dod_all = np.concatenate([dods, doas, direct])
    doa_all = np.concatenate([doas, dods, direct])
    if dod_all.size == 0:
        entries = np.zeros((geom.n_virtual, 0), dtype=complex)
    else:
        entries = virtual_matrix(geom, dod_all, doa_all)
    kinds = tuple(
        (FIRST_ORDER if i < 2 * len(pairs) else DIRECT, float(a), float(b))
        for i, (a, b) in enumerate(zip(dod_all, doa_all))
    )
    return ResponseMatrix(entries, kinds)


def _svd_range(A: np.ndarray, rank_tol: float):
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    if s.size and (s[-1] < rank_tol * s[0] or s[0] == 0):
        raise RankDeficient(
            f"smallest singular value {s[-1]:.3e} below {rank_tol:g} x largest {s[0]:.3e}")
    return U, s, Vh


def pseudo_inverse(A: np.ndarray, rank_tol: float = RANK_TOL, return_cond: bool = False):
    """Moore-Penrose pseudo-inverse of a full-column-rank matrix via SVD.

    Raises
    ------
    RankDeficient
        If ``s_min < rank_tol * s_max``.
    """
    A = np.asarray(A)
    if A.shape[1] == 0:
        pinv = np.zeros((0, A.shape[0]), dtype=A.dtype)
        return (pinv, 1.0) if return_cond else pinv
    U, s, Vh = _svd_range(A, rank_tol)
    pinv = (Vh.conj().T / s) @ U.conj().T
    if return_cond:
        return pinv, float(s[0] / s[-1])
    return pinv


def projector_complement(A: np.ndarray, m_dim: int | None = None, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthogonal projector ``I - A A^+`` onto the complement of ``range(A)``."""
    A = np.asarray(A)
    m = A.shape[0] if m_dim is None else m_dim
    if A.shape[0] != m:
        raise ValueError(f"A has {A.shape[0]} rows, expected {m}")
    if A.shape[1] == 0:
        return np.eye(m, dtype=complex)
    U, _, _ = _svd_range(A, rank_tol)
    return np.eye(m) - U @ U.conj().T


def least_squares_fit(A: np.ndarray, z: np.ndarray, rank_tol: float = RANK_TOL):
    """Least-squares amplitudes ``A^+ z`` and residual ``z - A A^+ z`` from one SVD."""
    if A.shape[1] == 0:
        return np.zeros(0, dtype=complex), np.array(z, dtype=complex)
    U, s, Vh = _svd_range(A, rank_tol)
    uz = U.conj().T @ z
    coef = Vh.conj().T @ (uz / s)
    return coef, z - U @ uz
