"""Residual objective ``F = ||z - A A^+ z||^2`` and its angle derivatives.

The angle vector is stacked ``[dod_1..dod_K1, doa_1..doa_K1, theta_1..theta_K0]``
in degrees; gradients and Hessians are per radian. The columns of ``A`` are
``a1_k = kron(a_T(dod_k), a_R(doa_k))``, ``a2_k = kron(a_T(doa_k), a_R(dod_k))``
and ``a(theta_k)``, so every pair angle moves two columns.

The Hessian is the Gauss-Newton form ``2 Re{J^H J}`` with ``J`` the Jacobian of
the residual ``f = P z``; it is assembled block-wise from

* ``S = A^+ z z^H (A^+)^H``
* ``C = A^+ (A^+)^H``
* ``X = P z z^H P``

and the derivative matrices ``D_T`` (wrt departure angles), ``D_R`` (wrt
arrival angles) and ``D_0`` (wrt direct-path angles).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array import ArrayGeometry, RANK_TOL, _kron_columns, _steer, _steer_deriv, _svd_range


def split_angles(angles, k1: int):
    angles = np.asarray(angles, dtype=float)
    return angles[:k1], angles[k1:2 * k1], angles[2 * k1:]


def response_and_derivatives(geom: ArrayGeometry, dods, doas, direct):
    """Response matrix ``A`` and derivative matrices ``D_T``, ``D_R``, ``D_0``.

    ``D_T`` and ``D_R`` have ``2K1`` columns aligned with the first ``2K1``
    columns of ``A``; ``D_0`` has ``K0`` columns aligned with the rest.
    """
    tx, rx, wl = geom.tx_positions, geom.rx_positions, geom.wavelength
    dods = np.asarray(dods, dtype=float)
    doas = np.asarray(doas, dtype=float)
    direct = np.asarray(direct, dtype=float)
    both = np.concatenate([dods, doas])
    swap = np.concatenate([doas, dods])
    dep = np.concatenate([both, direct])
    arr = np.concatenate([swap, direct])
    at, ar = _steer(tx, wl, dep), _steer(rx, wl, arr)
    dat, dar = _steer_deriv(tx, wl, dep), _steer_deriv(rx, wl, arr)
    A = _kron_columns(at, ar)
    k1 = dods.size
    n_pair = 2 * k1
    # a1_k depends on dod_k through TX and a2_k through RX; mirror for doa_k.
    d_t = np.concatenate([_kron_columns(dat[:, :k1], ar[:, :k1]),
                          _kron_columns(at[:, k1:n_pair], dar[:, k1:n_pair])], axis=1)
    d_r = np.concatenate([_kron_columns(at[:, :k1], dar[:, :k1]),
                          _kron_columns(dat[:, k1:n_pair], ar[:, k1:n_pair])], axis=1)
    d_0 = (_kron_columns(dat[:, n_pair:], ar[:, n_pair:])
           + _kron_columns(at[:, n_pair:], dar[:, n_pair:]))
    return A, d_t, d_r, d_0


def objective(geom: ArrayGeometry, angles, k1: int, z, rank_tol: float = RANK_TOL) -> float:
    """``||P z||^2`` for the stacked angle vector. Raises RankDeficient."""
    dods, doas, direct = split_angles(angles, k1)
    dep = np.concatenate([dods, doas, direct])
    arr = np.concatenate([doas, dods, direct])
    if dep.size == 0:
        return float(np.vdot(z, z).real)
    A = _kron_columns(_steer(geom.tx_positions, geom.wavelength, dep),
                      _steer(geom.rx_positions, geom.wavelength, arr))
    U, _, _ = _svd_range(A, rank_tol)
    r = z - U @ (U.conj().T @ z)
    return float(np.vdot(r, r).real)


@dataclass
class ObjectiveState:
    """Quantities shared by the value, gradient and Hessian at one point."""

    k1: int
    A: np.ndarray
    d_t: np.ndarray
    d_r: np.ndarray
    d_0: np.ndarray
    pinv: np.ndarray
    P: np.ndarray
    alpha: np.ndarray
    pz: np.ndarray

    @property
    def value(self) -> float:
        return float(np.vdot(self.pz, self.pz).real)


def evaluate(geom: ArrayGeometry, angles, k1: int, z, rank_tol: float = RANK_TOL) -> ObjectiveState:
    dods, doas, direct = split_angles(angles, k1)
    A, d_t, d_r, d_0 = response_and_derivatives(geom, dods, doas, direct)
    if A.shape[1] == 0:
        z = np.asarray(z, dtype=complex)
        return ObjectiveState(k1, A, d_t, d_r, d_0, np.zeros((0, A.shape[0]), complex),
                              np.eye(A.shape[0]), np.zeros(0, complex), z.copy())
    U, s, Vh = _svd_range(A, rank_tol)
    pinv = (Vh.conj().T / s) @ U.conj().T
    P = np.eye(A.shape[0]) - U @ U.conj().T
    return ObjectiveState(k1, A, d_t, d_r, d_0, pinv, P, pinv @ z, P @ z)


def _blocks(st: ObjectiveState):
    """(derivative matrix, column indices into A, summation matrix) per block."""
    k1, k0 = st.k1, st.d_0.shape[1]
    pair_idx = np.arange(2 * k1)
    e_h = np.hstack([np.eye(k1), np.eye(k1)])
    return [
        (st.d_t, pair_idx, e_h),
        (st.d_r, pair_idx, e_h),
        (st.d_0, 2 * k1 + np.arange(k0), np.eye(k0)),
    ]


def gradient(st: ObjectiveState) -> np.ndarray:
    """``g = -2 Re diag(Gamma D)`` per block with ``Gamma = A^+ z z^H P``."""
    # diag(Gamma D)_c = alpha_c * (P z)^H d_c
    parts = []
    for d, idx, e in _blocks(st):
        proj = st.alpha[idx] * (st.pz.conj() @ d)
        parts.append(-2.0 * e @ proj.real)
    return np.concatenate(parts)


def _stacked(st: ObjectiveState):
    """All derivative columns side by side with their column map and summation matrix."""
    blocks = _blocks(st)
    d = np.concatenate([b[0] for b in blocks], axis=1)
    idx = np.concatenate([b[1] for b in blocks])
    rows = sum(b[2].shape[0] for b in blocks)
    e = np.zeros((rows, idx.size))
    r = c = 0
    for _, _, eb in blocks:
        e[r:r + eb.shape[0], c:c + eb.shape[1]] = eb
        r += eb.shape[0]
        c += eb.shape[1]
    return d, idx, e


def hessian(st: ObjectiveState) -> np.ndarray:
    """Gauss-Newton Hessian assembled from the nine ``(T, R, 0)`` blocks.

    Block ``(x, y)`` is::

        2 Re{ E_x [(D_x^H P D_y) o S[y, x]^T] E_y^T }
      + 2 Re{ E_x [(D_y^H X D_x)^T o C[x, y]] E_y^T }

    where ``o`` is the Hadamard product and ``[x, y]`` selects the rows and
    columns of the corresponding response-matrix columns. All nine blocks are
    formed at once from the side-by-side derivative matrix ``[D_T, D_R, D_0]``.
    """
    d, idx, e = _stacked(st)
    if idx.size == 0:
        return np.zeros((0, 0))
    alpha = st.alpha[idx]
    pinv = st.pinv[idx]
    # S[idx, idx]^T = conj(alpha) alpha^T
    first = (d.conj().T @ (st.P @ d)) * np.outer(alpha.conj(), alpha)
    # D_y^H X D_x = (D_y^H P z)(P z^H D_x), transposed
    dpz = d.conj().T @ st.pz
    second = np.outer(dpz.conj(), dpz) * (pinv @ pinv.conj().T)
    return 2.0 * (e @ (first + second) @ e.T).real
