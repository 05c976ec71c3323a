"""Real canonical form of antisymmetric matrices and Givens folding of orthonormal matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import PreconditionError


def pair_matrix(alpha) -> np.ndarray:
    """Block-diagonal ``diag([[0, a_l], [-a_l, 0]])``."""
    alpha = np.asarray(alpha, dtype=float)
    lam = np.zeros((2 * alpha.size, 2 * alpha.size))
    i = np.arange(alpha.size)
    lam[2 * i, 2 * i + 1] = alpha
    lam[2 * i + 1, 2 * i] = -alpha
    return lam


@dataclass(frozen=True)
class CanonicalFactorization:
    """``A = U diag([[0, a_l], [-a_l, 0]]) U^T`` with ``U`` real orthonormal."""

    U: np.ndarray
    alpha: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.U @ pair_matrix(self.alpha) @ self.U.T

    def flip(self, l: int) -> "CanonicalFactorization":
        """Negate pair ``l``: column ``2l+1`` of ``U`` and ``alpha[l]`` change sign together."""
        U = self.U.copy()
        U[:, 2 * l + 1] *= -1
        alpha = self.alpha.copy()
        alpha[l] *= -1
        return CanonicalFactorization(U, alpha)

    def permute(self, order) -> "CanonicalFactorization":
        """Reorder the pairs so that new pair ``i`` is old pair ``order[i]``."""
        order = np.asarray(order)
        cols = np.stack([2 * order, 2 * order + 1], axis=1).ravel()
        return CanonicalFactorization(self.U[:, cols], self.alpha[order])


def youla_factorize(A, tol: float = 1e-12) -> CanonicalFactorization:
    """Canonical factorization of a real antisymmetric matrix.

    Built from the eigenvectors of the Hermitian matrix ``iA``: an eigenvector
    ``x + iy`` with eigenvalue ``a > 0`` yields the real plane
    ``(sqrt2 y, sqrt2 x)`` with pair amplitude ``a``.  Each eigenvector's phase
    is fixed so that its first largest entry is positive imaginary.  The kernel
    of ``A`` is paired by Gram-Schmidt over the standard basis in index order.
    Amplitudes come out nonnegative and sorted descending.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise PreconditionError("A must be square")
    dim = A.shape[0]
    if dim % 2:
        raise PreconditionError("A must have even dimension")
    scale = np.linalg.norm(A)
    if np.linalg.norm(A + A.T) > tol * scale:
        raise PreconditionError("A is not antisymmetric")
    if scale == 0.0:
        return CanonicalFactorization(np.eye(dim), np.zeros(dim // 2))

    vals, vecs = np.linalg.eigh(1j * A)
    zero_tol = 1e-11 * scale
    positive = [i for i in range(dim - 1, -1, -1) if vals[i] > zero_tol]
    cols, alpha = [], []
    for i in positive:
        v = vecs[:, i]
        # phase gauge: first (near-)largest entry made positive imaginary
        mag = np.abs(v)
        k = int(np.flatnonzero(mag >= mag.max() - 1e-10)[0])
        v = v * (1j * mag[k] / v[k])
        cols += [np.sqrt(2) * v.imag, np.sqrt(2) * v.real]
        alpha.append(vals[i])

    basis = np.array(cols).reshape(-1, dim)
    n_zero = dim - basis.shape[0]
    kernel = []
    for i in range(dim):
        if len(kernel) == n_zero:
            break
        e = np.zeros(dim)
        e[i] = 1.0
        for q in (*basis, *kernel):
            e -= (q @ e) * q
        for q in (*basis, *kernel):
            e -= (q @ e) * q
        nrm = np.linalg.norm(e)
        if nrm > 1e-8:
            kernel.append(e / nrm)
    U = np.column_stack([*basis, *kernel]) if basis.size else np.column_stack(kernel)
    alpha = np.concatenate([alpha, np.zeros(n_zero // 2)])
    return CanonicalFactorization(U, alpha)


class Rotation(NamedTuple):
    plane: int  # 1-based; mixes rows plane-1 and plane
    column: int  # 1-based column whose entry the rotation cleared
    theta: float


@dataclass(frozen=True)
class GivensSchedule:
    dim: int
    rotations: tuple[Rotation, ...] = ()

    def __len__(self) -> int:
        return len(self.rotations)

    def __iter__(self):
        return iter(self.rotations)


def _check_orthonormal(U: np.ndarray, tol: float) -> None:
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise PreconditionError("U must be square")
    if np.max(np.abs(U.T @ U - np.eye(U.shape[0]))) > tol:
        raise PreconditionError("U is not orthonormal")


def fold_to_identity(U, tol: float = 1e-10) -> GivensSchedule:
    """Givens schedule that reduces an orthonormal ``U`` (det +1) to the identity.

    Column ``k`` is cleared bottom-up with rotations in planes ``(j-1, j)``,
    ``tan(theta) = U[j, k] / U[j-1, k]`` evaluated with ``atan2``.
    """
    M = np.array(U, dtype=float)
    _check_orthonormal(M, tol)
    if np.linalg.det(M) < 0:
        raise PreconditionError("det(U) = -1 cannot be folded with proper rotations")
    dim = M.shape[0]
    rots = []
    for k in range(dim - 1):
        for j in range(dim - 1, k, -1):
            lower, upper = M[j, k], M[j - 1, k]
            if lower == 0.0 and not (j == k + 1 and upper < 0):
                continue
            theta = float(np.arctan2(lower, upper))
            _rotate_rows(M, j - 1, j, np.cos(theta), np.sin(theta))
            M[j, k] = 0.0
            rots.append(Rotation(j + 1, k + 1, theta))
    if M[-1, -1] < 0:
        raise PreconditionError("fold ended with -1 on the diagonal")
    return GivensSchedule(dim, tuple(rots))


def _rotate_rows(M: np.ndarray, a: int, b: int, c: float, s: float) -> None:
    ra, rb = M[a].copy(), M[b].copy()
    M[a] = c * ra + s * rb
    M[b] = c * rb - s * ra


def apply_givens(M, schedule: GivensSchedule, direction: str = "forward") -> np.ndarray:
    """Replay a schedule on the rows of ``M`` (``inverse`` undoes ``forward``)."""
    out = np.array(M, dtype=np.result_type(M, float))
    rows = out.shape[0]
    if direction == "forward":
        seq, sgn = schedule.rotations, 1.0
    elif direction == "inverse":
        seq, sgn = schedule.rotations[::-1], -1.0
    else:
        raise ValueError(f"unknown direction {direction!r}")
    for rot in seq:
        if not 2 <= rot.plane <= rows:
            raise IndexError(f"plane {rot.plane} out of range for {rows} rows")
        _rotate_rows(out, rot.plane - 2, rot.plane - 1, np.cos(rot.theta), sgn * np.sin(rot.theta))
    return out
