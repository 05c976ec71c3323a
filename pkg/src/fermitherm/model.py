"""Quadratic Hamiltonians, linear baths and the argument matrices of the Gibbs exponent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components


class PreconditionError(ValueError):
    """Raised when an input violates a documented precondition."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CoefficientMatrix:
    """Real symmetric single-body coefficients ``h[j, k]`` of ``H = sum h c_j^dag c_k``."""

    h: np.ndarray

    def __post_init__(self):
        h = _frozen(self.h)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] == 0:
            raise PreconditionError(f"h must be a non-empty square matrix, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise PreconditionError("h has non-finite entries")
        if not np.array_equal(h, h.T):
            raise PreconditionError("h must be exactly symmetric")
        object.__setattr__(self, "h", h)

    @property
    def n_sites(self) -> int:
        return self.h.shape[0]

    @classmethod
    def tridiagonal(cls, n_sites: int, hopping: float = 1.0) -> "CoefficientMatrix":
        """Uniform nearest-neighbour chain ``h[j, j+1] = h[j+1, j] = hopping``."""
        h = np.zeros((n_sites, n_sites))
        i = np.arange(n_sites - 1)
        h[i, i + 1] = h[i + 1, i] = hopping
        return cls(h)

    @classmethod
    def diagonal_plus_uniform(cls, diagonal, offdiag: float) -> "CoefficientMatrix":
        """``h[j, k] = diagonal[j] delta_jk + (1 - delta_jk) * offdiag``."""
        d = np.asarray(diagonal, dtype=float)
        h = np.full((d.size, d.size), float(offdiag))
        np.fill_diagonal(h, d)
        return cls(h)


@dataclass(frozen=True)
class ThermoParams:
    """Inverse temperature and chemical potential.

    ``beta_mu`` may be given instead of ``mu`` so that the product stays
    well defined at ``beta = 0`` (constant fugacity sweeps).
    """

    beta: float
    mu: float = 0.0
    beta_mu: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.beta) and np.isfinite(self.mu)):
            raise PreconditionError("beta and mu must be finite")
        if self.beta < 0:
            raise PreconditionError("beta must be nonnegative")
        if self.beta_mu is not None and not np.isfinite(self.beta_mu):
            raise PreconditionError("beta_mu must be finite")

    @classmethod
    def at_fugacity(cls, beta: float, beta_mu: float) -> "ThermoParams":
        mu = beta_mu / beta if beta > 0 else 0.0
        return cls(beta=beta, mu=mu, beta_mu=beta_mu)

    @property
    def log_fugacity(self) -> float:
        return self.beta * self.mu if self.beta_mu is None else self.beta_mu


@dataclass(frozen=True)
class BathSet:
    """Linear Lindblad operators ``L_n = sum_j v_j c_j + w_j c_j^dag``.

    ``B[n, 2j]`` and ``B[n, 2j+1]`` (0-indexed) hold ``(v + w)/2`` and ``(v - w)/2``.
    """

    B: np.ndarray

    def __post_init__(self):
        B = _frozen(np.atleast_2d(self.B))
        if B.shape[1] % 2 or B.shape[1] == 0:
            raise PreconditionError("B must have 2N Majorana columns")
        if not np.all(np.isfinite(B)):
            raise PreconditionError("bath coefficients must be finite")
        object.__setattr__(self, "B", B)

    @classmethod
    def from_vw(cls, v, w) -> "BathSet":
        v = np.atleast_2d(np.asarray(v, dtype=float))
        w = np.atleast_2d(np.asarray(w, dtype=float))
        if v.shape != w.shape:
            raise PreconditionError("v and w must have equal shapes")
        B = np.empty((v.shape[0], 2 * v.shape[1]))
        B[:, 0::2] = (v + w) / 2
        B[:, 1::2] = (v - w) / 2
        return cls(B)

    @classmethod
    def empty(cls, n_sites: int) -> "BathSet":
        return cls(np.zeros((1, 2 * n_sites)))

    @property
    def n_baths(self) -> int:
        return self.B.shape[0]

    @property
    def n_sites(self) -> int:
        return self.B.shape[1] // 2

    @property
    def v(self) -> np.ndarray:
        return self.B[:, 0::2] + self.B[:, 1::2]

    @property
    def w(self) -> np.ndarray:
        return self.B[:, 0::2] - self.B[:, 1::2]

    def is_empty(self) -> bool:
        return not np.any(self.B)

    def occupied_eigenvalue(self) -> float:
        """Eigenvalue of the Liouvillian on the fully occupied second-space ket."""
        return -4.0 * float(np.sum(self.B**2))


@dataclass(frozen=True)
class ArgumentMatrices:
    R: np.ndarray
    A: np.ndarray
    A0: float


@dataclass(frozen=True)
class BlockPartition:
    irreducible: bool
    blocks: tuple[tuple[int, ...], ...] = field(default=())

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)


def _as_coeffs(h) -> CoefficientMatrix:
    return h if isinstance(h, CoefficientMatrix) else CoefficientMatrix(np.asarray(h, dtype=float))


def single_body_spectrum(h) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (columns) of ``h``.

    Each eigenvector is sign-fixed so that its first nonzero component is positive.
    """
    h = _as_coeffs(h).h
    eps, vecs = np.linalg.eigh(h)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(vecs))))
    for k in range(vecs.shape[1]):
        first = np.flatnonzero(np.abs(vecs[:, k]) > tol)[0]
        if vecs[first, k] < 0:
            vecs[:, k] = -vecs[:, k]
    return eps, vecs


def majorana_index_map(l: int) -> int:
    """``f(l) = (2l + 1 - (-1)^l) / 4`` on 1-based indices: 1,1,2,2,3,3,..."""
    return (2 * l + 1 - (-1) ** l) // 4


def argument_matrices(h, p: ThermoParams) -> ArgumentMatrices:
    """``R = -beta h + beta mu``, its antisymmetric Majorana form ``A`` and scalar ``A0``."""
    h = _as_coeffs(h).h
    n = h.shape[0]
    R = -p.beta * h + p.log_fugacity * np.eye(n)
    idx = np.arange(1, 2 * n + 1)
    f = np.array([majorana_index_map(int(l)) for l in idx]) - 1
    sign = (-1.0) ** idx
    A = (sign[None, :] - sign[:, None]) * R[np.ix_(f, f)]
    return ArgumentMatrices(R=R, A=A, A0=0.5 * float(np.trace(R)))


def log_grand_partition(eps, p: ThermoParams) -> float:
    x = -(p.beta * np.asarray(eps, dtype=float) - p.log_fugacity)
    return float(np.sum(np.logaddexp(0.0, x)))


def grand_partition_closed_form(eps, p: ThermoParams) -> tuple[float, float]:
    """``Xi = prod_j (1 + exp(-beta (eps_j - mu)))`` and ``log Xi``.

    ``Xi`` is ``inf`` when it overflows; ``log Xi`` is always finite.
    """
    log_xi = log_grand_partition(eps, p)
    with np.errstate(over="ignore"):
        return float(np.exp(log_xi)), log_xi


def fermi_dirac(eps, p: ThermoParams):
    """Occupation ``1 / (exp(beta (eps - mu)) + 1)``, saturating at extreme arguments."""
    x = p.beta * np.asarray(eps, dtype=float) - p.log_fugacity
    out = 0.5 * (1.0 - np.tanh(0.5 * x))
    return float(out) if np.ndim(out) == 0 else out


def irreducibility_check(h) -> BlockPartition:
    """Connected components of the exact-nonzero pattern of ``h``."""
    h = _as_coeffs(h).h
    n_b, labels = connected_components((h != 0).astype(np.int8), directed=False)
    blocks = [tuple(int(i) for i in np.flatnonzero(labels == b)) for b in range(n_b)]
    blocks.sort(key=lambda b: b[0])
    return BlockPartition(irreducible=n_b == 1, blocks=tuple(blocks))
