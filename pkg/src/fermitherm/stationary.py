"""Closed-form stationary states for locally coupled linear baths and their thermal reading."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .liouvillian import MAX_MATRIX_FREE_SITES, build_superoperator
from .model import BathSet, CoefficientMatrix, PreconditionError, _as_coeffs
from .mps import DEFAULT_CHI, CanonicalMPS, product_state

SMALL_X = 1e-8


def bath_ratio(x: float, branch: str = "plus") -> float:
    """Root of ``2r + x(1 + r^2) = 0``: ``(-1 +- sqrt(1 - x^2)) / x``.

    The ``plus`` root is evaluated as ``-x / (1 + sqrt(1 - x^2))`` so it stays
    finite through ``x = 0``; the ``minus`` root diverges there and is refused.
    """
    if not abs(x) < 1:
        raise PreconditionError(f"|x| must be < 1, got {x}")
    root = np.sqrt(1.0 - x * x)
    if branch == "plus":
        return -x / (1.0 + root)
    if branch == "minus":
        if abs(x) < SMALL_X:
            raise PreconditionError("the minus branch diverges for x -> 0")
        return (-1.0 - root) / x
    raise ValueError(f"unknown branch {branch!r}")


@dataclass(frozen=True)
class Theorem1Config:
    x: float
    b: np.ndarray
    branch: str = "plus"

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        object.__setattr__(self, "b", b)
        if not abs(self.x) < 1:
            raise PreconditionError("|x| must be < 1")
        if not np.any(b):
            raise PreconditionError("at least one bath amplitude must be nonzero")

    @property
    def n_sites(self) -> int:
        return self.b.size


@dataclass(frozen=True)
class Block:
    x: float
    b: np.ndarray
    y: np.ndarray | None = None  # block Hamiltonian, d x d

    @property
    def size(self) -> int:
        return np.asarray(self.b).size


@dataclass(frozen=True)
class Theorem2Config:
    blocks: tuple
    branch: str = "plus"

    def __post_init__(self):
        blocks = tuple(Block(float(b.x), np.asarray(b.b, dtype=float),
                             None if b.y is None else np.asarray(b.y, dtype=float)) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        for blk in blocks:
            if not abs(blk.x) < 1:
                raise PreconditionError("|x_l| must be < 1 for every block")
            if not np.any(blk.b):
                raise PreconditionError("every block needs a nonzero bath amplitude")
            if blk.y is not None and blk.y.shape != (blk.size, blk.size):
                raise PreconditionError("block Hamiltonian size does not match its bath row")

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(b.size for b in self.blocks)

    @property
    def n_sites(self) -> int:
        return sum(self.sizes)

    def site_x(self) -> np.ndarray:
        return np.concatenate([np.full(b.size, b.x) for b in self.blocks])

    def hamiltonian(self) -> CoefficientMatrix:
        if any(b.y is None for b in self.blocks):
            raise PreconditionError("block Hamiltonians were not given")
        return CoefficientMatrix(scipy.linalg.block_diag(*[b.y for b in self.blocks]))


def _local_baths(amps, ratios) -> BathSet:
    n = len(amps)
    B = np.zeros((n, 2 * n))
    i = np.arange(n)
    B[i, 2 * i] = amps
    B[i, 2 * i + 1] = np.asarray(ratios) * np.asarray(amps)
    return BathSet(B)


def theorem1_baths(cfg: Theorem1Config) -> BathSet:
    """One bath per site: ``B_{2j-1}^(n) = delta_jn b_j``, ``B_{2j}^(n) = r(x) B_{2j-1}^(n)``."""
    r = bath_ratio(cfg.x, cfg.branch)
    return _local_baths(cfg.b, np.full(cfg.n_sites, r))


def theorem2_baths(cfg: Theorem2Config) -> BathSet:
    ratios = [bath_ratio(b.x, cfg.branch) for b in cfg.blocks for _ in range(b.size)]
    return _local_baths(np.concatenate([b.b for b in cfg.blocks]), ratios)


def bath_identity_residual(baths: BathSet, x) -> np.ndarray:
    """``2 B_o B_e + x (B_o^2 + B_e^2)`` for every (bath, site) pair."""
    bo, be = baths.B[:, 0::2], baths.B[:, 1::2]
    return 2 * bo * be + np.asarray(x) * (bo**2 + be**2)


def theorem1_state(x: float, n_sites: int, chi: int = DEFAULT_CHI, tau: float = 0.0) -> CanonicalMPS:
    """``2^-N prod_l [|00) + x |11)]``."""
    if not abs(x) < 1:
        raise PreconditionError("|x| must be < 1")
    return product_state([(1.0, x)] * n_sites, scale=2.0**-n_sites, chi=chi, tau=tau)


def theorem2_state(cfg: Theorem2Config, chi: int = DEFAULT_CHI, tau: float = 0.0) -> CanonicalMPS:
    return product_state([(1.0, x) for x in cfg.site_x()], scale=2.0**-cfg.n_sites, chi=chi, tau=tau)


@dataclass(frozen=True)
class StationarityReport:
    residual: float  # ||L rho|| / (||L|| ||rho||)
    hamiltonian_residual: float
    bath_residual: float
    operator_norm: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol


def verify_stationarity(state, h, baths: BathSet, tol: float = 1e-10) -> StationarityReport:
    """Relative residual of ``L~ |rho)``, split into its Hamiltonian and bath parts."""
    h = _as_coeffs(h)
    if h.n_sites > MAX_MATRIX_FREE_SITES:
        raise PreconditionError(f"stationarity check limited to N <= {MAX_MATRIX_FREE_SITES}")
    vec = state.to_dense() if isinstance(state, CanonicalMPS) else np.asarray(state, dtype=complex)
    if vec.size != 4**h.n_sites:
        raise PreconditionError("state and Hamiltonian sizes disagree")
    su = build_superoperator(h, baths)
    norm = su.norm_estimate()
    scale = norm * np.linalg.norm(vec)
    if scale == 0.0:
        return StationarityReport(0.0, 0.0, 0.0, norm, tol)
    ham = su.part("hamiltonian").matvec(vec)
    bath = su.part("bath").matvec(vec)
    return StationarityReport(
        float(np.linalg.norm(ham + bath) / scale),
        float(np.linalg.norm(ham) / scale),
        float(np.linalg.norm(bath) / scale),
        norm, tol,
    )


@dataclass(frozen=True)
class ThermalMatch:
    classification: str  # "thermal", "non-thermal" or "underdetermined"
    beta: float | None = None
    beta_mu: float | None = None
    max_deviation: float = 0.0
    note: str = ""

    @property
    def mu(self) -> float | None:
        if self.beta is None or self.beta_mu is None or self.beta == 0:
            return None
        return self.beta_mu / self.beta


def thermal_match(kind: str, cfg, eps=None, tol: float = 1e-9) -> ThermalMatch:
    """Read a closed-form stationary state as a grand-canonical state, if possible.

    Every pair factor ``|00) + x |11)`` matches ``tanh(beta (mu - eps) / 2)``.
    Theorem-1 states match only at ``beta = 0`` with ``beta mu = 2 atanh x``.
    Theorem-2 states need a diagonal Hamiltonian; ``(beta, beta mu)`` is solved
    from two distinct energies and checked on the rest.
    """
    if kind == "theorem1":
        return ThermalMatch("thermal", 0.0, 2.0 * float(np.arctanh(cfg.x)))
    if kind != "theorem2":
        raise ValueError(f"unknown kind {kind!r}")
    if any(s > 1 for s in cfg.sizes):
        return ThermalMatch("non-thermal", note="Hamiltonian blocks are not diagonal")
    if eps is None:
        eps = [float(b.y[0, 0]) for b in cfg.blocks]
    eps = np.asarray(eps, dtype=float)
    a = 2.0 * np.arctanh(cfg.site_x())  # = beta mu - beta eps
    distinct = np.flatnonzero(np.abs(eps - eps[0]) > tol * max(1.0, np.max(np.abs(eps))))
    if eps.size < 2 or distinct.size == 0:
        if np.ptp(a) <= tol:
            return ThermalMatch("underdetermined", note="a single energy fixes only beta (mu - eps)")
        return ThermalMatch("non-thermal", max_deviation=float(np.ptp(a)), note="equal energies, unequal x")
    i, j = 0, int(distinct[0])
    beta = (a[i] - a[j]) / (eps[j] - eps[i])
    beta_mu = a[i] + beta * eps[i]
    dev = float(np.max(np.abs(beta_mu - beta * eps - a)))
    if dev > tol * max(1.0, np.max(np.abs(a))):
        return ThermalMatch("non-thermal", max_deviation=dev, note="no common (beta, mu)")
    if beta < 0:
        return ThermalMatch("non-thermal", beta, beta_mu, dev, note="negative temperature")
    return ThermalMatch("thermal", float(beta), float(beta_mu), dev)
