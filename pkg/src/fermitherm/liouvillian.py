"""Second-space Liouvillian of quadratic Hamiltonians with linear baths, and its kernel.

The mode form acts on the 2N-mode second-space Fock chain.  It reproduces the
first-space Lindblad generator on the even-parity sector, which holds every
physical density matrix, and never couples the two sectors.  Kernel searches
are therefore restricted to that sector.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import StringBasis, apply_ladder, even_indices, ladder, majoranas
from .model import BathSet, CoefficientMatrix, PreconditionError, _as_coeffs
from .mps import DEFAULT_CHI, CanonicalMPS

log = logging.getLogger(__name__)

MAX_SPARSE_SITES = 8
MAX_MATRIX_FREE_SITES = 10
MAX_DENSE_SITES = 6


class ConvergenceError(RuntimeError):
    pass


class Ladder(NamedTuple):
    coef: complex
    mode: int  # 0-based second-space mode
    dagger: bool


class Bilinear(NamedTuple):
    """``(sum left) (sum right)`` with each side a linear combination of ladder operators."""

    left: tuple
    right: tuple
    part: str  # "hamiltonian" or "bath"


def _lin(*terms) -> tuple:
    return tuple(Ladder(complex(c), m, d) for c, m, d in terms if c != 0)


def _check_dims(h: CoefficientMatrix, baths: BathSet) -> None:
    if baths.n_sites != h.n_sites:
        raise PreconditionError(f"baths act on {baths.n_sites} sites, h on {h.n_sites}")


def mode_form_terms(h, baths: BathSet) -> list[Bilinear]:
    """Bilinear groups of the mode-form Liouvillian, term for term.

    Hamiltonian: ``i sum h_jk (c~_{2k}^dag c~_{2j-1} + c~_{2j-1}^dag c~_{2k})``.
    Bath n: ``2 (-B_o c~_o^dag + B_e c~_e^dag)(B_o (c~_o + c~_o^dag) + B_e (-c~_e + c~_e^dag))
    + 2 (B_o c~_o^dag + B_e c~_e^dag)(B_o (-c~_o + c~_o^dag) - B_e (c~_e + c~_e^dag))``
    summed over sites, with ``o = 2j-1`` and ``e = 2j``.
    """
    h = _as_coeffs(h)
    _check_dims(h, baths)
    n = h.n_sites
    H = h.h
    out = []
    for k in range(n):
        right = _lin(*[(1j * H[j, k], 2 * j, False) for j in range(n)])
        if right:
            out.append(Bilinear(_lin((1.0, 2 * k + 1, True)), right, "hamiltonian"))
    for j in range(n):
        right = _lin(*[(1j * H[j, k], 2 * k + 1, False) for k in range(n)])
        if right:
            out.append(Bilinear(_lin((1.0, 2 * j, True)), right, "hamiltonian"))
    for b in baths.B:
        bo, be = b[0::2], b[1::2]
        if not np.any(b):
            continue
        sites = range(n)
        l1 = _lin(*[t for j in sites for t in ((-2 * bo[j], 2 * j, True), (2 * be[j], 2 * j + 1, True))])
        r1 = _lin(*[t for k in sites for t in (
            (bo[k], 2 * k, False), (bo[k], 2 * k, True), (-be[k], 2 * k + 1, False), (be[k], 2 * k + 1, True))])
        l2 = _lin(*[t for j in sites for t in ((2 * bo[j], 2 * j, True), (2 * be[j], 2 * j + 1, True))])
        r2 = _lin(*[t for k in sites for t in (
            (-bo[k], 2 * k, False), (bo[k], 2 * k, True), (-be[k], 2 * k + 1, False), (-be[k], 2 * k + 1, True))])
        out += [Bilinear(l1, r1, "bath"), Bilinear(l2, r2, "bath")]
    return out


@dataclass
class SuperOperator:
    """Second-space Liouvillian on ``4^N`` Fock amplitudes."""

    n_sites: int
    terms: list
    _sparse: dict = field(default_factory=dict, repr=False)

    @property
    def n_modes(self) -> int:
        return 2 * self.n_sites

    @property
    def dim(self) -> int:
        return 4**self.n_sites

    @property
    def shape(self) -> tuple[int, int]:
        return (self.dim, self.dim)

    def part(self, which: str) -> "SuperOperator":
        return SuperOperator(self.n_sites, [t for t in self.terms if t.part == which])

    def _apply_lin(self, lin, vec):
        out = np.zeros(self.dim, dtype=complex)
        for c, m, d in lin:
            out += c * apply_ladder(vec, m, d, self.n_modes)
        return out

    def matvec(self, vec) -> np.ndarray:
        """Matrix-free action on a dense second-space vector."""
        vec = np.asarray(vec, dtype=complex)
        if self.n_sites <= MAX_SPARSE_SITES and self._sparse:
            return self.to_sparse() @ vec
        if self.n_sites > MAX_MATRIX_FREE_SITES:
            raise PreconditionError(f"matrix-free action limited to N <= {MAX_MATRIX_FREE_SITES}")
        out = np.zeros(self.dim, dtype=complex)
        cache = {}
        for t in self.terms:
            key = t.right
            if key not in cache:
                cache[key] = self._apply_lin(t.right, vec)
            out += self._apply_lin(t.left, cache[key])
        return out

    def to_sparse(self) -> sp.csr_matrix:
        if "full" not in self._sparse:
            if self.n_sites > MAX_SPARSE_SITES:
                raise PreconditionError(f"sparse assembly limited to N <= {MAX_SPARSE_SITES}")
            ops = {}

            def op(m, d):
                if (m, d) not in ops:
                    ops[m, d] = ladder(m, d, self.n_modes).astype(complex)
                return ops[m, d]

            total = sp.csr_matrix(self.shape, dtype=complex)
            for t in self.terms:
                left = sum(c * op(m, d) for c, m, d in t.left)
                right = sum(c * op(m, d) for c, m, d in t.right)
                total = total + left @ right
            total.sum_duplicates()
            total.eliminate_zeros()
            self._sparse["full"] = total.tocsr()
        return self._sparse["full"]

    @property
    def nnz(self) -> int:
        return self.to_sparse().nnz

    def to_dense(self) -> np.ndarray:
        if self.n_sites > MAX_DENSE_SITES:
            raise PreconditionError(f"dense export limited to N <= {MAX_DENSE_SITES}")
        return self.to_sparse().toarray()

    def even_block(self) -> sp.csr_matrix:
        idx = even_indices(self.n_modes)
        return self.to_sparse()[idx][:, idx].tocsr()

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.matvec, dtype=complex)

    def norm_estimate(self, iters: int = 30) -> float:
        """Spectral-norm estimate by power iteration on ``L^dag L`` (deterministic start)."""
        if self.n_sites <= MAX_SPARSE_SITES:
            A = self.to_sparse()
            if A.nnz == 0:
                return 0.0
            if self.dim <= 1024:
                return float(np.linalg.norm(A.toarray(), 2))
            fwd, adj = (lambda v: A @ v), (lambda v: A.conj().T @ v)
        else:
            fwd = self.matvec
            adjoint = SuperOperator(self.n_sites, [
                Bilinear(tuple(Ladder(np.conj(c), m, not d) for c, m, d in t.right),
                         tuple(Ladder(np.conj(c), m, not d) for c, m, d in t.left), t.part)
                for t in self.terms])
            adj = adjoint.matvec
        v = np.cos(np.arange(self.dim) * 0.618) + 1j * np.sin(np.arange(self.dim) * 0.318)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(iters):
            w = adj(fwd(v))
            nw = np.linalg.norm(w)
            if nw == 0:
                return 0.0
            est = np.sqrt(nw)
            v = w / nw
        return float(est)

    def export_coo(self, path) -> None:
        """Write ``row col re im`` lines (0-based) for every stored entry."""
        A = self.to_sparse().tocoo()
        with open(path, "w", newline="\n") as fh:
            fh.write(f"# dim {self.dim} nnz {A.nnz}\n")
            for r, c, v in zip(A.row, A.col, A.data):
                fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")


def build_superoperator(h, baths: BathSet) -> SuperOperator:
    h = _as_coeffs(h)
    return SuperOperator(h.n_sites, mode_form_terms(h, baths))


def dense_lindblad_oracle(h, baths: BathSet, max_sites: int = 4) -> np.ndarray:
    """Brute-force first-space Lindblad generator projected on the Majorana-string basis."""
    h = _as_coeffs(h)
    _check_dims(h, baths)
    n = h.n_sites
    if n > max_sites:
        raise PreconditionError(f"dense Lindblad oracle limited to N <= {max_sites}")
    c = [ladder(j, False, n).toarray() for j in range(n)]
    H = sum((h.h[j, k] * c[j].T @ c[k] for j in range(n) for k in range(n)), np.zeros((1 << n,) * 2))
    Ls = [sum(v[j] * c[j] + w[j] * c[j].T for j in range(n)) for v, w in zip(baths.v, baths.w)]
    basis = StringBasis(n)

    def gen(rho):
        out = -1j * (H @ rho - rho @ H)
        for L in Ls:
            LdL = L.conj().T @ L
            out = out + 2 * L @ rho @ L.conj().T - LdL @ rho - rho @ LdL
        return out

    cols = []
    for s in range(4**n):
        e = np.zeros(4**n, dtype=complex)
        e[s] = 1.0
        cols.append(basis.project(gen(basis.operator(e))))
    return np.array(cols).T


@dataclass(frozen=True)
class StructureMatrix:
    """``L~ = sum_jk coeffs[j, k] g~_j g~_k`` over the 4N second-space Majoranas."""

    coeffs: np.ndarray
    h: CoefficientMatrix
    baths: BathSet

    @property
    def n_sites(self) -> int:
        return self.coeffs.shape[0] // 4

    @property
    def antisym(self) -> np.ndarray:
        return 0.5 * (self.coeffs - self.coeffs.T)

    @property
    def scalar(self) -> complex:
        # g~_j^2 = 1, symmetric off-diagonal parts cancel
        return complex(np.trace(self.coeffs))

    def to_sparse(self, use_antisym: bool = False) -> sp.csr_matrix:
        """Rebuild the operator from Majorana bilinears (small N only)."""
        n = self.n_sites
        if n > 4:
            raise PreconditionError("structure-matrix rebuild limited to N <= 4")
        g = majoranas(2 * n)
        C = self.antisym if use_antisym else self.coeffs
        out = sp.csr_matrix((4**n, 4**n), dtype=complex)
        for j, k in zip(*np.nonzero(C)):
            out = out + C[j, k] * (g[j] @ g[k])
        if use_antisym:
            out = out + self.scalar * sp.identity(4**n, format="csr")
        return out.tocsr()


def build_structure_matrix(h, baths: BathSet) -> StructureMatrix:
    """Majorana-form coefficients, filled term by term from the Majorana expansion."""
    h = _as_coeffs(h)
    _check_dims(h, baths)
    n = h.n_sites
    C = np.zeros((4 * n, 4 * n), dtype=complex)

    def add(p, q, val):  # 1-based Majorana slots
        C[p - 1, q - 1] += val

    H = h.h
    for j in range(1, n + 1):
        for k in range(1, n + 1):
            add(4 * k, 4 * j - 3, H[j - 1, k - 1] / 2)
            add(4 * j - 2, 4 * k - 1, H[j - 1, k - 1] / 2)
    for b in baths.B:
        for j in range(1, n + 1):
            for k in range(1, n + 1):
                oj, ej, ok, ek = b[2 * j - 2], b[2 * j - 1], b[2 * k - 2], b[2 * k - 1]
                add(4 * j, 4 * k, -ej * ek)
                add(4 * j - 1, 4 * k - 1, -ej * ek)
                add(4 * j - 2, 4 * k - 2, -oj * ok)
                add(4 * j - 3, 4 * k - 3, -oj * ok)
                add(4 * j - 2, 4 * k, 2 * oj * ek)
                add(4 * j - 1, 4 * k - 3, 2 * ej * ok)
                add(4 * j - 2, 4 * k - 3, 2j * oj * ok)
                add(4 * j, 4 * k - 1, 2j * ej * ek)
                add(4 * j - 3, 4 * k, 2j * oj * ek)
                add(4 * j - 2, 4 * k - 1, 2j * oj * ek)
    return StructureMatrix(C, h, baths)


@dataclass(frozen=True)
class NessResult:
    vector: np.ndarray  # trace-normalized, 2^N * vector[0] == 1 when the trace is nonzero
    unit_vector: np.ndarray
    kernel_dim: int
    residual: float  # ||L rho|| / (||L|| ||rho||)
    method: str
    note: str = ""

    @property
    def n_sites(self) -> int:
        return int(round(np.log(self.vector.size) / np.log(4)))


def _normalize_ness(vec: np.ndarray, n_sites: int):
    unit = vec / np.linalg.norm(vec)
    if abs(unit[0]) > 1e-12:
        unit = unit * (abs(unit[0]) / unit[0])
        return unit / (2**n_sites * unit[0].real), unit
    big = np.argmax(np.abs(unit))
    unit = unit * (abs(unit[big]) / unit[big])
    return unit.copy(), unit


def ness_kernel(su: SuperOperator, tol: float = 1e-10, dense_limit: int = 2048) -> NessResult:
    """Stationary vector(s) of the Liouvillian inside the even-parity sector."""
    idx = even_indices(su.n_modes)
    Le = su.even_block()
    norm = su.norm_estimate()
    note = ""
    if not any(t.part == "bath" for t in su.terms):
        note = "no bath terms: kernel is degenerate (pure Hamiltonian flow)"
    if norm == 0.0:
        vec = np.zeros(su.dim, dtype=complex)
        vec[0] = 1.0
        full, unit = _normalize_ness(vec, su.n_sites)
        return NessResult(full, unit, idx.size, 0.0, "trivial", "zero operator: every even vector is stationary")
    if idx.size <= dense_limit:
        _, s, Vh = np.linalg.svd(Le.toarray())
        kdim = int(np.count_nonzero(s <= tol * norm))
        x = Vh[-1].conj()
        method = "dense-svd"
    else:
        A = Le.tolil(copy=True)
        A[0, :] = 0.0
        A[0, 0] = 1.0
        rhs = np.zeros(idx.size, dtype=complex)
        rhs[0] = 1.0
        try:
            x = spla.spsolve(A.tocsc(), rhs)
        except RuntimeError as err:  # singular factorization
            raise ConvergenceError(f"trace-pinned solve failed: {err}") from err
        if not np.all(np.isfinite(x)):
            raise ConvergenceError("trace-pinned solve produced non-finite values")
        try:
            vals = spla.eigs(Le.tocsc(), k=min(6, idx.size - 2), sigma=-1e-3 * norm,
                             which="LM", return_eigenvectors=False, tol=1e-12)
        except spla.ArpackNoConvergence as err:
            raise ConvergenceError(f"eigenvalue count did not converge: {err}") from err
        kdim = int(np.count_nonzero(np.abs(vals) <= max(tol, 1e-8) * norm))
        method = "sparse-pinned"
    vec = np.zeros(su.dim, dtype=complex)
    vec[idx] = x
    residual = float(np.linalg.norm(Le @ x) / (norm * np.linalg.norm(x)))
    if residual > max(tol, 1e-9) and kdim >= 1:
        raise ConvergenceError(f"kernel vector residual {residual:.3e} exceeds tolerance")
    full, unit = _normalize_ness(vec, su.n_sites)
    return NessResult(full, unit, kdim, residual, method, note)


def normal_master_modes(sm: StructureMatrix, tol: float = 1e-10):
    """Orthonormal basis of the annihilating modes and the count of marginal ones.

    ``[L~, sum r_k g~_k] = 4 sum (X r)_k g~_k`` with ``X`` the antisymmetric part,
    so modes with ``Re`` eigenvalue of ``X`` positive annihilate the stationary state.
    """
    X = sm.antisym
    T, Z, sdim = scipy.linalg.schur(X, output="complex", sort=lambda z: z.real > tol)
    marginal = int(np.count_nonzero(np.abs(np.diag(T).real) <= tol))
    return Z[:, :sdim], marginal


def ness_product_form(sm: StructureMatrix, chi: int = DEFAULT_CHI, tau: float = 0.0,
                      tol: float = 1e-10) -> CanonicalMPS:
    """NESS as a product of annihilating-mode operators applied to ``|1...1)``.

    Falls back to :func:`ness_kernel` (with a warning) when some master modes are
    marginal, i.e. the stationary state is not pinned down by the decay modes.
    """
    n = sm.n_sites
    R, marginal = normal_master_modes(sm, tol)
    if R.shape[1] != 2 * n or marginal:
        return _fallback(sm, chi, tau, f"{marginal} marginal modes")
    s = CanonicalMPS.basis_state((1,) * (2 * n), chi=chi, tau=tau)
    for col in range(R.shape[1] - 1, -1, -1):
        s = s.apply_majorana_sum(R[:, col])
        if not np.isfinite(s.log_scale):
            return _fallback(sm, chi, tau, "reference ket is annihilated")
    log_mag, phase = s.log_amplitude((0,) * (2 * n))
    if not np.isfinite(log_mag):
        return _fallback(sm, chi, tau, "stationary state has zero trace")
    t0 = s.tensors[0] / phase
    s = CanonicalMPS((t0, *s.tensors[1:]), s.schmidt, s.log_scale, s.chi, s.tau, s.discarded)
    return s.scaled(-(log_mag + n * np.log(2.0)))


def _fallback(sm: StructureMatrix, chi: int, tau: float, why: str) -> CanonicalMPS:
    warnings.warn(f"product-form NESS unavailable ({why}); using the kernel solver", RuntimeWarning, stacklevel=3)
    res = ness_kernel(build_superoperator(sm.h, sm.baths))
    return CanonicalMPS.from_dense(res.vector, chi=chi, tau=tau)


def fidelity(a, b) -> float:
    """``|<a|b>|^2 / (|a|^2 |b|^2)`` for dense vectors."""
    a, b = np.asarray(a), np.asarray(b)
    return float(abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))
