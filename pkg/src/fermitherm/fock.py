"""Jordan-Wigner Fock-space plumbing shared by the dense oracles and the superoperator.

Basis convention: for ``n_modes`` modes, the occupation string ``n_1 n_2 ... n_M``
read as a binary number (mode 1 most significant) is the vector index.  The
creation operator picks up ``(-1)^(n_1 + ... + n_{m-1})``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

_Z = sp.csr_matrix(np.diag([1.0, -1.0]))
_I = sp.identity(2, format="csr")
_A = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))


def annihilator(mode: int, n_modes: int) -> sp.csr_matrix:
    """Sparse annihilation operator of ``mode`` (0-indexed) on ``n_modes`` modes."""
    if not 0 <= mode < n_modes:
        raise IndexError(f"mode {mode} out of range for {n_modes} modes")
    out = sp.identity(1, format="csr")
    for m in range(n_modes):
        op = _Z if m < mode else (_A if m == mode else _I)
        out = sp.kron(out, op, format="csr")
    return out


def ladder(mode: int, dagger: bool, n_modes: int) -> sp.csr_matrix:
    c = annihilator(mode, n_modes)
    return c.T.tocsr() if dagger else c


def majoranas(n_modes: int) -> list[sp.csr_matrix]:
    """Majorana operators ``g_{2m-1} = c + c^dag`` and ``g_{2m} = i(c^dag - c)``."""
    out = []
    for m in range(n_modes):
        c = annihilator(m, n_modes)
        cd = c.T.tocsr()
        out.append((c + cd).tocsr())
        out.append((1j * (cd - c)).tocsr())
    return out


@lru_cache(maxsize=8)
def _popcount_table(dim: int) -> np.ndarray:
    idx = np.arange(dim, dtype=np.int64)
    counts = np.zeros(dim, dtype=np.int8)
    while np.any(idx):
        counts += (idx & 1).astype(np.int8)
        idx >>= 1
    return counts


def parity_signs(n_modes: int) -> np.ndarray:
    """``(-1)^(total occupation)`` for every basis index."""
    return 1.0 - 2.0 * (_popcount_table(1 << n_modes) % 2)


def even_indices(n_modes: int) -> np.ndarray:
    return np.flatnonzero(_popcount_table(1 << n_modes) % 2 == 0)


def apply_ladder(vec: np.ndarray, mode: int, dagger: bool, n_modes: int) -> np.ndarray:
    """Matrix-free action of ``c_mode`` or ``c_mode^dag`` on a dense Fock vector."""
    dim = 1 << n_modes
    bit = n_modes - 1 - mode
    mask = 1 << bit
    idx = np.arange(dim, dtype=np.int64)
    pc = _popcount_table(dim)
    occupied = (idx & mask) != 0
    src = idx[occupied] if not dagger else idx[~occupied]
    dst = src ^ mask
    sign = 1.0 - 2.0 * (pc[src >> (bit + 1)] % 2)
    out = np.zeros(dim, dtype=np.result_type(vec, np.float64))
    out[dst] = sign * vec[src]
    return out


def bits_to_index(bits) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def index_to_bits(index: int, n_modes: int) -> tuple[int, ...]:
    return tuple((index >> (n_modes - 1 - m)) & 1 for m in range(n_modes))


class StringBasis:
    """Ordered Majorana strings ``g_1^n1 (i g_2)^n2 ... (i g_2N)^n2N`` on N first-space modes.

    Every string is a monomial matrix; it is stored as one column index and one
    value per row, which keeps the projection of an operator onto all 4^N
    strings cheap.
    """

    def __init__(self, n_sites: int):
        self.n_sites = n_sites
        dim = 1 << n_sites
        gens = []
        for k, g in enumerate(majoranas(n_sites)):
            g = g if k % 2 == 0 else 1j * g
            dense = g.toarray()
            cols = np.argmax(np.abs(dense), axis=1)
            gens.append((cols, dense[np.arange(dim), cols]))
        rows = np.arange(dim)
        perms = np.empty((4**n_sites, dim), dtype=np.int64)
        vals = np.empty((4**n_sites, dim), dtype=complex)
        for s, bits in enumerate(itertools.product((0, 1), repeat=2 * n_sites)):
            p = rows.copy()
            v = np.ones(dim, dtype=complex)
            for k, b in enumerate(bits):
                if b:
                    gp, gv = gens[k]
                    v = v * gv[p]
                    p = gp[p]
            perms[s], vals[s] = p, v
        self.perms = perms
        self.vals = vals

    def project(self, op: np.ndarray) -> np.ndarray:
        """Second-space vector of a first-space operator: ``2^-N Tr(s^dag op)`` per string."""
        op = np.asarray(op)
        dim = 1 << self.n_sites
        rows = np.arange(dim)
        picked = op[rows[None, :], self.perms]
        return np.sum(np.conj(self.vals) * picked, axis=1) / dim

    def operator(self, vec: np.ndarray) -> np.ndarray:
        """First-space operator ``sum_s vec_s s`` from a second-space vector."""
        dim = 1 << self.n_sites
        out = np.zeros((dim, dim), dtype=complex)
        rows = np.arange(dim)
        for s in np.flatnonzero(vec):
            out[rows, self.perms[s]] += vec[s] * self.vals[s]
        return out
