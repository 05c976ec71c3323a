"""Canonical matrix-product states on the second-space Fock chain.

A state on ``n_modes`` sites is stored as right-canonical tensors
``B[L] = Gamma[L] lambda[L]`` of shape ``(chi_left, 2, chi_right)`` together
with the normalized Schmidt vectors ``lambda[0] ... lambda[n_modes]`` (the two
edge vectors are ``[1.]``).  The network has unit norm; the physical
normalization lives in ``log_scale`` so that partition-function sized
amplitudes never overflow.

Site ``m`` is second-space mode ``m`` and the local basis is ``|0), |1)``;
two-site gates use ``|00), |01), |10), |11)`` with the left site first.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

DEFAULT_CHI = 256


class BondOverflowError(RuntimeError):
    """Exact mode (tau = 0) needed a bond larger than chi."""


def _fix_gauge(X: np.ndarray, Y: np.ndarray) -> None:
    # largest-magnitude entry of every left singular vector made real positive
    idx = np.argmax(np.abs(X), axis=0)
    ph = X[idx, np.arange(X.shape[1])]
    ph = np.where(np.abs(ph) > 0, ph / np.abs(ph), 1.0)
    X /= ph[None, :]
    Y *= ph[:, None]


def _split(M: np.ndarray, chi: int, tau: float):
    """SVD with truncation policy. Returns (X, s/|s|, Y, |s|, discarded weight)."""
    try:
        X, s, Y = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError:
        import scipy.linalg

        X, s, Y = scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesvd")
    total = np.linalg.norm(s)
    if total == 0.0:
        return X[:, :1], np.ones(1), Y[:1], 0.0, 0.0
    rel = s / total
    keep = int(np.count_nonzero(rel > tau)) if tau > 0 else int(np.count_nonzero(s > 0))
    keep = max(keep, 1)
    if keep > chi:
        if tau == 0:
            raise BondOverflowError(f"bond of dimension {keep} exceeds chi={chi} in exact mode")
        keep = chi
    discarded = float(np.sum(rel[keep:] ** 2))
    X, s, Y = X[:, :keep].copy(), s[:keep], Y[:keep].copy()
    _fix_gauge(X, Y)
    kept = np.linalg.norm(s)
    return X, s / kept, Y, kept, discarded


@dataclass(frozen=True)
class CanonicalMPS:
    tensors: tuple
    schmidt: tuple
    log_scale: float = 0.0
    chi: int = DEFAULT_CHI
    tau: float = 0.0
    discarded: float = 0.0

    @property
    def n_modes(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [len(lam) for lam in self.schmidt[1:-1]]

    @property
    def max_bond(self) -> int:
        return max([1, *self.bond_dims])

    @property
    def norm(self) -> float:
        return float(np.exp(self.log_scale))

    @property
    def gammas(self) -> list[np.ndarray]:
        """Vidal tensors ``Gamma[L] = B[L] / lambda[L]`` (zero where lambda vanishes)."""
        out = []
        for B, lam in zip(self.tensors, self.schmidt[1:]):
            inv = np.divide(1.0, lam, out=np.zeros_like(lam), where=lam > 0)
            out.append(B * inv[None, None, :])
        return out

    def with_options(self, chi: int | None = None, tau: float | None = None) -> "CanonicalMPS":
        return replace(self, chi=self.chi if chi is None else chi, tau=self.tau if tau is None else tau)

    def scaled(self, log_factor: float) -> "CanonicalMPS":
        return replace(self, log_scale=self.log_scale + log_factor)

    def normalized(self) -> "CanonicalMPS":
        return replace(self, log_scale=0.0)

    # -- construction -------------------------------------------------------

    @classmethod
    def from_tensors(cls, tensors, log_scale: float = 0.0, chi: int = DEFAULT_CHI, tau: float = 0.0):
        """Canonicalize an arbitrary open-boundary tensor train ``(chi_l, 2, chi_r)``."""
        T = [np.asarray(t, dtype=complex) for t in tensors]
        n = len(T)
        for L in range(n - 1):
            cl, d, cr = T[L].shape
            Q, Rm = np.linalg.qr(T[L].reshape(cl * d, cr))
            T[L] = Q.reshape(cl, d, Q.shape[1])
            T[L + 1] = np.tensordot(Rm, T[L + 1], axes=(1, 0))
        schmidt = [np.ones(1)] * (n + 1)
        discarded = 0.0
        last = T[n - 1]
        nrm = np.linalg.norm(last)
        if nrm == 0.0:
            return cls.zero(n, chi, tau)
        T[n - 1] = last / nrm
        log_scale += float(np.log(nrm))
        for L in range(n - 1, 0, -1):
            cl, d, cr = T[L].shape
            X, s, Y, _, disc = _split(T[L].reshape(cl, d * cr), chi, tau)
            discarded += disc
            T[L] = Y.reshape(len(s), d, cr)
            T[L - 1] = np.tensordot(T[L - 1], X * s[None, :], axes=(2, 0))
            schmidt[L] = s
        T[0] = T[0] / np.linalg.norm(T[0])
        return cls(tuple(T), tuple(schmidt), log_scale, chi, tau, discarded)

    @classmethod
    def from_dense(cls, vec, chi: int = DEFAULT_CHI, tau: float = 0.0) -> "CanonicalMPS":
        vec = np.asarray(vec, dtype=complex).ravel()
        n = int(round(np.log2(vec.size)))
        if 1 << n != vec.size:
            raise ValueError("dense vector length must be a power of two")
        nrm = np.linalg.norm(vec)
        if nrm == 0.0:
            return cls.zero(n, chi, tau)
        tensors = [None] * n
        schmidt = [np.ones(1)] * (n + 1)
        discarded = 0.0
        rest = (vec / nrm).reshape(-1, 1)
        for L in range(n - 1, 0, -1):
            cr = rest.shape[1]
            X, s, Y, _, disc = _split(rest.reshape(-1, 2 * cr), chi, tau)
            discarded += disc
            tensors[L] = Y.reshape(len(s), 2, cr)
            schmidt[L] = s
            rest = X * s[None, :]
        tensors[0] = (rest / np.linalg.norm(rest)).reshape(1, 2, -1)
        return cls(tuple(tensors), tuple(schmidt), float(np.log(nrm)), chi, tau, discarded)

    @classmethod
    def zero(cls, n_modes: int, chi: int = DEFAULT_CHI, tau: float = 0.0) -> "CanonicalMPS":
        t = np.zeros((1, 2, 1), dtype=complex)
        t[0, 0, 0] = 1.0
        return cls((t,) * n_modes, (np.ones(1),) * (n_modes + 1), -np.inf, chi, tau)

    @classmethod
    def basis_state(cls, bits, chi: int = DEFAULT_CHI, tau: float = 0.0) -> "CanonicalMPS":
        tensors = []
        for b in bits:
            t = np.zeros((1, 2, 1), dtype=complex)
            t[0, int(b), 0] = 1.0
            tensors.append(t)
        return cls(tuple(tensors), (np.ones(1),) * (len(tensors) + 1), 0.0, chi, tau)

    # -- evaluation ---------------------------------------------------------

    def _network_amplitude(self, bits) -> complex:
        if len(bits) != self.n_modes:
            raise ValueError(f"bitstring must have length {self.n_modes}")
        v = np.ones(1, dtype=complex)
        for B, b in zip(self.tensors, bits):
            v = v @ B[:, int(b), :]
        return complex(v[0])

    def amplitude(self, bits) -> complex:
        """Coefficient of the Fock ket ``|bits)``."""
        return self._network_amplitude(bits) * np.exp(self.log_scale)

    def log_amplitude(self, bits) -> tuple[float, complex]:
        """``(log|c|, c/|c|)`` for the coefficient of ``|bits)``; safe when ``|c|`` overflows."""
        a = self._network_amplitude(bits)
        if a == 0:
            return -np.inf, 1.0 + 0j
        return float(np.log(abs(a)) + self.log_scale), a / abs(a)

    def to_dense(self) -> np.ndarray:
        if self.n_modes > 24:
            raise ValueError("dense export limited to 24 modes")
        psi = np.ones((1, 1), dtype=complex)
        for B in self.tensors:
            psi = np.tensordot(psi, B, axes=(1, 0)).reshape(-1, B.shape[2])
        return psi.ravel() * np.exp(self.log_scale)

    def canonicality_error(self) -> float:
        """Largest deviation from the right- and left-orthonormality contracts."""
        err = 0.0
        for L, B in enumerate(self.tensors):
            right = np.einsum("asb,csb->ac", B, B.conj())
            err = max(err, np.max(np.abs(right - np.eye(B.shape[0]))))
            lam_l, lam_r = self.schmidt[L], self.schmidt[L + 1]
            left = np.einsum("asb,a,asc->bc", B.conj(), lam_l**2, B)
            err = max(err, np.max(np.abs(left - np.diag(lam_r**2))))
        for lam in self.schmidt:
            err = max(err, abs(np.sum(lam**2) - 1.0))
            if np.any(lam < 0) or np.any(np.diff(lam) > 1e-15):
                err = max(err, 1.0)
        return float(err)

    # -- updates ------------------------------------------------------------

    def apply_two_site_gate(self, site: int, gate) -> "CanonicalMPS":
        """Apply a parity-conserving 4x4 gate to sites ``(site, site + 1)`` (0-based)."""
        G = np.asarray(gate, dtype=complex)
        if G.shape != (4, 4):
            raise ValueError("gate must be 4x4")
        if not 0 <= site < self.n_modes - 1:
            raise IndexError(f"site {site} has no right neighbour in {self.n_modes} modes")
        if np.any(G[np.ix_([0, 3], [1, 2])]) or np.any(G[np.ix_([1, 2], [0, 3])]):
            raise ValueError("gate does not conserve parity")
        Bl, Br = self.tensors[site], self.tensors[site + 1]
        cl, cr = Bl.shape[0], Br.shape[2]
        theta = np.tensordot(Bl, Br, axes=(2, 0))  # (cl, 2, 2, cr)
        theta = np.einsum("xy,ayb->axb", G, theta.reshape(cl, 4, cr)).reshape(cl * 2, 2 * cr)
        lam = self.schmidt[site]
        X, s, Y, kept, disc = _split(lam[:, None].repeat(2, axis=1).reshape(-1, 1) * theta, self.chi, self.tau)
        if kept == 0.0:
            return CanonicalMPS.zero(self.n_modes, self.chi, self.tau)
        new_l = (theta @ Y.conj().T).reshape(cl, 2, len(s)) / kept
        new_r = Y.reshape(len(s), 2, cr)
        tensors = list(self.tensors)
        tensors[site], tensors[site + 1] = new_l, new_r
        schmidt = list(self.schmidt)
        schmidt[site + 1] = s
        out = CanonicalMPS(
            tuple(tensors), tuple(schmidt), self.log_scale + float(np.log(kept)),
            self.chi, self.tau, self.discarded + disc,
        )
        if not np.allclose(G.conj().T @ G, np.eye(4), atol=1e-12):
            out = CanonicalMPS.from_tensors(out.tensors, out.log_scale, self.chi, self.tau)
            out = replace(out, discarded=out.discarded + self.discarded + disc)
        return out

    def apply_majorana_sum(self, coeffs) -> "CanonicalMPS":
        """Apply ``sum_k r_k g_k`` for the 2 * n_modes second-space Majoranas.

        Uses a bond-2 Jordan-Wigner operator train and re-canonicalizes.
        """
        r = np.asarray(coeffs, dtype=complex)
        if r.size != 2 * self.n_modes:
            raise ValueError(f"need {2 * self.n_modes} coefficients")
        Z = np.diag([1.0, -1.0]).astype(complex)
        Xp = np.array([[0, 1], [1, 0]], dtype=complex)
        Yp = np.array([[0, -1j], [1j, 0]])
        Id = np.eye(2, dtype=complex)
        tensors = []
        n = self.n_modes
        for m, B in enumerate(self.tensors):
            W = np.zeros((2, 2, 2, 2), dtype=complex)  # (w_left, w_right, out, in)
            W[0, 0], W[0, 1], W[1, 1] = Z, r[2 * m] * Xp + r[2 * m + 1] * Yp, Id
            if m == 0:
                W = W[:1]
            if m == n - 1:
                W = W[:, 1:]
            T = np.einsum("lrst,atb->lasrb", W, B)
            wl, a, _, wr, b = T.shape
            tensors.append(T.reshape(wl * a, 2, wr * b))
        out = CanonicalMPS.from_tensors(tensors, self.log_scale, self.chi, self.tau)
        return replace(out, discarded=out.discarded + self.discarded)

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        """Write an ``.npz`` snapshot (see README for the layout)."""
        arrays = {
            "header": np.array([self.n_modes, self.chi], dtype=np.int64),
            "tau": np.array(self.tau),
            "log_scale": np.array(self.log_scale),
            "discarded": np.array(self.discarded),
        }
        for L, B in enumerate(self.tensors):
            arrays[f"B{L}"] = np.ascontiguousarray(B)
        for L, lam in enumerate(self.schmidt):
            arrays[f"lambda{L}"] = np.ascontiguousarray(lam)
        with open(Path(path), "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path) -> "CanonicalMPS":
        with np.load(Path(path)) as data:
            n, chi = (int(x) for x in data["header"])
            return cls(
                tuple(data[f"B{L}"] for L in range(n)),
                tuple(data[f"lambda{L}"] for L in range(n + 1)),
                float(data["log_scale"]), chi, float(data["tau"]), float(data["discarded"]),
            )


def product_state(pair_amplitudes, scale: float = 1.0, log_scale: float = 0.0,
                  chi: int = DEFAULT_CHI, tau: float = 0.0) -> CanonicalMPS:
    """``scale * exp(log_scale) * prod_l [a_l |00) + b_l |11)]`` on sites ``(2l, 2l+1)``.

    Bond dimension is 2 inside every pair and 1 between pairs.
    """
    pairs = [(complex(a), complex(b)) for a, b in pair_amplitudes]
    n = 2 * len(pairs)
    if scale == 0 or any(a == 0 and b == 0 for a, b in pairs):
        return CanonicalMPS.zero(n, chi, tau)
    tensors, schmidt = [], [np.ones(1)]
    total = log_scale + float(np.log(abs(scale)))
    for a, b in pairs:
        nrm = np.hypot(abs(a), abs(b))
        total += float(np.log(nrm))
        amps = [(abs(a), 0, a), (abs(b), 1, b)]
        amps.sort(key=lambda t: -t[0])
        lam = np.array([amps[0][0], amps[1][0]]) / nrm
        left = np.zeros((1, 2, 2), dtype=complex)
        right = np.zeros((2, 2, 1), dtype=complex)
        for mu, (mag, occ, amp) in enumerate(amps):
            left[0, occ, mu] = lam[mu]
            right[mu, occ, 0] = amp / mag if mag > 0 else 1.0
        tensors += [left, right]
        schmidt += [lam, np.ones(1)]
    if scale < 0:
        tensors[0] = -tensors[0]
    return CanonicalMPS(tuple(tensors), tuple(schmidt), total, chi, tau)


def apply_two_site_gate(s: CanonicalMPS, site: int, gate) -> CanonicalMPS:
    return s.apply_two_site_gate(site, gate)


def gate_from_majorana_rotation(plane: int, theta: float) -> np.ndarray:
    """Second-space image of the first-space conjugation by ``exp(theta/2 g_{j-1} g_j)``.

    ``exp(i theta (-1)^j (c_j^dag c_{j-1} + c_{j-1}^dag c_j))`` on sites
    ``(j-1, j)`` with ``j = plane`` 1-based: identity on ``|00), |11)`` and a
    rotation of the one-particle block.
    """
    if plane < 2:
        raise ValueError("plane must be >= 2")
    phi = theta * (-1.0) ** plane
    G = np.eye(4, dtype=complex)
    G[1, 1] = G[2, 2] = np.cos(phi)
    G[1, 2] = G[2, 1] = 1j * np.sin(phi)
    return G


def inner_product(s1: CanonicalMPS, s2: CanonicalMPS) -> complex:
    """``(s1|s2)``, antilinear in the first argument."""
    return network_overlap(s1, s2) * np.exp(s1.log_scale + s2.log_scale)


def network_overlap(s1: CanonicalMPS, s2: CanonicalMPS) -> complex:
    """Inner product of the unit-norm networks, i.e. of the normalized states."""
    if s1.n_modes != s2.n_modes:
        raise ValueError(f"mode counts differ: {s1.n_modes} vs {s2.n_modes}")
    env = np.ones((1, 1), dtype=complex)
    for A, B in zip(s1.tensors, s2.tensors):
        env = np.einsum("ab,asc,bsd->cd", env, A.conj(), B)
    return complex(env[0, 0])


def amplitude(s: CanonicalMPS, bits) -> complex:
    return s.amplitude(bits)
