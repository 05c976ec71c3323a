"""Grand-canonical state of a quadratic Hamiltonian as a second-space MPS.

Pipeline: argument matrices -> canonical factorization (sign-matched to the
single-body spectrum) -> Givens folding of ``U`` -> reduced product state ->
unfolding by nearest-neighbour second-space gates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .canonical import CanonicalFactorization, GivensSchedule, fold_to_identity, youla_factorize
from .fock import StringBasis, ladder
from .model import (
    ThermoParams,
    _as_coeffs,
    argument_matrices,
    fermi_dirac,
    single_body_spectrum,
)
from .mps import DEFAULT_CHI, CanonicalMPS, gate_from_majorana_rotation, product_state


class IntegrityError(RuntimeError):
    """A cross-check between two independent routes failed."""


def log_cosh(x):
    x = np.abs(np.asarray(x, dtype=float))
    return x + np.log1p(np.exp(-2.0 * x)) - np.log(2.0)


def match_alpha(fact: CanonicalFactorization, eps, p: ThermoParams, tol: float = 1e-8) -> CanonicalFactorization:
    """Order and sign the pairs so that ``-alpha_k / 2 = beta (eps_k - mu)``.

    Pair ``k`` ends up attached to the ``k``-th ascending eigenvalue.  When the
    result has ``det U = -1`` a zero-amplitude pair absorbs the reflection.
    """
    target = -2.0 * (p.beta * np.asarray(eps, dtype=float) - p.log_fugacity)
    by_size = np.argsort(-np.abs(fact.alpha), kind="stable")
    slots = np.argsort(-np.abs(target), kind="stable")
    order = np.empty_like(by_size)
    order[slots] = by_size
    out = fact.permute(order)
    for k in range(out.alpha.size):
        if target[k] * out.alpha[k] < 0:
            out = out.flip(k)
    scale = max(1.0, float(np.max(np.abs(target), initial=0.0)))
    dev = float(np.max(np.abs(out.alpha - target), initial=0.0))
    if dev > tol * scale:
        raise IntegrityError(f"pair amplitudes do not match the spectrum (max deviation {dev:.3e})")
    if np.linalg.det(out.U) < 0:
        k = int(np.argmin(np.abs(out.alpha)))
        if abs(out.alpha[k]) > tol * scale:
            raise IntegrityError("det U = -1 with no zero-amplitude pair to absorb it")
        out = out.flip(k)
    return out


def reduced_thermo_state(fact: CanonicalFactorization, A0: float,
                         chi: int = DEFAULT_CHI, tau: float = 0.0) -> CanonicalMPS:
    """``exp(A0) prod_l [cosh(a_l/4) |00) + sinh(a_l/4) |11)]`` with the scale kept in log space."""
    q = np.asarray(fact.alpha, dtype=float) / 4.0
    pairs = [(1.0, np.tanh(x)) for x in q]
    return product_state(pairs, log_scale=A0 + float(np.sum(log_cosh(q))), chi=chi, tau=tau)


def unfold_thermo_state(reduced: CanonicalMPS, schedule: GivensSchedule) -> CanonicalMPS:
    """Undo the folding: inverse gates of the schedule, last rotation first."""
    s = reduced
    for rot in reversed(schedule.rotations):
        s = s.apply_two_site_gate(rot.plane - 2, gate_from_majorana_rotation(rot.plane, -rot.theta))
    return s


@dataclass(frozen=True)
class ThermoState:
    state: CanonicalMPS
    reduced: CanonicalMPS
    factorization: CanonicalFactorization
    schedule: GivensSchedule
    A0: float
    eps: np.ndarray
    modes: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.eps.size


def build_thermo_state(h, p: ThermoParams, chi: int = DEFAULT_CHI, tau: float = 0.0) -> ThermoState:
    """``|Xi rho_th)`` for coefficients ``h`` at ``p``."""
    h = _as_coeffs(h)
    eps, modes = single_body_spectrum(h)
    args = argument_matrices(h, p)
    fact = match_alpha(youla_factorize(args.A), eps, p)
    schedule = fold_to_identity(fact.U)
    reduced = reduced_thermo_state(fact, args.A0, chi, tau)
    return ThermoState(unfold_thermo_state(reduced, schedule), reduced, fact, schedule, args.A0, eps, modes)


def log_partition_from_state(s: CanonicalMPS, tol: float = 1e-10) -> float:
    """``log Xi`` from ``Xi = 2^N (0|Xi rho)``."""
    n_sites = s.n_modes // 2
    log_mag, phase = s.log_amplitude((0,) * s.n_modes)
    if abs(phase - 1.0) > tol:
        raise IntegrityError(f"vacuum amplitude is not real positive (phase {phase})")
    return n_sites * np.log(2.0) + log_mag


def partition_function_from_state(s: CanonicalMPS, tol: float = 1e-10) -> float:
    with np.errstate(over="ignore"):
        return float(np.exp(log_partition_from_state(s, tol)))


def log_partition_from_alpha(alpha, A0: float) -> float:
    """``log(2^N exp(A0) prod cosh(a_l/4))``."""
    alpha = np.asarray(alpha, dtype=float)
    return alpha.size * np.log(2.0) + A0 + float(np.sum(log_cosh(alpha / 4.0)))


def _pair_bits(n_modes: int, *occupied) -> tuple[int, ...]:
    bits = [0] * n_modes
    for m in occupied:
        bits[m] = 1
    return tuple(bits)


def occupations_from_reduced(s_reduced: CanonicalMPS, fact: CanonicalFactorization, A0: float,
                             expected=None, tol: float = 1e-8) -> np.ndarray:
    """Pair occupations ``f_k = (1 + 2^N (..1_{2k-1} 1_{2k}..|rho'))/2`` of the reduced state.

    Cross-checked against ``(1 + tanh(a_k/4))/2`` and, if given, ``expected``.
    """
    n = s_reduced.n_modes
    log0, ph0 = s_reduced.log_amplitude((0,) * n)
    f = np.empty(n // 2)
    for k in range(n // 2):
        logk, phk = s_reduced.log_amplitude(_pair_bits(n, 2 * k, 2 * k + 1))
        ratio = (phk / ph0) * np.exp(logk - log0) if np.isfinite(logk) else 0.0
        f[k] = 0.5 * (1.0 + float(np.real(ratio)))
    checks = [0.5 * (1.0 + np.tanh(np.asarray(fact.alpha) / 4.0))]
    if expected is not None:
        checks.append(np.asarray(expected, dtype=float))
    for ref in checks:
        dev = float(np.max(np.abs(f - ref)))
        if dev > tol:
            raise IntegrityError(f"occupations disagree by {dev:.3e}")
    return f


def occupations_from_state(s: CanonicalMPS, modes) -> np.ndarray:
    """Eigenmode occupations read off the unfolded state through its two-Majorana amplitudes."""
    modes = np.asarray(modes, dtype=float)
    n_sites = modes.shape[0]
    n = s.n_modes
    log0, ph0 = s.log_amplitude((0,) * n)
    coeff = np.zeros((n_sites, n_sites))
    for j in range(n_sites):
        for i in range(n_sites):
            odd, even = 2 * j, 2 * i + 1  # 0-based slots of g_{2j-1} and g_{2i}
            logv, phv = s.log_amplitude(_pair_bits(n, min(odd, even), max(odd, even)))
            val = 0.0 if not np.isfinite(logv) else float(np.real((phv / ph0) * np.exp(logv - log0)))
            coeff[j, i] = -val if odd > even else val
    return 0.5 * (1.0 + np.einsum("jk,ik,ji->k", modes, modes, coeff))


def first_space_operators(n_sites: int):
    """Dense ``c_j`` for the first space."""
    return [ladder(j, False, n_sites).toarray() for j in range(n_sites)]


def dense_gibbs_operator(h, p: ThermoParams) -> np.ndarray:
    """``exp(-beta (H - mu M))`` as a dense ``2^N x 2^N`` matrix."""
    h = _as_coeffs(h).h
    n = h.shape[0]
    c = first_space_operators(n)
    R = -p.beta * h + p.log_fugacity * np.eye(n)
    gen = sum(R[j, k] * c[j].T @ c[k] for j in range(n) for k in range(n) if R[j, k] != 0)
    if np.isscalar(gen):
        gen = np.zeros((1 << n, 1 << n))
    return scipy.linalg.expm(gen)


def dense_thermo_oracle(h, p: ThermoParams, max_sites: int = 6) -> np.ndarray:
    """Second-space vector of ``exp(-beta (H - mu M))`` by brute-force string projection."""
    h = _as_coeffs(h)
    if h.n_sites > max_sites:
        raise ValueError(f"dense oracle limited to N <= {max_sites}")
    return StringBasis(h.n_sites).project(dense_gibbs_operator(h, p))


def fermi_dirac_occupations(eps, p: ThermoParams) -> np.ndarray:
    return np.asarray(fermi_dirac(np.asarray(eps, dtype=float), p))
