"""Acceptance criteria; each test records one PASS/FAIL line shown in the terminal summary."""

import time

import numpy as np

from conftest import random_baths, random_h
from fermitherm.experiments import default_fig2a, default_fig2b, run_fig2a, run_fig2b
from fermitherm.liouvillian import build_superoperator, fidelity, ness_kernel
from fermitherm.model import ThermoParams, fermi_dirac, grand_partition_closed_form
from fermitherm.mps import product_state
from fermitherm.stationary import (
    Block,
    Theorem1Config,
    Theorem2Config,
    theorem1_baths,
    theorem1_state,
    theorem2_baths,
    theorem2_state,
    verify_stationarity,
)
from fermitherm.thermo import (
    build_thermo_state,
    dense_thermo_oracle,
    log_partition_from_alpha,
    log_partition_from_state,
    occupations_from_reduced,
)

RESULTS = []

TOL_STATIONARY = 1e-10
TOL_CONTROL = 1e-6
CONTROL_RATE = 0.9
TOL_ORACLE = 1e-9
TOL_FIDELITY = 1e-10
TOL_XI = 1e-9
TOL_FD = 1e-9
TOL_PEAK = 1e-6
OFF_PEAK = 1 - 1e-4
TOL_EIGEN = 1e-10


def record(number, ok, detail):
    RESULTS.append(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    return ok


def random_x(rng, branch):
    while True:
        x = rng.uniform(-0.95, 0.95)
        if branch == "plus" or abs(x) > 0.05:
            return x


def random_amplitudes(rng, n):
    return rng.uniform(0.3, 1.5, size=n) * rng.choice([-1, 1], size=n)


def test_theorem1_stationarity():
    rng = np.random.default_rng(1)
    worst = 0.0
    for draw in range(50):
        n = 2 + draw % 5
        branch = ("plus", "minus")[draw % 2]
        cfg = Theorem1Config(random_x(rng, branch), random_amplitudes(rng, n), branch)
        rep = verify_stationarity(theorem1_state(cfg.x, n), random_h(rng, n), theorem1_baths(cfg))
        worst = max(worst, rep.residual)
    ok = worst <= TOL_STATIONARY
    record(1, ok, f"theorem-1 stationarity, 50 draws N=2..6, max relative residual {worst:.2e} (tol {TOL_STATIONARY:g})")
    assert ok


def random_blocks(rng, n_blocks, n_max=6):
    sizes = [1] * n_blocks
    for _ in range(rng.integers(0, n_max - n_blocks + 1)):
        sizes[rng.integers(n_blocks)] += 1
    xs = np.linspace(-0.8, 0.8, n_blocks) + rng.uniform(-0.05, 0.05, n_blocks)
    rng.shuffle(xs)
    return [Block(float(x), random_amplitudes(rng, d), random_h(rng, d).h) for x, d in zip(xs, sizes)]


def test_theorem2_stationarity_and_control():
    rng = np.random.default_rng(2)
    worst, controls = 0.0, []
    for draw in range(30):
        blocks = random_blocks(rng, (2, 3)[draw % 2])
        cfg = Theorem2Config(tuple(blocks), ("plus", "minus")[draw % 3 == 0])
        h, baths = cfg.hamiltonian(), theorem2_baths(cfg)
        worst = max(worst, verify_stationarity(theorem2_state(cfg), h, baths).residual)
        wrong = product_state([(1.0, x) for x in np.roll(cfg.site_x(), blocks[0].size)], scale=2.0**-cfg.n_sites)
        controls.append(verify_stationarity(wrong, h, baths).residual)
    rate = float(np.mean(np.array(controls) > TOL_CONTROL))
    ok = worst <= TOL_STATIONARY and rate >= CONTROL_RATE
    record(2, ok, f"theorem-2 stationarity, 30 draws, max residual {worst:.2e}; "
                  f"mismatched-block control above {TOL_CONTROL:g} on {rate:.0%} (need {CONTROL_RATE:.0%})")
    assert ok


def test_thermo_oracle_equivalence():
    rng = np.random.default_rng(3)
    worst = 0.0
    for draw in range(20):
        n = 1 + draw % 4
        p = ThermoParams(rng.uniform(0, 2), rng.uniform(-1, 1))
        h = random_h(rng, n)
        dev = np.max(np.abs(build_thermo_state(h, p).state.to_dense() - dense_thermo_oracle(h, p)))
        worst = max(worst, float(dev))
    ok = worst <= TOL_ORACLE
    record(3, ok, f"thermo MPS vs dense exp oracle, 20 draws N<=4, max componentwise deviation {worst:.2e} (tol {TOL_ORACLE:g})")
    assert ok


def test_ness_oracle_equivalence():
    rng = np.random.default_rng(4)
    configs = []
    for n in range(1, 5):
        for branch in ("plus", "minus"):
            cfg = Theorem1Config(random_x(rng, branch), random_amplitudes(rng, n), branch)
            configs.append((random_h(rng, n), theorem1_baths(cfg), theorem1_state(cfg.x, n)))
    for n_blocks in (2, 3):
        cfg = Theorem2Config(tuple(random_blocks(rng, n_blocks, 4)))
        configs.append((cfg.hamiltonian(), theorem2_baths(cfg), theorem2_state(cfg)))
    dims, worst = [], 0.0
    for h, baths, state in configs:
        res = ness_kernel(build_superoperator(h, baths))
        dims.append(res.kernel_dim)
        worst = max(worst, 1 - fidelity(res.vector, state.to_dense()))
    ok = all(d == 1 for d in dims) and worst <= TOL_FIDELITY
    record(4, ok, f"NESS kernel vs closed form, {len(configs)} configs N<=4, kernel dims {sorted(set(dims))}, "
                  f"max infidelity {worst:.2e} (tol {TOL_FIDELITY:g})")
    assert ok


def test_partition_function_three_way():
    rng = np.random.default_rng(5)
    worst = 0.0
    for n in range(1, 9):
        h = random_h(rng, n)
        mu = rng.uniform(-1, 1)
        for beta in np.linspace(0, 3, 7):
            p = ThermoParams(float(beta), mu)
            th = build_thermo_state(h, p)
            logs = [log_partition_from_state(th.state), grand_partition_closed_form(th.eps, p)[1],
                    log_partition_from_alpha(th.factorization.alpha, th.A0)]
            worst = max(worst, max(abs(np.expm1(a - b)) for a in logs for b in logs))
    ok = worst <= TOL_XI
    record(5, ok, f"partition function three-way, N=1..8, beta in [0,3], max relative spread {worst:.2e} (tol {TOL_XI:g})")
    assert ok


def test_fermi_dirac_recovery():
    rng = np.random.default_rng(6)
    worst = 0.0
    for draw in range(18):
        n = 1 + draw % 6
        p = ThermoParams(rng.uniform(0, 3), rng.uniform(-1, 1))
        th = build_thermo_state(random_h(rng, n), p)
        f = occupations_from_reduced(th.reduced, th.factorization, th.A0)
        worst = max(worst, float(np.max(np.abs(f - fermi_dirac(th.eps, p)))))
    ok = worst <= TOL_FD
    record(6, ok, f"Fermi-Dirac occupations from reduced state, N<=6, max deviation {worst:.2e} (tol {TOL_FD:g})")
    assert ok


def test_fig2_reproduction():
    t0 = time.time()
    a = run_fig2a(default_fig2a(10, 5))
    b = run_fig2b(default_fig2b(10, 5))
    elapsed = time.time() - t0
    checks = [
        a.peak_param == 0 and abs(a.peak_overlap - 1) <= TOL_PEAK,
        a.rows[-1].param == 4 and a.rows[-1].overlap < OFF_PEAK,
        b.peak_param == 0 and abs(b.peak_overlap - 1) <= TOL_PEAK,
        b.rows[-1].param == 1 and b.rows[-1].overlap < OFF_PEAK,
    ]
    ok = all(checks)
    record(7, ok, f"fig2 N=10: beta-peak {a.peak_overlap:.9f} at {a.peak_param:g}, overlap(beta=4) {a.rows[-1].overlap:.6f}; "
                  f"omega-peak {b.peak_overlap:.9f} at {b.peak_param:g}, overlap(omega=1) {b.rows[-1].overlap:.6f}; "
                  f"monotone trend beta {a.monotone_away_from_peak()} omega {b.monotone_away_from_peak()} (reported); "
                  f"{elapsed:.0f}s")
    assert ok


def test_fully_occupied_eigenpair():
    rng = np.random.default_rng(8)
    worst = 0.0
    for draw in range(100):
        n = 1 + draw % 3
        baths = random_baths(rng, n, n_baths=int(rng.integers(1, 4)))
        su = build_superoperator(random_h(rng, n), baths)
        v = np.zeros(4**n)
        v[-1] = 1.0
        L = -4 * sum(np.sum(b[0::2] ** 2 + b[1::2] ** 2) for b in baths.B)
        dev = np.linalg.norm(su.matvec(v) - L * v) / max(1.0, abs(L))
        worst = max(worst, float(dev), abs(baths.occupied_eigenvalue() - L) / max(1.0, abs(L)))
    ok = worst <= TOL_EIGEN
    record(8, ok, f"fully occupied eigenpair, 100 bath sets N<=3, max relative deviation {worst:.2e} (tol {TOL_EIGEN:g})")
    assert ok
