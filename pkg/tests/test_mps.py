import numpy as np
import pytest
import scipy.linalg
import scipy.stats

from fermitherm.fock import parity_signs
from fermitherm.mps import (
    BondOverflowError,
    CanonicalMPS,
    amplitude,
    apply_two_site_gate,
    gate_from_majorana_rotation,
    inner_product,
    network_overlap,
    product_state,
)


def random_state(rng, n_modes, even=True):
    v = rng.normal(size=1 << n_modes) + 1j * rng.normal(size=1 << n_modes)
    if even:
        v[parity_signs(n_modes) < 0] = 0
    return v


def assert_canonical(s, tol=1e-10):
    assert s.canonicality_error() <= tol
    for lam in s.schmidt:
        assert np.all(lam >= 0) and np.all(np.diff(lam) <= 1e-14)
        assert np.sum(lam**2) == pytest.approx(1.0, abs=1e-10)


def test_vacuum_product_state():
    s = product_state([(1, 0)] * 3)
    assert s.norm == pytest.approx(1.0)
    assert s.amplitude((0,) * 6) == pytest.approx(1.0)
    assert inner_product(s, s) == pytest.approx(1.0)
    assert_canonical(s)


def test_single_pair_amplitudes():
    alpha, A0 = 1.7, -0.4
    s = product_state([(np.cosh(alpha / 4), np.sinh(alpha / 4))], scale=np.exp(A0))
    assert s.amplitude((0, 0)) == pytest.approx(np.exp(A0) * np.cosh(alpha / 4))
    assert s.amplitude((1, 1)) == pytest.approx(np.exp(A0) * np.sinh(alpha / 4))
    assert s.amplitude((0, 1)) == 0


def test_product_state_kronecker(rng):
    pairs = [tuple(rng.normal(size=2) + 1j * rng.normal(size=2)) for _ in range(2)]
    ref = np.ones(1)
    for a, b in pairs:
        ref = np.kron(ref, np.array([a, 0, 0, b]))
    s = product_state(pairs, scale=0.5)
    np.testing.assert_allclose(s.to_dense(), 0.5 * ref, atol=1e-14)
    assert_canonical(s)


def test_amplitude_separability(rng):
    pairs = [tuple(rng.normal(size=2)) for _ in range(3)]
    s = product_state(pairs)
    bits = (0, 0, 1, 1, 0, 0)
    assert s.amplitude(bits) == pytest.approx(pairs[1][1] * pairs[0][0] * pairs[2][0])
    assert amplitude(product_state([(1, 0)] * 2), (0, 0, 0, 0)) == pytest.approx(1.0)


def test_from_dense_round_trip_and_amplitudes(rng):
    v = random_state(rng, 6, even=False)
    s = CanonicalMPS.from_dense(v)
    assert_canonical(s)
    np.testing.assert_allclose(s.to_dense(), v, atol=1e-12)
    for idx in rng.choice(64, size=8, replace=False):
        bits = tuple(int(b) for b in np.binary_repr(idx, 6))
        assert abs(s.amplitude(bits) - v[idx]) <= 1e-12


def test_norm_bond_independent(rng):
    v = random_state(rng, 6)
    s = CanonicalMPS.from_dense(v)
    assert s.norm == pytest.approx(np.linalg.norm(v), rel=1e-12)
    for lam in s.schmidt:
        assert np.sum(lam**2) == pytest.approx(1.0, abs=1e-12)


def test_inner_product_dense(rng):
    a = CanonicalMPS.from_dense(random_state(rng, 6))
    b = CanonicalMPS.from_dense(random_state(rng, 6))
    assert abs(inner_product(a, b) - np.vdot(a.to_dense(), b.to_dense())) <= 1e-12
    ref = np.vdot(a.to_dense(), b.to_dense()) / (a.norm * b.norm)
    assert abs(network_overlap(a, b) - ref) <= 1e-12


def test_inner_product_basis_states():
    a = CanonicalMPS.basis_state((1, 1, 0, 0))
    b = CanonicalMPS.basis_state((0, 1, 1, 0))
    assert inner_product(a, b) == 0
    assert inner_product(a, a) == pytest.approx(1.0)


def test_inner_product_random_product_states(rng):
    pa = [tuple(rng.normal(size=2)) for _ in range(3)]
    pb = [tuple(rng.normal(size=2)) for _ in range(3)]
    a, b = product_state(pa), product_state(pb)
    ref = np.prod([x[0] * y[0] + x[1] * y[1] for x, y in zip(pa, pb)])
    assert inner_product(a, b) == pytest.approx(ref, abs=1e-12)


def test_identity_gate(rng):
    s = CanonicalMPS.from_dense(random_state(rng, 6))
    t = apply_two_site_gate(s, 2, np.eye(4))
    np.testing.assert_allclose(t.to_dense(), s.to_dense(), atol=1e-12)


def test_gate_on_vacuum():
    s = product_state([(1, 0)] * 2)
    t = s.apply_two_site_gate(1, gate_from_majorana_rotation(3, 1.1))
    np.testing.assert_allclose(t.to_dense(), s.to_dense(), atol=1e-14)


def test_random_even_unitary_gate(rng):
    v = random_state(rng, 6)
    s = CanonicalMPS.from_dense(v)
    even = scipy.stats.unitary_group.rvs(2, random_state=1)
    odd = scipy.stats.unitary_group.rvs(2, random_state=2)
    G = np.zeros((4, 4), dtype=complex)
    G[np.ix_([0, 3], [0, 3])] = even
    G[np.ix_([1, 2], [1, 2])] = odd
    t = s.apply_two_site_gate(3, G)
    ref = np.einsum("ab,xby->xay", G, v.reshape(8, 4, 2)).ravel()
    np.testing.assert_allclose(t.to_dense(), ref, atol=1e-10)
    assert_canonical(t)


def test_gate_rejects_parity_mixing(rng):
    s = CanonicalMPS.from_dense(random_state(rng, 4))
    G = np.eye(4)
    G[0, 1] = 1
    with pytest.raises(ValueError):
        s.apply_two_site_gate(0, G)


def test_rotation_gate_identity_and_inverse():
    np.testing.assert_allclose(gate_from_majorana_rotation(4, 0.0), np.eye(4))
    for j in (2, 3, 4):
        G = gate_from_majorana_rotation(j, 0.3)
        np.testing.assert_allclose(G @ gate_from_majorana_rotation(j + 1, 0.3), np.eye(4), atol=1e-15)
        np.testing.assert_allclose(G @ G.conj().T, np.eye(4), atol=1e-15)


def test_rotation_gate_generator():
    gen = np.zeros((4, 4), dtype=complex)
    gen[1, 2] = gen[2, 1] = 1j
    for j, theta in [(2, 0.3), (5, 0.3), (3, -1.2)]:
        ref = scipy.linalg.expm((-1) ** j * theta * gen)
        np.testing.assert_allclose(gate_from_majorana_rotation(j, theta), ref, atol=1e-14)


def test_rotation_gate_half_turns():
    G = gate_from_majorana_rotation(3, np.pi / 2)
    assert abs(G[1, 2]) == pytest.approx(1.0) and abs(G[1, 1]) < 1e-15
    H = gate_from_majorana_rotation(3, np.pi)
    np.testing.assert_allclose(np.diag(H), [1, -1, -1, 1], atol=1e-15)
    np.testing.assert_allclose(H @ H, np.eye(4), atol=1e-15)


def test_truncation_and_overflow(rng):
    v = random_state(rng, 8)
    with pytest.raises(BondOverflowError):
        CanonicalMPS.from_dense(v, chi=2)
    s = CanonicalMPS.from_dense(v, chi=2, tau=1e-300)
    assert s.max_bond <= 2 and s.discarded > 0


def test_snapshot_round_trip(tmp_path, rng):
    s = CanonicalMPS.from_dense(random_state(rng, 6), chi=64, tau=1e-13).scaled(3.25)
    path = tmp_path / "state.npz"
    s.save(path)
    t = CanonicalMPS.load(path)
    assert (t.chi, t.tau, t.log_scale, t.discarded) == (s.chi, s.tau, s.log_scale, s.discarded)
    for a, b in zip(s.tensors + s.schmidt, t.tensors + t.schmidt):
        assert a.dtype == b.dtype and a.shape == b.shape
        assert a.tobytes() == b.tobytes()


def test_apply_majorana_sum_dense(rng):
    from fermitherm.fock import majoranas

    n = 3
    v = random_state(rng, 2 * n, even=False)
    s = CanonicalMPS.from_dense(v)
    r = rng.normal(size=4 * n) + 1j * rng.normal(size=4 * n)
    op = sum(c * g for c, g in zip(r, majoranas(2 * n)))
    np.testing.assert_allclose(s.apply_majorana_sum(r).to_dense(), op @ v, atol=1e-12)
