import numpy as np
import pytest

from dotchain.hamiltonian import DeviceParams, build_hamiltonian
from dotchain.linalg import evolution_operator, hermitian_eigh, jacobi_eigh, ordered_product


def _random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


@pytest.mark.parametrize("d", [1, 2, 3, 6])
def test_jacobi_matches_lapack(d):
    rng = np.random.default_rng(d)
    for _ in range(5):
        h = _random_hermitian(rng, d)
        w, v = jacobi_eigh(h)
        np.testing.assert_allclose(w, np.linalg.eigvalsh(h), atol=1e-12)
        np.testing.assert_allclose(v.conj().T @ v, np.eye(d), atol=1e-12)
        np.testing.assert_allclose(v @ np.diag(w) @ v.conj().T, h, atol=1e-12)


def test_jacobi_on_device_blocks():
    p = DeviceParams(0.12, 0.1, 6.1, 3.05)
    for eps in [(0, 0, 0), (5, 0, 5), (10, 0, -10), (-4.5, -1, -4.5)]:
        h = build_hamiltonian(p, eps)
        for block in (h.h_s, h.h_t):
            wj, vj = jacobi_eigh(block)
            wl, vl = hermitian_eigh(block)
            np.testing.assert_allclose(wj, wl, atol=1e-12)
            tau = 123.4
            np.testing.assert_allclose(evolution_operator(wj, vj, tau), evolution_operator(wl, vl, tau), atol=1e-10)


def test_jacobi_diagonal_input_is_immediate():
    w, v = jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
    assert list(w) == [-1.0, 2.0, 3.0]
    assert np.array_equal(np.abs(v), np.eye(3)[:, [1, 2, 0]])


def test_jacobi_rejects_non_square():
    with pytest.raises(ValueError):
        jacobi_eigh(np.zeros((2, 3)))


def test_ordered_product_order():
    rng = np.random.default_rng(0)
    mats = rng.normal(size=(7, 3, 3))
    expected = np.eye(3)
    for m in mats:
        expected = m @ expected
    np.testing.assert_allclose(ordered_product(mats), expected, rtol=1e-12, atol=1e-12)


def test_evolution_operator_batched():
    rng = np.random.default_rng(1)
    hs = np.stack([_random_hermitian(rng, 4) for _ in range(3)])
    w, v = hermitian_eigh(hs)
    u = evolution_operator(w, v, 0.7)
    for i in range(3):
        np.testing.assert_allclose(u[i], evolution_operator(w[i], v[i], 0.7), atol=1e-14)
        np.testing.assert_allclose(u[i].conj().T @ u[i], np.eye(4), atol=1e-12)
