import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from latharm.eigensolver import (
    IterationError,
    SizeError,
    dense_spectrum,
    extreme_eigenvalue,
    lowest_eigenvalues,
)
from latharm.lattice import assemble_hamiltonian, assemble_kinetic, build_lattice, operator_norm


def random_sparse_symmetric(seed, n=None, density=0.05):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(50, 501))
    A = sp.random(n, n, density=density, random_state=rng, data_rvs=rng.standard_normal)
    return ((A + A.T) * 0.5 + sp.diags(rng.standard_normal(n))).tocsr()


def test_diag_example():
    res = lowest_eigenvalues(np.diag([5.0, 1.0, 3.0]), 2)
    np.testing.assert_allclose(res.eigenvalues, [1, 3])


def test_circulant_example(m1):
    box = build_lattice(1, 0.5, n=4, boundary="periodic")
    T = assemble_kinetic(m1, box)
    res = lowest_eigenvalues(T, 2, dense_max=0)
    np.testing.assert_allclose(res.eigenvalues, [0, 2], atol=1e-12)


def test_m1_lanczos_matches_dense(m1):
    H = assemble_hamiltonian(m1, build_lattice(1, 0.05, 3.0))
    ref = dense_spectrum(H).eigenvalues[:4]
    res = lowest_eigenvalues(H, 4, dense_max=0)
    assert res.method == "lanczos"
    np.testing.assert_allclose(res.eigenvalues, ref, atol=1e-9)


def test_m1_degenerate_pair_found(m1):
    # N = 1201: the tunnelling pair is degenerate to roundoff, the re-check must find both copies
    H = assemble_hamiltonian(m1, build_lattice(1, 0.005, 3.0))
    res = lowest_eigenvalues(H, 4, dense_max=0, vectors=True)
    np.testing.assert_allclose(res.eigenvalues / 0.005, [1.99625, 1.99625, 5.97620, 5.97620], atol=1e-4)
    assert np.all(res.residuals <= 1e-10 * operator_norm(H))
    np.testing.assert_allclose(res.eigenvectors.T @ res.eigenvectors, np.eye(4), atol=1e-8)


def test_exactly_degenerate_identity_block():
    A = sp.diags(np.r_[np.ones(6), np.arange(2.0, 300.0)]).tocsr()
    res = lowest_eigenvalues(A, 6, dense_max=0)
    np.testing.assert_allclose(res.eigenvalues, np.ones(6), atol=1e-12)


def test_dense_examples():
    assert dense_spectrum(np.array([[3.5]])).eigenvalues.tolist() == [3.5]
    np.testing.assert_allclose(dense_spectrum(np.array([[0.0, 1.0], [1.0, 0.0]])).eigenvalues, [-1, 1])
    n = 30
    T = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1])
    k = np.arange(1, n + 1)
    np.testing.assert_allclose(dense_spectrum(T).eigenvalues, np.sort(2 - 2 * np.cos(np.pi * k / (n + 1))), atol=1e-13)


def test_dense_size_limit():
    with pytest.raises(SizeError):
        dense_spectrum(sp.identity(4001, format="csr"))


def test_argument_checks():
    A = np.eye(3)
    with pytest.raises(ValueError):
        lowest_eigenvalues(A, 0)
    with pytest.raises(ValueError):
        lowest_eigenvalues(A, 4)
    with pytest.raises(ValueError):
        lowest_eigenvalues(A, 1, tol=0)


def test_budget_exhaustion_carries_partial():
    A = random_sparse_symmetric(1, n=400)
    with pytest.raises(IterationError) as exc:
        lowest_eigenvalues(A, 5, dense_max=0, max_steps=45)
    partial = exc.value.partial
    assert partial is not None and not partial.converged
    assert len(partial.eigenvalues) == 5


@pytest.mark.parametrize("seed", range(20))
def test_oracle_agreement(seed):
    A = random_sparse_symmetric(seed)
    ref = dense_spectrum(A).eigenvalues[:5]
    res = lowest_eigenvalues(A, 5, dense_max=0)
    np.testing.assert_allclose(res.eigenvalues, ref, atol=1e-9)
    assert np.all(res.residuals <= 1e-10 * operator_norm(A))
    assert np.all(np.diff(res.eigenvalues) >= 0)


@given(st.integers(0, 10_000), st.integers(1, 8))
@settings(max_examples=15, deadline=None)
def test_oracle_agreement_property(seed, k):
    A = random_sparse_symmetric(seed, n=120, density=0.08)
    res = lowest_eigenvalues(A, k, dense_max=0)
    np.testing.assert_allclose(res.eigenvalues, dense_spectrum(A).eigenvalues[:k], atol=1e-9)


def test_bitwise_determinism(m2):
    H = assemble_hamiltonian(m2, build_lattice(2, 0.05, 2.0))
    a = lowest_eigenvalues(H, 3, dense_max=0)
    b = lowest_eigenvalues(H, 3, dense_max=0)
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
    assert a.iterations == b.iterations


def test_extreme_eigenvalue():
    A = random_sparse_symmetric(7, n=300)
    w = dense_spectrum(A).eigenvalues
    assert extreme_eigenvalue(A, largest=True, tol=1e-12) == pytest.approx(w[-1], abs=1e-8)
    assert extreme_eigenvalue(A, largest=False, tol=1e-12) == pytest.approx(w[0], abs=1e-8)
