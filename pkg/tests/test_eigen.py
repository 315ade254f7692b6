import numpy as np
import pytest
import scipy.linalg
from scipy import sparse

from spectralign import shapes
from spectralign.eigen import ReducedPencil, export_record, smallest_eigenpairs, spectrum_residuals
from spectralign.errors import SingularMass
from spectralign.mesh import boundary_vertices
from spectralign.operators import OperatorPair, operator_pair


def dense_oracle(ops, k, dirichlet=()):
    """Generalized dense solve on the free vertices with scipy's LAPACK driver."""
    free = np.setdiff1d(np.arange(ops.n), dirichlet)
    W = ops.stiffness.toarray()[np.ix_(free, free)]
    M = np.diag(ops.mass[free])
    return scipy.linalg.eigh(W, M, eigvals_only=True, subset_by_index=(0, k - 1))


def test_closed_kernel(sphere4):
    ops = operator_pair(sphere4)
    s = smallest_eigenpairs(ops, 1)
    assert abs(s.eigenvalues[0]) < 1e-8
    phi = s.eigenvectors[:, 0]
    np.testing.assert_allclose(phi, phi.mean(), rtol=1e-6)
    assert phi.mean() > 0


def test_contract(figure):
    ops = operator_pair(figure, "si")
    s = smallest_eigenpairs(ops, 12)
    lam = s.eigenvalues
    assert np.all(np.diff(lam) >= 0)
    assert lam.min() >= -1e-8 * lam[-1]
    G = s.eigenvectors.T @ (ops.mass[:, None] * s.eigenvectors)
    np.testing.assert_allclose(np.diag(G), 1.0, atol=1e-8)
    assert np.abs(G - np.diag(np.diag(G))).max() < 1e-6
    assert spectrum_residuals(s, ops).max() <= 1e-8


def test_matches_dense_oracle_with_dirichlet():
    g = shapes.grid(12, jitter=0.25, seed=4)
    ops = operator_pair(g)
    bnd = boundary_vertices(g)
    # large enough to take the sparse path
    big = shapes.grid(24, jitter=0.25, seed=4)
    ops_big = operator_pair(big)
    bnd_big = boundary_vertices(big)
    for o, b in ((ops, bnd), (ops_big, bnd_big)):
        s = smallest_eigenpairs(o, 6, b)
        np.testing.assert_allclose(s.eigenvalues, dense_oracle(o, 6, b), rtol=1e-9)
        assert np.all(s.eigenvectors[b] == 0.0)


def test_residuals_detect_wrong_eigenvalue(small_mesh):
    ops = operator_pair(small_mesh)
    s = smallest_eigenpairs(ops, 4)
    bad = type(s)(s.eigenvalues + 1.0, s.eigenvectors, s.metric, s.dirichlet)
    assert spectrum_residuals(bad, ops).min() > 1e-3
    empty = type(s)(s.eigenvalues[:0], s.eigenvectors[:, :0], s.metric, s.dirichlet)
    assert len(spectrum_residuals(empty, ops)) == 0


def test_deterministic(figure):
    ops = operator_pair(figure)
    a = smallest_eigenpairs(ops, 10).eigenvalues
    b = smallest_eigenpairs(ops, 10).eigenvalues
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_dirichlet_monotone():
    g = shapes.grid(30)
    ops = operator_pair(g)
    bnd = boundary_vertices(g)
    extra = np.union1d(bnd, np.flatnonzero(g.vertices[:, 0] < 0.2))
    a = smallest_eigenpairs(ops, 8, bnd).eigenvalues
    b = smallest_eigenpairs(ops, 8, extra).eigenvalues
    assert np.all(b >= a * (1 - 1e-10))


def test_shift_identity(figure):
    ops = operator_pair(figure)
    shifted = OperatorPair(ops.stiffness + sparse.diags(ops.mass), ops.mass, ops.metric)
    a = smallest_eigenpairs(ops, 8).eigenvalues
    b = smallest_eigenpairs(shifted, 8).eigenvalues
    np.testing.assert_allclose(b, a + 1.0, rtol=1e-8)


def test_singular_mass():
    g = shapes.grid(5)
    ops = operator_pair(g)
    mass = ops.mass.copy()
    mass[3] = 0.0
    with pytest.raises(SingularMass):
        ReducedPencil(ops.stiffness, mass)


def test_k_validation(small_mesh):
    ops = operator_pair(small_mesh)
    with pytest.raises(ValueError):
        smallest_eigenpairs(ops, small_mesh.n_vertices + 1)


def test_export_record(small_mesh):
    s = smallest_eigenpairs(operator_pair(small_mesh), 3)
    rec = export_record(s, small_mesh.checksum())
    assert rec["k"] == 3 and len(rec["eigenvalues"]) == 3
    assert rec["mesh_checksum"] == small_mesh.checksum()
