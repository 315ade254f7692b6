"""Smallest eigenpairs of ``W phi = lambda M phi`` with homogeneous Dirichlet conditions.

The mass is diagonal, so the pencil is reduced to the standard symmetric
problem ``M^-1/2 W M^-1/2 y = lambda y`` on the free vertices and solved by
shift-invert Lanczos (ARPACK) around a small negative shift. Tiny problems
fall back to a dense symmetric solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from .errors import ConvergenceFailure, SingularMass
from .operators import OperatorPair

DENSE_LIMIT = 400
RESIDUAL_TOL = 1e-8
SOLVER_SEED = 0


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending eigenvalues with mass-orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    metric: str = "regular"
    dirichlet: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def k(self) -> int:
        return len(self.eigenvalues)


def free_vertices(n: int, dirichlet) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    if dirichlet is not None and len(dirichlet):
        mask[np.asarray(dirichlet, dtype=np.int64)] = False
    return np.flatnonzero(mask)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    if vecs.size == 0:
        return vecs
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


class ReducedPencil:
    """The scaled standard-form operator on the free vertices of one pencil.

    Holds ``C = M^-1/2 W M^-1/2`` restricted to the free vertices so that
    repeated solves with different diagonal potentials (``C + diag(q)``)
    reuse the restriction and scaling work.
    """

    def __init__(self, stiffness, mass, dirichlet=None):
        n = stiffness.shape[0]
        self.n = n
        self.free = free_vertices(n, dirichlet)
        self.dirichlet = np.setdiff1d(np.arange(n), self.free)
        m = np.asarray(mass, dtype=np.float64)[self.free]
        if np.any(~np.isfinite(m)) or np.any(m <= 0):
            raise SingularMass("mass must be strictly positive on free vertices")
        self.mass_free = m
        self.inv_sqrt_m = 1.0 / np.sqrt(m)
        Wf = sparse.csr_matrix(stiffness)[self.free][:, self.free]
        S = sparse.diags(self.inv_sqrt_m)
        C = (S @ Wf @ S).tocsc()
        # symmetrize away round-off
        self.C = ((C + C.T) * 0.5).tocsc()
        self.C.sort_indices()
        self.diagC = self.C.diagonal()

    @property
    def n_free(self) -> int:
        return len(self.free)

    def solve(self, k: int, potential=None, v0=None, dense_limit: int = DENSE_LIMIT):
        """Return (eigenvalues, eigenvectors on free vertices, y-basis) for ``C + diag(q)``."""
        nf = self.n_free
        if k > nf:
            raise ValueError(f"k={k} exceeds the {nf} free vertices")
        if k == 0:
            return np.zeros(0), np.zeros((nf, 0)), np.zeros((nf, 0))
        C = self.C
        if potential is not None:
            q = np.asarray(potential, dtype=np.float64)[self.free]
            C = (C + sparse.diags(q)).tocsc()
        if nf <= dense_limit or k >= nf - 1:
            vals, y = scipy.linalg.eigh(C.toarray(), subset_by_index=[0, k - 1])
        else:
            vals, y = _shift_invert(C, k, v0)
        order = np.argsort(vals, kind="stable")
        vals = vals[order]
        y = _fix_signs(y[:, order])
        phi = y * self.inv_sqrt_m[:, None]
        return vals, phi, y

    def embed(self, phi_free: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n, phi_free.shape[1]))
        out[self.free] = phi_free
        return out


def _shift_invert(C, k, v0):
    nf = C.shape[0]
    scale = float(np.mean(np.abs(C.diagonal()))) or 1.0
    sigma = -1e-6 * scale
    shifted = (C - sigma * sparse.identity(nf, format="csc")).tocsc()
    lu = splu(shifted, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    op = LinearOperator((nf, nf), matvec=lu.solve, dtype=np.float64)
    if v0 is None:
        v0 = np.random.default_rng(SOLVER_SEED).standard_normal(nf)
    ncv = min(nf, max(2 * k + 10, 20))
    try:
        vals, y = eigsh(
            C, k=k, sigma=sigma, which="LM", OPinv=op, v0=v0, ncv=ncv, tol=0.0, maxiter=300 * k
        )
    except ArpackNoConvergence as exc:
        raise ConvergenceFailure(f"ARPACK converged {len(exc.eigenvalues)} of {k} eigenpairs") from exc
    # shift-invert Ritz vectors can lose a little orthogonality; one Rayleigh-Ritz pass restores it
    q, _ = np.linalg.qr(y)
    h = q.T @ (C @ q)
    vals, s = np.linalg.eigh((h + h.T) * 0.5)
    return vals, q @ s


def smallest_eigenpairs(ops: OperatorPair, k: int, dirichlet=None, *, check: bool = True) -> Spectrum:
    """k smallest eigenpairs of the operator pair, zero on `dirichlet` vertices."""
    pencil = ReducedPencil(ops.stiffness, ops.mass, dirichlet)
    vals, phi, _ = pencil.solve(k)
    spec = Spectrum(vals, pencil.embed(phi), ops.metric.value, pencil.dirichlet)
    if check and k:
        res = spectrum_residuals(spec, ops, pencil.dirichlet)
        if np.max(res) > RESIDUAL_TOL:
            raise ConvergenceFailure(f"residual {np.max(res):.3g} above {RESIDUAL_TOL}")
    return spec


def spectrum_residuals(spec: Spectrum, ops: OperatorPair, dirichlet=None, potential=None) -> np.ndarray:
    """Relative residual ``|W phi - lam M phi| / max(|W phi|, lam |M phi|)`` per pair, on free rows."""
    if spec.k == 0:
        return np.zeros(0)
    free = free_vertices(ops.n, dirichlet)
    W = ops.stiffness
    if potential is not None:
        W = W + sparse.diags(ops.mass * np.asarray(potential))
    Wphi = (W @ spec.eigenvectors)[free]
    Mphi = (ops.mass[:, None] * spec.eigenvectors)[free]
    lam = spec.eigenvalues
    r = np.linalg.norm(Wphi - Mphi * lam, axis=0)
    denom = np.maximum(np.linalg.norm(Wphi, axis=0), np.abs(lam) * np.linalg.norm(Mphi, axis=0))
    # floor for (near-)zero eigenvalues, where both norms above vanish
    floor = 1e-6 * np.max(np.abs(W.diagonal())) * np.linalg.norm(spec.eigenvectors[free], axis=0)
    denom = np.maximum(denom, floor)
    denom = np.where(denom > 0, denom, 1.0)
    return r / denom


def export_record(spec: Spectrum, mesh_checksum: str) -> dict:
    return {
        "k": spec.k,
        "eigenvalues": [float(x) for x in spec.eigenvalues],
        "metric": spec.metric,
        "mesh_checksum": mesh_checksum,
    }
