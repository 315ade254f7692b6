"""Discrete stiffness, lumped mass, Gaussian curvature and the scale-invariant mass."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import sparse

from .errors import DegenerateFace
from .mesh import TriMesh, boundary_vertices

DEFAULT_ALPHA = 0.33
DEFAULT_EPS = 1e-8


class Metric(str, Enum):
    REGULAR = "regular"
    SCALE_INVARIANT = "scale_invariant"

    @classmethod
    def parse(cls, value) -> "Metric":
        if isinstance(value, cls):
            return value
        aliases = {"regular": cls.REGULAR, "si": cls.SCALE_INVARIANT, "scale_invariant": cls.SCALE_INVARIANT}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown metric {value!r}") from None


@dataclass(frozen=True, eq=False)
class CurvatureField:
    values: np.ndarray
    smoothed: bool
    alpha: float = DEFAULT_ALPHA
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def with_params(self, alpha=None, eps=None) -> "CurvatureField":
        return CurvatureField(
            self.values,
            self.smoothed,
            self.alpha if alpha is None else alpha,
            self.eps if eps is None else eps,
        )


@dataclass(frozen=True, eq=False)
class OperatorPair:
    """Stiffness matrix plus diagonal mass of one metric on one mesh."""

    stiffness: sparse.csr_matrix
    mass: np.ndarray
    metric: Metric
    alpha: float = 0.0
    eps: float = DEFAULT_EPS

    @property
    def n(self) -> int:
        return self.stiffness.shape[0]

    @property
    def mass_matrix(self) -> sparse.dia_matrix:
        return sparse.diags(self.mass)


def _corner_geometry(mesh: TriMesh):
    """Per-face corner cotangents and angles, corner k opposite edge (k+1, k+2)."""
    v, f = mesh.vertices, mesh.faces
    cots = np.empty(f.shape)
    angles = np.empty(f.shape)
    for k in range(3):
        a = v[f[:, k]]
        u = v[f[:, (k + 1) % 3]] - a
        w = v[f[:, (k + 2) % 3]] - a
        dot = np.einsum("ij,ij->i", u, w)
        cr = np.linalg.norm(np.cross(u, w), axis=1)
        if np.any(cr <= 0):
            raise DegenerateFace("zero-area triangle in stiffness assembly")
        cots[:, k] = dot / cr
        angles[:, k] = np.arctan2(cr, dot)
    return cots, angles


def cotangent_stiffness(mesh: TriMesh) -> sparse.csr_matrix:
    """Cotangent stiffness matrix.

    Off-diagonal ``W_ij = -1/2 (cot a_ij + cot b_ij)`` summed over the faces
    adjacent to edge (i, j); the diagonal makes every row sum to zero.
    Negative cotangents are kept as is.
    """
    f = mesh.faces
    n = mesh.n_vertices
    cots, _ = _corner_geometry(mesh)
    rows, cols, vals = [], [], []
    for k in range(3):
        i = f[:, (k + 1) % 3]
        j = f[:, (k + 2) % 3]
        w = -0.5 * cots[:, k]
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    off = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    W = (off + sparse.diags(diag)).tocsr()
    W.sum_duplicates()
    W.sort_indices()
    return W


def lumped_mass(mesh: TriMesh) -> np.ndarray:
    """Barycentric lumped mass: a third of the incident triangle areas per vertex."""
    areas = mesh.face_areas / 3.0
    return np.bincount(mesh.faces.ravel(), weights=np.repeat(areas, 3), minlength=mesh.n_vertices)


def angle_sums(mesh: TriMesh) -> np.ndarray:
    _, angles = _corner_geometry(mesh)
    return np.bincount(mesh.faces.ravel(), weights=angles.ravel(), minlength=mesh.n_vertices)


def gaussian_curvature(
    mesh: TriMesh, smooth: bool = True, alpha: float = DEFAULT_ALPHA, eps: float = DEFAULT_EPS
) -> CurvatureField:
    """Angle-defect Gaussian curvature divided by the lumped vertex area.

    Boundary vertices use a defect relative to pi. With ``smooth`` each value
    is replaced by the mean of the raw values over the vertex and its
    one-ring neighbours.
    """
    defect = 2.0 * np.pi - angle_sums(mesh)
    bnd = boundary_vertices(mesh)
    defect[bnd] -= np.pi
    area = lumped_mass(mesh)
    raw = np.zeros(mesh.n_vertices)
    used = area > 0
    raw[used] = defect[used] / area[used]
    values = raw
    if smooth:
        adj = mesh.adjacency.copy()
        adj.data[:] = 1.0
        adj = adj + sparse.identity(mesh.n_vertices, format="csr")
        # boundary defects measure the curvature of the cut curve, not of the
        # surface; they are not averaged into any vertex when interior
        # neighbours exist
        src = np.ones(mesh.n_vertices)
        src[bnd] = 0.0
        deg = adj @ src
        values = (adj @ (raw * src)) / np.where(deg > 0, deg, 1.0)
        lonely = deg == 0
        if lonely.any():
            full_deg = np.asarray(adj.sum(axis=1)).ravel()
            values[lonely] = (adj @ raw)[lonely] / full_deg[lonely]
    return CurvatureField(values, bool(smooth), alpha, eps)


def si_mass(mesh: TriMesh, curvature: CurvatureField, base_mass: np.ndarray | None = None) -> np.ndarray:
    """Scale-invariant mass ``(|K| + eps)^alpha * A``; alpha = 0 gives the regular mass."""
    A = lumped_mass(mesh) if base_mass is None else base_mass
    if curvature.alpha == 0.0:
        return A.copy()
    return (np.abs(curvature.values) + curvature.eps) ** curvature.alpha * A


def operator_pair(
    mesh: TriMesh, metric="regular", alpha: float = DEFAULT_ALPHA, eps: float = DEFAULT_EPS
) -> OperatorPair:
    metric = Metric.parse(metric)
    W = cotangent_stiffness(mesh)
    A = lumped_mass(mesh)
    if metric is Metric.REGULAR:
        return OperatorPair(W, A, metric, 0.0, eps)
    K = gaussian_curvature(mesh, smooth=True, alpha=alpha, eps=eps)
    return OperatorPair(W, si_mass(mesh, K, A), metric, alpha, eps)


def write_coo(matrix, path) -> None:
    """Dump a sparse matrix as 0-based ``row col value`` lines."""
    m = sparse.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    with open(path, "w") as fh:
        for r, c, x in zip(m.row[order], m.col[order], m.data[order]):
            fh.write("%d %d %.17g\n" % (r, c, x))
