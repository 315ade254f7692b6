"""Procedural test meshes: icospheres, flat grids, a tetrahedron and an articulated figure."""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def tetrahedron() -> TriMesh:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return TriMesh(v, f, name="tetrahedron")


def unit_square() -> TriMesh:
    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    return TriMesh(v, [[0, 1, 2], [0, 2, 3]], name="unit_square")


def grid(nx: int, ny: int | None = None, size=(1.0, 1.0), jitter: float = 0.0, seed: int = 0) -> TriMesh:
    """Flat ``nx x ny`` vertex grid over ``[0, sx] x [0, sy]``, each cell split along one diagonal."""
    ny = nx if ny is None else ny
    xs = np.linspace(0.0, size[0], nx)
    ys = np.linspace(0.0, size[1], ny)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    v = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    if jitter:
        rng = np.random.default_rng(seed)
        h = min(size[0] / (nx - 1), size[1] / (ny - 1))
        interior = (X.ravel() > 0) & (X.ravel() < size[0]) & (Y.ravel() > 0) & (Y.ravel() < size[1])
        v[interior, :2] += jitter * h * rng.uniform(-1, 1, size=(interior.sum(), 2))
    idx = np.arange(nx * ny).reshape(ny, nx)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    f = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriMesh(v, f, name=f"grid{nx}x{ny}")


def icosphere(subdivisions: int = 4, radius: float = 1.0) -> TriMesh:
    """Loop-subdivided icosahedron projected to a sphere."""
    t = (1.0 + 5**0.5) / 2.0
    v = [
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ]
    f = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = np.array(v, dtype=float)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(f, dtype=np.int64)
    for _ in range(subdivisions):
        verts, faces = _subdivide(verts, faces)
    return TriMesh(verts * radius, faces, name=f"icosphere{subdivisions}")


def _subdivide(verts, faces):
    edges = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    mid = verts[uniq[:, 0]] + verts[uniq[:, 1]]
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    nv = len(verts)
    m = inv.reshape(3, -1).T + nv  # midpoints of edges (01, 12, 20)
    a, b, c = faces.T
    ab, bc, ca = m.T
    new_faces = np.concatenate(
        [
            np.column_stack([a, ab, ca]),
            np.column_stack([b, bc, ab]),
            np.column_stack([c, ca, bc]),
            np.column_stack([ab, bc, ca]),
        ]
    )
    return np.vstack([verts, mid]), new_faces


def bumpy_sphere(subdivisions: int = 2, amplitude: float = 0.15, seed: int = 0) -> TriMesh:
    """Icosphere with a smooth random radial perturbation; breaks eigenvalue multiplicities."""
    base = icosphere(subdivisions)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((6, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    w = rng.uniform(0.5, 1.0, size=6)
    p = base.vertices
    r = 1.0 + amplitude * np.tanh((p @ dirs.T) ** 3 @ w) + 0.3 * amplitude * p[:, 0] * p[:, 2]
    stretch = np.array([1.3, 1.0, 0.8])
    return TriMesh(p * r[:, None] * stretch, base.faces, name=f"bumpy{subdivisions}")


# ------------------------------------------------------------- articulated figure

_FIGURE_CAPSULES = [
    # (a, b, radius) in a roughly 2-unit-tall frame
    ((0.0, 0.0, 0.05), (0.0, 0.0, 0.55), 0.2),  # torso
    ((0.0, 0.0, 0.78), (0.0, 0.0, 0.78), 0.14),  # head
    ((0.0, 0.0, 0.55), (0.0, 0.0, 0.66), 0.06),  # neck
    ((0.14, 0.0, 0.5), (0.5, 0.0, 0.22), 0.055),  # right arm
    ((-0.14, 0.0, 0.5), (-0.45, 0.1, 0.72), 0.055),  # left arm, raised
    ((0.09, 0.0, 0.05), (0.16, 0.0, -0.62), 0.075),  # right leg
    ((-0.09, 0.0, 0.05), (-0.3, 0.08, -0.58), 0.075),  # left leg, spread
    ((0.16, 0.0, -0.62), (0.16, 0.15, -0.66), 0.05),  # right foot
    ((-0.3, 0.08, -0.58), (-0.3, 0.23, -0.62), 0.05),  # left foot
]
_FIGURE_TORSO_SCALE = np.array([1.0, 0.6, 1.0])


def _capsule_sdf(p, a, b, r):
    a = np.asarray(a)
    b = np.asarray(b)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0:
        return np.linalg.norm(p - a, axis=-1) - r
    t = np.clip(((p - a) @ ab) / denom, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[..., None] * ab), axis=-1) - r


def _smooth_min(d1, d2, k):
    h = np.clip(0.5 + 0.5 * (d2 - d1) / k, 0.0, 1.0)
    return d2 * (1 - h) + d1 * h - k * h * (1 - h)


def figure_sdf(p: np.ndarray) -> np.ndarray:
    """Signed distance (approximate) of a stick-figure body with smooth joints."""
    d = None
    for i, (a, b, r) in enumerate(_FIGURE_CAPSULES):
        q = p / _FIGURE_TORSO_SCALE if i == 0 else p
        di = _capsule_sdf(q, a, b, r) * (0.6 if i == 0 else 1.0)
        d = di if d is None else _smooth_min(d, di, 0.04)
    return d


def articulated_figure(resolution: float = 0.021, smoothing_steps: int = 12) -> TriMesh:
    """Closed genus-0 humanoid-like mesh extracted from `figure_sdf`.

    Marching cubes at grid spacing `resolution`, followed by short-edge
    collapse and tangential relaxation projected back onto the implicit
    surface, so triangles are well shaped. The default spacing gives roughly
    5000 vertices.
    """
    from skimage import measure

    lo = np.array([-0.75, -0.35, -0.8])
    hi = np.array([0.75, 0.45, 1.0])
    shape = np.ceil((hi - lo) / resolution).astype(int) + 1
    axes = [lo[i] + resolution * np.arange(shape[i]) for i in range(3)]
    P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vol = figure_sdf(P.reshape(-1, 3)).reshape(P.shape[:3])
    verts, faces, _, _ = measure.marching_cubes(vol, level=0.0, spacing=(resolution,) * 3)
    verts = verts + lo
    verts, faces = _collapse_short_edges(verts, faces.astype(np.int64), 0.35 * resolution)
    verts, faces = _largest_component(verts, faces)
    verts = _relax(verts, faces, figure_sdf, smoothing_steps)
    return TriMesh(verts, faces, name="figure")


def _collapse_short_edges(verts, faces, min_len):
    """Merge endpoints of edges shorter than `min_len` (union-find), dropping collapsed faces."""
    parent = np.arange(len(verts))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    edges = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    edges = np.unique(edges, axis=0)
    lengths = np.linalg.norm(verts[edges[:, 0]] - verts[edges[:, 1]], axis=1)
    locked = np.zeros(len(verts), dtype=bool)
    for (i, j), length in zip(edges[np.argsort(lengths)], np.sort(lengths)):
        if length >= min_len:
            break
        ri, rj = find(i), find(j)
        if ri == rj or locked[ri] or locked[rj]:
            continue
        parent[rj] = ri
        verts[ri] = 0.5 * (verts[ri] + verts[rj])
        locked[ri] = True
    roots = np.array([find(i) for i in range(len(verts))])
    faces = roots[faces]
    ok = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    faces = faces[ok]
    # drop duplicate faces created by collapses (same vertex triple)
    key = np.sort(faces, axis=1)
    _, first, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    dup = set(map(tuple, key[first[counts > 1]]))
    if dup:
        keep = np.array([tuple(k) not in dup for k in key])
        faces = faces[keep]
    used = np.unique(faces)
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return verts[used], remap[faces]


def _largest_component(verts, faces):
    from scipy import sparse
    from scipy.sparse import csgraph

    n = len(verts)
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]]])
    g = sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, lab = csgraph.connected_components(g, directed=False)
    big = np.argmax(np.bincount(lab[np.unique(faces)]))
    keep = lab[faces[:, 0]] == big
    faces = faces[keep]
    used = np.unique(faces)
    remap = -np.ones(n, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return verts[used], remap[faces]


def _relax(verts, faces, sdf, steps, rate=0.5, h=1e-5):
    from scipy import sparse

    n = len(verts)
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    adj = sparse.coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n))
    adj = adj.tocsr()
    adj.data[:] = 1.0
    deg = np.asarray(adj.sum(1)).ravel()
    v = verts.copy()
    for _ in range(steps):
        v = v + rate * ((adj @ v) / deg[:, None] - v)
        for _ in range(3):
            d = sdf(v)
            g = np.stack([(sdf(v + h * np.eye(3)[i]) - d) / h for i in range(3)], axis=1)
            v = v - (d / np.maximum(np.sum(g * g, axis=1), 1e-12))[:, None] * g
    return v
