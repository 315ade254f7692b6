"""Triangle meshes: representation, ascii IO, boundaries, graph geodesics and sampling."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import DegenerateFace, NonManifold, ParseError

AREA_TOLERANCE = 1e-12


def as_vertex_set(indices, n_vertices: int | None = None) -> np.ndarray:
    """Return `indices` as a sorted, unique int64 array, range-checked if `n_vertices` is given."""
    idx = np.unique(np.asarray(indices, dtype=np.int64).ravel())
    if n_vertices is not None and idx.size and (idx[0] < 0 or idx[-1] >= n_vertices):
        raise IndexError("vertex index out of range")
    return idx


def triangle_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    p0, p1, p2 = (vertices[faces[:, i]] for i in range(3))
    return 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable triangle mesh.

    Construction validates the face indices, rejects faces with repeated
    vertices or vanishing area, and rejects edges shared by more than two
    faces. Derived structures (edges, adjacency, boundary) are computed
    lazily and cached.
    """

    vertices: np.ndarray
    faces: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        f = np.array(self.faces, dtype=np.int64)
        if f.size == 0:
            f = f.reshape(0, 3)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError("vertices must have shape (n, 3)")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError("faces must have shape (m, 3)")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite vertex coordinates")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise IndexError("face index out of range")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise DegenerateFace("face with a repeated vertex index")
        if len(f):
            min_area = AREA_TOLERANCE * self.bbox_diagonal**2
            bad = np.flatnonzero(self.face_areas <= min_area)
            if bad.size:
                raise DegenerateFace(f"{bad.size} face(s) with vanishing area, first is {bad[0]}")
            counts = self._edge_face_counts
            if counts.max() > 2:
                raise NonManifold(f"{int(np.sum(counts > 2))} edge(s) shared by more than two faces")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def bbox_diagonal(self) -> float:
        if not len(self.vertices):
            return 0.0
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))

    @cached_property
    def face_areas(self) -> np.ndarray:
        return triangle_areas(self.vertices, self.faces)

    @cached_property
    def _half_edges(self) -> np.ndarray:
        f = self.faces
        return np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])

    @cached_property
    def _edge_table(self):
        he = np.sort(self._half_edges, axis=1)
        edges, inverse, counts = np.unique(he, axis=0, return_inverse=True, return_counts=True)
        return edges, counts

    @property
    def _edge_face_counts(self) -> np.ndarray:
        return self._edge_table[1]

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as (e, 2) array with i < j."""
        return self._edge_table[0]

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric edge-graph adjacency weighted by Euclidean edge length."""
        e = self.edges
        n = self.n_vertices
        w = self.edge_lengths
        a = sparse.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
            shape=(n, n),
        )
        return a.tocsr()

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        edges, counts = self._edge_table
        return edges[counts == 1]

    def scaled(self, s: float) -> "TriMesh":
        return TriMesh(self.vertices * s, self.faces, name=self.name)

    def transformed(self, rotation: np.ndarray, translation=(0.0, 0.0, 0.0)) -> "TriMesh":
        return TriMesh(self.vertices @ np.asarray(rotation).T + np.asarray(translation), self.faces, name=self.name)

    def checksum(self) -> str:
        """Short content hash, stable across runs, used to tag exported records."""
        import hashlib

        h = hashlib.sha1()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.faces).tobytes())
        return h.hexdigest()[:16]


def boundary_vertices(mesh: TriMesh) -> np.ndarray:
    """Vertices incident to an edge that has exactly one adjacent face."""
    return as_vertex_set(mesh.boundary_edges)


def total_area(mesh: TriMesh) -> float:
    return float(mesh.face_areas.sum())


def connected_components(mesh: TriMesh) -> np.ndarray:
    """Component label per vertex of the edge graph."""
    _, labels = csgraph.connected_components(mesh.adjacency, directed=False)
    return labels


def graph_geodesics(mesh: TriMesh, source) -> np.ndarray:
    """Shortest-path distances along mesh edges from `source`.

    `source` may be a single vertex index or a sequence of indices, in which
    case the distance to the nearest source is returned. Unreachable
    vertices get ``inf``.
    """
    src = np.atleast_1d(np.asarray(source, dtype=np.int64))
    d = csgraph.dijkstra(mesh.adjacency, directed=False, indices=src, min_only=True)
    return np.asarray(d, dtype=np.float64)


def geodesic_tree(mesh: TriMesh, source: int):
    """Distances and shortest-path-tree predecessors (-9999 for roots/unreachable)."""
    d, pred = csgraph.dijkstra(mesh.adjacency, directed=False, indices=int(source), return_predecessors=True)
    return d, pred


def farthest_point_samples(mesh: TriMesh, n: int, seed: int = 0) -> list[int]:
    """Greedy farthest point sampling under graph-geodesic distance.

    The first sample is vertex ``seed mod n_vertices``; each following sample
    maximizes the distance to the samples chosen so far (lowest index wins
    ties). The result for ``n`` is always a prefix of the result for ``n + 1``.
    """
    nv = mesh.n_vertices
    if n > nv:
        raise ValueError(f"cannot draw {n} samples from {nv} vertices")
    if n <= 0:
        return []
    chosen = [int(seed) % nv]
    dist = graph_geodesics(mesh, chosen[0])
    taken = np.zeros(nv, dtype=bool)
    taken[chosen[0]] = True
    while len(chosen) < n:
        cand = np.where(taken, -1.0, dist)
        nxt = int(np.argmax(cand))
        chosen.append(nxt)
        taken[nxt] = True
        dist = np.minimum(dist, graph_geodesics(mesh, nxt))
    return chosen


def submesh(mesh: TriMesh, keep: np.ndarray) -> tuple[TriMesh, np.ndarray]:
    """Induced submesh on the boolean vertex mask `keep`.

    Faces are kept when all three vertices are kept; vertices left without a
    face are dropped. Returns the submesh and the map from its vertices to
    `mesh` vertices.
    """
    keep = np.asarray(keep, dtype=bool)
    fmask = keep[mesh.faces].all(axis=1)
    faces = mesh.faces[fmask]
    used = np.unique(faces)
    remap = -np.ones(mesh.n_vertices, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriMesh(mesh.vertices[used], remap[faces], name=mesh.name), used


# --------------------------------------------------------------------------- IO


def _tokens(path):
    with open(path, "r") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                yield line


def _fan(poly):
    return [(poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1)]


def _read_off(path):
    lines = list(_tokens(path))
    if not lines or not lines[0].startswith("OFF"):
        raise ParseError("missing OFF header")
    head = lines[0][3:].split()
    pos = 1
    try:
        if head:
            counts = head
        else:
            counts = lines[1].split()
            pos = 2
        nv, nf = int(counts[0]), int(counts[1])
        verts = [list(map(float, lines[pos + i].split()[:3])) for i in range(nv)]
        faces = []
        for i in range(nf):
            tok = lines[pos + nv + i].split()
            k = int(tok[0])
            poly = [int(t) for t in tok[1 : 1 + k]]
            if len(poly) != k or k < 3:
                raise ParseError(f"bad face line {i}")
            faces.extend(_fan(poly))
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed OFF file: {exc}") from exc
    if any(len(v) != 3 for v in verts):
        raise ParseError("vertex line with fewer than 3 coordinates")
    return verts, faces


def _read_obj(path):
    verts, faces = [], []
    try:
        for line in _tokens(path):
            tok = line.split()
            if tok[0] == "v":
                verts.append([float(t) for t in tok[1:4]])
                if len(verts[-1]) != 3:
                    raise ParseError("vertex with fewer than 3 coordinates")
            elif tok[0] == "f":
                poly = []
                for t in tok[1:]:
                    i = int(t.split("/")[0])
                    if i == 0:
                        raise ParseError("OBJ face index 0 (indices are 1-based)")
                    poly.append(i - 1 if i > 0 else len(verts) + i)
                if len(poly) < 3:
                    raise ParseError("face with fewer than 3 vertices")
                faces.extend(_fan(poly))
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed OBJ file: {exc}") from exc
    return verts, faces


def _read_ply(path):
    with open(path, "r", errors="replace") as fh:
        lines = [ln.strip() for ln in fh]
    if not lines or lines[0] != "ply":
        raise ParseError("missing ply magic")
    elements = []
    fmt = None
    i = 1
    try:
        while lines[i] != "end_header":
            tok = lines[i].split()
            if tok and tok[0] == "format":
                fmt = tok[1]
            elif tok and tok[0] == "element":
                elements.append([tok[1], int(tok[2]), []])
            elif tok and tok[0] == "property":
                elements[-1][2].append(tok[1:])
            i += 1
    except IndexError as exc:
        raise ParseError("truncated ply header") from exc
    if fmt != "ascii":
        raise ParseError(f"unsupported ply format {fmt!r} (ascii only)")
    body = [ln for ln in lines[i + 1 :] if ln]
    verts, faces = [], []
    pos = 0
    try:
        for name, count, props in elements:
            rows = body[pos : pos + count]
            if len(rows) != count:
                raise ParseError(f"element {name}: expected {count} rows")
            pos += count
            if name == "vertex":
                names = [p[-1] for p in props]
                ix = [names.index(c) for c in ("x", "y", "z")]
                for r in rows:
                    tok = r.split()
                    verts.append([float(tok[j]) for j in ix])
            elif name == "face":
                if props[0][0] != "list":
                    raise ParseError("face element without a list property")
                for r in rows:
                    tok = r.split()
                    k = int(tok[0])
                    poly = [int(t) for t in tok[1 : 1 + k]]
                    if len(poly) != k or k < 3:
                        raise ParseError("bad face row")
                    faces.extend(_fan(poly))
    except (ValueError, IndexError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed ply body: {exc}") from exc
    return verts, faces


_READERS = {".off": _read_off, ".obj": _read_obj, ".ply": _read_ply}


def load_mesh(path) -> TriMesh:
    """Read an ascii OFF, OBJ or PLY triangle mesh; vertex order is preserved."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext not in _READERS:
        raise ParseError(f"unsupported extension {ext!r}")
    verts, faces = _READERS[ext](path)
    v = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if f.size and (f.min() < 0 or f.max() >= len(v)):
        raise ParseError("face index out of range")
    return TriMesh(v, f, name=os.path.splitext(os.path.basename(str(path)))[0])


def save_off(mesh: TriMesh, path) -> None:
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_faces} 0\n")
        for x, y, z in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in mesh.faces:
            fh.write(f"3 {a} {b} {c}\n")


def colormap_table() -> np.ndarray:
    """The fixed 256 x 3 uint8 colormap used for scalar-field exports."""
    text = resources.files("spectralign").joinpath("data/colormap256.txt").read_text()
    table = np.array([[int(t) for t in ln.split()] for ln in text.splitlines() if ln.strip()], dtype=np.uint8)
    assert table.shape == (256, 3)
    return table


def scalar_to_rgb(field) -> np.ndarray:
    field = np.asarray(field, dtype=np.float64)
    lo, hi = field.min(), field.max()
    if hi > lo:
        t = (field - lo) / (hi - lo)
    else:
        t = np.zeros_like(field)
    idx = np.clip(np.round(t * 255).astype(int), 0, 255)
    return colormap_table()[idx]


def save_mesh_with_scalar(mesh: TriMesh, field, path) -> None:
    """Write an ascii PLY with per-vertex colors from a min-max normalized scalar field."""
    field = np.asarray(field, dtype=np.float64)
    if field.shape != (mesh.n_vertices,):
        raise ValueError("field length must equal the number of vertices")
    rgb = scalar_to_rgb(field)
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {mesh.n_vertices}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        fh.write(f"element face {mesh.n_faces}\n")
        fh.write("property list uchar int vertex_indices\nend_header\n")
        for (x, y, z), (r, g, b) in zip(mesh.vertices, rgb):
            fh.write(f"{x:.9g} {y:.9g} {z:.9g} {r} {g} {b}\n")
        for a, b, c in mesh.faces:
            fh.write(f"3 {a} {b} {c}\n")
