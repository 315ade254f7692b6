"""Synthetic partial shapes: random-plane cuts and geodesic-ball cuts with ground truth."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCut, GenerationExhausted
from .mesh import (
    TriMesh,
    as_vertex_set,
    connected_components,
    farthest_point_samples,
    graph_geodesics,
    save_off,
    submesh,
)

MIN_VERTICES = 50
MAX_FRACTION = 0.95
BALL_FRACTION_RANGE = (0.2, 0.7)
N_CENTER_SAMPLES = 10
MAX_RESAMPLES = 20


@dataclass(frozen=True)
class CutSpec:
    kind: str
    normal: tuple | None = None
    offset: float | None = None
    center: int | None = None
    radius_fraction: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind == "plane":
            n = np.asarray(self.normal, dtype=float)
            if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-9:
                raise ValueError("plane normal must be a unit 3-vector")
        elif self.kind == "ball":
            if self.center is None or self.radius_fraction is None or not self.radius_fraction > 0:
                raise ValueError("ball cut needs a center and a positive radius fraction")
        else:
            raise ValueError(f"unknown cut kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "seed": self.seed}
        if self.kind == "plane":
            d.update(normal=[float(x) for x in self.normal], offset=float(self.offset))
        else:
            d.update(center=int(self.center), radius_fraction=float(self.radius_fraction))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CutSpec":
        d = dict(d)
        if "normal" in d and d["normal"] is not None:
            d["normal"] = tuple(d["normal"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class CutResult:
    partial: TriMesh
    ground_truth: np.ndarray  # vertex set on the full mesh
    vertex_map: np.ndarray  # partial vertex -> full vertex


def _finish_cut(mesh: TriMesh, keep: np.ndarray) -> CutResult:
    n = mesh.n_vertices
    if keep.sum() < 3:
        raise DegenerateCut("cut keeps fewer than 3 vertices")
    try:
        part, vmap = submesh(mesh, keep)
    except ValueError as exc:
        raise DegenerateCut(f"cut produced an invalid submesh: {exc}") from exc
    if part.n_faces == 0:
        raise DegenerateCut("cut keeps no face")
    labels = connected_components(part)
    if labels.max() > 0:
        big = np.argmax(np.bincount(labels))
        part, sub = submesh(part, labels == big)
        vmap = vmap[sub]
    m = part.n_vertices
    if m < MIN_VERTICES or m > MAX_FRACTION * n:
        raise DegenerateCut(f"partial shape has {m} of {n} vertices, outside [{MIN_VERTICES}, {MAX_FRACTION}n]")
    return CutResult(part, as_vertex_set(vmap, n), vmap)


def plane_cut(mesh: TriMesh, spec: CutSpec) -> CutResult:
    """Keep the vertices with ``<x - center, normal> >= offset * bbox_diagonal``."""
    center = 0.5 * (mesh.vertices.min(0) + mesh.vertices.max(0))
    side = (mesh.vertices - center) @ np.asarray(spec.normal, dtype=float)
    keep = side >= spec.offset * mesh.bbox_diagonal
    if keep.all() or not keep.any():
        raise DegenerateCut("plane does not separate the mesh")
    return _finish_cut(mesh, keep)


def shape_radius(mesh: TriMesh, n_samples: int = N_CENTER_SAMPLES, seed: int = 0) -> float:
    """Half the graph-geodesic diameter, estimated over farthest point samples."""
    samples = farthest_point_samples(mesh, min(n_samples, mesh.n_vertices), seed)
    d = graph_geodesics(mesh, samples[0])
    best = np.max(d[np.isfinite(d)])
    for s in samples[1:]:
        d = graph_geodesics(mesh, s)
        best = max(best, np.max(d[np.isfinite(d)]))
    return 0.5 * float(best)


def ball_cut(mesh: TriMesh, spec: CutSpec, radius: float | None = None) -> CutResult:
    """Keep vertices within ``radius_fraction * shape_radius`` graph distance of the center."""
    if not 0 <= spec.center < mesh.n_vertices:
        raise IndexError("ball center out of range")
    if radius is None:
        radius = shape_radius(mesh)
    d = graph_geodesics(mesh, spec.center)
    keep = d <= spec.radius_fraction * radius
    return _finish_cut(mesh, keep)


def cut(mesh: TriMesh, spec: CutSpec, radius: float | None = None) -> CutResult:
    return plane_cut(mesh, spec) if spec.kind == "plane" else ball_cut(mesh, spec, radius)


def generate_suite(
    mesh: TriMesh, n_cuts: int, kind: str = "ball", seed: int = 0, fraction_range=BALL_FRACTION_RANGE
):
    """Draw `n_cuts` valid cuts, resampling each degenerate draw up to 20 times.

    Plane normals are uniform on the sphere with offsets uniform in
    ``[-0.3, 0.3]`` (times the bounding-box diagonal). Ball centers are
    drawn from 10 farthest point samples and radius fractions uniformly
    from `fraction_range`.
    """
    if n_cuts < 1:
        raise ValueError("n_cuts must be at least 1")
    if kind not in ("plane", "ball"):
        raise ValueError(f"unknown cut kind {kind!r}")
    rng = np.random.default_rng(seed)
    if kind == "ball":
        centers = farthest_point_samples(mesh, min(N_CENTER_SAMPLES, mesh.n_vertices), seed)
        radius = shape_radius(mesh)
    suite = []
    for i in range(n_cuts):
        for attempt in range(MAX_RESAMPLES + 1):
            if kind == "plane":
                n = rng.standard_normal(3)
                n /= np.linalg.norm(n)
                spec = CutSpec("plane", normal=tuple(n), offset=float(rng.uniform(-0.3, 0.3)), seed=seed)
            else:
                spec = CutSpec(
                    "ball",
                    center=int(centers[rng.integers(len(centers))]),
                    radius_fraction=float(rng.uniform(*fraction_range)),
                    seed=seed,
                )
            try:
                suite.append((spec, cut(mesh, spec, radius if kind == "ball" else None)))
                break
            except DegenerateCut:
                continue
        else:
            raise GenerationExhausted(f"cut {i}: no valid {kind} cut after {MAX_RESAMPLES} resamples")
    return suite


def write_suite(suite, full_path, out_dir, seed: int = 0) -> str:
    """Save partial meshes (OFF) and a JSON manifest; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    cases = []
    for i, (spec, res) in enumerate(suite):
        name = f"cut_{i:03d}.off"
        save_off(res.partial, os.path.join(out_dir, name))
        cases.append(
            {
                "id": i,
                "spec": spec.to_dict(),
                "partial": name,
                "ground_truth": [int(x) for x in res.ground_truth],
                "vertex_map": [int(x) for x in res.vertex_map],
            }
        )
    manifest = {"full": os.path.abspath(str(full_path)), "seed": seed, "cases": cases}
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return path
