"""Area-weighted IoU, cumulative IoU curves, the benchmark runner and numerical property checks."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import align
from .config import Config
from .eigen import smallest_eigenpairs
from .errors import EmptyUnion, SpectralignError
from .mesh import TriMesh, as_vertex_set, total_area
from .operators import OperatorPair, gaussian_curvature, lumped_mass, operator_pair

log = logging.getLogger(__name__)

CURVE_T = np.round(np.arange(21) * 0.05, 2)


def iou(predicted, truth, mass) -> float:
    """Mass-weighted intersection over union of two vertex sets of the same mesh."""
    mass = np.asarray(mass, dtype=np.float64)
    p = np.zeros(len(mass), dtype=bool)
    t = np.zeros(len(mass), dtype=bool)
    p[as_vertex_set(predicted, len(mass))] = True
    t[as_vertex_set(truth, len(mass))] = True
    union = mass[p | t].sum()
    if not (p | t).any():
        raise EmptyUnion("both vertex sets are empty")
    return float(mass[p & t].sum() / union)


def cumulative_curve(ious, ts=CURVE_T) -> np.ndarray:
    """Fraction of cases whose IoU is at least ``t``, for each threshold ``t``."""
    ious = np.asarray(ious, dtype=np.float64)
    if ious.size and (ious.min() < 0 or ious.max() > 1):
        raise ValueError("IoU values must lie in [0, 1]")
    if ious.size == 0:
        return np.ones(len(ts))
    # thresholds are rounded to 2 decimals; compare with a little slack for float noise
    return np.array([np.mean(ious >= t - 1e-12) for t in ts])


@dataclass
class CaseResult:
    case_id: int
    iou: float
    cost: float
    best_init: int
    n_predicted: int
    wall_ms: float = 0.0
    error: str | None = None
    starts: list = field(default_factory=list)


@dataclass
class EvalReport:
    cases: list
    config: dict
    label: str = ""

    @property
    def ious(self) -> np.ndarray:
        return np.array([c.iou for c in self.cases])

    @property
    def mean_iou(self) -> float:
        return float(np.mean(self.ious)) if self.cases else 0.0

    @property
    def curve(self) -> np.ndarray:
        return cumulative_curve(self.ious)

    def to_dict(self) -> dict:
        """Deterministic content: no wall-clock quantities."""
        return {
            "label": self.label,
            "config": self.config,
            "mean_iou": round(self.mean_iou, 12),
            "curve": [[float(t), round(float(y), 12)] for t, y in zip(CURVE_T, self.curve)],
            "cases": [
                {
                    "case_id": c.case_id,
                    "iou": round(c.iou, 12),
                    "final_cost": round(c.cost, 12) if np.isfinite(c.cost) else None,
                    "best_init": c.best_init,
                    "n_predicted": c.n_predicted,
                    "error": c.error,
                    "starts": c.starts,
                }
                for c in self.cases
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def timings(self) -> dict:
        return {"label": self.label, "wall_ms": {str(c.case_id): round(c.wall_ms, 1) for c in self.cases}}

    def write(self, out_dir, stem: str = "report", figure: bool = True) -> dict:
        """Write the JSON report, the curve CSV, per-case CSV, timings and (optionally) a figure."""
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            "report": os.path.join(out_dir, f"{stem}.json"),
            "curve": os.path.join(out_dir, f"{stem}_curve.csv"),
            "cases": os.path.join(out_dir, f"{stem}_cases.csv"),
            "timings": os.path.join(out_dir, f"{stem}_timings.json"),
        }
        with open(paths["report"], "w") as fh:
            fh.write(self.dumps())
        with open(paths["curve"], "w") as fh:
            fh.write("t,fraction\n")
            for t, y in zip(CURVE_T, self.curve):
                fh.write(f"{t:.2f},{y:.6f}\n")
        with open(paths["cases"], "w") as fh:
            fh.write("case_id,iou,final_cost,best_init,error\n")
            for c in self.cases:
                fh.write(f"{c.case_id},{c.iou:.6f},{c.cost:.9g},{c.best_init},{c.error or ''}\n")
        with open(paths["timings"], "w") as fh:
            json.dump(self.timings(), fh, indent=1, sort_keys=True)
            fh.write("\n")
        if figure:
            from .plotting import plot_cumulative

            paths["figure"] = os.path.join(out_dir, f"{stem}_curve.png")
            plot_cumulative({self.label or "method": self.ious}, paths["figure"])
        return paths


def localize_case(full: TriMesh, partial: TriMesh, config: Config):
    """Target spectra, initializations and multi-start localization of one partial shape."""
    problem = align.build_problem(
        full,
        partial,
        k_regular=config.k_regular,
        k_si=config.k_scale_invariant,
        alpha=config.alpha,
        eps=config.eps,
        reparam=config.reparam,
        c_factor=config.c_factor,
    )
    inits = align.make_initializations(
        full, total_area(full), n_samples=config.n_fps, seed=config.seed, reparam=config.reparam, c=problem.c
    )
    best, results = align.localize(problem, inits, parallelism=config.parallelism, max_iter=config.max_iter)
    return problem, best, results


def run_benchmark(full: TriMesh, cases, config: Config, label: str = "", out_dir=None) -> EvalReport:
    """Localize every case and score it against its ground truth.

    `cases` is a sequence of ``(case_id, partial_mesh, ground_truth)``.
    A case that raises scores IoU 0 and keeps its error message.
    """
    mass = lumped_mass(full)
    out = []
    for case_id, partial, truth in cases:
        t0 = time.perf_counter()
        try:
            _, best, results = localize_case(full, partial, config)
            score = iou(best.region, truth, mass)
            rec = CaseResult(
                case_id,
                score,
                best.cost,
                best.init_id,
                len(best.region),
                starts=[
                    {"init_id": r.init_id, "final_cost": round(r.cost, 12), "iterations": r.iterations,
                     "stalled": r.stalled}
                    for r in results
                ],
            )
        except SpectralignError as exc:
            log.warning("case %s failed: %s", case_id, exc)
            rec = CaseResult(case_id, 0.0, float("nan"), -1, 0, error=f"{type(exc).__name__}: {exc}")
        rec.wall_ms = 1e3 * (time.perf_counter() - t0)
        log.info("case %s: IoU %.3f (%.1f s)", case_id, rec.iou, rec.wall_ms / 1e3)
        out.append(rec)
    report = EvalReport(out, config.to_dict(), label)
    if out_dir is not None:
        report.write(out_dir, stem=f"report_{label}" if label else "report")
    return report


# ------------------------------------------------------------------ property checks


def si_pair_with_curvature(mesh: TriMesh, curvature: np.ndarray, alpha: float, eps: float) -> OperatorPair:
    base = operator_pair(mesh, "regular")
    mass = (np.abs(curvature) + eps) ** alpha * base.mass
    return OperatorPair(base.stiffness, mass, base.metric.__class__("scale_invariant"), alpha, eps)


def perturbation_check(mesh: TriMesh, p: int, deltas, indices=range(10, 31), eps: float = 1e-8):
    """Response of the fully scale-invariant spectrum to a curvature bump at vertex `p`.

    For each ``delta`` the smoothed curvature at `p` is raised by ``delta``
    and the relative shifts ``(lam_i - mu_i) / lam_i`` (``mu`` perturbed)
    are averaged over the 1-based `indices`. Returns rows of
    ``(delta, dK, mean_shift, ratio)`` with ``dK = delta / trace(|K| A)`` and
    ``ratio = mean_shift / (A_p dK)``.
    """
    indices = np.asarray(list(indices))
    k = int(indices.max())
    K = gaussian_curvature(mesh, smooth=True).values
    A = lumped_mass(mesh)
    base = smallest_eigenpairs(si_pair_with_curvature(mesh, K, 1.0, eps), k).eigenvalues
    total = float(np.sum((np.abs(K) + eps) * A))
    rows = []
    for delta in deltas:
        if delta == 0:
            rows.append((0.0, 0.0, 0.0, float("nan")))
            continue
        Kp = K.copy()
        Kp[p] += delta
        pert = smallest_eigenpairs(si_pair_with_curvature(mesh, Kp, 1.0, eps), k).eigenvalues
        sel = indices - 1
        shift = float(np.mean((base[sel] - pert[sel]) / base[sel]))
        dK = delta / total
        rows.append((float(delta), dK, shift, shift / (A[p] * dK)))
    return rows


def scale_invariance_check(mesh: TriMesh, s: float = 3.0, k: int = 20, eps: float = 1e-8):
    """Eigenvalues of the regular and fully scale-invariant pairs of `mesh` and of `mesh` scaled by `s`."""
    big = mesh.scaled(s)
    out = {}
    for metric in ("regular", "si"):
        a = smallest_eigenpairs(operator_pair(mesh, metric, 1.0, eps), k).eigenvalues
        b = smallest_eigenpairs(operator_pair(big, metric, 1.0, eps), k).eigenvalues
        out[metric] = (a, b)
    return out


def weyl_ratios(mesh: TriMesh, indices=range(20, 41), eps: float = 1e-8) -> np.ndarray:
    """``lam_i trace(|K| A) / (2 pi i)`` for the fully scale-invariant spectrum."""
    indices = np.asarray(list(indices))
    ops = operator_pair(mesh, "si", 1.0, eps)
    K = gaussian_curvature(mesh, smooth=True).values
    total = float(np.sum(np.abs(K) * lumped_mass(mesh)))
    lam = smallest_eigenpairs(ops, int(indices.max())).eigenvalues
    return lam[indices - 1] * total / (2 * np.pi * indices)
