"""Command-line entry point: spectrum, localize, gencuts and eval subcommands."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import datagen, evaluation
from .config import Config
from .eigen import export_record, smallest_eigenpairs
from .errors import SpectralignError
from .mesh import boundary_vertices, load_mesh, save_mesh_with_scalar
from .operators import operator_pair, write_coo

log = logging.getLogger("spectralign")

REPARAMS = {"sat": "saturation", "saturation": "saturation", "square": "square"}


def _setup_logging():
    level = os.environ.get("SPECTRALIGN_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def _config(args) -> Config:
    base = Config.load(args.config) if getattr(args, "config", None) else Config()
    return base.override(
        k_per_metric=getattr(args, "k", None),
        alpha=args.alpha,
        eps=args.eps,
        reparam=REPARAMS.get(args.reparam) if getattr(args, "reparam", None) else None,
        seed=args.seed,
        parallelism=getattr(args, "jobs", None),
        max_iter=getattr(args, "max_iter", None),
        ablation=getattr(args, "ablation", None) if getattr(args, "ablation", None) != "both" else None,
    )


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _read_indices(path) -> np.ndarray:
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = text.split()
    return np.array([int(x) for x in data], dtype=np.int64)


def cmd_spectrum(args) -> int:
    mesh = load_mesh(args.mesh)
    ops = operator_pair(mesh, args.metric, args.alpha if args.alpha is not None else 0.33,
                        args.eps if args.eps is not None else 1e-8)
    dirichlet = boundary_vertices(mesh) if args.dirichlet_boundary else None
    spec = smallest_eigenpairs(ops, args.k, dirichlet)
    record = export_record(spec, mesh.checksum())
    record["dirichlet_boundary"] = bool(args.dirichlet_boundary)
    if args.dump_matrices:
        os.makedirs(args.dump_matrices, exist_ok=True)
        write_coo(ops.stiffness, os.path.join(args.dump_matrices, "stiffness.coo"))
        np.savetxt(os.path.join(args.dump_matrices, "mass.txt"), ops.mass, fmt="%.17g")
    text = json.dumps(record, indent=1, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_localize(args) -> int:
    cfg = _config(args)
    full = load_mesh(args.full)
    partial = load_mesh(args.partial)
    truth = _read_indices(args.truth) if args.truth else None
    log.info("full %d vertices, partial %d vertices", full.n_vertices, partial.n_vertices)
    t0 = time.perf_counter()
    problem, best, results = evaluation.localize_case(full, partial, cfg)
    wall = time.perf_counter() - t0
    record = {
        "full": {"path": os.path.basename(args.full), "checksum": full.checksum()},
        "partial": {"path": os.path.basename(args.partial), "checksum": partial.checksum()},
        "config": cfg.to_dict(),
        "k_regular": cfg.k_regular,
        "k_scale_invariant": cfg.k_scale_invariant,
        "c": problem.c,
        "threshold": problem.threshold,
        "starts": [
            {"init_id": r.init_id, "final_cost": r.cost, "iterations": r.iterations, "stalled": r.stalled}
            for r in results
        ],
        "best_init": best.init_id,
        "final_cost": best.cost,
        "region": [int(x) for x in best.region],
    }
    if truth is not None:
        record["iou"] = evaluation.iou(best.region, truth, problem.regular.mass)
    os.makedirs(args.out, exist_ok=True)
    _write_json(record, os.path.join(args.out, "result.json"))
    _write_json(
        {"total_ms": round(1e3 * wall, 1), "per_start_ms": {str(r.init_id): round(1e3 * r.wall_time, 1) for r in results}},
        os.path.join(args.out, "timings.json"),
    )
    q = problem.potential(best.potential).values()
    save_mesh_with_scalar(full, np.minimum(q / problem.c, 1.0), os.path.join(args.out, "potential.ply"))
    indicator = np.zeros(full.n_vertices)
    indicator[best.region] = 1.0
    save_mesh_with_scalar(full, indicator, os.path.join(args.out, "region.ply"))
    summary = f"best start {best.init_id}, cost {best.cost:.6g}, {len(best.region)} vertices"
    if truth is not None:
        summary += f", IoU {record['iou']:.4f}"
    print(summary)
    return 0


def cmd_gencuts(args) -> int:
    mesh = load_mesh(args.mesh)
    suite = datagen.generate_suite(mesh, args.n, args.kind, args.seed or 0)
    path = datagen.write_suite(suite, args.mesh, args.out, args.seed or 0)
    print(path)
    return 0


def _load_manifest(path):
    with open(path) as fh:
        manifest = json.load(fh)
    cases = manifest.get("cases") or []
    if not cases:
        raise ValueError(f"manifest {path} lists no cases")
    root = os.path.dirname(os.path.abspath(path))
    full_path = manifest["full"]
    if not os.path.isabs(full_path):
        full_path = os.path.join(root, full_path)
    full = load_mesh(full_path)
    out = []
    for case in cases:
        partial = load_mesh(os.path.join(root, case["partial"]))
        out.append((int(case["id"]), partial, np.asarray(case["ground_truth"], dtype=np.int64)))
    return full, out


def cmd_eval(args) -> int:
    from .plotting import plot_cumulative

    full, cases = _load_manifest(args.manifest)
    cfg = _config(args)
    labels = ["dual", "single"] if args.ablation == "both" else [cfg.ablation]
    series = {}
    os.makedirs(args.out, exist_ok=True)
    for label in labels:
        report = evaluation.run_benchmark(full, cases, cfg.override(ablation=label), label=label)
        report.write(args.out, stem=f"report_{label}", figure=False)
        series[label] = report.ious
        print(f"{label}: mean IoU {report.mean_iou:.4f} over {len(report.cases)} cases")
    plot_cumulative(series, os.path.join(args.out, "cumulative_iou.png"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, help="curvature exponent of the scale-invariant metric")
    common.add_argument("--eps", type=float, help="curvature regularizer")
    common.add_argument("--seed", type=int)

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--config", help="JSON config file; flags override its values")
    run.add_argument("-k", type=int, dest="k", help="eigenvalues per metric")
    run.add_argument("--reparam", choices=["square", "sat"])
    run.add_argument("--jobs", type=int, help="parallel starts")
    run.add_argument("--max-iter", type=int, dest="max_iter")

    parser = argparse.ArgumentParser(prog="spectralign", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="smallest eigenpairs of one metric")
    p.add_argument("mesh")
    p.add_argument("--metric", choices=["regular", "si"], default="regular")
    p.add_argument("-k", type=int, default=20)
    p.add_argument("--dirichlet-boundary", action="store_true")
    p.add_argument("--dump-matrices", metavar="DIR")
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("localize", parents=[common, run], help="locate a partial shape in a full one")
    p.add_argument("full")
    p.add_argument("partial")
    p.add_argument("--ablation", choices=["dual", "single"])
    p.add_argument("--truth", help="ground-truth vertex indices on the full mesh (JSON list or whitespace)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("gencuts", parents=[common], help="generate partial shapes with ground truth")
    p.add_argument("mesh")
    p.add_argument("-n", type=int, default=10)
    p.add_argument("--kind", choices=["ball", "plane"], default="ball")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gencuts)

    p = sub.add_parser("eval", parents=[common, run], help="benchmark a cut manifest")
    p.add_argument("manifest")
    p.add_argument("--ablation", choices=["dual", "single", "both"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SpectralignError, ValueError, KeyError, OSError) as exc:
        print(f"spectralign {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
