"""Dual-metric spectrum alignment: cost, gradient, trust-region minimizer and multi-start localization."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .eigen import ReducedPencil, smallest_eigenpairs
from .errors import AllStalled, DegenerateCut
from .hamiltonian import SATURATION, SQUARE, Potential, _check_reparam, reparam_derivative, reparam_preimage
from .mesh import TriMesh, boundary_vertices, farthest_point_samples, graph_geodesics, total_area
from .operators import OperatorPair, operator_pair

log = logging.getLogger(__name__)


def weighted_sq_distance(a, b) -> float:
    """``sum_i (a_i - b_i)^2 / b_i^2``: squared distance with high frequencies down-weighted."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("spectra must have equal length")
    if np.any(b <= 0):
        raise ValueError("target values must be strictly positive")
    return float(np.sum((a - b) ** 2 / b**2))


class _Term:
    """One metric's contribution: pencil of the full shape plus target eigenvalues."""

    def __init__(self, ops: OperatorPair, targets, weight: float):
        self.ops = ops
        self.targets = np.asarray(targets, dtype=np.float64)
        self.weight = float(weight)
        self.pencil = ReducedPencil(ops.stiffness, ops.mass)

    @property
    def k(self) -> int:
        return len(self.targets)

    @property
    def active(self) -> bool:
        return self.weight != 0.0 and self.k > 0


@dataclass(eq=False)
class AlignmentProblem:
    """Full-shape operators of both metrics and the partial shape's target spectra.

    A single potential ``q(v)`` enters both Hamiltonians. Setting
    ``weights[1] = 0`` (or passing no scale-invariant targets) reduces the
    cost to the regular spectrum alone.
    """

    regular: OperatorPair
    scale_invariant: OperatorPair | None
    mu: np.ndarray
    mu_si: np.ndarray
    reparam: str = SATURATION
    c: float = 1.0
    weights: tuple = (1.0, 1.0)

    def __post_init__(self):
        self.reparam = _check_reparam(self.reparam)
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.mu_si = np.asarray(self.mu_si if self.mu_si is not None else [], dtype=np.float64)
        for t in (self.mu, self.mu_si):
            if t.size and (np.any(t <= 0) or np.any(np.diff(t) < 0)):
                raise ValueError("target spectra must be ascending and positive")
        if self.mu.size + self.mu_si.size == 0:
            raise ValueError("need at least one target eigenvalue")
        self._terms = [_Term(self.regular, self.mu, self.weights[0])]
        if self.scale_invariant is not None and self.mu_si.size:
            self._terms.append(_Term(self.scale_invariant, self.mu_si, self.weights[1]))

    @property
    def n(self) -> int:
        return self.regular.n

    @property
    def k_total(self) -> int:
        return sum(t.k for t in self._terms if t.active)

    def potential(self, v) -> Potential:
        return Potential(v, self.reparam, self.c)

    def spectra(self, v, warm=None):
        """Hamiltonian eigenvalues and y-bases of each active term at raw potential `v`."""
        q = self.potential(v).values()
        out = []
        for i, term in enumerate(self._terms):
            if not term.active:
                out.append(None)
                continue
            v0 = None if warm is None or warm[i] is None else warm[i]
            vals, _, y = term.pencil.solve(term.k, potential=q, v0=v0)
            out.append((vals, y))
        return out

    @property
    def threshold(self) -> float:
        """Largest target eigenvalue over the active terms."""
        return float(max(t.targets[-1] for t in self._terms if t.active))

    def region(self, v) -> np.ndarray:
        return region_from_potential(self.potential(v).values(), self.threshold)


def cost_and_grad(problem: AlignmentProblem, v, warm=None, return_spectra: bool = False):
    """Alignment cost and its gradient with respect to the raw potential `v`.

    Per metric: ``sum_i (lam_i - mu_i)^2 / mu_i^2`` with gradient
    ``2 sum_i (lam_i - mu_i) / mu_i^2 * M phi_i^2 * q'(v)``.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (problem.n,):
        raise ValueError("potential length must equal the number of full-shape vertices")
    spectra = problem.spectra(v, warm)
    dq = reparam_derivative(problem.potential(v))
    f = 0.0
    g = np.zeros(problem.n)
    for term, sp in zip(problem._terms, spectra):
        if sp is None:
            continue
        lam, y = sp
        mu = term.targets
        f += term.weight * float(np.sum((lam - mu) ** 2 / mu**2))
        coef = 2.0 * term.weight * (lam - mu) / mu**2
        # y = M^1/2 phi on free vertices; the full shape has no Dirichlet vertices
        g[term.pencil.free] += (y * y) @ coef
    g *= dq
    if return_spectra:
        return f, g, spectra
    return f, g


@dataclass
class LocalizationResult:
    potential: np.ndarray
    region: np.ndarray
    cost: float
    trace: list = field(default_factory=list)
    init_id: int = 0
    wall_time: float = 0.0
    iterations: int = 0
    accepted: int = 0
    stalled: bool = False
    converged: bool = False


class LBFGSModel:
    """Limited-memory BFGS Hessian approximation ``B = gamma I + Psi M Psi^T``.

    Keeps the last `memory` curvature pairs and solves the 2-norm trust-region
    subproblem exactly through the eigendecomposition of ``B`` restricted to
    the span of the stored pairs.
    """

    def __init__(self, memory: int = 10, gamma: float = 1.0):
        self.memory = memory
        self.gamma = float(gamma)
        self.S: list[np.ndarray] = []
        self.Y: list[np.ndarray] = []

    def update(self, s, y) -> bool:
        sy = float(s @ y)
        if sy <= 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            return False
        self.S.append(s.copy())
        self.Y.append(y.copy())
        if len(self.S) > self.memory:
            self.S.pop(0)
            self.Y.pop(0)
        self.gamma = float(y @ y) / sy
        return True

    def _compact(self):
        S = np.column_stack(self.S)
        Y = np.column_stack(self.Y)
        SY = S.T @ Y
        L = np.tril(SY, -1)
        D = np.diag(np.diag(SY))
        g = self.gamma
        mid = np.block([[g * (S.T @ S), L], [L.T, -D]])
        Psi = np.hstack([g * S, Y])
        return Psi, -np.linalg.inv(mid)

    def matvec(self, s):
        out = self.gamma * s
        if self.S:
            Psi, M = self._compact()
            out = out + Psi @ (M @ (Psi.T @ s))
        return out

    def solve(self, g, radius):
        """Minimize ``g.s + s.B.s/2`` subject to ``|s| <= radius``; returns (s, predicted decrease)."""
        gamma = self.gamma
        if self.S:
            Psi, M = self._compact()
            Q, R = np.linalg.qr(Psi)
            lam, P = np.linalg.eigh(R @ M @ R.T)
            U = Q @ P
            lam = lam + gamma
        else:
            U = np.zeros((len(g), 0))
            lam = np.zeros(0)
        g_par = U.T @ g
        g_perp = g - U @ g_par
        perp2 = float(g_perp @ g_perp)

        def norm2(sigma):
            return float(np.sum(g_par**2 / (lam + sigma) ** 2)) + perp2 / (gamma + sigma) ** 2

        low = max(0.0, -min(lam.min(initial=gamma), gamma)) * (1 + 1e-12) + 1e-300
        if min(lam.min(initial=gamma), gamma) > 0 and norm2(0.0) <= radius**2:
            sigma = 0.0
        else:
            lo, hi = low, max(low, 1e-300)
            while norm2(hi) > radius**2:
                hi = 2.0 * hi + np.linalg.norm(g) / radius
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                if norm2(mid) > radius**2:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-12 * hi:
                    break
            sigma = hi
        s = -(U @ (g_par / (lam + sigma))) - g_perp / (gamma + sigma)
        pred = -(float(g @ s) + 0.5 * float(s @ self.matvec(s)))
        return s, pred


def minimize(
    problem: AlignmentProblem,
    v_init,
    max_iter: int = 150,
    grad_tol: float | None = None,
    initial_radius: float = 1.0,
    max_radius: float = 1e3,
    ftol: float = 1e-6,
    init_id: int = 0,
    max_shrinks: int = 10,
    memory: int = 10,
) -> LocalizationResult:
    """Trust-region descent on ``f(q(v))`` with a limited-memory BFGS model.

    The model starts as a multiple of the identity so that the first step is
    a gradient step of length `initial_radius`; every trial point adds a
    curvature pair. Only steps that decrease the cost are accepted, so the
    recorded trace is non-increasing.

    Stops when ``max|grad| <= grad_tol`` (default ``1e-6 f0``), after
    `max_iter` trust-region iterations, or when the relative cost decrease
    over the last 10 accepted steps falls below `ftol`; a run with
    `max_shrinks` consecutive rejected steps is returned flagged as stalled.
    """
    t0 = time.perf_counter()
    v = np.array(v_init, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("initial potential must be finite")
    f, g, spectra = cost_and_grad(problem, v, return_spectra=True)
    warm = [None if sp is None else sp[1].sum(axis=1) for sp in spectra]
    if grad_tol is None:
        grad_tol = 1e-6 * f
    trace = [f]
    radius = float(initial_radius)
    gnorm = float(np.linalg.norm(g))
    model = LBFGSModel(memory, gnorm / radius if gnorm > 0 else 1.0)
    it = accepted = shrinks = 0
    stalled = converged = False
    while it < max_iter:
        if np.max(np.abs(g)) <= grad_tol:
            converged = True
            break
        it += 1
        s, pred = model.solve(g, radius)
        if not pred > 0:
            converged = True
            break
        v_new = v + s
        f_new, g_new, sp_new = cost_and_grad(problem, v_new, warm=warm, return_spectra=True)
        rho = (f - f_new) / pred
        model.update(s, g_new - g)
        step = float(np.linalg.norm(s))
        if f_new < f and rho > 1e-4:
            v, f, g = v_new, f_new, g_new
            warm = [None if sp is None else sp[1].sum(axis=1) for sp in sp_new]
            trace.append(f)
            accepted += 1
            shrinks = 0
            if rho > 0.75 and step >= 0.99 * radius:
                radius = min(2.0 * radius, max_radius)
            elif rho < 0.25:
                radius = 0.25 * step
            if len(trace) > 10 and trace[-11] - f <= ftol * trace[-11]:
                converged = True
                break
        else:
            radius = 0.25 * step
            shrinks += 1
            if shrinks >= max_shrinks:
                stalled = True
                break
    return LocalizationResult(
        potential=v,
        region=problem.region(v),
        cost=float(f),
        trace=trace,
        init_id=init_id,
        wall_time=time.perf_counter() - t0,
        iterations=it,
        accepted=accepted,
        stalled=stalled,
        converged=converged,
    )


def region_from_potential(q, tau: float) -> np.ndarray:
    """Predicted region ``{j : q_j < tau}``.

    Used with ``tau`` equal to the largest target eigenvalue: the vertices
    where even the highest aligned mode is not suppressed by the potential.
    """
    if not tau > 0:
        raise ValueError("threshold must be positive")
    return np.flatnonzero(np.asarray(q, dtype=np.float64) < tau)


def make_initializations(
    mesh: TriMesh,
    area: float | None = None,
    n_samples: int = 20,
    seed: int = 0,
    reparam: str = SATURATION,
    c: float = 1.0,
) -> list[np.ndarray]:
    """Gaussian-well starting potentials centred on farthest point samples.

    For each sample ``p`` and each width ``sigma`` in ``(sqrt(area),
    sqrt(2 area))`` the target potential is
    ``c (1 - exp(-d(x, p)^2 / (2 sigma^2)))`` with graph-geodesic ``d``;
    the returned raw vectors are its preimages under the reparametrization.
    """
    if area is None:
        area = total_area(mesh)
    samples = farthest_point_samples(mesh, n_samples, seed)
    sigmas = (np.sqrt(area), np.sqrt(2.0 * area))
    out = []
    for p in samples:
        d = graph_geodesics(mesh, p)
        d = np.where(np.isfinite(d), d, 1e300)
        for sigma in sigmas:
            q = c * (1.0 - np.exp(-(d**2) / (2.0 * sigma**2)))
            out.append(reparam_preimage(q, reparam, c))
    return out


def _run_one(args):
    problem, v, i, opts = args
    return minimize(problem, v, init_id=i, **opts)


def localize(problem: AlignmentProblem, inits, parallelism: int = 1, **opts):
    """Minimize from every start and keep the lowest final cost (lowest start index on ties).

    Returns ``(best, results)`` with results ordered by start index.
    """
    inits = list(inits)
    if not inits:
        raise ValueError("need at least one initialization")
    jobs = [(problem, v, i, opts) for i, v in enumerate(inits)]
    if parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: r.init_id)
    usable = [r for r in results if not r.stalled]
    if not usable:
        raise AllStalled(f"all {len(results)} starts stalled")
    best = min(usable, key=lambda r: (r.cost, r.init_id))
    for r in results:
        log.debug("start %d: cost %.6g, %d iterations", r.init_id, r.cost, r.iterations)
    return best, results


def target_spectra(partial: TriMesh, k_regular: int, k_si: int, alpha: float, eps: float):
    """Dirichlet spectra of the partial shape under both metrics."""
    bnd = boundary_vertices(partial)
    if bnd.size == 0:
        raise DegenerateCut("partial shape has no boundary; Dirichlet targets are undefined")
    mu = smallest_eigenpairs(operator_pair(partial, "regular"), k_regular, bnd).eigenvalues
    mu_si = np.zeros(0)
    if k_si:
        mu_si = smallest_eigenpairs(operator_pair(partial, "si", alpha, eps), k_si, bnd).eigenvalues
    return mu, mu_si


def build_problem(
    full: TriMesh,
    partial: TriMesh,
    k_regular: int = 20,
    k_si: int = 20,
    alpha: float = 0.33,
    eps: float = 1e-8,
    reparam: str = SATURATION,
    c_factor: float = 50.0,
    weights=(1.0, 1.0),
) -> AlignmentProblem:
    """Assemble the alignment problem of locating `partial` inside `full`.

    The saturation constant is ``c_factor`` times the largest target
    eigenvalue over both metrics.
    """
    mu, mu_si = target_spectra(partial, k_regular, k_si, alpha, eps)
    c = c_factor * max(mu.max(initial=0.0), mu_si.max(initial=0.0))
    reg = operator_pair(full, "regular")
    si = operator_pair(full, "si", alpha, eps) if k_si else None
    if not k_si:
        weights = (weights[0], 0.0)
    return AlignmentProblem(reg, si, mu, mu_si, reparam, c, tuple(weights))
