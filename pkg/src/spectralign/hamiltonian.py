"""Hamiltonian spectra ``(W + M diag(q(v))) phi = lambda M phi`` and their potential gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigen import ReducedPencil, Spectrum
from .operators import OperatorPair

SQUARE = "square"
SATURATION = "saturation"
# preimages keep q/c at least this far inside the range of the reparametrization
CLAMP = 2e-4


def _check_reparam(reparam):
    if reparam in ("sat", SATURATION):
        return SATURATION
    if reparam == SQUARE:
        return SQUARE
    raise ValueError(f"unknown reparametrization {reparam!r}")


@dataclass(frozen=True, eq=False)
class Potential:
    """Raw per-vertex variable ``v`` and the map ``q`` turning it into a nonnegative potential.

    ``square``: ``q(v) = v**2``; ``saturation``: ``q(v) = c (tanh(v) + 1)``.
    """

    raw: np.ndarray
    reparam: str = SATURATION
    c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "reparam", _check_reparam(self.reparam))
        object.__setattr__(self, "raw", np.asarray(self.raw, dtype=np.float64))
        if self.reparam == SATURATION and not self.c > 0:
            raise ValueError("saturation constant must be positive")

    def values(self) -> np.ndarray:
        return apply_reparam(self)


def apply_reparam(pot: Potential) -> np.ndarray:
    v = pot.raw
    if pot.reparam == SQUARE:
        return v * v
    return pot.c * (np.tanh(v) + 1.0)


def reparam_derivative(pot: Potential) -> np.ndarray:
    v = pot.raw
    if pot.reparam == SQUARE:
        return 2.0 * v
    t = np.tanh(v)
    return pot.c * (1.0 - t * t)


def reparam_preimage(q, reparam: str, c: float, clamp: float = CLAMP) -> np.ndarray:
    """Raw values whose image is `q`, with `q` clamped to the interior of the range of the map.

    The default clamp keeps a nonzero derivative at the bottom of a well so
    that optimization can still raise it.
    """
    reparam = _check_reparam(reparam)
    q = np.asarray(q, dtype=np.float64)
    if reparam == SQUARE:
        return np.sqrt(np.maximum(q, clamp * c))
    t = np.clip(q / c - 1.0, -1.0 + clamp, 1.0 - clamp)
    return np.arctanh(t)


@dataclass(frozen=True, eq=False)
class HamiltonianSpectrum(Spectrum):
    potential: Potential | None = None


def hamiltonian_spectrum(
    ops: OperatorPair, pot: Potential, k: int, dirichlet=None, *, pencil: ReducedPencil | None = None, v0=None
) -> HamiltonianSpectrum:
    """k smallest eigenpairs of the Hamiltonian with potential ``q(pot)`` on top of `ops`.

    The potential enters weighted by the same mass as the right-hand side, so
    for the scale-invariant pair it is ``W + A~ diag(q)`` against ``A~``.
    Pass a prebuilt `pencil` to reuse its restriction across calls.
    """
    q = apply_reparam(pot)
    if q.shape != (ops.n,):
        raise ValueError("potential length must equal the number of vertices")
    if pencil is None:
        pencil = ReducedPencil(ops.stiffness, ops.mass, dirichlet)
    vals, phi, _ = pencil.solve(k, potential=q, v0=v0)
    return HamiltonianSpectrum(vals, pencil.embed(phi), ops.metric.value, pencil.dirichlet, pot)


def eigenvalue_gradients(spec: HamiltonianSpectrum, ops: OperatorPair) -> np.ndarray:
    """Table of ``d lambda_i / d v_j = M_jj phi_i(j)^2 q'(v_j)``, shape (k, n).

    Dirichlet vertices carry zero eigenvector entries and therefore zero
    gradient. Inside a degenerate eigenvalue cluster the rows depend on the
    chosen eigenbasis and are only a valid subgradient.
    """
    dq = reparam_derivative(spec.potential)
    phi = spec.eigenvectors
    return (phi * phi).T * (ops.mass * dq)[None, :]
