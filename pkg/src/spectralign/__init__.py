"""Partial shape localization by aligning Hamiltonian spectra under a regular and a scale-invariant metric."""

from .align import AlignmentProblem, LocalizationResult, build_problem, cost_and_grad, localize, minimize
from .config import Config
from .eigen import Spectrum, smallest_eigenpairs
from .errors import *  # noqa: F401,F403
from .evaluation import EvalReport, cumulative_curve, iou, run_benchmark
from .hamiltonian import Potential, hamiltonian_spectrum
from .mesh import TriMesh, load_mesh, save_off
from .operators import Metric, OperatorPair, gaussian_curvature, lumped_mass, operator_pair

__version__ = "0.1.0"
