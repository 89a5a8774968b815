__version__ = "0.1.0"

from . import utils
from .algebras import ClassFlags, Element, ProbAlgebra, make_algebra
from .correlations import CorrelationOp, Factorization, KLExpansion, RSvd, SnapshotSet
from .distributions import StationaryModel, WeakDistribution, WhiteNoiseMap
from .galerkin import Forcing, GalerkinSystem, Trajectory
from .spectra import FnSpec, GnsRep, SpectralMeasure
from .utils import InputError, KLFactorError, NumericalError

__all__ = [
    "ProbAlgebra",
    "Element",
    "ClassFlags",
    "make_algebra",
    "FnSpec",
    "SpectralMeasure",
    "GnsRep",
    "SnapshotSet",
    "CorrelationOp",
    "RSvd",
    "KLExpansion",
    "Factorization",
    "WeakDistribution",
    "WhiteNoiseMap",
    "StationaryModel",
    "Forcing",
    "GalerkinSystem",
    "Trajectory",
    "KLFactorError",
    "InputError",
    "NumericalError",
    "utils",
]
