#
#  reports.py
#
#  JSON reports written by the command-line tool.
#

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, TypeVar, Union

from dataclasses_json import config, dataclass_json

from . import files
from .distributions import AutocovRow
from .galerkin import ErrorReport

T = TypeVar("T")


def _is_empty(v: Any) -> bool:
    return v is None or (isinstance(v, (list, dict)) and len(v) == 0)


def pruned_json(cls: T) -> T:
    orig = cls.to_dict  # type: ignore

    # only keep non-empty public fields
    cls.to_dict = lambda self, **kwargs: {  # type: ignore
        k: v for k, v in orig(self, **kwargs).items() if not k.startswith("_") and not _is_empty(v)
    }

    return cls


class Report:
    """Save/load for report dataclasses; keys keep the field order."""

    def to_dict(self) -> Dict[str, Any]:
        ...

    def save(self, filename: Union[str, Path]) -> None:
        files.write_report_json(filename, self.to_dict())

    @classmethod
    def load(cls, filename: Union[str, Path]) -> Any:
        return cls.from_dict(files.read_report_json(filename))  # type: ignore


@pruned_json
@dataclass_json
@dataclass
class PodReport(Report):
    version: str
    config: Dict[str, Any]
    tolerances: Dict[str, float]
    dim: int
    count: int
    trace: float
    retained: int
    rank: int
    lambda_: List[float] = field(metadata=config(field_name="lambda"))
    discarded_energy: float
    modes_csv: str
    coeffs_csv: str
    energy_csv: Optional[str] = None


@pruned_json
@dataclass_json
@dataclass
class MercerReport(Report):
    version: str
    config: Dict[str, Any]
    tolerances: Dict[str, float]
    count: int
    gram_csv: str
    coeffs_csv: str
    eigenvalues: List[float]
    correlation_eigenvalues: List[float]
    max_eigenvalue_gap: float


@pruned_json
@dataclass_json
@dataclass
class AlgebraReport(Report):
    version: str
    config: Dict[str, Any]
    tolerances: Dict[str, float]
    algebra: Dict[str, Any]
    expectation: List[float]
    self_adjoint: bool
    positive: bool
    projection: bool
    variance: float
    norms: Dict[str, float]
    spectrum: Optional[List[float]] = None
    law: Optional[Dict[str, Any]] = None
    fn: Optional[Dict[str, Any]] = None
    fn_csv: Optional[str] = None
    pair: Optional[Dict[str, Any]] = None


@pruned_json
@dataclass_json
@dataclass
class SynthReport(Report):
    version: str
    config: Dict[str, Any]
    tolerances: Dict[str, float]
    paths_csv: str
    n_paths: int
    n_times: int
    seed: int
    variance_target: float
    autocovariance: List[AutocovRow] = field(default_factory=list)
    flagged: int = 0


@pruned_json
@dataclass_json
@dataclass
class GalerkinReport(Report):
    version: str
    config: Dict[str, Any]
    tolerances: Dict[str, float]
    basis_size: int
    kept: int
    T: float
    steps: int
    K: List[List[float]]
    errors: ErrorReport
    trajectory_csv: str
