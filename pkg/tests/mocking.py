#
#  mocking.py
#
#  Seeded random algebras, elements, snapshot sets and report fields for tests.
#

import random
from typing import Any, List, Optional, Union

import numpy as np

from klfactor.algebras import Element, Model, ProbAlgebra, make_algebra
from klfactor.correlations import CorrelationOp, SnapshotSet


def _strip_optional(_type: Any) -> Any:
    args = getattr(_type, "__args__", ())
    if getattr(_type, "__origin__", None) is Union and len(args) == 2 and args[1] is type(None):
        return args[0]
    return _type


def mock(_type: Any, gen: Optional[random.Random] = None) -> Any:
    """A random value of a numeric field type, or a report dataclass made of them."""
    gen = gen or random.Random(0)
    _type = _strip_optional(_type)

    if _type is bool:
        return gen.choice([True, False])
    if _type is int:
        return gen.randint(0, 1000)
    if _type is float:
        return gen.uniform(-10.0, 10.0)
    if getattr(_type, "_name", None) == "List":
        return [mock(_type.__args__[0], gen) for _ in range(gen.randint(1, 4))]
    if hasattr(_type, "__dataclass_fields__"):
        return _type(**{f.name: mock(f.type, gen) for f in _type.__dataclass_fields__.values()})

    raise ValueError(f"cannot mock {_type!r}")


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)


def mock_weights(gen: np.random.Generator, n: int) -> List[float]:
    w = gen.uniform(0.1, 1.0, n)
    return (w / w.sum()).tolist()


def mock_density(gen: np.random.Generator, n: int) -> np.ndarray:
    A = gen.normal(size=(n, n)) + 1j * gen.normal(size=(n, n))
    rho = A @ A.conj().T + 0.1 * np.eye(n)
    return rho / np.trace(rho).real


def mock_algebra(gen: np.random.Generator, model: Model, atoms: int = 4, n: int = 2) -> ProbAlgebra:
    spec: dict = {"model": model}
    if model in ("function", "random_matrix"):
        spec["weights"] = mock_weights(gen, atoms)
    if model in ("matrix", "random_matrix"):
        spec["rho"] = [[[z.real, z.imag] for z in row] for row in mock_density(gen, n)]
    return make_algebra(spec)


def mock_element(gen: np.random.Generator, alg: ProbAlgebra) -> Element:
    return alg.element(gen.normal(size=alg.shape) + 1j * gen.normal(size=alg.shape))


def mock_observable(gen: np.random.Generator, alg: ProbAlgebra) -> Element:
    a = mock_element(gen, alg)
    return (a + a.adjoint()) / 2


def mock_positive(gen: np.random.Generator, alg: ProbAlgebra) -> Element:
    a = mock_element(gen, alg)
    return a.adjoint() * a


def mock_psd(gen: np.random.Generator, d: int, rank: Optional[int] = None) -> CorrelationOp:
    A = gen.normal(size=(d, rank or d))
    C = A @ A.T
    C = (C + C.T) / 2
    return CorrelationOp(C, float(np.trace(C)))


def mock_snapshots(gen: np.random.Generator, d: int, m: int, probability: bool = False) -> SnapshotSet:
    weights = gen.uniform(0.1, 2.0, m)
    if probability:
        weights = weights / weights.sum()
    return SnapshotSet(gen.normal(size=(d, m)), weights)
