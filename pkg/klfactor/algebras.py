#
#  algebras.py
#
#  Finite-dimensional *-algebras of random variables with a faithful state.
#
#  Three concrete models are supported:
#
#    - "function": complex functions on a finite sample space with weights w_i,
#      E[a] = sum_i w_i a_i
#    - "matrix": n x n complex matrices with a density matrix rho,
#      E[a] = tr(rho a)
#    - "random_matrix": matrix-valued functions on a finite sample space,
#      E[A] = sum_i w_i tr(rho A(w_i))
#

import numbers
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

import numpy as np
import structlog

from . import files
from .utils import InputError, NumericalError, hermitian_part, max_abs

log = structlog.get_logger()

Model = Literal["function", "matrix", "random_matrix"]

MODELS: List[Model] = ["function", "matrix", "random_matrix"]

# validation tolerance for user-supplied weights and density matrices
DEFAULT_TOL = 1e-9

# the bound on monomial degree in independence_test
MAX_DEGREE = 8

Scalar = Union[int, float, complex]


@dataclass(frozen=True, eq=False)
class Element:
    """A member of a ProbAlgebra.

    `data` has shape (N,) for the function model, (n, n) for the matrix model
    and (N, n, n) for random matrices. Elements are immutable; every operation
    returns a new element of the same model and shape.
    """

    model: Model
    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=complex)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def _same(self, other: "Element") -> None:
        if not isinstance(other, Element) or other.model != self.model or other.shape != self.shape:
            raise ModelMismatch(
                f"cannot combine {self.model}{self.shape} with "
                f"{getattr(other, 'model', type(other).__name__)}{getattr(other, 'shape', '')}"
            )

    def _new(self, data: np.ndarray) -> "Element":
        return Element(self.model, data)

    def unit_like(self) -> "Element":
        return self._new(_unit_data(self.model, self.shape))

    def adjoint(self) -> "Element":
        if self.model == "function":
            return self._new(np.conj(self.data))
        return self._new(np.conj(self.data).swapaxes(-1, -2))

    def __add__(self, other: "Element") -> "Element":
        self._same(other)
        return self._new(self.data + other.data)

    def __sub__(self, other: "Element") -> "Element":
        self._same(other)
        return self._new(self.data - other.data)

    def __neg__(self) -> "Element":
        return self._new(-self.data)

    def __mul__(self, other: Union["Element", Scalar]) -> "Element":
        if isinstance(other, numbers.Number):
            return self._new(complex(other) * self.data)  # type: ignore
        self._same(other)  # type: ignore
        if self.model == "function":
            return self._new(self.data * other.data)  # type: ignore
        return self._new(self.data @ other.data)  # type: ignore

    def __rmul__(self, other: Scalar) -> "Element":
        if isinstance(other, numbers.Number):
            return self._new(complex(other) * self.data)  # type: ignore
        return NotImplemented

    def __truediv__(self, other: Scalar) -> "Element":
        return self._new(self.data / complex(other))

    def __pow__(self, k: int) -> "Element":
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise InputError(f"element powers must be non-negative integers, got {k!r}")
        out = self.unit_like()
        for _ in range(int(k)):
            out = out * self
        return out

    def commutator(self, other: "Element") -> "Element":
        return self * other - other * self

    def __repr__(self) -> str:
        return f"Element(model={self.model!r}, shape={self.shape})"


@dataclass(frozen=True)
class ClassFlags:
    self_adjoint: bool
    positive: bool
    projection: bool

    def __post_init__(self) -> None:
        assert not self.projection or self.positive
        assert not self.positive or self.self_adjoint


@dataclass(frozen=True, eq=False)
class ProbAlgebra:
    """A concrete algebra together with its (faithful) state.

    Build it with `make_algebra`, which validates the weights and density.
    """

    model: Model
    weights: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self) -> None:
        for name in ("weights", "rho"):
            value = getattr(self, name)
            if value is not None:
                value = np.array(value, dtype=float if name == "weights" else complex)
                value.setflags(write=False)
                object.__setattr__(self, name, value)

    @property
    def shape(self) -> Tuple[int, ...]:
        """Shape of the data of every element."""
        if self.model == "function":
            return (len(self.weights),)  # type: ignore
        if self.model == "matrix":
            return self.rho.shape  # type: ignore
        return (len(self.weights),) + self.rho.shape  # type: ignore

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    def element(self, data: Any) -> Element:
        a = Element(self.model, np.asarray(data, dtype=complex))
        self.check(a)
        return a

    def check(self, *elements: Element) -> None:
        for a in elements:
            if not isinstance(a, Element) or a.model != self.model or a.shape != self.shape:
                raise ModelMismatch(
                    f"element {getattr(a, 'model', type(a).__name__)}{getattr(a, 'shape', '')} "
                    f"does not belong to the {self.model}{self.shape} algebra"
                )

    def unit(self) -> Element:
        return Element(self.model, _unit_data(self.model, self.shape))

    def zero(self) -> Element:
        return Element(self.model, np.zeros(self.shape, dtype=complex))

    def constant(self, c: Scalar) -> Element:
        return self.unit() * c

    def basis(self) -> List[Element]:
        """The canonical units: indicators, matrix units, or their products."""
        out = []
        for ix in np.ndindex(*self.shape):
            data = np.zeros(self.shape, dtype=complex)
            data[ix] = 1
            out.append(Element(self.model, data))
        return out

    def __repr__(self) -> str:
        return f"ProbAlgebra(model={self.model!r}, shape={self.shape}, label={self.label!r})"


def _unit_data(model: Model, shape: Tuple[int, ...]) -> np.ndarray:
    if model == "function":
        return np.ones(shape, dtype=complex)
    n = shape[-1]
    return np.broadcast_to(np.eye(n, dtype=complex), shape).copy()


#
#  construction
#


def _check_weights(weights: np.ndarray, auto_normalise: bool, tol: float) -> np.ndarray:
    if weights.ndim != 1 or len(weights) == 0:
        raise InputError(f"weights must be a non-empty vector, got shape {weights.shape}")
    if not np.all(np.isfinite(weights)):
        raise InputError("weights must be finite")
    if np.any(weights <= 0):
        raise NonFaithful(f"weights must be strictly positive (faithfulness), got min {weights.min()!r}")

    total = weights.sum()
    if abs(total - 1) > tol and not auto_normalise:
        raise NotNormalised(f"weights sum to {total!r}, not 1 (tolerance {tol})")

    return weights / total


def _check_density(rho: np.ndarray, auto_normalise: bool, tol: float) -> np.ndarray:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
        raise InputError(f"density matrix must be square, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InputError("density matrix must be finite")
    if max_abs(rho - rho.conj().T) > tol:
        raise NotDensity("density matrix must be self-adjoint")

    rho = hermitian_part(rho)
    eigs = np.linalg.eigvalsh(rho)
    if eigs[0] <= 1e-12 * max(abs(eigs[-1]), 1.0):
        raise NonFaithful(f"density matrix must be positive definite (faithfulness), got min eigenvalue {eigs[0]!r}")

    trace = float(np.real(np.trace(rho)))
    if abs(trace - 1) > tol and not auto_normalise:
        raise NotNormalised(f"density matrix has trace {trace!r}, not 1 (tolerance {tol})")

    return rho / trace


def make_algebra(spec: Mapping[str, Any], auto_normalise: Optional[bool] = None, tol: float = DEFAULT_TOL) -> ProbAlgebra:
    """Validate a model descriptor and return the algebra with its faithful state.

    `spec` follows the `algebra` schema: {"model": "function", "weights": [...]},
    {"model": "matrix", "rho": [[...]]} or {"model": "random_matrix", "weights": [...], "rho": [[...]]}.
    Weights and densities accepted within `tol` are rescaled to sum/trace exactly one.
    """
    model = spec.get("model")
    if model not in MODELS:
        raise InputError(f"unknown algebra model: {model!r}")

    if auto_normalise is None:
        auto_normalise = bool(spec.get("auto_normalise", False))

    weights = rho = None
    if model in ("function", "random_matrix"):
        if spec.get("weights") is None:
            raise InputError(f"{model} algebra requires weights")
        weights = _check_weights(np.asarray(spec["weights"], dtype=float), auto_normalise, tol)
    if model in ("matrix", "random_matrix"):
        if spec.get("rho") is None:
            raise InputError(f"{model} algebra requires rho")
        rho = _check_density(files.complex_array(spec["rho"], 2), auto_normalise, tol)

    alg = ProbAlgebra(model, weights=weights, rho=rho, label=str(spec.get("label", "")))
    log.debug("algebra.make", model=model, shape=alg.shape)
    return alg


def load_element(alg: ProbAlgebra, path: Union[str, Path]) -> Element:
    """Read an element from CSV.

    Function model: one row of N values. Matrix model: n rows of n entries.
    Random matrices: the N per-atom matrices stacked vertically.
    """
    x = np.atleast_2d(files.load_matrix_csv(path))
    if alg.model == "function":
        if x.shape[0] != 1:
            raise files.ParseError(f"{path}: function elements are a single row, got {x.shape[0]} rows")
        x = x.ravel()
    elif alg.model == "random_matrix":
        n = alg.shape[-1]
        if x.shape[0] % n:
            raise files.ParseError(f"{path}: {x.shape[0]} rows do not stack into {n}x{n} blocks")
        x = x.reshape(-1, n, x.shape[1])
    return alg.element(x)


#
#  the state and its derived quantities
#


def expectation(alg: ProbAlgebra, a: Element) -> complex:
    alg.check(a)
    if alg.model == "function":
        return complex(np.dot(alg.weights, a.data))  # type: ignore
    if alg.model == "matrix":
        return complex(np.einsum("ij,ji->", alg.rho, a.data))
    return complex(np.einsum("i,jk,ikj->", alg.weights, alg.rho, a.data))


def _eigenvalues(a: Element) -> np.ndarray:
    """Eigenvalues of the Hermitian part; for random matrices all atoms pooled."""
    if a.model == "function":
        return np.real(a.data)
    return np.linalg.eigvalsh(hermitian_part(a.data)).ravel()


def classify(alg: ProbAlgebra, a: Element, tol: float = DEFAULT_TOL) -> ClassFlags:
    """Self-adjoint / positive / projection flags, with tolerances scaled by (1 + ||a||_max)."""
    if tol <= 0:
        raise InputError(f"tolerance must be positive, got {tol}")
    alg.check(a)

    scale = tol * (1 + max_abs(a.data))
    self_adjoint = max_abs(a.data - a.adjoint().data) <= scale
    positive = self_adjoint and float(_eigenvalues(a).min()) >= -scale
    projection = positive and max_abs((a * a).data - a.data) <= scale

    return ClassFlags(self_adjoint, positive, projection)


def center_split(alg: ProbAlgebra, a: Element) -> Tuple[complex, Element]:
    """Split `a` into its mean E[a] and the fluctuation a - E[a] e."""
    mean = expectation(alg, a)
    return mean, a - alg.unit() * mean


def inner2(alg: ProbAlgebra, a: Element, b: Element) -> complex:
    """<a, b>_2 = E[b* a]."""
    alg.check(a, b)
    return expectation(alg, b.adjoint() * a)


def norm2(alg: ProbAlgebra, a: Element) -> float:
    return float(np.sqrt(max(inner2(alg, a, a).real, 0.0)))


def covariance(alg: ProbAlgebra, a: Element, b: Element) -> complex:
    _, fa = center_split(alg, a)
    _, fb = center_split(alg, b)
    return inner2(alg, fa, fb)


def variance(alg: ProbAlgebra, a: Element) -> float:
    return max(covariance(alg, a, a).real, 0.0)


def symmetric_skew_split(a: Element) -> Tuple[Element, Element]:
    """a = s + i w with s = (a + a*)/2 and w = (a - a*)/(2i), both self-adjoint."""
    s = (a + a.adjoint()) / 2
    w = (a - a.adjoint()) / 2j
    return s, w


def event_probability(alg: ProbAlgebra, p: Element, tol: float = DEFAULT_TOL) -> float:
    if not classify(alg, p, tol).projection:
        raise NotObservable("events must be projections")
    return float(np.clip(expectation(alg, p).real, 0.0, 1.0))


def inverse(alg: ProbAlgebra, a: Element, tol: float = DEFAULT_TOL) -> Element:
    alg.check(a)
    scale = tol * (1 + max_abs(a.data))
    if alg.model == "function":
        if np.min(np.abs(a.data)) <= scale:
            raise NotInvertible("element vanishes on an atom")
        return a._new(1 / a.data)

    sv = np.linalg.svd(a.data, compute_uv=False)
    if np.min(sv) <= scale:
        raise NotInvertible(f"element is singular (smallest singular value {np.min(sv)!r})")
    return a._new(np.linalg.inv(a.data))


def _monomials(a: Element, degree: int) -> List[Element]:
    a_star = a.adjoint()
    out = []
    for total in range(1, degree + 1):
        for j in range(total, -1, -1):
            out.append(a**j * a_star ** (total - j))
    return out


def independence_test(alg: ProbAlgebra, a: Element, b: Element, degree: int = 1, tol: float = DEFAULT_TOL) -> bool:
    """True iff every pair of centred monomials a^j (a*)^k, b^j (b*)^k with
    1 <= j + k <= degree is uncorrelated within `tol`.

    Passing at finite degree is necessary for independence, not sufficient.
    """
    if degree > MAX_DEGREE:
        raise DegreeTooLarge(f"degree {degree} exceeds the limit of {MAX_DEGREE}")
    if degree < 1:
        raise InputError(f"degree must be at least 1, got {degree}")
    alg.check(a, b)

    left = [center_split(alg, m)[1] for m in _monomials(a, degree)]
    right = [center_split(alg, m)[1] for m in _monomials(b, degree)]

    worst = max(abs(inner2(alg, m1, m2)) for m1 in left for m2 in right)
    log.debug("independence_test", degree=degree, worst=worst, tol=tol)
    return worst <= tol


def uncertainty_gap(alg: ProbAlgebra, a: Element, b: Element, tol: float = DEFAULT_TOL) -> float:
    """var(a) var(b) - E[i[a, b]]^2 / 4, non-negative up to round-off."""
    for name, x in (("a", a), ("b", b)):
        if not classify(alg, x, tol).self_adjoint:
            raise NotObservable(f"{name} must be self-adjoint")

    a = a._new(hermitian_part(a.data)) if a.model != "function" else a._new(a.data.real)
    b = b._new(hermitian_part(b.data)) if b.model != "function" else b._new(b.data.real)

    c = expectation(alg, 1j * a.commutator(b))
    if abs(c.imag) > 1e-12 * (1 + max_abs(a.data) * max_abs(b.data)):
        raise NumericalError(f"E[i[a, b]] should be real, got {c!r}")

    gap = variance(alg, a) * variance(alg, b) - c.real**2 / 4
    log.debug("uncertainty_gap", gap=gap)
    return float(gap)


def weighted_state(alg: ProbAlgebra, rho: Element, tol: float = DEFAULT_TOL) -> ProbAlgebra:
    """The algebra re-equipped with the state a -> E[rho a].

    For matrices this needs rho to commute with the density, otherwise
    a -> tr(sigma rho a) is not a state.
    """
    flags = classify(alg, rho, tol)
    if not flags.positive:
        raise NotDensity("density element must be positive")
    total = expectation(alg, rho)
    if abs(total - 1) > tol:
        raise NotDensity(f"density element must have expectation 1, got {total!r}")

    if alg.model == "function":
        weights = alg.weights * rho.data.real  # type: ignore
        if np.any(weights <= 0):
            raise NonFaithfulResult("density element vanishes on an atom; the reweighted state is not faithful")
        return ProbAlgebra("function", weights=weights / weights.sum(), label=alg.label)

    if alg.model == "matrix":
        sigma = alg.rho
        if max_abs(sigma @ rho.data - rho.data @ sigma) > tol * (1 + max_abs(rho.data)):  # type: ignore
            raise NonCommutingDensity("density element must commute with the state's density matrix")
        new_rho = hermitian_part(sigma @ rho.data)  # type: ignore
        eigs = np.linalg.eigvalsh(new_rho)
        if eigs[0] <= 1e-12 * max(abs(eigs[-1]), 1.0):
            raise NonFaithfulResult("density element has a zero eigenvalue; the reweighted state is not faithful")
        return ProbAlgebra("matrix", rho=new_rho / np.trace(new_rho).real, label=alg.label)

    raise ModelMismatch("weighted states are available for function and matrix algebras only")


#
#  products
#


def product_algebra(first: ProbAlgebra, second: ProbAlgebra) -> ProbAlgebra:
    """Product sample space (function) or tensor product (matrix) with the product state."""
    if first.model != second.model or first.model == "random_matrix":
        raise ModelMismatch(f"cannot form the product of {first.model} and {second.model} algebras")
    label = f"{first.label}*{second.label}" if first.label or second.label else ""
    if first.model == "function":
        return ProbAlgebra("function", weights=np.kron(first.weights, second.weights), label=label)
    return ProbAlgebra("matrix", rho=np.kron(first.rho, second.rho), label=label)


def tensor(prod: ProbAlgebra, a: Element, b: Element) -> Element:
    """a (x) b in the product algebra; atom (i, j) sits at flat index i * N_b + j."""
    if a.model != b.model:
        raise ModelMismatch("tensor factors must share a model")
    return prod.element(np.kron(a.data, b.data))


def describe(alg: ProbAlgebra) -> Dict[str, Any]:
    """Plain description of an algebra for report echoes."""
    out: Dict[str, Any] = {"model": alg.model, "shape": list(alg.shape)}
    if alg.label:
        out["label"] = alg.label
    return out


#
#  exceptions
#


class ModelMismatch(InputError):
    pass


class NonFaithful(NumericalError):
    pass


class NonFaithfulResult(NumericalError):
    pass


class NotNormalised(InputError):
    pass


class NotObservable(InputError):
    pass


class DegreeTooLarge(InputError):
    pass


class NotDensity(InputError):
    pass


class NonCommutingDensity(NotDensity):
    pass


class NotInvertible(NumericalError):
    pass

