#
#  spectra.py
#
#  Spectral calculus on finite probability algebras: spectra, functions of
#  observables, laws, L_p norms and the left-regular (GNS) representation.
#

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from .algebras import DEFAULT_TOL, Element, NotObservable, ProbAlgebra, classify, expectation, inner2
from .utils import InputError, NumericalError, hermitian_part, max_abs

log = structlog.get_logger()

FnName = Literal["sqrt", "abs", "exp", "power", "poly", "indicator", "identity"]

FN_NAMES: List[FnName] = ["sqrt", "abs", "exp", "power", "poly", "indicator", "identity"]

# relative width of an eigenvalue cluster treated as one degenerate eigenvalue
CLUSTER_TOL = 1e-8

# re-orthogonalise in Gram-Schmidt once the loss of orthogonality exceeds this
REORTH_TOL = 1e-10


@dataclass(frozen=True)
class FnSpec:
    """A function applied through the spectral theorem.

    `coeffs` are polynomial coefficients in increasing degree; the indicator is
    of the closed interval [lo, hi].
    """

    fn: FnName
    p: Optional[float] = None
    coeffs: Tuple[float, ...] = ()
    lo: Optional[float] = None
    hi: Optional[float] = None

    def __post_init__(self) -> None:
        if self.fn not in FN_NAMES:
            raise UnknownFunction(f"unknown function {self.fn!r}, expected one of {FN_NAMES}")
        if self.fn == "power" and (self.p is None or not self.p > 0):
            raise BadExponent(f"power needs an exponent p > 0, got {self.p!r}")
        if self.fn == "indicator" and (self.lo is None or self.hi is None or self.lo > self.hi):
            raise InputError(f"indicator needs lo <= hi, got [{self.lo}, {self.hi}]")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @staticmethod
    def power(p: float) -> "FnSpec":
        return FnSpec("power", p=p)

    @staticmethod
    def poly(coeffs: Sequence[float]) -> "FnSpec":
        return FnSpec("poly", coeffs=tuple(coeffs))

    @staticmethod
    def indicator(lo: float, hi: float) -> "FnSpec":
        return FnSpec("indicator", lo=lo, hi=hi)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"fn": self.fn}
        if self.fn == "power":
            out["p"] = self.p
        elif self.fn == "poly":
            out["coeffs"] = list(self.coeffs)
        elif self.fn == "indicator":
            out["lo"] = self.lo
            out["hi"] = self.hi
        return out

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "FnSpec":
        return FnSpec(
            d.get("fn"),  # type: ignore
            p=d.get("p"),
            coeffs=tuple(d.get("coeffs", ())),
            lo=d.get("lo"),
            hi=d.get("hi"),
        )

    def __call__(self, x: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
        """Evaluate on real spectral values, clipping round-off negatives where the domain needs it."""
        scale = tol * (1 + max_abs(x))

        if self.fn == "identity":
            return x
        if self.fn == "abs":
            return np.abs(x)
        if self.fn == "exp":
            return np.exp(x)
        if self.fn == "poly":
            return np.polynomial.polynomial.polyval(x, self.coeffs) if self.coeffs else np.zeros_like(x)
        if self.fn == "indicator":
            return ((x >= self.lo) & (x <= self.hi)).astype(float)

        if self.fn == "sqrt":
            if x.size and x.min() < -scale:
                raise DomainError(f"sqrt of an element with negative spectrum (min {x.min()!r})")
            return np.sqrt(np.clip(x, 0, None))

        # power
        if float(self.p).is_integer():  # type: ignore
            return x ** int(self.p)  # type: ignore
        if x.size and x.min() < -scale:
            raise DomainError(f"fractional power {self.p} of an element with negative spectrum (min {x.min()!r})")
        return np.clip(x, 0, None) ** self.p


@dataclass(frozen=True)
class SpectralMeasure:
    """A finitely supported probability measure on the real line."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if points.shape != weights.shape or points.ndim != 1:
            raise InputError("points and weights must be vectors of equal length")
        if np.any(np.diff(points) <= 0):
            raise InputError("atoms must be strictly increasing")
        if np.any(weights < 0):
            raise InputError("atom weights must be non-negative")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @property
    def atoms(self) -> List[Tuple[float, float]]:
        return list(zip(self.points.tolist(), self.weights.tolist()))

    def moment(self, k: int) -> float:
        return float(np.sum(self.points**k * self.weights))

    def expect(self, f: FnSpec) -> float:
        """Integral of f against the measure."""
        return float(np.sum(f(self.points) * self.weights))

    def to_dict(self) -> Dict[str, Any]:
        return {"atoms": [{"x": x, "w": w} for x, w in self.atoms]}

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "SpectralMeasure":
        atoms = d.get("atoms", [])
        return SpectralMeasure(np.array([a["x"] for a in atoms]), np.array([a["w"] for a in atoms]))


@dataclass
class GnsRep:
    """The left-multiplication operator L_a in an orthonormal basis of L_2.

    `frame` holds the basis coordinates in canonical units (column k is basis
    element k), `gram` the Gram matrix of the canonical units.
    """

    dim: int
    L: np.ndarray
    frame: np.ndarray
    gram: np.ndarray
    shape: Tuple[int, ...]
    model: str
    unit_vector: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    @property
    def basis(self) -> List[Element]:
        return [Element(self.model, self.frame[:, k].reshape(self.shape)) for k in range(self.dim)]  # type: ignore

    def coordinates(self, b: Element) -> np.ndarray:
        """Coordinates of `b` in the orthonormal basis."""
        return self.frame.conj().T @ self.gram @ b.data.ravel()

    @property
    def op_norm(self) -> float:
        return float(np.linalg.norm(self.L, 2))


#
#  helpers
#


def _require_observable(alg: ProbAlgebra, a: Element, tol: float) -> None:
    if not classify(alg, a, tol).self_adjoint:
        raise NotObservable("element must be self-adjoint")


def _cluster(values: np.ndarray, weights: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Merge sorted values closer than CLUSTER_TOL * (1 + max|value|); weights add up."""
    order = np.argsort(values, kind="stable")
    values = values[order]
    weights = np.ones_like(values) if weights is None else weights[order]
    if not len(values):
        return values, weights

    width = CLUSTER_TOL * (1 + np.max(np.abs(values)))
    starts = np.concatenate([[0], np.nonzero(np.diff(values) > width)[0] + 1])
    points = np.array([values[s:e].mean() for s, e in zip(starts, np.append(starts[1:], len(values)))])
    return points, np.add.reduceat(weights, starts)


def _eigh(a: Element) -> Tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(hermitian_part(a.data))


#
#  operations
#


def spectrum(alg: ProbAlgebra, a: Element, distinct: bool = True, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Sorted real spectrum of an observable.

    Function elements give their exact value set. Matrix eigenvalues are merged
    per degenerate cluster unless `distinct` is off; random matrices pool the
    eigenvalues of every atom.
    """
    _require_observable(alg, a, tol)

    if alg.model == "function":
        values = a.data.real
        return np.unique(values) if distinct else np.sort(values)

    values = np.linalg.eigvalsh(hermitian_part(a.data)).ravel()
    return _cluster(values)[0] if distinct else np.sort(values)


def apply_fn(alg: ProbAlgebra, a: Element, f: FnSpec, tol: float = DEFAULT_TOL) -> Element:
    """f(a) for an observable a, pointwise or as V f(Lambda) V*."""
    _require_observable(alg, a, tol)

    if alg.model == "function":
        return a._new(f(a.data.real, tol))

    w, V = _eigh(a)
    fw = f(w, tol)
    return a._new((V * fw[..., None, :]) @ V.conj().swapaxes(-1, -2))


def abs_element(alg: ProbAlgebra, a: Element, tol: float = DEFAULT_TOL) -> Element:
    """|a| = (a* a)^(1/2), for any element."""
    return apply_fn(alg, a.adjoint() * a, FnSpec("sqrt"), tol)


def law(alg: ProbAlgebra, a: Element, tol: float = DEFAULT_TOL) -> SpectralMeasure:
    """The distribution of an observable: atoms on its spectrum, weighted by the state."""
    _require_observable(alg, a, tol)

    if alg.model == "function":
        points, inverse = np.unique(a.data.real, return_inverse=True)
        return SpectralMeasure(points, np.bincount(inverse.ravel(), weights=alg.weights))

    w, V = _eigh(a)
    # weight of eigenvector v is v* rho v; random matrices also carry the atom weight
    weights = np.einsum("...ik,ij,...jk->...k", V.conj(), alg.rho, V).real
    if alg.model == "random_matrix":
        weights = weights * alg.weights[:, None]  # type: ignore

    points, weights = _cluster(w.ravel(), weights.ravel())
    return SpectralMeasure(points, weights)


def lp_norm(alg: ProbAlgebra, a: Element, p: Union[float, str], tol: float = DEFAULT_TOL) -> float:
    """||a||_p = E[|a|^p]^(1/p); p = inf is the operator norm of L_a."""
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise BadExponent(f"exponent must be a number or 'inf', got {p!r}")
    if math.isnan(p) or p < 1:
        raise BadExponent(f"exponent must satisfy 1 <= p <= inf, got {p}")

    if math.isinf(p):
        return gns_rep(alg, a).op_norm

    # |a|^p = (a* a)^(p/2)
    power = apply_fn(alg, a.adjoint() * a, FnSpec.power(p / 2), tol)
    return float(max(expectation(alg, power).real, 0.0) ** (1 / p))


def _orthonormalise(gram: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt on the canonical units in the inner product x, y -> y* G x."""
    d = gram.shape[0]
    frame = np.zeros((d, d), dtype=complex)

    for k in range(d):
        v = np.zeros(d, dtype=complex)
        v[k] = 1
        for _ in range(2):
            for j in range(k):
                v = v - (frame[:, j].conj() @ gram @ v) * frame[:, j]
            norm = math.sqrt(max((v.conj() @ gram @ v).real, 0.0))
            if norm == 0.0:
                raise NumericalError("state is not faithful: Gram matrix is singular")
            v = v / norm
            loss = max((abs(frame[:, j].conj() @ gram @ v) for j in range(k)), default=0.0)
            if loss <= REORTH_TOL:
                break
        frame[:, k] = v

    return frame


def gns_rep(alg: ProbAlgebra, a: Element) -> GnsRep:
    """Matrix of b -> a b on L_2(alg) in a Gram-Schmidt basis of the canonical units."""
    alg.check(a)
    units = alg.basis()
    d = len(units)

    gram = np.empty((d, d), dtype=complex)
    for i, ui in enumerate(units):
        for j, uj in enumerate(units):
            gram[i, j] = inner2(alg, uj, ui)

    frame = _orthonormalise(gram)
    # column j holds the canonical coordinates of a u_j
    mult = np.stack([(a * u).data.ravel() for u in units], axis=1)
    L = frame.conj().T @ gram @ mult @ frame

    unit_vector = frame.conj().T @ gram @ alg.unit().data.ravel()
    log.debug("gns_rep", dim=d)
    return GnsRep(dim=d, L=L, frame=frame, gram=gram, shape=alg.shape, model=alg.model, unit_vector=unit_vector)


class DomainError(NumericalError):
    pass


class BadExponent(InputError):
    pass


class UnknownFunction(InputError):
    pass
