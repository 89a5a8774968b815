#
#  galerkin.py
#
#  Stochastic Galerkin projection of the random linear decay equation
#
#      v'(w, t) = -kappa(w) v(w, t) + f(w, t)
#
#  on a finite probability space, with the per-atom closed-form solution as
#  reference.
#

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import structlog
from dataclasses_json import dataclass_json
from scipy.interpolate import CubicSpline

from .algebras import DEFAULT_TOL, Element, ProbAlgebra, classify, expectation, inner2, make_algebra
from .utils import InputError, NumericalError, is_finite

log = structlog.get_logger()

# Gram-Schmidt candidates with a smaller remaining norm are dependent
DEPENDENCE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Forcing:
    """Per-atom forcing f(w_i, t), piecewise linear between table times and
    constant outside them. `values` has one row per time."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float).ravel()
        values = np.atleast_2d(np.array(self.values, dtype=float))
        if len(times) == 0 or values.shape[0] != len(times):
            raise InputError(f"forcing table needs one row per time, got {values.shape[0]} rows for {len(times)} times")
        if np.any(np.diff(times) <= 0):
            raise InputError("forcing times must be strictly increasing")
        if not (is_finite(times) and is_finite(values)):
            raise InputError("forcing table must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @staticmethod
    def constant(values: Union[float, Sequence[float]], n_atoms: int) -> "Forcing":
        return Forcing(np.zeros(1), np.broadcast_to(np.asarray(values, dtype=float), (1, n_atoms)))

    @staticmethod
    def zero(n_atoms: int) -> "Forcing":
        return Forcing.constant(0.0, n_atoms)

    @property
    def n_atoms(self) -> int:
        return self.values.shape[1]

    def at(self, t: float) -> np.ndarray:
        if len(self.times) == 1:
            return self.values[0]
        return np.array([np.interp(t, self.times, self.values[:, i]) for i in range(self.n_atoms)])


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    """u' = -K u + F(t) for the coefficients of v in the orthonormal basis `psi`.

    `psi[i, j]` is psi_j at atom i.
    """

    alg: ProbAlgebra
    psi: np.ndarray
    K: np.ndarray
    forcing: Forcing
    u0: np.ndarray
    kappa: np.ndarray

    @property
    def size(self) -> int:
        return self.psi.shape[1]

    def load(self, t: float) -> np.ndarray:
        """F_j(t) = E[f(t) psi_j]"""
        return self.psi.T @ (self.alg.weights * self.forcing.at(t))  # type: ignore

    def rhs(self, t: float, u: np.ndarray) -> np.ndarray:
        return -self.K @ u + self.load(t)

    def reconstruct(self, coeffs: np.ndarray) -> np.ndarray:
        """Per-atom values sum_j u_j psi_j(w_i), one row per time."""
        return np.atleast_2d(coeffs) @ self.psi.T


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    coeffs: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.coeffs, columns=[f"u{j}" for j in range(self.coeffs.shape[1])])
        frame.insert(0, "t", self.times)
        return frame


@dataclass_json
@dataclass
class ErrorReport:
    max_error: float
    l2_error: float
    projection_residual: float
    galerkin_residual: float
    energy_non_increasing: Optional[bool]
    basis_size: int
    kept: int


@dataclass(frozen=True, eq=False)
class GalerkinProblem:
    """A decay problem as read from a `galerkin` document."""

    alg: ProbAlgebra
    kappa: Element
    forcing: Forcing
    u0: Element
    T: float
    steps: int
    keep: Optional[int] = None

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "GalerkinProblem":
        alg = make_algebra({"model": "function", "weights": d["weights"], "auto_normalise": d.get("auto_normalise", False)})
        n = alg.shape[0]

        def per_atom(value: Any, name: str) -> np.ndarray:
            arr = np.broadcast_to(np.asarray(value, dtype=float), (n,)) if np.ndim(value) == 0 else np.asarray(value)
            if arr.shape != (n,):
                raise InputError(f"{name} needs {n} values, got {len(arr)}")
            return arr

        if "f_table" in d:
            forcing = Forcing(d["f_table"]["times"], d["f_table"]["values"])
            if forcing.n_atoms != n:
                raise InputError(f"f_table rows need {n} values, got {forcing.n_atoms}")
        else:
            forcing = Forcing.constant(per_atom(d.get("f_const", 0.0), "f_const"), n)

        return GalerkinProblem(
            alg=alg,
            kappa=alg.element(per_atom(d["kappa"], "kappa")),
            forcing=forcing,
            u0=alg.element(per_atom(d["u0"], "u0")),
            T=float(d["T"]),
            steps=int(d["steps"]),
            keep=d.get("keep"),
        )


#
#  assembly and time stepping
#


def deviation_basis(alg: ProbAlgebra) -> List[Element]:
    """Orthonormal basis from Gram-Schmidt on the unit and the indicator deviations 1_{w_i} - w_i, in atom order."""
    candidates = [alg.unit()]
    for i in range(alg.shape[0]):
        indicator = np.zeros(alg.shape)
        indicator[i] = 1
        candidates.append(alg.element(indicator) - alg.unit() * alg.weights[i])  # type: ignore

    basis: List[Element] = []
    for c in candidates:
        for _ in range(2):
            for psi in basis:
                c = c - psi * inner2(alg, c, psi)
        norm = math.sqrt(max(inner2(alg, c, c).real, 0.0))
        if norm < DEPENDENCE_TOL:
            continue
        basis.append(c / norm)

    return basis


def assemble(
    alg: ProbAlgebra,
    kappa: Element,
    f: Forcing,
    u0: Element,
    keep: Optional[int] = None,
    tol: float = DEFAULT_TOL,
) -> GalerkinSystem:
    """Project the decay equation onto the (optionally truncated) deviation basis."""
    if alg.model != "function":
        raise NotFunctionModel(f"stochastic Galerkin needs a function algebra, got {alg.model}")
    alg.check(kappa, u0)
    if not classify(alg, kappa, tol).self_adjoint:
        raise UnstableKappa("kappa must be real")
    if float(kappa.data.real.min()) <= 0:
        raise UnstableKappa(f"kappa must be strictly positive, got min {kappa.data.real.min()!r}")
    if f.n_atoms != alg.shape[0]:
        raise InputError(f"forcing has {f.n_atoms} atoms, algebra has {alg.shape[0]}")

    basis = deviation_basis(alg)
    if keep is not None:
        if not 1 <= keep <= len(basis):
            raise InputError(f"keep must lie in 1..{len(basis)}, got {keep}")
        basis = basis[:keep]

    psi = np.column_stack([b.data.real for b in basis])
    weighted = alg.weights * kappa.data.real  # type: ignore
    K = psi.T @ (weighted[:, None] * psi)
    K = (K + K.T) / 2
    coeffs0 = np.array([expectation(alg, u0 * b).real for b in basis])

    log.debug("galerkin.assemble", atoms=alg.shape[0], kept=len(basis))
    return GalerkinSystem(alg=alg, psi=psi, K=K, forcing=f, u0=coeffs0, kappa=kappa.data.real.copy())


def solve(sys: GalerkinSystem, T: float, steps: int) -> Trajectory:
    """Classical fourth-order Runge-Kutta with fixed step T / steps."""
    if steps < 1:
        raise InputError(f"steps must be at least 1, got {steps}")
    if not (math.isfinite(T) and T > 0):
        raise InputError(f"final time must be positive and finite, got {T}")

    h = T / steps
    times = np.linspace(0.0, T, steps + 1)
    coeffs = np.empty((steps + 1, sys.size))
    u = sys.u0.astype(float)
    coeffs[0] = u

    for k in range(steps):
        t = times[k]
        k1 = sys.rhs(t, u)
        k2 = sys.rhs(t + h / 2, u + h / 2 * k1)
        k3 = sys.rhs(t + h / 2, u + h / 2 * k2)
        k4 = sys.rhs(t + h, u + h * k3)
        u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not is_finite(u):
            raise NonFiniteState(f"state became non-finite at t={times[k + 1]!r}")
        coeffs[k + 1] = u

    log.info("galerkin.solve", T=T, steps=steps, size=sys.size)
    return Trajectory(times, coeffs)


#
#  reference solution and error accounting
#


def exact_solution(kappa: np.ndarray, f: Forcing, v0: np.ndarray, times: Sequence[float]) -> np.ndarray:
    """Per-atom solution of v' = -kappa v + f for piecewise-linear f, one row per time.

    Each linear piece f0 + m s on [0, h] advances v by
    v E + f0 (1 - E) / kappa + m (h / kappa - (1 - E) / kappa^2), E = exp(-kappa h).
    """
    times = np.asarray(times, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    out = np.empty((len(times), len(kappa)))

    v = np.asarray(v0, dtype=float).copy()
    t_now = 0.0
    for row, t_end in enumerate(times):
        knots = [t for t in f.times if t_now < t < t_end] + [t_end]
        for t_next in knots:
            h = t_next - t_now
            if h > 0:
                f0 = f.at(t_now)
                slope = (f.at(t_next) - f0) / h
                one_minus_e = -np.expm1(-kappa * h)
                v = v * (1 - one_minus_e) + f0 * one_minus_e / kappa + slope * (h / kappa - one_minus_e / kappa**2)
            t_now = t_next
        out[row] = v

    return out


def galerkin_residual(sys: GalerkinSystem, traj: Trajectory) -> float:
    """max |<v' + kappa v - f, psi_j>_2| over kept j and stored times.

    v' is the derivative of a cubic spline through the stored coefficients, so
    the check measures the trajectory itself. NaN when fewer than two times are stored.
    """
    if len(traj.times) < 2:
        return math.nan

    u_dot = CubicSpline(traj.times, traj.coeffs, axis=0).derivative()(traj.times)
    worst = 0.0
    for t, u, du in zip(traj.times, traj.coeffs, u_dot):
        residual = sys.psi @ du + sys.kappa * (sys.psi @ u) - sys.forcing.at(t)
        worst = max(worst, float(np.max(np.abs(sys.psi.T @ (sys.alg.weights * residual)))))  # type: ignore
    return worst


def energy(traj: Trajectory) -> np.ndarray:
    """E[v(t)^2] at every stored time (the basis is orthonormal)."""
    return np.sum(traj.coeffs**2, axis=1)


def reference_compare(
    alg: ProbAlgebra,
    kappa: Element,
    f: Forcing,
    u0: Element,
    traj: Trajectory,
    keep: Optional[int] = None,
) -> ErrorReport:
    """Compare the reconstructed Galerkin solution with the exact per-atom solution."""
    sys = assemble(alg, kappa, f, u0, keep=keep)
    w = alg.weights

    exact = exact_solution(sys.kappa, f, u0.data.real, traj.times)
    approx = sys.reconstruct(traj.coeffs)
    err = approx - exact

    projected = (exact * w) @ sys.psi @ sys.psi.T  # type: ignore
    projection_residual = float(np.max(np.sqrt(np.sum(w * (exact - projected) ** 2, axis=1))))  # type: ignore

    forced = bool(np.any(f.values != 0))
    e = energy(traj)
    monotone = None if forced else bool(np.all(np.diff(e) <= 1e-9))

    report = ErrorReport(
        max_error=float(np.max(np.abs(err))),
        l2_error=float(np.max(np.sqrt(np.sum(w * err**2, axis=1)))),  # type: ignore
        projection_residual=projection_residual,
        galerkin_residual=galerkin_residual(sys, traj),
        energy_non_increasing=monotone,
        basis_size=alg.shape[0],
        kept=sys.size,
    )
    log.info("galerkin.compare", max_error=report.max_error, kept=report.kept)
    return report


class NotFunctionModel(InputError):
    pass


class UnstableKappa(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass
