#
#  correlations.py
#
#  Correlation operators of weighted snapshot sets, their spectral
#  decomposition (Karhunen-Loeve / POD), truncation, factorisations and the
#  companion (kernel) operator on parameter space.
#

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.linalg as la
import structlog
from scipy.linalg import lapack

from . import files
from .utils import InputError, NumericalError, fix_sign, leading_sign, max_abs

log = structlog.get_logger()

FactorKind = Literal["eig_sqrt", "cholesky", "spectral_root", "external"]

# largest state dimension we build a dense correlation matrix for
DEFAULT_DIM_CAP = 10_000

# modes with eigenvalue below RANK_TOL * lambda_1 get no coefficient function
RANK_TOL = 1e-12

# correlation operators with smaller trace are treated as zero
ZERO_TRACE = 1e-14

# eigenvalues below -PSD_TOL * lambda_max mean the matrix is not PSD
PSD_TOL = 1e-10

# singular values of a factor below CONNECT_RANK_TOL * max(p, d) * sigma_1 count as zero
CONNECT_RANK_TOL = float(np.finfo(float).eps)

# sanity checks
assert 0 < CONNECT_RANK_TOL < RANK_TOL < 1


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """Weighted snapshots r(mu_i) stored as the columns of a d x m matrix."""

    values: np.ndarray
    weights: np.ndarray
    labels: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        weights = np.array(self.weights, dtype=float).ravel()

        if values.ndim != 2 or values.shape[1] == 0 or values.shape[0] == 0:
            raise InvalidSnapshots(f"snapshots must form a non-empty d x m matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidSnapshots("snapshot columns must be finite")
        if len(weights) != values.shape[1]:
            raise InvalidSnapshots(f"{len(weights)} weights given for {values.shape[1]} snapshots")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise InvalidSnapshots("weights must be strictly positive (faithfulness/positivity of the measure)")

        labels = tuple(self.labels) or tuple(str(i) for i in range(values.shape[1]))
        if len(labels) != values.shape[1]:
            raise InvalidSnapshots(f"{len(labels)} labels given for {values.shape[1]} snapshots")

        values.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def count(self) -> int:
        return self.values.shape[1]

    @classmethod
    def read_csv(
        cls,
        path: Union[str, Path],
        weights: Optional[Sequence[float]] = None,
        uniform: bool = False,
        labels: bool = False,
    ) -> "SnapshotSet":
        """One snapshot per column; with `labels`, the first row names the parameters."""
        if labels:
            values, header = files.load_matrix_csv(path, labels=True)
        else:
            values, header = files.load_matrix_csv(path), []

        if np.iscomplexobj(values):
            raise InvalidSnapshots(f"{path}: snapshots must be real")

        m = values.shape[1]
        if weights is None:
            if not uniform:
                raise InputError("snapshot weights are required, or ask for uniform weights")
            weights = np.full(m, 1 / m)

        return cls(values, np.asarray(weights, dtype=float), files.split_labels(header, m) if labels else ())

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, weights: Sequence[float]) -> "SnapshotSet":
        return cls(frame.to_numpy(dtype=float), np.asarray(weights, dtype=float), tuple(str(c) for c in frame.columns))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, columns=list(self.labels))


@dataclass(frozen=True, eq=False)
class CorrelationOp:
    matrix: np.ndarray
    trace: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class RSvd:
    """Eigenpairs of C with the coefficient functions s_m(mu_i).

    `eigenvalues` holds the whole spectrum (descending); `modes` and `coeffs`
    only the k retained pairs.
    """

    eigenvalues: np.ndarray
    modes: np.ndarray
    coeffs: np.ndarray
    trace: float

    @property
    def rank(self) -> int:
        return self.modes.shape[1]

    def energy_frame(self) -> pd.DataFrame:
        """Per-mode energy bookkeeping: eigenvalue, cumulative and residual energy fractions."""
        lam = self.eigenvalues
        total = self.trace if self.trace > 0 else 1.0
        cumulative = np.cumsum(lam) / total
        return pd.DataFrame(
            {
                "mode": np.arange(1, len(lam) + 1),
                "lambda": lam,
                "cumulative_energy": cumulative,
                "residual_energy": np.clip(1 - cumulative, 0, None),
            }
        )


@dataclass(frozen=True, eq=False)
class KLExpansion:
    rank: int
    eigenvalues: np.ndarray
    modes: np.ndarray
    coeffs: np.ndarray
    discarded_energy: float

    def reconstruct(self) -> np.ndarray:
        """The rank-n approximations r_ROM(mu_i), as columns."""
        return self.modes @ (np.sqrt(self.eigenvalues)[:, None] * self.coeffs.T)

    def weighted_error(self, snap: SnapshotSet) -> float:
        """sum_i w_i ||r_i - r_ROM(mu_i)||^2"""
        residual = snap.values - self.reconstruct()
        return float(np.sum(snap.weights * np.sum(residual**2, axis=0)))


@dataclass(frozen=True, eq=False)
class Factorization:
    """C = B^T B with B of shape p x d."""

    B: np.ndarray
    kind: FactorKind

    @property
    def gram(self) -> np.ndarray:
        return self.B.T @ self.B

    def residual(self, C: CorrelationOp) -> float:
        return max_abs(self.gram - C.matrix)


@dataclass(frozen=True, eq=False)
class Companion:
    """The kernel matrix K[i, j] = <r_i, r_j> and its symmetrised weighted form."""

    gram: np.ndarray
    operator: np.ndarray
    eigenvalues: np.ndarray
    coeffs: np.ndarray
    modes: np.ndarray = field(repr=False)


#
#  building and decomposing C
#


def build_correlation(snap: SnapshotSet, dim_cap: int = DEFAULT_DIM_CAP) -> CorrelationOp:
    """C = sum_i w_i r_i r_i^T"""
    if snap.dim > dim_cap:
        raise DimensionOverflow(f"state dimension {snap.dim} exceeds the cap of {dim_cap}")

    R = snap.values
    C = (R * snap.weights) @ R.T
    C = (C + C.T) / 2
    trace = float(np.sum(snap.weights * np.sum(R**2, axis=0)))

    log.debug("correlation.build", dim=snap.dim, count=snap.count, trace=trace)
    return CorrelationOp(C, trace)


def _descending_eigh(M: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    lam, V = la.eigh(M)
    return lam[::-1], V[:, ::-1]


def eig_decompose(C: CorrelationOp, snap: SnapshotSet, rank_tol: float = RANK_TOL) -> RSvd:
    """Spectral decomposition of C and the coefficient functions s_m = lambda_m^(-1/2) <r_i, v_m>."""
    if C.trace <= ZERO_TRACE:
        raise ZeroOperator(f"correlation operator has trace {C.trace!r}")

    lam, V = _descending_eigh(C.matrix)
    lam = np.clip(lam, 0, None)

    k = int(np.count_nonzero(lam > rank_tol * lam[0]))
    modes = np.column_stack([fix_sign(V[:, m]) for m in range(k)]) if k else np.zeros((C.dim, 0))
    coeffs = (snap.values.T @ modes) / np.sqrt(lam[:k])

    log.info("correlation.decompose", dim=C.dim, retained=k, lambda_1=float(lam[0]))
    return RSvd(eigenvalues=lam, modes=modes, coeffs=coeffs, trace=C.trace)


def kl_truncate(svd: RSvd, n: int) -> KLExpansion:
    """Keep the n leading eigenpairs; the rest is the discarded energy."""
    if not 0 <= n <= svd.rank:
        raise RankOutOfRange(f"rank {n} outside 0..{svd.rank}")

    discarded = float(np.sum(svd.eigenvalues[n:]))
    return KLExpansion(
        rank=n,
        eigenvalues=svd.eigenvalues[:n].copy(),
        modes=svd.modes[:, :n].copy(),
        coeffs=svd.coeffs[:, :n].copy(),
        discarded_energy=discarded,
    )


def select_rank(svd: RSvd, residual_energy: float) -> int:
    """Smallest n whose relative residual energy sum_{m>n} lambda_m / trace is at most the threshold."""
    if not 0 <= residual_energy < 1:
        raise InputError(f"residual energy threshold must lie in [0, 1), got {residual_energy}")
    residual = svd.energy_frame()["residual_energy"].to_numpy()
    residual = np.concatenate([[1.0], residual])
    return min(int(np.count_nonzero(residual > residual_energy)), svd.rank)


def kl_coordinates(kl: KLExpansion, r: np.ndarray) -> np.ndarray:
    """s_m(r) = lambda_m^(-1/2) <r, v_m> for a state vector r."""
    return (kl.modes.T @ np.asarray(r, dtype=float)) / np.sqrt(kl.eigenvalues)


def kl_reconstruct(kl: KLExpansion, s: np.ndarray) -> np.ndarray:
    return kl.modes @ (np.sqrt(kl.eigenvalues) * np.asarray(s, dtype=float))


def apply_map(snap: SnapshotSet, u: np.ndarray) -> np.ndarray:
    """R u = (<r_i, u>)_i"""
    return snap.values.T @ np.asarray(u, dtype=float)


def apply_adjoint(snap: SnapshotSet, phi: np.ndarray) -> np.ndarray:
    """R* phi = sum_i w_i phi_i r_i"""
    return snap.values @ (snap.weights * np.asarray(phi, dtype=float))


#
#  factorisations
#


def _check_psd(C: CorrelationOp) -> np.ndarray:
    lam = la.eigvalsh(C.matrix)
    top = max(abs(lam[-1]), 0.0) if len(lam) else 0.0
    if len(lam) and lam[0] < -PSD_TOL * max(top, ZERO_TRACE):
        raise NotPSD(f"correlation matrix has eigenvalue {lam[0]!r} (largest {top!r})")
    return lam


def eig_factor(svd: RSvd) -> Factorization:
    """B = Lambda^(1/2) V^T over the retained modes."""
    return Factorization(np.sqrt(svd.eigenvalues[: svd.rank])[:, None] * svd.modes.T, "eig_sqrt")


def cholesky_factor(C: CorrelationOp) -> Factorization:
    """Pivoted Cholesky C = L L^T, returned as B = L^T (upper-triangular up to the pivot permutation)."""
    _check_psd(C)

    c, piv, rank, info = lapack.dpstrf(np.array(C.matrix, dtype=float, order="F"), lower=0)
    if info < 0:
        raise NumericalError(f"pivoted Cholesky failed with info={info}")

    U = np.triu(c)
    U[rank:, :] = 0

    B = np.zeros_like(U)
    B[:, piv - 1] = U

    log.debug("correlation.cholesky", rank=int(rank), residual=max_abs(B.T @ B - C.matrix))
    return Factorization(B, "cholesky")


def spectral_root(C: CorrelationOp) -> Factorization:
    """B = C^(1/2) = V Lambda^(1/2) V^T"""
    _check_psd(C)
    lam, V = la.eigh(C.matrix)
    B = (V * np.sqrt(np.clip(lam, 0, None))) @ V.T
    return Factorization((B + B.T) / 2, "spectral_root")


def factor_singular_vectors(fact: Factorization, svd: RSvd) -> np.ndarray:
    """Left singular vectors h_m = lambda_m^(-1/2) B v_m, so that B = sum_m lambda_m^(1/2) h_m v_m^T."""
    lam = svd.eigenvalues[: svd.rank]
    return (fact.B @ svd.modes) / np.sqrt(lam)


def _range_complement(U: np.ndarray, p: int) -> np.ndarray:
    if U.shape[1] == 0:
        return np.eye(p)
    return la.null_space(U.T)


def unitary_connect(first: Factorization, second: Factorization) -> np.ndarray:
    """X with second.B = X first.B, orthonormal on the ranges and completed on their complements.

    Every singular triplet of first.B above round-off is kept (at most as many
    as second.B has rows). The images second.B v_i / s_i are orthonormalised in
    order of decreasing s_i.
    """
    B1, B2 = first.B, second.B
    if B1.shape[1] != B2.shape[1]:
        raise MismatchedCorrelation(f"factors act on dimensions {B1.shape[1]} and {B2.shape[1]}")

    G1, G2 = B1.T @ B1, B2.T @ B2
    scale = 1 + max(np.trace(G1), np.trace(G2))
    if max_abs(G1 - G2) > 1e-8 * scale:
        raise MismatchedCorrelation(f"factors describe different correlations (gap {max_abs(G1 - G2)!r})")

    U1, s1, V1t = la.svd(B1, full_matrices=False)
    cut = CONNECT_RANK_TOL * max(B1.shape) * (s1[0] if len(s1) else 0.0)
    r = int(np.count_nonzero(s1 > cut)) if len(s1) and s1[0] > 0 else 0
    r = min(r, B2.shape[0])

    U1r = U1[:, :r]
    U2r = np.zeros((B2.shape[0], 0))
    if r:
        Q, R = la.qr(B2 @ V1t[:r].T / s1[:r], mode="economic")
        U2r = Q * np.where(np.diag(R) < 0, -1.0, 1.0)

    X = U2r @ U1r.T
    N1 = _range_complement(U1r, B1.shape[0])
    N2 = _range_complement(U2r, B2.shape[0])
    q = min(N1.shape[1], N2.shape[1])
    X = X + N2[:, :q] @ N1[:, :q].T

    log.debug("correlation.connect", kinds=(first.kind, second.kind), rank=r, residual=max_abs(B2 - X @ B1))
    return X


#
#  the companion operator on parameter space
#


def companion_gram(
    snap: SnapshotSet,
    kernel: Optional[Callable[[str, str], float]] = None,
    rank_tol: float = RANK_TOL,
) -> Companion:
    """Kernel matrix K, the symmetrised operator W^(1/2) K W^(1/2) and its eigenpairs.

    Eigenvectors are mapped back to coefficient functions s = W^(-1/2) u, signed
    so that the implied mode R W^(1/2) u / sqrt(lambda) follows the same sign
    rule as `eig_decompose`. An optional `kernel` on parameter labels is checked
    against K.
    """
    R = snap.values
    K = R.T @ R

    if kernel is not None:
        expected = np.array([[kernel(a, b) for b in snap.labels] for a in snap.labels], dtype=float)
        gap = max_abs(K - expected)
        if gap > 1e-10 * (1 + max_abs(K)):
            raise KernelMismatch(f"kernel disagrees with snapshot inner products by {gap!r}")

    sw = np.sqrt(snap.weights)
    operator = sw[:, None] * K * sw[None, :]
    operator = (operator + operator.T) / 2

    lam, U = _descending_eigh(operator)
    lam = np.clip(lam, 0, None)
    k = int(np.count_nonzero(lam > rank_tol * lam[0])) if lam[0] > 0 else 0

    coeffs = np.zeros((snap.count, k))
    modes = np.zeros((snap.dim, k))
    for m in range(k):
        v = R @ (sw * U[:, m]) / np.sqrt(lam[m])
        sign = leading_sign(v)
        modes[:, m] = sign * v
        coeffs[:, m] = sign * U[:, m] / sw

    return Companion(gram=K, operator=operator, eigenvalues=lam, coeffs=coeffs, modes=modes)


def rv_mean_cov(snap: SnapshotSet, tol: float = 1e-9) -> Tuple[np.ndarray, CorrelationOp]:
    """Mean sum_i w_i r_i and covariance of the centred snapshots (probability weights only)."""
    total = float(np.sum(snap.weights))
    if abs(total - 1) > tol:
        raise WeightsNotProbability(f"weights sum to {total!r}, a probability measure is required")

    mean = snap.values @ snap.weights
    centred = snap.values - mean[:, None]
    cov = (centred * snap.weights) @ centred.T
    trace = float(np.sum(snap.weights * np.sum(centred**2, axis=0)))
    return mean, CorrelationOp((cov + cov.T) / 2, trace)


def spectral_projectors(eigenvalues: np.ndarray, modes: np.ndarray, width: float) -> List[np.ndarray]:
    """Projectors onto clusters of (near-)equal eigenvalues, for comparisons that must ignore
    the arbitrary basis inside a degenerate eigenspace."""
    out: List[np.ndarray] = []
    start = 0
    for m in range(1, len(eigenvalues) + 1):
        if m == len(eigenvalues) or eigenvalues[start] - eigenvalues[m] > width:
            V = modes[:, start:m]
            out.append(V @ V.T)
            start = m
    return out


class InvalidSnapshots(InputError):
    pass


class DimensionOverflow(InputError):
    pass


class RankOutOfRange(InputError):
    pass


class WeightsNotProbability(InputError):
    pass


class ZeroOperator(NumericalError):
    pass


class NotPSD(NumericalError):
    pass


class MismatchedCorrelation(NumericalError):
    pass


class KernelMismatch(NumericalError):
    pass
