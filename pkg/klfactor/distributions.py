#
#  distributions.py
#
#  Gaussian weak distributions xi -> sum_j (B xi)_j z_j, white noise, and
#  stationary processes synthesised from a sampled spectral density.
#
#  Random numbers come from numpy's Philox generator; stream j of seed s is
#  keyed by (s, j), one stream per sample path.
#

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import structlog
from dataclasses_json import dataclass_json

from .correlations import Factorization
from .utils import InputError, max_abs

log = structlog.get_logger()

MAX_SEED = 2**64

# fewest paths autocov_check accepts
MIN_PATHS = 100

# |z| above this is flagged
Z_THRESHOLD = 4.0

# time pairs whose separation is within this of a lag are admissible
LAG_TOL = 1e-9


def _check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or not 0 <= seed < MAX_SEED:
        raise InvalidModel(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    """The Philox stream keyed by (seed, stream)."""
    return np.random.Generator(np.random.Philox(key=(_check_seed(seed) << 64) | int(stream)))


@dataclass(frozen=True, eq=False)
class WeakDistribution:
    """The linear map xi -> sum_j (B xi)_j z_j into Gaussian random variables.

    Its covariance is B^T B. Every call to `sample` replays the same normals,
    so samples for different xi are paired.
    """

    factor: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        factor = np.array(self.factor, dtype=float)
        if factor.ndim != 2:
            raise InputError(f"factor must be a matrix, got shape {factor.shape}")
        factor.setflags(write=False)
        object.__setattr__(self, "factor", factor)
        object.__setattr__(self, "seed", _check_seed(self.seed))

    @property
    def dim(self) -> int:
        return self.factor.shape[1]

    @property
    def covariance(self) -> np.ndarray:
        return self.factor.T @ self.factor

    def normals(self, n: int) -> np.ndarray:
        """The n x p standard normals behind every sample."""
        if n < 1:
            raise InputError(f"sample size must be positive, got {n}")
        return generator(self.seed).standard_normal((n, self.factor.shape[0]))

    def sample(self, xi: Sequence[float], n: int) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.dim,):
            raise InputError(f"expected a vector of length {self.dim}, got shape {xi.shape}")
        return self.normals(n) @ (self.factor @ xi)

    def sample_many(self, xis: Sequence[Sequence[float]], n: int) -> np.ndarray:
        """n x k samples for k test vectors, all drawn from common normals."""
        X = np.atleast_2d(np.asarray(xis, dtype=float))
        if X.shape[1] != self.dim:
            raise InputError(f"expected vectors of length {self.dim}, got shape {X.shape}")
        return self.normals(n) @ (self.factor @ X.T)


@dataclass(frozen=True, eq=False)
class WhiteNoiseMap(WeakDistribution):
    """White noise on a CONS: basis column i is sent to the i-th standard normal."""

    @property
    def basis(self) -> np.ndarray:
        return self.factor.T

    @property
    def covariance(self) -> np.ndarray:
        # unitary by construction
        return np.eye(self.dim)


def white_noise(dim: int, basis: Optional[np.ndarray] = None, seed: int = 0) -> WhiteNoiseMap:
    if dim < 1:
        raise InputError(f"dimension must be positive, got {dim}")
    if basis is None:
        basis = np.eye(dim)

    basis = np.asarray(basis, dtype=float)
    if basis.shape != (dim, dim):
        raise NotOrthonormal(f"basis must be {dim} x {dim}, got shape {basis.shape}")
    gap = max_abs(basis.T @ basis - np.eye(dim))
    if gap > 1e-10:
        raise NotOrthonormal(f"basis columns are not orthonormal (gap {gap!r})")

    return WhiteNoiseMap(basis.T, seed)


def weak_from_factor(factor: Union[Factorization, np.ndarray], seed: int) -> WeakDistribution:
    """The Gaussian weak distribution whose covariance is B^T B."""
    B = factor.B if isinstance(factor, Factorization) else factor
    return WeakDistribution(B, seed)


#
#  stationary processes
#


@dataclass(frozen=True, eq=False)
class StationaryModel:
    """Spectral density S_k on the uniform grid omega_k = omega0 + k * domega."""

    omega0: float
    domega: float
    S: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        S = np.array(self.S, dtype=float).ravel()
        if not (math.isfinite(self.omega0) and math.isfinite(self.domega)):
            raise InvalidModel("frequency grid must be finite")
        if not self.domega > 0:
            raise InvalidModel(f"frequency spacing must be positive, got {self.domega}")
        if not np.all(np.isfinite(S)):
            raise InvalidModel("spectral density must be finite")
        if np.any(S < 0):
            raise InvalidModel("spectral density must be non-negative")
        S.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "seed", _check_seed(self.seed))

    @property
    def frequencies(self) -> np.ndarray:
        return self.omega0 + self.domega * np.arange(len(self.S))

    @property
    def variance(self) -> float:
        return float(np.sum(self.S) * self.domega)

    def autocovariance(self, lags: Union[float, Sequence[float]]) -> np.ndarray:
        """c(tau) = sum_k S_k domega cos(omega_k tau)"""
        tau = np.atleast_1d(np.asarray(lags, dtype=float))
        return np.cos(np.outer(tau, self.frequencies)) @ (self.S * self.domega)

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "StationaryModel":
        return StationaryModel(float(d["omega0"]), float(d["domega"]), np.asarray(d["S"], dtype=float), d["seed"])

    def to_dict(self) -> Dict[str, Any]:
        return {"omega0": self.omega0, "domega": self.domega, "S": self.S.tolist(), "seed": self.seed}


def synth_stationary(model: StationaryModel, times: Sequence[float], n_paths: int) -> np.ndarray:
    """n_paths x len(times) sample paths of sum_k sqrt(S_k domega) (A_k cos omega_k t + B_k sin omega_k t).

    Path j draws its A and B from stream j of the model's seed.
    """
    t = np.asarray(times, dtype=float).ravel()
    if len(model.S) == 0:
        raise EmptyGrid("spectral density has no frequency bins")
    if len(t) == 0:
        raise EmptyGrid("no sample times")
    if not np.all(np.isfinite(t)):
        raise InputError("sample times must be finite")
    if n_paths < 1:
        raise InputError(f"number of paths must be positive, got {n_paths}")

    K = len(model.S)
    amplitude = np.sqrt(model.S * model.domega)
    phase = np.outer(model.frequencies, t)
    cos, sin = np.cos(phase), np.sin(phase)

    draws = np.empty((n_paths, 2 * K))
    for j in range(n_paths):
        draws[j] = generator(model.seed, j).standard_normal(2 * K)

    paths = (draws[:, :K] * amplitude) @ cos + (draws[:, K:] * amplitude) @ sin
    log.info("synth.paths", paths=n_paths, times=len(t), bins=K, seed=model.seed)
    return paths


def lag_pairs(times: Sequence[float], lag: float) -> List[tuple]:
    """Index pairs (a, b) with times[b] - times[a] equal to `lag`."""
    t = np.asarray(times, dtype=float)
    diff = t[None, :] - t[:, None]
    a, b = np.nonzero(np.abs(diff - lag) <= LAG_TOL * (1 + abs(lag)))
    return list(zip(a.tolist(), b.tolist()))


def lag_products(paths: np.ndarray, times: Sequence[float], lag: float) -> np.ndarray:
    """n_paths x n_pairs products q(t_a) q(t_b) over the admissible pairs of `lag`."""
    pairs = lag_pairs(times, lag)
    if not pairs:
        raise LagNotOnGrid(f"no pair of sample times is {lag} apart")
    a, b = (np.array(ix) for ix in zip(*pairs))
    return paths[:, a] * paths[:, b]


@dataclass_json
@dataclass
class AutocovRow:
    lag: float
    empirical: float
    target: float
    std_error: float
    z_score: float
    pairs: int
    flagged: bool


def autocov_check(
    paths: np.ndarray,
    model: StationaryModel,
    times: Sequence[float],
    lags: Sequence[float],
    threshold: float = Z_THRESHOLD,
) -> List[AutocovRow]:
    """Empirical autocovariance against its target, with a z-score per lag.

    Each path contributes its mean over admissible time pairs; the standard
    error is taken across paths.
    """
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    n = paths.shape[0]
    if n < MIN_PATHS:
        raise InsufficientPaths(f"autocovariance check needs at least {MIN_PATHS} paths, got {n}")

    rows = []
    for lag, target in zip(lags, model.autocovariance(lags)):
        products = lag_products(paths, times, float(lag))
        per_path = products.mean(axis=1)
        empirical = float(per_path.mean())
        std_error = float(per_path.std(ddof=1) / math.sqrt(n))
        diff = empirical - float(target)

        if std_error > 0:
            z = diff / std_error
        else:
            z = 0.0 if diff == 0 else math.copysign(math.inf, diff)

        rows.append(
            AutocovRow(
                lag=float(lag),
                empirical=empirical,
                target=float(target),
                std_error=std_error,
                z_score=float(z),
                pairs=products.shape[1],
                flagged=bool(abs(z) > threshold),
            )
        )
        log.debug("synth.autocov", lag=float(lag), empirical=empirical, target=float(target), z=z)

    return rows


def autocov_frame(rows: List[AutocovRow]) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in rows])  # type: ignore


class NotOrthonormal(InputError):
    pass


class EmptyGrid(InputError):
    pass


class InsufficientPaths(InputError):
    pass


class LagNotOnGrid(InputError):
    pass


class InvalidModel(InputError):
    pass
