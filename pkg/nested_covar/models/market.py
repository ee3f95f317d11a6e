from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple
import hashlib

import numpy as np

from ..errors import DomainError, NotPositiveDefinite


def _frozen(array, dtype=float) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class MarketModel:
    """q-asset correlated GBM world: real-world drift on [0, tau], r_f on [tau, T]"""

    drift_real: np.ndarray
    r_f: float
    cov: np.ndarray
    chol: np.ndarray
    grid: np.ndarray
    tau_index: int
    s0: np.ndarray

    def __post_init__(self):
        for name in ("drift_real", "cov", "chol", "grid", "s0"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

        q = self.s0.shape[0]
        if self.drift_real.shape != (q,) or self.cov.shape != (q, q) or self.chol.shape != (q, q):
            raise DomainError(f"inconsistent market dimensions for q={q}")
        if np.any(self.s0 <= 0):
            raise DomainError("initial prices must be strictly positive")
        if np.any(np.diag(self.cov) <= 0):
            raise NotPositiveDefinite("covariance diagonal must be strictly positive", int(np.argmin(np.diag(self.cov))))
        if self.grid[0] <= 0 or np.any(np.diff(self.grid) <= 0):
            raise DomainError("monitoring grid must satisfy 0 < t_1 < ... < t_M")
        if not 1 <= self.tau_index < self.grid.shape[0]:
            raise DomainError(f"tau_index must lie in [1, M), got {self.tau_index}")

        rebuilt = self.chol @ self.chol.T
        tolerance = 1e-10 * np.abs(self.cov) + 1e-14 * np.max(np.abs(self.cov))
        if np.any(np.abs(rebuilt - self.cov) > tolerance):
            raise NotPositiveDefinite("Cholesky factor does not reproduce the covariance", 0)

    @property
    def q(self) -> int:
        return self.s0.shape[0]

    @property
    def steps(self) -> int:
        """M, the number of monitoring dates"""
        return self.grid.shape[0]

    @property
    def tau(self) -> float:
        return float(self.grid[self.tau_index - 1])

    @property
    def maturity(self) -> float:
        return float(self.grid[-1])

    @property
    def sigma_bar(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    @property
    def outer_increments(self) -> np.ndarray:
        """dt for t_1..t_{M_tau} measured from 0"""
        return np.diff(np.concatenate(([0.0], self.grid[: self.tau_index])))

    @property
    def inner_increments(self) -> np.ndarray:
        """dt for t_{M_tau+1}..t_M"""
        return np.diff(self.grid[self.tau_index - 1:])

    @property
    def feature_dimension(self) -> int:
        return 3 * self.q


@dataclass(frozen=True, eq=False)
class RiskFactorVector:
    """One outer scenario Z = (S(tau), bridge-adjusted running max, partial geometric mean)"""

    s_tau: np.ndarray
    run_max: np.ndarray
    geo_partial: np.ndarray

    def __post_init__(self):
        for name in ("s_tau", "run_max", "geo_partial"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if not (np.all(self.s_tau > 0) and np.all(self.run_max > 0) and np.all(self.geo_partial > 0)):
            raise DomainError("risk factors must be strictly positive")

    @property
    def q(self) -> int:
        return self.s_tau.shape[0]

    def features(self) -> np.ndarray:
        return np.concatenate((self.s_tau, self.run_max, self.geo_partial))

    def fingerprint(self) -> str:
        digest = hashlib.blake2b(digest_size=8)
        for array in (self.s_tau, self.run_max, self.geo_partial):
            digest.update(np.ascontiguousarray(array).tobytes())
        return digest.hexdigest()


@dataclass(frozen=True)
class SeedLineage:
    """Counter-based identity of one generated path"""

    root: int
    stream: int
    scenario_id: int
    path_index: int
    parent: Optional[str] = None


@dataclass(frozen=True, eq=False)
class PathBundle:
    """
    One inner continuation from tau to T.

    prices holds the monitored prices on t_{M_tau+1}..t_M (q x (M - M_tau));
    bridge_max is the cumulative bridge-adjusted maximum over [0, T] and
    geo_mean the full-horizon geometric mean over all M fixings.
    """

    prices: np.ndarray
    bridge_max: np.ndarray
    geo_mean: np.ndarray
    seed_lineage: SeedLineage

    def __post_init__(self):
        for name in ("prices", "bridge_max", "geo_mean"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def terminal(self) -> np.ndarray:
        return self.prices[:, -1]


@dataclass(frozen=True, eq=False)
class ScenarioBatch(Sequence[RiskFactorVector]):
    """Array-backed sequence of outer scenarios; row i is scenario ids[i]"""

    s_tau: np.ndarray
    run_max: np.ndarray
    geo_partial: np.ndarray
    ids: np.ndarray
    root: int = 0
    stream: int = 0

    def __post_init__(self):
        for name in ("s_tau", "run_max", "geo_partial"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "ids", _frozen(self.ids, dtype=np.int64))

    def __len__(self) -> int:
        return self.s_tau.shape[0]

    def __getitem__(self, index):
        if isinstance(index, slice):
            return ScenarioBatch(
                self.s_tau[index], self.run_max[index], self.geo_partial[index],
                self.ids[index], self.root, self.stream,
            )
        return RiskFactorVector(self.s_tau[index], self.run_max[index], self.geo_partial[index])

    def __iter__(self) -> Iterator[RiskFactorVector]:
        for i in range(len(self)):
            yield self[i]

    def features(self) -> np.ndarray:
        """(n, 3q) design matrix of risk factors"""
        return np.hstack((self.s_tau, self.run_max, self.geo_partial))

    @classmethod
    def concatenate(cls, parts: Sequence["ScenarioBatch"]) -> "ScenarioBatch":
        first = parts[0]
        return cls(
            np.concatenate([p.s_tau for p in parts]),
            np.concatenate([p.run_max for p in parts]),
            np.concatenate([p.geo_partial for p in parts]),
            np.concatenate([p.ids for p in parts]),
            first.root,
            first.stream,
        )


@dataclass(frozen=True, eq=False)
class InnerSummary:
    """Per-path sufficient statistics of inner continuations, shaped (n, l, q)"""

    terminal: np.ndarray
    bridge_max: np.ndarray
    geo_mean: np.ndarray

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.terminal.shape

