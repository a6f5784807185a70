"""Joint survival of K prioritized endpoints built from marginals and a copula.

Two copulas are supported: Gumbel-Hougaard (one parameter, positive
dependence, Kendall's tau = 1 - 1/kappa) and Gaussian (a full correlation
matrix). Both are applied to the marginal *survival* functions, so that

    S(y_1, ..., y_K) = C(S_1(y_1), ..., S_K(y_K)).

Endpoints are numbered from 1 in the public functions, matching their
clinical priority order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .mvn import ZMAX, mvn_cdf
from .survival import MarginalModel


def tau_to_kappa(tau: float) -> float:
    """Gumbel-Hougaard parameter for a Kendall's tau in [0, 1)."""
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"Gumbel-Hougaard needs 0 <= tau < 1, got {tau}")
    return 1.0 / (1.0 - tau)


def tau_to_corr(tau) -> np.ndarray:
    """Elementwise sin(pi * tau / 2), the exact tau-to-correlation map for elliptical copulas."""
    t = np.asarray(tau, dtype=float)
    if np.any(np.abs(t) > 1):
        raise ValueError("Kendall's tau must lie in [-1, 1]")
    return np.sin(np.pi * t / 2)


@dataclass(frozen=True)
class GumbelHougaard:
    kappa: float

    def __post_init__(self):
        if not (np.isfinite(self.kappa) and self.kappa >= 1):
            raise ValueError(f"Gumbel-Hougaard needs kappa >= 1, got {self.kappa}")
        object.__setattr__(self, "kappa", float(self.kappa))

    @classmethod
    def from_tau(cls, tau: float) -> "GumbelHougaard":
        return cls(tau_to_kappa(tau))

    @property
    def tau(self) -> float:
        return 1.0 - 1.0 / self.kappa

    def _norm(self, H):
        """(sum_k H_k^kappa)^(1/kappa), computed without overflow."""
        if self.kappa == 1.0:
            return H.sum(axis=-1)
        m = H.max(axis=-1)
        safe = np.where(m > 0, m, 1.0)
        ratio = H / safe[..., None]
        return m * np.sum(ratio**self.kappa, axis=-1) ** (1.0 / self.kappa)

    def survival(self, H: np.ndarray) -> np.ndarray:
        """Joint survival given marginal cumulative hazards ``H`` (last axis = endpoint)."""
        return np.exp(-self._norm(H))

    def partial_weight(self, H: np.ndarray, j: int, S: np.ndarray) -> np.ndarray:
        """Factor ``w`` with ``-dS/dy_j = S * hazard_j(y_j) * w``."""
        if self.kappa == 1.0:
            return np.ones(H.shape[:-1])
        A = self._norm(H)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(A > 0, H[..., j] / A, 1.0)
        return r ** (self.kappa - 1.0)

    def sample_neglog(self, rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
        """Draws of ``-log U`` for ``U`` from the copula, via positive-stable frailty."""
        alpha = 1.0 / self.kappa
        E = rng.standard_exponential((n, dim))
        if alpha == 1.0:
            return E
        # Kanter / Chambers-Mallows-Stuck: Laplace transform exp(-s^alpha)
        theta = rng.uniform(0.0, np.pi, n)
        W = rng.standard_exponential(n)
        V = (np.sin(alpha * theta) / np.sin(theta) ** (1.0 / alpha)) * (
            np.sin((1.0 - alpha) * theta) / W
        ) ** ((1.0 - alpha) / alpha)
        return (E / V[:, None]) ** alpha


@dataclass(frozen=True, eq=False)
class GaussianCopula:
    corr: np.ndarray

    def __post_init__(self):
        c = np.array(self.corr, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("correlation matrix must be square")
        if not np.allclose(c, c.T, atol=1e-12) or not np.allclose(np.diag(c), 1.0, atol=1e-12):
            raise ValueError("correlation matrix must be symmetric with unit diagonal")
        try:
            chol = np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            raise ValueError("correlation matrix must be positive definite") from None
        c.setflags(write=False)
        object.__setattr__(self, "corr", c)
        object.__setattr__(self, "_chol", chol)

    def __eq__(self, other):
        return isinstance(other, GaussianCopula) and np.array_equal(self.corr, other.corr)

    def __hash__(self):
        return hash(self.corr.tobytes())

    def __repr__(self):
        return f"GaussianCopula(corr={self.corr.tolist()})"

    @classmethod
    def from_tau(cls, tau, dim: int | None = None) -> "GaussianCopula":
        """From a K x K Kendall's tau matrix, or one common tau and ``dim``."""
        t = np.asarray(tau, dtype=float)
        if t.ndim == 0:
            if dim is None:
                raise ValueError("dim is required with a scalar tau")
            t = np.full((dim, dim), float(t))
            np.fill_diagonal(t, 1.0)
        return cls(tau_to_corr(t))

    @property
    def dim(self) -> int:
        return self.corr.shape[0]

    @staticmethod
    def _z(H):
        """Phi^-1(S) written through F = 1 - S for accuracy near S = 1; +inf where H = 0."""
        with np.errstate(divide="ignore"):
            return np.maximum(-special.ndtri(-np.expm1(-H)), -ZMAX)

    def survival(self, H: np.ndarray) -> np.ndarray:
        z = self._z(H)
        shape = z.shape[:-1]
        return mvn_cdf(z.reshape(-1, z.shape[-1]), self.corr).reshape(shape)

    def partial_weight(self, H: np.ndarray, j: int, S: np.ndarray) -> np.ndarray:
        """Factor ``w`` with ``-dS/dy_j = S * hazard_j(y_j) * w``.

        Equals ``S_j(y_j) / S * P(Z_-j <= z_-j | Z_j = z_j)``; the conditional
        probability is a (K-1)-dimensional normal CDF.
        """
        z = self._z(H)
        K = z.shape[-1]
        S_j = np.exp(-H[..., j])
        if K == 1:
            cond = np.ones(z.shape[:-1])
        else:
            c = self.corr
            rest = [i for i in range(K) if i != j]
            b = c[rest, j]
            cov = c[np.ix_(rest, rest)] - np.outer(b, b)
            sd = np.sqrt(np.diag(cov))
            ccorr = cov / np.outer(sd, sd)
            zj = np.minimum(z[..., j : j + 1], ZMAX)
            with np.errstate(invalid="ignore"):
                upper = (z[..., rest] - zj * b) / sd
            flat = upper.reshape(-1, K - 1)
            cond = mvn_cdf(np.clip(flat, -ZMAX, ZMAX), ccorr).reshape(z.shape[:-1])
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(S > 0, S_j * cond / S, 0.0)

    def sample_neglog(self, rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
        if dim != self.dim:
            raise ValueError("copula dimension does not match the number of endpoints")
        Z = rng.standard_normal((n, dim)) @ self._chol.T
        return -special.log_ndtr(Z)


Copula = GumbelHougaard | GaussianCopula


class ArmJointModel:
    """K marginal laws for one arm, coupled by a copula."""

    def __init__(self, marginals: Sequence[MarginalModel], copula: Copula | None = None):
        self.marginals = tuple(marginals)
        if not self.marginals:
            raise ValueError("need at least one endpoint")
        self.copula = copula if copula is not None else GumbelHougaard(1.0)
        if isinstance(self.copula, GaussianCopula) and self.copula.dim != self.K:
            raise ValueError("Gaussian copula dimension does not match the number of endpoints")

    def __repr__(self):
        return f"ArmJointModel(marginals={list(self.marginals)!r}, copula={self.copula!r})"

    def __eq__(self, other):
        return (
            isinstance(other, ArmJointModel)
            and self.marginals == other.marginals
            and self.copula == other.copula
        )

    __hash__ = None

    @property
    def K(self) -> int:
        return len(self.marginals)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted({b for m in self.marginals for b in m.breakpoints}))

    def _check(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape[-1:] != (self.K,):
            raise ValueError(f"expected {self.K} coordinates on the last axis, got shape {y.shape}")
        if np.any(y < 0) or np.any(np.isnan(y)):
            raise ValueError("event times must be nonnegative")
        return y

    def cumhaz(self, y: np.ndarray) -> np.ndarray:
        return np.stack([m._cumhaz(y[..., k]) for k, m in enumerate(self.marginals)], axis=-1)

    def survival(self, y):
        y = self._check(y)
        if self.K == 1:
            out = np.exp(-self.marginals[0]._cumhaz(y[..., 0]))
        else:
            out = self.copula.survival(self.cumhaz(y))
        return float(out) if out.ndim == 0 else out

    def partial(self, y, endpoint: int):
        """-dS/dy at coordinate ``endpoint`` (1-based); nonnegative."""
        y = self._check(y)
        if not 1 <= endpoint <= self.K:
            raise IndexError(f"endpoint must be between 1 and {self.K}, got {endpoint}")
        j = endpoint - 1
        marg = self.marginals[j]
        if self.K == 1:
            out = marg._hazard(y[..., 0]) * np.exp(-marg._cumhaz(y[..., 0]))
        else:
            H = self.cumhaz(y)
            S = self.copula.survival(H)
            out = S * marg._hazard(y[..., j]) * self.copula.partial_weight(H, j, S)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` event-time vectors, shape ``(n, K)``."""
        if n < 1:
            raise ValueError("n must be at least 1")
        neglog_u = self.copula.sample_neglog(rng, n, self.K)
        return np.stack(
            [m._inv_cumhaz(neglog_u[:, k]) for k, m in enumerate(self.marginals)], axis=1
        )


def joint_survival(arm: ArmJointModel, y):
    return arm.survival(y)


def joint_survival_partial(arm: ArmJointModel, y, endpoint: int):
    return arm.partial(y, endpoint)


def sample_event_times(arm: ArmJointModel, rng: np.random.Generator, n: int) -> np.ndarray:
    return arm.sample(rng, n)
