"""Marginal event-time laws and the combined censoring law.

All times are in days. Every model evaluates elementwise on scalars or
numpy arrays and returns the same shape it was given (a Python float for
scalar input).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special, stats


def _as_times(t, name="t"):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError(f"{name} must be nonnegative, got {t!r}")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


class MarginalModel:
    """Survival law of one endpoint in one arm.

    Subclasses provide the cumulative hazard, the hazard (right limit at
    breakpoints) and the inverse cumulative hazard; everything else follows.
    """

    def cumulative_hazard(self, t):
        t_arr = _as_times(t)
        return _out(self._cumhaz(t_arr), t)

    def hazard(self, t):
        t_arr = _as_times(t)
        return _out(self._hazard(t_arr), t)

    def survival(self, t):
        t_arr = _as_times(t)
        return _out(np.exp(-self._cumhaz(t_arr)), t)

    def density(self, t):
        """-dS/dt, using the right-limit hazard at breakpoints."""
        t_arr = _as_times(t)
        return _out(self._hazard(t_arr) * np.exp(-self._cumhaz(t_arr)), t)

    def quantile_from_cumhaz(self, h):
        """Time at which the cumulative hazard reaches ``h`` (inf if never)."""
        h_arr = np.asarray(h, dtype=float)
        return _out(self._inv_cumhaz(h_arr), h)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Points where the hazard may jump (useful quadrature knots)."""
        return ()

    # vectorised internals, no validation
    def _cumhaz(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _hazard(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _inv_cumhaz(self, h: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(MarginalModel):
    """Constant hazard ``rate`` per day."""

    rate: float

    def __post_init__(self):
        if not (np.isfinite(self.rate) and self.rate > 0):
            raise ValueError(f"hazard rate must be positive and finite, got {self.rate}")

    def _cumhaz(self, t):
        return self.rate * t

    def _hazard(self, t):
        return np.full_like(t, self.rate, dtype=float)

    def _inv_cumhaz(self, h):
        return h / self.rate


@dataclass(frozen=True)
class PiecewiseExponential(MarginalModel):
    """Piecewise-constant hazard.

    ``rates[j]`` applies on ``[breaks[j-1], breaks[j])`` with an implicit
    leading break at 0 and the last rate extending to infinity, so
    ``len(rates) == len(breaks) + 1``.
    """

    breaks: tuple[float, ...]
    rates: tuple[float, ...]
    _allow_zero: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        breaks = tuple(float(b) for b in np.atleast_1d(np.asarray(self.breaks, dtype=float)))
        rates = tuple(float(r) for r in np.atleast_1d(np.asarray(self.rates, dtype=float)))
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "rates", rates)
        if len(rates) != len(breaks) + 1:
            raise ValueError("need exactly one more rate than breakpoints")
        b = np.asarray(breaks)
        if b.size and (not np.all(np.isfinite(b)) or b[0] <= 0 or np.any(np.diff(b) <= 0)):
            raise ValueError("breakpoints must be positive, finite and strictly ascending")
        r = np.asarray(rates)
        low_ok = np.all(r >= 0) if self._allow_zero else np.all(r > 0)
        if not (low_ok and np.all(np.isfinite(r))):
            raise ValueError(f"hazard rates must be positive and finite, got {rates}")
        edges = np.concatenate([[0.0], b])
        cum = np.concatenate([[0.0], np.cumsum(r[:-1] * np.diff(edges))]) if b.size else np.zeros(1)
        object.__setattr__(self, "_edges", edges)
        object.__setattr__(self, "_cum", cum)
        object.__setattr__(self, "_r", r)

    @property
    def breakpoints(self):
        return self.breaks

    def _segment(self, t):
        return np.searchsorted(self._edges, t, side="right") - 1

    def _cumhaz(self, t):
        j = self._segment(t)
        return self._cum[j] + self._r[j] * (t - self._edges[j])

    def _hazard(self, t):
        return self._r[self._segment(t)]

    def _inv_cumhaz(self, h):
        j = np.searchsorted(self._cum, h, side="right") - 1
        j = np.clip(j, 0, len(self._r) - 1)
        rate = self._r[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = self._edges[j] + (h - self._cum[j]) / rate
        return np.where(rate > 0, t, np.where(h <= self._cum[j], self._edges[j], np.inf))


class Tabulated(MarginalModel):
    """Survival curve given on a grid (e.g. a Kaplan-Meier estimate).

    Log-survival is interpolated linearly between grid points, which is the
    same as a piecewise-constant hazard, and the last segment's hazard is
    carried on past the final grid point.
    """

    def __init__(self, grid: Sequence[float], survival: Sequence[float]):
        g = np.asarray(grid, dtype=float)
        s = np.asarray(survival, dtype=float)
        if g.ndim != 1 or g.shape != s.shape:
            raise ValueError("grid and survival must be 1-d and the same length")
        if np.any(np.diff(g) <= 0) or g[0] < 0:
            raise ValueError("grid must be nonnegative and strictly ascending")
        if np.any(s <= 0) or np.any(s > 1) or np.any(np.diff(s) > 0):
            raise ValueError("tabulated survival must lie in (0, 1] and be nonincreasing")
        if g[0] == 0 and s[0] != 1:
            raise ValueError("tabulated survival must equal 1 at time 0")
        if g[0] > 0:
            g = np.concatenate([[0.0], g])
            s = np.concatenate([[1.0], s])
        if g.size < 2:
            raise ValueError("need at least one grid point after time 0")
        rates = -np.diff(np.log(s)) / np.diff(g)
        self.grid = tuple(g)
        self.values = tuple(s)
        self._pwe = PiecewiseExponential(tuple(g[1:]), tuple(rates) + (rates[-1],), _allow_zero=True)

    def __repr__(self):
        return f"Tabulated(grid={list(self.grid)}, survival={list(self.values)})"

    def __eq__(self, other):
        return isinstance(other, Tabulated) and self.grid == other.grid and self.values == other.values

    def __hash__(self):
        return hash((self.grid, self.values))

    @property
    def breakpoints(self):
        return self._pwe.breaks

    def _cumhaz(self, t):
        return self._pwe._cumhaz(t)

    def _hazard(self, t):
        return self._pwe._hazard(t)

    def _inv_cumhaz(self, h):
        return self._pwe._inv_cumhaz(h)


@dataclass(frozen=True)
class CensoringModel:
    """Independent dropout combined with accrual-driven administrative censoring.

    Enrolment happens at ``accrual_length * Beta(psi_early, psi_late)`` days
    into a study of total length ``study_length``, so the maximum follow-up is
    ``L = s - b * Beta(psi_early, psi_late)``. With ``accrual_length == 0``
    every participant is censored at exactly ``s``.
    """

    study_length: float
    accrual_length: float = 0.0
    accrual_shape: tuple[float, float] = (1.0, 1.0)
    dropout: MarginalModel | None = None

    def __post_init__(self):
        s, b = float(self.study_length), float(self.accrual_length)
        if not (np.isfinite(s) and s > 0):
            raise ValueError("study_length must be positive and finite")
        if not 0 <= b <= s:
            raise ValueError("accrual_length must satisfy 0 <= b <= study_length")
        shape = tuple(float(p) for p in self.accrual_shape)
        if len(shape) != 2 or min(shape) <= 0:
            raise ValueError("accrual_shape must be two positive Beta parameters")
        object.__setattr__(self, "study_length", s)
        object.__setattr__(self, "accrual_length", b)
        object.__setattr__(self, "accrual_shape", shape)

    @property
    def uniform_accrual(self) -> bool:
        return self.accrual_shape == (1.0, 1.0)

    @property
    def administrative_only(self) -> bool:
        """Censoring happens at exactly ``s`` for everyone."""
        return self.accrual_length == 0 and self.dropout is None

    @property
    def knots(self) -> tuple[float, ...]:
        s, b = self.study_length, self.accrual_length
        pts = {s - b, s}
        if self.dropout is not None:
            pts.update(x for x in self.dropout.breakpoints if x < s)
        return tuple(sorted(p for p in pts if p > 0))

    @property
    def atom(self) -> float:
        """Probability mass that the censoring law puts at exactly ``s``."""
        if self.accrual_length > 0:
            return 0.0
        return 1.0 if self.dropout is None else self.dropout.survival(self.study_length)

    # follow-up law L
    def admin_survival(self, x):
        x_arr = _as_times(x, "x")
        s, b = self.study_length, self.accrual_length
        out = np.where(x_arr <= s - b, 1.0, 0.0)
        if b > 0:
            mid = (x_arr > s - b) & (x_arr <= s)
            u = np.clip((s - x_arr) / b, 0.0, 1.0)
            if self.uniform_accrual:
                val = u
            else:
                val = special.betainc(*self.accrual_shape, u)
            out = np.where(mid, val, out)
        return _out(out, x)

    def admin_density(self, x):
        """Density of L; zero on the flat part ``x <= s - b`` and beyond ``s``."""
        x_arr = _as_times(x, "x")
        s, b = self.study_length, self.accrual_length
        if b == 0:
            return _out(np.zeros_like(x_arr), x)
        mid = (x_arr > s - b) & (x_arr <= s)
        u = np.clip((s - x_arr) / b, 0.0, 1.0)
        if self.uniform_accrual:
            val = np.full_like(u, 1.0 / b)
        else:
            with np.errstate(divide="ignore"):
                val = stats.beta.pdf(u, *self.accrual_shape) / b
        return _out(np.where(mid, val, 0.0), x)

    # dropout law G
    def dropout_survival(self, x):
        x_arr = _as_times(x, "x")
        if self.dropout is None:
            return _out(np.ones_like(x_arr), x)
        return _out(np.exp(-self.dropout._cumhaz(x_arr)), x)

    def dropout_density(self, x):
        x_arr = _as_times(x, "x")
        if self.dropout is None:
            return _out(np.zeros_like(x_arr), x)
        return _out(self.dropout._hazard(x_arr) * np.exp(-self.dropout._cumhaz(x_arr)), x)

    # combined law
    def survival(self, x):
        """S_G(x) * S_L(x); zero past the end of the study."""
        x_arr = _as_times(x, "x")
        return _out(self.dropout_survival(x_arr) * self.admin_survival(x_arr), x)

    def density(self, x):
        """g(x) S_L(x) + f_L(x) S_G(x); the atom at ``s`` for ``b == 0`` is excluded."""
        x_arr = _as_times(x, "x")
        s_l = self.admin_survival(x_arr)
        out = self.dropout_density(x_arr) * s_l + self.admin_density(x_arr) * self.dropout_survival(x_arr)
        return _out(np.where(x_arr > self.study_length, 0.0, out), x)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` censoring times ``min(dropout, follow-up)``."""
        s, b = self.study_length, self.accrual_length
        follow_up = np.full(n, s)
        if b > 0:
            follow_up = s - b * rng.beta(*self.accrual_shape, size=n)
        if self.dropout is None:
            return follow_up
        drop = self.dropout._inv_cumhaz(rng.standard_exponential(n))
        return np.minimum(drop, follow_up)
