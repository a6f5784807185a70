"""Power and sample size for the win ratio from (WR, p_tie).

The large-sample variance of log WR is approximated by ``sigma^2 / N`` with

    sigma^2 = 4 (1 + p_tie) / (3 rho (1 - rho) (1 - p_tie)),

which gives a closed-form total sample size for a target power and a
closed-form power for a fixed size. Stratified designs combine per-stratum
win/loss/tie probabilities with weights ``w_m N_m^2``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal, Sequence

from scipy import special

from .mvn import z_quantile
from .winprob import ScenarioSpec, WinLossTieTable, compute_table

Rounding = Literal["auto", "even", "ceil", "none"]

STRATIFIED_VARIANCE_NOTE = (
    "stratified variance = sigma2_core(p_tie_strata) * sum(w^2 N^3) / (sum(w N^2))^2"
)


class DesignError(ValueError):
    """The requested design is degenerate or infeasible."""


@dataclass(frozen=True)
class DesignSpec:
    """Allocation, two-sided level and either a target power or a total N."""

    allocation: float = 0.5
    alpha: float = 0.05
    power: float | None = 0.8
    n: int | None = None
    rounding: Rounding = "auto"

    def __post_init__(self):
        if not 0 < self.allocation < 1:
            raise ValueError("allocation must lie in (0, 1)")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.power is not None and not self.alpha / 2 < self.power < 1:
            raise ValueError("target power must lie in (alpha/2, 1)")
        if self.n is not None and self.n < 2:
            raise ValueError("total N must be at least 2")
        if self.rounding not in ("auto", "even", "ceil", "none"):
            raise ValueError(f"unknown rounding rule {self.rounding!r}")


@dataclass(frozen=True)
class Stratum:
    """One stratum: weight, size (absolute, or relative share of the total) and its table."""

    weight: float
    size: float
    table: WinLossTieTable

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("stratum weights must be nonnegative")
        if not self.size > 0:
            raise ValueError("stratum sizes must be positive")


@dataclass(frozen=True)
class DesignResult:
    win_ratio: float
    p_tie: float
    variance_factor: float
    n: int | None = None
    n_raw: float | None = None
    power: float | None = None
    table: WinLossTieTable | None = None
    strata_n: tuple[int, ...] | None = None
    notes: tuple[str, ...] = field(default=())


def yg_variance_factor(p_tie: float, rho: float = 0.5) -> float:
    """sigma^2 with ``Var[log WR] ~ sigma^2 / N``."""
    if not 0 < rho < 1:
        raise ValueError("allocation must lie in (0, 1)")
    if not 0 <= p_tie <= 1:
        raise ValueError("p_tie must lie in [0, 1]")
    if p_tie >= 1:
        raise DesignError("all comparisons tie; the variance is unbounded")
    return 4.0 * (1.0 + p_tie) / (3.0 * rho * (1.0 - rho) * (1.0 - p_tie))


def _z_sum(alpha: float, power: float) -> float:
    return z_quantile(1 - alpha / 2) + z_quantile(power)


def round_sample_size(raw: float, rho: float, rule: Rounding = "auto") -> int | float:
    """Round a raw total N up so that both arms get whole participants.

    ``auto`` means even totals for 1:1 allocation and, otherwise, the
    smallest N >= raw with ``rho * N`` whole; if no such N exists within
    10,000 of the raw value the arm sizes are rounded up separately.
    """
    if rule == "none":
        return raw
    if rule == "ceil":
        return int(math.ceil(raw - 1e-9))
    if rule == "even" or (rule == "auto" and rho == 0.5):
        return 2 * int(math.ceil(raw / 2 - 1e-9))
    start = int(math.ceil(raw - 1e-9))
    for n in range(start, start + 10_000):
        if abs(rho * n - round(rho * n)) < 1e-9:
            return n
    return int(math.ceil(rho * raw - 1e-9) + math.ceil((1 - rho) * raw - 1e-9))


def required_sample_size(
    wr: float, p_tie: float, spec: DesignSpec, variance_factor: float | None = None
) -> DesignResult:
    """Total N reaching ``spec.power`` at two-sided level ``spec.alpha``.

    ``variance_factor`` overrides sigma^2 (the stratified route passes its
    own); by default it comes from ``p_tie`` and the allocation.
    """
    if spec.power is None:
        raise ValueError("the design target must be a power level")
    if not wr > 0:
        raise DesignError("win ratio must be positive")
    if wr == 1:
        raise DesignError("win ratio of 1: no sample size can reach the target power")
    sigma2 = yg_variance_factor(p_tie, spec.allocation) if variance_factor is None else variance_factor
    raw = sigma2 * _z_sum(spec.alpha, spec.power) ** 2 / math.log(wr) ** 2
    n = round_sample_size(raw, spec.allocation, spec.rounding)
    return DesignResult(wr, p_tie, sigma2, n=n, n_raw=raw)


def power_at_n(wr: float, p_tie: float, n: float, spec: DesignSpec, variance_factor: float | None = None) -> float:
    """Power of the two-sided log-WR test at total size ``n``.

    Only the tail in the direction of the effect is counted, so a win ratio
    and its reciprocal get the same power, matching :func:`required_sample_size`.
    """
    if n < 2:
        raise ValueError("total N must be at least 2")
    if not wr > 0:
        raise DesignError("win ratio must be positive")
    sigma2 = yg_variance_factor(p_tie, spec.allocation) if variance_factor is None else variance_factor
    z = z_quantile(1 - spec.alpha / 2)
    return float(special.ndtr(abs(math.log(wr)) * math.sqrt(n) / math.sqrt(sigma2) - z))


def stratified_combine(strata: Sequence[Stratum]) -> tuple[float, float]:
    """(WR_strata, p_tie_strata), pooling stratum tables with weights ``w_m N_m^2``.

    The weights are normalised first, so a single stratum returns its own
    WR and p_tie bit for bit.
    """
    v = _pooling_weights(strata)
    den_w = sum(w * st.table.total_loss for w, st in zip(v, strata))
    num_w = sum(w * st.table.total_win for w, st in zip(v, strata))
    if den_w == 0:
        raise DesignError("stratum weights leave no losses to form a win ratio")
    p_tie = sum(w * st.table.tie for w, st in zip(v, strata))
    return num_w / den_w, p_tie


def _pooling_weights(strata: Sequence[Stratum]) -> list[float]:
    """``w_m N_m^2`` scaled to sum to one."""
    if not strata:
        raise DesignError("need at least one stratum")
    wn2 = [st.weight * st.size**2 for st in strata]
    tot = sum(wn2)
    if tot == 0:
        raise DesignError("all stratum weights are zero")
    return [w / tot for w in wn2]


def stratified_size_factor(strata: Sequence[Stratum]) -> float:
    """``sum(w^2 N^3) / sum(w N^2)^2``; equals ``1/N`` for a single stratum.

    Computed as ``sum(v_m^2 / N_m)`` with the normalised weights
    ``v_m = w_m N_m^2 / sum(w N^2)``.
    """
    return sum(v**2 / st.size for v, st in zip(_pooling_weights(strata), strata))


def stratified_variance(strata: Sequence[Stratum], rho: float = 0.5) -> float:
    """Approximate variance of log WR_strata for the given absolute stratum sizes.

    This is the single-stratum factor sigma^2(p_tie_strata) times
    ``sum(w^2 N^3) / sum(w N^2)^2``, which reduces to ``sigma^2 / N`` when
    there is one stratum.
    """
    _, p_tie = stratified_combine(strata)
    return yg_variance_factor(p_tie, rho) * stratified_size_factor(strata)


def stratified_sample_size(strata: Sequence[Stratum], spec: DesignSpec) -> DesignResult:
    """Total N for a stratified design; ``Stratum.size`` is read as a relative share."""
    shares = [st.size / sum(s.size for s in strata) for st in strata]
    scaled = [Stratum(st.weight, sh, st.table) for st, sh in zip(strata, shares)]
    wr, p_tie = stratified_combine(scaled)
    # the size factor scales as 1/N, so factor(shares) / N is the variance at total N
    sigma2 = yg_variance_factor(p_tie, spec.allocation) * stratified_size_factor(scaled)
    res = required_sample_size(wr, p_tie, spec, variance_factor=sigma2)
    per = tuple(round_sample_size(res.n_raw * sh, spec.allocation, spec.rounding) for sh in shares)
    return DesignResult(
        wr, p_tie, sigma2, n=res.n, n_raw=res.n_raw, strata_n=per, notes=(STRATIFIED_VARIANCE_NOTE,)
    )


def stratified_power(strata: Sequence[Stratum], spec: DesignSpec) -> float:
    """Power with absolute stratum sizes ``Stratum.size``."""
    wr, _ = stratified_combine(strata)
    var = stratified_variance(strata, spec.allocation)
    z = z_quantile(1 - spec.alpha / 2)
    return float(special.ndtr(abs(math.log(wr)) / math.sqrt(var) - z))


def design(table: WinLossTieTable, spec: DesignSpec) -> DesignResult:
    """Sample size (if ``spec.power`` is set) or power (if ``spec.n`` is set) for one table."""
    wr, p_tie = table.win_ratio, table.tie
    sigma2 = yg_variance_factor(p_tie, spec.allocation)
    if spec.n is not None:
        return DesignResult(wr, p_tie, sigma2, n=spec.n, power=power_at_n(wr, p_tie, spec.n, spec), table=table)
    res = required_sample_size(wr, p_tie, spec)
    return DesignResult(wr, p_tie, sigma2, n=res.n, n_raw=res.n_raw, table=table)


def relative_change_rate(y_start: float, y_end: float, x_start: float, x_end: float, dx: float = 0.1) -> float:
    """Relative change of ``y`` per ``dx`` units of ``x``."""
    return (y_end - y_start) / y_start / (x_end - x_start) * dx


@dataclass(frozen=True)
class GridRow:
    tau: float
    s: float
    power_target: float | None
    win_ratio: float
    p_tie: float
    n: int | None
    power: float | None
    rcr: float | None

    @property
    def value(self) -> float:
        return self.n if self.n is not None else self.power


def _grid_table(args):
    make, tau, s = args
    return compute_table(make(tau, s))


def correlation_grid(
    make_scenario: Callable[[float, float], ScenarioSpec],
    taus: Sequence[float],
    s_values: Sequence[float],
    spec: DesignSpec,
    powers: Iterable[float] | None = None,
    workers: int | None = 1,
) -> list[GridRow]:
    """Sweep correlation and follow-up, reporting N (or power) and its relative change rate.

    ``make_scenario(tau, s)`` builds the scenario for one grid point.
    ``powers`` lists several target powers at once (defaults to
    ``spec.power``). Rows are ordered by (target, s, tau); RCR compares each
    tau with the previous one at the same s and is scaled to a 0.1 step.
    """
    taus = list(taus)
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("taus must be strictly ascending")
    points = [(make_scenario, t, s) for s in s_values for t in taus]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            tables = list(ex.map(_grid_table, points))
    else:
        tables = [_grid_table(p) for p in points]
    by_point = {(t, s): tab for (_, t, s), tab in zip(points, tables)}

    targets = list(powers) if powers is not None else [spec.power]
    if spec.n is not None:
        targets = [None]
    rows: list[GridRow] = []
    for target in targets:
        sub = DesignSpec(spec.allocation, spec.alpha, target, spec.n if target is None else None, spec.rounding)
        for s in s_values:
            prev = None
            for t in taus:
                tab = by_point[(t, s)]
                res = design(tab, sub)
                value = res.n if target is not None else res.power
                rcr = None if prev is None else relative_change_rate(prev[1], value, prev[0], t)
                rows.append(GridRow(t, s, target, res.win_ratio, res.p_tie, res.n if target is not None else None,
                                    res.power, rcr))
                prev = (t, value)
    return rows
