"""Monte Carlo trials and pairwise win-ratio analysis.

Used as an independent check of the integral formulas: trials are drawn
from the same scenario, every treated x control pair is compared
hierarchically on the observed data, and the replicate summaries are
averaged. Each replicate draws from its own Philox stream keyed by
``(master_seed, replicate_index)``, so results do not depend on how the
replicates are split across worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .design import yg_variance_factor
from .mvn import z_quantile
from .winprob import ScenarioSpec


@dataclass(frozen=True)
class SimConfig:
    replicates: int = 2000
    n_per_trial: int = 1000
    master_seed: int = 20240101
    semi_competing: bool | None = None  # None: take the scenario's flag
    alpha: float = 0.05
    allocation: float = 0.5

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.n_per_trial < 4:
            raise ValueError("n_per_trial must be at least 4")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0 < self.allocation < 1:
            raise ValueError("allocation must lie in (0, 1)")

    @property
    def n_treated(self) -> int:
        return int(round(self.allocation * self.n_per_trial))

    @property
    def n_control(self) -> int:
        return self.n_per_trial - self.n_treated


@dataclass
class TrialData:
    """One simulated trial: arm labels, observed times, event flags, censoring times."""

    treated: np.ndarray  # bool, (n,)
    times: np.ndarray  # (n, K)
    events: np.ndarray  # bool, (n, K)
    censoring: np.ndarray  # (n,)

    def arm(self, treated: bool) -> tuple[np.ndarray, np.ndarray]:
        rows = self.treated == treated
        return self.times[rows], self.events[rows]


@dataclass(frozen=True)
class PairwiseResult:
    wins: np.ndarray  # per endpoint
    losses: np.ndarray
    ties: int
    n_treated: int
    n_control: int
    win_ratio: float
    log_wr_variance: float
    p_value: float

    @property
    def pairs(self) -> int:
        return self.n_treated * self.n_control

    @property
    def p_tie(self) -> float:
        return self.ties / self.pairs

    @property
    def defined(self) -> bool:
        return self.wins.sum() > 0 and self.losses.sum() > 0


def replicate_rng(master_seed: int, replicate_index: int) -> np.random.Generator:
    """Counter-based stream for one replicate."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(replicate_index,))
    return np.random.Generator(np.random.Philox(ss))


def observe(event_times: np.ndarray, censor: np.ndarray, semi_competing: bool) -> tuple[np.ndarray, np.ndarray]:
    """Observed times and event flags from latent event times and censoring times.

    With ``semi_competing`` the endpoint-1 event also ends observation of
    endpoints 2..K.
    """
    limit = np.repeat(censor[:, None], event_times.shape[1], axis=1)
    if semi_competing and event_times.shape[1] > 1:
        limit[:, 1:] = np.minimum(limit[:, 1:], event_times[:, :1])
    events = event_times < limit
    return np.where(events, event_times, limit), events


def generate_trial(scn: ScenarioSpec, cfg: SimConfig, replicate_index: int = 0) -> TrialData:
    rng = replicate_rng(cfg.master_seed, replicate_index)
    nt, nc = cfg.n_treated, cfg.n_control
    y_t = scn.treatment.sample(rng, nt)
    y_c = scn.control.sample(rng, nc)
    cens = scn.censoring.sample(rng, nt + nc)
    latent = np.vstack([y_t, y_c])
    semi = scn.semi_competing if cfg.semi_competing is None else cfg.semi_competing
    times, events = observe(latent, cens, semi)
    treated = np.concatenate([np.ones(nt, bool), np.zeros(nc, bool)])
    return TrialData(treated, times, events, cens)


def compare_pairs(t_times, t_events, c_times, c_events) -> tuple[np.ndarray, np.ndarray, int]:
    """Hierarchical comparison of every treated x control pair.

    At endpoint k the treated member wins when the control event is observed
    and earlier than the treated member's observed time (event or
    censoring), loses in the mirror case, and otherwise the pair moves on.
    """
    K = t_times.shape[1]
    undecided = np.ones((t_times.shape[0], c_times.shape[0]), dtype=bool)
    wins = np.zeros(K, dtype=np.int64)
    losses = np.zeros(K, dtype=np.int64)
    for k in range(K):
        tt = t_times[:, k][:, None]
        tc = c_times[:, k][None, :]
        win = undecided & c_events[:, k][None, :] & (tc < tt)
        loss = undecided & t_events[:, k][:, None] & (tt < tc)
        wins[k] = np.count_nonzero(win)
        losses[k] = np.count_nonzero(loss)
        undecided &= ~(win | loss)
    return wins, losses, int(np.count_nonzero(undecided))


def pairwise_win_ratio(data: TrialData, alpha: float = 0.05) -> PairwiseResult:
    """Win/loss/tie counts, WR and a two-sided large-sample test of log WR = 0.

    The variance of log WR is the closed-form approximation evaluated at the
    observed tie proportion and allocation. Replicates without wins or
    without losses get ``win_ratio = nan`` and ``p_value = 1``.
    """
    t_times, t_events = data.arm(True)
    c_times, c_events = data.arm(False)
    nt, nc = len(t_times), len(c_times)
    if nt == 0 or nc == 0:
        raise ValueError("both arms need at least one participant")
    wins, losses, ties = compare_pairs(t_times, t_events, c_times, c_events)
    n = nt + nc
    p_tie = ties / (nt * nc)
    W, L = wins.sum(), losses.sum()
    if W == 0 or L == 0 or p_tie >= 1:
        return PairwiseResult(wins, losses, ties, nt, nc, float("nan"), float("nan"), 1.0)
    wr = W / L
    var = yg_variance_factor(p_tie, nt / n) / n
    z = math.log(wr) / math.sqrt(var)
    p = float(2 * special.ndtr(-abs(z)))
    return PairwiseResult(wins, losses, ties, nt, nc, float(wr), float(var), p)


def _run_chunk(args):
    scn, cfg, indices = args
    out = []
    for i in indices:
        res = pairwise_win_ratio(generate_trial(scn, cfg, i), cfg.alpha)
        out.append((res.wins / res.pairs, res.losses / res.pairs, res.p_tie, res.win_ratio, res.p_value))
    return out


@dataclass(frozen=True)
class SimSummary:
    replicates: int
    seed: int
    win: np.ndarray  # mean per-endpoint win proportion
    loss: np.ndarray
    win_se: np.ndarray
    loss_se: np.ndarray
    p_tie: float
    p_tie_se: float
    mean_wr: float  # average of per-replicate WR over replicates where it is defined
    mean_wr_se: float
    pooled_wr: float  # mean win proportion / mean loss proportion
    pooled_wr_se: float
    power: float
    power_se: float
    excluded: int
    test: str = "two-sided z test on log WR, variance 4(1+p)/(3 rho(1-rho)(1-p)) / N at the observed tie rate"


def _se(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else float("nan")


def empirical_summary(scn: ScenarioSpec, cfg: SimConfig, workers: int | None = 1) -> SimSummary:
    """Average the replicate results; identical for any ``workers``."""
    R = cfg.replicates
    if workers and workers > 1:
        chunks = [list(range(i, R, workers)) for i in range(workers)]
        slots: list = [None] * R
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for idx, res in zip(chunks, ex.map(_run_chunk, [(scn, cfg, c) for c in chunks])):
                for i, r in zip(idx, res):
                    slots[i] = r
    else:
        slots = _run_chunk((scn, cfg, range(R)))

    win = np.array([r[0] for r in slots])
    loss = np.array([r[1] for r in slots])
    tie = np.array([r[2] for r in slots])
    wr = np.array([r[3] for r in slots])
    reject = np.array([r[4] < cfg.alpha for r in slots], dtype=float)
    ok = np.isfinite(wr)

    W, L = win.sum(axis=1), loss.sum(axis=1)
    pooled = W.mean() / L.mean() if L.mean() > 0 else float("nan")
    resid = (W - pooled * L) / L.mean() if L.mean() > 0 else np.full(R, np.nan)
    return SimSummary(
        replicates=R,
        seed=cfg.master_seed,
        win=win.mean(axis=0),
        loss=loss.mean(axis=0),
        win_se=np.array([_se(c) for c in win.T]),
        loss_se=np.array([_se(c) for c in loss.T]),
        p_tie=float(tie.mean()),
        p_tie_se=_se(tie),
        mean_wr=float(wr[ok].mean()) if ok.any() else float("nan"),
        mean_wr_se=_se(wr[ok]) if ok.sum() > 1 else float("nan"),
        pooled_wr=float(pooled),
        pooled_wr_se=_se(resid),
        power=float(reject.mean()),
        power_se=_se(reject) if R > 1 else float("nan"),
        excluded=int((~ok).sum()),
    )


def critical_value(alpha: float) -> float:
    return z_quantile(1 - alpha / 2)
