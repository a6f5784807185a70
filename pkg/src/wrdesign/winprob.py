"""Win, loss and tie probabilities for prioritized time-to-event endpoints.

A treated and a control participant are compared endpoint by endpoint,
using the pair's common follow-up ``c = min(C_t, C_c)``. At endpoint k the
treated participant wins when the control event is observed before both
the treated event and ``c``; the comparison moves on to endpoint k+1 only
when neither event at k happens before ``c``. Both arms share the same
censoring law, so ``c`` has density ``2 g(c) S_G(c)`` plus, when every
participant is followed to exactly ``s``, an atom of mass ``S_G(s)^2`` at
``s``.

The probabilities reduce to one- and two-dimensional integrals of the arm
joint survival functions and their coordinate partial derivatives, which
are evaluated with the vectorised adaptive Gauss-Kronrod rule in
:mod:`wrdesign.quadrature`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .copula import ArmJointModel, GaussianCopula, GumbelHougaard, tau_to_kappa
from .quadrature import ATOL, RTOL, integrate
from .survival import CensoringModel, Exponential, MarginalModel

Perspective = Literal["t", "c"]

# inner integrals are resolved more tightly than the outer ones
INNER_RTOL = 1e-11
INNER_ATOL = 1e-15


@dataclass(frozen=True)
class ScenarioSpec:
    """Two arms with the same endpoints, sharing one censoring law.

    ``semi_competing`` marks endpoint 1 as terminal. It is honoured by the
    simulator; the formulas ignore it unless ``terminal_first`` is passed
    explicitly (see :func:`win_prob_k`).
    """

    control: ArmJointModel
    treatment: ArmJointModel
    censoring: CensoringModel
    semi_competing: bool = False

    def __post_init__(self):
        if self.control.K != self.treatment.K:
            raise ValueError("both arms must have the same number of endpoints")

    @property
    def K(self) -> int:
        return self.control.K

    def swapped(self) -> "ScenarioSpec":
        return ScenarioSpec(self.treatment, self.control, self.censoring, self.semi_competing)

    def arms(self, perspective: Perspective) -> tuple[ArmJointModel, ArmJointModel]:
        """(own, opp): ``own`` is the arm whose early event is the other arm's win."""
        if perspective == "t":
            return self.control, self.treatment
        if perspective == "c":
            return self.treatment, self.control
        raise ValueError(f"perspective must be 't' or 'c', got {perspective!r}")


@dataclass(frozen=True)
class WinLossTieTable:
    """Per-endpoint win (treatment) and loss probabilities plus the overall tie."""

    win: tuple[float, ...]
    loss: tuple[float, ...]
    tie: float
    error: float = field(default=0.0, compare=False)

    @property
    def K(self) -> int:
        return len(self.win)

    @property
    def total_win(self) -> float:
        return float(sum(self.win))

    @property
    def total_loss(self) -> float:
        return float(sum(self.loss))

    @property
    def win_ratio(self) -> float:
        if self.total_loss == 0:
            return float("inf") if self.total_win > 0 else float("nan")
        return self.total_win / self.total_loss

    @property
    def net_benefit(self) -> float:
        return self.total_win - self.total_loss

    @property
    def win_odds(self) -> float:
        return (self.total_win + self.tie / 2) / (self.total_loss + self.tie / 2)

    WR = win_ratio
    NB = net_benefit
    WO = win_odds

    @property
    def total(self) -> float:
        """Sum of every outcome probability; 1 up to integration error."""
        return self.total_win + self.total_loss + self.tie

    def swapped(self) -> "WinLossTieTable":
        return WinLossTieTable(self.loss, self.win, self.tie, self.error)

    def endpoint_win_ratios(self) -> tuple[float, ...]:
        return tuple(w / l if l > 0 else float("inf") for w, l in zip(self.win, self.loss))


def _knots(scn: ScenarioSpec) -> tuple[float, ...]:
    pts = set(scn.censoring.knots) | set(scn.control.breakpoints) | set(scn.treatment.breakpoints)
    return tuple(sorted(p for p in pts if 0 < p < scn.censoring.study_length))


def _event_knots(scn: ScenarioSpec) -> tuple[float, ...]:
    return tuple(sorted(set(scn.control.breakpoints) | set(scn.treatment.breakpoints)))


def _followup_weight(cens: CensoringModel, c: np.ndarray) -> np.ndarray:
    """Continuous density of min(C_t, C_c)."""
    return 2.0 * cens.density(c) * cens.survival(c)


def _points(c: np.ndarray, y: np.ndarray, endpoint: int, K: int, terminal_first: bool) -> np.ndarray:
    """(c, ..., c, y, 0, ..., 0) with ``endpoint - 1`` leading copies of ``c``."""
    pts = np.zeros(np.shape(y) + (K,))
    pts[..., : endpoint - 1] = np.asarray(c)[..., None]
    pts[..., endpoint - 1] = y
    if terminal_first:
        # endpoint k is only seen before the terminal event: Y_1 > max(c, y)
        pts[..., 0] = np.maximum(c, y)
    return pts


def _inner(scn, endpoint, perspective, c, terminal_first=False, rtol=INNER_RTOL, atol=INNER_ATOL):
    """int_0^c S_opp(c,..,c,y,0,..) (-d_k S_own)(c,..,c,y,0,..) dy for every ``c``."""
    own, opp = scn.arms(perspective)
    c = np.asarray(c, dtype=float)
    flat = c.ravel()

    def f(y, idx):
        cc = flat[idx][:, None]
        pts = _points(cc, y, endpoint, scn.K, terminal_first)
        return opp.survival(pts) * own.partial(pts, endpoint)

    val, _ = integrate(f, np.zeros_like(flat), flat, breakpoints=_event_knots(scn), rtol=rtol, atol=atol)
    return val.reshape(c.shape)


def _outer(scn: ScenarioSpec, f, n: int, rtol, atol):
    """Integrate ``f(c, idx)`` over the pair follow-up ``[0, s]`` for ``n`` integrands.

    A Beta accrual shape below 1 gives the follow-up density an integrable
    power singularity at an end of ``[s - b, s]``. Each half of that segment
    is mapped from ``t`` in ``[0, 1]`` with ``u = t^p / 2`` (``u`` the
    accrual fraction measured from that end, ``p = 1/psi``), which cancels
    the leading power so the adaptive rule converges quickly.
    """
    cens = scn.censoring
    s, b = cens.study_length, cens.accrual_length
    knots = _knots(scn)
    if b == 0 or min(cens.accrual_shape) >= 1:
        return integrate(f, np.zeros(n), np.full(n, s), breakpoints=knots, rtol=rtol, atol=atol)
    val, err = np.zeros(n), np.zeros(n)
    if s - b > 0:
        v, e = integrate(f, np.zeros(n), np.full(n, s - b), breakpoints=knots, rtol=rtol, atol=atol)
        val, err = val + v, err + e
    # (sign, psi): u measured from c = s (early enrolment) or from c = s - b (late)
    for sign, psi in ((1.0, cens.accrual_shape[0]), (-1.0, cens.accrual_shape[1])):
        pw = 1.0 / psi if psi < 1 else 1.0
        origin = s if sign > 0 else s - b

        def g(t, idx, pw=pw, origin=origin, sign=sign):
            c = origin - sign * b * 0.5 * t**pw
            return f(c, idx) * (b * 0.5 * pw * t ** (pw - 1))

        inside = [abs(origin - k) / (0.5 * b) for k in knots if 0 < abs(origin - k) < 0.5 * b]
        v, e = integrate(g, np.zeros(n), np.ones(n), breakpoints=[x ** (1 / pw) for x in inside],
                         rtol=rtol, atol=atol)
        val, err = val + v, err + e
    return val, err


def _first_endpoint(scn: ScenarioSpec, perspectives: Sequence[Perspective], rtol, atol):
    cens = scn.censoring
    pairs = [scn.arms(p) for p in perspectives]

    def f(y, idx):
        out = np.empty_like(y)
        for i, (own, opp) in enumerate(pairs):
            rows = idx == i
            yy = y[rows]
            m_own, m_opp = own.marginals[0], opp.marginals[0]
            out[rows] = m_opp.survival(yy) * cens.survival(yy) ** 2 * m_own.density(yy)
        return out

    return _outer(scn, f, len(pairs), rtol, atol)


def _later_endpoint(scn, endpoint, perspectives, rtol, atol, terminal_first=False):
    cens = scn.censoring
    s = cens.study_length

    def f(c, idx):
        out = np.empty_like(c)
        for i, p in enumerate(perspectives):
            rows = idx == i
            cc = c[rows]
            out[rows] = _followup_weight(cens, cc) * _inner(scn, endpoint, p, cc, terminal_first)
        return out

    val, err = _outer(scn, f, len(perspectives), rtol, atol)
    atom = cens.atom
    if atom > 0:
        for i, p in enumerate(perspectives):
            val[i] += atom**2 * _inner(scn, endpoint, p, np.array([s]), terminal_first)[0]
    return val, err


def _all_tied(scn: ScenarioSpec, c: np.ndarray) -> np.ndarray:
    diag = np.repeat(np.asarray(c)[..., None], scn.K, axis=-1)
    return scn.treatment.survival(diag) * scn.control.survival(diag)


def win_prob_first(
    scn: ScenarioSpec, arm_perspective: Perspective = "t", rtol: float = RTOL, atol: float = ATOL
) -> float:
    """Probability that ``arm_perspective`` wins on endpoint 1."""
    val, _ = _first_endpoint(scn, [arm_perspective], rtol, atol)
    return float(val[0])


def win_prob_k(
    scn: ScenarioSpec,
    endpoint: int,
    arm_perspective: Perspective = "t",
    terminal_first: bool = False,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> float:
    """Probability that ``arm_perspective`` wins on ``endpoint`` (>= 2) after ties on all earlier ones.

    ``terminal_first=True`` treats the endpoint-1 event as extra censoring of
    the later endpoint in the same participant. Because reaching endpoint
    ``k`` already requires both endpoint-1 events to fall after the pair's
    follow-up, the result is unchanged; the switch exists so that this can
    be checked rather than assumed.
    """
    if endpoint == 1:
        return win_prob_first(scn, arm_perspective, rtol, atol)
    if not 2 <= endpoint <= scn.K:
        raise IndexError(f"endpoint must be between 1 and {scn.K}, got {endpoint}")
    val, _ = _later_endpoint(scn, endpoint, [arm_perspective], rtol, atol, terminal_first)
    return float(val[0])


def tie_prob(scn: ScenarioSpec, rtol: float = RTOL, atol: float = ATOL) -> float:
    """Probability that a treated-control pair ties on every endpoint."""
    if scn.censoring.administrative_only:
        return float(_all_tied(scn, scn.censoring.study_length))
    return _tie_general(scn, rtol, atol)


def _tie_general(scn, rtol, atol):
    cens = scn.censoring
    s = cens.study_length
    val, _ = _outer(scn, lambda c, idx: _followup_weight(cens, c) * _all_tied(scn, c), 1, rtol, atol)
    return float(val[0] + cens.atom**2 * _all_tied(scn, s))


def admin_table(scn: ScenarioSpec, rtol: float = RTOL, atol: float = ATOL) -> WinLossTieTable:
    """Closed forms for censoring only at a fixed follow-up time ``s``.

    Endpoint 1 is ``int_0^s S_opp,1(y) f_own,1(y) dy``; endpoint k is the inner
    integral at ``c = s``; the tie probability is ``S_t(s,..,s) S_c(s,..,s)``.
    Any dropout or accrual in ``scn.censoring`` is ignored.
    """
    s = scn.censoring.study_length

    def f(y, idx):
        out = np.empty_like(y)
        for i, p in enumerate("tc"):
            own, opp = scn.arms(p)
            rows = idx == i
            out[rows] = opp.marginals[0].survival(y[rows]) * own.marginals[0].density(y[rows])
        return out

    first, err = integrate(f, [0.0, 0.0], [s, s], breakpoints=_event_knots(scn), rtol=rtol, atol=atol)
    win, loss = [float(first[0])], [float(first[1])]
    for k in range(2, scn.K + 1):
        win.append(float(_inner(scn, k, "t", np.array([s]))[0]))
        loss.append(float(_inner(scn, k, "c", np.array([s]))[0]))
    tie = float(_all_tied(scn, s))
    return WinLossTieTable(tuple(win), tuple(loss), tie, float(err.max()))


def compute_table(
    scn: ScenarioSpec,
    method: Literal["auto", "general", "admin"] = "auto",
    terminal_first: bool = False,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> WinLossTieTable:
    """Full win/loss/tie table.

    ``method="auto"`` uses :func:`admin_table` when censoring is purely
    administrative (no accrual spread, no dropout) and the general integrals
    otherwise. ``"general"`` forces the integral route, handling the
    administrative atom at ``s`` explicitly.
    """
    if method == "admin" or (method == "auto" and scn.censoring.administrative_only):
        if not scn.censoring.administrative_only and method == "admin":
            raise ValueError("admin closed forms need accrual_length == 0 and no dropout")
        return admin_table(scn, rtol, atol)
    if method not in ("auto", "general"):
        raise ValueError(f"unknown method {method!r}")

    first, err1 = _first_endpoint(scn, ["t", "c"], rtol, atol)
    win, loss = [float(first[0])], [float(first[1])]
    errs = [float(err1.max())]
    for k in range(2, scn.K + 1):
        vals, err = _later_endpoint(scn, k, ["t", "c"], rtol, atol, terminal_first)
        win.append(float(vals[0]))
        loss.append(float(vals[1]))
        errs.append(float(err.max()))
    tie = _tie_general(scn, rtol, atol)
    return WinLossTieTable(tuple(win), tuple(loss), tie, float(sum(errs)))


# scenario builders ---------------------------------------------------------

def make_copula(K: int, tau=None, kappa=None, corr=None, kind: str = "gumbel"):
    """Copula from exactly one of ``tau``, ``kappa`` (Gumbel) or ``corr`` (Gaussian)."""
    given = sum(x is not None for x in (tau, kappa, corr))
    if given > 1:
        raise ValueError("give only one of tau, kappa, corr")
    kind = kind.lower()
    if kind in ("gumbel", "gumbel-hougaard", "gumbel_hougaard"):
        if corr is not None:
            raise ValueError("a correlation matrix needs the Gaussian copula")
        if kappa is not None:
            return GumbelHougaard(kappa)
        return GumbelHougaard(tau_to_kappa(0.0 if tau is None else float(tau)))
    if kind == "gaussian":
        if kappa is not None:
            raise ValueError("kappa is a Gumbel-Hougaard parameter")
        if corr is not None:
            return GaussianCopula(corr)
        return GaussianCopula.from_tau(0.0 if tau is None else tau, K)
    raise ValueError(f"unknown copula kind {kind!r}")


def exponential_scenario(
    control_hazards: Sequence[float],
    *,
    hazard_ratios: Sequence[float] | None = None,
    effects: Sequence[float] | None = None,
    treatment_hazards: Sequence[float] | None = None,
    tau=None,
    kappa=None,
    corr=None,
    copula: str = "gumbel",
    study_length: float,
    accrual_length: float = 0.0,
    accrual_shape: tuple[float, float] = (1.0, 1.0),
    dropout_hazard: float | None = None,
    semi_competing: bool = False,
) -> ScenarioSpec:
    """Exponential marginals in both arms sharing one copula.

    The treatment arm is given by exactly one of ``hazard_ratios``,
    ``effects`` (``alpha_k`` with hazard ratio ``exp(-alpha_k)``) or
    ``treatment_hazards``.
    """
    lc = np.asarray(control_hazards, dtype=float)
    given = [x is not None for x in (hazard_ratios, effects, treatment_hazards)]
    if sum(given) != 1:
        raise ValueError("give exactly one of hazard_ratios, effects, treatment_hazards")
    if hazard_ratios is not None:
        lt = lc * np.asarray(hazard_ratios, dtype=float)
    elif effects is not None:
        lt = lc * np.exp(-np.asarray(effects, dtype=float))
    else:
        lt = np.asarray(treatment_hazards, dtype=float)
    if lt.shape != lc.shape:
        raise ValueError("treatment and control need the same number of endpoints")
    cop = make_copula(lc.size, tau=tau, kappa=kappa, corr=corr, kind=copula)
    cens = CensoringModel(
        study_length,
        accrual_length,
        accrual_shape,
        Exponential(dropout_hazard) if dropout_hazard else None,
    )
    return ScenarioSpec(
        control=ArmJointModel([Exponential(x) for x in lc], cop),
        treatment=ArmJointModel([Exponential(x) for x in lt], cop),
        censoring=cens,
        semi_competing=semi_competing,
    )


def scenario_from_marginals(
    control: Sequence[MarginalModel],
    treatment: Sequence[MarginalModel],
    censoring: CensoringModel,
    copula=None,
    semi_competing: bool = False,
) -> ScenarioSpec:
    return ScenarioSpec(
        ArmJointModel(control, copula), ArmJointModel(treatment, copula), censoring, semi_competing
    )
