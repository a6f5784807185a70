import numpy as np
import pytest
from scipy import integrate

from wrdesign.copula import ArmJointModel, GaussianCopula, GumbelHougaard
from wrdesign.survival import CensoringModel, Exponential, PiecewiseExponential
from wrdesign.winprob import (
    ScenarioSpec,
    WinLossTieTable,
    admin_table,
    compute_table,
    exponential_scenario,
    tie_prob,
    win_prob_first,
    win_prob_k,
)


def followup_survival(x, s, b, g):
    """Test-local censoring survival: exponential dropout times uniform-accrual follow-up."""
    sl = 1.0 if x <= s - b else max(0.0, (s - x) / b)
    return np.exp(-g * x) * sl


def followup_density(x, s, b, g):
    sl = 1.0 if x <= s - b else max(0.0, (s - x) / b)
    fl = 1.0 / b if (b > 0 and s - b < x <= s) else 0.0
    return np.exp(-g * x) * (g * sl + fl)


class TestSingleEndpoint:
    def test_exponential_race_admin(self):
        lc, lt, s = 2e-3, 1.2e-3, 700.0
        scn = exponential_scenario([lc], treatment_hazards=[lt], study_length=s)
        race = 1 - np.exp(-(lc + lt) * s)
        tab = compute_table(scn)
        assert tab.win[0] == pytest.approx(lc / (lc + lt) * race, rel=1e-12)
        assert tab.loss[0] == pytest.approx(lt / (lc + lt) * race, rel=1e-12)
        assert tab.tie == pytest.approx(np.exp(-(lc + lt) * s), rel=1e-14)

    def test_exponential_race_no_censoring_limit(self):
        lc, lt = 2e-3, 1.2e-3
        scn = exponential_scenario([lc], treatment_hazards=[lt], study_length=1e6)
        assert compute_table(scn).win_ratio == pytest.approx(lc / lt, rel=1e-12)

    @pytest.mark.parametrize("b,g", [(0.0, 3e-4), (250.0, 0.0), (250.0, 3e-4), (600.0, 1e-3)])
    def test_general_censoring_against_quad(self, b, g):
        lc, lt, s = 1.5e-3, 1e-3, 600.0
        scn = exponential_scenario([lc], treatment_hazards=[lt], study_length=s, accrual_length=b,
                                   dropout_hazard=g or None)
        ref_win = integrate.quad(lambda y: np.exp(-lt * y) * lc * np.exp(-lc * y)
                                 * followup_survival(y, s, b, g) ** 2, 0, s, points=[s - b], epsabs=1e-14)[0]
        ref_loss = integrate.quad(lambda y: np.exp(-lc * y) * lt * np.exp(-lt * y)
                                  * followup_survival(y, s, b, g) ** 2, 0, s, points=[s - b], epsabs=1e-14)[0]
        tab = compute_table(scn)
        assert tab.win[0] == pytest.approx(ref_win, rel=1e-9)
        assert tab.loss[0] == pytest.approx(ref_loss, rel=1e-9)
        assert tab.total == pytest.approx(1.0, abs=1e-10)


def _gh_two_endpoint_oracle(lc, lt, kappa, s, b, g):
    """Endpoint-2 win probability for the treated arm by scipy double quadrature."""

    def S(y1, y2, lam):
        return np.exp(-(((lam[0] * y1) ** kappa + (lam[1] * y2) ** kappa) ** (1 / kappa)))

    def minus_d2(y1, y2, lam):
        h1, h2 = lam[0] * y1, lam[1] * y2
        A = (h1**kappa + h2**kappa) ** (1 / kappa)
        if A == 0:
            return lam[1]
        return S(y1, y2, lam) * lam[1] * (h2 / A) ** (kappa - 1)

    def inner(c):
        return integrate.quad(lambda y: S(c, y, lt) * minus_d2(c, y, lc), 0, c, epsabs=1e-15, epsrel=1e-12)[0]

    def weight(c):
        return 2 * followup_density(c, s, b, g) * followup_survival(c, s, b, g)

    pts = [s - b] if b > 0 else None
    val = integrate.quad(lambda c: weight(c) * inner(c), 0, s, points=pts, epsabs=1e-14, epsrel=1e-11)[0]
    if b == 0:
        val += np.exp(-2 * g * s) * inner(s)
    return val


@pytest.mark.parametrize("kappa,b,g", [(1.0, 200.0, 1.5e-4), (2.0, 200.0, 1.5e-4), (5.0, 0.0, 3e-4), (1.6, 0.0, 0.0)])
def test_second_endpoint_against_dblquad(kappa, b, g):
    lc, lt, s = (5.7e-4, 1.5e-3), (4.2e-4, 1.3e-3), 800.0
    scn = exponential_scenario(lc, treatment_hazards=lt, kappa=kappa, study_length=s, accrual_length=b,
                               dropout_hazard=g or None)
    assert win_prob_k(scn, 2) == pytest.approx(_gh_two_endpoint_oracle(lc, lt, kappa, s, b, g), rel=1e-8)
    # the loss side is the same computation with the arms exchanged
    assert win_prob_k(scn, 2, "c") == pytest.approx(_gh_two_endpoint_oracle(lt, lc, kappa, s, b, g), rel=1e-8)


def test_product_copula_closed_form():
    lc, lt, s, b, g = (5.7e-4, 1.8e-3, 1.5e-3), (4.7e-4, 1.3e-3, 1.4e-3), 500.0, 200.0, 1.5e-4
    scn = exponential_scenario(lc, treatment_hazards=lt, tau=0.0, study_length=s, accrual_length=b, dropout_hazard=g)
    tab = compute_table(scn)

    def weight(c):
        return 2 * followup_density(c, s, b, g) * followup_survival(c, s, b, g)

    for k in range(1, 3):
        def f(c, k=k):
            tied = np.prod([np.exp(-(lc[j] + lt[j]) * c) for j in range(k)])
            return weight(c) * tied * lc[k] / (lc[k] + lt[k]) * (1 - np.exp(-(lc[k] + lt[k]) * c))
        ref = integrate.quad(f, 0, s, points=[s - b], epsabs=1e-15, epsrel=1e-12)[0]
        assert tab.win[k] == pytest.approx(ref, rel=1e-9)
    ref_tie = integrate.quad(lambda c: weight(c) * np.exp(-sum(lc + lt) * c), 0, s, points=[s - b],
                             epsabs=1e-15, epsrel=1e-12)[0]
    assert tab.tie == pytest.approx(ref_tie, rel=1e-9)


@pytest.mark.parametrize("shape", [(0.5, 0.7), (0.3, 2.0), (2.5, 0.4)])
def test_singular_accrual_density(shape):
    # E h(M) = h(0) + int_0^s h'(c) S_L(c)^2 dc for the pair follow-up M, which avoids the density
    lc, lt, s, b = np.array([8e-4, 2e-3]), np.array([6e-4, 1.4e-3]), 800.0, 500.0
    scn = exponential_scenario(lc, treatment_hazards=lt, tau=0.0, study_length=s, accrual_length=b,
                               accrual_shape=shape)
    a, lam2 = lc[0] + lt[0], lc[1] + lt[1]
    sl = scn.censoring.admin_survival

    def dwin2(c):
        return lc[1] / lam2 * np.exp(-a * c) * (-a * (1 - np.exp(-lam2 * c)) + lam2 * np.exp(-lam2 * c))

    def dtie(c):
        return -(a + lam2) * np.exp(-(a + lam2) * c)

    kw = dict(points=[s - b], epsabs=1e-14, epsrel=1e-12, limit=200)
    ref_win2 = integrate.quad(lambda c: dwin2(c) * sl(c) ** 2, 0, s, **kw)[0]
    ref_tie = 1 + integrate.quad(lambda c: dtie(c) * sl(c) ** 2, 0, s, **kw)[0]
    tab = compute_table(scn)
    assert tab.win[1] == pytest.approx(ref_win2, rel=1e-9)
    assert tab.tie == pytest.approx(ref_tie, rel=1e-9)
    assert tab.total == pytest.approx(1.0, abs=1e-10)


def _pair_monte_carlo(scn, n, rng):
    """Independent pairs compared hierarchically on pair follow-up min(C_t, C_c)."""
    yt = scn.treatment.sample(rng, n)
    yc = scn.control.sample(rng, n)
    c = np.minimum(scn.censoring.sample(rng, n), scn.censoring.sample(rng, n))
    open_ = np.ones(n, bool)
    win, loss = [], []
    for k in range(scn.K):
        w = open_ & (yc[:, k] < np.minimum(yt[:, k], c))
        l = open_ & (yt[:, k] < np.minimum(yc[:, k], c))
        win.append(w.mean())
        loss.append(l.mean())
        open_ &= ~(w | l)
    return np.array(win), np.array(loss), open_.mean()


@pytest.mark.parametrize(
    "scn",
    [
        exponential_scenario((5.7e-4, 1.8e-3, 1.5e-3), effects=(0.2, 0.3, 0.1), tau=0.5, study_length=500,
                             accrual_length=200, dropout_hazard=1.5e-4),
        exponential_scenario((5.7e-4, 1.5e-3), effects=(0.1, 0.3), tau=0.6, copula="gaussian", study_length=700,
                             accrual_length=300, accrual_shape=(2.0, 1.0), dropout_hazard=2e-4),
        ScenarioSpec(
            ArmJointModel([PiecewiseExponential((200.0,), (1e-3, 5e-4)), Exponential(2e-3)], GumbelHougaard(3.0)),
            ArmJointModel([PiecewiseExponential((200.0,), (8e-4, 4e-4)), Exponential(1.5e-3)], GumbelHougaard(3.0)),
            CensoringModel(600.0, 150.0, (1.0, 2.0), PiecewiseExponential((300.0,), (1e-4, 3e-4))),
        ),
    ],
    ids=["gh3", "gauss2-beta-accrual", "piecewise"],
)
def test_against_pair_monte_carlo(scn, rng):
    n = 1_000_000
    tab = compute_table(scn)
    win, loss, tie = _pair_monte_carlo(scn, n, rng)
    for p_hat, p in list(zip(win, tab.win)) + list(zip(loss, tab.loss)) + [(tie, tab.tie)]:
        assert abs(p_hat - p) < 4 * np.sqrt(p * (1 - p) / n) + 1e-12


def test_identical_arms_balanced():
    arm = ArmJointModel([Exponential(1e-3), Exponential(2e-3)], GumbelHougaard(2.0))
    tab = compute_table(ScenarioSpec(arm, arm, CensoringModel(500.0, 200.0, dropout=Exponential(1e-4))))
    np.testing.assert_allclose(tab.win, tab.loss, rtol=1e-12)
    assert tab.win_ratio == pytest.approx(1.0, abs=1e-12)


def test_arm_swap():
    scn = exponential_scenario((5.7e-4, 1.5e-3), effects=(0.3, 0.1), tau=0.4, study_length=900,
                               accrual_length=200, dropout_hazard=1.5e-4)
    a, b = compute_table(scn), compute_table(scn.swapped())
    np.testing.assert_allclose(a.win, b.loss, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(a.loss, b.win, rtol=1e-12, atol=1e-15)
    assert a.tie == pytest.approx(b.tie, rel=1e-12)
    assert a.win_ratio * b.win_ratio == pytest.approx(1.0, rel=1e-12)


def test_terminal_first_has_no_effect():
    scn = exponential_scenario((5.7e-4, 1.8e-3, 1.5e-3), effects=(0.2, 0.3, 0.1), tau=0.3, study_length=500,
                               accrual_length=200, dropout_hazard=1.5e-4)
    a = compute_table(scn)
    b = compute_table(scn, terminal_first=True)
    np.testing.assert_allclose(a.win, b.win, rtol=1e-10)
    np.testing.assert_allclose(a.loss, b.loss, rtol=1e-10)


def test_tie_increases_with_tau():
    ties = [tie_prob(exponential_scenario((5.7e-4, 1.5e-3), effects=(0.2, 0.2), tau=t, study_length=700,
                                          accrual_length=200, dropout_hazard=1.5e-4))
            for t in np.linspace(0, 0.9, 10)]
    assert np.all(np.diff(ties) > 0)


def test_small_accrual_limit_approaches_admin():
    kw = dict(effects=(0.2, 0.3), tau=0.5, study_length=600)
    admin = compute_table(exponential_scenario((5.7e-4, 1.5e-3), **kw))
    gaps = []
    for b in (1e-2, 1e-3, 1e-4):
        near = compute_table(exponential_scenario((5.7e-4, 1.5e-3), accrual_length=b, **kw))
        gaps.append(max(np.abs(np.subtract(near.win, admin.win)).max(), abs(near.tie - admin.tie)))
    # the gap shrinks in proportion to the accrual length
    assert gaps[-1] < 1e-7
    assert gaps[0] / gaps[1] == pytest.approx(10, rel=0.05)
    assert gaps[1] / gaps[2] == pytest.approx(10, rel=0.05)


def test_general_route_matches_admin_closed_forms():
    scn = exponential_scenario((5.7e-4, 1.8e-3, 1.5e-3), effects=(0.1, 0.2, 0.3), tau=0.8, study_length=250)
    a = admin_table(scn)
    g = compute_table(scn, method="general")
    np.testing.assert_allclose(g.win, a.win, rtol=1e-9)
    np.testing.assert_allclose(g.loss, a.loss, rtol=1e-9)
    assert g.tie == pytest.approx(a.tie, rel=1e-12)
    # all-tied closed form S_t(s, s, s) S_c(s, s, s)
    s = 250.0
    lc = np.array((5.7e-4, 1.8e-3, 1.5e-3))
    lt = lc * np.exp(-np.array((0.1, 0.2, 0.3)))
    k = 1 / (1 - 0.8)
    ref = np.exp(-np.sum((lc * s) ** k) ** (1 / k) - np.sum((lt * s) ** k) ** (1 / k))
    assert a.tie == pytest.approx(ref, rel=1e-13)


def test_admin_method_rejects_general_censoring():
    scn = exponential_scenario((1e-3,), hazard_ratios=(0.8,), study_length=500, accrual_length=100)
    with pytest.raises(ValueError):
        compute_table(scn, method="admin")


def test_endpoint_range():
    scn = exponential_scenario((1e-3, 2e-3), hazard_ratios=(0.8, 0.9), tau=0.2, study_length=500)
    with pytest.raises(IndexError):
        win_prob_k(scn, 3)
    assert win_prob_k(scn, 1) == win_prob_first(scn)


def test_table_measures():
    t = WinLossTieTable((0.3, 0.1), (0.2, 0.1), 0.3)
    assert t.win_ratio == pytest.approx(4 / 3)
    assert t.net_benefit == pytest.approx(0.1)
    assert t.win_odds == pytest.approx(0.55 / 0.45)
    assert t.endpoint_win_ratios() == pytest.approx((1.5, 1.0))
    assert t.swapped().win == (0.2, 0.1)


def test_scenario_builder_validation():
    with pytest.raises(ValueError):
        exponential_scenario((1e-3,), study_length=500)
    with pytest.raises(ValueError):
        exponential_scenario((1e-3,), hazard_ratios=(0.8,), effects=(0.1,), study_length=500)
    with pytest.raises(ValueError):
        exponential_scenario((1e-3, 1e-3), hazard_ratios=(0.8, 0.8), tau=0.2, kappa=2.0, study_length=500)
