# %% [markdown]
# # Sample size across correlation levels
#
# Two endpoints, control hazards 0.00057 and 0.0015 per day. When the
# treatment effect sits mostly on the first endpoint, stronger correlation
# raises the required size; when it sits on the second, correlation can
# lower it.

# %%
from wrdesign import DesignSpec, correlation_grid, exponential_scenario

taus = [round(0.1 * i, 1) for i in range(10)]


def make(effects):
    def scenario(tau, s):
        return exponential_scenario((0.00057, 0.0015), effects=effects, tau=tau, study_length=s,
                                    accrual_length=200, dropout_hazard=0.00015)
    return scenario


for effects in [(0.3, 0.1), (0.05, 0.3)]:
    rows = correlation_grid(make(effects), taus, [500], DesignSpec(power=0.9))
    print(f"effects {effects}")
    for r in rows:
        rcr = "" if r.rcr is None else f"{r.rcr:+.3f}"
        print(f"  tau={r.tau:.1f}  WR={r.win_ratio:.4f}  p_tie={r.p_tie:.4f}  N={r.n:6d}  RCR {rcr}")

# %% [markdown]
# Power lost when a design sized under independence meets correlated data.

# %%
from wrdesign import compute_table, power_at_n, required_sample_size

base = compute_table(make((0.3, 0.1))(0.0, 500))
n = required_sample_size(base.win_ratio, base.tie, DesignSpec(power=0.8)).n
for tau in (0.0, 0.2, 0.4):
    t = compute_table(make((0.3, 0.1))(tau, 500))
    print(f"tau={tau:.1f}: power at N={n} is {power_at_n(t.win_ratio, t.tie, n, DesignSpec(power=None, n=n)):.3f}")

# %% [markdown]
# Stratified designs pool stratum tables with weights w N^2. Here a short
# and a long follow-up stratum share the enrolment equally.

# %%
from wrdesign import Stratum, stratified_sample_size

strata = [Stratum(1.0, 1.0, compute_table(make((0.3, 0.1))(0.3, s))) for s in (500, 1000)]
res = stratified_sample_size(strata, DesignSpec(power=0.9))
print(f"pooled WR {res.win_ratio:.4f}, p_tie {res.p_tie:.4f}, total N {res.n}, per stratum {res.strata_n}")
