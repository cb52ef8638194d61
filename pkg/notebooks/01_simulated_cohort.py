"""
Simulated censored cohort
=========================

Draws the two-cluster cohort, checks the covariance and the censoring
level, and writes per-cluster Kaplan-Meier curves for plotting.
"""

# %%
import numpy as np

from survbench import SimConfig, generate_dataset
from survbench.metrics import kaplan_meier, logrank_test, write_km_csv
from survbench.simulate import PAPER_MU, build_covariance

# %% [markdown]
# The covariance couples the first five coordinates along a path, so its
# spectrum is known in closed form: 1 + c * {±sqrt(3), ±1, 0}.

# %%
sigma = build_covariance(0.5)
print(np.round(sigma, 2))
print("eigenvalues", np.round(np.linalg.eigvalsh(sigma), 4))
print("condition number", round(np.linalg.cond(sigma), 3))
print("mean separation", round(float(np.linalg.norm(np.subtract(*PAPER_MU))), 3))

# %%
ds = generate_dataset(SimConfig(n=500, seed=0))
print(f"n={ds.n}, censored share {1 - ds.event.mean():.3f}")
for g in (0, 1):
    sel = ds.groups == g
    km = kaplan_meier((ds.time[sel], ds.event[sel]))
    print(f"group {g}: {sel.sum()} rows, S(30)={km(30.0):.3f}, S(90)={km(90.0):.3f}")

# %% [markdown]
# The clusters shift the interaction term only modestly, so at n = 500
# the curves separate visibly but a log-rank test is not always
# significant. A much larger cohort makes the difference plain.

# %%
for n in (500, 20_000):
    big = generate_dataset(SimConfig(n=n, seed=0))
    stat, pval = logrank_test(big.time, big.event, big.groups == 1)
    print(f"n={n}: log-rank chi2={stat:.2f}, p={pval:.2g}")

# %%
write_km_csv("km_by_group.csv", ds, by_group=True)
print("wrote km_by_group.csv")
