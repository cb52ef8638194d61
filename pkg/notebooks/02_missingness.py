"""
Amputation mechanisms
=====================

MCAR hides cells at a fixed rate; self-masking hides values far from
their column mean. The achieved rates are measured here.
"""

# %%
import numpy as np

from survbench import AmputationSpec, SimConfig, ampute, generate_dataset, missing_fraction

# %%
ds = generate_dataset(SimConfig(n=500, seed=0))
for p in (0.4, 0.6, 0.8):
    out = ampute(ds, AmputationSpec("mcar", p=p, seed=0))
    print(f"mcar p={p}: missing {missing_fraction(out):.3f}")

# %% [markdown]
# Under self-masking a larger threshold masks fewer cells, and the
# share of rows with at least one hidden value is much higher than the
# cell rate.

# %%
for tau in (0.62, 0.82, 1.03):
    rates, rows = [], []
    for seed in range(10):
        out = ampute(generate_dataset(SimConfig(n=500, seed=seed)), AmputationSpec("selfmask", tau=tau))
        rates.append(missing_fraction(out))
        rows.append(out.mask.any(axis=1).mean())
    print(f"selfmask tau={tau}: cells {np.mean(rates):.3f}, rows with a gap {np.mean(rows):.3f}")

# %%
out = ampute(ds, AmputationSpec("selfmask", tau=0.82))
per_column = out.mask.mean(axis=0)
print("per-column masked share", np.round(per_column, 3))
