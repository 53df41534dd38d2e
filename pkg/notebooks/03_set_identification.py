# %% [markdown]
# # Inner and outer approximations
#
# With the horizon fixed, label reference points by a short simulation and
# classify new points by comparing nearest-neighbour distances to the two
# labelled groups. Fresh test batches keep arriving until the worst labelling
# error `delta*` drops below the tolerance.

# %%
from invariset import Phase2Config, estimate_horizon, example_system, identify_set, sample_uniform

system, box = example_system("example1")
omega = sample_uniform(box, 2995, seed=7)
hz = estimate_horizon(system, omega, box)
res = identify_set(system, omega, hz, box, Phase2Config(delta_bar=0.01), seed=7,
                   callback=lambda r: print(f"reference {r.n_reference:>6}  delta* {r.delta_star:.4f}"))

# %% [markdown]
# The outer set uses radius `+delta*`, the inner set `-delta*`.

# %%
X = sample_uniform(box, 50_000, seed=1).points
inner, outer = res.inner.contains(X), res.outer.contains(X)
print(f"inner {inner.mean():.4f}  outer {outer.mean():.4f}  inner outside outer: {(inner & ~outer).sum()}")

# %% [markdown]
# A looser tolerance stops earlier with a smaller reference set.

# %%
for tol in (0.05, 0.02, 0.01):
    r = identify_set(system, omega, hz, box, Phase2Config(delta_bar=tol), seed=7)
    print(f"delta_bar={tol}: {len(r.rounds)} rounds, {len(r.reference)} reference points")
