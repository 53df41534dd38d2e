# %% [markdown]
# # Checking the results against a grid
#
# For the built-in examples the sets `O_k` can be computed directly on a grid.
# That gives an independent check of the horizon and of the classifiers, and
# a CSV for plotting.

# %%
from pathlib import Path

from invariset import Phase2Config, estimate_horizon, example_system, identify_set, sample_uniform
from invariset.io import write_classifier
from invariset.oracle import GridOracle, sandwich_measures, violation_S_k, write_grid_csv

system, box = example_system("example1")
grid = GridOracle(system, box, 500, k_max=10)
print("grid fixed point:", grid.fixed_point())
print("measure of O_k:", [round(grid.O_k(k).measure, 4) for k in range(6)])

# %%
omega = sample_uniform(box, 2995, seed=7)
hz = estimate_horizon(system, omega, box)
res = identify_set(system, omega, hz, box, Phase2Config(delta_bar=0.01), seed=7)

s = violation_S_k(system, box, hz.t_star, 100_000, seed=0)
sw = sandwich_measures(res.inner, res.outer, system, box, hz.t_star, 100_000, seed=0)
print(f"escape after t*: {s.point_estimate:.2e} +- {s.sigma:.1e}")
print(f"inner excess {sw.inner_excess.point_estimate:.2e}, outer deficit {sw.outer_deficit.point_estimate:.2e}")

# %% [markdown]
# Export the grid membership and the classifier. The classifier file is
# self-contained: reference points with labels plus `t_star`, `delta*` and the
# box, enough to rebuild both sets with `invariset.io.read_classifier`.

# %%
out = Path("runs/notebook")
out.mkdir(parents=True, exist_ok=True)
write_grid_csv(out / "grid.csv", grid.centers, grid.mask(hz.t_star),
               res.inner.contains(grid.centers), res.outer.contains(grid.centers))
write_classifier(out / "classifier.csv", res.reference, res.delta_star, box)
print(sorted(p.name for p in out.iterdir()))
