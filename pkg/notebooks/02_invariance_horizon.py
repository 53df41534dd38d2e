# %% [markdown]
# # Estimating the invariance horizon
#
# Sample the constraint box uniformly, simulate every sample until it exits
# or settles into a recurrent orbit, and read off the largest exit step.

# %%
import numpy as np

from invariset import Phase1Config, estimate_horizon, example_system, phase1_sample_size, sample_uniform

N = phase1_sample_size(1e-3, 0.05)
for tag in ("example1", "pwa", "lure", "chatala"):
    system, box = example_system(tag)
    rep = estimate_horizon(system, sample_uniform(box, N, seed=0), box)
    print(f"{tag:<9} t_star={rep.t_star:<3} t_bar={rep.t_bar:<3} steps={rep.steps_simulated:<4} "
          f"({rep.terminated_by})")

# %% [markdown]
# The survival fractions `theta[k]` fall as samples leave the box. Their first
# plateau gives a cheaper horizon `t_bar`, never larger than `t_star`.

# %%
system, box = example_system("example1")
rep = estimate_horizon(system, sample_uniform(box, N, seed=0), box)
print([round(float(v), 4) for v in rep.theta[:8]])

# %% [markdown]
# ## Spread across seeds
#
# For the chaotic examples the horizon varies from run to run. Twenty seeds
# give a feel for the distribution.

# %%
for tag in ("lure", "chatala"):
    system, box = example_system(tag)
    t = [estimate_horizon(system, sample_uniform(box, N, seed=s), box).t_star for s in range(20)]
    print(tag, "median", np.median(t), "range", (min(t), max(t)))

# %% [markdown]
# Each sample is retired once its orbit returns close to its own history.
# `lockstep=True` instead waits until every survivor passes at the same step,
# which a chaotic attractor may never do; the hard cap then ends the run.

# %%
system, box = example_system("chatala")
rep = estimate_horizon(system, sample_uniform(box, 500, seed=0), box,
                       Phase1Config(lockstep=True, max_steps_hard=300))
print(rep.terminated_by, rep.t_star)
