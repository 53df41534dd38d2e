# %% [markdown]
# # How many samples?
#
# The horizon estimate comes with a guarantee: with probability at least
# `1 - beta`, the set of initial states whose first exit happens after the
# estimated horizon has measure at most `epsilon`. This script tabulates the
# sample sizes that deliver it and compares the available bounds.

# %%
from invariset.oracle import bound_table
from invariset.sampling import (
    hoeffding_sample_size,
    phase1_sample_size,
    phase1_sample_size_conservative,
    scenario_confidence,
    scenario_sample_size,
)

eps, beta = 1e-3, 0.05
print("max-exit horizon  ", phase1_sample_size(eps, beta))
print("plateau horizon   ", phase1_sample_size_conservative(eps, beta))
print("Hoeffding         ", hoeffding_sample_size(eps, beta))

# %% [markdown]
# The Hoeffding route needs three orders of magnitude more samples. At a
# fixed `N` the failure bounds look like this:

# %%
print("N      thm1        thm2        hoeffding")
for n in (1000, 2995, 5000, 9899):
    row = bound_table(eps, n)
    print(f"{n:<6} {row.thm1:<11.4g} {row.thm2:<11.4g} {row.hoeffding:.4g}")

# %% [markdown]
# ## Test-set size for the identification phase
#
# Each identification round draws `N_delta` fresh points. The confidence
# attached to a round is a binomial tail with `d` terms.

# %%
for d in (1, 2):
    print(f"d={d}: confidence at 4800 = {scenario_confidence(4800, 1e-3, d):.4f}, "
          f"smallest N below 0.05 = {scenario_sample_size(1e-3, 0.05, d)}")
