# %% [markdown]
# # A black-box simulator in another process
#
# Any program that speaks the line protocol can be analysed: it answers
# `DIM?` with the state dimension, then reads one state per line and writes
# the successor state. Here the simulator is a small Python script, but the
# protocol does not care about the language.

# %%
import sys
import tempfile
import textwrap
from pathlib import Path

from invariset import ConstraintBox, estimate_horizon, external_system, sample_uniform

script = Path(tempfile.mkdtemp()) / "henon.py"
script.write_text(textwrap.dedent("""
    import sys
    for line in sys.stdin:
        line = line.strip()
        if line == "DIM?":
            print(2, flush=True)
            continue
        x, y = map(float, line.split())
        print(repr(1 - 1.2 * x * x + y), repr(0.3 * x), flush=True)
"""))

# %%
box = ConstraintBox.symmetric(1.5, 0.5)
with external_system([sys.executable, str(script)]) as system:
    rep = estimate_horizon(system, sample_uniform(box, 300, seed=0), box)
print("t_star", rep.t_star, "terminated by", rep.terminated_by)

# %% [markdown]
# The same works from the command line, e.g.
#
#     invariset phase1 --system "extern:python3 henon.py" --box=-1.5:1.5,-0.5:0.5 --epsilon 0.01
#
# The `verify` command needs a white-box model and refuses external systems.
