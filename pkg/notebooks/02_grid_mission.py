# %% [markdown]
# # A risk-aware mission on a 20 x 20 terrain
#
# Build the grid model, pair it with the mission automaton, prune, solve the
# occupation-measure LP, and check the answer by simulation.

# %%
from pathlib import Path

import numpy as np

from lcmdp import gridworld as gw
from lcmdp.automata import compile_spec
from lcmdp.product import build_product
from lcmdp.prune import prune
from lcmdp.sim import sample
from lcmdp.synth import SynthesisProblem, expected_visits, synthesize

OUT = Path(__file__).resolve().parent / "out"
OUT.mkdir(exist_ok=True)

elev, risk, cfg = gw.synthetic_instance(20)
model = gw.build_grid_lcmdp(elev, risk, cfg)
print(model.n_states, "cells,", model.n_choices, "state-action pairs")
print("start", cfg.start, "shortest distance to goal", gw.manhattan_to_goal(cfg))

# %% [markdown]
# Costs are ordered (risk, path length). We minimize risk while asking for a
# 70% chance of finishing the mission within 1.4 times the shortest distance
# on average.

# %%
dfa = compile_spec("(A+B+C)*D(D+C)*", model.ap)
full_product = build_product(model, dfa)
product, report = prune(full_product, "reach-only")
print(report.table())

bound = 1.4 * gw.manhattan_to_goal(cfg)
result = synthesize(SynthesisProblem(product, 0.7, [bound]))
print(result.status)
for rep in (result.lp_report, result.exact_report):
    print(f"{rep.source:>5}: risk {rep.objective:.4f}  length {rep.aux_costs[0]:.3f}  "
          f"P(sat) {rep.satisfaction:.4f}")

# %% [markdown]
# The LP only sees expectations, so simulate the policy to make sure its
# empirical behaviour lines up.

# %%
stats = sample(result.policy, seed=0, n=20_000)
ex = result.exact_report
print(f"satisfaction {stats.satisfaction_rate:.4f} vs {ex.satisfaction:.4f}")
print(f"risk         {stats.mean_costs[0]:.4f} +- {stats.sem_costs[0]:.4f} vs {ex.objective:.4f}")
print(f"length       {stats.mean_costs[1]:.3f} +- {stats.sem_costs[1]:.3f} vs {ex.aux_costs[0]:.3f}")

# %% [markdown]
# Where does the robot spend its time? Fold the expected visit counts back
# onto the grid and draw them next to one sampled path.

# %%
visits = expected_visits(result.policy)
heat = np.zeros(model.n_states)
np.add.at(heat, product.mdp_state, visits)
gw.render(OUT / "visits.ppm", risk, cfg.mask, heat=heat.reshape(20, 20), scale=8)

one = sample(result.policy, seed=1, n=1, keep_trajectories=True).trajectories[0]
path = [gw.cell_of(product.mdp_state[x], 20) for x in one.states]
gw.render(OUT / "path.ppm", risk, cfg.mask, cells=path, scale=8)
print("path of", one.length, "steps, satisfied:", one.satisfied)
print("images written to", OUT)
