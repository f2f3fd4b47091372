# %% [markdown]
# # How much does pruning buy?
#
# Solve the same mission on growing grids with and without pruning. Both LPs
# go through the in-house simplex, so timings compare like with like.

# %%
from lcmdp.cli import MISSION_REGEX, bench_rows, bench_table

rows = bench_rows([8, 10, 12, 14], MISSION_REGEX, 0.7, "reach-only", 1.4)
print(bench_table(rows))

# %% [markdown]
# The objective should not move, only the problem size.

# %%
for r in rows:
    shrink = 1 - r["vars_wp"] / r["vars_np"]
    print(f"{r['size']:>3}: {shrink:.0%} fewer variables, "
          f"objective gap {abs(r['obj_np'] - r['obj_wp']):.2e}")

# %% [markdown]
# Full pruning also drops states that cannot lead to acceptance. On this
# terrain every state that survives reach-only pruning can still finish the
# mission, so both modes keep the same product.

# %%
from lcmdp import gridworld as gw
from lcmdp.automata import compile_spec
from lcmdp.product import build_product
from lcmdp.prune import prune

elev, risk, cfg = gw.synthetic_instance(10)
model = gw.build_grid_lcmdp(elev, risk, cfg)
product = build_product(model, compile_spec(MISSION_REGEX, model.ap))
for mode in ("reach-only", "full"):
    kept, report = prune(product, mode)
    print(f"{mode:>10}: kept {report.kept_states} of {report.original_states} states")
