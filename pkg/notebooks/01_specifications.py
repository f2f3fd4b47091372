# %% [markdown]
# # From a mission to an automaton
#
# Missions are written either as regular expressions over region letters or
# as co-safe LTL formulas. Both compile to a minimal complete DFA whose
# alphabet is every subset of the atomic propositions.

# %%
import numpy as np

from lcmdp.automata import compile_spec, to_dot

AP = ["A", "B", "C", "D"]
MISSION = "(A+B+C)*D(D+C)*"

dfa = compile_spec(MISSION, AP)
print(dfa.n_states, "states, accepting:", np.flatnonzero(dfa.accepting).tolist())

# %% [markdown]
# Grid cells carry exactly one region, so only the one-hot letters matter.
# Walk a few words through the table by hand.

# %%
letter = {p: 1 << i for i, p in enumerate(AP)}


def run(word):
    q = dfa.initial
    for p in word:
        q = dfa.table[q, letter[p]]
    return bool(dfa.accepting[q])


for w in ["D", "ABD", "DC", "DA", "ABC"]:
    print(f"{w:>4}  {run(w)}")

# %% [markdown]
# Prefix semantics makes accepting states absorbing, so once the robot has
# reached D whatever it does afterwards no longer matters.

# %%
loose = compile_spec(MISSION, AP, semantics="prefix")
q = loose.initial
for p in "DA":
    q = loose.table[q, letter[p]]
print("DA under prefix semantics:", bool(loose.accepting[q]))

# %% [markdown]
# The same construction handles co-safe formulas.

# %%
visit_both = compile_spec("F A & F (B & X F D)", AP, kind="scltl")
print(visit_both.n_states, "states")
print(to_dot(visit_both)[:400])
