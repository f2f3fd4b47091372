"""Seeded Monte Carlo rollouts of a policy on a product model.

Trajectory ``i`` of a run with seed ``s`` draws from its own PCG64 stream
seeded by ``SeedSequence([s, i])``, so any subset of trajectories can be
regenerated on its own and the order of sampling does not matter.
"""

from __future__ import annotations

import bisect
import csv
import json
import math
from dataclasses import asdict, dataclass, field
from itertools import accumulate
from typing import Sequence

import numpy as np

from .automata import SEMANTICS, Dfa
from .product import ProductLcmdp
from .synth import Policy, transient_mask

GOAL = "goal"
SINK = "sink"
TRUNCATED = "truncated"
_CHUNK = 256


@dataclass
class Trajectory:
    states: list[int]
    actions: list[int]
    costs: list[float]
    word: list[int]
    satisfied: bool
    terminal: str
    length: int


@dataclass
class SimStats:
    n: int
    seed: int
    completed: int
    truncated: int
    mean_costs: list[float]
    std_costs: list[float]
    sem_costs: list[float]
    satisfied: int
    satisfaction_rate: float
    goal_rate: float
    mean_length: float
    trajectories: list[Trajectory] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("trajectories")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def check_satisfaction(word: Sequence[int], dfa: Dfa, semantics: str = "exact") -> bool:
    """``exact``: the run over the whole word ends accepting.
    ``prefix``: some prefix of the word (the empty one included) is accepted.
    """
    if semantics not in SEMANTICS:
        raise ValueError(f"unknown semantics {semantics!r}")
    q = dfa.initial
    if semantics == "prefix" and dfa.accepting[q]:
        return True
    for letter in word:
        q = dfa.table[q, letter]
        if semantics == "prefix" and dfa.accepting[q]:
            return True
    return bool(dfa.accepting[q])


class _Sampler:
    """Python-list view of the product and policy for fast stepping."""

    def __init__(self, policy: Policy, prod: ProductLcmdp):
        pm = prod.model
        self.prod = prod
        self.stop = (~transient_mask(prod)).tolist()
        self.sink = pm.sink
        ptr = pm.choice_ptr
        self.act_cum = []
        self.act_choice = []
        for x in range(pm.n_states):
            ks = list(range(ptr[x], ptr[x + 1]))
            self.act_choice.append(ks)
            self.act_cum.append(list(accumulate(float(policy.probs[k]) for k in ks)))
        T = pm.trans
        self.succ = []
        self.succ_cum = []
        for k in range(pm.n_choices):
            lo, hi = T.indptr[k], T.indptr[k + 1]
            self.succ.append(T.indices[lo:hi].tolist())
            self.succ_cum.append(list(accumulate(T.data[lo:hi].tolist())))
        self.costs = pm.costs.T.tolist()
        self.action = pm.choice_action.tolist()
        self.labels = pm.labels.tolist()
        self.satisfied = prod.satisfied.tolist()
        self.init_states = np.flatnonzero(pm.beta > 0).tolist()
        self.init_cum = list(accumulate(pm.beta[self.init_states].tolist()))
        self.n_costs = pm.n_costs

    @staticmethod
    def _pick(cum: list[float], u: float) -> int:
        # scale by the total so rows summing to 1 - eps never fall off the end
        i = bisect.bisect_right(cum, u * cum[-1])
        return min(i, len(cum) - 1)

    def rollout(self, seed: int, i: int, step_cap: int, keep: bool) -> Trajectory:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, i])))
        draws: list[float] = []

        def u() -> float:
            nonlocal draws
            if not draws:
                draws = rng.random(_CHUNK).tolist()[::-1]
            return draws.pop()

        x = self.init_states[self._pick(self.init_cum, u())]
        totals = [0.0] * self.n_costs
        states, actions, word = [x], [], [self.labels[x]]
        steps = 0
        while not self.stop[x]:
            if steps >= step_cap:
                return Trajectory(states if keep else [], actions, totals, word if keep else [],
                                  False, TRUNCATED, steps)
            ks = self.act_choice[x]
            k = ks[self._pick(self.act_cum[x], u())]
            row = self.succ[k]
            x = row[self._pick(self.succ_cum[k], u())]
            for j, c in enumerate(self.costs[k]):
                totals[j] += c
            steps += 1
            if keep:
                actions.append(self.action[k])
                states.append(x)
                if x != self.sink:
                    word.append(self.labels[x])
        terminal = SINK if x == self.sink else GOAL
        sat = terminal == GOAL and self.satisfied[x]
        if not keep:
            states, word = [], []
        return Trajectory(states, actions, totals, word, sat, terminal, steps)


def default_step_cap(prod: ProductLcmdp) -> int:
    return 100 * max(int(transient_mask(prod).sum()), 1)


def sample(policy: Policy, prod: ProductLcmdp | None = None, seed: int = 0, n: int = 1000,
           step_cap: int | None = None, keep_trajectories: bool = False) -> SimStats:
    """Roll out ``n`` trajectories until absorption or ``step_cap`` steps.

    A trajectory is satisfied when it is absorbed in a goal state whose
    automaton component accepts. Truncated trajectories count as not
    satisfied and are left out of the cost statistics.
    """
    prod = policy.product if prod is None else prod
    if n <= 0:
        raise ValueError("number of trajectories must be positive")
    step_cap = default_step_cap(prod) if step_cap is None else int(step_cap)
    if step_cap <= 0:
        raise ValueError("step cap must be positive")
    sampler = _Sampler(policy, prod)
    trajs = [sampler.rollout(seed, i, step_cap, keep_trajectories) for i in range(n)]
    done = [t for t in trajs if t.terminal != TRUNCATED]
    nc = prod.model.n_costs
    means, stds, sems = [], [], []
    for j in range(nc):
        vals = [t.costs[j] for t in done]
        mean, std = _moments(vals)
        means.append(mean)
        stds.append(std)
        sems.append(std / math.sqrt(len(vals)) if vals else float("nan"))
    sat = sum(t.satisfied for t in trajs)
    mean_len, _ = _moments([float(t.length) for t in done])
    return SimStats(
        n=n,
        seed=seed,
        completed=len(done),
        truncated=n - len(done),
        mean_costs=means,
        std_costs=stds,
        sem_costs=sems,
        satisfied=sat,
        satisfaction_rate=sat / n,
        goal_rate=sum(t.terminal == GOAL for t in trajs) / n,
        mean_length=mean_len,
        trajectories=trajs if keep_trajectories else [],
    )


def _moments(vals: list[float]) -> tuple[float, float]:
    """Mean and sample standard deviation with compensated summation."""
    if not vals:
        return float("nan"), float("nan")
    mean = math.fsum(vals) / len(vals)
    if len(vals) < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var)


def write_csv(stats: SimStats, path, cost_names: Sequence[str] | None = None) -> None:
    """One row per trajectory: length, costs, satisfied flag, terminal kind."""
    if not stats.trajectories:
        raise ValueError("no trajectories kept; sample with keep_trajectories=True")
    nc = len(stats.mean_costs)
    names = list(cost_names) if cost_names else [f"c{j}" for j in range(nc)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "length", *names, "satisfied", "terminal"])
        for i, t in enumerate(stats.trajectories):
            w.writerow([i, t.length, *[repr(c) for c in t.costs], int(t.satisfied), t.terminal])
