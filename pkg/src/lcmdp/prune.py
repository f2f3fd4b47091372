"""Reachability pruning of product models."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .product import ProductLcmdp, backward_reachable, forward_reachable, restrict, state_graph

MODES = ("reach-only", "full")


class InfeasibleStructure(ValueError):
    """Pruning removed every state, or an initial state."""


@dataclass
class PruneReport:
    mode: str
    original_states: int
    kept_states: int = 0
    removed_states: int = 0
    removed_choices: int = 0
    redirected_transitions: int = 0
    unreachable: int = 0
    cannot_reach_goal: int = 0
    unrelated_to_accepting: int = 0
    passes: int = 0
    sink_created: bool = False
    details: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def table(self) -> str:
        rows = [
            ("mode", self.mode),
            ("states before", self.original_states),
            ("states kept", self.kept_states),
            ("states removed", self.removed_states),
            ("  not reachable from initial", self.unreachable),
            ("  cannot reach goal", self.cannot_reach_goal),
            ("  not linked to accepting", self.unrelated_to_accepting),
            ("state-action pairs removed", self.removed_choices),
            ("transitions redirected to sink", self.redirected_transitions),
            ("passes", self.passes),
        ]
        w = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{w}}  {v}" for k, v in rows)


def conditions(prod: ProductLcmdp, mode: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-state truth of the three keep conditions.

    The third is all-true in ``reach-only`` mode. The model's sink is ignored
    as a graph node so that it never links other states.
    """
    pm = prod.model
    g = state_graph(pm)
    if pm.sink is not None:
        g = g.tolil()
        g[:, pm.sink] = 0
        g[pm.sink, :] = 0
        g = g.tocsr()
        g.eliminate_zeros()
    c1 = forward_reachable(pm, np.flatnonzero(pm.beta > 0), g)
    c2 = backward_reachable(pm, np.flatnonzero(prod.goal), g)
    if mode == "full":
        acc = np.flatnonzero(pm.accepting)
        c3 = backward_reachable(pm, acc, g) | forward_reachable(pm, acc, g)
    else:
        c3 = np.ones(pm.n_states, dtype=bool)
    return c1, c2, c3


def prune(prod: ProductLcmdp, mode: str = "reach-only") -> tuple[ProductLcmdp, PruneReport]:
    """Drop states failing the keep conditions, repeating until nothing changes.

    Transitions into dropped states are redirected to a sink.
    """
    if mode not in MODES:
        raise ValueError(f"unknown prune mode {mode!r}")
    report = PruneReport(mode=mode, original_states=prod.n_states)
    had_sink = prod.model.sink is not None
    while True:
        pm = prod.model
        c1, c2, c3 = conditions(prod, mode)
        keep = c1 & c2 & c3
        if pm.sink is not None:
            keep[pm.sink] = True
        drop = ~keep
        report.passes += 1
        if not drop.any():
            break
        if not np.any(keep & (pm.beta > 0)):
            raise InfeasibleStructure("pruning removed every initial state: the specification "
                                      "cannot be met from the initial distribution")
        lost_init = np.flatnonzero(drop & (pm.beta > 0))
        if len(lost_init):
            raise InfeasibleStructure(f"initial product states {lost_init.tolist()} cannot "
                                      "reach a goal state under the keep conditions")
        report.unreachable += int((drop & ~c1).sum())
        report.cannot_reach_goal += int((drop & ~c2).sum())
        report.unrelated_to_accepting += int((drop & ~c3).sum())
        report.removed_choices += int(np.diff(pm.choice_ptr)[drop].sum())
        prod, redirected = restrict(prod, keep)
        report.redirected_transitions += redirected
        report.details.append({"pass": report.passes, "removed": int(drop.sum()),
                               "redirected": redirected})
    report.sink_created = not had_sink and prod.model.sink is not None
    report.kept_states = prod.n_states - (1 if report.sink_created else 0)
    report.removed_states = report.original_states - report.kept_states
    return prod, report
