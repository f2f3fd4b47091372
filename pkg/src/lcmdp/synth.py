"""Occupation-measure LP for constrained synthesis, policy extraction and exact evaluation."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import lp as lpcore
from .product import ProductLcmdp, backward_reachable, forward_reachable


class StructurallyInfeasible(ValueError):
    """The problem cannot be feasible, detected before solving."""


class SingularSystem(ValueError):
    """The chain induced by a policy does not absorb from some reachable state."""

    def __init__(self, msg: str, state: int):
        super().__init__(msg)
        self.state = state


@dataclass
class SynthesisProblem:
    product: ProductLcmdp
    p_l: float = 0.0
    bounds: Sequence[float] = ()

    def __post_init__(self):
        self.bounds = [float(b) for b in self.bounds]
        if any(np.isnan(b) for b in self.bounds):
            raise ValueError("cost bounds must be numbers")
        n_aux = self.product.model.n_costs - 1
        if len(self.bounds) != n_aux:
            raise ValueError(f"{n_aux} auxiliary costs but {len(self.bounds)} bounds given")
        if not 0.0 <= self.p_l <= 1.0:
            raise ValueError(f"probability threshold {self.p_l} outside [0, 1]")


@dataclass
class Policy:
    """Randomized stationary policy as a probability per product choice."""

    product: ProductLcmdp
    probs: np.ndarray

    def dist(self, x: int) -> dict[int, float]:
        pm = self.product.model
        return {a: float(self.probs[k]) for a, k in zip(pm.actions(x), pm.choices(x))}

    def to_dict(self) -> dict:
        prod, pm = self.product, self.product.model
        states = []
        for x in np.flatnonzero(~pm.absorbing):
            states.append({
                "id": int(x),
                "mdp_state": int(prod.mdp_state[x]),
                "dfa_state": int(prod.dfa_state[x]),
                "dist": {str(a): p for a, p in self.dist(int(x)).items()},
            })
        return {"states": states}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def policy_from_dict(d: dict, prod: ProductLcmdp) -> Policy:
    pm = prod.model
    probs = np.zeros(pm.n_choices)
    probs[pm.choice_ptr[:-1][pm.absorbing]] = 1.0
    for st in d["states"]:
        x = int(st["id"])
        acts = pm.actions(x)
        for a, p in st["dist"].items():
            probs[pm.choice_ptr[x] + acts.index(int(a))] = float(p)
    return Policy(prod, probs)


@dataclass
class SynthesisReport:
    objective: float
    aux_costs: list[float]
    satisfaction: float
    lp_variables: int = 0
    lp_constraints: int = 0
    solve_time: float = 0.0
    source: str = "exact"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SynthesisResult:
    status: str
    lp: lpcore.LinearProgram
    solution: lpcore.LpSolution
    policy: Policy | None = None
    occupation: np.ndarray | None = None
    lp_report: SynthesisReport | None = None
    exact_report: SynthesisReport | None = None
    message: str = ""
    choices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def ok(self) -> bool:
        return self.status == lpcore.OPTIMAL


def transient_mask(prod: ProductLcmdp) -> np.ndarray:
    pm = prod.model
    frozen = pm.absorbing.copy()
    if pm.sink is not None:
        frozen[pm.sink] = True
    return ~frozen


def satisfaction_rates(prod: ProductLcmdp) -> np.ndarray:
    """Per choice, the probability of moving straight into a satisfying absorbing state."""
    return np.asarray(prod.model.trans @ prod.satisfied.astype(float)).ravel()


def build_lp(prob: SynthesisProblem) -> tuple[lpcore.LinearProgram, np.ndarray]:
    """Return the LP and the product choice index behind each LP variable."""
    prod = prob.product
    pm = prod.model
    trans_states = np.flatnonzero(transient_mask(prod))
    if len(trans_states) == 0:
        raise StructurallyInfeasible("no transient states: nothing to decide")
    if prob.p_l > 0 and not prod.satisfied.any():
        raise StructurallyInfeasible("no absorbing state satisfies the specification "
                                     f"but P_l = {prob.p_l} > 0")
    counts = np.diff(pm.choice_ptr)
    choice_mask = np.repeat(transient_mask(prod), counts)
    var_choice = np.flatnonzero(choice_mask)
    nv = len(var_choice)
    row_of_state = -np.ones(pm.n_states, dtype=np.int64)
    row_of_state[trans_states] = np.arange(len(trans_states))

    owner = sp.csr_matrix((np.ones(nv), (row_of_state[pm.choice_state[var_choice]], np.arange(nv))),
                          shape=(len(trans_states), nv))
    inflow = pm.trans[var_choice][:, trans_states].T.tocsr()
    A_eq = (owner - inflow).tocsr()
    b_eq = pm.beta[trans_states]

    sat = satisfaction_rates(prod)[var_choice]
    # an infinite bound is no constraint at all
    bounded = [i for i in range(1, pm.n_costs) if np.isfinite(prob.bounds[i - 1])]
    ub_rows = [pm.costs[i, var_choice] for i in bounded] + [-sat]
    b_ub = [prob.bounds[i - 1] for i in bounded] + [-prob.p_l]

    names = [f"rho[{int(pm.choice_state[k])},{int(pm.choice_action[k])}]" for k in var_choice]
    row_names = [f"flow[{int(x)}]" for x in trans_states]
    row_names += [f"cost{i}" for i in bounded] + ["spec"]
    lp = lpcore.LinearProgram(pm.costs[0, var_choice], A_eq, b_eq,
                              sp.csr_matrix(np.vstack(ub_rows)), np.asarray(b_ub),
                              names=names, row_names=row_names)
    return lp, var_choice


def extract_policy(rho: np.ndarray, prod: ProductLcmdp, var_choice: np.ndarray | None = None) -> Policy:
    """Normalize occupation measures per state; uniform where a state has none.

    ``rho`` is indexed by product choice unless ``var_choice`` maps its
    entries to choices.
    """
    pm = prod.model
    full = np.zeros(pm.n_choices)
    if var_choice is None:
        full[:] = rho
    else:
        full[var_choice] = rho
    full = np.maximum(full, 0.0)
    counts = np.diff(pm.choice_ptr)
    totals = np.add.reduceat(full, pm.choice_ptr[:-1]) if pm.n_choices else np.zeros(0)
    totals = np.where(counts > 0, totals, 0.0)
    per_choice = np.repeat(totals, counts)
    uniform = np.repeat(1.0 / np.maximum(counts, 1), counts)
    probs = np.where(per_choice > 1e-12, full / np.where(per_choice > 0, per_choice, 1.0), uniform)
    return Policy(prod, probs)


def induced_chain(policy: Policy) -> tuple[sp.csr_matrix, np.ndarray]:
    """State-to-state matrix and per-state expected costs under ``policy``."""
    pm = policy.product.model
    weight = sp.csr_matrix((policy.probs, (pm.choice_state, np.arange(pm.n_choices))),
                           shape=(pm.n_states, pm.n_choices))
    return (weight @ pm.trans).tocsr(), (weight @ pm.costs.T).T


def evaluate_exact(policy: Policy, prod: ProductLcmdp | None = None) -> SynthesisReport:
    """Expected total costs and satisfaction probability by linear solves."""
    prod = policy.product if prod is None else prod
    pm = prod.model
    P, c = induced_chain(policy)
    transient = transient_mask(prod)
    g = sp.csr_matrix(P > 0, dtype=float)
    reach = forward_reachable(pm, np.flatnonzero(pm.beta > 0), g) & transient
    absorbs = backward_reachable(pm, np.flatnonzero(~transient), g)
    stuck = np.flatnonzero(reach & ~absorbs)
    if len(stuck):
        x = int(stuck[0])
        raise SingularSystem(f"induced chain cannot absorb from reachable state {x} "
                             f"(provenance {prod.provenance(x)})", x)
    R = np.flatnonzero(reach)
    if len(R) == 0:
        return SynthesisReport(0.0, [0.0] * (pm.n_costs - 1), 0.0)
    Q = P[R][:, R]
    M = (sp.identity(len(R), format="csc") - Q).tocsc()
    sat_in = np.asarray(P[R] @ prod.satisfied.astype(float)).ravel()
    rhs = np.column_stack([c[:, R].T, sat_in])
    lu = spla.splu(M)
    sol = lu.solve(rhs)
    values = pm.beta[R] @ sol
    return SynthesisReport(
        objective=float(values[0]),
        aux_costs=[float(v) for v in values[1:-1]],
        satisfaction=float(min(max(values[-1], 0.0), 1.0)),
        source="exact",
    )


def expected_visits(policy: Policy) -> np.ndarray:
    """Expected number of visits to each product state before absorption."""
    prod = policy.product
    pm = prod.model
    P, _ = induced_chain(policy)
    transient = transient_mask(prod)
    g = sp.csr_matrix(P > 0, dtype=float)
    reach = forward_reachable(pm, np.flatnonzero(pm.beta > 0), g) & transient
    R = np.flatnonzero(reach)
    visits = np.zeros(pm.n_states)
    if len(R):
        M = (sp.identity(len(R), format="csc") - P[R][:, R]).T.tocsc()
        visits[R] = np.atleast_1d(spla.spsolve(M, pm.beta[R]))
    return visits


def synthesize(prob: SynthesisProblem,
               solver: Callable[[lpcore.LinearProgram], lpcore.LpSolution] = lpcore.solve,
               evaluate: bool = True) -> SynthesisResult:
    lp, var_choice = build_lp(prob)
    t0 = time.perf_counter()
    sol = solver(lp)
    elapsed = time.perf_counter() - t0
    res = SynthesisResult(sol.status, lp, sol, choices=var_choice)
    if not sol.ok:
        res.message = (f"no policy meets bounds (B={list(prob.bounds)}, P_l={prob.p_l}); "
                       f"LP status: {sol.status}")
        return res
    pm = prob.product.model
    rho = sol.x
    res.occupation = rho
    res.policy = extract_policy(rho, prob.product, var_choice)
    sat = satisfaction_rates(prob.product)[var_choice]
    res.lp_report = SynthesisReport(
        objective=float(sol.objective),
        aux_costs=[float(pm.costs[i, var_choice] @ rho) for i in range(1, pm.n_costs)],
        satisfaction=float(min(max(sat @ rho, 0.0), 1.0)),
        lp_variables=lp.n_vars,
        lp_constraints=lp.n_constraints,
        solve_time=elapsed,
        source="lp",
    )
    if evaluate:
        rep = evaluate_exact(res.policy)
        rep.lp_variables, rep.lp_constraints, rep.solve_time = lp.n_vars, lp.n_constraints, elapsed
        res.exact_report = rep
    return res

