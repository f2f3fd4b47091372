"""Product of a labeled CMDP with a specification DFA."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order

from . import model as mdl
from .automata import Dfa, dfa_from_dict, dfa_to_dict
from .model import STAY, Lcmdp, ModelError


@dataclass(eq=False)
class ProductLcmdp:
    """Product model with provenance.

    ``mdp_state[x], dfa_state[x]`` give the pair a product state stands for;
    a sink created by pruning has provenance ``(-1, -1)``. ``goal`` marks
    product states whose model component is absorbing (and not the model's
    sink); ``model.accepting`` marks states whose DFA component accepts.
    """

    model: Lcmdp
    dfa: Dfa
    mdp_state: np.ndarray
    dfa_state: np.ndarray
    goal: np.ndarray
    n_mdp_states: int

    @property
    def n_states(self) -> int:
        return self.model.n_states

    @property
    def satisfied(self) -> np.ndarray:
        """Absorbing states that count as satisfying the specification."""
        return self.goal & self.model.accepting

    def index(self, s: int, q: int) -> int:
        """Product id of ``(s, q)`` or -1 when that pair is not present."""
        hit = np.flatnonzero((self.mdp_state == s) & (self.dfa_state == q))
        return int(hit[0]) if len(hit) else -1

    def provenance(self, x: int) -> tuple[int, int]:
        return int(self.mdp_state[x]), int(self.dfa_state[x])


def build_product(model: Lcmdp, dfa: Dfa, restrict_reachable: bool = False) -> ProductLcmdp:
    """Synchronous product; the DFA reads the label of every state entered,
    including the initial one.

    Absorbing model states freeze the DFA component, so ``(s, q)`` with ``s``
    absorbing is itself absorbing and records the automaton state reached
    on absorption.
    """
    if list(model.ap) != list(dfa.ap):
        raise ModelError(f"proposition mismatch: model {model.ap} vs automaton {dfa.ap}")
    nd, nl, m = dfa.n_states, model.n_states, model.n_choices
    table = dfa.table
    cs = model.choice_state

    kk = np.tile(np.arange(m), nd)
    qq = np.repeat(np.arange(nd), m)
    order = np.lexsort((kk, qq, cs[kk]))
    pk, pq = kk[order], qq[order]
    px = cs[pk] * nd + pq

    T = model.trans
    lengths = np.diff(T.indptr)[pk]
    rows = np.repeat(np.arange(len(pk)), lengths)
    starts = np.repeat(T.indptr[pk], lengths)
    offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    pos = starts + offsets
    succ = T.indices[pos]
    cols = succ * nd + table[pq[rows], model.labels[succ]]
    frozen = model.absorbing[cs[pk]]
    cols = np.where(frozen[rows], px[rows], cols)
    trans = sp.csr_matrix((T.data[pos], (rows, cols)), shape=(len(pk), nl * nd))

    counts = np.bincount(px, minlength=nl * nd)
    beta = np.zeros(nl * nd)
    init = np.arange(nl) * nd + table[dfa.initial, model.labels]
    np.add.at(beta, init, model.beta)

    s_of = np.repeat(np.arange(nl), nd)
    q_of = np.tile(np.arange(nd), nl)
    goal = model.absorbing[s_of].copy()
    if model.sink is not None:
        goal &= s_of != model.sink
    prod_model = Lcmdp(
        ap=list(model.ap),
        labels=model.labels[s_of],
        beta=beta,
        choice_ptr=np.concatenate([[0], np.cumsum(counts)]),
        choice_action=model.choice_action[pk],
        trans=trans,
        costs=model.costs[:, pk],
        absorbing=model.absorbing[s_of],
        accepting=dfa.accepting[q_of],
        sink=None,
    )
    prod = ProductLcmdp(prod_model, dfa, s_of, q_of, goal, nl)
    if restrict_reachable:
        keep = forward_reachable(prod_model, np.flatnonzero(beta > 0))
        prod, _ = restrict(prod, keep)
    return prod


def state_graph(model: Lcmdp) -> sp.csr_matrix:
    """Boolean adjacency over states: ``x -> y`` if some action moves x to y."""
    T = model.trans.tocoo()
    pos = T.data > 0
    rows = model.choice_state[T.row[pos]]
    g = sp.csr_matrix((np.ones(pos.sum()), (rows, T.col[pos])),
                      shape=(model.n_states, model.n_states))
    g.data[:] = 1.0
    return g


def _reach(g: sp.csr_matrix, sources: np.ndarray) -> np.ndarray:
    n = g.shape[0]
    seen = np.zeros(n, dtype=bool)
    if len(sources) == 0:
        return seen
    # a virtual root pointing at every source
    root = sp.csr_matrix((np.ones(len(sources)), (np.full(len(sources), n), sources)), shape=(n + 1, n + 1))
    big = sp.bmat([[g, None], [None, sp.csr_matrix((1, 1))]], format="csr") + root
    order = breadth_first_order(big, n, directed=True, return_predecessors=False)
    seen[order[order < n]] = True
    return seen


def forward_reachable(model: Lcmdp, sources, graph: sp.csr_matrix | None = None) -> np.ndarray:
    g = state_graph(model) if graph is None else graph
    return _reach(g, np.asarray(sources, dtype=np.int64))


def backward_reachable(model: Lcmdp, targets, graph: sp.csr_matrix | None = None) -> np.ndarray:
    g = state_graph(model) if graph is None else graph
    return _reach(g.T.tocsr(), np.asarray(targets, dtype=np.int64))


def restrict(prod: ProductLcmdp, keep: np.ndarray) -> tuple[ProductLcmdp, int]:
    """Keep the states in ``keep``; mass flowing to dropped states goes to a sink.

    The sink (the model's sink if it has one, else a new zero-cost absorbing
    state) is always kept. Returns the new product and the number of
    redirected transition entries.
    """
    pm = prod.model
    keep = np.asarray(keep, dtype=bool).copy()
    if pm.sink is not None:
        keep[pm.sink] = True
    kept = np.flatnonzero(keep)
    newid = -np.ones(pm.n_states, dtype=np.int64)
    newid[kept] = np.arange(len(kept))

    counts = np.diff(pm.choice_ptr)
    ch_keep = np.repeat(keep, counts)
    T = pm.trans[ch_keep].tocoo()
    pos = T.data > 0
    rows, cols, data = T.row[pos], T.col[pos], T.data[pos]
    lost = ~keep[cols]
    n_redirected = int(lost.sum())

    sink = None if pm.sink is None else int(newid[pm.sink])
    n_new = len(kept)
    if n_redirected and sink is None:
        sink = n_new
        n_new += 1
    cols = np.where(lost, sink if sink is not None else 0, newid[cols])
    n_choices = int(ch_keep.sum())
    extra = n_new - len(kept)
    if extra:
        rows = np.concatenate([rows, [n_choices]])
        cols = np.concatenate([cols, [sink]])
        data = np.concatenate([data, [1.0]])
    trans = sp.csr_matrix((data, (rows, cols)), shape=(n_choices + extra, n_new))

    def ext(arr, fill):
        arr = arr[kept]
        return np.concatenate([arr, np.full(extra, fill, dtype=arr.dtype)]) if extra else arr

    new_counts = np.concatenate([counts[kept], np.ones(extra, dtype=np.int64)])
    costs = pm.costs[:, ch_keep]
    if extra:
        costs = np.concatenate([costs, np.zeros((pm.n_costs, 1))], axis=1)
    new_model = Lcmdp(
        ap=list(pm.ap),
        labels=ext(pm.labels, 0),
        beta=ext(pm.beta, 0.0),
        choice_ptr=np.concatenate([[0], np.cumsum(new_counts)]),
        choice_action=np.concatenate([pm.choice_action[ch_keep], np.full(extra, STAY)]),
        trans=trans,
        costs=costs,
        absorbing=ext(pm.absorbing, True),
        accepting=ext(pm.accepting, False),
        sink=sink,
    )
    new = ProductLcmdp(new_model, prod.dfa, ext(prod.mdp_state, -1), ext(prod.dfa_state, -1),
                       ext(prod.goal, False), prod.n_mdp_states)
    return new, n_redirected


# --- serialization ----------------------------------------------------------

def product_to_dict(prod: ProductLcmdp) -> dict:
    d = mdl.to_dict(prod.model)
    d["provenance"] = np.stack([prod.mdp_state, prod.dfa_state], axis=1).tolist()
    d["goal"] = np.flatnonzero(prod.goal).tolist()
    d["n_mdp_states"] = prod.n_mdp_states
    d["dfa"] = dfa_to_dict(prod.dfa)
    return d


def product_from_dict(d: dict) -> ProductLcmdp:
    m = mdl.from_dict(d)
    prov = np.asarray(d["provenance"], dtype=np.int64).reshape(-1, 2)
    goal = np.zeros(m.n_states, dtype=bool)
    goal[d["goal"]] = True
    return ProductLcmdp(m, dfa_from_dict(d["dfa"]), prov[:, 0], prov[:, 1], goal, int(d["n_mdp_states"]))


def save_product(prod: ProductLcmdp, path) -> None:
    Path(path).write_text(json.dumps(product_to_dict(prod)))


def load_product(path) -> ProductLcmdp:
    return product_from_dict(json.loads(Path(path).read_text()))
