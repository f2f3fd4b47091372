"""Reference implementations used only by the tests.

Each oracle is written against a different representation than the code
under test (tuple ASTs, dense matrices, plain Python graphs) so that a
shared bug is unlikely to cancel out.
"""

from __future__ import annotations

import itertools
from collections import deque

import numpy as np

AP4 = ["A", "B", "C", "D"]
ONE_HOT4 = [1, 2, 4, 8]


def all_words(letters, max_len):
    """All words up to ``max_len`` as ``{length: (N, length) int array}``."""
    out = {0: np.zeros((1, 0), dtype=np.int64)}
    letters = np.asarray(letters, dtype=np.int64)
    for n in range(1, max_len + 1):
        grids = np.meshgrid(*([letters] * n), indexing="ij")
        out[n] = np.stack([g.ravel() for g in grids], axis=1)
    return out


def dfa_accepts_batch(dfa, words: np.ndarray) -> np.ndarray:
    q = np.full(len(words), dfa.initial, dtype=np.int64)
    for j in range(words.shape[1]):
        q = dfa.table[q, words[:, j]]
    return dfa.accepting[q]


# --- regular expressions as tuples ----------------------------------------------

def regex_text(r, ap) -> str:
    tag = r[0]
    if tag == "ap":
        return ap[r[1]]
    if tag == "nap":
        return "!" + ap[r[1]]
    if tag == "any":
        return "."
    if tag == "eps":
        return "1"
    if tag == "empty":
        return "0"
    if tag == "cat":
        return "(" + regex_text(r[1], ap) + " " + regex_text(r[2], ap) + ")"
    if tag == "alt":
        return "(" + regex_text(r[1], ap) + " + " + regex_text(r[2], ap) + ")"
    if tag == "star":
        return "(" + regex_text(r[1], ap) + ")*"
    raise ValueError(tag)


def regex_matrix(r, words: np.ndarray) -> np.ndarray:
    """``M[i, j, w]``: word ``w`` restricted to positions ``i..j-1`` is in L(r)."""
    N, L = words.shape
    eye = np.zeros((L + 1, L + 1, N), dtype=bool)
    for i in range(L + 1):
        eye[i, i] = True

    def cat(A, B):
        return np.einsum("ijn,jkn->ikn", A.astype(np.int16), B.astype(np.int16)) > 0

    def guard(pred):
        M = np.zeros_like(eye)
        for i in range(L):
            M[i, i + 1] = pred(words[:, i])
        return M

    tag = r[0]
    if tag == "ap":
        return guard(lambda c: (c >> r[1]) & 1 == 1)
    if tag == "nap":
        return guard(lambda c: (c >> r[1]) & 1 == 0)
    if tag == "any":
        return guard(lambda c: np.ones(len(c), dtype=bool))
    if tag == "eps":
        return eye
    if tag == "empty":
        return np.zeros_like(eye)
    if tag == "cat":
        return cat(regex_matrix(r[1], words), regex_matrix(r[2], words))
    if tag == "alt":
        return regex_matrix(r[1], words) | regex_matrix(r[2], words)
    if tag == "star":
        A = regex_matrix(r[1], words)
        C = eye
        while True:
            nxt = eye | cat(A, C)
            if np.array_equal(nxt, C):
                return C
            C = nxt
    raise ValueError(tag)


def regex_accepts(r, words: np.ndarray, prefix: bool = False) -> np.ndarray:
    M = regex_matrix(r, words)
    L = words.shape[1]
    return M[0].any(axis=0) if prefix else M[0, L]


# --- co-safe LTL as tuples ---------------------------------------------------------

def ltl_text(f, ap) -> str:
    tag = f[0]
    if tag in ("true", "false"):
        return tag
    if tag == "ap":
        return ap[f[1]]
    if tag == "nap":
        return "!" + ap[f[1]]
    if tag == "and":
        return "(" + ltl_text(f[1], ap) + " & " + ltl_text(f[2], ap) + ")"
    if tag == "or":
        return "(" + ltl_text(f[1], ap) + " | " + ltl_text(f[2], ap) + ")"
    if tag == "X":
        return "X (" + ltl_text(f[1], ap) + ")"
    if tag == "F":
        return "F (" + ltl_text(f[1], ap) + ")"
    if tag == "U":
        return "(" + ltl_text(f[1], ap) + " U " + ltl_text(f[2], ap) + ")"
    raise ValueError(tag)


def good_prefix(f, words: np.ndarray) -> np.ndarray:
    """Whether each word is an informative good prefix of ``f``.

    Positions at or beyond the end of the word satisfy no atom, so only
    obligations discharged inside the word count.
    """
    N, L = words.shape
    memo: dict = {}

    def ev(g, i):
        i = min(i, L)
        key = (id(g), i)
        if key in memo:
            return memo[key]
        tag = g[0]
        if tag == "true":
            v = np.ones(N, dtype=bool)
        elif tag == "false":
            v = np.zeros(N, dtype=bool)
        elif tag in ("ap", "nap"):
            if i >= L:
                v = np.zeros(N, dtype=bool)
            else:
                bit = (words[:, i] >> g[1]) & 1 == 1
                v = bit if tag == "ap" else ~bit
        elif tag == "and":
            v = ev(g[1], i) & ev(g[2], i)
        elif tag == "or":
            v = ev(g[1], i) | ev(g[2], i)
        elif tag == "X":
            v = ev(g[1], i + 1)
        elif tag == "F":
            v = np.zeros(N, dtype=bool)
            for j in range(i, L + 1):
                v = v | ev(g[1], j)
        elif tag == "U":
            v = np.zeros(N, dtype=bool)
            hold = np.ones(N, dtype=bool)
            for j in range(i, L + 1):
                v = v | (hold & ev(g[2], j))
                hold = hold & ev(g[1], j)
        else:
            raise ValueError(tag)
        memo[key] = v
        return v

    return ev(f, 0)


# --- linear programs -------------------------------------------------------------------

def vertex_enumeration(c, A_eq, b_eq, A_ub, b_ub, tol=1e-9):
    """Optimum over all basic feasible solutions of ``min c.x`` with ``x >= 0``.

    Returns ``None`` when no vertex is feasible. Only meant for LPs whose
    optimum is attained at a vertex (bounded, nonempty).
    """
    c = np.asarray(c, float)
    n = len(c)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, float).reshape(-1, n)
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float)
    # every constraint as a row; a vertex makes n linearly independent rows tight
    rows = np.vstack([A_eq, A_ub, -np.eye(n)])
    rhs = np.concatenate([b_eq, b_ub, np.zeros(n)])
    me = len(b_eq)
    best = None
    for active in itertools.combinations(range(len(rows)), n):
        if not set(range(me)) <= set(active):
            continue
        M = rows[list(active)]
        if np.linalg.matrix_rank(M) < n:
            continue
        x = np.linalg.solve(M, rhs[list(active)])
        if np.any(x < -tol) or np.any(np.abs(A_eq @ x - b_eq) > 1e-7) or np.any(A_ub @ x - b_ub > 1e-7):
            continue
        val = float(c @ x)
        if best is None or val < best:
            best = val
    return best


# --- graphs --------------------------------------------------------------------------

def successors_py(model) -> list[set[int]]:
    succ = [set() for _ in range(model.n_states)]
    for s in range(model.n_states):
        for k in model.choices(s):
            for t, p in model.successors(k):
                if p > 0:
                    succ[s].add(t)
    return succ


def bfs(adj: list[set[int]], sources) -> set[int]:
    seen = set(sources)
    todo = deque(seen)
    while todo:
        x = todo.popleft()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                todo.append(y)
    return seen


def reverse(adj: list[set[int]]) -> list[set[int]]:
    rev = [set() for _ in adj]
    for x, ys in enumerate(adj):
        for y in ys:
            rev[y].add(x)
    return rev


def keep_oracle(prod, mode: str) -> set[int]:
    """States kept by one pruning pass, by explicit BFS on Python sets."""
    pm = prod.model
    adj = successors_py(pm)
    if pm.sink is not None:
        adj = [set() if x == pm.sink else ys - {pm.sink} for x, ys in enumerate(adj)]
    init = [x for x in range(pm.n_states) if pm.beta[x] > 0]
    goal = [x for x in range(pm.n_states) if prod.goal[x]]
    c1 = bfs(adj, init)
    c2 = bfs(reverse(adj), goal)
    keep = c1 & c2
    if mode == "full":
        acc = [x for x in range(pm.n_states) if pm.accepting[x]]
        keep &= bfs(adj, acc) | bfs(reverse(adj), acc)
    if pm.sink is not None:
        keep.add(pm.sink)
    return keep


# --- random models -----------------------------------------------------------------------

def random_model(rng, n_states=6, n_actions=2, n_ap=2, n_costs=2, n_absorbing=2,
                 exit_min=0.05, max_succ=3, label_prob=0.4):
    """A random model that absorbs under every policy.

    Every action of a transient state moves to an absorbing state with
    probability at least ``exit_min``.
    """
    from lcmdp.model import STAY, from_rows

    n_absorbing = max(1, min(n_absorbing, n_states - 1))
    absorbing = [False] * (n_states - n_absorbing) + [True] * n_absorbing
    transient = [s for s in range(n_states) if not absorbing[s]]
    absorbing_ids = [s for s in range(n_states) if absorbing[s]]
    transitions, costs = [], [[] for _ in range(n_costs)]
    for s in range(n_states):
        if absorbing[s]:
            transitions.append((s, STAY, [(s, 1.0)]))
            for c in costs:
                c.append(0.0)
            continue
        na = int(rng.integers(1, n_actions + 1))
        for a in range(na):
            exit_p = float(rng.uniform(exit_min, 1.0))
            k = int(rng.integers(1, max_succ + 1))
            targets = rng.choice(n_states, size=min(k, n_states), replace=False)
            w = rng.uniform(0.1, 1.0, size=len(targets))
            w = w / w.sum() * (1 - exit_p)
            row: dict[int, float] = {}
            row[int(rng.choice(absorbing_ids))] = exit_p
            for t, p in zip(targets, w):
                row[int(t)] = row.get(int(t), 0.0) + float(p)
            # renormalize against rounding
            tot = sum(row.values())
            transitions.append((s, a, sorted((t, p / tot) for t, p in row.items())))
            for c in costs:
                c.append(float(rng.uniform(0.0, 3.0)))
    labels = [int(sum(1 << i for i in range(n_ap) if rng.random() < label_prob)) for _ in range(n_states)]
    starts = rng.choice(transient, size=min(len(transient), int(rng.integers(1, 3))), replace=False)
    beta = {int(s): 1.0 / len(starts) for s in starts}
    return from_rows([f"p{i}" for i in range(n_ap)], labels, beta, transitions, costs, absorbing)


def random_dfa(rng, ap, n_states=4, accept_prob=0.4):
    from lcmdp.automata import Dfa

    table = rng.integers(0, n_states, size=(n_states, 1 << len(ap)))
    acc = rng.random(n_states) < accept_prob
    return Dfa(list(ap), table, 0, acc)


# --- policies ----------------------------------------------------------------------------

def deterministic_policies(prod):
    """Yield a choice-probability vector for every deterministic stationary policy."""
    pm = prod.model
    options = [list(pm.choices(x)) for x in range(pm.n_states)]
    for pick in itertools.product(*options):
        probs = np.zeros(pm.n_choices)
        probs[list(pick)] = 1.0
        yield probs


def dense_evaluate(prod, probs):
    """Expected costs and satisfaction by dense linear algebra.

    Returns ``None`` when some state reachable from the start cannot absorb.
    """
    pm = prod.model
    n = pm.n_states
    P = np.zeros((n, n))
    c = np.zeros((pm.n_costs, n))
    T = pm.trans.toarray()
    for x in range(n):
        for k in pm.choices(x):
            P[x] += probs[k] * T[k]
            c[:, x] += probs[k] * pm.costs[:, k]
    frozen = pm.absorbing.copy()
    if pm.sink is not None:
        frozen[pm.sink] = True
    tr = np.flatnonzero(~frozen)
    adj = [set(np.flatnonzero(P[x] > 0).tolist()) for x in range(n)]
    reach = bfs(adj, np.flatnonzero(pm.beta > 0).tolist())
    can_absorb = bfs(reverse(adj), np.flatnonzero(frozen).tolist())
    if any(x not in can_absorb for x in reach):
        return None
    R = [x for x in tr if x in reach]
    if not R:
        return np.zeros(pm.n_costs), 0.0
    Q = P[np.ix_(R, R)]
    sat_in = P[R] @ prod.satisfied.astype(float)
    sol = np.linalg.solve(np.eye(len(R)) - Q, np.column_stack([c[:, R].T, sat_in]))
    vals = pm.beta[R] @ sol
    return vals[:-1], float(vals[-1])
