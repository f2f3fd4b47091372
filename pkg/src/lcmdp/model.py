"""Labeled constrained MDPs: data model, validation and JSON serialization.

A model is stored in "choice" form. Every enabled (state, action) pair is a
row ("choice") of a sparse transition matrix, and choices of state ``s``
occupy the contiguous block ``choice_ptr[s]:choice_ptr[s + 1]``. Cost
functions are arrays over choices, so ``costs[i, k]`` is ``C_i`` evaluated at
choice ``k``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

MAX_AP = 16
ROW_TOL = 1e-9

STAY = 4
"""Action id conventionally used for the self-loop of absorbing states."""


class ModelError(ValueError):
    """Raised when a model file cannot be parsed or fails validation."""


@dataclass(eq=False)
class Lcmdp:
    """A finite labeled constrained MDP.

    ``costs`` has shape ``(n_costs, n_choices)``; row 0 is the objective cost.
    ``labels`` holds one bitmask per state over the indices of ``ap``.
    """

    ap: list[str]
    labels: np.ndarray
    beta: np.ndarray
    choice_ptr: np.ndarray
    choice_action: np.ndarray
    trans: sp.csr_matrix
    costs: np.ndarray
    absorbing: np.ndarray
    accepting: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    sink: int | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.beta = np.asarray(self.beta, dtype=float)
        self.choice_ptr = np.asarray(self.choice_ptr, dtype=np.int64)
        self.choice_action = np.asarray(self.choice_action, dtype=np.int64)
        self.trans = sp.csr_matrix(self.trans, dtype=float)
        self.trans.sort_indices()
        self.costs = np.atleast_2d(np.asarray(self.costs, dtype=float))
        self.absorbing = np.asarray(self.absorbing, dtype=bool)
        if self.accepting.size == 0:
            self.accepting = np.zeros(self.n_states, dtype=bool)
        self.accepting = np.asarray(self.accepting, dtype=bool)

    @property
    def n_states(self) -> int:
        return len(self.choice_ptr) - 1

    @property
    def n_choices(self) -> int:
        return int(self.choice_ptr[-1])

    @property
    def n_costs(self) -> int:
        return self.costs.shape[0]

    @property
    def choice_state(self) -> np.ndarray:
        """State owning each choice."""
        return np.repeat(np.arange(self.n_states), np.diff(self.choice_ptr))

    def choices(self, s: int) -> range:
        return range(int(self.choice_ptr[s]), int(self.choice_ptr[s + 1]))

    def actions(self, s: int) -> list[int]:
        return [int(a) for a in self.choice_action[self.choice_ptr[s]:self.choice_ptr[s + 1]]]

    def successors(self, k: int) -> list[tuple[int, float]]:
        lo, hi = self.trans.indptr[k], self.trans.indptr[k + 1]
        return list(zip(self.trans.indices[lo:hi].tolist(), self.trans.data[lo:hi].tolist()))

    def label_names(self, s: int) -> list[str]:
        mask = int(self.labels[s])
        return [p for i, p in enumerate(self.ap) if mask >> i & 1]

    def __eq__(self, other):
        if not isinstance(other, Lcmdp):
            return NotImplemented
        a, b = self.trans, other.trans
        return (
            self.ap == other.ap
            and self.sink == other.sink
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.beta, other.beta)
            and np.array_equal(self.choice_ptr, other.choice_ptr)
            and np.array_equal(self.choice_action, other.choice_action)
            and np.array_equal(self.costs, other.costs)
            and np.array_equal(self.absorbing, other.absorbing)
            and np.array_equal(self.accepting, other.accepting)
            and a.shape == b.shape
            and np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
        )


def from_rows(
    ap: Sequence[str],
    labels: Sequence[int],
    beta: dict[int, float] | Sequence[float],
    transitions: Iterable[tuple[int, int, Sequence[tuple[int, float]]]],
    costs: Sequence[Sequence[float]],
    absorbing: Sequence[bool],
    accepting: Iterable[int] = (),
    sink: int | None = None,
) -> Lcmdp:
    """Build a model from ``(s, a, [(s', p), ...])`` triples.

    Triples must be grouped by state in ascending order; ``costs[i]`` lists
    ``C_i`` in the same order as ``transitions``.
    """
    n = len(labels)
    counts = np.zeros(n, dtype=np.int64)
    acts, rows, cols, vals = [], [], [], []
    last = -1
    for k, (s, a, succ) in enumerate(transitions):
        if s < last:
            raise ModelError(f"transitions not grouped by state at entry {k} (s={s})")
        last = s
        counts[s] += 1
        acts.append(a)
        for t, p in succ:
            rows.append(k)
            cols.append(t)
            vals.append(p)
    m = len(acts)
    trans = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
    if isinstance(beta, dict):
        b = np.zeros(n)
        for s, p in beta.items():
            b[int(s)] = p
    else:
        b = np.asarray(beta, dtype=float)
    acc = np.zeros(n, dtype=bool)
    acc[list(accepting)] = True
    cost_arr = np.asarray(costs, dtype=float).reshape(-1, m) if m else np.zeros((max(len(costs), 1), 0))
    return Lcmdp(
        ap=list(ap),
        labels=np.asarray(labels, dtype=np.int64),
        beta=b,
        choice_ptr=np.concatenate([[0], np.cumsum(counts)]),
        choice_action=np.asarray(acts, dtype=np.int64),
        trans=trans,
        costs=cost_arr,
        absorbing=np.asarray(absorbing, dtype=bool),
        accepting=acc,
        sink=sink,
    )


def validate(model: Lcmdp) -> list[str]:
    """Return every invariant violation as a human-readable string."""
    out: list[str] = []
    n, m = model.n_states, model.n_choices
    if len(model.ap) > MAX_AP:
        out.append(f"ap has {len(model.ap)} propositions (max {MAX_AP})")
    if len(set(model.ap)) != len(model.ap):
        out.append("ap contains duplicate names")
    for name, arr in (("labels", model.labels), ("beta", model.beta),
                      ("absorbing", model.absorbing), ("accepting", model.accepting)):
        if len(arr) != n:
            out.append(f"{name} has length {len(arr)}, expected {n}")
    if model.trans.shape != (m, n):
        out.append(f"transition matrix has shape {model.trans.shape}, expected {(m, n)}")
    if model.costs.shape[1] != m:
        out.append(f"costs have {model.costs.shape[1]} columns, expected {m}")
    if out:
        return out

    if np.any(model.labels >> len(model.ap)):
        bad = np.flatnonzero(model.labels >> len(model.ap))
        out.append(f"labels of states {bad.tolist()} reference unknown propositions")

    total = model.beta.sum()
    if abs(total - 1.0) > ROW_TOL:
        out.append(f"beta sums to {total:.12g}")
    if np.any(model.beta < 0):
        out.append(f"beta negative at states {np.flatnonzero(model.beta < 0).tolist()}")

    sink = model.sink
    if sink is not None:
        if not 0 <= sink < n:
            out.append(f"sink {sink} out of range")
            sink = None
        elif not model.absorbing[sink]:
            out.append(f"sink {sink} is not absorbing")
    frozen = model.absorbing.copy()
    if sink is not None:
        frozen[sink] = True
    if np.any(model.beta[frozen] != 0):
        out.append(f"beta is nonzero on absorbing/sink states {np.flatnonzero(frozen & (model.beta != 0)).tolist()}")

    trans = model.trans
    if trans.nnz and np.any(trans.data < 0):
        out.append("negative transition probabilities present")
    sums = np.asarray(trans.sum(axis=1)).ravel()
    cstate = model.choice_state
    for k in np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL):
        s = int(cstate[k])
        out.append(f"row (s={s},a={int(model.choice_action[k])}) sums to {sums[k]:.12g}")

    neg = np.argwhere(model.costs < 0)
    for i, k in neg:
        out.append(f"cost C_{i} negative at (s={int(cstate[k])},a={int(model.choice_action[k])})")

    nact = np.diff(model.choice_ptr)
    for s in np.flatnonzero(nact < 1):
        out.append(f"state {s} has no enabled action")
    for s in np.flatnonzero(model.absorbing):
        ks = model.choices(s)
        if len(ks) != 1:
            out.append(f"absorbing state {s} has {len(ks)} actions, expected 1")
            continue
        k = ks[0]
        if model.successors(k) != [(int(s), 1.0)]:
            out.append(f"absorbing state {s} does not self-loop with probability 1")
        if np.any(model.costs[:, k] != 0):
            out.append(f"absorbing state {s} has nonzero cost")
    for s in range(n):
        acts = model.actions(s)
        if len(set(acts)) != len(acts):
            out.append(f"state {s} lists duplicate actions {acts}")
    return out


def check(model: Lcmdp) -> Lcmdp:
    problems = validate(model)
    if problems:
        raise ModelError("invalid model: " + "; ".join(problems[:10]))
    return model


def transient_states(model: Lcmdp) -> set[int]:
    frozen = model.absorbing.copy()
    if model.sink is not None:
        frozen[model.sink] = True
    return set(np.flatnonzero(~frozen).tolist())


# --- serialization -----------------------------------------------------------

def to_dict(model: Lcmdp) -> dict:
    states = [
        {"labels": model.label_names(s), "absorbing": bool(model.absorbing[s])}
        for s in range(model.n_states)
    ]
    cstate = model.choice_state
    transitions = [
        {"s": int(cstate[k]), "a": int(model.choice_action[k]),
         "rows": [[t, p] for t, p in model.successors(k)]}
        for k in range(model.n_choices)
    ]
    return {
        "ap": list(model.ap),
        "states": states,
        "beta": {str(s): float(model.beta[s]) for s in np.flatnonzero(model.beta)},
        "transitions": transitions,
        "costs": model.costs.tolist(),
        "sink": model.sink,
        "accepting": np.flatnonzero(model.accepting).tolist(),
    }


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ModelError(f"{where}: missing field '{key}'")
    return d[key]


def from_dict(d: dict) -> Lcmdp:
    ap = list(_require(d, "ap", "model"))
    index = {p: i for i, p in enumerate(ap)}
    labels, absorbing = [], []
    for s, st in enumerate(_require(d, "states", "model")):
        mask = 0
        for p in _require(st, "labels", f"states[{s}]"):
            if p not in index:
                raise ModelError(f"states[{s}].labels: unknown proposition '{p}'")
            mask |= 1 << index[p]
        labels.append(mask)
        absorbing.append(bool(st.get("absorbing", False)))
    trans = []
    for k, row in enumerate(_require(d, "transitions", "model")):
        try:
            trans.append((int(row["s"]), int(row["a"]), [(int(t), float(p)) for t, p in row["rows"]]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"transitions[{k}]: malformed entry ({exc})") from None
    try:
        beta = {int(s): float(p) for s, p in _require(d, "beta", "model").items()}
    except (AttributeError, ValueError) as exc:
        raise ModelError(f"beta: malformed ({exc})") from None
    costs = _require(d, "costs", "model")
    for i, c in enumerate(costs):
        if len(c) != len(trans):
            raise ModelError(f"costs[{i}]: {len(c)} entries, expected {len(trans)}")
    model = from_rows(ap, labels, beta, trans, costs, absorbing,
                      accepting=d.get("accepting", []), sink=d.get("sink"))
    return check(model)


def dumps(model: Lcmdp) -> str:
    return json.dumps(to_dict(model))


def loads(text: str) -> Lcmdp:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return from_dict(d)


def save(model: Lcmdp, path) -> None:
    Path(path).write_text(dumps(model))


def load(path) -> Lcmdp:
    return loads(Path(path).read_text())
