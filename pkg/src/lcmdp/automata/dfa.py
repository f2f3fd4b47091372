"""Complete DFAs over the alphabet 2^AP, minimization and DOT export.

Letters are integers ``0 .. 2**len(ap) - 1``; bit ``i`` of a letter is set
when proposition ``ap[i]`` holds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_AP = 16


class AutomatonError(ValueError):
    pass


@dataclass(eq=False)
class Dfa:
    ap: list[str]
    table: np.ndarray
    initial: int
    accepting: np.ndarray
    dead: int | None = None

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.int64)
        self.accepting = np.asarray(self.accepting, dtype=bool)
        if len(self.ap) > MAX_AP:
            raise AutomatonError(f"at most {MAX_AP} propositions supported, got {len(self.ap)}")
        n, k = self.table.shape
        if k != 1 << len(self.ap):
            raise AutomatonError(f"table has {k} letters, expected {1 << len(self.ap)}")
        if self.table.size and (self.table.min() < 0 or self.table.max() >= n):
            raise AutomatonError("transition table references unknown states")
        if self.dead is None:
            self.dead = find_dead(self.table, self.accepting)

    @property
    def n_states(self) -> int:
        return self.table.shape[0]

    @property
    def n_letters(self) -> int:
        return self.table.shape[1]

    def step(self, q: int, letter: int) -> int:
        return int(self.table[q, letter])

    def run(self, word: Iterable[int], q: int | None = None) -> int:
        q = self.initial if q is None else q
        for letter in word:
            q = self.table[q, letter]
        return int(q)

    def accepts(self, word: Iterable[int]) -> bool:
        return bool(self.accepting[self.run(word)])

    def letter(self, props: Iterable[str]) -> int:
        index = {p: i for i, p in enumerate(self.ap)}
        out = 0
        for p in props:
            out |= 1 << index[p]
        return out

    def same_table(self, other: Dfa) -> bool:
        return (self.ap == other.ap and self.initial == other.initial
                and np.array_equal(self.table, other.table)
                and np.array_equal(self.accepting, other.accepting))


def find_dead(table: np.ndarray, accepting: np.ndarray) -> int | None:
    """Return a non-accepting state looping to itself on every letter."""
    for q in range(table.shape[0]):
        if not accepting[q] and np.all(table[q] == q):
            return q
    return None


def reachable(dfa: Dfa) -> np.ndarray:
    seen = np.zeros(dfa.n_states, dtype=bool)
    seen[dfa.initial] = True
    stack = [dfa.initial]
    while stack:
        q = stack.pop()
        for t in np.unique(dfa.table[q]):
            if not seen[t]:
                seen[t] = True
                stack.append(int(t))
    return seen


def minimize(dfa: Dfa) -> Dfa:
    """Drop unreachable states, then merge equivalent ones by partition refinement.

    States are renumbered in breadth-first order from the initial state, so
    equal languages give identical tables.
    """
    keep = np.flatnonzero(reachable(dfa))
    remap = -np.ones(dfa.n_states, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    table = remap[dfa.table[keep]]
    acc = dfa.accepting[keep]

    # Moore refinement: split blocks by (block, successor blocks) signature.
    block = acc.astype(np.int64)
    n_blocks = len(np.unique(block))
    while True:
        sig = np.concatenate([block[:, None], block[table]], axis=1)
        _, new = np.unique(sig, axis=0, return_inverse=True)
        new = new.ravel()
        count = int(new.max()) + 1 if len(new) else 0
        block = new
        if count == n_blocks:
            break
        n_blocks = count

    _, rep = np.unique(block, return_index=True)
    qtable = block[table[rep]]
    qacc = acc[rep]
    start = int(block[remap[dfa.initial]])
    return _bfs_renumber(dfa.ap, qtable, start, qacc)


def _bfs_renumber(ap: list[str], table: np.ndarray, start: int, acc: np.ndarray) -> Dfa:
    order = [start]
    pos = {start: 0}
    i = 0
    while i < len(order):
        for t in table[order[i]].tolist():
            if t not in pos:
                pos[t] = len(order)
                order.append(t)
        i += 1
    perm = np.array([pos[q] for q in range(len(order))], dtype=np.int64)
    idx = np.array(order, dtype=np.int64)
    return Dfa(list(ap), perm[table[idx]], 0, acc[idx])


def make_accepting_absorbing(dfa: Dfa) -> Dfa:
    """Turn every accepting state into a sink, giving good-prefix semantics."""
    table = dfa.table.copy()
    for q in np.flatnonzero(dfa.accepting):
        table[q, :] = q
    return Dfa(list(dfa.ap), table, dfa.initial, dfa.accepting.copy())


# --- DOT export ---------------------------------------------------------------

def _cube_cover(letters: set[int], nbits: int) -> list[dict[int, bool]]:
    """Greedy cover of a letter set by cubes (partial assignments)."""
    remaining = set(letters)
    cubes = []
    while remaining:
        seed = min(remaining)
        fixed = {i: bool(seed >> i & 1) for i in range(nbits)}
        for i in range(nbits):
            trial = dict(fixed)
            del trial[i]
            if all(x in letters for x in _expand(trial, nbits)):
                fixed = trial
        cubes.append(fixed)
        remaining -= set(_expand(fixed, nbits))
    return cubes


def _expand(cube: dict[int, bool], nbits: int) -> list[int]:
    free = [i for i in range(nbits) if i not in cube]
    base = sum(1 << i for i, v in cube.items() if v)
    out = []
    for m in range(1 << len(free)):
        x = base
        for j, i in enumerate(free):
            if m >> j & 1:
                x |= 1 << i
        out.append(x)
    return out


def guard_text(letters: set[int], ap: Sequence[str]) -> str:
    nbits = len(ap)
    if len(letters) == 1 << nbits:
        return "true"
    terms = []
    for cube in _cube_cover(letters, nbits):
        lits = [(p if cube[i] else "!" + p) for i, p in enumerate(ap) if i in cube]
        terms.append("&".join(lits) if lits else "true")
    return " | ".join(terms)


def to_dot(dfa: Dfa, name: str = "dfa") -> str:
    lines = [f"digraph {name} {{", "  rankdir=LR;", '  init [shape=point];']
    for q in range(dfa.n_states):
        shape = "doublecircle" if dfa.accepting[q] else "circle"
        extra = ", style=dashed" if q == dfa.dead else ""
        lines.append(f'  q{q} [shape={shape}{extra}];')
    lines.append(f"  init -> q{dfa.initial};")
    for q in range(dfa.n_states):
        groups: dict[int, set[int]] = {}
        for letter, t in enumerate(dfa.table[q].tolist()):
            groups.setdefault(t, set()).add(letter)
        for t in sorted(groups):
            lines.append(f'  q{q} -> q{t} [label="{guard_text(groups[t], dfa.ap)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
