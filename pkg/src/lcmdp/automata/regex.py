"""Regular expressions over label sets, compiled by Brzozowski derivatives.

Syntax::

    A          guard: proposition A holds in the current letter
    !A         guard: A does not hold
    [A & !B]   guard: arbitrary propositional formula (&, |, !, parentheses)
    .          any letter
    r s        concatenation (juxtaposition)
    r + s      union ("|" is accepted too)
    r*         Kleene star
    0, 1       empty language, empty word

Identifiers are read greedily; a run like ``AB`` that is not itself a
proposition is split into the longest proposition names it starts with.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .dfa import MAX_AP, AutomatonError, Dfa, minimize

DEFAULT_STATE_CAP = 10_000


class RegexSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


# --- AST ------------------------------------------------------------------------

class Regex:
    @cached_property
    def key(self) -> str:
        return repr(self)


@dataclass(frozen=True)
class Empty(Regex):
    pass


@dataclass(frozen=True)
class Epsilon(Regex):
    pass


@dataclass(frozen=True)
class Guard(Regex):
    """Single-letter regex matching letters that satisfy ``expr``.

    ``expr`` is a tuple tree: ``("ap", name)``, ``("not", e)``,
    ``("and", e1, e2)``, ``("or", e1, e2)`` or ``("true",)``.
    """
    expr: tuple

    def holds(self, letter: int, index: dict[str, int]) -> bool:
        return _eval_guard(self.expr, letter, index)


@dataclass(frozen=True)
class Concat(Regex):
    items: tuple


@dataclass(frozen=True)
class Union(Regex):
    items: tuple


@dataclass(frozen=True)
class Star(Regex):
    item: Regex


def guard(name: str) -> Guard:
    return Guard(("ap", name))


def _eval_guard(e: tuple, letter: int, index: dict[str, int]) -> bool:
    op = e[0]
    if op == "ap":
        return bool(letter >> index[e[1]] & 1)
    if op == "not":
        return not _eval_guard(e[1], letter, index)
    if op == "and":
        return _eval_guard(e[1], letter, index) and _eval_guard(e[2], letter, index)
    if op == "or":
        return _eval_guard(e[1], letter, index) or _eval_guard(e[2], letter, index)
    if op == "true":
        return True
    if op == "false":
        return False
    raise ValueError(f"bad guard node {e!r}")


def _guard_atoms(e: tuple) -> set[str]:
    if e[0] == "ap":
        return {e[1]}
    return set().union(*(_guard_atoms(x) for x in e[1:] if isinstance(x, tuple)))


# --- parser -------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, ap: Sequence[str]):
        self.text = text
        self.ap = list(ap)
        self.pos = 0

    def peek(self) -> str:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            found = repr(self.peek()) if self.peek() else "end of input"
            raise RegexSyntaxError(f"expected {ch!r}, found {found}", self.pos)
        self.pos += 1

    def parse(self) -> Regex:
        r = self.union()
        if self.peek():
            raise RegexSyntaxError(f"unexpected {self.peek()!r}", self.pos)
        return r

    def union(self) -> Regex:
        items = [self.concat()]
        while self.peek() in ("+", "|"):
            self.pos += 1
            items.append(self.concat())
        return items[0] if len(items) == 1 else Union(tuple(items))

    def concat(self) -> Regex:
        items = []
        while self.peek() and self.peek() not in "+|)]":
            items.extend(self.postfix())
        if not items:
            raise RegexSyntaxError("expected expression", self.pos)
        return items[0] if len(items) == 1 else Concat(tuple(items))

    def postfix(self) -> list[Regex]:
        atoms = self.atom()
        while self.peek() == "*":
            self.pos += 1
            # star binds to the last letter of a split identifier run
            atoms[-1] = Star(atoms[-1])
        return atoms

    def atom(self) -> list[Regex]:
        ch = self.peek()
        start = self.pos
        if ch == "(":
            self.pos += 1
            r = self.union()
            self.expect(")")
            return [r]
        if ch == "[":
            self.pos += 1
            e = self.guard_or()
            self.expect("]")
            return [Guard(e)]
        if ch == ".":
            self.pos += 1
            return [Guard(("true",))]
        if ch == "0":
            self.pos += 1
            return [Empty()]
        if ch == "1":
            self.pos += 1
            return [Epsilon()]
        if ch == "!":
            self.pos += 1
            names = self.identifiers()
            return [Guard(("not", ("ap", names[0])))] + [guard(n) for n in names[1:]]
        if ch.isalpha() or ch == "_":
            return [guard(n) for n in self.identifiers()]
        raise RegexSyntaxError(f"unexpected {ch!r}" if ch else "unexpected end of input", start)

    def word(self) -> tuple[str, int]:
        self.peek()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        if start == self.pos:
            raise RegexSyntaxError("expected identifier", start)
        return self.text[start:self.pos], start

    def identifiers(self) -> list[str]:
        word, start = self.word()
        if word in self.ap:
            return [word]
        out, i = [], 0
        while i < len(word):
            match = max((p for p in self.ap if word.startswith(p, i)), key=len, default=None)
            if match is None:
                raise RegexSyntaxError(f"unknown identifier {word!r}", start)
            out.append(match)
            i += len(match)
        return out

    # propositional guards inside [...]
    def guard_or(self) -> tuple:
        e = self.guard_and()
        while self.peek() == "|":
            self.pos += 1
            e = ("or", e, self.guard_and())
        return e

    def guard_and(self) -> tuple:
        e = self.guard_not()
        while self.peek() == "&":
            self.pos += 1
            e = ("and", e, self.guard_not())
        return e

    def guard_not(self) -> tuple:
        ch = self.peek()
        if ch == "!":
            self.pos += 1
            return ("not", self.guard_not())
        if ch == "(":
            self.pos += 1
            e = self.guard_or()
            self.expect(")")
            return e
        word, start = self.word()
        if word == "true":
            return ("true",)
        if word == "false":
            return ("false",)
        if word not in self.ap:
            raise RegexSyntaxError(f"unknown identifier {word!r}", start)
        return ("ap", word)


def parse_regex(text: str, ap: Sequence[str]) -> Regex:
    return _Parser(text, ap).parse()


# --- derivatives ----------------------------------------------------------------

def union(items) -> Regex:
    flat: dict[str, Regex] = {}
    for r in items:
        for x in (r.items if isinstance(r, Union) else (r,)):
            if not isinstance(x, Empty):
                flat.setdefault(x.key, x)
    if not flat:
        return Empty()
    if len(flat) == 1:
        return next(iter(flat.values()))
    return Union(tuple(flat[k] for k in sorted(flat)))


def concat(items) -> Regex:
    flat = []
    for r in items:
        for x in (r.items if isinstance(r, Concat) else (r,)):
            if isinstance(x, Empty):
                return Empty()
            if not isinstance(x, Epsilon):
                flat.append(x)
    if not flat:
        return Epsilon()
    return flat[0] if len(flat) == 1 else Concat(tuple(flat))


def star(r: Regex) -> Regex:
    if isinstance(r, (Empty, Epsilon)):
        return Epsilon()
    if isinstance(r, Star):
        return r
    return Star(r)


def normalize(r: Regex) -> Regex:
    if isinstance(r, Union):
        return union(normalize(x) for x in r.items)
    if isinstance(r, Concat):
        return concat(normalize(x) for x in r.items)
    if isinstance(r, Star):
        return star(normalize(r.item))
    return r


def nullable(r: Regex) -> bool:
    if isinstance(r, (Epsilon, Star)):
        return True
    if isinstance(r, Concat):
        return all(nullable(x) for x in r.items)
    if isinstance(r, Union):
        return any(nullable(x) for x in r.items)
    return False


def derivative(r: Regex, hit: dict[Guard, bool]) -> Regex:
    """Brzozowski derivative; ``hit[g]`` tells whether the letter satisfies guard ``g``."""
    if isinstance(r, Guard):
        return Epsilon() if hit[r] else Empty()
    if isinstance(r, Union):
        return union(derivative(x, hit) for x in r.items)
    if isinstance(r, Concat):
        head, rest = r.items[0], concat(r.items[1:])
        d = concat((derivative(head, hit), rest))
        return union((d, derivative(rest, hit))) if nullable(head) else d
    if isinstance(r, Star):
        return concat((derivative(r.item, hit), r))
    return Empty()


def guards(r: Regex) -> list[Guard]:
    found: dict[Guard, None] = {}

    def walk(x):
        if isinstance(x, Guard):
            found[x] = None
        elif isinstance(x, (Union, Concat)):
            for y in x.items:
                walk(y)
        elif isinstance(x, Star):
            walk(x.item)

    walk(r)
    return list(found)


def regex_to_dfa(r: Regex, ap: Sequence[str], state_cap: int = DEFAULT_STATE_CAP,
                 minimal: bool = True) -> Dfa:
    """Compile a regex to a complete DFA over ``2**len(ap)`` letters."""
    ap = list(ap)
    if len(ap) > MAX_AP:
        raise AutomatonError(f"at most {MAX_AP} propositions supported")
    index = {p: i for i, p in enumerate(ap)}
    gs = guards(r)
    for g in gs:
        unknown = _guard_atoms(g.expr) - set(index)
        if unknown:
            raise AutomatonError(f"guard references unknown propositions {sorted(unknown)}")
    n_letters = 1 << len(ap)
    # letters with identical guard truth vectors share every derivative
    vectors = [tuple(g.holds(x, index) for g in gs) for x in range(n_letters)]
    classes: dict[tuple, int] = {}
    letter_class = np.array([classes.setdefault(v, len(classes)) for v in vectors], dtype=np.int64)
    class_hits = [dict(zip(gs, v)) for v in classes]

    start = normalize(r)
    ids = {start.key: 0}
    states = [start]
    rows = []
    i = 0
    while i < len(states):
        row = []
        for hit in class_hits:
            d = derivative(states[i], hit)
            j = ids.get(d.key)
            if j is None:
                if len(states) >= state_cap:
                    raise AutomatonError(f"regex DFA exceeds state cap {state_cap}")
                j = ids[d.key] = len(states)
                states.append(d)
            row.append(j)
        rows.append(row)
        i += 1
    table = np.array(rows, dtype=np.int64).reshape(len(states), len(classes))[:, letter_class]
    dfa = Dfa(ap, table, 0, np.array([nullable(s) for s in states]))
    return minimize(dfa) if minimal else dfa
