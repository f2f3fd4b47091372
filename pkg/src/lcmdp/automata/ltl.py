"""Syntactically co-safe LTL: parsing and translation to DFAs via formula progression.

Grammar (loosest binding first)::

    phi ::= phi | phi          disjunction ("||" also accepted)
          | phi & phi          conjunction ("&&" also accepted)
          | phi U phi          until, right associative
          | X phi | F phi      next, eventually
          | !p | p | true | false | ( phi )

Negation is only allowed in front of atoms. ``X``, ``F`` and ``U`` are
reserved words and cannot be used as proposition names.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .dfa import MAX_AP, AutomatonError, Dfa, minimize

DEFAULT_STATE_CAP = 10_000


class FormulaSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


class Formula:
    @cached_property
    def key(self) -> str:
        return repr(self)


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class NegAtom(Formula):
    name: str


@dataclass(frozen=True)
class And(Formula):
    items: tuple


@dataclass(frozen=True)
class Or(Formula):
    items: tuple


@dataclass(frozen=True)
class Next(Formula):
    item: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    item: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


TRUE, FALSE = TrueF(), FalseF()

_TOKEN = re.compile(r"\s*(?:(\|\||&&|[|&!()])|([A-Za-z_][A-Za-z0-9_]*))")
_KEYWORDS = {"X", "F", "U", "true", "false"}
_UNSUPPORTED = {"G", "R", "W", "M"}


def _tokenize(text: str) -> list[tuple[str, int]]:
    out, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[pos:].lstrip()[0]!r}",
                                     len(text) - len(text[pos:].lstrip()))
        tok = m.group(1) or m.group(2)
        start = m.start(1) if m.group(1) else m.start(2)
        out.append(({"||": "|", "&&": "&"}.get(tok, tok), start))
        pos = m.end()
    out.append(("", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, ap: Sequence[str]):
        self.toks = _tokenize(text)
        self.i = 0
        self.ap = set(ap)

    @property
    def tok(self) -> str:
        return self.toks[self.i][0]

    @property
    def pos(self) -> int:
        return self.toks[self.i][1]

    def take(self) -> str:
        t = self.tok
        self.i += 1
        return t

    def parse(self) -> Formula:
        f = self.disj()
        if self.tok:
            raise FormulaSyntaxError(f"unexpected {self.tok!r}", self.pos)
        return f

    def disj(self) -> Formula:
        items = [self.conj()]
        while self.tok == "|":
            self.take()
            items.append(self.conj())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def conj(self) -> Formula:
        items = [self.until()]
        while self.tok == "&":
            self.take()
            items.append(self.until())
        return items[0] if len(items) == 1 else And(tuple(items))

    def until(self) -> Formula:
        left = self.unary()
        if self.tok == "U":
            self.take()
            return Until(left, self.until())
        return left

    def unary(self) -> Formula:
        pos = self.pos
        if self.tok == "!":
            self.take()
            inner = self.unary()
            if isinstance(inner, Atom):
                return NegAtom(inner.name)
            if isinstance(inner, NegAtom):
                return Atom(inner.name)
            if isinstance(inner, TrueF):
                return FALSE
            if isinstance(inner, FalseF):
                return TRUE
            raise FormulaSyntaxError("negation of a compound formula is not co-safe", pos)
        if self.tok == "X":
            self.take()
            return Next(self.unary())
        if self.tok == "F":
            self.take()
            return Eventually(self.unary())
        return self.primary()

    def primary(self) -> Formula:
        tok, pos = self.tok, self.pos
        if tok == "(":
            self.take()
            f = self.disj()
            if self.tok != ")":
                raise FormulaSyntaxError("expected ')'", self.pos)
            self.take()
            return f
        if tok == "true":
            self.take()
            return TRUE
        if tok == "false":
            self.take()
            return FALSE
        if not tok:
            raise FormulaSyntaxError("unexpected end of input", pos)
        if tok in _UNSUPPORTED and tok not in self.ap:
            raise FormulaSyntaxError(f"operator {tok} is not co-safe", pos)
        if tok in _KEYWORDS or not (tok[0].isalpha() or tok[0] == "_"):
            raise FormulaSyntaxError(f"unexpected {tok!r}", pos)
        if tok not in self.ap:
            raise FormulaSyntaxError(f"unknown atom {tok!r}", pos)
        self.take()
        return Atom(tok)


def parse_scltl(text: str, ap: Sequence[str]) -> Formula:
    return _Parser(text, ap).parse()


# --- canonical residuals ------------------------------------------------------

def _operands(f: Formula, kind: type) -> frozenset:
    return frozenset(f.items) if isinstance(f, kind) else frozenset((f,))


def _junction(items, kind: type, unit: Formula, zero: Formula) -> Formula:
    dual = Or if kind is And else And
    flat: dict[str, Formula] = {}
    for f in items:
        for x in (f.items if isinstance(f, kind) else (f,)):
            if x == zero:
                return zero
            if x != unit:
                flat.setdefault(x.key, x)
    ops = list(flat.values())
    # absorption: x | (x & y) -> x, and dually
    if len(ops) > 1:
        sets = [_operands(x, dual) for x in ops]
        ops = [x for x, s in zip(ops, sets)
               if not any(t < s for t in sets)]
    if not ops:
        return unit
    if len(ops) == 1:
        return ops[0]
    return kind(tuple(sorted(ops, key=lambda x: x.key)))


def conj(items) -> Formula:
    return _junction(items, And, TRUE, FALSE)


def disj(items) -> Formula:
    return _junction(items, Or, FALSE, TRUE)


def normalize(f: Formula) -> Formula:
    if isinstance(f, And):
        return conj(normalize(x) for x in f.items)
    if isinstance(f, Or):
        return disj(normalize(x) for x in f.items)
    if isinstance(f, Next):
        inner = normalize(f.item)
        return inner if inner in (TRUE, FALSE) else Next(inner)
    if isinstance(f, Eventually):
        inner = normalize(f.item)
        return inner if inner in (TRUE, FALSE) else Eventually(inner)
    if isinstance(f, Until):
        left, right = normalize(f.left), normalize(f.right)
        if right in (TRUE, FALSE):
            return right
        if left == FALSE:
            return right
        return Until(left, right)
    return f


def progress(f: Formula, letter: int, index: dict[str, int]) -> Formula:
    """Residual obligation after reading one letter."""
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, Atom):
        return TRUE if letter >> index[f.name] & 1 else FALSE
    if isinstance(f, NegAtom):
        return FALSE if letter >> index[f.name] & 1 else TRUE
    if isinstance(f, And):
        return conj(progress(x, letter, index) for x in f.items)
    if isinstance(f, Or):
        return disj(progress(x, letter, index) for x in f.items)
    if isinstance(f, Next):
        return f.item
    if isinstance(f, Eventually):
        return disj((progress(f.item, letter, index), f))
    if isinstance(f, Until):
        return disj((progress(f.right, letter, index),
                     conj((progress(f.left, letter, index), f))))
    raise TypeError(f"not a formula: {f!r}")


def _clauses(f: Formula) -> set[frozenset]:
    if f == TRUE:
        return {frozenset()}
    if f == FALSE:
        return set()
    if isinstance(f, Or):
        return set().union(*(_clauses(x) for x in f.items))
    if isinstance(f, And):
        out = {frozenset()}
        for x in f.items:
            out = {a | b for a in out for b in _clauses(x)}
        return out
    return {frozenset((f,))}


def canonical(f: Formula) -> Formula:
    """Subsumption-free disjunctive normal form over temporal subformulas.

    Plain flattening and absorption can let residuals of nested untils grow
    without bound; in this form every residual is a set of sets drawn from
    the finite closure of the input, so translation always terminates.
    """
    cl = set()
    for c in _clauses(f):
        pos = {x.name for x in c if isinstance(x, Atom)}
        if any(isinstance(x, NegAtom) and x.name in pos for x in c):
            continue
        cl.add(c)
    cl = {c for c in cl if not any(d < c for d in cl)}
    return disj(conj(c) for c in cl)


def atoms(f: Formula) -> set[str]:
    if isinstance(f, (Atom, NegAtom)):
        return {f.name}
    if isinstance(f, (And, Or)):
        return set().union(*(atoms(x) for x in f.items))
    if isinstance(f, (Next, Eventually)):
        return atoms(f.item)
    if isinstance(f, Until):
        return atoms(f.left) | atoms(f.right)
    return set()


def scltl_to_dfa(f: Formula, ap: Sequence[str], state_cap: int = DEFAULT_STATE_CAP,
                 minimal: bool = True) -> Dfa:
    """Compile a co-safe formula; a state accepts iff its residual is ``true``."""
    ap = list(ap)
    if len(ap) > MAX_AP:
        raise AutomatonError(f"at most {MAX_AP} propositions supported")
    index = {p: i for i, p in enumerate(ap)}
    unknown = atoms(f) - set(index)
    if unknown:
        raise AutomatonError(f"formula references unknown propositions {sorted(unknown)}")
    used = sum(1 << index[p] for p in atoms(f))
    n_letters = 1 << len(ap)
    projected = np.arange(n_letters) & used
    reps, letter_class = np.unique(projected, return_inverse=True)

    start = canonical(normalize(f))
    ids = {start.key: 0}
    states = [start]
    rows = []
    i = 0
    while i < len(states):
        row = []
        for letter in reps.tolist():
            d = canonical(progress(states[i], letter, index))
            j = ids.get(d.key)
            if j is None:
                if len(states) >= state_cap:
                    raise AutomatonError(f"formula DFA exceeds state cap {state_cap}")
                j = ids[d.key] = len(states)
                states.append(d)
            row.append(j)
        rows.append(row)
        i += 1
    table = np.array(rows, dtype=np.int64)[:, letter_class.ravel()]
    dfa = Dfa(ap, table, 0, np.array([s == TRUE for s in states]))
    return minimize(dfa) if minimal else dfa
