"""Task specifications: regexes and co-safe LTL compiled to complete DFAs."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .dfa import AutomatonError, Dfa, make_accepting_absorbing, minimize, to_dot
from .ltl import FormulaSyntaxError, parse_scltl, scltl_to_dfa
from .regex import RegexSyntaxError, nullable, parse_regex, regex_to_dfa

SEMANTICS = ("prefix", "exact")

__all__ = [
    "AutomatonError", "Dfa", "FormulaSyntaxError", "RegexSyntaxError", "SEMANTICS",
    "compile_spec", "dfa_from_dict", "dfa_to_dict", "make_accepting_absorbing",
    "minimize", "nullable", "parse_regex", "parse_scltl", "regex_to_dfa",
    "scltl_to_dfa", "to_dot",
]


def compile_spec(text: str, ap: Sequence[str], kind: str = "regex",
                 semantics: str = "exact") -> Dfa:
    """Parse and compile a specification into the minimal DFA used downstream.

    With ``semantics="prefix"`` accepting states are made absorbing, so a
    word is accepted as soon as some prefix is.
    """
    if semantics not in SEMANTICS:
        raise ValueError(f"unknown semantics {semantics!r}")
    if kind == "regex":
        dfa = regex_to_dfa(parse_regex(text, ap), ap)
    elif kind == "scltl":
        dfa = scltl_to_dfa(parse_scltl(text, ap), ap)
    elif kind == "dfa":
        dfa = dfa_from_dict(json.loads(Path(text).read_text()))
        if list(dfa.ap) != list(ap):
            raise AutomatonError(f"DFA propositions {dfa.ap} differ from model propositions {list(ap)}")
    else:
        raise ValueError(f"unknown specification kind {kind!r}")
    if semantics == "prefix":
        dfa = make_accepting_absorbing(dfa)
    return minimize(dfa)


def dfa_to_dict(dfa: Dfa) -> dict:
    return {
        "ap": list(dfa.ap),
        "initial": dfa.initial,
        "accepting": np.flatnonzero(dfa.accepting).tolist(),
        "dead": dfa.dead,
        "table": dfa.table.tolist(),
    }


def dfa_from_dict(d: dict) -> Dfa:
    table = np.asarray(d["table"], dtype=np.int64)
    acc = np.zeros(table.shape[0], dtype=bool)
    acc[d["accepting"]] = True
    return Dfa(list(d["ap"]), table, int(d["initial"]), acc)
