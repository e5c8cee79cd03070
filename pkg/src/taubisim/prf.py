"""
Parser for ``.prf`` proof scripts.

::

    system "shifted.strm"
    assume eutt r r'
    theorem eutt s0 t0
    let X0 = { (s0,t0), (s1,t1) }
    proof
      init gpaco D
      acc X0
      ...
    qed

Every ``theorem`` line must name the same relation; their pairs form the
subject of the initial goal.  Rule lines are a keyword followed by names or
relation literals; unknown keywords are left for the kernel to reject.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

from .bisim import RELATIONS, BisimFlags
from .kernel import RelLiteral, Step
from .streams import ParseError

_IDENT = r"[A-Za-z_][A-Za-z0-9_']*"
_PAIR = re.compile(rf"\(\s*({_IDENT})\s*,\s*({_IDENT})\s*\)")
_ARG = re.compile(rf"\s*(?:(?P<lit>\{{[^}}]*\}})|(?P<str>\"[^\"]*\")|(?P<ident>{_IDENT}))")


@dataclass
class ProofScript:
    system_path: str | None = None
    assumptions: list[tuple[str, str]] = field(default_factory=list)
    relation: str | None = None
    theorem_pairs: list[tuple[str, str]] = field(default_factory=list)
    lets: dict[str, RelLiteral] = field(default_factory=dict)
    steps: list[Step] = field(default_factory=list)

    @property
    def flags(self) -> BisimFlags:
        return RELATIONS[self.relation or "eutt"]

    @property
    def theorem(self) -> RelLiteral:
        return RelLiteral(tuple(self.theorem_pairs))


def parse_literal(text: str, line: int, col: int) -> RelLiteral:
    inner = text.strip()[1:-1]
    pairs = _PAIR.findall(inner)
    leftover = _PAIR.sub("", inner).replace(",", "").strip()
    if leftover:
        raise ParseError(f"malformed relation literal near {leftover[:12]!r}", line, col)
    return RelLiteral(tuple(pairs))


def _args(text: str, line: int, offset: int) -> list:
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _ARG.match(text, pos)
        if not m:
            raise ParseError("unexpected input", line, offset + pos + 1)
        col = offset + m.start(m.lastgroup) + 1
        if m.lastgroup == "lit":
            out.append(parse_literal(m.group("lit"), line, col))
        elif m.lastgroup == "str":
            out.append(m.group("str")[1:-1])
        else:
            out.append(m.group("ident"))
        pos = m.end()
    return out


def parse_script(text: str) -> ProofScript:
    script = ProofScript()
    in_proof = finished = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip("\r")
        if not line.strip():
            continue
        stripped = line.strip()
        offset = len(line) - len(line.lstrip())
        word, _, rest = stripped.partition(" ")
        rest_off = offset + len(word) + 1
        if finished:
            raise ParseError("input after qed", lineno, offset + 1)
        if in_proof:
            if word == "qed":
                finished = True
                continue
            script.steps.append(Step(word, tuple(_args(rest, lineno, rest_off)), lineno))
            continue
        if word == "proof":
            in_proof = True
        elif word == "system":
            args = _args(rest, lineno, rest_off)
            if len(args) != 1 or not rest.strip().startswith('"'):
                raise ParseError('expected system "<path>"', lineno, rest_off + 1)
            script.system_path = args[0]
        elif word in ("assume", "theorem"):
            args = _args(rest, lineno, rest_off)
            if len(args) != 3 or not all(isinstance(a, str) for a in args):
                raise ParseError(f"expected {word} <relation> <state> <state>", lineno, rest_off + 1)
            rel, a, b = args
            if rel not in RELATIONS:
                raise ParseError(f"unknown relation {rel}", lineno, rest_off + 1)
            if word == "assume":
                if rel != "eutt":
                    raise ParseError("only eutt premises can be assumed", lineno, rest_off + 1)
                script.assumptions.append((a, b))
            else:
                if script.relation not in (None, rel):
                    raise ParseError("all theorems of a script must use one relation", lineno, rest_off + 1)
                script.relation = rel
                script.theorem_pairs.append((a, b))
        elif word == "let":
            m = re.match(rf"\s*({_IDENT})\s*=\s*(\{{.*\}})\s*$", rest)
            if not m:
                raise ParseError("expected let <Name> = { (a,b), ... }", lineno, rest_off + 1)
            name = m.group(1)
            if name in script.lets:
                raise ParseError(f"{name} is bound twice", lineno, rest_off + 1)
            script.lets[name] = parse_literal(m.group(2), lineno, rest_off + m.start(2) + 1)
        else:
            raise ParseError(f"unexpected {word!r}", lineno, offset + 1)
    if not script.theorem_pairs:
        raise ParseError("no theorem", 1, 1)
    if not finished:
        raise ParseError("missing proof ... qed block", len(text.splitlines()) or 1, 1)
    return script


def load_script(path: str | os.PathLike) -> ProofScript:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_script(fh.read())
