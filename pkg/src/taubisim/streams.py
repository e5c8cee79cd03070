"""
Rational streams of internal (tau) and visible (vis n) events.

Streams are presented by guarded systems of equations in the ``.strm``
format::

    # comment
    def s0  = vis 0 . s0'
    def s0' = tau . s1
    def u   = r ++ s1

``++`` is right-associative and binds weakest; ``tau .`` and ``vis n .``
are prefixes.  Parentheses group.

A :class:`StreamUniverse` is the finite set of canonical states reachable
from some roots by one-step unfolding (:func:`head`).  It is the carrier of
every relation the rest of the package computes with.
"""

from __future__ import annotations

import os
import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .lattice import DEFAULT_CAP, Rel, Universe

EPS, TAU, VIS = 0, 1, 2
CAP_ENV = "TAUBISIM_UNIVERSE_CAP"


# -- syntax -----------------------------------------------------------------

@dataclass(frozen=True)
class Eps:
    def __str__(self) -> str:
        return "eps"


@dataclass(frozen=True)
class Tau:
    next: "StreamExpr"

    def __str__(self) -> str:
        return f"tau . {_atom(self.next)}"


@dataclass(frozen=True)
class Vis:
    label: int
    next: "StreamExpr"

    def __str__(self) -> str:
        return f"vis {self.label} . {_atom(self.next)}"


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Concat:
    left: "StreamExpr"
    right: "StreamExpr"

    def __str__(self) -> str:
        left = f"({self.left})" if isinstance(self.left, Concat) else str(self.left)
        return f"{left} ++ {self.right}"


StreamExpr = Union[Eps, Tau, Vis, Var, Concat]


def _atom(e: StreamExpr) -> str:
    return f"({e})" if isinstance(e, Concat) else str(e)


class StreamError(Exception):
    pass


class ParseError(StreamError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


class GuardednessError(StreamError):
    def __init__(self, cycle: list[str]):
        super().__init__("unguarded recursion through " + " -> ".join(cycle + cycle[:1]))
        self.cycle = cycle


class UniverseExplosion(StreamError):
    def __init__(self, cap: int, detail: str = ""):
        super().__init__(detail or f"more than {cap} distinct states: not rational within the cap")
        self.cap = cap


class UniverseNotClosed(StreamError):
    pass


@dataclass(frozen=True)
class EquationSystem:
    equations: dict[str, StreamExpr]
    roots: tuple[str, ...]

    def __getitem__(self, name: str) -> StreamExpr:
        return self.equations[name]

    def __contains__(self, name: str) -> bool:
        return name in self.equations

    def extend(self, more: dict[str, StreamExpr]) -> "EquationSystem":
        """A new system with additional definitions (checked for clashes)."""
        clash = set(more) & set(self.equations)
        if clash:
            raise StreamError(f"duplicate definition of {sorted(clash)[0]}")
        eqs = dict(self.equations)
        eqs.update(more)
        _check_defined(eqs)
        return EquationSystem(eqs, self.roots + tuple(more))


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<concat>\+\+)|(?P<nat>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_']*)"
                    r"|(?P<punct>[.=()]))")
_KEYWORDS = {"def", "eps", "tau", "vis"}


def _tokenize(text: str, lineno: int) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = len(text) - len(text[pos:].lstrip()) + 1
            raise ParseError(f"unexpected character {text[col - 1]!r}", lineno, col)
        kind = m.lastgroup
        value = m.group(kind)
        col = m.start(kind) + 1
        if kind == "ident" and value in _KEYWORDS:
            kind = value
        elif kind == "punct" or kind == "concat":
            kind = value
        tokens.append((kind, value, col))
        pos = m.end()
    return tokens


class _ExprParser:
    def __init__(self, tokens: list[tuple[str, str, int]], lineno: int):
        self.tokens = tokens
        self.pos = 0
        self.lineno = lineno

    def peek(self) -> str | None:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def expect(self, kind: str) -> tuple[str, str, int]:
        if self.peek() != kind:
            self.fail(f"expected {kind!r}")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, msg: str):
        if self.pos < len(self.tokens):
            kind, value, col = self.tokens[self.pos]
            raise ParseError(f"{msg}, found {value!r}", self.lineno, col)
        end = self.tokens[-1][2] + len(self.tokens[-1][1]) if self.tokens else 1
        raise ParseError(f"{msg}, found end of line", self.lineno, end)

    def expr(self) -> StreamExpr:
        left = self.term()
        if self.peek() == "++":
            self.pos += 1
            return Concat(left, self.expr())
        return left

    def term(self) -> StreamExpr:
        kind = self.peek()
        if kind == "eps":
            self.pos += 1
            return Eps()
        if kind == "tau":
            self.pos += 1
            self.expect(".")
            return Tau(self.term())
        if kind == "vis":
            self.pos += 1
            label = int(self.expect("nat")[1])
            self.expect(".")
            return Vis(label, self.term())
        if kind == "ident":
            return Var(self.expect("ident")[1])
        if kind == "(":
            self.pos += 1
            e = self.expr()
            self.expect(")")
            return e
        self.fail("expected a stream expression")


def parse_expr(text: str, lineno: int = 1) -> StreamExpr:
    p = _ExprParser(_tokenize(text, lineno), lineno)
    e = p.expr()
    if p.peek() is not None:
        p.fail("trailing input")
    return e


def parse_system(text: str) -> EquationSystem:
    """Parse ``.strm`` text; every referenced variable must be defined."""
    equations: dict[str, StreamExpr] = {}
    where: dict[str, tuple[int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip("\r")
        if not line.strip():
            continue
        p = _ExprParser(_tokenize(line, lineno), lineno)
        p.expect("def")
        _, name, col = p.expect("ident")
        p.expect("=")
        body = p.expr()
        if p.peek() is not None:
            p.fail("trailing input")
        if name in equations:
            raise ParseError(f"duplicate definition of {name}", lineno, col)
        equations[name] = body
        where[name] = (lineno, col)
    for name, body in equations.items():
        for ref in free_vars(body):
            if ref not in equations:
                raise ParseError(f"undefined variable {ref}", *where[name])
    return EquationSystem(equations, tuple(equations))


def load_system(path: str | os.PathLike) -> EquationSystem:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_system(fh.read())


def _check_defined(eqs: dict[str, StreamExpr]) -> None:
    for name, body in eqs.items():
        for ref in free_vars(body):
            if ref not in eqs:
                raise StreamError(f"undefined variable {ref} in {name}")


def free_vars(e: StreamExpr) -> set[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        e = stack.pop()
        if isinstance(e, Var):
            out.add(e.name)
        elif isinstance(e, (Tau, Vis)):
            stack.append(e.next)
        elif isinstance(e, Concat):
            stack.extend((e.left, e.right))
    return out


# -- guardedness ------------------------------------------------------------

def emptyable_vars(system: EquationSystem) -> dict[str, bool]:
    """Least fixed point: which variables may unfold to eps without a guard."""
    emp = {name: False for name in system.equations}
    changed = True
    while changed:
        changed = False
        for name, body in system.equations.items():
            if not emp[name] and _emptyable(body, emp):
                emp[name] = changed = True
    return emp


def _emptyable(e: StreamExpr, emp: dict[str, bool]) -> bool:
    if isinstance(e, Eps):
        return True
    if isinstance(e, (Tau, Vis)):
        return False
    if isinstance(e, Var):
        return emp[e.name]
    return _emptyable(e.left, emp) and _emptyable(e.right, emp)


def _head_deps(e: StreamExpr, emp: dict[str, bool]) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Concat):
        deps = _head_deps(e.left, emp)
        if _emptyable(e.left, emp):
            deps |= _head_deps(e.right, emp)
        return deps
    return set()


def check_guarded(system: EquationSystem) -> None:
    """Raise :class:`GuardednessError` with a cycle witness if unguarded."""
    emp = emptyable_vars(system)
    graph = {name: sorted(_head_deps(body, emp)) for name, body in system.equations.items()}
    state = {name: 0 for name in graph}  # 0 new, 1 on stack, 2 done
    for root in graph:
        if state[root]:
            continue
        path = [root]
        iters = [iter(graph[root])]
        state[root] = 1
        while iters:
            nxt = next(iters[-1], None)
            if nxt is None:
                state[path.pop()] = 2
                iters.pop()
            elif state[nxt] == 1:
                raise GuardednessError(path[path.index(nxt):])
            elif state[nxt] == 0:
                state[nxt] = 1
                path.append(nxt)
                iters.append(iter(graph[nxt]))


# -- canonical form and one-step unfolding ----------------------------------

def resolve_alias(name: str, system: EquationSystem) -> str:
    seen = set()
    while isinstance(system[name], Var):
        if name in seen:
            raise GuardednessError(sorted(seen))
        seen.add(name)
        name = system[name].name
    return name


def _chain(e: StreamExpr) -> list[StreamExpr]:
    out = []
    while isinstance(e, Concat):
        out.extend(_chain(e.left))
        e = e.right
    out.append(e)
    return out


def _build(chain: list[StreamExpr]) -> StreamExpr:
    # Concat(Eps, e) -> e wherever it occurs; a trailing eps is kept
    chain = [c for c in chain[:-1] if not isinstance(c, Eps)] + chain[-1:]
    e = chain[-1]
    for c in reversed(chain[:-1]):
        e = Concat(c, e)
    return e


def canonical(e: StreamExpr, system: EquationSystem, _open: frozenset | None = frozenset()) -> StreamExpr:
    """Resolve aliases, right-associate ``++`` and erase left units.

    A variable defined by a ``++`` chain stands for that chain, so
    ``def u = r ++ s1`` and the expression ``r ++ s1`` are one state.  Only
    variables on the ``++`` spine are expanded (never under a prefix, which
    is unfolded later when it becomes a state), and a variable already
    being expanded is left folded.
    """
    if isinstance(e, Var):
        name = resolve_alias(e.name, system)
        body = system[name]
        if _open is not None and isinstance(body, Concat) and name not in _open:
            return canonical(body, system, _open | {name})
        return Var(name)
    if isinstance(e, Tau):
        return Tau(canonical(e.next, system, None))
    if isinstance(e, Vis):
        return Vis(e.label, canonical(e.next, system, None))
    if isinstance(e, Concat):
        chain = _chain(canonical(e.left, system, _open)) + _chain(canonical(e.right, system, _open))
        return _build(chain)
    return e


@dataclass(frozen=True)
class HEps:
    pass


@dataclass(frozen=True)
class HTau:
    next: StreamExpr


@dataclass(frozen=True)
class HVis:
    label: int
    next: StreamExpr


Head = Union[HEps, HTau, HVis]


def head(e: StreamExpr, system: EquationSystem) -> Head:
    """The unique one-step observation of a stream expression.

    Successors are returned in canonical form.  Terminates on guarded
    systems because the left spine of ``++`` follows the acyclic head
    dependency graph.
    """
    if isinstance(e, Eps):
        return HEps()
    if isinstance(e, Tau):
        return HTau(canonical(e.next, system))
    if isinstance(e, Vis):
        return HVis(e.label, canonical(e.next, system))
    if isinstance(e, Var):
        return head(system[e.name], system)
    h = head(e.left, system)
    if isinstance(h, HEps):
        return head(e.right, system)
    rest = canonical(Concat(h.next, e.right), system)
    return HTau(rest) if isinstance(h, HTau) else HVis(h.label, rest)


# -- universes --------------------------------------------------------------

def default_cap() -> int:
    return int(os.environ.get(CAP_ENV, DEFAULT_CAP))


class StreamUniverse(Universe):
    """Finite carrier of canonical states closed under one-step unfolding.

    ``kind``, ``succ`` and ``label`` are the flattened head observations;
    ``decomp`` lists every split ``u = h ++ t`` with ``h`` and ``t`` both in
    the universe (only when built concat-closed).
    """

    def __init__(self, system: EquationSystem, exprs: list[StreamExpr],
                 heads: list[Head], index: dict, cap: int, concat_closed: bool):
        super().__init__(exprs, cap=cap)
        self.system = system
        self.exprs = exprs
        self.heads = heads
        self.concat_closed = concat_closed
        n = len(exprs)
        self.kind = np.array([_kind(h) for h in heads], dtype=np.int8)
        self.succ = np.array([-1 if isinstance(h, HEps) else index[h.next] for h in heads],
                             dtype=np.int64)
        self.label = np.array([h.label if isinstance(h, HVis) else -1 for h in heads],
                              dtype=np.int64)
        self.eps_idx = np.flatnonzero(self.kind == EPS)
        self.tau_idx = np.flatnonzero(self.kind == TAU)
        self.vis_idx = np.flatnonzero(self.kind == VIS)
        self.tau_succ = self.succ[self.tau_idx]
        self.vis_succ = self.succ[self.vis_idx]
        vl = self.label[self.vis_idx]
        self.same_label = vl[:, None] == vl[None, :]
        self.names = {}
        for name in system.equations:
            e = canonical(Var(name), system)
            if e in index:
                self.names[name] = index[e]
        self._display = {}
        for name, j in self.names.items():
            self._display.setdefault(j, name)
        self.tau_star = self._tau_star(n)
        self.decomp = self._decompositions(index) if concat_closed else None

    def _tau_star(self, n: int) -> np.ndarray:
        """``ts[u, v]`` iff ``u`` reaches ``v`` by zero or more tau steps."""
        ts = np.eye(n, dtype=bool)
        step = np.zeros((n, n), dtype=bool)
        step[self.tau_idx, self.tau_succ] = True
        frontier = ts
        for _ in range(n):
            frontier = (frontier.astype(np.float64) @ step.astype(np.float64)) > 0.5
            if not np.any(frontier & ~ts):
                break
            ts = ts | frontier
        return ts

    def _decompositions(self, index: dict) -> list[tuple[int, int, int]]:
        out = []
        eps = index.get(Eps())
        for u, e in enumerate(self.exprs):
            if eps is not None:
                out.append((u, eps, u))
            chain = _chain(e)
            for k in range(1, len(chain)):
                h = index.get(_build(chain[:k]))
                t = index.get(_build(chain[k:]))
                if h is not None and t is not None:
                    out.append((u, h, t))
        return out

    def state(self, name_or_index) -> int:
        if isinstance(name_or_index, (int, np.integer)):
            return int(name_or_index)
        if name_or_index in self.names:
            return self.names[name_or_index]
        raise KeyError(f"no state named {name_or_index!r} in this universe")

    def name(self, i: int) -> str:
        return self._display.get(i) or str(self.exprs[i])

    def named_rel(self, pairs: Iterable[tuple[str, str]]) -> Rel:
        return self.rel((self.state(a), self.state(b)) for a, b in pairs)

    def show(self, rel: Rel) -> str:
        return "{" + ", ".join(f"({self.name(i)},{self.name(j)})" for i, j in rel.pairs()) + "}"

    def show_pair(self, pair: tuple[int, int]) -> str:
        return f"({self.name(pair[0])},{self.name(pair[1])})"


def _kind(h: Head) -> int:
    return EPS if isinstance(h, HEps) else TAU if isinstance(h, HTau) else VIS


def build_universe(system: EquationSystem, roots: Iterable[str | StreamExpr] | None = None,
                   cap: int | None = None, closures: Iterable[str] = ()) -> StreamUniverse:
    """Smallest set of canonical states containing ``roots`` closed under head.

    Passing ``"concat"`` (or ``"prefix"``) in ``closures`` additionally
    saturates the universe with every prefix and suffix of every ``++``
    chain, and with ``eps``, so the concat closure can be evaluated.
    """
    check_guarded(system)
    cap = default_cap() if cap is None else cap
    roots = list(system.roots if roots is None else roots)
    concat = bool({"concat", "prefix"} & set(closures))
    index: dict[StreamExpr, int] = {}
    exprs: list[StreamExpr] = []
    heads: list[Head | None] = []
    queue: deque[int] = deque()

    def intern(e: StreamExpr) -> int:
        if e in index:
            return index[e]
        if len(exprs) >= cap:
            raise UniverseExplosion(cap)
        index[e] = len(exprs)
        exprs.append(e)
        heads.append(None)
        queue.append(index[e])
        return index[e]

    try:
        _saturate(system, roots, concat, intern, exprs, heads, queue)
    except RecursionError:
        # only ever-growing ++ chains nest this deeply
        raise UniverseExplosion(cap, f"state expressions keep growing after {len(exprs)} states: "
                                     f"not rational") from None
    return StreamUniverse(system, exprs, heads, index, cap, concat)


def _saturate(system, roots, concat, intern, exprs, heads, queue) -> None:
    for r in roots:
        intern(canonical(Var(r) if isinstance(r, str) else r, system))
    while True:
        while queue:
            i = queue.popleft()
            h = head(exprs[i], system)
            heads[i] = h
            if not isinstance(h, HEps):
                intern(h.next)
        if not concat:
            break
        before = len(exprs)
        intern(Eps())
        for e in list(exprs):
            chain = _chain(e)
            for k in range(1, len(chain)):
                intern(_build(chain[:k]))
                intern(_build(chain[k:]))
        if len(exprs) == before and not queue:
            break
