"""
Finite powerset lattice of binary relations.

A :class:`Rel` is a boolean membership matrix over a fixed :class:`Universe`.
Relations are immutable; all lattice operations return new values.  Monotone
operators are wrapped in :class:`MonotoneOp` so that fixpoint combinators can
find the universe they live in and report a useful name when something goes
wrong.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Iterator, Sequence

import numpy as np

DEFAULT_CAP = 4096


class LatticeError(Exception):
    pass


class UniverseMismatch(LatticeError):
    pass


class FixpointBudgetExceeded(LatticeError):
    """Kleene iteration did not stabilise within the lattice height.

    On a finite lattice this can only happen when the operator is not
    monotone, so it is a defect of the operator, never a truncation.
    """

    def __init__(self, name: str, budget: int):
        super().__init__(f"operator {name!r} did not stabilise within {budget} steps "
                         f"(not monotone?)")
        self.name = name
        self.budget = budget


class Universe:
    """An ordered, finite set of state identifiers."""

    def __init__(self, states: Sequence[Hashable], cap: int = DEFAULT_CAP):
        states = tuple(states)
        if not states:
            raise LatticeError("a universe needs at least one state")
        if len(states) > cap:
            raise LatticeError(f"universe of size {len(states)} exceeds cap {cap}")
        index = {s: i for i, s in enumerate(states)}
        if len(index) != len(states):
            raise LatticeError("universe states must be distinct")
        self.states = states
        self.index = index
        self.cap = cap
        # write-once memo tables keyed by operator identity (bisim flags, ...)
        self.memo: dict = {}

    @property
    def size(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def __repr__(self) -> str:
        return f"<Universe size={self.size}>"

    def bottom(self) -> "Rel":
        return Rel(self, np.zeros((self.size, self.size), dtype=bool))

    def top(self) -> "Rel":
        return Rel(self, np.ones((self.size, self.size), dtype=bool))

    def diagonal(self) -> "Rel":
        return Rel(self, np.eye(self.size, dtype=bool))

    def rel(self, pairs: Iterable[tuple[int, int]]) -> "Rel":
        """Relation from pairs of state *indices*."""
        m = np.zeros((self.size, self.size), dtype=bool)
        for i, j in pairs:
            m[i, j] = True
        return Rel(self, m)

    def singletons(self) -> Iterator["Rel"]:
        for i in range(self.size):
            for j in range(self.size):
                yield self.rel([(i, j)])


class Rel:
    __slots__ = ("universe", "matrix", "_key")

    def __init__(self, universe: Universe, matrix: np.ndarray):
        n = universe.size
        if matrix.shape != (n, n):
            raise LatticeError(f"matrix shape {matrix.shape} does not fit universe of size {n}")
        m = np.array(matrix, dtype=bool, copy=True)
        m.flags.writeable = False
        self.universe = universe
        self.matrix = m
        self._key = None

    def _check(self, other: "Rel") -> None:
        if other.universe is not self.universe:
            raise UniverseMismatch("relations live over different universes")

    @property
    def key(self) -> bytes:
        if self._key is None:
            self._key = np.packbits(self.matrix).tobytes()
        return self._key

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Rel):
            return NotImplemented
        self._check(other)
        return self.key == other.key

    def __hash__(self) -> int:
        return hash((id(self.universe), self.key))

    def __le__(self, other: "Rel") -> bool:
        self._check(other)
        return not np.any(self.matrix & ~other.matrix)

    def __ge__(self, other: "Rel") -> bool:
        return other <= self

    def __or__(self, other: "Rel") -> "Rel":
        self._check(other)
        return Rel(self.universe, self.matrix | other.matrix)

    def __and__(self, other: "Rel") -> "Rel":
        self._check(other)
        return Rel(self.universe, self.matrix & other.matrix)

    def __sub__(self, other: "Rel") -> "Rel":
        self._check(other)
        return Rel(self.universe, self.matrix & ~other.matrix)

    def __invert__(self) -> "Rel":
        return Rel(self.universe, ~self.matrix)

    def __contains__(self, pair: tuple[int, int]) -> bool:
        i, j = pair
        return bool(self.matrix[i, j])

    def __len__(self) -> int:
        return int(self.matrix.sum())

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return self.pairs()

    def __bool__(self) -> bool:
        return bool(self.matrix.any())

    def pairs(self) -> Iterator[tuple[int, int]]:
        for i, j in zip(*np.nonzero(self.matrix)):
            yield int(i), int(j)

    def first_missing(self, other: "Rel") -> tuple[int, int] | None:
        """A pair of ``self`` outside ``other``, or None when ``self <= other``."""
        self._check(other)
        diff = np.argwhere(self.matrix & ~other.matrix)
        return None if len(diff) == 0 else (int(diff[0][0]), int(diff[0][1]))

    def transpose(self) -> "Rel":
        return Rel(self.universe, self.matrix.T)

    def compose(self, other: "Rel") -> "Rel":
        """Relational composition ``self ; other``."""
        self._check(other)
        return Rel(self.universe, bool_matmul(self.matrix, other.matrix))

    def __repr__(self) -> str:
        return f"Rel({sorted(self.pairs())})"


def bool_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # float64 BLAS is exact for counts far beyond any admissible universe size
    return (a.astype(np.float64) @ b.astype(np.float64)) > 0.5


def leq(a: Rel, b: Rel) -> bool:
    return a <= b


def join(a: Rel, b: Rel) -> Rel:
    return a | b


def meet(a: Rel, b: Rel) -> Rel:
    return a & b


@dataclass(frozen=True)
class MonotoneOp:
    """A named operator ``Rel -> Rel`` over one universe.

    ``witness`` records how monotonicity is known: ``"declared"`` for
    operators that are monotone by construction, ``"sampled"`` once
    :func:`check_monotone` has passed.
    """

    name: str
    universe: Universe
    fn: Callable[[Rel], Rel] = field(repr=False, compare=False)
    witness: str = "declared"
    is_identity: bool = False

    def __call__(self, x: Rel) -> Rel:
        if x.universe is not self.universe:
            raise UniverseMismatch(f"{self.name}: argument lives over another universe")
        return self.fn(x)

    def then(self, outer: "MonotoneOp") -> "MonotoneOp":
        """``outer ∘ self``."""
        if self.is_identity:
            return outer
        if outer.is_identity:
            return self
        return MonotoneOp(f"{outer.name}∘{self.name}", self.universe,
                          lambda x: outer(self(x)), witness=_weaker(self, outer))


def _weaker(a: MonotoneOp, b: MonotoneOp) -> str:
    return "declared" if a.witness == b.witness == "declared" else "sampled"


def identity(universe: Universe) -> MonotoneOp:
    return MonotoneOp("id", universe, lambda x: x, is_identity=True)


def constant(universe: Universe, value: Rel, name: str = "const") -> MonotoneOp:
    return MonotoneOp(name, universe, lambda x: value)


def budget(universe: Universe) -> int:
    return universe.size ** 2 + 1


def lfp(op: MonotoneOp, start: Rel | None = None) -> Rel:
    """Least fixed point by ascending Kleene iteration from bottom."""
    x = op.universe.bottom() if start is None else start
    for _ in range(budget(op.universe)):
        y = op(x)
        if y == x:
            return x
        x = y
    raise FixpointBudgetExceeded(op.name, budget(op.universe))


def gfp(op: MonotoneOp) -> Rel:
    """Greatest fixed point by descending Kleene iteration from top."""
    x = op.universe.top()
    for _ in range(budget(op.universe)):
        y = op(x)
        if y == x:
            return x
        x = y
    raise FixpointBudgetExceeded(op.name, budget(op.universe))


def closure_star(clo: MonotoneOp, x: Rel) -> Rel:
    """Least ``y >= x`` closed under ``clo``: ``lfp(λy. x ⊔ clo(y))``."""
    if clo.is_identity:
        return x
    step = MonotoneOp(f"{clo.name}*", clo.universe, lambda y: x | clo(y))
    return lfp(step, start=x)


def star(clo: MonotoneOp) -> MonotoneOp:
    if clo.is_identity:
        return clo
    return MonotoneOp(f"{clo.name}*", clo.universe, lambda x: closure_star(clo, x),
                      witness=clo.witness)


def random_rel(universe: Universe, rng: np.random.Generator, density: float) -> Rel:
    return Rel(universe, rng.random((universe.size, universe.size)) < density)


@dataclass
class MonotonicityReport:
    op: str
    samples: int
    violations: list[tuple[Rel, Rel]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_monotone(op: MonotoneOp, samples: int = 200, seed: int = 0,
                   max_violations: int = 5) -> MonotonicityReport:
    """Sample pairs ``a <= b`` and look for ``op(a) ⋢ op(b)``."""
    rng = np.random.default_rng(seed)
    u = op.universe
    report = MonotonicityReport(op.name, samples)
    for k in range(samples):
        b = random_rel(u, rng, rng.choice((0.2, 0.5, 0.8)))
        a = b & random_rel(u, rng, rng.choice((0.2, 0.5, 0.8)))
        if k == 0:
            a, b = u.bottom(), u.top()
        if not op(a) <= op(b):
            report.violations.append((a, b))
            if len(report.violations) >= max_violations:
                break
    return report
