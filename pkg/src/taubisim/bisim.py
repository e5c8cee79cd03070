"""
The bisimF family of functors and the up-to closures built from it.

``bisimF(flags, clo_beta)(X)`` is the least ``Z`` containing

* ``(eps, eps)``,
* ``(tau.s, tau.t)`` for ``(s, t)`` in ``X``,
* ``(vis n.s, vis n.t)`` for ``(s, t)`` in ``clo_beta(X)``,
* ``(tau.s, t)`` for ``(s, t)`` in ``Z`` when ``bL``,
* ``(s, tau.t)`` for ``(s, t)`` in ``Z`` when ``bR``.

The inner least fixed point is computed by explicit Kleene iteration on the
universe, so silently divergent streams are never related by tau stripping
alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gpaco import GpacoInstance, paco
from .lattice import (FixpointBudgetExceeded, MonotoneOp, Rel, bool_matmul, budget, gfp,
                      identity, random_rel)
from .streams import StreamUniverse, UniverseNotClosed


@dataclass(frozen=True)
class BisimFlags:
    bL: bool
    bR: bool

    def __str__(self) -> str:
        return f"({str(self.bL).lower()},{str(self.bR).lower()})"


STRONG = BisimFlags(False, False)
OVER = BisimFlags(True, False)
EUTT = BisimFlags(True, True)
ALL_FLAGS = (STRONG, OVER, BisimFlags(False, True), EUTT)

RELATIONS = {"strong": STRONG, "over": OVER, "eutt": EUTT}


@dataclass(frozen=True)
class ClosureSpec:
    """A named up-to closure.  ``context`` is ``"anywhere"`` or ``"beta-only"``."""

    name: str
    op: MonotoneOp
    context: str = "anywhere"


def bisim_step(u: StreamUniverse, flags: BisimFlags, x: np.ndarray, cx: np.ndarray) -> np.ndarray:
    """One application of bisimF given ``X`` and ``clo_beta(X)`` as matrices."""
    n = u.size
    base = np.zeros((n, n), dtype=bool)
    base[np.ix_(u.eps_idx, u.eps_idx)] = True
    base[np.ix_(u.tau_idx, u.tau_idx)] = x[np.ix_(u.tau_succ, u.tau_succ)]
    base[np.ix_(u.vis_idx, u.vis_idx)] = cx[np.ix_(u.vis_succ, u.vis_succ)] & u.same_label
    if not (flags.bL or flags.bR):
        return base
    z = base
    for _ in range(budget(u)):
        nz = base.copy()
        if flags.bL:
            nz[u.tau_idx, :] |= z[u.tau_succ, :]
        if flags.bR:
            nz[:, u.tau_idx] |= z[:, u.tau_succ]
        if np.array_equal(nz, z):
            return z
        z = nz
    raise FixpointBudgetExceeded(f"bisimF{flags} inner", budget(u))


def bisimF(u: StreamUniverse, flags: BisimFlags, clo: MonotoneOp | None = None) -> MonotoneOp:
    """The functor ``bisimF bL bR clo_beta`` as a monotone operator."""
    clo = identity(u) if clo is None else clo

    def apply(x: Rel) -> Rel:
        cx = x if clo.is_identity else clo(x)
        return Rel(u, bisim_step(u, flags, x.matrix, cx.matrix))

    name = f"bisimF{flags}" + ("" if clo.is_identity else f"[{clo.name}]")
    return MonotoneOp(name, u, apply)


def euttF(u: StreamUniverse, clo: MonotoneOp | None = None) -> MonotoneOp:
    return bisimF(u, EUTT, clo)


def bisim(u: StreamUniverse, flags: BisimFlags) -> Rel:
    """``paco(bisimF flags id)(⊥)``, memoised per universe."""
    key = ("bisim", flags)
    if key not in u.memo:
        u.memo[key] = paco(bisimF(u, flags), u.bottom())
    return u.memo[key]


def strong_bisim(u: StreamUniverse) -> Rel:
    return bisim(u, STRONG)


def over_approx(u: StreamUniverse) -> Rel:
    return bisim(u, OVER)


def eutt(u: StreamUniverse) -> Rel:
    return bisim(u, EUTT)


# -- closures ---------------------------------------------------------------

def bisim_trans_clo(u: StreamUniverse, left: BisimFlags, right: BisimFlags, r: Rel) -> Rel:
    """``{(s1, s2) | s1 R_left s1', (s1', s2') in r, s2 R_right s2'}``.

    The right bisimilarity is oriented with ``s2`` on its left, as in the
    defining rule; for the directed closure this means ``s2`` may carry
    more taus than ``s2'``, never fewer.
    """
    b1 = bisim(u, left).matrix
    b2 = bisim(u, right).matrix
    return Rel(u, bool_matmul(bool_matmul(b1, r.matrix), b2.T))


def clo_directed(u: StreamUniverse) -> MonotoneOp:
    return MonotoneOp("D", u, lambda r: bisim_trans_clo(u, OVER, OVER, r))


def clo_undirected(u: StreamUniverse) -> MonotoneOp:
    return MonotoneOp("U", u, lambda r: bisim_trans_clo(u, EUTT, EUTT, r))


def clo_strong(u: StreamUniverse) -> MonotoneOp:
    return MonotoneOp("strong", u, lambda r: bisim_trans_clo(u, STRONG, STRONG, r))


def clo_tauL(u: StreamUniverse) -> MonotoneOp:
    """``{(tau^k s, t) | (s, t) in r}``."""
    ts = u.tau_star
    return MonotoneOp("tauL", u, lambda r: Rel(u, bool_matmul(ts, r.matrix)))


def clo_concat(u: StreamUniverse) -> MonotoneOp:
    """``{(h1 ++ t1, h2 ++ t2) | h1 ≈ h2, (t1, t2) in r}`` on a concat-closed universe.

    The same comprehension defines the up-to-prefix closure, so both names
    map here.
    """
    if not u.concat_closed:
        raise UniverseNotClosed("the concat closure needs a universe built with closures=['concat']")
    dec = np.array(u.decomp, dtype=np.int64).reshape(-1, 3)
    owner = np.zeros((u.size, len(dec)), dtype=bool)
    owner[dec[:, 0], np.arange(len(dec))] = True
    hd, tl = dec[:, 1], dec[:, 2]

    def apply(r: Rel) -> Rel:
        w = eutt(u).matrix
        m = w[np.ix_(hd, hd)] & r.matrix[np.ix_(tl, tl)]
        return Rel(u, bool_matmul(bool_matmul(owner, m), owner.T))

    return MonotoneOp("C", u, apply)


_CLOSURES: dict[str, tuple[Callable[[StreamUniverse], MonotoneOp], str]] = {
    "id": (identity, "anywhere"),
    "D": (clo_directed, "anywhere"),
    "U": (clo_undirected, "beta-only"),
    "strong": (clo_strong, "anywhere"),
    "tauL": (clo_tauL, "anywhere"),
    "concat": (clo_concat, "anywhere"),
    "prefix": (clo_concat, "anywhere"),
}

CLOSURE_NAMES = tuple(_CLOSURES)


def closure(u: StreamUniverse, name: str) -> ClosureSpec:
    if name not in _CLOSURES:
        raise KeyError(f"unknown closure {name!r}")
    key = ("closure", name)
    if key not in u.memo:
        make, context = _CLOSURES[name]
        u.memo[key] = ClosureSpec(name, make(u), context)
    return u.memo[key]


# -- weak compatibility -----------------------------------------------------

@dataclass
class CompatReport:
    f: str
    bclo: str
    samples: int
    witness: Rel | None = None
    missing: tuple[int, int] | None = None

    @property
    def ok(self) -> bool:
        return self.witness is None


def compat_samples(u, rng: np.random.Generator, samples: int, extra=()):
    yield u.bottom()
    if u.size <= 12:
        yield from u.singletons()
    yield u.top()
    yield from extra
    densities = (0.1, 0.3, 0.5)
    for k in range(samples):
        yield random_rel(u, rng, densities[k % 3])


def check_weak_compat(f: MonotoneOp, bclo: MonotoneOp, samples: int = 200, seed: int = 0,
                      extra=()) -> CompatReport:
    """Search for ``x`` with ``bclo(f(x)) ⋢ f(gupaco(f, bclo)(x))``."""
    u = f.universe
    inst = GpacoInstance(f, bclo)
    rng = np.random.default_rng(seed)
    report = CompatReport(f.name, bclo.name, 0)
    for x in compat_samples(u, rng, samples, extra):
        report.samples += 1
        lhs = bclo(f(x))
        rhs = f(inst.gupaco(x))
        miss = lhs.first_missing(rhs)
        if miss is not None:
            report.witness, report.missing = x, miss
            break
    return report
