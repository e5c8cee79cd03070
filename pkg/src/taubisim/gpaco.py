"""
Parameterized greatest fixed points over a finite relation lattice.

``paco(f, r)``           = gfp(λy. f(r ⊔ y))
``gpaco(f, bclo, r, g)`` = bclo*(r ⊔ paco(f ∘ bclo*, r ⊔ g))
``gupaco(f, bclo, g)``   = gpaco(f, bclo, g, g)

The companion is computed through the tower: the least family containing ⊤
and closed under ``f`` and binary meets.  ``companion(f, x)`` is the meet of
the tower elements above ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import LatticeError, MonotoneOp, Rel, gfp, identity, random_rel, star

TOWER_BUDGET = 10_000


def paco(f: MonotoneOp, r: Rel) -> Rel:
    return gfp(MonotoneOp(f"paco({f.name})", f.universe, lambda y: f(r | y)))


class GpacoInstance:
    """``gpaco`` for a fixed functor and base closure, with a memo table."""

    def __init__(self, f: MonotoneOp, bclo: MonotoneOp | None = None):
        bclo = identity(f.universe) if bclo is None else bclo
        if bclo.universe is not f.universe:
            raise LatticeError("functor and base closure live over different universes")
        self.f = f
        self.bclo = bclo
        self.bstar = star(bclo)
        self.fb = self.bstar.then(f)
        self._memo: dict = {}

    @property
    def universe(self):
        return self.f.universe

    def gpaco(self, r: Rel, g: Rel) -> Rel:
        key = (r.key, g.key)
        if key not in self._memo:
            self._memo[key] = self.bstar(r | paco(self.fb, r | g))
        return self._memo[key]

    def gupaco(self, g: Rel) -> Rel:
        return self.gpaco(g, g)

    def gupaco_op(self) -> MonotoneOp:
        return MonotoneOp(f"gupaco({self.f.name},{self.bclo.name})", self.universe, self.gupaco)


def gpaco(f: MonotoneOp, bclo: MonotoneOp, r: Rel, g: Rel) -> Rel:
    return GpacoInstance(f, bclo).gpaco(r, g)


def gupaco(f: MonotoneOp, bclo: MonotoneOp, g: Rel) -> Rel:
    return GpacoInstance(f, bclo).gupaco(g)


# -- companion --------------------------------------------------------------

class TowerBudgetExceeded(LatticeError):
    def __init__(self, budget: int):
        super().__init__(f"tower saturation exceeded {budget} elements")
        self.budget = budget


def tower(f: MonotoneOp, budget: int = TOWER_BUDGET) -> list[Rel]:
    """Least family containing ⊤ closed under ``f`` and binary meet."""
    top = f.universe.top()
    elems = [top]
    seen = {top.key}
    pending = [top]
    while pending:
        y = pending.pop()
        new = [f(y)] + [y & z for z in elems]
        for z in new:
            if z.key not in seen:
                if len(elems) >= budget:
                    raise TowerBudgetExceeded(budget)
                seen.add(z.key)
                elems.append(z)
                pending.append(z)
    return elems


def companion(f: MonotoneOp, x: Rel, budget: int = TOWER_BUDGET, elems: list[Rel] | None = None) -> Rel:
    elems = tower(f, budget) if elems is None else elems
    out = f.universe.top()
    for y in elems:
        if x <= y:
            out = out & y
    return out


def companion_op(f: MonotoneOp, budget: int = TOWER_BUDGET) -> MonotoneOp:
    elems = tower(f, budget)
    return MonotoneOp(f"cpn({f.name})", f.universe, lambda x: companion(f, x, elems=elems))


def check_companion_gpaco(f: MonotoneOp, r: Rel, g: Rel, budget: int = TOWER_BUDGET) -> tuple[Rel, Rel]:
    """Both sides of ``gpaco(f, cpn, r, g) = cpn(r ⊔ f(cpn(r ⊔ g)))``.

    Raises :class:`TowerBudgetExceeded` when the tower cannot be saturated,
    which callers must report separately from an inequality.
    """
    cpn = companion_op(f, budget)
    lhs = GpacoInstance(f, cpn).gpaco(r, g)
    rhs = cpn(r | f(cpn(r | g)))
    return lhs, rhs


# -- law fuzzing ------------------------------------------------------------

@dataclass
class LawFailure:
    rule: str
    detail: str
    witness: tuple[int, int] | None = None


@dataclass
class LawReport:
    """Per-rule tallies; ``skipped`` counts rules whose premise did not hold."""

    passed: dict[str, int] = field(default_factory=dict)
    skipped: dict[str, int] = field(default_factory=dict)
    failures: list[LawFailure] = field(default_factory=list)
    configurations: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def ok_rule(self, rule: str) -> None:
        self.passed[rule] = self.passed.get(rule, 0) + 1

    def skip(self, rule: str) -> None:
        self.skipped[rule] = self.skipped.get(rule, 0) + 1

    def check(self, rule: str, lhs: Rel, rhs: Rel, detail: str = "") -> bool:
        miss = lhs.first_missing(rhs)
        if miss is None:
            self.ok_rule(rule)
            return True
        self.failures.append(LawFailure(rule, detail or f"{rule}: inclusion fails", miss))
        return False

    def merge(self, other: "LawReport") -> "LawReport":
        for rule, n in other.passed.items():
            self.passed[rule] = self.passed.get(rule, 0) + n
        for rule, n in other.skipped.items():
            self.skipped[rule] = self.skipped.get(rule, 0) + n
        self.failures.extend(other.failures)
        self.configurations += other.configurations
        return self


def _subset(x: Rel, rng: np.random.Generator) -> Rel:
    return x & random_rel(x.universe, rng, rng.choice((0.3, 0.6, 1.0)))


def acc_witness(below, x0: Rel) -> Rel:
    """Greatest ``x ⊑ x0`` with ``x ⊑ below(x)``, by descending iteration."""
    x = x0
    while True:
        nx = x & below(x)
        if nx == x:
            return x
        x = nx


def verify_gpaco_laws(f: MonotoneOp, bclo: MonotoneOp, samples: int = 20, seed: int = 0,
                      closures: list[MonotoneOp] | None = None, compat=None) -> LawReport:
    """Check the paco and gpaco rules on sampled ``r``, ``g`` and ``x``.

    ``closures`` are extra up-to functions for the Closure rule; their
    premise ``clo ⊑ gupaco`` is itself sampled and the rule is skipped for
    a sample where the premise fails.  ``compat`` is a precomputed weak
    compatibility report; it gates the Init rule.
    """
    from .bisim import check_weak_compat

    u = f.universe
    rng = np.random.default_rng(seed)
    inst = GpacoInstance(f, bclo)
    report = LawReport()
    bot = u.bottom()
    gfp_f = gfp(f)

    report.check("paco.Init", paco(f, bot), gfp_f)
    report.check("paco.Init", gfp_f, paco(f, bot))

    if compat is None:
        p0 = paco(inst.fb, bot)
        extra = [p0, inst.bstar(p0), gfp_f, inst.gupaco(bot)]
        compat = check_weak_compat(f, bclo, samples=max(samples, 20), seed=seed, extra=extra)
    if compat.ok:
        report.check("Init", inst.gpaco(bot, bot), gfp_f, "gpaco(⊥,⊥) ⋢ gfp f despite weak compatibility")
    else:
        report.skip("Init")

    if closures is None:
        mask = random_rel(u, rng, 0.7)
        closures = [MonotoneOp("gupaco∧mask", u, lambda x: inst.gupaco(x) & mask)]

    for _ in range(samples):
        report.configurations += 1
        density = rng.choice((0.05, 0.15, 0.3))
        g = random_rel(u, rng, density)
        r = _subset(g, rng) if rng.random() < 0.7 else random_rel(u, rng, density)
        x = random_rel(u, rng, density)
        _verify_sample(report, f, bclo, inst, r, g, x, closures, rng)
    return report


def _verify_sample(report, f, bclo, inst, r, g, x, closures, rng) -> None:
    p = paco(f, r)
    report.check("paco.Unfold", p, f(r | p))
    report.check("paco.Unfold", f(r | p), p)

    # paco Acc, both directions on witnesses
    y = _subset(p, rng)
    report.check("paco.Acc<=", y, paco(f, r | y))
    y = acc_witness(lambda z: paco(f, r | z), x | _subset(p, rng))
    report.check("paco.Acc=>", y, p)

    G = inst.gpaco(r, g)
    report.check("Base", r, G)
    report.check("Final", r | paco(f, g), G)
    report.check("Step", f(inst.gupaco(g)), G)
    report.check("Closure*", bclo(G), G)
    if bclo.is_identity:
        report.check("gpaco.id", G, r | paco(f, r | g))
        report.check("gpaco.id", r | paco(f, r | g), G)

    w = _subset(G, rng)
    report.check("Acc<=", w, inst.gpaco(r, g | w))
    w = acc_witness(lambda z: inst.gpaco(r, g | z), x | _subset(G, rng))
    report.check("Acc=>", w, G)

    for clo in closures:
        probe = [G, x, g]
        if all(clo(z) <= inst.gupaco(z) for z in probe):
            report.check("Closure", clo(G), G, f"Closure({clo.name})")
        else:
            report.skip("Closure")

    # monotonicity in both knowledge parameters
    report.check("Mono.r", G, inst.gpaco(r | x, g))
    report.check("Mono.g", G, inst.gpaco(r, g | x))
