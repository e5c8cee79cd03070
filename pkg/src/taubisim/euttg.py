"""
Context-sensitive weak bisimulation with four knowledge slots.

    euttVC(gβ)(r)      = gupaco(euttF id, D)(U(r ∪ gβ))
    euttG(rβ,rτ,gβ,gτ) = gpaco(euttF(euttVC gβ), D, U(rβ) ∪ rτ, gτ)

Knowledge always satisfies the chain ``rβ ⊑ rτ ⊑ gτ ⊑ gβ``; values that break
it are rejected rather than evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bisim import ALL_FLAGS, EUTT, bisimF, clo_concat, clo_directed, clo_undirected, euttF, eutt
from .gpaco import GpacoInstance, LawReport, acc_witness, companion, tower
from .lattice import MonotoneOp, Rel, random_rel
from .streams import StreamUniverse, build_universe, parse_system


class KnowledgeChainError(ValueError):
    pass


@dataclass(frozen=True)
class Knowledge:
    rb: Rel
    rt: Rel
    gb: Rel
    gt: Rel

    def __post_init__(self):
        if not (self.rb <= self.rt <= self.gt <= self.gb):
            raise KnowledgeChainError("knowledge must satisfy rβ ⊑ rτ ⊑ gτ ⊑ gβ")

    @classmethod
    def empty(cls, u) -> "Knowledge":
        b = u.bottom()
        return cls(b, b, b, b)

    @property
    def key(self) -> tuple:
        return (self.rb.key, self.rt.key, self.gb.key, self.gt.key)

    @property
    def unlocked(self) -> Rel:
        return self.rb | self.rt

    def acc(self, x: Rel) -> "Knowledge":
        return Knowledge(self.rb, self.rt, self.gb | x, self.gt | x)

    def after_tau(self) -> "Knowledge":
        return Knowledge(self.rb, self.gt, self.gb, self.gt)

    def after_beta(self) -> "Knowledge":
        return Knowledge(self.gb, self.gb, self.gb, self.gb)

    def for_trans_u(self) -> "Knowledge":
        return Knowledge(self.rb, self.rb, self.gb, self.rb)


class EuttGEngine:
    """Memoised evaluation of euttVC and euttG over one universe."""

    def __init__(self, u: StreamUniverse):
        self.u = u
        self.D = clo_directed(u)
        self.U = clo_undirected(u)
        self.vc_base = GpacoInstance(euttF(u), self.D)
        self._vc: dict = {}
        self._g: dict = {}

    def euttVC(self, gb: Rel, r: Rel) -> Rel:
        key = (gb.key, r.key)
        if key not in self._vc:
            self._vc[key] = self.vc_base.gupaco(self.U(r | gb))
        return self._vc[key]

    def functor(self, gb: Rel) -> MonotoneOp:
        vc = MonotoneOp("euttVC", self.u, lambda x: self.euttVC(gb, x))
        return euttF(self.u, vc)

    def euttG(self, k: Knowledge) -> Rel:
        if k.key not in self._g:
            inst = GpacoInstance(self.functor(k.gb), self.D)
            self._g[k.key] = inst.gpaco(self.U(k.rb) | k.rt, k.gt)
        return self._g[k.key]


def engine(u: StreamUniverse) -> EuttGEngine:
    if "euttg" not in u.memo:
        u.memo["euttg"] = EuttGEngine(u)
    return u.memo["euttg"]


def euttVC(gb: Rel, r: Rel) -> Rel:
    return engine(gb.universe).euttVC(gb, r)


def euttG(k: Knowledge) -> Rel:
    return engine(k.rb.universe).euttG(k)


# -- images of the stream-processing rules ----------------------------------

def tau_prefix(u: StreamUniverse, r: Rel) -> Rel:
    """``{(tau.s, tau.t) | (s, t) in r}`` restricted to the universe."""
    m = np.zeros((u.size, u.size), dtype=bool)
    m[np.ix_(u.tau_idx, u.tau_idx)] = r.matrix[np.ix_(u.tau_succ, u.tau_succ)]
    return Rel(u, m)


def vis_prefix(u: StreamUniverse, r: Rel) -> Rel:
    """``{(vis n.s, vis n.t) | (s, t) in r}`` restricted to the universe."""
    m = np.zeros((u.size, u.size), dtype=bool)
    m[np.ix_(u.vis_idx, u.vis_idx)] = r.matrix[np.ix_(u.vis_succ, u.vis_succ)] & u.same_label
    return Rel(u, m)


def eps_pairs(u: StreamUniverse) -> Rel:
    m = np.zeros((u.size, u.size), dtype=bool)
    m[np.ix_(u.eps_idx, u.eps_idx)] = True
    return Rel(u, m)


# -- rule verification ------------------------------------------------------

def sample_knowledge(u: StreamUniverse, rng: np.random.Generator) -> Knowledge:
    """Chain-respecting knowledge: sample gβ, then intersect downwards."""
    gb = random_rel(u, rng, rng.choice((0.05, 0.15, 0.3)))
    gt = gb & random_rel(u, rng, rng.choice((0.4, 0.7, 1.0)))
    rt = gt & random_rel(u, rng, rng.choice((0.4, 0.7, 1.0)))
    rb = rt & random_rel(u, rng, rng.choice((0.3, 0.6, 1.0)))
    return Knowledge(rb, rt, gb, gt)


RULES = ("Init", "Final", "Base", "Acc<=", "Acc=>", "Ret", "tau_Step", "beta_Step",
         "TransD", "TransU", "ConcatC")


def verify_euttG_rules(u: StreamUniverse, samples: int = 100, seed: int = 0,
                       mutant: str | None = None) -> LawReport:
    """Check every rule of the euttG theory as a relation inclusion.

    ``mutant="transU-gt"`` states TransU with gτ in the fourth slot; the
    harness must catch it.
    """
    if not u.concat_closed:
        u = build_universe(u.system, [e for e in u.exprs], cap=u.cap, closures=["concat"])
    eng = engine(u)
    rng = np.random.default_rng(seed)
    C = clo_concat(u)
    weak = eutt(u)
    ret = eps_pairs(u)
    report = LawReport()
    report.check("Init", eng.euttG(Knowledge.empty(u)), weak)
    for _ in range(samples):
        report.configurations += 1
        k = sample_knowledge(u, rng)
        G = eng.euttG(k)
        x = random_rel(u, rng, rng.choice((0.05, 0.15)))
        report.check("Final", weak, G)
        report.check("Base", k.unlocked, G)
        w = G & random_rel(u, rng, 0.5)
        report.check("Acc<=", w, eng.euttG(k.acc(w)))
        w = acc_witness(lambda z: eng.euttG(k.acc(z)), x | (G & random_rel(u, rng, 0.5)))
        report.check("Acc=>", w, G)
        if len(ret):
            report.check("Ret", ret, G)
        else:
            report.skip("Ret")
        report.check("tau_Step", tau_prefix(u, eng.euttG(k.after_tau())), G)
        report.check("beta_Step", vis_prefix(u, eng.euttG(k.after_beta())), G)
        report.check("TransD", eng.D(G), G)
        if mutant == "transU-gt":
            report.check("TransU", eng.U(eng.euttG(Knowledge(k.rb, k.rb, k.gb, k.gt))), G)
        else:
            report.check("TransU", eng.U(eng.euttG(k.for_trans_u())), G)
        report.check("ConcatC", C(G), G)
    return report


# -- the companion cannot serve as base closure ------------------------------

COUNTEREXAMPLE_SYSTEM = """\
# X = {(vis 1 . eps, vis 2 . eps)}, Y = {(vis 0 . vis 1 . eps, vis 0 . vis 2 . eps)}
def x1  = vis 1 . eps
def x2  = vis 2 . eps
def y1  = vis 0 . x1
def y2  = vis 0 . x2
def tx1 = tau . x1
def tx2 = tau . x2
"""

REFUTING_SCRIPT = """\
theorem eutt x1 x2
let X = { (x1,x2) }
proof
  init euttg
  acc X
  closure cpn { (x1,x2) }
  base
qed
"""


@dataclass
class SubCheck:
    name: str
    passed: bool
    detail: str


@dataclass
class CompanionReport:
    checks: list[SubCheck] = field(default_factory=list)
    tower_sizes: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(SubCheck(name, bool(passed), detail))


def counterexample_universe() -> StreamUniverse:
    return build_universe(parse_system(COUNTEREXAMPLE_SYSTEM), closures=["concat"])


def piecewise_clo(F: MonotoneOp, X: Rel, Y: Rel) -> MonotoneOp:
    u = F.universe
    ftop = F(u.top())

    def apply(r: Rel) -> Rel:
        if X <= r:
            return u.top()
        if Y <= r:
            return ftop
        return u.bottom()

    return MonotoneOp("clo_piecewise", u, apply)


def companion_inconsistency_report(samples: int = 60, seed: int = 0) -> CompanionReport:
    from .kernel import KernelError, check_script

    u = counterexample_universe()
    rep = CompanionReport()
    X = u.named_rel([("x1", "x2")])
    Y = u.named_rel([("y1", "y2")])
    weak = eutt(u)
    eng = engine(u)
    bot = u.bottom()
    rng = np.random.default_rng(seed)

    # (a) cpn_F(Y) = F(⊤) through the tower, for all four flag settings
    for flags in ALL_FLAGS:
        F = bisimF(u, flags)
        elems = tower(F)
        rep.tower_sizes[str(flags)] = len(elems)
        cy = companion(F, Y, elems=elems)
        rep.add(f"(a) cpn_F(Y) = F(⊤) for bisimF{flags}", cy == F(u.top()),
                f"tower size {len(elems)}")
        clo = piecewise_clo(F, X, Y)
        probes = [bot, u.top(), X, Y, X | Y, F(u.top()), F(X)]
        probes += [random_rel(u, rng, d) for d in (0.1, 0.3, 0.5) for _ in range(samples // 3)]
        mono = all(clo(a & b) <= clo(b) for a in probes for b in probes)
        compat = all(clo(F(r)) <= F(clo(r)) for r in probes)
        rep.add(f"(a) piecewise clo monotone and compatible for bisimF{flags}", mono and compat)
        below = all(clo(r) <= companion(F, r, elems=elems) for r in probes)
        cpn_compat = all(companion(F, F(r), elems=elems) <= F(companion(F, r, elems=elems))
                         for r in probes)
        rep.add(f"(a) clo ⊑ cpn_F and cpn_F compatible for bisimF{flags}", below and cpn_compat)

    # (b) Y ⊑ euttG(∅,∅,X,∅) through β_Step then Base
    k0 = Knowledge(bot, bot, X, bot)
    E0 = eng.euttG(k0)
    rep.add("(b) Y ⊑ euttG(∅,∅,X,∅)", Y <= E0)
    rep.add("(b) via β_Step then Base", Y <= vis_prefix(u, eng.euttG(k0.after_beta()))
            and X <= k0.after_beta().unlocked)

    # (c) the implication chain, one inclusion at a time
    E00 = eng.euttG(Knowledge.empty(u))
    k1 = Knowledge(bot, bot, X, X)
    E1 = eng.euttG(k1)
    rep.add("(c) Init: euttG(∅,∅,∅,∅) ⊑ ≈", E00 <= weak)
    rep.add("(c) Acc: X ⊑ euttG(∅,∅,X,X) iff X ⊑ euttG(∅,∅,∅,∅)", (X <= E1) == (X <= E00))
    rep.add("(c) TransU: U(euttG(∅,∅,X,∅)) ⊑ euttG(∅,∅,X,X)", eng.U(E0) <= E1)
    for flags in ALL_FLAGS:
        F = bisimF(u, flags)
        elems = tower(F)
        cpn_E0 = companion(F, E0, elems=elems)
        cpn_Y = companion(F, Y, elems=elems)
        rep.add(f"(c) monotone cpn: cpn_F(Y) ⊑ cpn_F(euttG(∅,∅,X,∅)) [{flags}]", cpn_Y <= cpn_E0)
        tx = (u.state("tx1"), u.state("tx2"))
        rep.add(f"(c) (tau x1, tau x2) ∈ F(X) [{flags}]", tx in F(X))
        rep.add(f"(c) X ⊑ U(F(X)) ⊑ U(F(⊤)) = U(cpn_F(Y)) [{flags}]",
                X <= eng.U(F(X)) <= eng.U(F(u.top())) and eng.U(F(u.top())) == eng.U(cpn_Y))
        rep.add(f"(c) companion closure of euttG fails: cpn_F(euttG(∅,∅,X,∅)) ⋢ euttG(∅,∅,X,∅) [{flags}]",
                not cpn_E0 <= E0)
    rep.add("(c) conclusion X ⊑ ≈ is false", not X <= weak,
            "(vis 1 . eps, vis 2 . eps) are not weakly bisimilar")

    # (d) the kernel has no companion rule
    try:
        check_script(parse_system(COUNTEREXAMPLE_SYSTEM), REFUTING_SCRIPT)
    except KernelError as exc:
        rep.add("(d) kernel rejects a companion-closure step", exc.code == "companion-rule", str(exc))
    else:
        rep.add("(d) kernel rejects a companion-closure step", False, "script was accepted")
    return rep
