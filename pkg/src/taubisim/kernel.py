"""
A checked proof-rule engine for gpaco and euttG judgments.

A goal says that a concrete pair set (the *subject*) is included in a target:
a bisimilarity, a gpaco value, a functor applied to one, or an euttG value.
Rules replace the top goal by its premises after checking every side
condition on the finite universe.  Accepted proofs are audited: each goal
ever worked on is compared against the directly computed target.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .bisim import (CLOSURE_NAMES, EUTT, BisimFlags, bisim, bisimF, check_weak_compat, closure,
                    compat_samples)
from .euttg import Knowledge, engine
from .gpaco import GpacoInstance
from .lattice import Rel
from .streams import EquationSystem, StreamUniverse, build_universe


class KernelError(Exception):
    """A rejected rule application.  ``code`` classifies the failure."""

    def __init__(self, code: str, message: str, step: int | None = None, line: int | None = None,
                 witness: str | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.step = step
        self.line = line
        self.witness = witness

    def __str__(self) -> str:
        where = f"step {self.step}" if self.step is not None else "session"
        if self.line is not None:
            where += f" (line {self.line})"
        tail = f"; witness {self.witness}" if self.witness else ""
        return f"{where}: {self.code}: {self.message}{tail}"


# -- targets and goals ------------------------------------------------------

@dataclass(frozen=True)
class Eutt:
    flags: BisimFlags


@dataclass(frozen=True)
class Gpaco:
    flags: BisimFlags
    bclo: str
    r: Rel
    g: Rel


@dataclass(frozen=True)
class EuttG:
    k: Knowledge


@dataclass(frozen=True)
class Functor:
    flags: BisimFlags
    inner: Gpaco


Target = Union[Eutt, Gpaco, EuttG, Functor]


@dataclass(frozen=True)
class Goal:
    subject: Rel
    target: Target


@dataclass(frozen=True)
class RelLiteral:
    pairs: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Step:
    rule: str
    args: tuple = ()
    line: int | None = None


@dataclass(frozen=True)
class TraceEntry:
    index: int
    rule: str
    goal: Goal
    produced: tuple[Goal, ...]


@dataclass(frozen=True)
class ProofState:
    goals: tuple[Goal, ...]
    bindings: dict = field(default_factory=dict)
    trace: tuple[TraceEntry, ...] = ()

    @property
    def done(self) -> bool:
        return not self.goals


@dataclass
class AuditReport:
    checked: int = 0
    mismatches: list[tuple[int, str, str]] = field(default_factory=list)
    theorem_ok: bool = True

    @property
    def ok(self) -> bool:
        return self.theorem_ok and not self.mismatches


@dataclass
class CheckResult:
    accepted: bool
    state: ProofState | None
    error: KernelError | None = None
    audit: AuditReport | None = None


# which closures are known to lie below gupaco(f, bclo), by lemma rather than sampling
_BELOW_BASE = {
    "id": {"id"},
    "D": {"id", "D", "tauL", "strong"},
    "strong": {"id", "strong"},
    "tauL": {"id", "tauL"},
}
_CONTEXT_LEMMAS = {(EUTT, "D"): {"concat", "prefix"}}
_COMPAT_LEMMAS = {(EUTT, "D")}
_EUTTG_CLOSURES = {"D", "tauL", "strong"}
_EUTTG_CONCAT = {"concat", "prefix"}


def _fmt_target(u: StreamUniverse, t: Target) -> str:
    if isinstance(t, Eutt):
        return f"bisim{t.flags}"
    if isinstance(t, Gpaco):
        return f"gpaco(bisimF{t.flags}, {t.bclo}, {u.show(t.r)}, {u.show(t.g)})"
    if isinstance(t, Functor):
        return f"bisimF{t.flags}({_fmt_target(u, t.inner)})"
    k = t.k
    return f"euttG({u.show(k.rb)}, {u.show(k.rt)}, {u.show(k.gb)}, {u.show(k.gt)})"


class ClosureRegistry:
    """Justifications for the premise ``clo ⊑ gupaco(f, bclo)`` of rule Closure."""

    def __init__(self, kernel: "Kernel"):
        self.kernel = kernel
        self.entries: dict[tuple, str] = {}

    def justify(self, flags: BisimFlags, bclo: str, name: str) -> str:
        key = (flags, bclo, name)
        if key in self.entries:
            return self.entries[key]
        k = self.kernel
        u = k.universe
        inst = k.instance(flags, bclo)
        clo = closure(u, name).op
        lemma = name == bclo or name in _BELOW_BASE.get(bclo, ()) \
            or name in _CONTEXT_LEMMAS.get((flags, bclo), ())
        n = max(20, k.samples // 4) if lemma else k.samples
        rng = np.random.default_rng(k.seed)
        for x in compat_samples(u, rng, n):
            miss = clo(x).first_missing(inst.gupaco(x))
            if miss is not None:
                raise KernelError("registry", f"closure {name} is not below gupaco(bisimF{flags}, {bclo})",
                                  witness=u.show_pair(miss))
        self.entries[key] = "builtin-lemma" if lemma else f"sampled-check(seed={k.seed}, samples={n})"
        return self.entries[key]


class Kernel:
    """One proof session over one universe."""

    def __init__(self, system: EquationSystem, roots=None, closures=("concat",),
                 assumptions=(), cap: int | None = None, samples: int = 200, seed: int = 0):
        self.universe = build_universe(system, roots, cap=cap, closures=closures)
        self.samples = samples
        self.seed = seed
        self.registry = ClosureRegistry(self)
        self._instances: dict = {}
        self._certified: dict = {}
        self._semantic: dict = {}
        u = self.universe
        assumed = self.relation(RelLiteral(tuple(assumptions)))
        miss = assumed.first_missing(bisim(u, EUTT))
        if miss is not None:
            raise KernelError("assumption", "assumed equation does not hold", witness=u.show_pair(miss))
        self.assumed = assumed | assumed.transpose()

    # -- helpers ------------------------------------------------------------

    def relation(self, lit: RelLiteral) -> Rel:
        u = self.universe
        try:
            return u.named_rel(lit.pairs)
        except KeyError as exc:
            raise KernelError("unknown-state", str(exc.args[0])) from None

    def instance(self, flags: BisimFlags, bclo: str) -> GpacoInstance:
        key = (flags, bclo)
        if key not in self._instances:
            u = self.universe
            self._instances[key] = GpacoInstance(bisimF(u, flags), closure(u, bclo).op)
        return self._instances[key]

    def semantic(self, t: Target) -> Rel:
        key = self._target_key(t)
        if key not in self._semantic:
            self._semantic[key] = self._evaluate(t)
        return self._semantic[key]

    def _target_key(self, t: Target) -> tuple:
        if isinstance(t, Eutt):
            return ("eutt", t.flags)
        if isinstance(t, Gpaco):
            return ("gpaco", t.flags, t.bclo, t.r.key, t.g.key)
        if isinstance(t, Functor):
            return ("functor", t.flags) + self._target_key(t.inner)
        return ("euttg",) + t.k.key

    def _evaluate(self, t: Target) -> Rel:
        u = self.universe
        if isinstance(t, Eutt):
            return bisim(u, t.flags)
        if isinstance(t, Gpaco):
            return self.instance(t.flags, t.bclo).gpaco(t.r, t.g)
        if isinstance(t, Functor):
            return bisimF(u, t.flags)(self.semantic(t.inner))
        return engine(u).euttG(t.k)

    def unlocked(self, k: Knowledge) -> Rel:
        return k.rb | k.rt

    def certify(self, flags: BisimFlags, bclo: str) -> str:
        key = (flags, bclo)
        if key not in self._certified:
            if bclo == "id" or key in _COMPAT_LEMMAS:
                self._certified[key] = "builtin-lemma"
            else:
                u = self.universe
                rep = check_weak_compat(bisimF(u, flags), closure(u, bclo).op, self.samples, self.seed)
                if not rep.ok:
                    raise KernelError("no-certificate",
                                      f"{bclo} is not weakly compatible for bisimF{flags}",
                                      witness=u.show(rep.witness))
                self._certified[key] = f"sampled-check(seed={self.seed}, samples={rep.samples})"
        return self._certified[key]

    def describe(self, goal: Goal) -> str:
        u = self.universe
        return f"{u.show(goal.subject)} ⊆ {_fmt_target(u, goal.target)}"

    # -- session ------------------------------------------------------------

    def start(self, flags: BisimFlags, theorem: RelLiteral | Rel, lets: dict | None = None) -> ProofState:
        bindings = {name: self.relation(lit) for name, lit in (lets or {}).items()}
        subject = theorem if isinstance(theorem, Rel) else self.relation(theorem)
        return ProofState((Goal(subject, Eutt(flags)),), bindings)

    def arg_rel(self, state: ProofState, arg) -> Rel:
        if isinstance(arg, Rel):
            return arg
        if isinstance(arg, RelLiteral):
            return self.relation(arg)
        if arg in state.bindings:
            return state.bindings[arg]
        raise KernelError("binding", f"unbound relation name {arg}")

    def apply(self, state: ProofState, step: Step, index: int | None = None) -> ProofState:
        index = len(state.trace) + 1 if index is None else index
        if not state.goals:
            raise KernelError("no-goal", f"no goal left for rule {step.rule}", index, step.line)
        goal, rest = state.goals[0], state.goals[1:]
        try:
            produced, bindings = self._rule(state, goal, step)
        except KernelError as exc:
            exc.step, exc.line = index, step.line
            raise
        entry = TraceEntry(index, step.rule, goal, tuple(produced))
        return ProofState(tuple(produced) + rest, bindings, state.trace + (entry,))

    def _need(self, cond: bool, code: str, msg: str, witness=None) -> None:
        if not cond:
            u = self.universe
            raise KernelError(code, msg, witness=u.show_pair(witness) if witness else None)

    def _include(self, lhs: Rel, rhs: Rel, msg: str) -> None:
        miss = lhs.first_missing(rhs)
        self._need(miss is None, "side-condition", msg, miss)

    def _rule(self, state: ProofState, goal: Goal, step: Step):
        rule, args = step.rule, step.args
        t = goal.target
        method = getattr(self, "_r_" + rule, None)
        if rule in ("cpn", "companion") or (rule == "closure" and args and args[0] in ("cpn", "companion")):
            raise KernelError("companion-rule",
                              "there is no companion closure rule: closing euttG under the companion "
                              "proves (vis 1 . eps, vis 2 . eps) weakly bisimilar")
        if method is None:
            raise KernelError("unknown-rule", f"unknown rule {rule!r}")
        return method(state, goal, t, list(args))

    # -- rules --------------------------------------------------------------

    def _r_init(self, state, goal, t, args):
        self._need(isinstance(t, Eutt), "shape", "init applies to a bisimilarity goal")
        kind = args[0] if args else "gpaco"
        if kind == "euttg":
            self._need(t.flags == EUTT, "shape", "euttG only proves weak bisimilarity")
            return [Goal(goal.subject, EuttG(Knowledge.empty(self.universe)))], state.bindings
        self._need(kind == "gpaco", "shape", f"init takes gpaco or euttg, not {kind}")
        bclo = args[1] if len(args) > 1 else "id"
        self._need(bclo in CLOSURE_NAMES, "registry-miss", f"unknown base closure {bclo}")
        self._need(closure(self.universe, bclo).context == "anywhere", "context-tag",
                   f"{bclo} is a beta-only closure and cannot be a base closure")
        self.certify(t.flags, bclo)
        bot = self.universe.bottom()
        return [Goal(goal.subject, Gpaco(t.flags, bclo, bot, bot))], state.bindings

    def _r_acc(self, state, goal, t, args):
        bindings = state.bindings
        if args:
            arg = args[0]
            if isinstance(arg, (Rel, RelLiteral)) or arg in bindings:
                bound = self.arg_rel(state, arg)
                self._need(bound == goal.subject, "binding",
                           f"acc {arg if isinstance(arg, str) else 'literal'} does not name the subject "
                           f"{self.universe.show(goal.subject)}")
            else:
                bindings = dict(bindings)
                bindings[arg] = goal.subject
        x = goal.subject
        if isinstance(t, Gpaco):
            return [Goal(x, replace(t, g=t.g | x))], bindings
        if isinstance(t, EuttG):
            return [Goal(x, EuttG(t.k.acc(x)))], bindings
        raise KernelError("shape", "acc applies to gpaco and euttG goals")

    def _r_base(self, state, goal, t, args):
        if isinstance(t, Gpaco):
            self._include(goal.subject, t.r, "subject is not in the available knowledge")
        elif isinstance(t, EuttG):
            self._include(goal.subject, self.unlocked(t.k), "subject is not in rβ ∪ rτ")
        else:
            raise KernelError("shape", "base applies to gpaco and euttG goals")
        return [], state.bindings

    def _r_final(self, state, goal, t, args):
        if isinstance(t, Gpaco):
            # r ⊔ paco(f, g) ⊑ gpaco and paco(f, ⊥) ⊑ paco(f, g)
            rest = goal.subject - t.r
            return ([Goal(rest, Eutt(t.flags))] if rest else []), state.bindings
        if isinstance(t, EuttG):
            return [Goal(goal.subject, Eutt(EUTT))], state.bindings
        raise KernelError("shape", "final applies to gpaco and euttG goals")

    def _r_step(self, state, goal, t, args):
        self._need(isinstance(t, Gpaco), "shape", "step applies to gpaco goals")
        return [Goal(goal.subject, Functor(t.flags, replace(t, r=t.g)))], state.bindings

    def _heads(self, subject: Rel, left: int | None, right: int | None, rule: str):
        u = self.universe
        for i, j in subject.pairs():
            ok = (left is None or u.kind[i] == left) and (right is None or u.kind[j] == right)
            if ok and left == right == 2:
                ok = u.label[i] == u.label[j]
            self._need(ok, "shape", f"{rule} does not match the heads of every subject pair", (i, j))

    def _successors(self, subject: Rel, left: bool, right: bool) -> Rel:
        u = self.universe
        return u.rel((int(u.succ[i]) if left else i, int(u.succ[j]) if right else j)
                     for i, j in subject.pairs())

    def _r_ret(self, state, goal, t, args):
        self._need(isinstance(t, (Functor, EuttG)), "shape", "ret applies under the functor or to euttG goals")
        self._heads(goal.subject, 0, 0, "ret")
        return [], state.bindings

    def _r_tau_step(self, state, goal, t, args):
        self._heads(goal.subject, 1, 1, "tau_step")
        nxt = self._successors(goal.subject, True, True)
        if isinstance(t, Functor):
            return [Goal(nxt, t.inner)], state.bindings
        if isinstance(t, EuttG):
            return [Goal(nxt, EuttG(t.k.after_tau()))], state.bindings
        raise KernelError("shape", "tau_step applies under the functor or to euttG goals")

    def _r_beta_step(self, state, goal, t, args):
        self._heads(goal.subject, 2, 2, "beta_step")
        nxt = self._successors(goal.subject, True, True)
        if isinstance(t, Functor):
            return [Goal(nxt, t.inner)], state.bindings
        if isinstance(t, EuttG):
            return [Goal(nxt, EuttG(t.k.after_beta()))], state.bindings
        raise KernelError("shape", "beta_step applies under the functor or to euttG goals")

    _r_vis = _r_beta_step

    def _r_tau_left(self, state, goal, t, args):
        self._need(isinstance(t, Functor), "shape", "tau_left applies under the functor")
        self._need(t.flags.bL, "shape", f"bisimF{t.flags} has no left tau rule")
        self._heads(goal.subject, 1, None, "tau_left")
        return [Goal(self._successors(goal.subject, True, False), t)], state.bindings

    def _r_tau_right(self, state, goal, t, args):
        self._need(isinstance(t, Functor), "shape", "tau_right applies under the functor")
        self._need(t.flags.bR, "shape", f"bisimF{t.flags} has no right tau rule")
        self._heads(goal.subject, None, 1, "tau_right")
        return [Goal(self._successors(goal.subject, False, True), t)], state.bindings

    def _rewrite(self, state, goal, name: str, args, target: Target):
        self._need(len(args) == 1, "shape", f"{name} needs exactly one relation argument")
        new = self.arg_rel(state, args[0])
        self._include(goal.subject, closure(self.universe, name).op(new),
                      f"subject is not in {name}({self.universe.show(new)})")
        return [Goal(new, target)], state.bindings

    def _r_closure(self, state, goal, t, args):
        self._need(len(args) >= 1, "shape", "closure needs a closure name")
        name, rest = args[0], args[1:]
        self._need(isinstance(name, str) and name in CLOSURE_NAMES, "registry-miss",
                   f"no registered closure {name}")
        spec = closure(self.universe, name)
        if isinstance(t, Gpaco):
            self._need(spec.context == "anywhere", "context-tag",
                       f"Closure({name}) is tagged beta-only and is never admitted on a gpaco goal")
            self.registry.justify(t.flags, t.bclo, name)
            return self._rewrite(state, goal, name, rest, t)
        if isinstance(t, EuttG):
            self._need(spec.context == "anywhere", "context-tag",
                       f"Closure({name}) is tagged beta-only; on euttG goals use transU")
            self._need(name in _EUTTG_CLOSURES | _EUTTG_CONCAT, "registry-miss",
                       f"{name} is not known to be sound for euttG")
            return self._rewrite(state, goal, name, rest, t)
        raise KernelError("shape", "closure applies to gpaco and euttG goals")

    def _r_transD(self, state, goal, t, args):
        self._need(isinstance(t, EuttG), "shape", "transD applies to euttG goals")
        return self._rewrite(state, goal, "D", args, t)

    def _r_concatC(self, state, goal, t, args):
        self._need(isinstance(t, EuttG), "shape", "concatC applies to euttG goals")
        return self._rewrite(state, goal, "concat", args, t)

    def _r_transU(self, state, goal, t, args):
        self._need(isinstance(t, EuttG), "shape", "transU applies to euttG goals")
        return self._rewrite(state, goal, "U", args, EuttG(t.k.for_trans_u()))

    def _r_split(self, state, goal, t, args):
        subject = goal.subject
        if not args:
            parts = [self.universe.rel([p]) for p in subject.pairs()]
        else:
            parts = [self.arg_rel(state, a) & subject for a in args]
            cover = self.universe.bottom()
            for p in parts:
                cover = cover | p
            self._include(subject, cover, "split parts do not cover the subject")
        return [Goal(p, t) for p in parts], state.bindings

    def _r_done(self, state, goal, t, args):
        if goal.subject:
            self._need(isinstance(t, Eutt), "shape", "done closes only bisimilarity goals or empty subjects")
            known = self.universe.diagonal()
            if t.flags == EUTT:
                known = known | self.assumed
            self._include(goal.subject, known, "subject is neither reflexive nor assumed")
        return [], state.bindings

    # -- running and auditing ----------------------------------------------

    def run(self, flags: BisimFlags, theorem, lets: dict, steps) -> CheckResult:
        state = None
        try:
            state = self.start(flags, theorem, lets)
            for n, step in enumerate(steps, start=1):
                state = self.apply(state, step, n)
            if state.goals:
                raise KernelError("unfinished", f"{len(state.goals)} goal(s) left open: "
                                  + self.describe(state.goals[0]))
        except KernelError as exc:
            return CheckResult(False, state, exc)
        return CheckResult(True, state, None, self.audit(state, flags, theorem))

    def audit(self, state: ProofState, flags: BisimFlags, theorem) -> AuditReport:
        rep = AuditReport()
        u = self.universe
        for entry in state.trace:
            rep.checked += 1
            miss = entry.goal.subject.first_missing(self.semantic(entry.goal.target))
            if miss is not None:
                rep.mismatches.append((entry.index, entry.rule, u.show_pair(miss)))
        thm = theorem if isinstance(theorem, Rel) else self.relation(theorem)
        rep.theorem_ok = thm <= bisim(u, flags)
        return rep


class BaseReadsGuarded(Kernel):
    """A deliberately unsound kernel whose euttG Base rule reads gτ for rτ."""

    def unlocked(self, k: Knowledge) -> Rel:
        return k.rb | k.gt


def check_script(system: EquationSystem, text: str, kernel_cls=Kernel, **kw) -> CheckResult:
    """Parse and check a proof script against an already loaded system.

    Raises :class:`KernelError` when the script is rejected.
    """
    from .prf import parse_script

    script = parse_script(text)
    kernel = kernel_cls(system, assumptions=script.assumptions, **kw)
    res = kernel.run(script.flags, script.theorem, script.lets, script.steps)
    if not res.accepted:
        raise res.error
    return res
