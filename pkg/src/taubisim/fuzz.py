"""
Random generators for law fuzzing and kernel soundness testing.

Systems are drawn at random and kept only when guarded and small enough.
Functors are built from a small combinator language (constants, identity,
bisimF instances, pointwise join and meet, composition, pair relabelling)
so that the laws are exercised on operators that are neither additive nor
tied to streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bisim import ALL_FLAGS, EUTT, bisim, bisimF, closure
from .euttg import verify_euttG_rules
from .gpaco import LawFailure, LawReport, verify_gpaco_laws
from .kernel import Eutt, EuttG, Functor, Gpaco, Kernel, KernelError, ProofState, Step
from .lattice import MonotoneOp, Rel, identity, random_rel
from .streams import (Concat, Eps, EquationSystem, GuardednessError, StreamExpr, Tau,
                      UniverseExplosion, Var, Vis, build_universe, canonical, check_guarded)


# -- systems ----------------------------------------------------------------

def _expr(rng: np.random.Generator, names: list[str], labels: int, depth: int) -> StreamExpr:
    k = int(rng.integers(0, 6 if depth > 0 else 4))
    if k == 0:
        return Eps()
    if k == 3:
        return Var(names[int(rng.integers(len(names)))])
    sub = _expr(rng, names, labels, depth - 1) if depth > 0 else Var(names[int(rng.integers(len(names)))])
    if k == 1:
        return Tau(sub)
    if k == 2:
        return Vis(int(rng.integers(labels)), sub)
    if k == 4:
        return Concat(_expr(rng, names, labels, depth - 1), sub)
    return Tau(Var(names[int(rng.integers(len(names)))]))


def random_system(rng: np.random.Generator, n_vars: int = 4, labels: int = 2, depth: int = 2,
                  tries: int = 200) -> EquationSystem:
    """A guarded system over variables ``x0 .. x{n-1}``."""
    names = [f"x{i}" for i in range(n_vars)]
    for _ in range(tries):
        eqs = {n: _expr(rng, names, labels, depth) for n in names}
        system = EquationSystem(eqs, tuple(names))
        try:
            check_guarded(system)
        except GuardednessError:
            continue
        return system
    raise RuntimeError("could not draw a guarded system")


def random_universe(rng: np.random.Generator, max_size: int = 6, n_vars: int = 3, closures=(),
                    tries: int = 500):
    """A random universe with at most ``max_size`` states."""
    for _ in range(tries):
        system = random_system(rng, n_vars=n_vars, depth=int(rng.integers(1, 3)))
        roots = [r for r in system.roots if rng.random() < 0.6] or [system.roots[0]]
        try:
            return build_universe(system, roots, cap=max_size, closures=closures)
        except UniverseExplosion:
            continue
    raise RuntimeError(f"no universe of size <= {max_size} found")


# -- operators --------------------------------------------------------------

def _relabel(u, perm: np.ndarray):
    def apply(x: Rel) -> Rel:
        m = np.zeros_like(x.matrix)
        m[np.ix_(perm, perm)] = x.matrix
        return Rel(u, m)
    return apply


def random_functor(u, rng: np.random.Generator, depth: int = 2) -> MonotoneOp:
    """A monotone operator from the combinator language."""
    k = int(rng.integers(0, 3 if depth <= 0 else 7))
    if k == 0:
        c = random_rel(u, rng, 0.2)
        return MonotoneOp("const", u, lambda x: c)
    if k == 1:
        return identity(u)
    if k == 2:
        return bisimF(u, ALL_FLAGS[int(rng.integers(4))])
    f = random_functor(u, rng, depth - 1)
    if k == 6:
        perm = rng.permutation(u.size)
        move = _relabel(u, perm)
        return MonotoneOp(f"relabel({f.name})", u, lambda x: move(f(x)))
    g = random_functor(u, rng, depth - 1)
    if k == 3:
        return MonotoneOp(f"({f.name} ⊔ {g.name})", u, lambda x: f(x) | g(x))
    if k == 4:
        return MonotoneOp(f"({f.name} ⊓ {g.name})", u, lambda x: f(x) & g(x))
    return g.then(f)


def random_bclo(u, rng: np.random.Generator) -> MonotoneOp:
    k = int(rng.integers(0, 7))
    if k < 5:
        return closure(u, ("id", "D", "strong", "tauL", "U")[k]).op
    if k == 5:
        return MonotoneOp("sym", u, lambda x: x | x.transpose())
    perm = rng.permutation(u.size)
    move = _relabel(u, perm)
    return MonotoneOp("x ⊔ relabel(x)", u, lambda x: x | move(x))


@dataclass
class FuzzReport:
    laws: LawReport = field(default_factory=LawReport)
    operators: list[tuple[str, str, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.laws.ok


def law_fuzz(configurations: int = 500, seed: int = 0, max_size: int = 6, per_operator: int = 5) -> FuzzReport:
    """Run :func:`verify_gpaco_laws` until ``configurations`` samples are checked.

    The first four operators are the bisimF instances for every flag
    setting; the rest come from the combinator generator.
    """
    rng = np.random.default_rng(seed)
    out = FuzzReport()
    n = 0
    while out.laws.configurations < configurations:
        u = random_universe(rng, max_size)
        f = bisimF(u, ALL_FLAGS[n]) if n < 4 else random_functor(u, rng)
        bclo = random_bclo(u, rng)
        sub = verify_gpaco_laws(f, bclo, samples=per_operator, seed=int(rng.integers(2**31)))
        sub.failures = [LawFailure(x.rule, f"{x.detail} [f={f.name}, bclo={bclo.name}, |U|={u.size}]",
                                   x.witness) for x in sub.failures]
        out.laws.merge(sub)
        out.operators.append((f.name, bclo.name, u.size))
        n += 1
    return out


def euttg_fuzz(universes: int = 3, samples: int = 20, seed: int = 0, max_size: int = 12) -> LawReport:
    rng = np.random.default_rng(seed)
    report = LawReport()
    for _ in range(universes):
        u = random_universe(rng, max_size, closures=["concat"])
        report.merge(verify_euttG_rules(u, samples, int(rng.integers(2**31))))
    return report


# -- concatenation without ++ -----------------------------------------------

def sequence(u, left: int, right: str, tag: str) -> dict[str, StreamExpr]:
    """Definitions of a ``++``-free copy of ``left`` that continues as ``right``.

    Each state reachable from ``left`` gets a fresh variable whose body is
    its head observation; ``eps`` becomes an alias of ``right``.
    """
    seen, todo = {left}, [left]
    while todo:
        i = todo.pop()
        j = int(u.succ[i])
        if j >= 0 and j not in seen:
            seen.add(j)
            todo.append(j)
    defs = {}
    for i in sorted(seen):
        name = f"{tag}{i}"
        if u.kind[i] == 0:
            defs[name] = Var(right)
        elif u.kind[i] == 1:
            defs[name] = Tau(Var(f"{tag}{int(u.succ[i])}"))
        else:
            defs[name] = Vis(int(u.label[i]), Var(f"{tag}{int(u.succ[i])}"))
    return defs


def seq_var(system: EquationSystem, left: str, right: str, tag: str, cap: int = 4096):
    """Extend ``system`` with a ``++``-free presentation of ``left ++ right``."""
    u = build_universe(system, [left], cap=cap)
    defs = sequence(u, u.state(left), right, tag)
    return system.extend(defs), f"{tag}{u.state(left)}"


# -- random accepted proofs -------------------------------------------------

def _candidates(kernel: Kernel, state: ProofState, goal, rng, fresh: str):
    t = goal.target
    u = kernel.universe
    steps = []
    if isinstance(t, Eutt):
        steps += [Step("done"), Step("init", ("gpaco", "id"))]
        if t.flags == EUTT:
            steps += [Step("init", ("gpaco", "D")), Step("init", ("euttg",))]
    elif isinstance(t, Gpaco):
        steps += [Step("base"), Step("acc", (fresh,)), Step("step"), Step("final")]
        for name in ("tauL", "strong", "D"):
            for rel in (t.r, t.g):
                if rel:
                    steps.append(Step("closure", (name, rel)))
    elif isinstance(t, Functor):
        steps += [Step(r) for r in ("ret", "tau_step", "vis", "tau_left", "tau_right")]
    else:
        k = t.k
        steps += [Step("base"), Step("acc", (fresh,)), Step("ret"), Step("tau_step"),
                  Step("beta_step"), Step("final")]
        for rel in {k.rb.key: k.rb, k.rt.key: k.rt, k.gb.key: k.gb}.values():
            if rel:
                steps += [Step("transD", (rel,)), Step("transU", (rel,))]
    if len(goal.subject) > 1:
        steps.append(Step("split"))
    order = rng.permutation(len(steps))
    return [steps[i] for i in order]


def random_proof(kernel: Kernel, flags, theorem: Rel, rng: np.random.Generator,
                 max_depth: int = 14, budget: int = 400):
    """Depth-first random proof search with backtracking.

    Returns the list of steps of an accepted proof, or None.
    """
    counter = [0]

    def search(state: ProofState, depth: int, steps: list):
        if state.done:
            return steps
        if depth >= max_depth or counter[0] >= budget:
            return None
        goal = state.goals[0]
        for step in _candidates(kernel, state, goal, rng, f"A{depth}"):
            counter[0] += 1
            if counter[0] >= budget:
                return None
            try:
                nxt = kernel.apply(state, step)
            except KernelError:
                continue
            found = search(nxt, depth + 1, steps + [step])
            if found is not None:
                return found
        return None

    return search(kernel.start(flags, theorem), 0, [])


def random_theorem(kernel: Kernel, flags, rng: np.random.Generator, true_bias: float = 0.8):
    """A singleton theorem over named states, usually a true one."""
    u = kernel.universe
    named = sorted(set(u.names.values()))
    rel = bisim(u, flags)
    want = rng.random() < true_bias
    pool = [(i, j) for i in named for j in named if i != j and want == ((i, j) in rel)]
    if not pool:
        pool = [(i, j) for i in named for j in named]
    i, j = pool[int(rng.integers(len(pool)))]
    return u.rel([(i, j)])


def kernel_for(system: EquationSystem, cap: int = 60) -> Kernel:
    return Kernel(system, cap=cap, samples=40)


def canonical_state(u, e: StreamExpr) -> int:
    return u.index[canonical(e, u.system)]
