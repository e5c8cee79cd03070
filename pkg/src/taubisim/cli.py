"""
Command-line entry point.

Exit codes: 0 success, 1 proof rejected or property failed, 2 parse error,
3 resource cap, 4 audit mismatch.
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources

from . import report as figs
from .bisim import EUTT, OVER, RELATIONS, STRONG, bisim, bisimF, check_weak_compat, closure, euttF
from .euttg import companion_inconsistency_report
from .fuzz import euttg_fuzz, law_fuzz
from .kernel import Kernel, KernelError
from .lattice import FixpointBudgetExceeded
from .prf import load_script
from .streams import (GuardednessError, ParseError, StreamError, UniverseExplosion, build_universe,
                      load_system)

OK, FAILED, PARSE, CAP, AUDIT = 0, 1, 2, 3, 4
DEMOS = {
    "fig2": ("fig2.prf", True),
    "fig5": ("fig5.prf", True),
    "fig9": ("fig9.prf", True),
    "fig10": ("fig10.prf", True),
    "sec53": ("sec53.prf", False),
}


class Out:
    """Human prose or tab-delimited records, never both."""

    def __init__(self, fmt: str, stream=None):
        self.machine = fmt == "machine"
        self.stream = stream or sys.stdout

    def record(self, *fields) -> None:
        if self.machine:
            print("\t".join(str(f) for f in fields), file=self.stream)

    def say(self, text: str) -> None:
        if not self.machine:
            print(text, file=self.stream)

    def both(self, text: str, *fields) -> None:
        self.say(text)
        self.record(*fields)


def data_path(name: str) -> str:
    return str(resources.files("taubisim") / "data" / name)


# -- check ------------------------------------------------------------------

def run_check(system_path: str | None, prf_path: str, out: Out, cap=None) -> int:
    script = load_script(prf_path)
    if system_path is None:
        if script.system_path is None:
            raise ParseError("script names no system and none was given", 1, 1)
        system_path = os.path.join(os.path.dirname(prf_path), script.system_path)
    system = load_system(system_path)
    try:
        kernel = Kernel(system, assumptions=script.assumptions, cap=cap)
    except KernelError as exc:
        out.both(f"rejected: {exc}", "rejected", exc.code, exc.message, exc.witness or "-")
        return FAILED
    u = kernel.universe
    out.say(f"universe: {u.size} states")
    out.record("universe", u.size)
    res = kernel.run(script.flags, script.theorem, script.lets, script.steps)
    trace = res.state.trace if res.state else ()
    for entry in trace:
        out.say(f"  {entry.index:>3} {entry.rule:<10} ok   {kernel.describe(entry.goal)}")
        out.record("step", entry.index, entry.rule, "ok", "-")
    if not res.accepted:
        err = res.error
        if err.step is not None and err.step > len(trace):
            rule = script.steps[err.step - 1].rule if err.step <= len(script.steps) else "-"
            out.say(f"  {err.step:>3} {rule:<10} REJECTED")
            out.record("step", err.step, rule, "rejected", f"{err.code}: {err.message}", err.witness or "-")
        out.both(f"rejected: {err}", "result", "rejected", err.code)
        # a name the system does not define is an input error, not a failed proof
        return PARSE if err.code == "unknown-state" else FAILED
    audit = res.audit
    if not audit.ok:
        for idx, rule, pair in audit.mismatches:
            out.both(f"audit mismatch at step {idx} ({rule}): {pair}", "audit-mismatch", idx, rule, pair)
        out.both("audit: FAILED", "audit", "fail", audit.checked)
        return AUDIT
    out.both(f"audit: pass ({audit.checked} goals recomputed)", "audit", "pass", audit.checked)
    pairs = " ".join(f"{a},{b}" for a, b in script.theorem_pairs)
    out.both(f"proved: {script.relation} {pairs}", "result", "accepted", script.relation, pairs)
    return OK


# -- commands ---------------------------------------------------------------

def cmd_check(args, out: Out) -> int:
    return run_check(args.system, args.proof, out, args.cap)


def cmd_demo(args, out: Out) -> int:
    name, expect = DEMOS[args.name]
    out.say(f"demo {args.name}" + ("" if expect else " (this derivation must be rejected)"))
    out.record("demo", args.name, "accept" if expect else "reject")
    return run_check(None, data_path(name), out, args.cap)


def cmd_bisim(args, out: Out) -> int:
    system = load_system(args.system)
    u = build_universe(system, cap=args.cap)
    rel = bisim(u, RELATIONS[args.rel])
    for spec in args.pairs:
        try:
            a, b = spec.split(",")
            pair = (u.state(a.strip()), u.state(b.strip()))
        except (ValueError, KeyError):
            raise ParseError(f"bad pair {spec!r}; expected name,name over defined states", 1, 1) from None
        member = "true" if pair in rel else "false"
        out.say(member)
        out.record("pair", args.rel, a.strip(), b.strip(), member)
    if args.figures:
        path = figs.relation_heatmaps(u, {f"bisim{f}": bisim(u, f) for f in (STRONG, OVER, EUTT)},
                                      os.path.join(args.figures, "bisim.png"))
        out.both(f"figure: {path}", "figure", path)
    return OK


def cmd_laws_fuzz(args, out: Out) -> int:
    rep = law_fuzz(args.samples, args.seed, args.max_size)
    erep = euttg_fuzz(args.euttg_universes, args.euttg_samples, args.seed)
    ok = rep.ok and erep.ok
    for family, r in (("gpaco", rep.laws), ("euttG", erep)):
        for rule in sorted(set(r.passed) | set(r.skipped)):
            out.say(f"{family:<6} {rule:<12} passed {r.passed.get(rule, 0):>5}  skipped {r.skipped.get(rule, 0):>3}")
            out.record("law", family, rule, r.passed.get(rule, 0), r.skipped.get(rule, 0))
        for fail in r.failures:
            out.both(f"FAILURE {family} {fail.rule}: {fail.detail} witness {fail.witness}",
                     "failure", family, fail.rule, fail.detail, fail.witness)
    out.both(f"operators: {len(rep.operators)}  configurations: {rep.laws.configurations}"
             f"  euttG samples: {erep.configurations}",
             "summary", len(rep.operators), rep.laws.configurations, erep.configurations)
    if args.figures:
        for family, r in (("gpaco", rep.laws), ("euttg", erep)):
            path = figs.law_counts(r, os.path.join(args.figures, f"laws-{family}.png"), f"{family} rules")
            out.both(f"figure: {path}", "figure", path)
    out.both("result: " + ("pass" if ok else "FAIL"), "result", "pass" if ok else "fail")
    return OK if ok else FAILED


def cmd_companion(args, out: Out) -> int:
    rep = companion_inconsistency_report(args.samples, args.seed)
    for c in rep.checks:
        out.say(f"[{'pass' if c.passed else 'FAIL'}] {c.name}" + (f"  ({c.detail})" if c.detail else ""))
        out.record("check", c.name, "pass" if c.passed else "fail", c.detail or "-")
    for flags, size in rep.tower_sizes.items():
        out.both(f"tower size for bisimF{flags}: {size}", "tower", flags, size)
    if args.figures:
        from .euttg import counterexample_universe
        from .gpaco import companion
        u = counterexample_universe()
        F = bisimF(u, EUTT)
        Y = u.named_rel([("y1", "y2")])
        rels = {"F(⊤)": F(u.top()), "cpn_F(Y)": companion(F, Y), "≈": bisim(u, EUTT)}
        path = figs.relation_heatmaps(u, rels, os.path.join(args.figures, "companion.png"))
        out.both(f"figure: {path}", "figure", path)
        path = figs.tower_sizes(rep.tower_sizes, os.path.join(args.figures, "tower.png"))
        out.both(f"figure: {path}", "figure", path)
    out.both("result: " + ("pass" if rep.ok else "FAIL"), "result", "pass" if rep.ok else "fail")
    return OK if rep.ok else FAILED


def cmd_compat(args, out: Out) -> int:
    system = load_system(args.system)
    u = build_universe(system, cap=args.cap)
    rep = check_weak_compat(euttF(u), closure(u, args.bclo).op, args.samples, args.seed)
    if rep.ok:
        out.both(f"{args.bclo} weakly compatible for euttF over {rep.samples} samples",
                 "compat", args.bclo, "pass", rep.samples)
        return OK
    out.both(f"{args.bclo} NOT weakly compatible: witness {u.show(rep.witness)}, missing {u.show_pair(rep.missing)}",
             "compat", args.bclo, "fail", rep.samples, u.show(rep.witness), u.show_pair(rep.missing))
    return FAILED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("human", "machine"), default="human")
    common.add_argument("--cap", type=int, default=None, help="universe cap (default $TAUBISIM_UNIVERSE_CAP or 4096)")
    common.add_argument("--figures", metavar="DIR", default=None, help="also write figures to DIR")

    p = argparse.ArgumentParser(prog="taubisim", description="Coinductive equivalence of rational streams.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="check a proof script and audit it")
    c.add_argument("system")
    c.add_argument("proof")
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("bisim", parents=[common], help="decide membership in a bisimilarity")
    b.add_argument("system")
    b.add_argument("--rel", choices=sorted(RELATIONS), default="eutt")
    b.add_argument("--pairs", nargs="+", required=True, metavar="A,B")
    b.set_defaults(func=cmd_bisim)

    f = sub.add_parser("laws-fuzz", parents=[common], help="fuzz the gpaco and euttG rules")
    f.add_argument("--samples", type=int, default=500)
    f.add_argument("--seed", type=int, required=True)
    f.add_argument("--max-size", type=int, default=6)
    f.add_argument("--euttg-universes", type=int, default=5)
    f.add_argument("--euttg-samples", type=int, default=20)
    f.set_defaults(func=cmd_laws_fuzz)

    k = sub.add_parser("companion-check", parents=[common], help="companion counterexample report")
    k.add_argument("--samples", type=int, default=60)
    k.add_argument("--seed", type=int, default=0)
    k.set_defaults(func=cmd_companion)

    w = sub.add_parser("compat", parents=[common], help="sample weak compatibility of a base closure")
    w.add_argument("system")
    w.add_argument("--bclo", default="D")
    w.add_argument("--samples", type=int, default=1000)
    w.add_argument("--seed", type=int, default=0)
    w.set_defaults(func=cmd_compat)

    d = sub.add_parser("demo", parents=[common], help="replay a packaged derivation")
    d.add_argument("name", choices=sorted(DEMOS))
    d.set_defaults(func=cmd_demo)
    return p


def run(argv=None, stream=None) -> int:
    args = build_parser().parse_args(argv)
    out = Out(args.format, stream)
    try:
        return args.func(args, out)
    except (ParseError, GuardednessError) as exc:
        out.both(f"error: {exc}", "error", "parse", str(exc))
        return PARSE
    except OSError as exc:
        out.both(f"error: {exc}", "error", "io", str(exc))
        return PARSE
    except (UniverseExplosion, FixpointBudgetExceeded) as exc:
        out.both(f"error: {exc}", "error", "cap", str(exc))
        return CAP
    except StreamError as exc:
        out.both(f"error: {exc}", "error", "stream", str(exc))
        return PARSE


def main() -> None:
    sys.exit(run())
