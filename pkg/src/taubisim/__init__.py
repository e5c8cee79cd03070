"""Finite-universe checker for up-to techniques on rational streams with silent steps."""

from .bisim import EUTT, OVER, STRONG, BisimFlags, bisimF, closure, eutt, euttF, over_approx, strong_bisim
from .euttg import Knowledge, companion_inconsistency_report, euttG, euttVC, verify_euttG_rules
from .gpaco import companion, gupaco, paco, verify_gpaco_laws
from .kernel import CheckResult, Kernel, KernelError, check_script
from .lattice import MonotoneOp, Rel, Universe, gfp, lfp
from .prf import load_script, parse_script
from .streams import build_universe, load_system, parse_system

__all__ = [
    "EUTT", "OVER", "STRONG", "BisimFlags", "bisimF", "closure", "eutt", "euttF", "over_approx",
    "strong_bisim", "Knowledge", "companion_inconsistency_report", "euttG", "euttVC", "verify_euttG_rules",
    "companion", "gupaco", "paco", "verify_gpaco_laws", "CheckResult", "Kernel", "KernelError",
    "check_script", "MonotoneOp", "Rel", "Universe", "gfp", "lfp", "load_script", "parse_script",
    "build_universe", "load_system", "parse_system",
]
