"""Command line front end.

Exit codes: 0 when every check passes, 1 for bad input or a violated
precondition, 2 when a verification check fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Any, Sequence

from . import dimgroups as dg
from .adic import InvariantMeasure, OdometerSystem, format_clopen, format_rational, is_minimal_power, parse_clopen, parse_word
from .report import PreconditionError, Report
from .speedup import (
    PrefixHomeomorphism,
    conjugacy_stage,
    construct_bijection,
    construct_injection,
    parse_map,
    power_speedup,
    verify_speedup,
)
from .towers import tower_over_base

SCHEMA = "cantorspeed.report/v1"
OK, PRECONDITION, VERIFICATION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits with 2 by default
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    bases: tuple[int, ...] = (2,)
    depth: int = 12
    stages: int = 3
    fmt: str = "text"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError("--depth must be >= 1")
        if self.stages < 1:
            raise ValueError("--stages must be >= 1")
        if any(b < 2 for b in self.bases):
            raise ValueError("--base entries must be >= 2")

    @property
    def system(self) -> OdometerSystem:
        return OdometerSystem(self.bases)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunConfig:
        bases = tuple(int(t) for t in str(getattr(args, "base", "2")).split(",") if t.strip())
        return cls(bases, getattr(args, "depth", 12), getattr(args, "stages", 3), args.format, args.seed)


class Output:
    def __init__(self, config: RunConfig, command: str) -> None:
        self.config = config
        self.doc: dict[str, Any] = {"schema": SCHEMA, "command": command, "bases": list(config.bases)}
        self.text: list[str] = []

    def line(self, s: str = "") -> None:
        self.text.append(s)

    def emit(self, ok: bool) -> int:
        self.doc["ok"] = ok
        if self.config.fmt == "structured":
            print(json.dumps(self.doc, indent=2, ensure_ascii=False))
        else:
            print("\n".join(self.text))
            print("all checks passed" if ok else "verification FAILED")
        return OK if ok else VERIFICATION


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--base", default="2", help="comma-separated digit bases, one period (default 2)")
    p.add_argument("--format", choices=("text", "structured"), default="text")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cantorspeed", description="Towers, speedups and dimension groups for adic odometers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("tower", help="tower partition over a clopen base")
    _common(t)
    t.add_argument("--set", required=True, help="base as comma-separated words, e.g. 00")

    s = sub.add_parser("speedup", help="construct or verify speedup maps")
    ssub = s.add_subparsers(dest="action", required=True, parser_class=_Parser)
    c = ssub.add_parser("construct", help="injection of A into B (μ(A) < μ(B))")
    _common(c)
    c.add_argument("--A", required=True)
    c.add_argument("--B", required=True)
    b = ssub.add_parser("bijection", help="truncated bijection of A onto B (μ(A) = μ(B))")
    _common(b)
    b.add_argument("--A", required=True)
    b.add_argument("--B", required=True)
    b.add_argument("--stages", type=int, default=3)
    b.add_argument("--depth-step", type=int, default=2)
    pw = ssub.add_parser("power", help="T^k as a speedup, verified at depths 1..--depth")
    _common(pw)
    pw.add_argument("-k", type=int, required=True)
    pw.add_argument("--depth", type=int, default=12)
    v = ssub.add_parser("verify", help="verify a map given as '<words> -> jump <k>' lines")
    _common(v)
    v.add_argument("--map", required=True, help="lines separated by ';' or newlines")
    v.add_argument("--A", required=True, help="expected domain")
    v.add_argument("--B", help="expected image (exact)")
    v.add_argument("--depth", type=int, default=1)
    cj = ssub.add_parser("conjugacy", help="first tower-copy stage with the identity homeomorphism")
    _common(cj)
    cj.add_argument("--a0", required=True, help="word whose cylinder is A0")
    cj.add_argument("--depth", type=int, default=3, help="depth of the tower base in the second copy")
    cj.add_argument("--stages", type=int, default=1)

    d = sub.add_parser("dimgroup", help="ordered groups and the speedup gate")
    dsub = d.add_subparsers(dest="action", required=True, parser_class=_Parser)
    for name, helptext in (("states", "extreme states"), ("inf", "infinitesimals"), ("axioms", "sampled axioms")):
        p = dsub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--spec", required=True, help='e.g. "rank=2 denoms=2,2 cone=strict unit=1,1"')
    g = dsub.add_parser("gate", help="surjective unital φ: FROM ->> TO with φ(FROM+) = TO+")
    _common(g)
    g.add_argument("--from", dest="source", required=True)
    g.add_argument("--to", dest="target", required=True)
    bw = dsub.add_parser("both", help="gates in both directions and an isomorphism search")
    _common(bw)
    bw.add_argument("--g1", required=True)
    bw.add_argument("--g2", required=True)
    e6 = dsub.add_parser("example6", help="Z[1/2]^2 strict versus the dyadic odometer")
    _common(e6)
    return parser


# ---------------------------------------------------------------- commands


def cmd_tower(config: RunConfig, base_set: str) -> int:
    system = config.system
    m = InvariantMeasure(system)
    base = parse_clopen(system, base_set)
    tower = tower_over_base(m, base)
    rep = tower.check()
    mass = tower.mass(m)
    rep.add("mass_is_one", mass == 1, f"Σ h·μ(base) = {format_rational(mass)}")
    out = Output(config, "tower")
    out.line(tower.summary())
    for line in tower.report_lines():
        out.line(line)
    out.text += rep.lines()
    out.doc.update(
        summary=tower.summary(),
        columns=[{"base": format_clopen(c.base), "height": c.height} for c in tower.columns],
        report=rep.to_dict(),
    )
    return out.emit(rep.ok)


def _map_block(out: Output, smap, rep: Report) -> None:
    out.line("map:")
    for line in smap.lines():
        out.line("  " + line)
    out.line("verification:")
    out.text += rep.lines()
    out.doc["map"] = smap.to_dict()
    out.doc["lines"] = smap.lines()
    out.doc["report"] = rep.to_dict()


def cmd_speedup(config: RunConfig, action: str, args: argparse.Namespace) -> int:
    system = config.system
    m = InvariantMeasure(system)
    out = Output(config, f"speedup {action}")
    if action == "power":
        depth = args.depth
        smap = power_speedup(m, args.k, depth)
        whole = system.whole()
        per_depth = []
        ok = True
        for d in range(1, depth + 1):
            rep = verify_speedup(smap, whole, whole, depth=d)
            minimal = is_minimal_power(system, args.k, d)
            ok = ok and rep.ok and minimal
            per_depth.append({"depth": d, "checks_ok": rep.ok, "orbit_minimal": minimal})
        _map_block(out, smap, rep)
        out.line(f"depths 1..{depth}: " + ("all checks pass, orbit oracle confirms minimality" if ok else "FAILED"))
        out.doc["depths"] = per_depth
        return out.emit(ok)
    if action == "construct":
        a, b = parse_clopen(system, args.A), parse_clopen(system, args.B)
        smap = construct_injection(m, a, b)
        rep = verify_speedup(smap, a, image_within=b)
        _map_block(out, smap, rep)
        return out.emit(rep.ok)
    if action == "bijection":
        a, b = parse_clopen(system, args.A), parse_clopen(system, args.B)
        smap, ledger = construct_bijection(m, a, b, args.stages, args.depth_step)
        rep = verify_speedup(smap, a - ledger.residual_a, b - ledger.residual_b)
        lrep = ledger.check()
        _map_block(out, smap, rep)
        out.line("stages:")
        for r in ledger.records:
            out.line(f"  {r.stage}: A={format_clopen(r.a)} B={format_clopen(r.b)} μ={format_rational(m(r.a))}")
        out.line(f"residual μ(A_k) = {format_rational(ledger.residual())}; limit point pair y = T^{ledger.n} x")
        out.text += lrep.lines()
        out.doc["ledger"] = ledger.to_dict()
        out.doc["ledger_report"] = lrep.to_dict()
        return out.emit(rep.ok and lrep.ok)
    if action == "verify":
        smap = parse_map(system, args.map)
        a = parse_clopen(system, args.A)
        b = parse_clopen(system, args.B) if args.B else None
        rep = verify_speedup(smap, a, b, depth=args.depth)
        _map_block(out, smap, rep)
        return out.emit(rep.ok)
    if action == "conjugacy":
        stage = conjugacy_stage(m, m, PrefixHomeomorphism.identity(system), parse_word(args.a0), args.depth, args.stages)
        rep = stage.check()
        out.line("copied tower:")
        for i, col in enumerate(stage.levels):
            out.line(f"  column {i}: " + " | ".join(format_clopen(lv) for lv in col))
        _map_block(out, stage.speedup, rep)
        out.line("Φ0:")
        for line in stage.phi_lines():
            out.line("  " + line)
        out.doc["levels"] = [[format_clopen(lv) for lv in col] for col in stage.levels]
        out.doc["phi"] = stage.phi_lines()
        return out.emit(rep.ok)
    raise UsageError(f"unknown speedup action {action!r}")


def cmd_dimgroup(config: RunConfig, action: str, args: argparse.Namespace) -> int:
    out = Output(config, f"dimgroup {action}")
    if action == "example6":
        ex = dg.example6(seed=config.seed)
        out.text += ex.lines()
        out.doc.update(ex.to_dict())
        return out.emit(ex.ok)
    if action in ("states", "inf", "axioms"):
        g = dg.OrderedGroup.parse(args.spec)
        out.doc["group"] = g.spec()
        out.line(f"group {g}")
        if action == "states":
            sts = dg.states(g)
            rep = dg.check_states(g, seed=config.seed)
            out.line(f"{len(sts)} extreme state{'s' if len(sts) != 1 else ''}: " + ", ".join(map(str, sts)))
            out.text += rep.lines()
            out.doc.update(state_count=len(sts), states=[[dg._fmt_num(c) for c in s.coeffs] for s in sts], report=rep.to_dict())
            return out.emit(rep.ok)
        if action == "inf":
            inf = dg.infinitesimals(g)
            out.line(f"Inf(G) = {inf.describe()}")
            out.doc["infinitesimals"] = inf.describe()
            return out.emit(True)
        rep = dg.check_axioms(g, seed=config.seed)
        out.text += rep.lines()
        out.doc["report"] = rep.to_dict()
        return out.emit(rep.ok)
    if action == "gate":
        res = dg.gate(dg.OrderedGroup.parse(args.source), dg.OrderedGroup.parse(args.target))
        out.text += res.lines()
        out.doc["gate"] = res.to_dict()
        # a gate that provably does not exist is a valid answer, not a failure
        out.doc["found"] = res.found
        return out.emit(res.status != "bounded-search-exhausted")
    if action == "both":
        res = dg.gate_both_ways(dg.OrderedGroup.parse(args.g1), dg.OrderedGroup.parse(args.g2))
        out.text += res.lines()
        out.doc.update(res.to_dict())
        decisive = all(r.status != "bounded-search-exhausted" for r in (res.forward, res.reverse))
        return out.emit(decisive)
    raise UsageError(f"unknown dimgroup action {action!r}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = RunConfig.from_args(args)
        if args.command == "tower":
            return cmd_tower(config, args.set)
        if args.command == "speedup":
            return cmd_speedup(config, args.action, args)
        return cmd_dimgroup(config, args.action, args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return PRECONDITION
    except (PreconditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
