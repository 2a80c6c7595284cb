"""Command line front end.

Exit codes: 0 for any completed analysis (observed faults are results,
not failures), 1 for usage errors, 2 for unreadable or unparseable
inputs, 3 when a requested run does not halt within its cycle budget.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .asm import AsmError, Program, assemble, load_image, store_image
from .campaign import (
    CampaignPlan, GoldenBaseline, build_plan, golden_baseline, offset_grid,
    run_campaign, single_injection,
)
from .glitch import CorruptionPolicy, GlitchSpec, IllegalPolicy
from .machine import run_golden
from .pipeline import run_pipeline
from .rat import (
    build_dynamic_rat, build_static_rat, rat_to_csv, verify_rat_empirically,
)
from .timing import TimingError, load_timing
from .workloads import workload_names, workload_program

TIMING_ENV = "GLITCHBENCH_TIMING"
_REFERENCE_TIMING = Path(__file__).parent / "fixtures" / "timing_ref.json"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BAD_INPUT = 2
EXIT_NOT_HALTED = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; keep 2 for bad *input files* instead
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit((EXIT_USAGE, f"error: {message}"))


class _InputError(Exception):
    pass


def _resolve_timing(args) -> "TimingModel":
    path = getattr(args, "timing", None) or os.environ.get(TIMING_ENV) \
        or _REFERENCE_TIMING
    return load_timing(path)


def _load_program(args) -> tuple[Program, str]:
    """(program, label) from a positional path or --workload."""

    name = getattr(args, "workload", None)
    path = getattr(args, "program", None)
    if name:
        if path:
            raise _InputError("give either a program file or --workload")
        prog = workload_program(name, input_index=getattr(args, "input", None))
        return prog, name
    if not path:
        raise _InputError("no program given (file path or --workload)")
    if getattr(args, "input", None) is not None:
        raise _InputError("--input only applies to --workload bnn")
    p = Path(path)
    text = p.read_text()
    if p.suffix == ".json":
        return load_image(p), p.stem
    return assemble(text), p.stem


def _policy(name: str) -> CorruptionPolicy:
    try:
        return CorruptionPolicy[name.upper()]
    except KeyError:
        raise _InputError(
            f"unknown corruption policy '{name}' "
            f"(choose from {', '.join(p.name.lower() for p in CorruptionPolicy)})")


def _illegal_policy(name: str) -> IllegalPolicy:
    try:
        return IllegalPolicy[name.upper()]
    except KeyError:
        raise _InputError(
            f"unknown illegal-word policy '{name}' "
            f"(choose from {', '.join(p.name.lower() for p in IllegalPolicy)})")


def _int_range(text: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise _InputError(f"expected lo:hi, got '{text}'")
    try:
        return int(parts[0], 0), int(parts[1], 0)
    except ValueError:
        raise _InputError(f"bad cycle range '{text}'")


def _float_range(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise _InputError(f"expected lo:hi:step, got '{text}'")
    try:
        return float(parts[0]), float(parts[1]), float(parts[2])
    except ValueError:
        raise _InputError(f"bad offset range '{text}'")


def _emit(args, text: str) -> None:
    out = getattr(args, "output", None)
    if out and out != "-":
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------- subcommands ----------------

def cmd_asm(args) -> int:
    src = Path(args.source)
    prog = assemble(src.read_text())
    out = args.output or str(src.with_suffix(".json"))
    store_image(prog, out)
    words = prog.words()
    print(f"{src}: {len(words)} words in {len(prog.segments)} segment(s), "
          f"entry 0x{prog.entry:x} -> {out}")
    if args.symbols:
        for name, addr in sorted(prog.symbols.items(), key=lambda kv: kv[1]):
            print(f"  0x{addr:08x} {name}")
    return EXIT_OK


def cmd_run(args) -> int:
    prog, label = _load_program(args)
    if args.golden:
        gold = run_golden(prog, max_steps=args.max_cycles, strict=args.strict)
        status, arch, n = gold.status, gold.state, len(gold.events)
    else:
        run = run_pipeline(prog, max_cycles=args.max_cycles,
                           strict=args.strict)
        status, arch, n = run.status, run.arch, len(run.retires)
    payload = {
        "program": label,
        "engine": "reference" if args.golden else "pipeline",
        "status": status,
        "retired": n,
        "halt_cause": arch.halt_cause,
        "exit_code": arch.exit_code,
        "output": arch.output_log,
    }
    if not args.golden:
        payload["cycles"] = run.cycles
    if args.json:
        _emit(args, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        where = f"cycle {run.cycles}" if not args.golden else f"{n} steps"
        print(f"{label}: {status} after {where}, "
              f"cause={arch.halt_cause} exit={arch.exit_code} "
              f"output={arch.output_log}")
    return EXIT_OK if status == "HALTED" else EXIT_NOT_HALTED


def cmd_rat(args) -> int:
    timing = _resolve_timing(args)
    if args.verify or args.dynamic:
        prog, label = _load_program(args)
    if args.verify:
        checks = verify_rat_empirically(
            prog, timing, max_cycles=args.max_cycles,
            max_windows=args.max_windows)
        worst = 0.0
        rows = []
        for c in checks:
            w = c.window
            worst = max(worst, c.lo_error, c.hi_error)
            ok = c.selective and c.lo_error <= args.tolerance \
                and c.hi_error <= args.tolerance
            rows.append({
                "cycle": w.cycle, "latch": w.latch, "iclass": w.iclass,
                "predicted": [w.lo_ns, w.hi_ns],
                "empirical": [c.empirical_lo, c.empirical_hi],
                "lo_error": c.lo_error, "hi_error": c.hi_error,
                "selective": c.selective, "probes": c.probes, "ok": ok,
            })
        if args.json:
            _emit(args, json.dumps(
                {"program": label, "tolerance": args.tolerance,
                 "windows": rows, "worst_error_ns": worst},
                indent=2, sort_keys=True) + "\n")
        else:
            for r in rows:
                print(f"cycle {r['cycle']:5d} {r['latch']:5s} "
                      f"{r['iclass']:8s} predicted "
                      f"[{r['predicted'][0]:.4f}, {r['predicted'][1]:.4f}) "
                      f"empirical [{r['empirical'][0]:.4f}, "
                      f"{r['empirical'][1]:.4f}) "
                      f"{'ok' if r['ok'] else 'MISMATCH'}")
            print(f"{len(rows)} windows, worst boundary error "
                  f"{worst:.4f} ns")
        return EXIT_OK
    if args.dynamic:
        run = run_pipeline(prog, timing=timing, max_cycles=args.max_cycles,
                           record_trace=True)
        if run.status != "HALTED":
            print(f"error: {label} did not halt within {args.max_cycles} "
                  f"cycles", file=sys.stderr)
            return EXIT_NOT_HALTED
        windows = build_dynamic_rat(run, timing)
        if args.json:
            _emit(args, json.dumps({"program": label, "windows": [
                {"cycle": w.cycle, "latch": w.latch, "stage": w.stage,
                 "iclass": w.iclass, "lo_ns": w.lo_ns, "hi_ns": w.hi_ns,
                 "target_pc": w.target[0] if w.target else None,
                 "target_mnemonic": w.target[1] if w.target else None}
                for w in windows]}, indent=2, sort_keys=True) + "\n")
        else:
            lines = ["cycle,latch,stage,iclass,window_lo_ns,window_hi_ns,"
                     "target_pc,target_mnemonic"]
            for w in windows:
                pc = f"0x{w.target[0]:x}" if w.target else ""
                mnem = w.target[1] if w.target else ""
                lines.append(f"{w.cycle},{w.latch},{w.stage},{w.iclass},"
                             f"{w.lo_ns:.6g},{w.hi_ns:.6g},{pc},{mnem}")
            _emit(args, "\n".join(lines) + "\n")
        return EXIT_OK
    entries = build_static_rat(timing)
    if args.json:
        _emit(args, json.dumps([
            {"rank": e.rank, "iclass": e.iclass, "latch": e.latch,
             "t_crit_ns": e.t_crit_ns, "slack_ns": e.slack_ns,
             "window_lo_ns": e.window_lo_ns, "window_hi_ns": e.window_hi_ns}
            for e in entries], indent=2, sort_keys=True) + "\n")
    else:
        _emit(args, rat_to_csv(entries))
    return EXIT_OK


def cmd_inject(args) -> int:
    timing = _resolve_timing(args)
    prog, label = _load_program(args)
    spec = GlitchSpec(args.cycle, args.offset, _policy(args.policy),
                      _illegal_policy(args.illegal_policy))
    record, full, golden = single_injection(
        prog, timing, spec, max_cycles=args.max_cycles)
    if args.json:
        payload = record.to_dict()
        payload["program"] = label
        payload["corruptions"] = [
            {"cycle": e.cycle, "latch": e.latch, "field": e.field,
             "iclass": e.iclass, "pc": e.pc, "late_bits": list(e.late_bits),
             "clean": e.clean, "corrupted": e.corrupted,
             "changed": e.changed, "ghost": e.ghost,
             "bubble_injected": e.bubble_injected}
            for e in full.corruptions]
        _emit(args, json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    print(f"{label}: glitch cycle {spec.cycle} offset {spec.offset_ns}ns "
          f"policy {spec.policy.name}/{spec.illegal_policy.name}")
    if not full.corruptions:
        print("  no latch captured late bits; run is bit-identical to clean")
    for e in full.corruptions:
        mark = "*" if e.changed else " "
        pc = f"pc 0x{e.pc:x}" if e.pc is not None else "no occupant"
        print(f" {mark}{e.latch}.{e.field} [{e.iclass}] {pc} "
              f"{len(e.late_bits)} late bit(s) "
              f"0x{e.clean:x} -> 0x{e.corrupted:x}")
    for m in full.mechanisms:
        print(f"  mechanism {m.kind} at pc 0x{m.pc:x}: {m.detail}")
    print(f"  outcome {record.outcome} effect {record.effect} "
          f"misclassified {'yes' if record.misclassified else 'no'}")
    print(f"  faulty: {full.status} cycles {record.cycles} "
          f"cause {record.halt_cause} output {list(record.output)}")
    print(f"  golden: cycles {golden.cycles} cause {golden.halt_cause} "
          f"output {list(golden.output)}")
    if record.divergence and record.divergence["retire_mismatches"]:
        first = record.divergence["retire_mismatches"][0]
        g = first["golden_pc"]
        f = first["faulty_pc"]
        print(f"  first retire mismatch at slot {first['slot']}: "
              f"golden {'-' if g is None else hex(g)} vs "
              f"faulty {'-' if f is None else hex(f)}")
    return EXIT_OK


def cmd_campaign(args) -> int:
    timing = _resolve_timing(args)
    prog, label = _load_program(args)
    cycles = _int_range(args.cycles) if args.cycles else None
    offsets = _float_range(args.offset_range) if args.offset_range else None
    plan, golden = build_plan(
        prog, timing, cycles=cycles, offsets=offsets,
        policy=_policy(args.policy),
        illegal_policy=_illegal_policy(args.illegal_policy),
        label=label, max_cycles=args.max_cycles)
    result = run_campaign(plan, golden, jobs=args.jobs)
    Path(args.output).write_text(result.to_json())
    if args.csv:
        Path(args.csv).write_text(result.to_csv())
    summary = result.summary()
    print(f"{label}: {summary['points']} injections over cycles "
          f"[{plan.cycle_lo}, {plan.cycle_hi}) x {plan.offset_count} offsets "
          f"-> {args.output}")
    for outcome, n in sorted(summary["outcomes"].items(),
                             key=lambda kv: -kv[1]):
        print(f"  {outcome:24s} {n:7d}  {100 * n / summary['points']:5.1f}%")
    if summary["misclassified"]:
        print(f"  misclassified outputs: {summary['misclassified']}")
    return EXIT_OK


def cmd_report(args) -> int:
    rep = json.loads(Path(args.report).read_text())
    grid = rep["grid"]
    summary = rep["summary"]
    print(f"{rep['label']}: cycles [{grid['cycle_lo']}, {grid['cycle_hi']}) "
          f"x {grid['offset_count']} offsets = {grid['points']} points, "
          f"policy {rep['policy']}/{rep['illegal_policy']}")
    gold = rep["golden"]
    print(f"golden: {gold['cycles']} cycles, cause {gold['halt_cause']}, "
          f"output {gold['output']}")
    print("outcomes:")
    for outcome, n in sorted(summary["outcomes"].items(),
                             key=lambda kv: -kv[1]):
        print(f"  {outcome:24s} {n:7d}  {100 * n / grid['points']:5.1f}%")
    if summary["mechanisms"]:
        print("mechanisms observed:", ", ".join(
            f"{k} x{v}" for k, v in sorted(summary["mechanisms"].items())))
    ranked = sorted(summary["by_pc"].items(),
                    key=lambda kv: -sum(kv[1].values()))
    if ranked:
        print(f"most-hit victim pcs (top {args.top}):")
        for pc, outcomes in ranked[:args.top]:
            total = sum(outcomes.values())
            detail = ", ".join(f"{k} {v}" for k, v in sorted(outcomes.items()))
            print(f"  {pc:>10s} {total:6d}  ({detail})")
    if summary["by_stage_class"]:
        print("by consumer stage / instruction class:")
        for key, outcomes in sorted(summary["by_stage_class"].items()):
            total = sum(outcomes.values())
            print(f"  {key:16s} {total:6d}")
    return EXIT_OK


def cmd_workloads(args) -> int:
    for name in workload_names():
        print(name)
    return EXIT_OK


# ---------------- wiring ----------------

def _add_timing(p):
    p.add_argument("--timing", metavar="PATH",
                   help=f"timing model JSON (default ${TIMING_ENV} "
                        "or the built-in reference)")


def _add_program(p):
    p.add_argument("program", nargs="?",
                   help="assembly source (.s) or stored image (.json)")
    p.add_argument("--workload", metavar="NAME",
                   help="use a built-in program instead of a file")
    p.add_argument("--input", type=int, metavar="K",
                   help="stimulus index for --workload bnn")
    p.add_argument("--max-cycles", type=int, default=1_000_000,
                   metavar="N", help="glitch-free run budget")
    p.add_argument("--strict", action="store_true",
                   help="treat reads of unmapped memory as traps")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="glitchbench",
                     description="clock-glitch fault injection laboratory "
                                 "for a 4-stage RV32IM pipeline")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("asm", help="assemble a source file to an image")
    p.add_argument("source")
    p.add_argument("-o", "--output", metavar="PATH")
    p.add_argument("--symbols", action="store_true",
                   help="also list resolved symbols")
    p.set_defaults(func=cmd_asm)

    p = sub.add_parser("run", help="run a program glitch-free")
    _add_program(p)
    p.add_argument("--golden", action="store_true",
                   help="use the single-cycle reference model")
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output", metavar="PATH")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("rat", help="reliability analysis tables")
    _add_program(p)
    _add_timing(p)
    p.add_argument("--dynamic", action="store_true",
                   help="per-cycle selective windows for a program")
    p.add_argument("--verify", action="store_true",
                   help="probe window boundaries empirically")
    p.add_argument("--max-windows", type=int, metavar="N",
                   help="verify at most N windows")
    p.add_argument("--tolerance", type=float, default=0.01, metavar="NS")
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output", metavar="PATH")
    p.set_defaults(func=cmd_rat)

    p = sub.add_parser("inject", help="inject one glitch and classify it")
    _add_program(p)
    _add_timing(p)
    p.add_argument("--cycle", type=int, required=True)
    p.add_argument("--offset", type=float, required=True, metavar="NS")
    p.add_argument("--policy", default="stale_bits")
    p.add_argument("--illegal-policy", default="nop_replace")
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output", metavar="PATH")
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("campaign", help="sweep a (cycle, offset) grid")
    _add_program(p)
    _add_timing(p)
    p.add_argument("--cycles", metavar="LO:HI",
                   help="cycle range, default the whole run")
    p.add_argument("--offset-range", metavar="LO:HI:STEP",
                   help="offsets in ns, default a coarse whole-period scan")
    p.add_argument("--policy", default="stale_bits")
    p.add_argument("--illegal-policy", default="nop_replace")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output", default="report.json", metavar="PATH")
    p.add_argument("--csv", metavar="PATH",
                   help="also write per-injection rows")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("report", help="summarize a stored campaign report")
    p.add_argument("report")
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("workloads", help="list built-in programs")
    p.set_defaults(func=cmd_workloads)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        if isinstance(e.code, tuple):
            code, message = e.code
            print(message, file=sys.stderr)
            return code
        return e.code or 0
    try:
        return args.func(args)
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except AsmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except TimingError as exc:
        print(f"error: bad timing model: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
