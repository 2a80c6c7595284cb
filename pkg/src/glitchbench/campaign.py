"""Exhaustive glitch sweeps over a (cycle, offset) grid.

Each grid point is one independent experiment: run the program clean up
to the target cycle, shorten that one cycle to the given offset, then
let the machine run on under a hang budget and compare everything
architecturally visible against the glitch-free run.

Offsets are always reconstructed as lo + idx * step from the integer
index, never accumulated, so a sweep split across worker processes
produces float-identical records and a byte-identical report.
"""

from __future__ import annotations

import json
import multiprocessing
from collections import Counter
from dataclasses import dataclass, field
from io import StringIO

from .asm import Program
from .glitch import CorruptionPolicy, GlitchSpec, IllegalPolicy
from .latches import CONSUMER_STAGE
from .machine import TRAP_CAUSES
from .pipeline import Pipeline, run_pipeline
from .timing import TimingModel

HANG_FACTOR = 4
DIVERGENCE_LIMIT = 16

# headline outcome labels, most severe first
HANG = "HANG"
TRAP = "TRAP"
NOP_REPLACEMENT = "NOP_REPLACEMENT"
MUTATED_INSTRUCTION = "MUTATED_INSTRUCTION"
GHOST_INSTRUCTION = "GHOST_INSTRUCTION"
CONTROL_FLOW_DEVIATION = "CONTROL_FLOW_DEVIATION"
SDC_OUTPUT = "SDC_OUTPUT"
SDC_STATE_ONLY = "SDC_STATE_ONLY"
NO_EFFECT = "NO_EFFECT"

_MECHANISM_ORDER = (NOP_REPLACEMENT, MUTATED_INSTRUCTION, GHOST_INSTRUCTION)

CSV_HEADER = ("index,cycle,offset_ns,outcome,effect,mechanisms,corrupted,"
              "root_cause,root_pc,misclassified,cycles,halt_cause,output")


@dataclass(frozen=True)
class GoldenBaseline:
    """Glitch-free pipeline run, reduced to what classification needs."""

    cycles: int
    halt_cause: str | None
    exit_code: int | None
    output: tuple[int, ...]
    pcs: tuple[int, ...]
    regs: tuple[int, ...]
    mem: tuple[tuple[int, int], ...]  # sorted nonzero words


def golden_baseline(program: Program, *, max_cycles: int = 1_000_000) -> GoldenBaseline:
    run = run_pipeline(program, max_cycles=max_cycles)
    if run.status != "HALTED":
        raise ValueError(
            f"program does not halt within {max_cycles} cycles glitch-free")
    arch = run.arch
    mem = tuple(sorted((a, v) for a, v in arch.mem.items() if v))
    return GoldenBaseline(run.cycles, arch.halt_cause, arch.exit_code,
                          tuple(arch.output_log), tuple(run.retire_pcs()),
                          tuple(arch.regs), mem)


@dataclass(frozen=True)
class CampaignPlan:
    program: Program
    timing: TimingModel
    cycle_lo: int
    cycle_hi: int  # exclusive
    offset_lo: float
    offset_step: float
    offset_count: int
    policy: CorruptionPolicy = CorruptionPolicy.STALE_BITS
    illegal_policy: IllegalPolicy = IllegalPolicy.NOP_REPLACE
    hang_factor: int = HANG_FACTOR
    label: str = "program"

    def offset(self, idx: int) -> float:
        return self.offset_lo + idx * self.offset_step

    @property
    def cycles(self) -> range:
        return range(self.cycle_lo, self.cycle_hi)

    @property
    def points(self) -> int:
        return (self.cycle_hi - self.cycle_lo) * self.offset_count


def offset_grid(lo: float, hi: float, step: float) -> tuple[float, float, int]:
    """(lo, step, count) covering [lo, hi] inclusive of a landing endpoint."""

    if step <= 0:
        raise ValueError("offset step must be positive")
    if hi < lo:
        raise ValueError("empty offset range")
    count = int((hi - lo) / step + 1e-9) + 1
    return lo, step, count


def build_plan(program: Program, timing: TimingModel, *,
               cycles: tuple[int, int] | None = None,
               offsets: tuple[float, float, float] | None = None,
               policy: CorruptionPolicy = CorruptionPolicy.STALE_BITS,
               illegal_policy: IllegalPolicy = IllegalPolicy.NOP_REPLACE,
               label: str = "program",
               max_cycles: int = 1_000_000) -> tuple[CampaignPlan, GoldenBaseline]:
    """Fill grid defaults from the glitch-free run and validate bounds."""

    golden = golden_baseline(program, max_cycles=max_cycles)
    if cycles is None:
        cycles = (0, golden.cycles)
    lo_c, hi_c = cycles
    if not 0 <= lo_c < hi_c:
        raise ValueError(f"bad cycle range {lo_c}:{hi_c}")
    if offsets is None:
        t = timing
        offsets = (t.min_glitch_ns, t.clock_period_ns - 2 * t.setup_ns, 0.5)
    off_lo, off_step, off_count = offset_grid(*offsets)
    for idx in (0, off_count - 1):
        timing.check_offset(off_lo + idx * off_step)
    plan = CampaignPlan(program, timing, lo_c, hi_c,
                        off_lo, off_step, off_count,
                        policy, illegal_policy, label=label)
    return plan, golden


@dataclass(frozen=True)
class OutcomeRecord:
    index: int
    cycle: int
    offset_idx: int
    offset_ns: float
    outcome: str
    effect: str
    mechanisms: tuple[str, ...]
    corrupted: tuple[str, ...]  # "LATCH.field" sites whose value changed
    root_cause: str             # first changed site, "" for NO_EFFECT
    root_iclass: str
    root_pc: int | None
    misclassified: bool
    cycles: int
    halt_cause: str | None
    exit_code: int | None
    output: tuple[int, ...]
    divergence: dict | None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "cycle": self.cycle,
            "offset_idx": self.offset_idx,
            "offset_ns": self.offset_ns,
            "outcome": self.outcome,
            "effect": self.effect,
            "mechanisms": list(self.mechanisms),
            "corrupted": list(self.corrupted),
            "root_cause": self.root_cause,
            "root_iclass": self.root_iclass,
            "root_pc": self.root_pc,
            "misclassified": self.misclassified,
            "cycles": self.cycles,
            "halt_cause": self.halt_cause,
            "exit_code": self.exit_code,
            "output": list(self.output),
            "divergence": self.divergence,
        }

    def to_csv_row(self) -> str:
        return ",".join([
            str(self.index), str(self.cycle), repr(self.offset_ns),
            self.outcome, self.effect,
            ";".join(self.mechanisms), ";".join(self.corrupted),
            self.root_cause,
            "" if self.root_pc is None else f"0x{self.root_pc:x}",
            "1" if self.misclassified else "0",
            str(self.cycles), self.halt_cause or "",
            ";".join(str(v) for v in self.output),
        ])


def first_divergence(golden_pcs, faulty_pcs, changed_events,
                     limit: int = DIVERGENCE_LIMIT) -> dict:
    """Where the fault took hold: the first corrupted site plus the first
    retirement slots where the two pc streams disagree."""

    seed = None
    if changed_events:
        e = changed_events[0]
        seed = {"cycle": e.cycle, "latch": e.latch, "field": e.field,
                "pc": e.pc}
    mismatches = []
    for i in range(max(len(golden_pcs), len(faulty_pcs))):
        g = golden_pcs[i] if i < len(golden_pcs) else None
        f = faulty_pcs[i] if i < len(faulty_pcs) else None
        if g != f:
            mismatches.append({"slot": i, "golden_pc": g, "faulty_pc": f})
            if len(mismatches) >= limit:
                break
    return {"seed": seed, "retire_mismatches": mismatches}


def classify_outcome(golden: GoldenBaseline, *, status: str,
                     pcs: tuple[int, ...], output: tuple[int, ...],
                     regs: tuple[int, ...], mem: tuple[tuple[int, int], ...],
                     halt_cause: str | None, exit_code: int | None,
                     mechanisms: tuple[str, ...]) -> tuple[str, str, bool]:
    """(headline outcome, effect class, misclassified flag)."""

    if pcs != golden.pcs:
        effect = CONTROL_FLOW_DEVIATION
    elif output != golden.output:
        effect = SDC_OUTPUT
    elif (regs != golden.regs or mem != golden.mem
          or halt_cause != golden.halt_cause or exit_code != golden.exit_code):
        effect = SDC_STATE_ONLY
    else:
        effect = NO_EFFECT

    if status != "HALTED":
        outcome = HANG
    elif halt_cause != golden.halt_cause and halt_cause in TRAP_CAUSES:
        outcome = TRAP
    elif effect != NO_EFFECT:
        outcome = next((k for k in _MECHANISM_ORDER if k in mechanisms),
                       effect)
    else:
        outcome = NO_EFFECT
    misclassified = status == "HALTED" and output != golden.output
    return outcome, effect, misclassified


def _no_effect_record(plan: CampaignPlan, golden: GoldenBaseline,
                      index: int, cycle: int, k: int) -> OutcomeRecord:
    return OutcomeRecord(index, cycle, k, plan.offset(k),
                         NO_EFFECT, NO_EFFECT, (), (), "", "", None, False,
                         golden.cycles, golden.halt_cause, golden.exit_code,
                         golden.output, None)


def _probe(plan: CampaignPlan, golden: GoldenBaseline, baseline: Pipeline,
           base_pcs: list[int], cycle: int, k: int, budget: int) -> OutcomeRecord:
    index = (cycle - plan.cycle_lo) * plan.offset_count + k
    fork = baseline.fork()
    fork.schedule(GlitchSpec(cycle, plan.offset(k),
                             plan.policy, plan.illegal_policy))
    fork.clock()
    changed = [e for e in fork.corruptions if e.changed]
    if not changed:
        # the shortened cycle met timing everywhere that mattered; the
        # continuation is bit-identical to the clean run, skip simulating it
        return _no_effect_record(plan, golden, index, cycle, k)

    fork.run(budget)
    res = fork.result()
    arch = res.arch
    pcs = tuple(base_pcs) + tuple(e.pc for e in res.retires)
    output = tuple(arch.output_log)
    regs = tuple(arch.regs)
    mem = tuple(sorted((a, v) for a, v in arch.mem.items() if v))
    mechanisms = tuple(sorted({m.kind for m in res.mechanisms}))
    outcome, effect, misclassified = classify_outcome(
        golden, status=res.status, pcs=pcs, output=output, regs=regs,
        mem=mem, halt_cause=arch.halt_cause, exit_code=arch.exit_code,
        mechanisms=mechanisms)
    root = changed[0]
    divergence = None
    if effect != NO_EFFECT or outcome != NO_EFFECT:
        divergence = first_divergence(golden.pcs, pcs, changed)
    return OutcomeRecord(
        index, cycle, k, plan.offset(k), outcome, effect, mechanisms,
        tuple(dict.fromkeys(f"{e.latch}.{e.field}" for e in changed)),
        f"{root.latch}.{root.field}", root.iclass or "", root.pc,
        misclassified, res.cycles, arch.halt_cause, arch.exit_code,
        output, divergence)


def _simulate_cycles(plan: CampaignPlan, golden: GoldenBaseline,
                     cycles: list[int]) -> list[OutcomeRecord]:
    """One rolling baseline, forked once per grid point."""

    budget = golden.cycles * plan.hang_factor
    baseline = Pipeline(plan.program, timing=plan.timing)
    records = []
    for cycle in sorted(cycles):
        while baseline.cycle < cycle and not baseline.arch.halted:
            if not baseline.clock():
                break
        base_pcs = [e.pc for e in baseline.retires]
        for k in range(plan.offset_count):
            records.append(_probe(plan, golden, baseline, base_pcs,
                                  cycle, k, budget))
    return records


def _worker(args) -> list[OutcomeRecord]:
    plan, golden, cycles = args
    return _simulate_cycles(plan, golden, cycles)


@dataclass
class CampaignResult:
    plan: CampaignPlan
    golden: GoldenBaseline
    records: list[OutcomeRecord] = field(default_factory=list)

    def summary(self) -> dict:
        outcomes = Counter(r.outcome for r in self.records)
        effects = Counter(r.effect for r in self.records)
        mechanisms = Counter(m for r in self.records for m in r.mechanisms)
        sites = Counter(s for r in self.records for s in r.corrupted)
        by_stage_class: dict[str, Counter] = {}
        by_pc: dict[str, Counter] = {}
        for r in self.records:
            if not r.root_cause:
                continue
            latch = r.root_cause.split(".", 1)[0]
            key = f"{CONSUMER_STAGE[latch]}/{r.root_iclass or '?'}"
            by_stage_class.setdefault(key, Counter())[r.outcome] += 1
            if r.root_pc is not None:
                by_pc.setdefault(f"0x{r.root_pc:x}", Counter())[r.outcome] += 1
        return {
            "points": len(self.records),
            "outcomes": dict(sorted(outcomes.items())),
            "effects": dict(sorted(effects.items())),
            "mechanisms": dict(sorted(mechanisms.items())),
            "corrupted_sites": dict(sorted(sites.items())),
            "misclassified": sum(1 for r in self.records if r.misclassified),
            "by_stage_class": {k: dict(sorted(v.items()))
                               for k, v in sorted(by_stage_class.items())},
            "by_pc": {k: dict(sorted(v.items()))
                      for k, v in sorted(by_pc.items())},
        }

    def report(self) -> dict:
        plan = self.plan
        return {
            "label": plan.label,
            "grid": {
                "cycle_lo": plan.cycle_lo,
                "cycle_hi": plan.cycle_hi,
                "offset_lo_ns": plan.offset_lo,
                "offset_step_ns": plan.offset_step,
                "offset_count": plan.offset_count,
                "points": plan.points,
            },
            "policy": plan.policy.name,
            "illegal_policy": plan.illegal_policy.name,
            "hang_budget_cycles": self.golden.cycles * plan.hang_factor,
            "golden": {
                "cycles": self.golden.cycles,
                "halt_cause": self.golden.halt_cause,
                "exit_code": self.golden.exit_code,
                "output": list(self.golden.output),
                "retired": len(self.golden.pcs),
            },
            "summary": self.summary(),
            "records": [r.to_dict() for r in self.records],
        }

    def to_json(self) -> str:
        # stable key order, no timestamps: byte-identical across reruns
        # and across any worker split
        return json.dumps(self.report(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = StringIO()
        buf.write(CSV_HEADER + "\n")
        for r in self.records:
            buf.write(r.to_csv_row() + "\n")
        return buf.getvalue()


def single_injection(program: Program, timing: TimingModel, spec: GlitchSpec,
                     *, hang_factor: int = HANG_FACTOR,
                     max_cycles: int = 1_000_000):
    """One glitch, fully classified: (record, faulty run, golden baseline).

    The returned run is a from-reset simulation carrying the complete
    corruption and mechanism logs for display.
    """

    golden = golden_baseline(program, max_cycles=max_cycles)
    plan = CampaignPlan(program, timing, spec.cycle, spec.cycle + 1,
                        spec.offset_ns, 1.0, 1, spec.policy,
                        spec.illegal_policy, hang_factor, label="inject")
    record = run_campaign(plan, golden).records[0]
    full = run_pipeline(program, timing=timing, glitches=[spec],
                        max_cycles=golden.cycles * hang_factor)
    return record, full, golden


def run_campaign(plan: CampaignPlan, golden: GoldenBaseline | None = None,
                 *, jobs: int = 1) -> CampaignResult:
    if golden is None:
        golden = golden_baseline(plan.program)
    cycles = list(plan.cycles)
    if jobs <= 1 or len(cycles) < 2:
        records = _simulate_cycles(plan, golden, cycles)
    else:
        jobs = min(jobs, len(cycles))
        q, r = divmod(len(cycles), jobs)
        blocks = []
        lo = 0
        for i in range(jobs):
            hi = lo + q + (1 if i < r else 0)
            blocks.append((plan, golden, cycles[lo:hi]))
            lo = hi
        with multiprocessing.Pool(jobs) as pool:
            chunks = pool.map(_worker, blocks)
        records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda rec: rec.index)
    return CampaignResult(plan, golden, records)
