"""Vulnerability ranking and glitch-window prediction.

Two views of the same timing data:

  * the static table ranks every (instruction class, latch) pair by its
    critical path: long paths have little slack and are the first to miss a
    shortened cycle, so rank 1 is the most vulnerable capture in the design;

  * the dynamic view walks a concrete glitch-free execution and, for each
    cycle, derives the offset band that corrupts exactly one latch and
    nothing else. A band exists only when the targeted capture needs strictly
    more time than every other capture happening at the same edge.

Predictions are checked against the simulator itself: fork the pipeline just
before the victim cycle, inject at a candidate offset, and see which latches
record corruption. Because corruption is confined to the glitch cycle, one
forked cycle is enough per probe, and boundaries are located by bisection.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

from .asm import Program
from .glitch import GlitchSpec
from .latches import CONSUMER_STAGE, LATCHES
from .pipeline import Pipeline, PipelineRun, run_pipeline
from .timing import TimingModel

CSV_HEADER = "iclass,stage,t_crit_ns,slack_ns,window_lo_ns,window_hi_ns,rank"


@dataclass(frozen=True)
class RatEntry:
    iclass: str
    latch: str
    t_crit_ns: float
    slack_ns: float
    window_lo_ns: float
    window_hi_ns: float
    rank: int


def build_static_rat(timing: TimingModel) -> list[RatEntry]:
    """Rank all class/latch captures, most vulnerable (least slack) first."""

    rows = []
    for (iclass, latch), crit in timing.crit_ns.items():
        rows.append((crit, iclass, latch))
    rows.sort(key=lambda r: (-r[0], r[1], r[2]))
    entries = []
    for rank, (crit, iclass, latch) in enumerate(rows, start=1):
        entries.append(RatEntry(
            iclass, latch, crit, timing.slack(iclass, latch),
            timing.min_glitch_ns, timing.threshold(iclass, latch), rank))
    return entries


def rat_to_csv(entries: list[RatEntry]) -> str:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for e in entries:
        out.write(f"{e.iclass},{e.latch},{e.t_crit_ns:.6g},{e.slack_ns:.6g},"
                  f"{e.window_lo_ns:.6g},{e.window_hi_ns:.6g},{e.rank}\n")
    return out.getvalue()


@dataclass(frozen=True)
class SelectiveWindow:
    """Offsets in [lo_ns, hi_ns) corrupt only `latch` at `cycle`."""

    cycle: int
    latch: str
    stage: str
    iclass: str
    lo_ns: float
    hi_ns: float
    target: tuple | None  # (pc, mnemonic, iclass, dyn_id) of the consumer

    @property
    def mid_ns(self) -> float:
        return (self.lo_ns + self.hi_ns) / 2


def build_dynamic_rat(run: PipelineRun,
                      timing: TimingModel) -> list[SelectiveWindow]:
    """Selective windows for every cycle of a traced glitch-free run.

    Only freshly captured latches compete: a held latch or a reset bubble
    cannot be corrupted, so it imposes no floor on anyone else's window.
    """

    if run.trace is None:
        raise ValueError("dynamic analysis needs a run with record_trace")
    windows = []
    o_min = timing.min_glitch_ns
    for entry in run.trace:
        thresholds = {}
        for latch, (fresh, iclass, _valid) in entry.captures.items():
            if fresh and iclass is not None:
                thresholds[latch] = timing.threshold(iclass, latch)
        for latch, hi in thresholds.items():
            lo = max([o_min] + [t for other, t in thresholds.items()
                                if other != latch])
            if lo < hi:
                iclass = entry.captures[latch][1]
                windows.append(SelectiveWindow(
                    entry.cycle, latch, CONSUMER_STAGE[latch], iclass,
                    lo, hi, entry.occupancy.get(CONSUMER_STAGE[latch])))
    return windows


@dataclass(frozen=True)
class WindowCheck:
    window: SelectiveWindow
    empirical_lo: float
    empirical_hi: float
    lo_error: float
    hi_error: float
    selective: bool
    probes: int


class _Prober:
    """Shared machinery for empirical checks at one pipeline state."""

    def __init__(self, base: Pipeline, full_runs=None):
        self.base = base
        self.full_runs = full_runs  # (program, max_cycles) to re-run whole
        self.count = 0

    def corrupted(self, cycle: int, offset: float) -> set[str]:
        self.count += 1
        if self.full_runs is not None:
            program, budget = self.full_runs
            run = run_pipeline(program, timing=self.base.timing,
                               glitches=[GlitchSpec(cycle, offset)],
                               max_cycles=budget)
            return {c.latch for c in run.corruptions}
        fork = self.base.fork()
        fork.schedule(GlitchSpec(cycle, offset))
        fork.clock()
        return {c.latch for c in fork.corruptions}

    def bisect(self, cycle: int, lo: float, hi: float, pred) -> float:
        """Boundary of a monotone predicate: true below, false at/above."""

        while hi - lo > 1e-4:
            mid = (lo + hi) / 2
            if pred(self.corrupted(cycle, mid)):
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2


def verify_rat_empirically(program: Program, timing: TimingModel,
                           windows: list[SelectiveWindow] | None = None,
                           *, max_cycles: int = 1_000_000,
                           scan_step: float = 0.05,
                           full_runs: bool = False,
                           max_windows: int | None = None
                           ) -> list[WindowCheck]:
    """Probe every predicted window against the simulator.

    For each window the upper boundary (target latch stops corrupting) and,
    when above the glitch floor, the lower boundary (another latch starts
    corrupting) are located by bisection; a grid walk across the interior
    confirms that exactly the predicted latch is hit.
    """

    if windows is None:
        base_run = run_pipeline(program, timing=timing,
                                max_cycles=max_cycles, record_trace=True)
        windows = build_dynamic_rat(base_run, timing)
    if max_windows is not None:
        windows = windows[:max_windows]

    by_cycle: dict[int, list[SelectiveWindow]] = {}
    for w in windows:
        by_cycle.setdefault(w.cycle, []).append(w)

    o_min = timing.min_glitch_ns
    eps = 1e-6
    top = timing.clock_period_ns - eps
    checks = []
    base = Pipeline(program, timing=timing)
    budget = (program, max_cycles)
    for cycle in sorted(by_cycle):
        while base.cycle < cycle and not base.arch.halted:
            base.clock()
        prober = _Prober(base, budget if full_runs else None)
        for w in by_cycle[cycle]:
            n0 = prober.count
            emp_hi = prober.bisect(cycle, o_min, top,
                                   lambda hit, L=w.latch: L in hit)
            if w.lo_ns > o_min + eps:
                emp_lo = prober.bisect(cycle, o_min, top,
                                       lambda hit, L=w.latch: hit - {L} != set())
            else:
                emp_lo = o_min
            selective = True
            off = w.lo_ns + scan_step / 2
            while off < w.hi_ns:
                if prober.corrupted(cycle, off) != {w.latch}:
                    selective = False
                    break
                off += scan_step
            above = min(w.hi_ns + eps * 10, top)
            if prober.corrupted(cycle, above):
                selective = False
            checks.append(WindowCheck(
                w, emp_lo, emp_hi,
                abs(emp_lo - w.lo_ns), abs(emp_hi - w.hi_ns),
                selective, prober.count - n0))
    return checks
