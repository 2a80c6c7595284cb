"""Pre-silicon clock-glitch fault injection lab for an RV32IM pipeline.

Subpackages cover instruction coding, a two-pass assembler, an
instruction-set simulator used as the fault-free reference, a
timing-annotated 4-stage pipeline with corruptible inter-stage latches,
glitch effect planning, risk assessment tables, workload generators, and
campaign sweeps.
"""

__version__ = "0.1.0"
