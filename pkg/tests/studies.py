"""Expensive studies shared between test modules within one pytest session."""

from functools import lru_cache

from pcegrid.harness import StabilityStudyConfig, run_study

# configuration fixed before the first run; see the acceptance module
ISHIGAMI_STABILITY = StabilityStudyConfig(
    model="ishigami", methods=("LHS", "MmLHS"), sample_sizes=tuple(range(20, 101, 10)),
    replicates=25, seed=0, p=3, q=1.0, n_candidates=100,
)


@lru_cache(maxsize=None)
def ishigami_stability():
    return run_study(ISHIGAMI_STABILITY)
