"""Exact speedup constructions on adic odometers."""

from .adic import (
    ClopenSet,
    InvariantMeasure,
    OdometerSystem,
    Point,
    apply_T,
    clopen_value_set,
    is_minimal_power,
    measure,
    parse_clopen,
    refine,
    small_clopen,
)
from .dimgroups import (
    GroupHom,
    GroupState,
    OrderedGroup,
    check_axioms,
    example6,
    first_isomorphism_check,
    gate,
    gate_both_ways,
    infinitesimals,
    k0_of_odometer,
    states,
)
from .report import PreconditionError, Report
from .speedup import (
    PrefixHomeomorphism,
    SpeedupMap,
    conjugacy_stage,
    construct_bijection,
    construct_injection,
    induction_step,
    power_speedup,
    subset_condition,
    transfer_partition,
    verify_speedup,
)
from .towers import KRPartition, nested_towers, refine_tower, return_times, tall_tower, tower_over_base

__version__ = "0.1.0"
