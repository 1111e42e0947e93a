from schedmpi.collectives.collectives import (
    COPY,
    barrier,
    bcast_schedule_init,
    direct_bcast,
    reduce_schedule_init,
)
from schedmpi.collectives.plans import (
    BcastPlan,
    Direction,
    Edge,
    Topology,
    plan_bcast,
    plan_binomial_bcast,
    plan_linear_bcast,
    reduce_children,
    reduce_parent,
)

__all__ = [
    "COPY",
    "BcastPlan",
    "Direction",
    "Edge",
    "Topology",
    "barrier",
    "bcast_schedule_init",
    "direct_bcast",
    "plan_bcast",
    "plan_binomial_bcast",
    "plan_linear_bcast",
    "reduce_children",
    "reduce_parent",
    "reduce_schedule_init",
]
