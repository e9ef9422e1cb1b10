"""pnet: promise-graph modeling, simulation and verification for data
networks."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    Agent,
    AgentKind,
    Binding,
    Body,
    GraphError,
    Imposition,
    PnetError,
    Polarity,
    Promise,
    PromiseGraph,
    Role,
    body_set,
    collapse_container,
    container_membrane,
    find_bindings,
    give,
    infer_roles,
    match_bodies,
    unmatched_impositions,
    use,
)
from .addressing import (  # noqa: F401
    AddressComponent,
    AddressError,
    MultipletAddress,
    ScalingParams,
    TableEntry,
    TransducerTable,
    decapsulate,
    encapsulate,
    parse_address,
    same_scope,
    scaling_split,
    transduce,
)
from .simulator import (  # noqa: F401
    DeliveryTrace,
    Message,
    flood_set,
    inject,
    reachable,
)
from .verifier import (  # noqa: F401
    AnalysisError,
    AnalysisReport,
    check_alignment,
    check_cooperation,
    control_model_metric,
    expand_proxy,
    redundancy_check,
    single_points_of_failure,
)
from .policy import (  # noqa: F401
    Cell,
    ConsumeSpec,
    PolicySpec,
    compile_policy,
    verify_compiled,
)
