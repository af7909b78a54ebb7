"""Random alloy-type Schroedinger operators on metric graphs: Wegner estimates, IDS and SSF bounds."""

from .alloy import AlloyModel, Configuration, PiecewiseConstant, alloy_model, check_summability, sample_configuration
from .assembly import DiscretizedOperator, assemble, eigenvalues, mesh_for_energy
from .conditions import ConditionFamily, VertexCondition, dirichlet_restriction, standard_condition, uniform_family
from .counting import count_below, count_strictly_below, locate_eigenvalue
from .distributions import Bernoulli, LogHoelder, PointMass, PowerHoelder, Uniform, make_distribution
from .errors import AccuracyError, CapabilityError, InputError, PrecisionError, QGraphError, ResourceError
from .experiments import (
    ExperimentReport,
    WegnerScanSpec,
    boundary_condition_sweep,
    ids_estimate,
    initial_scale_check,
    loghoelder_threshold,
    weak_wegner_probability,
    wegner_scan,
)
from .graph import MetricGraph, build_lattice_graph, build_named_graph, full_subgraph, induced_subgraph
from .spectral import (
    check_ssf_decoupling,
    check_ssf_volume_bound,
    eigenvalue_lift,
    hellmann_feynman,
    monotone_shift_inequality,
    observability_check,
    ssf,
    trace_projector,
)

__version__ = "0.1.0"
