"""Mean-based trace reconstruction over replication-insertion channels."""

__version__ = "0.1.0"

from .bits import all_strings, as_bits, bits_to_str
from .channel import (
    ChannelSpec,
    Deletion,
    Duplication,
    ExplicitTable,
    GeoInsBefore,
    GeoInsDel,
    apply_channel,
    channel_from_dict,
    channel_to_dict,
    make_builtin,
    m_pmf,
    replication_profile,
    sample_traces,
)
from .errors import ChannelValidationError, ConfigError, ConvergenceError, DomainError, TracelabError
from .genfun import ArcSpec, arc_max, arc_quadratic_bound_check, eval_pgf, invert_on_arc, pgf_of_M, pgf_of_W
from .mean_trace import (
    choose_truncation,
    empirical_mean_trace,
    estimate_mean_trace,
    exact_mean_trace,
    position_weights,
    series_eval,
    verify_changevar,
)
from .reconstruction import (
    CandidateSet,
    certify_lower_bound,
    pairwise_separation,
    reconstruct,
    run_trials,
    separation_scaling,
    trace_complexity_experiment,
)
