"""Stance- and tweet-type-marked Hawkes processes for news cascades on follower networks."""

from .em import EMConfig, FitReport, Responsibilities, e_step, fit, m_step, param_init, q_value, solve_x
from .intensity import (
    IntensityBreakdown,
    compensator,
    effective_gamma,
    immigrant_intensity,
    ks_exponential,
    log_likelihood,
    rescaled_interarrivals,
    stance_intensity,
    total_intensity,
)
from .io import (
    load_params,
    load_preset,
    parse_edges,
    parse_events,
    resolve_influence,
    save_params,
    validate_assumptions,
    write_edges,
    write_events,
)
from .model import Cascade, Event, ModelParams, Stance, TweetType
from .network import FollowerGraph, event_reach, generate_network, reach_weight
from .simulate import SimConfig, SimReport, branching_ratio, simulate_cascade

__version__ = "0.1.0"
