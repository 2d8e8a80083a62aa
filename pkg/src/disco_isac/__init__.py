"""Simulation toolkit for bistatic ISAC links impaired by a disco RIS."""

__version__ = "0.1.0"

from .channels import (  # noqa: E402
    ChannelSet,
    ReflectionState,
    assemble_channels,
    dris_moments,
    dris_sensing_path,
    draw_reflection_state,
    near_field_los,
    path_loss_db,
    steering_ula,
    upa_response,
)
from .comm import CommReport, empirical_sinr, received_symbols, sinr_lower_bound  # noqa: E402
from .config import DrisProfile, Geometry, ScenarioConfig, dump_config, load_config, parse_config  # noqa: E402
from .errors import (  # noqa: E402
    ConfigError,
    DiscoIsacError,
    DomainError,
    InfeasibleError,
    NumericalError,
    UnidentifiableError,
)
from .experiments import SweepResult, SweepSpec, mse, run_sweep, validate_model  # noqa: E402
from .sensing import (  # noqa: E402
    EstimationResult,
    SensingParams,
    SensingReport,
    crlb,
    fim,
    likelihood_gradient,
    log_likelihood,
    mle_estimate,
)
from .waveform import SymbolFrame, Waveform, generate_symbols, solve_isac_waveform, solve_sensing_waveform  # noqa: E402
