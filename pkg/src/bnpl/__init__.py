__version__ = "0.1.0"
from .client import RankingClient, simulate
from .config import (
    ChainConfig,
    DynamicConfig,
    GammaPrior,
    OutputSettings,
    RunConfig,
    SimulationConfig,
)
from .dynamic_model import (
    lifetime_death_prob,
    phi_from_continuous_time,
    pitt_walker_step,
    run_dynamic_gibbs,
    simulate_dynamic_dataset,
)
from .errors import (
    BnplError,
    ConfigurationError,
    DataValidationError,
    DiagnosticFailure,
    DomainError,
    SamplerInternalError,
)
from .measures import (
    AtomicMeasure,
    levy_kappa,
    levy_psi,
    sample_top_m,
    sample_truncated_gamma_process,
)
from .models import (
    GammaProcessParams,
    GewekeReport,
    PartialRanking,
    PosteriorChain,
    RankingDataset,
)
from .static_model import (
    log_marginal_likelihood,
    pl_log_probability,
    predictive_new_item_prob,
    run_static_gibbs,
    simulate_static_dataset,
)

__all__ = [
    "__version__",
    "AtomicMeasure",
    "BnplError",
    "ChainConfig",
    "ConfigurationError",
    "DataValidationError",
    "DiagnosticFailure",
    "DomainError",
    "DynamicConfig",
    "GammaPrior",
    "GammaProcessParams",
    "GewekeReport",
    "OutputSettings",
    "PartialRanking",
    "PosteriorChain",
    "RankingClient",
    "RankingDataset",
    "RunConfig",
    "SamplerInternalError",
    "SimulationConfig",
    "levy_kappa",
    "levy_psi",
    "lifetime_death_prob",
    "log_marginal_likelihood",
    "phi_from_continuous_time",
    "pitt_walker_step",
    "pl_log_probability",
    "predictive_new_item_prob",
    "run_dynamic_gibbs",
    "run_static_gibbs",
    "sample_top_m",
    "sample_truncated_gamma_process",
    "simulate",
    "simulate_dynamic_dataset",
    "simulate_static_dataset",
]
