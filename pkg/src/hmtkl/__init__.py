"""Exact and Monte Carlo Kullback-Leibler divergence for hidden Markov trees
and hidden Markov chains over a shared topology, with and without observed
emissions."""

from .errors import (
    EnumerationBudgetError,
    HmtklError,
    ModelError,
    ModelFormatError,
    ModelValidationError,
    PreconditionError,
    SpectralError,
    StationaryError,
    ZeroLikelihoodError,
)
from .model import (
    DiscreteEmission,
    Evidence,
    GaussianEmission,
    HmmModel,
    HmtModel,
    HmtTopology,
    load_evidence,
    load_model,
    save_model,
    validate,
)
from .divergence import kl_discrete, kl_gaussian, local_k_root, local_k_vector, emission_kl_per_state
from .tree import inward_pass, kld_exact_tree, kld_homogeneous_tree
from .hmm import (
    BackwardTable,
    Spectral,
    backward_quantities,
    do_bound,
    kld_hmm_evidence,
    kld_hmm_fast,
    kld_hmm_no_evidence,
    kld_rate,
    posterior_conditionals,
    spectral_split,
    stationary_distribution,
)
from .montecarlo import (
    McEstimate,
    loglik_joint,
    mc_kld_evidence,
    mc_kld_no_evidence,
    sample_joint,
    sample_posterior,
)
from .oracle import brute_force_kld_joint, brute_force_kld_posterior, enumeration_budget
from .bundled import block_evidence, bundled_block_evidence, bundled_gaussian_tree_pair, bundled_hmm_pair

__version__ = "0.1.0"

__all__ = [
    "HmtklError",
    "ModelError",
    "ModelFormatError",
    "ModelValidationError",
    "PreconditionError",
    "StationaryError",
    "ZeroLikelihoodError",
    "SpectralError",
    "EnumerationBudgetError",
    "HmtTopology",
    "HmtModel",
    "HmmModel",
    "DiscreteEmission",
    "GaussianEmission",
    "Evidence",
    "load_model",
    "save_model",
    "load_evidence",
    "validate",
    "kl_discrete",
    "kl_gaussian",
    "emission_kl_per_state",
    "local_k_vector",
    "local_k_root",
    "inward_pass",
    "kld_exact_tree",
    "kld_homogeneous_tree",
    "kld_hmm_no_evidence",
    "kld_hmm_fast",
    "kld_rate",
    "do_bound",
    "stationary_distribution",
    "Spectral",
    "spectral_split",
    "BackwardTable",
    "backward_quantities",
    "posterior_conditionals",
    "kld_hmm_evidence",
    "McEstimate",
    "sample_joint",
    "loglik_joint",
    "mc_kld_no_evidence",
    "sample_posterior",
    "mc_kld_evidence",
    "brute_force_kld_joint",
    "brute_force_kld_posterior",
    "enumeration_budget",
    "block_evidence",
    "bundled_block_evidence",
    "bundled_hmm_pair",
    "bundled_gaussian_tree_pair",
]
