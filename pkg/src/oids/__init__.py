"""Optimistic information-directed sampling for finite parametric contextual bandits."""
from .catalog import (
    InstanceRecipe,
    build_environment,
    make_random_bernoulli,
    make_revealing_action,
    make_revelatory_zero,
    make_sparse_linear,
)
from .divergences import (
    Bernoulli,
    Discrete,
    Gaussian,
    ZeroInflatedUniform,
    hellinger_sq,
    kl,
    mixture,
    total_variation,
)
from .harness import (
    AggregateReport,
    BatchConfig,
    RunTrace,
    bound_check,
    derive_seeds,
    run_batch,
    run_episode,
    simulate,
)
from .models import Environment, ModelClass, binarize, load_model
from .objectives import Oracle, RoundObjectives, adec, information_ratio
from .policies import (
    AlgorithmSpec,
    PolicyDistribution,
    e2d_policy,
    fgts_policy,
    igw_policy,
    roids,
    voids,
)
from .posterior import OptimisticPosterior, potential_phi

__version__ = "0.1.0"
