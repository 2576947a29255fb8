"""Online classification from adversarially noised labels.

Divergences and losses live in :mod:`.dist`, noise-kernel geometry in :mod:`.kernel`,
the exponential-weights predictors in :mod:`.predictors`, pairwise testing and the
elimination meta-predictor in :mod:`.pairwise`, and the game loop in :mod:`.game`.
"""

from .dist import (Distribution, DivergenceKind, LossKind, LossSpec, Renyi, hellinger_sq, kl, l2_sq,
                   loss, renyi, tv)
from .game import (AdversaryStrategy, EpochConstant, Experiment, FixedSequence, GameTranscript,
                   HypothesisClass, MaxDisagreement, RiskSummary, UniformFeatures,
                   build_lower_bound_instance, build_soft_gap_instance, build_tsybakov_instance,
                   monte_carlo, run_game)
from .kernel import (CustomKernel, MassartBernoulli, NoiseKernel, Polytope, RandomizedResponse, Segment,
                     Singleton, SingletonKernel, Tsybakov, TVBall, gap, min_pairwise_gap, project_l2)
from .pairwise import (PairTester, PairwiseMeta, bayes_oracle, budget, empirical_mean_step,
                       lecam_birge_step)
from .predictors import (EwaState, ExpertFunction, HellingerSingleton, L2Reduction, LoglossRR,
                         ewa_predict, ewa_regret_audit, ewa_update)

__all__ = [
    "Distribution",
    "DivergenceKind",
    "LossKind",
    "LossSpec",
    "Renyi",
    "hellinger_sq",
    "kl",
    "l2_sq",
    "loss",
    "renyi",
    "tv",
    "AdversaryStrategy",
    "EpochConstant",
    "Experiment",
    "FixedSequence",
    "GameTranscript",
    "HypothesisClass",
    "MaxDisagreement",
    "RiskSummary",
    "UniformFeatures",
    "build_lower_bound_instance",
    "build_soft_gap_instance",
    "build_tsybakov_instance",
    "monte_carlo",
    "run_game",
    "CustomKernel",
    "MassartBernoulli",
    "NoiseKernel",
    "Polytope",
    "RandomizedResponse",
    "Segment",
    "Singleton",
    "SingletonKernel",
    "Tsybakov",
    "TVBall",
    "gap",
    "min_pairwise_gap",
    "project_l2",
    "PairTester",
    "PairwiseMeta",
    "bayes_oracle",
    "budget",
    "empirical_mean_step",
    "lecam_birge_step",
    "EwaState",
    "ExpertFunction",
    "HellingerSingleton",
    "L2Reduction",
    "LoglossRR",
    "ewa_predict",
    "ewa_regret_audit",
    "ewa_update",
]

__version__ = "0.1.0"
