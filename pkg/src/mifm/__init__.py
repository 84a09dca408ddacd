"""Bayesian regression with adaptive selection of multi-way interactions."""
__version__ = "0.1.0"

from .ffm import (FfmParams, DepthTable, build_depth_table, conditional_inclusion_prob, depth_mean,
                  sample_column, pattern_log_prob, sigma_d_posterior, add_depth_probability, gibbs_flip_column)
from .model import (Schema, Dataset, ModelParams, SyntheticTruth, mean_response_continuous,
                    mean_response_categorical, effective_coefficient, compute_K0, verify_representability,
                    one_hot_encode, predict_mean)
from .gibbs import Hyperparams, HyperState, ChainConfig, PosteriorSamples, run_chain, run_chains, log_likelihood
from .selection import (MarginalReport, SelectionRule, interaction_marginals, select_interactions,
                        posterior_predictive, refit_least_squares)
from .synth import ExperimentSpec, synth_generate
from .metrics import metric_rmse, metric_amape, metric_recovery
