"""Batch active-learning selection engine for sequence-labeling tasks."""

__version__ = "0.1.0"

from .cluster import Clustering, clusters_selected, default_k, kmeans, mean_nn_distance
from .harness import LearningCurve, RoundResult, ensemble_size_sweep, run_active_learning
from .learner import Ensemble, ToyLearnerConfig, evaluate, sample_captions, train_toy_ensemble
from .metrics import bleu
from .pool import ItemRecord, Pool, apply_batch, load_pool, pool_from_items, seed_split
from .scorers import (CaptionSample, EnsembleCaptionSet, ScoreReport,
                      TokenDistribution, agreement_score, chosen_token_logprob,
                      divergence_score, entropy_score_full, entropy_score_mc,
                      likelihood_score, score_pool, token_kl)
from .select import (SelectionBatch, select_capped, select_coreset_greedy,
                     select_random, select_random_capped)
from .synthetic import SyntheticConfig, generate
