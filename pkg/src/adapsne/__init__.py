"""Entropy-guided t-SNE sampling of representative exemplars from a feature matrix."""

from .affinity import (
    Dataset,
    conditional_row,
    local_perplexity,
    pairwise_sq_dists,
    perplexity_entropy_derivative,
    perplexity_error,
    symmetrize,
)
from .controller import AdapSNE, PipelineConfig, RunResult, run_adapsne
from .embedding import EmbedConfig, Embedding, embed, kl_divergence, kl_gradient, student_t_affinities
from .errors import AdapsneError, ConfigError, DataError, NumericalError, ValidationError
from .fwa import FwaConfig, fwa_search, solve_all_bandwidths
from .grid import GridSpec, entropy_threshold, fit_grid, grid_entropy, histogram
from .io import load_dataset, write_rawmat
from .report import RunReport
from .sampler import ExemplarSet, grid_sample

__version__ = "0.1.0"
