"""Matrix completion with social and item similarity graphs.

Four-stage, parameter-free pipeline: spectral weak recovery on both graphs,
plug-in estimation of the block model, per-entity likelihood refinement, and
block-wise reconstruction of the nominal rating matrix; plus the generative
model, threshold calculators, and an experiment harness.
"""

from .core import (ClusterLabels, NominalMatrix, RatingAlphabet,
                   RatingObservation, SimpleGraph, expand_nominal,
                   match_labels_hungarian, misclassification_proportion)
from .estimation import (ModelEstimates, estimate_connectivity, estimate_model,
                         estimate_personalization)
from .genmodel import (ConnectivityMatrix, GeneratedInstance, ModelParams,
                       PersonalizationModel, equal_size_labels,
                       generate_instance, sample_personalized_ratings,
                       sample_sbm, subsample, symmetric_conn_from_quality,
                       uniform_noise_personalization)
from .harness import (ExperimentConfig, PipelineOptions, TrialResult,
                      evaluate_mae, load_config, run_pipeline, sweep)
from .refinement import (refine_all, refine_item, refine_user,
                         reconstruct_nominal_argmax,
                         reconstruct_nominal_majority)
from .spectral import SpectralConfig, spectral_cluster, spectral_embed
from .splitting import SplitGraphs, identity_split, split_graph
from .theory import (ThresholdReport, achievability_threshold,
                     build_threshold_report, cluster_discrepancies,
                     compute_graph_quality, converse_threshold, hellinger_sq,
                     normalized_complexity)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
