"""Semi-supervised progressive subspace learning for image cubes.

A chain of linear projections plus a label readout is trained jointly:
graph-regularized layerwise pre-training (ADMM), then alternating
fine-tuning against one-hot class targets, evaluated with a nearest-neighbor
classifier.
"""

from .embedding import LinearEmbedding, lpp_fit, pca_fit
from .errors import FormatError, InputError, NumericalError, PipelineError
from .graphs import (GraphBundle, alignment_graph, assemble_fused,
                     knn_heat_graph, laplacian)
from .metrics import (ConfusionMatrix, MetricsReport, compute_metrics,
                      confusion, nn_classify)
from .model import (FitReport, ProjectionStack, finetune_projection,
                    fit_readout, fit_stack, layer_objective, objective_value,
                    transform, update_features_supervised)
from .pretrain import (AdmmState, PretrainReport, pretrain_layer, prox_nonneg,
                       prox_unit_ball, update_decoder, update_duals,
                       update_features, update_nonneg, update_normed,
                       update_projection)
from .superpixels import (Segmentation, segment_count, slic_segment,
                          stream_labels, superpixel_stream)
from .synthetic import SyntheticSpec, generate_synthetic
from .types import (AdmmConfig, FeatureMatrix, HyperParams, OneHotLabels,
                    SampleSplit, one_hot_encode, two_stream_concat)

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig", "AdmmState", "ConfusionMatrix", "FeatureMatrix",
    "FitReport", "FormatError", "GraphBundle", "HyperParams",
    "InputError", "LinearEmbedding", "MetricsReport", "NumericalError",
    "OneHotLabels", "PipelineError", "PretrainReport", "ProjectionStack",
    "SampleSplit", "Segmentation", "SyntheticSpec", "alignment_graph",
    "assemble_fused", "compute_metrics", "confusion", "finetune_projection",
    "fit_readout", "fit_stack", "generate_synthetic", "knn_heat_graph",
    "laplacian", "layer_objective", "lpp_fit", "nn_classify",
    "objective_value", "one_hot_encode", "pca_fit", "pretrain_layer",
    "prox_nonneg", "prox_unit_ball", "segment_count", "slic_segment",
    "stream_labels", "superpixel_stream", "transform", "two_stream_concat",
    "update_decoder", "update_duals", "update_features",
    "update_features_supervised", "update_nonneg", "update_normed",
    "update_projection",
]
