"""Information-bottleneck graph structure learning.

The package learns a compressed task-relevant graph (a feature mask plus a
new adjacency) jointly with a stochastic graph embedding, trained end to end
with a classification term and a closed-form Gaussian KL penalty. A small
exact information-theory engine verifies the underlying inequalities on
finite alphabets, and a harness reproduces the training protocols at desk
scale. Everything runs on a self-contained reverse-mode autodiff core with
interchangeable numpy / compiled kernels.
"""

from . import kernels
from .autodiff import Tape, Tensor, backward, no_grad, parameter, tensor
from .graphs import (
    Graph,
    GraphDataset,
    NuisanceTag,
    PerturbationSpec,
    load_dataset,
    perturb_edges,
    save_dataset,
    synth_two_class,
)
from .generator import FeatureMaskParams, IBGraph, StructureLearnerParams, generate
from .encoder import EncoderParams, GaussianEmbedding, encode
from .objective import ClassifierParams, LossBreakdown, vib_loss
from .harness import TrainConfig, beta_sweep, cross_validate, train

__version__ = "0.1.0"

__all__ = [
    "Tape",
    "Tensor",
    "backward",
    "no_grad",
    "parameter",
    "tensor",
    "Graph",
    "GraphDataset",
    "NuisanceTag",
    "PerturbationSpec",
    "load_dataset",
    "save_dataset",
    "synth_two_class",
    "perturb_edges",
    "FeatureMaskParams",
    "StructureLearnerParams",
    "IBGraph",
    "generate",
    "EncoderParams",
    "GaussianEmbedding",
    "encode",
    "ClassifierParams",
    "LossBreakdown",
    "vib_loss",
    "TrainConfig",
    "train",
    "cross_validate",
    "beta_sweep",
    "kernels",
    "__version__",
]
