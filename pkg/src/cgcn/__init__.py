"""Convexified graph convolutional networks for graph classification.

Layers lift shifted node signals into a kernel feature space (exact or
Nystrom factorization) and apply linear filters constrained to a nuclear
norm ball, so each layer is trained by solving a convex problem.
"""

from .factorization import FactorizedKernel, factorize_exact, factorize_vectors, map_to_features, nystrom
from .graph import Graph, GraphBatch, ShiftOperator, build_shift_operator, normalize_rows, shift_signal, shift_stack
from .io import load_model, load_tudataset, save_model
from .kernels import ActivationKind, KernelSpec, build_kernel_matrix, c_sigma_bound, eval_kernel, kernel_products_vector
from .model import CgcnLayer, CgcnModel, Readout, layer_forward, layer_kernel_features, model_forward
from .optim import NuclearBall, nuclear_budget, nuclear_norm, project_l1_ball, project_nuclear
from .trainer import Dataset, GraphSample, TrainConfig, evaluate, split_dataset, train_layerwise

__version__ = "0.1.0"
