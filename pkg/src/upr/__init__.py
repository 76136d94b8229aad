"""Unfolded phase retrieval: SPARTA/IRWF baselines, their learned unrolled networks, training and benchmarks."""
from .model import encode, is_success, phase_distance, relative_mse
from .numerics import DimensionError, Rng, gaussian_matrix, hard_threshold, power_iteration, top_k_indices
from .solvers import IRWF, SPARTA, IrwfConfig, SpartaConfig, run_baseline
from .training import CASE_MASKS, TrainableMask, TrainConfig, backward, generate_dataset, loss_batch, train
from .unfolded import UPR_IRWF, UPR_SPARTA, NetworkParams, forward, init_for, load_params, make_identity_params, save_params

__version__ = "0.1.0"
