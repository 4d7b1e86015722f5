"""Benchmark problems: TFIM VQE, MaxCut QAOA and MSE classification."""
from .classifier import (ClassifierTask, DataSplit, Dataset, downsample_images, load_classification_data,
                         load_mnist, make_synthetic_data, read_dataset_csv, read_idx, validation_accuracy,
                         write_dataset_csv)
from .common import ground_energy, observable_loss
from .maxcut import (MaxCutTask, build_maxcut, linear_interpolation_init, maxcut_hamiltonian,
                     random_maxcut_instance, transverse_mixer)
from .tfim import TfimTask, build_tfim, tfim_hamiltonian

__all__ = [
    "ClassifierTask", "DataSplit", "Dataset", "MaxCutTask", "TfimTask", "build_maxcut", "build_tfim",
    "downsample_images", "ground_energy", "linear_interpolation_init", "load_classification_data",
    "load_mnist", "make_synthetic_data", "maxcut_hamiltonian", "observable_loss", "random_maxcut_instance",
    "read_dataset_csv", "read_idx", "tfim_hamiltonian", "transverse_mixer", "validation_accuracy",
    "write_dataset_csv",
]
