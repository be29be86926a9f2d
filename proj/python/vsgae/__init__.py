"""Graph autoencoder, accuracy predictor and training-set samplers for small architecture cells."""

from ._vsgae import (
    CellGraph,
    Dataset,
    PcaModel,
    VsgaeModel,
    canonical_form,
    edit_distance,
    enumerate_valid,
    eval_prior_validity,
    eval_reconstruction,
    fit_pca,
    graph_hash,
    is_valid,
    latent_bin_sample,
    longest_path,
    make_dataset,
    sample_edit_uniform,
    sample_uniform_per_size,
    split,
    synth_accuracy,
    train_predictor,
    zero_shot,
)

__all__ = [
    "CellGraph",
    "Dataset",
    "PcaModel",
    "VsgaeModel",
    "canonical_form",
    "edit_distance",
    "enumerate_valid",
    "eval_prior_validity",
    "eval_reconstruction",
    "fit_pca",
    "graph_hash",
    "is_valid",
    "latent_bin_sample",
    "longest_path",
    "make_dataset",
    "sample_edit_uniform",
    "sample_uniform_per_size",
    "split",
    "synth_accuracy",
    "train_predictor",
    "zero_shot",
]
