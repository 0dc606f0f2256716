"""Fuzzy twin SVMs with three-way membership for imbalanced binary classification."""
from .dataset import (DatasetManifest, FoldPlan, LabeledDataset, dataset_from_arrays,
                      imbalance_ratio, load_dataset, stratified_folds, subsample_to_ir)
from .evaluation import (Confusion, g_means, grid_search_cv, make_algorithm,
                         rank_statistics)
from .kernel import KernelSpec, center_gram, gram, sigma2_heuristic
from .membership import three_way_membership, three_way_table, thresholds_from_k
from .models import (TwftsvmParams, fit_fsvm, fit_svm, fit_tsvm, fit_twftsvm,
                     load_model, predict, save_model)
from .qp import BoxQP, solve_box_qp, solve_svm_dual

__version__ = "0.1.0"

__all__ = [
    "BoxQP", "Confusion", "DatasetManifest", "FoldPlan", "KernelSpec", "LabeledDataset",
    "TwftsvmParams", "center_gram", "dataset_from_arrays", "fit_fsvm", "fit_svm", "fit_tsvm",
    "fit_twftsvm", "g_means", "gram", "grid_search_cv", "imbalance_ratio", "load_dataset",
    "load_model", "make_algorithm", "predict", "rank_statistics", "save_model",
    "sigma2_heuristic", "solve_box_qp", "solve_svm_dual", "stratified_folds",
    "subsample_to_ir", "three_way_membership", "three_way_table", "thresholds_from_k",
]
