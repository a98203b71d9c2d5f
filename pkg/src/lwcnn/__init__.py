"""Lightweight from-scratch CNN pipeline for 4-class brain MRI classification.

Pure numpy/scipy: layers with hand-written backprop, Adamax, contour-crop
preprocessing, seeded augmentation, stratified splits and k-fold CV, random
hyperparameter search, metrics, and a CLI.
"""

from .augment import (AugmentConfig, AugmentParams, apply_affine, apply_brightness,
                      augment_batch, normalize, sample_params, sample_stream)
from .dataset import (CLASS_NAMES, DatasetIndex, FoldAssignment, Sample, load_batch,
                      one_hot, scan_dataset, stratified_kfold, stratified_split,
                      stratified_split_positions)
from .layers import (Conv2D, Dense, Dropout, Flatten, MaxPool2, ReLU, same_padding,
                     softmax, softmax_cross_entropy)
from .metrics import (ClassMetrics, ConfusionMatrix, Report, aggregate, build_report,
                      confusion, per_class_metrics, render_confusion_csv, render_report)
from .network import (Network, NetworkConfig, build_network, load_weights, param_count,
                      save_weights)
from .optim import AdamaxState, adamax_step
from .preprocess import (BoundingBox, CropParams, CropResult, bilinear_resize,
                         crop_pipeline, dilate, erode, gaussian_blur5,
                         largest_component_bbox, threshold_mask, to_grayscale)
from .trainer import (CallbackConfig, EarlyStopState, EvalResult, History,
                      HistoryRecord, PlateauState, TrainConfig, early_stop_update,
                      evaluate, fit, plateau_update)
from .tuner import (SearchSpace, TrialConfig, TrialResult, TunerReport, retrain_best,
                    run_fold, run_trial, sample_trial, search)

__version__ = "0.1.0"

__all__ = [
    "AdamaxState", "AugmentConfig", "AugmentParams", "BoundingBox", "CLASS_NAMES",
    "CallbackConfig", "ClassMetrics", "ConfusionMatrix", "Conv2D", "CropParams",
    "CropResult", "DatasetIndex", "Dense", "Dropout", "EarlyStopState", "EvalResult",
    "Flatten", "FoldAssignment", "History", "HistoryRecord", "MaxPool2", "Network",
    "NetworkConfig", "PlateauState", "ReLU", "Report", "Sample", "SearchSpace",
    "TrainConfig", "TrialConfig", "TrialResult", "TunerReport", "adamax_step",
    "aggregate", "apply_affine", "apply_brightness", "augment_batch",
    "bilinear_resize", "build_network", "build_report", "confusion", "crop_pipeline",
    "dilate", "early_stop_update", "erode", "evaluate", "fit", "gaussian_blur5",
    "largest_component_bbox", "load_batch", "load_weights", "normalize", "one_hot",
    "param_count", "per_class_metrics", "plateau_update", "render_confusion_csv",
    "render_report", "retrain_best", "run_fold", "run_trial", "same_padding",
    "sample_params", "sample_stream", "sample_trial", "save_weights", "scan_dataset",
    "search", "softmax", "softmax_cross_entropy", "stratified_kfold",
    "stratified_split", "stratified_split_positions", "threshold_mask",
    "to_grayscale",
]
