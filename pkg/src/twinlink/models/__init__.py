"""Classifiers: convolutional network on ADCPM images, random forest and RBF-SVM on path features."""
from .forest import ForestConfig, RandomForest, fit_forest, gini, predict_forest
from .neural import (
    ConvNet,
    ModelState,
    NeuralConfig,
    TrainingDiverged,
    backward,
    forward,
    gradient_check,
    load_checkpoint,
    save_checkpoint,
    sigmoid,
    train,
)
from .svm import SvmConfig, SvmModel, fit_svm, predict_svm, rbf_kernel

__all__ = [
    "ConvNet", "ForestConfig", "ModelState", "NeuralConfig", "RandomForest", "SvmConfig", "SvmModel",
    "TrainingDiverged", "backward", "fit_forest", "fit_svm", "forward", "gini", "gradient_check",
    "load_checkpoint", "predict_forest", "predict_svm", "rbf_kernel", "save_checkpoint", "sigmoid", "train",
]
