"""Keylogger network-flow detection toolkit: preprocessing, feature selection,
classifiers, ensembles, evaluation and SHAP/LIME explanations."""

__version__ = "0.1.0"
