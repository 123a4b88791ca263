"""The seven base classifiers behind one ``Learner`` interface."""
from .base import Learner, learner_class, sigmoid
from .bayes import GaussianNB, train_naive_bayes
from .boosting import AdaBoost, GradientBoostedTrees, train_adaboost, train_gradient_boosted_trees
from .forest import RandomForest, train_random_forest
from .linear import LogisticRegression, train_logistic_regression
from .svm import SVC, train_svm_rbf
from .tree import DecisionTree, train_decision_tree

__all__ = [
    "Learner", "learner_class", "sigmoid",
    "AdaBoost", "DecisionTree", "GaussianNB", "GradientBoostedTrees", "LogisticRegression",
    "RandomForest", "SVC",
    "train_adaboost", "train_decision_tree", "train_gradient_boosted_trees",
    "train_logistic_regression", "train_naive_bayes", "train_random_forest", "train_svm_rbf",
]
