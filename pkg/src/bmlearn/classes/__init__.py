"""Concrete hypothesis classes and their time- and memory-efficient learners."""
from .decision_list import (
    DecisionList,
    DecisionListClass,
    DecisionListLearner,
    learn_decision_list,
    parse_decision_list,
    random_decision_list,
)
from .equal_piece import EqualPieceClass, EqualPieceLearner, learn_equal_piece, piece_table
from .threshold import ThresholdClass, ThresholdInterval, ThresholdLearner, learn_threshold

__all__ = [
    "DecisionList",
    "DecisionListClass",
    "DecisionListLearner",
    "EqualPieceClass",
    "EqualPieceLearner",
    "ThresholdClass",
    "ThresholdInterval",
    "ThresholdLearner",
    "learn_decision_list",
    "learn_equal_piece",
    "learn_threshold",
    "parse_decision_list",
    "random_decision_list",
    "piece_table",
]
