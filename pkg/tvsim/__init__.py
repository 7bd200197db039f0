"""
Simulator for single-layer residual transformers trained on factual-recall
data, comparing question-answer training with in-context-learning training.
"""

__version__ = "0.1.0"
