"""Embedding-norm dynamics of cosine-similarity self-supervised learning."""

from .errors import (CollapseDetected, ConfigError, EmptyClass, InvalidEpsilon, ShapeMismatch,
                     SingletonClass, TooFewPoints, TrainingCollapse, UnequalNorms, ZeroVector)

__version__ = "0.1.0"
