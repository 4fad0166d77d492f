"""UI design-quality pipeline: synthetic degradation datasets, a toy
dual-encoder scorer, evaluation metrics, and a rating-collection service."""

__version__ = "0.1.0"
