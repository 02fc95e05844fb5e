"""citenav-scorer protocol adapter around pretrained relevance models."""

from .scoring import AdapterConfig, ModelScorer, StubScorer, build_scorer
from .truncation import truncate_model_tokens

__version__ = "0.1.0"

__all__ = ["AdapterConfig", "ModelScorer", "StubScorer", "build_scorer",
           "truncate_model_tokens", "__version__"]
