"""Reference HTTP server for the /predict classifier wire contract."""

from riskadapter.scorers import AdapterError, ConstantScorer, LexiconScorer, TransformerScorer
from riskadapter.service import AdapterConfig, build_httpd, build_scorer, serve_predictions

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "ConstantScorer",
    "LexiconScorer",
    "TransformerScorer",
    "build_httpd",
    "build_scorer",
    "serve_predictions",
]
