"""Faceted sentence highlighting engine for skimming scientific papers."""

__version__ = "0.1.0"

from skimlight.model import Facet, PaperDocument, validate

__all__ = ["Facet", "PaperDocument", "validate", "__version__"]
