"""Event-based concurrent models: semantics, rely-guarantee checking and information-flow security."""
from .model import Model, ModelError, ModelTooLarge
from .syntax import Diagnostic, ParseError, SourceFile, parse_model, pretty_print

__all__ = ["Model", "ModelError", "ModelTooLarge", "Diagnostic", "ParseError",
           "SourceFile", "parse_model", "pretty_print"]
__version__ = "0.1.0"
