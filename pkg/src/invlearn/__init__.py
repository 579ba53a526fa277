"""Loop invariant inference by exact learning over predicate abstractions."""

from .engine import EngineConfig, InferenceResult, infer, run_corpus, verify_invariant
from .frontend import ParseError, load, parse

__all__ = ["EngineConfig", "InferenceResult", "ParseError", "infer", "load", "parse", "run_corpus", "verify_invariant"]
__version__ = "0.1.0"
