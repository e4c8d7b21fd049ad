"""Python bindings for the pendyn library.

Configs can be given as JSON text, a dict, or a path to a JSON file.
"""

from ._pendyn import (
    PendynError,
    gallery,
    lemma_constants,
    load_config,
    oracle,
    run,
    validate,
)

__all__ = ["PendynError", "gallery", "lemma_constants", "load_config", "oracle", "run", "validate"]
