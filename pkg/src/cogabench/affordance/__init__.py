from .core import (
    ActionMask,
    Affordance,
    AffordanceSet,
    bbox_to_bins,
    build_mask,
)
from .protocol import run_external_script
from .providers import (
    AffordanceProvider,
    BuiltinProvider,
    DroppingProvider,
    ExternalScriptProvider,
    OracleProvider,
    builtin_provider,
)

__all__ = [
    "ActionMask",
    "Affordance",
    "AffordanceSet",
    "AffordanceProvider",
    "BuiltinProvider",
    "DroppingProvider",
    "ExternalScriptProvider",
    "OracleProvider",
    "bbox_to_bins",
    "build_mask",
    "builtin_provider",
    "run_external_script",
]
