"""
Method presets.

A preset fixes the loss weights that define a method; everything else
keeps its default and can still be overridden.
"""

from typing import Any, Dict

PRESETS: Dict[str, Dict[str, Any]] = {
    "fedavg": {"mu_moon": 0.0, "mu_glob_start": 0.0, "mu_glob_end": 0.0},
    "moon": {"mu_glob_start": 0.0, "mu_glob_end": 0.0},
    "fedssc": {},
    "glob_only": {"mu_moon": 0.0},
    "centralized": {"mu_moon": 0.0, "mu_glob_start": 0.0, "mu_glob_end": 0.0, "num_clients": 1},
}

# Column order for plot exports
METHOD_ORDER = ("centralized", "fedavg", "moon", "glob_only", "fedssc")


def preset_values(name: str) -> Dict[str, Any]:
    return dict(PRESETS[name])


def method_sort_key(name: str) -> tuple:
    if name in METHOD_ORDER:
        return (METHOD_ORDER.index(name), name)
    return (len(METHOD_ORDER), name)
