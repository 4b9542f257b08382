"""Federated feature engineering: sketch-based usefulness judges and masked feature generation."""

from .dataset import Table, PartyView, load_bundled, load_table, vertical_split
from .errors import CandidateSpaceExhausted, ConfigError, DataError, FedFeatError
from .sketch import SketchConfig, build_qsa
from .transforms import TransformKind, apply_transform

__version__ = "0.1.0"

__all__ = [
    "CandidateSpaceExhausted",
    "ConfigError",
    "DataError",
    "FedFeatError",
    "PartyView",
    "SketchConfig",
    "Table",
    "TransformKind",
    "apply_transform",
    "build_qsa",
    "load_bundled",
    "load_table",
    "vertical_split",
]
