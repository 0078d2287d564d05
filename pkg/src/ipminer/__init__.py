"""Mining static and evolving interaction patterns from agent trajectories."""

__version__ = "0.1.0"

from .events import EventInstance, EventTemplate, extract_events
from .evipm import EvipmConfig, EvolvingPattern, SequenceInstance, evipm
from .geometry import InteractionParams, PositionCode
from .graph import build_neighbor_graph
from .isomorphism import PatternMultigraph, canonical_form, canonical_key, is_isomorphic
from .sipm import MiningThresholds, StaticPattern, StaticPatternInstance, sipm, temporal_support
from .trajectory import FormatDescriptor, TrajectoryDataset, derive_kinematics, load_trajectories

__all__ = [
    "EventInstance", "EventTemplate", "extract_events",
    "EvipmConfig", "EvolvingPattern", "SequenceInstance", "evipm",
    "InteractionParams", "PositionCode", "build_neighbor_graph",
    "PatternMultigraph", "canonical_form", "canonical_key", "is_isomorphic",
    "MiningThresholds", "StaticPattern", "StaticPatternInstance", "sipm", "temporal_support",
    "FormatDescriptor", "TrajectoryDataset", "derive_kinematics", "load_trajectories",
]
