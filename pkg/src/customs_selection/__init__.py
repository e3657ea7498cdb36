"""Online customs-inspection selection: exploitation, exploration and hybrids."""

from .ingest import Declaration, InspectionLabel, LabeledDeclaration, parse_declarations, slice_weeks
from .model import ModelSnapshot, TrainConfig, train
from .selection import StrategySpec, select
from .simulate import SimulationConfig, Simulation, make_plan
from .synthgen import GeneratorConfig, generate

__all__ = [
    "Declaration",
    "GeneratorConfig",
    "InspectionLabel",
    "LabeledDeclaration",
    "ModelSnapshot",
    "Simulation",
    "SimulationConfig",
    "StrategySpec",
    "TrainConfig",
    "generate",
    "make_plan",
    "parse_declarations",
    "select",
    "slice_weeks",
    "train",
]
