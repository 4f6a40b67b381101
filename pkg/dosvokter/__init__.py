"""
DosVokter - sanntidsestimering av DoS-bounds og estimatordrevne sikre kontrollere
"""
from .errors import (
    DosVokterError,
    EstimatorError,
    ModelError,
    ScenarioError,
    SequenceError,
    SimulationError,
    UnverifiedBoundError,
)

__version__ = "0.1.0"
