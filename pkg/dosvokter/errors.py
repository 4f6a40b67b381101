"""
Feiltyper for DosVokter

Alle feil arver fra DosVokterError slik at CLI-en kan skille
valideringsfeil (exit 1) fra kjøretidsfeil (exit 2).
"""
from typing import Optional


class DosVokterError(Exception):
    """Basisklasse for alle feil i pakken"""

    # Settes av runner når feilen skjer inne i et navngitt scenario
    scenario: Optional[str] = None


class SequenceError(DosVokterError, ValueError):
    """Ugyldig DoS-sekvens eller ugyldig måleintervall"""


class EstimatorError(DosVokterError, ValueError):
    """Hendelser i feil rekkefølge, spørring utenfor historikk, ugyldig input"""


class UnverifiedBoundError(DosVokterError, ValueError):
    """Konstanter som ikke består defekt-skanningen"""


class ModelError(DosVokterError, ValueError):
    """Ugyldig graf, plant eller kontrollerparameter"""


class SimulationError(DosVokterError, RuntimeError):
    """NaN/overflow under integrasjon og andre kjøretidsfeil"""


class ScenarioError(DosVokterError, ValueError):
    """Feil i en scenariofil, med linjenummer og nøkkel når de er kjent"""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        self.line = line
        self.key = key
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)


class UnknownKeyError(ScenarioError):
    pass


class MissingKeyError(ScenarioError):
    pass


class InvariantViolationError(ScenarioError):
    pass


class ScenarioSyntaxError(ScenarioError):
    pass
