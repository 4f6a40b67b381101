"""
Innebygde scenarier - eksemplene fra analysen som .scn-filer
"""
import os
from typing import List, Tuple

from ..errors import ScenarioError
from ..scenario import ScenarioConfig, load_scenario
from ..settings import CORPUS_DIR

# (navn, fil, beskrivelse)
CORPUS: List[Tuple[str, str, str]] = [
    (
        "example1_estimator",
        "example1_estimator.scn",
        "Kanonisk trace, bare estimatoren (eps0 0.01, theta 0.67, ell 2)",
    ),
    (
        "example1_consensus",
        "example1_consensus.scn",
        "7 agenter i ring med adaptiv samplingsperiode",
    ),
    (
        "example1_impulsive",
        "example1_impulsive.scn",
        "Impulsiv stabilisering av ustabilt 2x2-system",
    ),
    (
        "example2_theta",
        "example2_theta.scn",
        "Sweep over theta (0.67 vs 0.9)",
    ),
    (
        "example2_ell",
        "example2_ell.scn",
        "Sweep over ell (2 vs 3) med theta 0.9",
    ),
    (
        "example3_epsilon0",
        "example3_epsilon0.scn",
        "Sweep over eps0 (0.01 vs 0.2) med theta 0.9, ell 3",
    ),
    (
        "example4",
        "example4.scn",
        "Alternerende angrep [2n+1, 2n+2), theta 0.67",
    ),
    (
        "example4_theta1",
        "example4_theta1.scn",
        "Samme angrep med theta = 1: duration-bounden identifiseres aldri",
    ),
]


def list_scenarios() -> List[Tuple[str, str]]:
    """(navn, beskrivelse) for alle innebygde scenarier"""
    return [(name, description) for name, _, description in CORPUS]


def scenario_path(name: str) -> str:
    for entry_name, filename, _ in CORPUS:
        if entry_name == name:
            return os.path.join(CORPUS_DIR, filename)
    raise ScenarioError(f"unknown corpus scenario '{name}'")


def load(name: str) -> ScenarioConfig:
    return load_scenario(scenario_path(name))


def select(name: str) -> List[str]:
    """
    Eksakt navn, ellers alle scenarier som starter med '<navn>_'.

    select("example1") gir de tre example1-scenariene.
    """
    names = [entry[0] for entry in CORPUS]
    if name in names:
        return [name]
    matches = [n for n in names if n.startswith(name + "_")]
    if not matches:
        raise ScenarioError(f"unknown corpus scenario '{name}'")
    return matches
