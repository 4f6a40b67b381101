"""
Scenariofiler: linjebasert `seksjon.nøkkel = verdi` med #-kommentarer

Tider skrives som desimaltall eller brøker (4/3). Intervall-lister skrives
`h:tau, h:tau`, matriser `1, 0.3; 0, 1`. Alt valideres ved parsing, og
feil peker på linje og nøkkel.
"""
import logging
import math
import os
from fractions import Fraction
from typing import Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from . import consensus_ctrl, dos_model, impulsive_ctrl
from .dos_model import DoSSequence
from .errors import (
    InvariantViolationError,
    MissingKeyError,
    ScenarioError,
    ScenarioSyntaxError,
    UnknownKeyError,
)
from .estimator import EstimatorConfig
from .settings import DEFAULT_INTEGRATOR_STEP, DEFAULT_SETTLE_THRESHOLD, OUTPUT_KINDS

logger = logging.getLogger(__name__)

Pairs = Tuple[Tuple[float, float], ...]


class SequenceSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["finite", "periodic"]
    intervals: Pairs = ()
    prologue: Pairs = ()
    period: Optional[float] = None
    pattern: Pairs = ()
    start: Optional[float] = None

    @model_validator(mode="after")
    def _check_kind(self) -> "SequenceSpec":
        if self.kind == "periodic":
            if self.period is None or self.start is None or not self.pattern:
                raise ValueError("periodic sequence needs period, pattern and start")
            if self.intervals:
                raise ValueError("intervals only apply to finite sequences (use prologue)")
        elif self.prologue or self.pattern or self.period is not None or self.start is not None:
            raise ValueError("finite sequence takes only intervals")
        self.build()
        return self

    def build(self) -> DoSSequence:
        if self.kind == "finite":
            return dos_model.finite_sequence(self.intervals)
        return dos_model.periodic_sequence(self.prologue, self.period, self.pattern, self.start)


class ConsensusSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    graph: Literal["ring", "path", "complete", "edges"]
    agents: int
    edges: Tuple[Tuple[int, int], ...] = ()
    x0: Optional[Tuple[float, ...]] = None  # None = tilfeldig fra run.seed
    x0_sum: float = 0.0
    delta0: float
    gamma1: float

    @field_validator("gamma1")
    @classmethod
    def _check_gamma1(cls, v: float) -> float:
        if not v > 1:
            raise ValueError(f"gamma1 must be > 1, got {v}")
        return v

    @model_validator(mode="after")
    def _check_network(self) -> "ConsensusSpec":
        if self.x0 is not None and len(self.x0) != self.agents:
            raise ValueError(f"x0 has {len(self.x0)} entries for {self.agents} agents")
        if self.graph == "edges" and not self.edges:
            raise ValueError("graph = edges needs consensus.edges")
        lam_n = consensus_ctrl.lambda_extremes(consensus_ctrl.laplacian(self.build_graph()))[1]
        if not (self.delta0 > 0 and abs(1.0 - self.delta0 * lam_n) < 1.0):
            raise ValueError(f"delta0={self.delta0} must satisfy 0 < delta0 < 2/lambda_N = {2.0 / lam_n:.4f}")
        return self

    def build_graph(self) -> consensus_ctrl.Graph:
        builders: Dict[str, Callable[[int], consensus_ctrl.Graph]] = {
            "ring": consensus_ctrl.ring_graph,
            "path": consensus_ctrl.path_graph,
            "complete": consensus_ctrl.complete_graph,
        }
        if self.graph == "edges":
            return consensus_ctrl.Graph.from_edges(self.agents, self.edges)
        return builders[self.graph](self.agents)

    def initial_states(self, seed: int) -> np.ndarray:
        if self.x0 is not None:
            return np.array(self.x0, dtype=float)
        return consensus_ctrl.random_initial_states(self.agents, self.x0_sum, seed)


class ImpulsiveSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: Tuple[Tuple[float, ...], ...]
    jump_gain: float = impulsive_ctrl.FLAGSHIP_JUMP_SCALE
    mu: Optional[float] = None
    beta: Optional[float] = None
    x0: Tuple[float, ...]
    gamma3: float
    integrator_step: float = DEFAULT_INTEGRATOR_STEP
    flow: Literal["expm", "rk4"] = "expm"

    @field_validator("gamma3")
    @classmethod
    def _check_gamma3(cls, v: float) -> float:
        if not v > 1:
            raise ValueError(f"gamma3 must be > 1, got {v}")
        return v

    @model_validator(mode="after")
    def _check_plant(self) -> "ImpulsiveSpec":
        plant = self.build_plant()
        if len(self.x0) != plant.dim:
            raise ValueError(f"x0 has {len(self.x0)} entries for a {plant.dim}-dimensional plant")
        if self.integrator_step <= 0:
            raise ValueError(f"integrator_step must be > 0, got {self.integrator_step}")
        return self

    def build_plant(self) -> impulsive_ctrl.Plant:
        return impulsive_ctrl.Plant.linear(self.a, jump_scale=self.jump_gain, beta=self.beta, mu=self.mu)


class RunSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    horizon: float
    seed: int = 0
    settle_threshold: float = DEFAULT_SETTLE_THRESHOLD
    outputs: Tuple[str, ...] = OUTPUT_KINDS

    @field_validator("horizon")
    @classmethod
    def _check_horizon(cls, v: float) -> float:
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"horizon must be > 0, got {v}")
        return v

    @field_validator("outputs")
    @classmethod
    def _check_outputs(cls, v: Tuple[str, ...]) -> Tuple[str, ...]:
        unknown = [o for o in v if o not in OUTPUT_KINDS]
        if unknown:
            raise ValueError(f"unknown outputs {unknown}, expected some of {list(OUTPUT_KINDS)}")
        return v


class SweepSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    parameter: Literal["estimator.theta", "estimator.ell", "estimator.epsilon0"]
    values: Tuple[float, ...]

    @field_validator("values")
    @classmethod
    def _check_values(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if not v:
            raise ValueError("sweep needs at least one value")
        return v


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    description: str = ""
    sequence: SequenceSpec
    estimator: EstimatorConfig
    theta_bypass: bool = False
    controller: Literal["none", "consensus", "impulsive"] = "none"
    consensus: Optional[ConsensusSpec] = None
    impulsive: Optional[ImpulsiveSpec] = None
    run: RunSpec
    sweep: Optional[SweepSpec] = None

    @model_validator(mode="after")
    def _check_controller(self) -> "ScenarioConfig":
        if self.controller == "consensus" and self.consensus is None:
            raise ValueError("controller.kind = consensus needs consensus.* keys")
        if self.controller == "impulsive" and self.impulsive is None:
            raise ValueError("controller.kind = impulsive needs impulsive.* keys")
        if self.controller != "consensus" and self.consensus is not None:
            raise ValueError("consensus.* keys given but controller.kind is not consensus")
        if self.controller != "impulsive" and self.impulsive is not None:
            raise ValueError("impulsive.* keys given but controller.kind is not impulsive")
        return self

    def build_sequence(self) -> DoSSequence:
        return self.sequence.build()


# Verdiparsere

def _number(text: str) -> float:
    text = text.strip()
    value = float(Fraction(text)) if "/" in text else float(text)
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {text!r}")
    return value


def _integer(text: str) -> int:
    return int(text.strip())


def _boolean(text: str) -> bool:
    text = text.strip().lower()
    if text not in ("true", "false"):
        raise ValueError(f"expected true or false, got {text!r}")
    return text == "true"


def _word(text: str) -> str:
    return text.strip()


def _items(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _numbers(text: str) -> Tuple[float, ...]:
    return tuple(_number(item) for item in _items(text))


def _pairs(text: str) -> Pairs:
    out = []
    for item in _items(text):
        if item.count(":") != 1:
            raise ValueError(f"expected h:tau, got {item!r}")
        h, tau = item.split(":")
        out.append((_number(h), _number(tau)))
    return tuple(out)


def _edges(text: str) -> Tuple[Tuple[int, int], ...]:
    out = []
    for item in _items(text):
        i, j = item.split("-")
        out.append((int(i), int(j)))
    return tuple(out)


def _matrix(text: str) -> Tuple[Tuple[float, ...], ...]:
    rows = tuple(_numbers(row) for row in text.split(";"))
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("matrix rows must have equal length")
    return rows


def _words(text: str) -> Tuple[str, ...]:
    return tuple(_items(text))


def _initial_states(text: str):
    return None if text.strip() == "random" else _numbers(text)


# nøkkel -> (sti i config, parser); rekkefølgen er også utskriftsrekkefølgen
KEYS: Dict[str, Tuple[Tuple[str, ...], Callable]] = {
    "scenario.name": (("name",), _word),
    "scenario.description": (("description",), _word),
    "sequence.kind": (("sequence", "kind"), _word),
    "sequence.intervals": (("sequence", "intervals"), _pairs),
    "sequence.prologue": (("sequence", "prologue"), _pairs),
    "sequence.period": (("sequence", "period"), _number),
    "sequence.pattern": (("sequence", "pattern"), _pairs),
    "sequence.start": (("sequence", "start"), _number),
    "estimator.epsilon0": (("estimator", "epsilon0"), _number),
    "estimator.theta": (("estimator", "theta"), _number),
    "estimator.ell": (("estimator", "ell"), _integer),
    "estimator.unsound_theta_bypass": (("theta_bypass",), _boolean),
    "controller.kind": (("controller",), _word),
    "consensus.graph": (("consensus", "graph"), _word),
    "consensus.agents": (("consensus", "agents"), _integer),
    "consensus.edges": (("consensus", "edges"), _edges),
    "consensus.x0": (("consensus", "x0"), _initial_states),
    "consensus.x0_sum": (("consensus", "x0_sum"), _number),
    "consensus.delta0": (("consensus", "delta0"), _number),
    "consensus.gamma1": (("consensus", "gamma1"), _number),
    "impulsive.a": (("impulsive", "a"), _matrix),
    "impulsive.jump_gain": (("impulsive", "jump_gain"), _number),
    "impulsive.mu": (("impulsive", "mu"), _number),
    "impulsive.beta": (("impulsive", "beta"), _number),
    "impulsive.x0": (("impulsive", "x0"), _numbers),
    "impulsive.gamma3": (("impulsive", "gamma3"), _number),
    "impulsive.integrator_step": (("impulsive", "integrator_step"), _number),
    "impulsive.flow": (("impulsive", "flow"), _word),
    "run.horizon": (("run", "horizon"), _number),
    "run.seed": (("run", "seed"), _integer),
    "run.settle_threshold": (("run", "settle_threshold"), _number),
    "run.outputs": (("run", "outputs"), _words),
    "sweep.parameter": (("sweep", "parameter"), _word),
    "sweep.values": (("sweep", "values"), _numbers),
}

REQUIRED = ("sequence.kind", "estimator.epsilon0", "estimator.theta", "estimator.ell", "run.horizon")


def _read_entries(text: str) -> Dict[str, Tuple[str, int]]:
    entries: Dict[str, Tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioSyntaxError("expected 'section.key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise UnknownKeyError("unknown key", line=lineno, key=key)
        if key in entries:
            raise ScenarioSyntaxError(f"duplicate key (first on line {entries[key][1]})", line=lineno, key=key)
        entries[key] = (value, lineno)
    return entries


def _locate(loc: Tuple, entries: Dict[str, Tuple[str, int]]) -> Tuple[Optional[int], Optional[str]]:
    """Finn nøkkel og linje for en pydantic-feilplassering"""
    parts = [str(p) for p in loc if not isinstance(p, int)]
    for key, (path, _) in KEYS.items():
        if list(path) == parts[:len(path)] and len(path) == len(parts) and key in entries:
            return entries[key][1], key
    section = parts[0] if parts else ""
    section_keys = [k for k, (path, _) in KEYS.items() if path[0] == section and k in entries]
    if section_keys:
        first = min(section_keys, key=lambda k: entries[k][1])
        key = ".".join([first.split(".")[0]] + parts[1:]) if len(parts) > 1 else first.split(".")[0]
        return entries[first][1], key
    return None, ".".join(parts) or None


def parse_scenario(text: str, name: Optional[str] = None) -> ScenarioConfig:
    """
    Parse og valider en scenariofil.

    Ukjent nøkkel, manglende nøkkel og brudd på invarianter gir hver sin
    ScenarioError-subklasse med linjenummer og nøkkel.
    """
    entries = _read_entries(text)
    if not any(key.startswith("sequence.") for key in entries):
        raise MissingKeyError("missing sequence")
    for key in REQUIRED:
        if key not in entries:
            raise MissingKeyError("missing required key", key=key)

    data: Dict = {}
    for key, (value, lineno) in entries.items():
        path, parser = KEYS[key]
        try:
            parsed = parser(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ScenarioSyntaxError(str(exc), line=lineno, key=key) from exc
        target = data
        for part in path[:-1]:
            target = target.setdefault(part, {})
        target[path[-1]] = parsed

    if "name" not in data:
        if name is None:
            raise MissingKeyError("missing required key", key="scenario.name")
        data["name"] = name

    if data.get("theta_bypass"):
        est = data["estimator"]
        data["estimator"] = EstimatorConfig.unchecked(est["epsilon0"], est["theta"], est["ell"])

    try:
        config = ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        lineno, key = _locate(err["loc"], entries)
        message = err["msg"]
        if message.startswith("Value error, "):
            message = message[len("Value error, "):]
        if err["type"] == "missing":
            raise MissingKeyError("missing required key", line=lineno, key=key) from exc
        raise InvariantViolationError(message, line=lineno, key=key) from exc

    logger.debug("parsed scenario %s (%s controller)", config.name, config.controller)
    return config


def load_scenario(path: str) -> ScenarioConfig:
    """Les en .scn-fil; filnavnet er standardnavnet"""
    with open(path, encoding="utf-8") as f:
        text = f.read()
    stem = os.path.splitext(os.path.basename(path))[0]
    return parse_scenario(text, name=stem)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _fmt_value(key: str, value) -> str:
    parser = KEYS[key][1]
    if parser is _pairs:
        return ", ".join(f"{_fmt(h)}:{_fmt(t)}" for h, t in value)
    if parser is _edges:
        return ", ".join(f"{i}-{j}" for i, j in value)
    if parser is _matrix:
        return "; ".join(", ".join(_fmt(v) for v in row) for row in value)
    if parser is _initial_states:
        return "random" if value is None else ", ".join(_fmt(v) for v in value)
    if parser in (_numbers, _words):
        return ", ".join(_fmt(v) for v in value)
    return _fmt(value)


def format_scenario(config: ScenarioConfig) -> str:
    """Skriv config tilbake til filformatet; parse_scenario(format_scenario(c)) == c"""
    data = config.model_dump()
    data["estimator"] = {
        "epsilon0": config.estimator.epsilon0,
        "theta": config.estimator.theta,
        "ell": config.estimator.ell,
    }
    seq = config.sequence
    skip = {"sequence.intervals"} if seq.kind == "periodic" else {
        "sequence.prologue", "sequence.period", "sequence.pattern", "sequence.start",
    }

    lines = [f"# {config.name}"]
    section = None
    for key, (path, _) in KEYS.items():
        if key in skip:
            continue
        value = data
        for part in path:
            value = value.get(part) if isinstance(value, dict) else None
            if value is None:
                break
        if key == "consensus.x0" and config.consensus is not None:
            value = config.consensus.x0
        elif value is None or (key == "scenario.description" and not value):
            continue
        if key == "estimator.unsound_theta_bypass" and not value:
            continue
        if key.split(".")[0] != section:
            section = key.split(".")[0]
            lines.append("")
        lines.append(f"{key} = {_fmt_value(key, value)}")
    return "\n".join(lines) + "\n"


def expand_sweep(config: ScenarioConfig) -> List[ScenarioConfig]:
    """En variant per sweep-verdi, navngitt <navn>_<verdi>; uten sweep returneres [config]"""
    if config.sweep is None:
        return [config]

    field = config.sweep.parameter.split(".", 1)[1]
    variants = []
    for value in config.sweep.values:
        params = {
            "epsilon0": config.estimator.epsilon0,
            "theta": config.estimator.theta,
            "ell": config.estimator.ell,
        }
        params[field] = int(value) if field == "ell" else value
        try:
            estimator = EstimatorConfig.unchecked(**params) if config.theta_bypass else EstimatorConfig(**params)
        except ValidationError as exc:
            raise InvariantViolationError(exc.errors()[0]["msg"], key=config.sweep.parameter) from exc
        variants.append(config.model_copy(update={
            "name": f"{config.name}_{value:g}",
            "estimator": estimator,
            "sweep": None,
        }))
    return variants


__all__ = [
    "ScenarioConfig", "SequenceSpec", "ConsensusSpec", "ImpulsiveSpec", "RunSpec", "SweepSpec",
    "parse_scenario", "load_scenario", "format_scenario", "expand_sweep", "ScenarioError",
]
