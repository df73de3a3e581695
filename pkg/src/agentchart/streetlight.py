"""Autonomous street-light case study.

N lights on a line, each with five candidate devices (lighting sensor,
motion sensor, wireless in/out, three-level light switch), a day/night
environment with per-light brightness and people flow, and an
energy-plus-service score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .body import BodyConfig, DeviceSpec, configure_body
from .environment import ContextRule, Environment, EnvVariable, EpisodeTrace
from .errors import InvalidParams
from .evaluation import EvaluationRecord

LEVELS = ("OFF", "DIM", "ON")

LIGHTING_SENSOR = "lighting_sensor"
MOTION_SENSOR = "motion_sensor"
WIRELESS_IN = "wireless_in"
WIRELESS_SPEAKER = "wireless_speaker"
LIGHT_SWITCH = "light_switch"

DAY = "day"
NIGHT = "night"


@dataclass(frozen=True)
class AmbientProfile:
    """Periodic daylight curve in [0, 1]."""

    kind: str = "cosine"  # cosine | constant
    value: float = 1.0  # constant only
    period: int | None = None  # cosine only; default episode_ticks / 2

    def __call__(self, tick: int, episode_ticks: int) -> float:
        if self.kind == "constant":
            return self.value
        period = self.period or max(2, episode_ticks // 2)
        return 0.5 + 0.5 * math.cos(2.0 * math.pi * tick / period)


@dataclass(frozen=True)
class PeopleProcess:
    """Seeded arrival rule: per-light flow values in [0, 1]."""

    kind: str = "random"  # random | none
    rate: float = 0.3

    def sample(self, seed: int, ticks: int, n_lights: int) -> np.ndarray:
        if self.kind == "none":
            return np.zeros((ticks + 1, n_lights))
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(7,)))
        arrivals = rng.random((ticks + 1, n_lights)) < self.rate
        intensity = rng.random((ticks + 1, n_lights))
        return np.where(arrivals, intensity, 0.0)


@dataclass(frozen=True)
class StreetlightRules:
    """Context-weighted score: energy spent plus darkness under people."""

    w_energy: dict[str, float] = field(default_factory=lambda: {DAY: 2.0, NIGHT: 1.0})
    w_dark: dict[str, float] = field(default_factory=lambda: {DAY: 0.5, NIGHT: 2.0})
    energy_on: float = 1.0
    target_brightness: float = 0.6

    def energy_of(self, level: str) -> float:
        # DIM draws half of ON
        return {LEVELS[0]: 0.0, LEVELS[1]: 0.5 * self.energy_on, LEVELS[2]: self.energy_on}[level]


@dataclass
class StreetLightScenario:
    n_lights: int
    episode_ticks: int = 200
    ambient: AmbientProfile = field(default_factory=AmbientProfile)
    people: PeopleProcess = field(default_factory=PeopleProcess)
    light_contribution: dict[str, float] = field(
        default_factory=lambda: {"OFF": 0.0, "DIM": 0.35, "ON": 0.7}
    )
    neighbor_radius: int = 1
    spillover: float = 0.5
    dusk_threshold: float = 0.5
    rules: StreetlightRules = field(default_factory=StreetlightRules)
    devices: tuple[DeviceSpec, ...] = ()

    def __post_init__(self):
        if self.n_lights < 1:
            raise InvalidParams("n_lights must be positive")
        if self.episode_ticks < 1:
            raise InvalidParams("episode_ticks must be positive")
        if self.neighbor_radius < 1:
            raise InvalidParams("neighbor_radius must be positive")
        c = self.light_contribution
        if not (0.0 == c.get("OFF", 0.0) <= c["DIM"] <= c["ON"]):
            raise InvalidParams("light contributions must satisfy 0 = OFF <= DIM <= ON")
        if not self.devices:
            self.devices = device_template()

    @property
    def n_agents(self) -> int:
        return self.n_lights

    def agent_ids(self) -> list[str]:
        return [f"light_{i}" for i in range(self.n_lights)]

    def body_for(self, index: int, selection: dict[str, bool]) -> BodyConfig:
        resolved = [
            DeviceSpec(d.id, d.direction, _resolve(d.channel, index), d.output_levels)
            for d in self.devices
        ]
        return configure_body(resolved, selection)

    def neighbor_map(self) -> dict[str, list[str]]:
        ids = self.agent_ids()
        return {
            ids[i]: [
                ids[j]
                for j in range(self.n_lights)
                if j != i and abs(j - i) <= self.neighbor_radius
            ]
            for i in range(self.n_lights)
        }

    def build_env(self, seed: int, bodies: dict[str, BodyConfig]) -> Environment:
        flows = self.people.sample(seed, self.episode_ticks, self.n_lights)
        ambient = self.ambient
        ticks = self.episode_ticks
        contribution = dict(self.light_contribution)
        spill = self.spillover
        radius = self.neighbor_radius
        n = self.n_lights
        rules = self.rules

        def contrib_at(effects, i: int) -> float:
            return sum(contribution[level] for _, level in effects.get(f"light_{i}", ()))

        variables = [
            EnvVariable("daylight", ambient(0, ticks), lambda t, snap, eff: ambient(t, ticks))
        ]
        for i in range(n):
            variables.append(
                EnvVariable(
                    f"light_{i}",
                    0.0,
                    lambda t, snap, eff, i=i: contrib_at(eff, i),
                )
            )
            variables.append(
                EnvVariable(
                    f"brightness_{i}",
                    min(1.0, ambient(0, ticks)),
                    lambda t, snap, eff, i=i: min(
                        1.0,
                        ambient(t, ticks)
                        + contrib_at(eff, i)
                        + spill
                        * sum(
                            contrib_at(eff, j)
                            for j in range(max(0, i - radius), min(n, i + radius + 1))
                            if j != i
                        ),
                    ),
                )
            )
            variables.append(
                EnvVariable(
                    f"people_flow_{i}",
                    float(flows[0, i]),
                    lambda t, snap, eff, i=i: float(flows[min(t, ticks), i]),
                )
            )
            variables.append(
                EnvVariable(
                    f"energy_{i}",
                    0.0,
                    lambda t, snap, eff, i=i: sum(
                        rules.energy_of(level) for _, level in eff.get(f"light_{i}", ())
                    ),
                )
            )

        contexts = [
            ContextRule(DAY, lambda snap: snap["daylight"] >= self.dusk_threshold),
            ContextRule(NIGHT, lambda snap: True),  # catch-all
        ]
        env = Environment(variables, contexts, self.neighbor_map())
        for aid, body in bodies.items():
            env.register_agent(aid, body)
        return env

    def score(self, trace: EpisodeTrace, episode: int = 0, digest: str = "") -> EvaluationRecord:
        return streetlight_score(trace, self.rules, self.n_lights, episode, digest)


def _resolve(channel: str, index: int) -> str:
    return channel.replace("@self", f"_{index}")


def device_template() -> tuple[DeviceSpec, ...]:
    """The five candidate devices of one street light."""
    return (
        DeviceSpec(LIGHTING_SENSOR, "input", "brightness@self"),
        DeviceSpec(MOTION_SENSOR, "input", "people_flow@self"),
        DeviceSpec(WIRELESS_IN, "input", "comm"),
        DeviceSpec(WIRELESS_SPEAKER, "output", "comm"),
        DeviceSpec(LIGHT_SWITCH, "output", "light@self", LEVELS),
    )


def build_streetlight_scenario(**params) -> StreetLightScenario:
    return StreetLightScenario(**params)


def streetlight_score(
    trace: EpisodeTrace,
    rules: StreetlightRules,
    n_lights: int,
    episode: int = 0,
    digest: str = "",
) -> EvaluationRecord:
    """score = sum over ticks of context-weighted energy plus
    context-weighted darkness-under-people service penalty; lower is
    better."""
    breakdown: dict[str, float] = {}
    for snap in trace.snapshots:
        energy = sum(snap.variables[f"energy_{i}"] for i in range(n_lights))
        deficit = sum(
            snap.variables[f"people_flow_{i}"]
            * max(0.0, rules.target_brightness - snap.variables[f"brightness_{i}"])
            for i in range(n_lights)
        )
        term = rules.w_energy[snap.context] * energy + rules.w_dark[snap.context] * deficit
        breakdown[snap.context] = breakdown.get(snap.context, 0.0) + term
    return EvaluationRecord(episode, sum(breakdown.values()), breakdown, digest)
