"""Task evaluation and the reconfiguration cycle.

Episodes are scored with context-weighted sums over the environment
trace; a patience-based policy picks between "adjust" (connection-only
mutation) and "reconfigure" (structural body search), driving a (1+λ)
hill climb over a homogeneous controller genotype.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Protocol

import numpy as np

from .body import AgentRuntime, AgentSpec, BodyConfig, DeviceSpec, configure_body, derive_controller, step_agent
from .controller import ControllerTopology, MutationPolicy, mutate_connections
from .environment import Environment, EpisodeTrace, TickSnapshot, snapshot_row
from .errors import MissingContextWeight, UnknownVariable
from .serialize import config_digest
from .statechart import TraceEvent

MINIMIZE = "minimize"
MAXIMIZE = "maximize"

ADJUST = "adjust"
RECONFIGURE = "reconfigure"


@dataclass(frozen=True)
class ScoreRule:
    variable: str
    weight: dict[str, float]  # context id -> weight >= 0
    direction: str = MINIMIZE


@dataclass(frozen=True)
class EvaluationRecord:
    episode: int
    score: float
    breakdown: dict[str, float]
    config_digest: str


@dataclass(frozen=True)
class StructuralPolicy:
    """Reconfigure payload: how many enabled bits one candidate flips."""

    flips: int = 1


@dataclass(frozen=True)
class ReconfigurationCommand:
    kind: str  # adjust | reconfigure
    payload: MutationPolicy | StructuralPolicy = None


class Stop:
    """Sentinel returned by decide() when the episode budget is spent."""

    def __repr__(self):
        return "Stop"


STOP = Stop()


@dataclass(frozen=True)
class SearchPolicy:
    patience: int = 10
    budget: int = 200  # episode budget across the whole run
    mutation: MutationPolicy = field(default_factory=MutationPolicy)
    structural: StructuralPolicy = field(default_factory=StructuralPolicy)


def evaluate_episode(
    snapshots: list[TickSnapshot],
    rules: list[ScoreRule],
    episode: int = 0,
    digest: str = "",
) -> EvaluationRecord:
    """Context-weighted linear score over an episode trace.

    Maximize-rules are negated so that lower is always better.
    """
    if not snapshots:
        raise UnknownVariable("episode trace must cover at least one tick")
    breakdown: dict[str, float] = {}
    for snap in snapshots:
        for rule in rules:
            if rule.variable not in snap.variables:
                raise UnknownVariable(f"score rule names unknown variable {rule.variable!r}")
            if snap.context not in rule.weight:
                raise MissingContextWeight(
                    f"rule on {rule.variable!r} has no weight for context {snap.context!r}"
                )
            sign = -1.0 if rule.direction == MAXIMIZE else 1.0
            term = sign * rule.weight[snap.context] * snap.variables[rule.variable]
            breakdown[snap.context] = breakdown.get(snap.context, 0.0) + term
    return EvaluationRecord(episode, sum(breakdown.values()), breakdown, digest)


def decide(history: list[EvaluationRecord], policy: SearchPolicy) -> ReconfigurationCommand | Stop:
    """Adjust while the best score keeps improving, escalate to a
    structural reconfigure after ``patience`` episodes without
    improvement, stop when the episode budget is spent."""
    if not history:
        raise ValueError("decide() needs a non-empty history")
    if len(history) >= policy.budget:
        return STOP
    if len(history) >= policy.patience:
        scores = [r.score for r in history]
        window = range(len(scores) - policy.patience, len(scores))
        improved = any(t > 0 and scores[t] < min(scores[:t]) for t in window)
        if not improved:
            return ReconfigurationCommand(RECONFIGURE, policy.structural)
    return ReconfigurationCommand(ADJUST, policy.mutation)


# --- scenario protocol and episode runner --------------------------------


@dataclass(frozen=True)
class Genotype:
    """Shared agent design: device selection plus controller topology."""

    selection: dict[str, bool]
    topology: ControllerTopology


class Scenario(Protocol):
    devices: tuple[DeviceSpec, ...]
    n_agents: int
    episode_ticks: int

    def agent_ids(self) -> list[str]: ...

    def body_for(self, index: int, selection: dict[str, bool]) -> BodyConfig: ...

    def build_env(self, seed: int, bodies: dict[str, BodyConfig]) -> Environment: ...

    def score(self, trace: EpisodeTrace, episode: int, digest: str) -> EvaluationRecord: ...


def genotype_digest(scenario: Scenario, genotype: Genotype) -> str:
    body = configure_body(list(scenario.devices), genotype.selection)
    return config_digest(body, genotype.topology)


def genotype_operable(scenario: Scenario, genotype: Genotype) -> bool:
    return configure_body(list(scenario.devices), genotype.selection).is_operable()


def run_episode(
    scenario: Scenario,
    genotype: Genotype,
    seed: int,
    episode: int = 0,
    collect_events: bool = False,
) -> tuple[EvaluationRecord, EpisodeTrace]:
    """One fixed-length episode of every agent under one configuration.

    An inoperable body (no enabled input or output) scores +inf so that
    structural search can still enumerate it.
    """
    digest = genotype_digest(scenario, genotype)
    ids = scenario.agent_ids()
    bodies = {aid: scenario.body_for(i, genotype.selection) for i, aid in enumerate(ids)}
    if any(not b.is_operable() for b in bodies.values()):
        return (
            EvaluationRecord(episode, math.inf, {}, digest),
            EpisodeTrace([], [] if collect_events else None),
        )

    env = scenario.build_env(seed, bodies)
    agents = [
        AgentRuntime(AgentSpec(aid, bodies[aid], genotype.topology)) for aid in ids
    ]
    events: list[TraceEvent] | None = [] if collect_events else None
    snapshots: list[TickSnapshot] = []
    for t in range(scenario.episode_ticks):
        actions = []
        for agent in agents:
            percept = env.perceive(agent.spec.agent_id)
            actions.append((agent.spec.agent_id, step_agent(agent, percept, t, events)))
        env.apply_effects(actions, events)
        env.step(events)
        snapshots.append(snapshot_row(env))
    trace = EpisodeTrace(snapshots, events)
    return scenario.score(trace, episode, digest), trace


# --- (1+λ) search --------------------------------------------------------


@dataclass(frozen=True)
class MetricsRow:
    generation: int
    best_score: float
    mean_score: float
    command: str
    config_digest: str

    def to_csv(self) -> str:
        return (
            f"{self.generation},{self.best_score!r},{self.mean_score!r},"
            f"{self.command},{self.config_digest}"
        )


@dataclass
class SearchResult:
    best: Genotype
    best_record: EvaluationRecord
    history: list[EvaluationRecord]
    metrics: list[MetricsRow]


def _candidate_rng(seed: int, generation: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2, generation, k)))


def initial_genotype(scenario: Scenario, seed: int) -> Genotype:
    """Random operable selection with a full input->output topology."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    devices = list(scenario.devices)
    while True:
        selection = {d.id: bool(rng.random() < 0.5) for d in devices}
        body = configure_body(devices, selection)
        if body.is_operable():
            break
    topology = derive_controller(body, prior=None, rng=rng)
    return Genotype(selection, topology)


def _mutate(
    scenario: Scenario,
    genotype: Genotype,
    command: ReconfigurationCommand,
    rng: np.random.Generator,
) -> Genotype:
    if command.kind == ADJUST:
        return replace(genotype, topology=mutate_connections(genotype.topology, rng, command.payload))
    selection = dict(genotype.selection)
    device_ids = [d.id for d in scenario.devices]
    for _ in range(command.payload.flips):
        flip = device_ids[int(rng.integers(len(device_ids)))]
        selection[flip] = not selection[flip]
    body = configure_body(list(scenario.devices), selection)
    topology = derive_controller(body, prior=genotype.topology, rng=rng)
    return Genotype(selection, topology)


def all_selections(devices: tuple[DeviceSpec, ...]) -> list[dict[str, bool]]:
    ids = [d.id for d in devices]
    return [dict(zip(ids, bits)) for bits in itertools.product([False, True], repeat=len(ids))]


def run_search(
    scenario: Scenario,
    seed: int,
    generations: int,
    lam: int = 4,
    policy: SearchPolicy | None = None,
    jobs: int = 1,
    exhaustive: bool = False,
    on_generation: Callable[[int, str, Genotype, list[Genotype]], None] | None = None,
) -> SearchResult:
    """(1+λ) hill climb over the shared genotype.

    Generation 0 evaluates the initial random genotype; each later
    generation spawns λ candidates via the current reconfiguration
    command and replaces the incumbent on strict improvement.  With
    ``exhaustive`` the single search generation instead sweeps every
    enabled-set, deriving each controller from the incumbent's weights.
    """
    if generations < 1:
        raise ValueError("generations must be >= 1")
    policy = policy or SearchPolicy()
    episode_seed = seed  # constant across episodes: scores stay comparable

    incumbent = initial_genotype(scenario, seed)
    record, _ = run_episode(scenario, incumbent, episode_seed, episode=0)
    history = [record]
    metrics = [MetricsRow(0, record.score, record.score, "init", record.config_digest)]
    best_record = record

    def evaluate_all(candidates: list[Genotype], first_episode: int) -> list[EvaluationRecord]:
        def one(item):
            k, geno = item
            rec, _ = run_episode(scenario, geno, episode_seed, episode=first_episode + k)
            return rec

        items = list(enumerate(candidates))
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                return list(pool.map(one, items))
        return [one(item) for item in items]

    if exhaustive:
        # one fully-enabled base topology; every enabled-set inherits its
        # weights, so all 2^d configurations are compared on equal terms
        base_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(3,)))
        all_on = {d.id: True for d in scenario.devices}
        base = derive_controller(
            configure_body(list(scenario.devices), all_on),
            prior=incumbent.topology,
            rng=base_rng,
        )
        candidates = [
            Genotype(
                sel,
                derive_controller(configure_body(list(scenario.devices), sel), prior=base),
            )
            for sel in all_selections(scenario.devices)
        ]
        records = evaluate_all(candidates, len(history))
        history.extend(records)
        if on_generation:
            on_generation(1, RECONFIGURE, incumbent, candidates)
        finite = [r.score for r in records if math.isfinite(r.score)]
        mean = sum(finite) / len(finite) if finite else math.inf
        best_k = min(range(len(records)), key=lambda k: (records[k].score, k))
        if records[best_k].score < best_record.score:
            incumbent, best_record = candidates[best_k], records[best_k]
        metrics.append(
            MetricsRow(1, best_record.score, mean, RECONFIGURE, best_record.config_digest)
        )
        return SearchResult(incumbent, best_record, history, metrics)

    for generation in range(1, generations):
        command = decide(history, policy)
        if isinstance(command, Stop):
            break
        candidates = [
            _mutate(scenario, incumbent, command, _candidate_rng(seed, generation, k))
            for k in range(lam)
        ]
        if on_generation:
            on_generation(generation, command.kind, incumbent, candidates)
        records = evaluate_all(candidates, len(history))
        history.extend(records)
        finite = [r.score for r in records if math.isfinite(r.score)]
        mean = sum(finite) / len(finite) if finite else math.inf
        best_k = min(range(len(records)), key=lambda k: (records[k].score, k))
        if records[best_k].score < best_record.score:
            incumbent, best_record = candidates[best_k], records[best_k]
        metrics.append(
            MetricsRow(
                generation, best_record.score, mean, command.kind, best_record.config_digest
            )
        )
    return SearchResult(incumbent, best_record, history, metrics)
