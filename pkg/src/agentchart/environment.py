"""Perturbable environment: orthogonal scalar variables, first-match
context selection, actuation routing and next-tick neighbor messaging.

Variables update simultaneously from a previous-tick snapshot, so the
order in which they are declared or updated never changes the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

from .body import COMM_CHANNEL, BodyConfig, Percept
from .errors import NonFiniteVariable, UnknownChannel
from .statechart import TraceEvent

# update rule: (new_tick, previous snapshot, effects by channel) -> value
UpdateRule = Callable[[int, Mapping[str, float], Mapping[str, list[tuple[str, object]]]], float]


@dataclass
class EnvVariable:
    name: str
    value: float
    update_rule: UpdateRule


@dataclass(frozen=True)
class ContextRule:
    context_id: str
    predicate: Callable[[Mapping[str, float]], bool]


class Environment:
    """Single-process synchronous environment shared by all agents."""

    def __init__(
        self,
        variables: list[EnvVariable],
        context_rules: list[ContextRule],
        neighbors: dict[str, list[str]] | None = None,
    ):
        self.variables: dict[str, EnvVariable] = {}
        for var in variables:
            if var.name in self.variables:
                raise UnknownChannel(f"variable {var.name!r} declared twice")
            self.variables[var.name] = var
        self.context_rules = list(context_rules)
        self.neighbors = dict(neighbors or {})
        self.bodies: dict[str, BodyConfig] = {}
        self.tick = 0
        self.pending_effects: list[tuple[str, str, object]] = []
        self._comm_outbox: list[tuple[str, object]] = []
        self.comm_mailbox: dict[str, list[tuple[str, object]]] = {}
        self.context = self._select_context(self.snapshot())

    def register_agent(self, agent_id: str, body: BodyConfig) -> None:
        self.bodies[agent_id] = body
        self.neighbors.setdefault(agent_id, [])
        self.comm_mailbox.setdefault(agent_id, [])

    def snapshot(self) -> dict[str, float]:
        return {name: var.value for name, var in self.variables.items()}

    def _select_context(self, snapshot: Mapping[str, float]) -> str:
        for rule in self.context_rules:
            if rule.predicate(snapshot):
                return rule.context_id
        raise UnknownChannel(
            "no context rule matched; scenarios must declare a catch-all context"
        )

    # --- per-tick phases -------------------------------------------------

    def apply_effects(
        self,
        actions: list[tuple[str, dict[str, object]]],
        trace: list[TraceEvent] | None = None,
    ) -> None:
        """Route this tick's actuation values onto their channels.

        Communication values are staged for delivery to the sender's
        neighbors at the next step; everything else accumulates for the
        variable update rules.
        """
        for agent_id, action_set in actions:
            body = self.bodies.get(agent_id)
            if body is None:
                raise UnknownChannel(f"agent {agent_id!r} is not registered")
            for device_id, value in action_set.items():
                channel = body.device(device_id).channel
                if channel == COMM_CHANNEL:
                    self._comm_outbox.append((agent_id, value))
                    if trace is not None:
                        trace.append(
                            TraceEvent(self.tick, agent_id, "emitted", COMM_CHANNEL, repr(value))
                        )
                else:
                    if channel not in self.variables:
                        raise UnknownChannel(
                            f"device {device_id!r} targets unknown channel {channel!r}"
                        )
                    self.pending_effects.append((agent_id, channel, value))

    def step(self, trace: list[TraceEvent] | None = None) -> None:
        """Advance one tick: simultaneous variable update, mailbox swap,
        context re-selection."""
        snapshot = MappingProxyType(self.snapshot())
        effects: dict[str, list[tuple[str, object]]] = {}
        for agent_id, channel, value in self.pending_effects:
            effects.setdefault(channel, []).append((agent_id, value))
        effects_view = MappingProxyType(effects)

        new_tick = self.tick + 1
        new_values: dict[str, float] = {}
        for name, var in self.variables.items():
            value = float(var.update_rule(new_tick, snapshot, effects_view))
            if not math.isfinite(value):
                raise NonFiniteVariable(f"variable {name!r} became non-finite: {value}")
            new_values[name] = value
        for name, value in new_values.items():
            old = self.variables[name].value
            self.variables[name].value = value
            if trace is not None and value != old:
                trace.append(TraceEvent(new_tick, "env", "perturbed", name, f"{old!r}->{value!r}"))

        # messages sent at tick t are readable at t+1 and gone at t+2
        mailbox: dict[str, list[tuple[str, object]]] = {aid: [] for aid in self.bodies}
        for sender, value in self._comm_outbox:
            for neighbor in self.neighbors.get(sender, ()):
                if neighbor in mailbox:
                    mailbox[neighbor].append((sender, value))
        self.comm_mailbox = mailbox
        self._comm_outbox = []
        self.pending_effects = []
        self.tick = new_tick
        self.context = self._select_context(self.snapshot())

    def perceive(self, agent_id: str) -> Percept:
        """One value per enabled input device of the agent.

        Sensors read their channel variable; comm devices read the mean
        of last tick's messages (0 when the mailbox is empty).
        """
        body = self.bodies.get(agent_id)
        if body is None:
            raise UnknownChannel(f"agent {agent_id!r} is not registered")
        percept: Percept = {}
        for device in body.enabled_inputs():
            if device.channel == COMM_CHANNEL:
                messages = self.comm_mailbox.get(agent_id, [])
                if messages:
                    percept[device.id] = sum(float(v) for _, v in messages) / len(messages)
                else:
                    percept[device.id] = 0.0
            else:
                if device.channel not in self.variables:
                    raise UnknownChannel(
                        f"sensor {device.id!r} reads unknown variable {device.channel!r}"
                    )
                percept[device.id] = self.variables[device.channel].value
        return percept


@dataclass(frozen=True)
class TickSnapshot:
    """Per-tick record consumed by task evaluation."""

    tick: int
    variables: dict[str, float]
    context: str


def snapshot_row(env: Environment) -> TickSnapshot:
    return TickSnapshot(env.tick, env.snapshot(), env.context)


@dataclass
class EpisodeTrace:
    """Variable/context history of one episode plus optional engine trace."""

    snapshots: list[TickSnapshot] = field(default_factory=list)
    events: list[TraceEvent] | None = None

    def to_csv(self) -> str:
        if not self.snapshots:
            return ""
        names = sorted(self.snapshots[0].variables)
        lines = ["tick," + ",".join(names) + ",context"]
        for snap in self.snapshots:
            cells = [str(snap.tick)] + [repr(snap.variables[n]) for n in names] + [snap.context]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"
