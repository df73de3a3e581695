"""Hierarchical statechart engine.

Supports basic states, XOR composition, AND orthogonality, shallow
history re-entry and join transitions (multiple sources in distinct
orthogonal regions).  Event processing is run-to-completion: an external
event is dispatched, enabled transitions fire as a maximal conflict-free
set, completion transitions and internally emitted events are drained
before the macrostep returns.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Callable, Mapping

from .errors import (
    DanglingReference,
    DuplicateId,
    IllegalJoin,
    LivelockDetected,
    MalformedComposite,
)

BASIC = "basic"
XOR = "xor-composite"
AND = "and-composite"

DEFAULT_QUEUE_LIMIT = 10_000

Guard = Callable[[Mapping[str, object]], bool]
Action = Callable[["ActionContext"], None]


@dataclass(frozen=True)
class Event:
    id: str
    payload: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class TraceEvent:
    """One engine occurrence; serializes to a single tab-separated line."""

    tick: int
    agent: str
    kind: str  # entered | exited | fired | emitted | perturbed
    subject: str
    detail: str = ""

    def to_line(self) -> str:
        return f"{self.tick}\t{self.agent}\t{self.kind}\t{self.subject}\t{self.detail}"


@dataclass(frozen=True)
class StateNode:
    id: str
    kind: str = BASIC
    children: tuple[str, ...] = ()
    initial: str | None = None
    history: str = "none"  # none | shallow
    entry_actions: tuple[Action, ...] = ()
    exit_actions: tuple[Action, ...] = ()


@dataclass(frozen=True)
class Transition:
    """e[c]/a arrow; more than one source encodes a join."""

    sources: tuple[str, ...]
    target: str
    event: str | None = None  # None = completion transition
    guard: Guard | None = None
    actions: tuple[Action, ...] = ()
    to_history: bool = False  # target via the composite's shallow-history entry
    label: str | None = None


@dataclass(frozen=True)
class Configuration:
    active: frozenset[str]
    history_memory: Mapping[str, str] = field(default_factory=dict)


class ActionContext:
    """What entry/exit/transition actions may touch during a macrostep."""

    def __init__(self, store: dict, snapshot: Mapping[str, object], emit_sink: list[Event]):
        self.vars = store  # writable store, visible to guards only next macrostep
        self.snapshot = snapshot  # read-only view taken at macrostep start
        self._emit_sink = emit_sink
        self.current_event: Event | None = None

    def emit(self, event_id: str, **payload: float) -> None:
        self._emit_sink.append(Event(event_id, payload))


class Statechart:
    """Validated, immutable chart. Build through :func:`build_chart`."""

    def __init__(self, nodes: dict[str, StateNode], transitions: list[Transition], root: str):
        self.nodes = nodes
        self.transitions = transitions
        self.root = root
        self.parent: dict[str, str] = {}
        for node in nodes.values():
            for child in node.children:
                self.parent[child] = node.id
        self.depth: dict[str, int] = {}
        self.ancestors: dict[str, frozenset[str]] = {}
        self.doc_order: dict[str, int] = {}
        self._index_tree()
        # transition lookup: event id -> [(decl_index, transition)]
        self.by_event: dict[str | None, list[tuple[int, Transition]]] = {}
        for i, tr in enumerate(transitions):
            self.by_event.setdefault(tr.event, []).append((i, tr))
        self._tr_priority = {
            i: (max(self.depth[s] for s in tr.sources), i) for i, tr in enumerate(transitions)
        }

    def _index_tree(self) -> None:
        order = 0
        stack = [(self.root, 0, frozenset())]
        while stack:
            sid, depth, anc = stack.pop()
            self.depth[sid] = depth
            self.ancestors[sid] = anc
            self.doc_order[sid] = order
            order += 1
            child_anc = anc | {sid}
            for child in reversed(self.nodes[sid].children):
                stack.append((child, depth + 1, child_anc))

    def label_of(self, index: int) -> str:
        return self.transitions[index].label or f"t{index}"

    def is_ancestor(self, a: str, s: str) -> bool:
        """True iff ``a`` is a proper ancestor of ``s``."""
        return a in self.ancestors[s]


def build_chart(nodes: list[StateNode], transitions: list[Transition] = ()) -> Statechart:
    """Validate structure and return an immutable chart.

    Raises DuplicateId, DanglingReference, MalformedComposite or
    IllegalJoin when an invariant is broken.
    """
    by_id: dict[str, StateNode] = {}
    for node in nodes:
        if node.id in by_id:
            raise DuplicateId(f"state id {node.id!r} declared twice")
        by_id[node.id] = node

    seen_as_child: set[str] = set()
    for node in by_id.values():
        for child in node.children:
            if child not in by_id:
                raise DanglingReference(f"{node.id!r} lists unknown child {child!r}")
            if child in seen_as_child:
                raise MalformedComposite(f"{child!r} has more than one parent")
            seen_as_child.add(child)

    roots = [s for s in by_id if s not in seen_as_child]
    if len(roots) != 1:
        raise MalformedComposite(f"expected exactly one root, found {sorted(roots)}")
    root = roots[0]

    for node in by_id.values():
        if node.kind == BASIC:
            if node.children or node.initial is not None:
                raise MalformedComposite(f"basic state {node.id!r} must have no children")
            if node.history != "none":
                raise MalformedComposite(f"history not permitted on basic state {node.id!r}")
        elif node.kind == XOR:
            if not node.children:
                raise MalformedComposite(f"xor-composite {node.id!r} needs at least one child")
            if node.initial is None or node.initial not in node.children:
                raise MalformedComposite(
                    f"xor-composite {node.id!r} needs an initial child from its children"
                )
        elif node.kind == AND:
            if len(node.children) < 2:
                raise MalformedComposite(f"and-composite {node.id!r} needs at least 2 regions")
            if node.initial is not None:
                raise MalformedComposite(f"and-composite {node.id!r} may not declare initial")
            if node.history != "none":
                raise MalformedComposite(f"history not permitted on and-composite {node.id!r}")
            for child in node.children:
                if by_id[child].kind == BASIC:
                    raise MalformedComposite(
                        f"region {child!r} of {node.id!r} must itself be a composite"
                    )
        else:
            raise MalformedComposite(f"unknown kind {node.kind!r} on {node.id!r}")
        if node.history not in ("none", "shallow"):
            raise MalformedComposite(
                f"{node.id!r}: only shallow history is supported, got {node.history!r}"
            )

    chart = Statechart(by_id, list(transitions), root)

    for i, tr in enumerate(chart.transitions):
        if not tr.sources:
            raise MalformedComposite(f"transition {i} has no sources")
        for sid in tuple(tr.sources) + (tr.target,):
            if sid not in by_id:
                raise DanglingReference(f"transition {i} references unknown state {sid!r}")
        if tr.to_history:
            tnode = by_id[tr.target]
            if tnode.kind != XOR or tnode.history != "shallow":
                raise MalformedComposite(
                    f"transition {i}: history target {tr.target!r} is not a "
                    "shallow-history xor-composite"
                )
        if len(tr.sources) > 1:
            _check_join(chart, i, tr)
    return chart


def _check_join(chart: Statechart, index: int, tr: Transition) -> None:
    """Join sources must sit in distinct regions of a common and-composite."""
    common = None
    for anc in sorted(
        frozenset.intersection(*(chart.ancestors[s] for s in tr.sources)),
        key=lambda a: -chart.depth[a],
    ):
        if chart.nodes[anc].kind == AND:
            regions = set()
            for s in tr.sources:
                region = next(
                    (c for c in chart.nodes[anc].children if c == s or chart.is_ancestor(c, s)),
                    None,
                )
                regions.add(region)
            if None not in regions and len(regions) == len(tr.sources):
                common = anc
                break
    if common is None:
        raise IllegalJoin(
            f"transition {index}: join sources {sorted(tr.sources)} do not lie in "
            "distinct orthogonal regions of a common and-composite"
        )


def initialize(
    chart: Statechart,
    vars: dict | None = None,
    trace: list[TraceEvent] | None = None,
    tick: int = 0,
    agent: str = "agent",
) -> Configuration:
    """Enter the default configuration: root, initial xor children, all
    and regions.  Entry actions run outermost-first."""
    active: set[str] = set()
    emitted: list[Event] = []
    store = vars if vars is not None else {}
    ctx = ActionContext(store, MappingProxyType(dict(store)), emitted)
    sink = trace if trace is not None else []
    _default_complete(chart, chart.root, active, {}, ctx, sink, tick, agent)
    return Configuration(frozenset(active), {})


def dispatch(
    chart: Statechart,
    config: Configuration,
    event: Event,
    vars: dict | None = None,
    tick: int = 0,
    agent: str = "agent",
    queue_limit: int = DEFAULT_QUEUE_LIMIT,
    trace: list[TraceEvent] | None = None,
) -> tuple[Configuration, list[Event], list[TraceEvent]]:
    """Run one macrostep for ``event``.

    Returns the new configuration, every event emitted by actions, and
    the trace of the macrostep (also appended to ``trace`` if given).
    """
    active = set(config.active)
    history = dict(config.history_memory)
    store = vars if vars is not None else {}
    snapshot = MappingProxyType(dict(store))
    emitted_log: list[Event] = []
    pending: list[Event] = []
    ctx = ActionContext(store, snapshot, pending)
    own_trace: list[TraceEvent] = [] if trace is None else trace
    mark = len(own_trace)

    queue: list[Event] = [event]
    processed = 0
    qhead = 0
    while qhead < len(queue):
        current = queue[qhead]
        qhead += 1
        processed += 1
        if processed > queue_limit:
            raise LivelockDetected(f"internal event queue exceeded {queue_limit} events")
        ctx.current_event = current
        _microstep(chart, active, history, current, ctx, own_trace, tick, agent)
        # completion cascade before the next queued event
        guard = 0
        while _microstep(chart, active, history, None, ctx, own_trace, tick, agent):
            guard += 1
            if guard > queue_limit:
                raise LivelockDetected(
                    f"completion transitions cascaded more than {queue_limit} times"
                )
        for ev in pending:
            queue.append(ev)
            emitted_log.append(ev)
            own_trace.append(TraceEvent(tick, agent, "emitted", ev.id, ""))
        pending.clear()

    new_config = Configuration(frozenset(active), history)
    step_trace = own_trace[mark:] if trace is not None else own_trace
    return new_config, emitted_log, step_trace


def _microstep(
    chart: Statechart,
    active: set[str],
    history: dict[str, str],
    event: Event | None,
    ctx: ActionContext,
    trace: list[TraceEvent],
    tick: int,
    agent: str,
) -> bool:
    """Fire one maximal conflict-free set of enabled transitions.

    ``event`` None selects completion transitions.  Returns True iff at
    least one transition fired.
    """
    event_id = event.id if event is not None else None
    candidates = []
    for index, tr in chart.by_event.get(event_id, ()):
        if not all(s in active for s in tr.sources):
            continue
        if tr.guard is not None and not tr.guard(ctx.snapshot):
            continue
        candidates.append((index, tr))
    if not candidates:
        return False

    # deeper source wins, ties by declaration order
    candidates.sort(key=lambda it: (-chart._tr_priority[it[0]][0], it[0]))

    fired: list[tuple[int, Transition, set[str]]] = []
    exited_union: set[str] = set()
    for index, tr in candidates:
        domain = _domain(chart, tr)
        exit_set = _exit_set(chart, active, domain)
        if exit_set & exited_union:
            continue
        fired.append((index, tr, exit_set))
        exited_union |= exit_set

    any_fired = False
    for index, tr, _ in fired:
        domain = _domain(chart, tr)
        exit_set = _exit_set(chart, active, domain)
        if not all(s in active for s in tr.sources):
            continue  # an earlier transition of this set removed a source
        any_fired = True
        _perform_exit(chart, active, history, exit_set, ctx, trace, tick, agent)
        trace.append(TraceEvent(tick, agent, "fired", chart.label_of(index), "->" + tr.target))
        for action in tr.actions:
            action(ctx)
        _perform_entry(chart, tr, domain, active, history, ctx, trace, tick, agent)
    return any_fired


def _domain(chart: Statechart, tr: Transition) -> str | None:
    """Deepest xor-composite that properly contains every source and the
    target.  And-composites cannot scope a transition: crossing between
    regions exits and re-enters the whole orthogonal component.

    None means the transition is scoped to the whole chart (restarts the
    root's interior).
    """
    for anc in sorted(chart.ancestors[tr.target], key=lambda a: -chart.depth[a]):
        if chart.nodes[anc].kind != XOR:
            continue
        if all(anc in chart.ancestors[s] for s in tr.sources):
            return anc
    return None


def _exit_set(chart: Statechart, active: set[str], domain: str | None) -> set[str]:
    if domain is None:
        return {s for s in active if s != chart.root}
    return {s for s in active if domain in chart.ancestors[s]}


def _perform_exit(
    chart: Statechart,
    active: set[str],
    history: dict[str, str],
    exit_set: set[str],
    ctx: ActionContext,
    trace: list[TraceEvent],
    tick: int,
    agent: str,
) -> None:
    # innermost-first, document order as a deterministic tie-break
    ordered = sorted(exit_set, key=lambda s: (-chart.depth[s], chart.doc_order[s]))
    for sid in ordered:
        parent = chart.parent.get(sid)
        if parent is not None:
            pnode = chart.nodes[parent]
            if pnode.kind == XOR and pnode.history == "shallow":
                history[parent] = sid
        for action in chart.nodes[sid].exit_actions:
            action(ctx)
        active.discard(sid)
        trace.append(TraceEvent(tick, agent, "exited", sid, ""))


def _perform_entry(
    chart: Statechart,
    tr: Transition,
    domain: str | None,
    active: set[str],
    history: dict[str, str],
    ctx: ActionContext,
    trace: list[TraceEvent],
    tick: int,
    agent: str,
) -> None:
    target = tr.target
    path: list[str] = []
    sid = target
    while sid is not None and sid != domain:
        path.append(sid)
        sid = chart.parent.get(sid)
    path.reverse()
    if domain is None and path and path[0] == chart.root:
        path = path[1:]  # root never exits, so never re-enters
        if not path:
            _complete_interior(
                chart, chart.root, active, history, ctx, trace, tick, agent, tr.to_history
            )
            return
        root_node = chart.nodes[chart.root]
        if root_node.kind == AND:
            for child in root_node.children:
                if child != path[0]:
                    _default_complete(chart, child, active, history, ctx, trace, tick, agent)

    for i, sid in enumerate(path):
        _enter_state(chart, sid, active, ctx, trace, tick, agent)
        node = chart.nodes[sid]
        nxt = path[i + 1] if i + 1 < len(path) else None
        if node.kind == AND:
            for child in node.children:
                if child != nxt:
                    _default_complete(chart, child, active, history, ctx, trace, tick, agent)

    _complete_interior(chart, target, active, history, ctx, trace, tick, agent, tr.to_history)


def _enter_state(chart, sid, active, ctx, trace, tick, agent) -> None:
    active.add(sid)
    trace.append(TraceEvent(tick, agent, "entered", sid, ""))
    for action in chart.nodes[sid].entry_actions:
        action(ctx)


def _complete_interior(
    chart, sid, active, history, ctx, trace, tick, agent, via_history=False
) -> None:
    """Enter the default interior of ``sid`` (already active itself)."""
    node = chart.nodes[sid]
    if node.kind == XOR:
        child = node.initial
        if via_history and node.history == "shallow":
            child = history.get(sid, node.initial)
        _default_complete(chart, child, active, history, ctx, trace, tick, agent)
    elif node.kind == AND:
        for child in node.children:
            _default_complete(chart, child, active, history, ctx, trace, tick, agent)


def _default_complete(chart, sid, active, history, ctx, trace, tick, agent) -> None:
    _enter_state(chart, sid, active, ctx, trace, tick, agent)
    _complete_interior(chart, sid, active, history, ctx, trace, tick, agent)


def check_configuration(chart: Statechart, config: Configuration) -> None:
    """Assert the structural invariants of an active configuration."""
    active = config.active
    assert chart.root in active, "root must be active"
    for sid in active:
        parent = chart.parent.get(sid)
        if parent is not None:
            assert parent in active, f"active state {sid} has inactive parent {parent}"
        node = chart.nodes[sid]
        if node.kind == XOR:
            live = [c for c in node.children if c in active]
            assert len(live) == 1, f"xor-composite {sid} has {len(live)} active children"
        elif node.kind == AND:
            live = [c for c in node.children if c in active]
            assert len(live) == len(node.children), f"and-composite {sid} missing regions"


def with_history(config: Configuration, **updates) -> Configuration:
    return replace(config, **updates)
