"""Shared helpers: random chart generation used by unit and acceptance tests."""

from __future__ import annotations

import random

from agentchart.statechart import AND, BASIC, XOR, StateNode, Statechart, Transition, build_chart

EVENT_ALPHABET = ["alpha", "beta", "gamma", "delta"]


def random_tree(rng: random.Random, max_depth: int = 3) -> list[StateNode]:
    nodes: list[StateNode] = []
    counter = [0]

    def fresh() -> str:
        counter[0] += 1
        return f"s{counter[0]}"

    def make(depth: int, force_composite: bool = False) -> str:
        sid = fresh()
        roll = rng.random()
        if depth >= max_depth or (roll < 0.45 and not force_composite):
            nodes.append(StateNode(sid))
            return sid
        if roll < 0.85 or force_composite and roll < 0.93:
            kids = [make(depth + 1) for _ in range(rng.randint(1, 3))]
            history = "shallow" if rng.random() < 0.3 else "none"
            nodes.append(
                StateNode(sid, XOR, tuple(kids), initial=rng.choice(kids), history=history)
            )
            return sid
        regions = []
        for _ in range(rng.randint(2, 3)):
            rid = fresh()
            sub = [make(depth + 2) for _ in range(rng.randint(1, 3))]
            nodes.append(StateNode(rid, XOR, tuple(sub), initial=rng.choice(sub)))
            regions.append(rid)
        nodes.append(StateNode(sid, AND, tuple(regions)))
        return sid

    make(0, force_composite=True)
    return nodes


def random_chart(rng: random.Random) -> Statechart:
    """A structurally valid random chart with random transitions,
    including history targets and joins where the tree allows them."""
    nodes = random_tree(rng)
    by_id = {n.id: n for n in nodes}
    ids = [n.id for n in nodes]
    root = nodes[-1].id  # make() appends the root last

    children_of = {n.id: n.children for n in nodes}

    def descendants(sid: str) -> list[str]:
        out, stack = [], [sid]
        while stack:
            cur = stack.pop()
            out.append(cur)
            stack.extend(children_of[cur])
        return out

    transitions: list[Transition] = []
    for _ in range(rng.randint(1, 6)):
        src = rng.choice(ids)
        tgt = rng.choice(ids)
        event = rng.choice(EVENT_ALPHABET)
        node = by_id[tgt]
        to_history = node.kind == XOR and node.history == "shallow" and rng.random() < 0.5
        transitions.append(Transition((src,), tgt, event=event, to_history=to_history))

    and_nodes = [n for n in nodes if n.kind == AND]
    if and_nodes and rng.random() < 0.6:
        comp = rng.choice(and_nodes)
        regions = rng.sample(list(comp.children), 2)
        sources = tuple(rng.choice(descendants(r)) for r in regions)
        transitions.append(Transition(sources, rng.choice(ids), event=rng.choice(EVENT_ALPHABET)))

    return build_chart(nodes, transitions)


def history_motif_chart(rng: random.Random):
    """Chart embedding the shallow-history round-trip motif: a shallow
    xor-composite C, an outside state, leave/return transitions and some
    random movement inside C."""
    k = rng.randint(2, 4)
    kids = [f"c{i}" for i in range(k)]
    nodes = [
        StateNode("root", XOR, ("C", "outside"), initial=rng.choice(["C", "outside"])),
        StateNode("C", XOR, tuple(kids), initial=kids[0], history="shallow"),
        StateNode("outside"),
    ] + [StateNode(c) for c in kids]
    transitions = [
        Transition(("C",), "outside", event="leave"),
        Transition(("outside",), "C", event="return", to_history=True),
    ]
    for i in range(rng.randint(1, 4)):
        transitions.append(
            Transition((rng.choice(kids),), rng.choice(kids), event=f"move{i % 2}")
        )
    return build_chart(nodes, transitions), kids
