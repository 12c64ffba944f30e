"""Finite-state-machine view of local types, for inspection and DOT export.

States are the distinct subterm-unfoldings reachable from the type (compared
up to bound-variable renaming), so loops become back-edges instead of fresh
states.  Transitions carry the send/receive action labels; terminated
subterms are final states.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections import deque

from .core import (
    End,
    LocalType,
    Recv,
    Role,
    Send,
    Sort,
    alpha_normalize,
    unfold,
)

SEND = "send"
RECV = "recv"


@dataclass(frozen=True)
class Action:
    direction: str  # "send" | "recv"
    peer: Role
    self_role: Role
    sort: Sort

    def label(self) -> str:
        if self.direction == SEND:
            return f"{self.self_role}{self.peer}!{self.sort}"
        return f"{self.peer}{self.self_role}?{self.sort}"


@dataclass
class Fsm:
    states: list
    initial: int
    finals: set
    transitions: list  # list[(from, Action, to)]

    def outgoing(self, state: int) -> list:
        return [t for t in self.transitions if t[0] == state]

    def to_json(self) -> dict:
        return {
            "states": self.states,
            "initial": self.initial,
            "finals": sorted(self.finals),
            "transitions": [
                {
                    "from": src,
                    "direction": a.direction,
                    "peer": a.peer.name,
                    "self": a.self_role.name,
                    "sort": a.sort.name,
                    "to": dst,
                }
                for src, a, dst in self.transitions
            ],
        }


def interpret(l: LocalType) -> Fsm:
    """Build the FSM of a closed, contractive local type.

    Breadth-first discovery assigns state ids from 1; the initial state is
    always 1.  State identity is the alpha-normalized unfolding, which is
    what folds recursion into cycles.
    """
    ids: dict = {}
    states: list = []
    finals: set = set()
    transitions: list = []

    def state_of(t: LocalType) -> tuple:
        key = alpha_normalize(unfold(t))
        if key in ids:
            return ids[key], None
        sid = len(states) + 1
        ids[key] = sid
        states.append(sid)
        return sid, key

    first, key = state_of(l)
    queue = deque([(first, key)])
    while queue:
        sid, node = queue.popleft()
        if isinstance(node, End):
            finals.add(sid)
            continue
        assert isinstance(node, (Send, Recv))
        direction = SEND if isinstance(node, Send) else RECV
        self_role = node.sender if isinstance(node, Send) else node.receiver
        peer = node.receiver if isinstance(node, Send) else node.sender
        for sort, cont in node.branches:
            dst, fresh = state_of(cont)
            transitions.append((sid, Action(direction, peer, self_role, sort), dst))
            if fresh is not None:
                queue.append((dst, fresh))
    return Fsm(states, first, finals, transitions)


def to_dot(f: Fsm) -> str:
    """Deterministic GraphViz rendering; final states are double circles."""
    lines = ["digraph fsm {", "  rankdir=LR;", '  start [shape=none, label=""];']
    for s in f.states:
        shape = "doublecircle" if s in f.finals else "circle"
        lines.append(f"  s{s} [shape={shape}, label=\"{s}\"];")
    lines.append(f"  start -> s{f.initial};")
    for src, action, dst in f.transitions:
        lines.append(f"  s{src} -> s{dst} [label=\"{action.label()}\"];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def canonical(f: Fsm) -> Fsm:
    """Renumber states by BFS from the initial state, ordering edges by label.

    Two FSMs are isomorphic exactly when their canonical forms are equal
    (outgoing labels are deterministic for local types)."""
    order: dict = {f.initial: 1}
    queue = deque([f.initial])
    while queue:
        s = queue.popleft()
        for src, action, dst in sorted(
            f.outgoing(s), key=lambda t: (t[1].direction, t[1].peer.name, t[1].sort.name)
        ):
            if dst not in order:
                order[dst] = len(order) + 1
                queue.append(dst)
    # unreachable states keep a stable position after the reachable ones
    for s in f.states:
        if s not in order:
            order[s] = len(order) + 1
    states = sorted(order[s] for s in f.states)
    transitions = sorted(
        ((order[src], a, order[dst]) for src, a, dst in f.transitions),
        key=lambda t: (t[0], t[1].direction, t[1].peer.name, t[1].sort.name),
    )
    return Fsm(states, 1, {order[s] for s in f.finals}, transitions)


def isomorphic(a: Fsm, b: Fsm) -> bool:
    ca, cb = canonical(a), canonical(b)
    return (
        ca.states == cb.states
        and ca.finals == cb.finals
        and ca.transitions == cb.transitions
    )
