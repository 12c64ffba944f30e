"""Protocol type ASTs and the operations everything else is built on.

Global types describe a protocol from the bird's-eye view; local types
describe one role's side of it.  Both share the End/Loop/Recur node kinds,
so substitution, unfolding, alpha-normalization, structural equality and
well-formedness are written once and work on either family.

All nodes are frozen dataclasses: values are immutable after construction,
hashable, and safe to share between threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*$")


class UnfoldError(Exception):
    """Raised when unfolding does not reach a non-loop head (non-contractive input)."""


@dataclass(frozen=True)
class Role:
    """A protocol participant, identified by name."""

    name: str

    def __post_init__(self) -> None:
        if not _IDENT_RE.match(self.name):
            raise ValueError(f"invalid role name: {self.name!r}")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class RecVar:
    """A recursion variable bound by Loop and referenced by Recur."""

    name: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("empty recursion variable name")

    def __str__(self) -> str:
        return self.name


# Payload schemas a sort can carry.  "none", "int" and "string" are plain
# markers; a delegated endpoint carries the role being handed over plus the
# local type the receiver must continue.
PAYLOAD_NONE = "none"
PAYLOAD_INT = "int"
PAYLOAD_STRING = "string"


@dataclass(frozen=True)
class EndpointPayload:
    role: Role
    local: "LocalType"


PayloadSchema = Union[str, EndpointPayload]


@dataclass(frozen=True, eq=False)
class Sort:
    """A message sort. Equality is nominal on the name; endpoint sorts also
    compare the delegated role and local type structurally."""

    name: str
    payload: PayloadSchema = PAYLOAD_NONE

    def __post_init__(self) -> None:
        if not _IDENT_RE.match(self.name):
            raise ValueError(f"invalid sort name: {self.name!r}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Sort):
            return NotImplemented
        if self.name != other.name:
            return False
        a, b = self.payload, other.payload
        if isinstance(a, EndpointPayload) or isinstance(b, EndpointPayload):
            return (
                isinstance(a, EndpointPayload)
                and isinstance(b, EndpointPayload)
                and a.role == b.role
                and struct_eq(a.local, b.local)
            )
        return True

    def __hash__(self) -> int:
        return hash(self.name)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class End:
    def __str__(self) -> str:
        return "end"


@dataclass(frozen=True)
class Loop:
    var: RecVar
    body: "TypeNode"

    def __str__(self) -> str:
        return f"rec {self.var} . {self.body}"


@dataclass(frozen=True)
class Recur:
    var: RecVar

    def __str__(self) -> str:
        return str(self.var)


Branches = tuple  # tuple[tuple[Sort, TypeNode], ...]


def _show_branches(branches: Branches) -> str:
    if len(branches) == 1:
        s, cont = branches[0]
        return f"{s} . {cont}"
    inner = ", ".join(f"{s} . {cont}" for s, cont in branches)
    return "{ " + inner + " }"


@dataclass(frozen=True)
class Com:
    """A communication step in a global type: sender -> receiver : branches."""

    sender: Role
    receiver: Role
    branches: Branches

    def __str__(self) -> str:
        return f"{self.sender} -> {self.receiver} : {_show_branches(self.branches)}"


@dataclass(frozen=True)
class Send:
    """A local-type send: performed by `sender`, addressed to `receiver`."""

    sender: Role
    receiver: Role
    branches: Branches

    def __str__(self) -> str:
        return f"{self.sender} -> {self.receiver} ! {_show_branches(self.branches)}"


@dataclass(frozen=True)
class Recv:
    """A local-type receive: performed by `receiver`, awaiting `sender`."""

    sender: Role
    receiver: Role
    branches: Branches

    def __str__(self) -> str:
        return f"{self.sender} -> {self.receiver} ? {_show_branches(self.branches)}"


GlobalType = Union[Com, End, Loop, Recur]
LocalType = Union[Send, Recv, End, Loop, Recur]
TypeNode = Union[Com, Send, Recv, End, Loop, Recur]

END = End()

# Cap on unfolding steps; well-formed types never get close (one step per
# directly nested Loop), so hitting this means a non-contractive input.
_UNFOLD_FUEL = 512


def branches_of(t: TypeNode) -> Branches:
    return t.branches if isinstance(t, (Com, Send, Recv)) else ()


def substitute(body: TypeNode, var: RecVar, replacement: TypeNode) -> TypeNode:
    """Replace every free Recur(var) in body by replacement.

    An inner Loop binding the same variable shadows: nothing is replaced
    beneath it.  The replacement is assumed closed, so no capture can occur.
    """
    if isinstance(body, Recur):
        return replacement if body.var == var else body
    if isinstance(body, Loop):
        if body.var == var:
            return body
        return Loop(body.var, substitute(body.body, var, replacement))
    if isinstance(body, (Com, Send, Recv)):
        new = tuple((s, substitute(c, var, replacement)) for s, c in body.branches)
        return type(body)(body.sender, body.receiver, new)
    return body


def unfold(t: TypeNode) -> TypeNode:
    """Unroll leading Loop nodes until the head constructor is not a Loop."""
    fuel = _UNFOLD_FUEL
    while isinstance(t, Loop):
        t = substitute(t.body, t.var, t)
        fuel -= 1
        if fuel == 0:
            raise UnfoldError("unfolding did not terminate: non-contractive type")
    return t


def unfold_steps(t: TypeNode) -> int:
    """Number of head unrollings unfold performs (used by termination checks)."""
    n = 0
    while isinstance(t, Loop):
        t = substitute(t.body, t.var, t)
        n += 1
        if n > _UNFOLD_FUEL:
            raise UnfoldError("unfolding did not terminate: non-contractive type")
    return n


def alpha_normalize(t: TypeNode) -> TypeNode:
    """Rename bound recursion variables canonically (X0, X1, ... in preorder)."""
    counter = [0]

    def walk(node: TypeNode, env: dict) -> TypeNode:
        if isinstance(node, Recur):
            return Recur(env.get(node.var, node.var))
        if isinstance(node, Loop):
            fresh = RecVar(f"X{counter[0]}")
            counter[0] += 1
            inner = dict(env)
            inner[node.var] = fresh
            return Loop(fresh, walk(node.body, inner))
        if isinstance(node, (Com, Send, Recv)):
            new = tuple((s, walk(c, env)) for s, c in node.branches)
            return type(node)(node.sender, node.receiver, new)
        return node

    return walk(t, {})


def struct_eq(a: TypeNode, b: TypeNode) -> bool:
    """Structural equality up to renaming of bound recursion variables.

    Branch order is significant; constructors and sort lists must match
    exactly."""
    return alpha_normalize(a) == alpha_normalize(b)


def free_rec_vars(t: TypeNode) -> set:
    out: set = set()

    def walk(node: TypeNode, bound: frozenset) -> None:
        if isinstance(node, Recur):
            if node.var not in bound:
                out.add(node.var)
        elif isinstance(node, Loop):
            walk(node.body, bound | {node.var})
        elif isinstance(node, (Com, Send, Recv)):
            for _, c in node.branches:
                walk(c, bound)

    walk(t, frozenset())
    return out


def is_guarded(var: RecVar, t: TypeNode) -> bool:
    """True when every free Recur(var) in t sits under a communication."""
    if isinstance(t, Recur):
        return t.var != var
    if isinstance(t, Loop):
        return True if t.var == var else is_guarded(var, t.body)
    return True  # Com/Send/Recv guard everything below; End has no Recur


def roles_of(t: TypeNode) -> set:
    out: set = set()

    def walk(node: TypeNode) -> None:
        if isinstance(node, (Com, Send, Recv)):
            out.add(node.sender)
            out.add(node.receiver)
            for _, c in node.branches:
                walk(c)
        elif isinstance(node, Loop):
            walk(node.body)

    walk(t)
    return out


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


def well_formed(t: TypeNode) -> list:
    """Collect well-formedness violations: self-communication, empty or
    duplicated branches, unbound recursion variables, non-contractive loops.

    An empty list means the type is well formed.  Works on global and local
    types alike."""
    violations: list = []

    def walk(node: TypeNode, bound: frozenset, path: str) -> None:
        if isinstance(node, (Com, Send, Recv)):
            if node.sender == node.receiver:
                violations.append(
                    Violation(path, f"sender equals receiver: {node.sender}")
                )
            if not node.branches:
                violations.append(Violation(path, "communication with no branches"))
            seen: set = set()
            for i, (s, c) in enumerate(node.branches):
                if s.name in seen:
                    violations.append(Violation(path, f"duplicate branch sort: {s.name}"))
                seen.add(s.name)
                walk(c, bound, f"{path}.branches[{i}]")
        elif isinstance(node, Loop):
            if not is_guarded(node.var, node.body):
                violations.append(
                    Violation(path, f"non-contractive recursion: rec {node.var}")
                )
            walk(node.body, bound | {node.var}, f"{path}.body")
        elif isinstance(node, Recur):
            if node.var not in bound:
                violations.append(
                    Violation(path, f"unbound recursion variable: {node.var}")
                )

    walk(t, frozenset(), "$")
    return violations


def branch_lookup(branches: Branches, sort: Sort) -> Optional[TypeNode]:
    """Continuation paired with `sort`, or None when the sort is not offered."""
    for s, cont in branches:
        if s == sort:
            return cont
    return None


def branch_lookup_name(branches: Branches, name: str) -> Optional[TypeNode]:
    for s, cont in branches:
        if s.name == name:
            return cont
    return None


def subterms(t: TypeNode) -> Iterator[TypeNode]:
    yield t
    if isinstance(t, (Com, Send, Recv)):
        for _, c in t.branches:
            yield from subterms(c)
    elif isinstance(t, Loop):
        yield from subterms(t.body)


# ---------------------------------------------------------------------------
# Canonical JSON encoding.

def payload_to_json(p: PayloadSchema) -> object:
    if isinstance(p, EndpointPayload):
        return {"kind": "endpoint", "role": p.role.name, "local": type_to_json(p.local)}
    return p


def sort_to_json(s: Sort) -> dict:
    return {"name": s.name, "payload": payload_to_json(s.payload)}


def type_to_json(t: TypeNode) -> dict:
    if isinstance(t, End):
        return {"kind": "end"}
    if isinstance(t, Recur):
        return {"kind": "recur", "var": t.var.name}
    if isinstance(t, Loop):
        return {"kind": "loop", "var": t.var.name, "body": type_to_json(t.body)}
    kind = {Com: "com", Send: "send", Recv: "recv"}[type(t)]
    return {
        "kind": kind,
        "from": t.sender.name,
        "to": t.receiver.name,
        "branches": [[sort_to_json(s), type_to_json(c)] for s, c in t.branches],
    }


def payload_from_json(data: object) -> PayloadSchema:
    if isinstance(data, dict):
        return EndpointPayload(Role(data["role"]), type_from_json(data["local"]))
    if data not in (PAYLOAD_NONE, PAYLOAD_INT, PAYLOAD_STRING):
        raise ValueError(f"unknown payload schema: {data!r}")
    return data


def sort_from_json(data: dict) -> Sort:
    return Sort(data["name"], payload_from_json(data["payload"]))


def type_from_json(data: dict) -> TypeNode:
    kind = data["kind"]
    if kind == "end":
        return END
    if kind == "recur":
        return Recur(RecVar(data["var"]))
    if kind == "loop":
        return Loop(RecVar(data["var"]), type_from_json(data["body"]))
    ctor = {"com": Com, "send": Send, "recv": Recv}[kind]
    branches = tuple(
        (sort_from_json(s), type_from_json(c)) for s, c in data["branches"]
    )
    return ctor(Role(data["from"]), Role(data["to"]), branches)


def type_to_json_text(t: TypeNode) -> str:
    return json.dumps(type_to_json(t), separators=(",", ":"))
