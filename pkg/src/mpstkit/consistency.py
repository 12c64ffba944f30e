"""Consistency of global types via pairwise duality of restricted projections.

For every ordered pair of distinct roles (r1, r2), r1's projection is first
restricted to the conversation with r2: actions with other peers are erased
and the continuations they guarded are merged (an internal choice by r1 that
r2 never hears about must collapse into one behaviour r2 can rely on).  The
two restricted views must then be dual: every send to the partner matched by
a receive from this role with the same sorts, coinductively through loops.

Consistency is a separate, explicitly invoked verdict.  Projection and
process checking never depend on it: inconsistent-but-projectable protocols
are still compiled and run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import (
    End,
    GlobalType,
    LocalType,
    Loop,
    Recur,
    Recv,
    Role,
    Send,
    alpha_normalize,
    roles_of,
    unfold,
)
from .projection import MergeError, ProjectionError, close_loop, merge_all, project


def restrict_to_partner(l: LocalType, partner: Role) -> LocalType:
    """Erase every action whose peer is not `partner`.

    Erased actions are replaced by the merge of their restricted
    continuations (send branches may union here: the partner only ever sees
    the results of the choice, never the choice itself).  Raises MergeError
    when the branches do not collapse, which is exactly what makes a role
    pair inconsistent.
    """
    if isinstance(l, (End, Recur)):
        return l
    if isinstance(l, Loop):
        return close_loop(l.var, restrict_to_partner(l.body, partner))
    assert isinstance(l, (Send, Recv))
    peer = l.receiver if isinstance(l, Send) else l.sender
    restricted = tuple(
        (s, restrict_to_partner(c, partner)) for s, c in l.branches
    )
    if peer == partner:
        return type(l)(l.sender, l.receiver, restricted)
    return merge_all([c for _, c in restricted], union_sends=True)


def dual(a: LocalType, b: LocalType) -> bool:
    """Coinductive duality: a send in one view is a receive in the other,
    with equal sort sets and pairwise-dual continuations."""
    seen: set = set()

    def go(x: LocalType, y: LocalType) -> bool:
        x, y = unfold(x), unfold(y)
        key = (alpha_normalize(x), alpha_normalize(y))
        if key in seen:
            return True
        seen.add(key)
        if isinstance(x, End) and isinstance(y, End):
            return True
        pair: Optional[tuple] = None
        if isinstance(x, Send) and isinstance(y, Recv):
            pair = (x, y)
        elif isinstance(x, Recv) and isinstance(y, Send):
            pair = (y, x)
        if pair is None:
            return False
        snd, rcv = pair
        if (snd.sender, snd.receiver) != (rcv.sender, rcv.receiver):
            return False
        snd_conts = {s.name: c for s, c in snd.branches}
        rcv_conts = {s.name: c for s, c in rcv.branches}
        if set(snd_conts) != set(rcv_conts):
            return False
        return all(go(snd_conts[n], rcv_conts[n]) for n in snd_conts)

    return go(a, b)


@dataclass(frozen=True)
class PairVerdict:
    r1: Role
    r2: Role
    ok: bool
    reason: Optional[str] = None

    def __str__(self) -> str:
        status = "ok" if self.ok else f"FAIL: {self.reason}"
        return f"pair ({self.r1},{self.r2}): {status}"


@dataclass
class ConsistencyReport:
    consistent: bool
    pairs: list = field(default_factory=list)

    def failing_pairs(self) -> list:
        return [p for p in self.pairs if not p.ok]

    def render(self) -> str:
        lines = ["consistent" if self.consistent else "inconsistent"]
        for p in self.failing_pairs():
            lines.append(f"  {p}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "consistent": self.consistent,
            "pairs": [
                {
                    "r1": p.r1.name,
                    "r2": p.r2.name,
                    "ok": p.ok,
                    "reason": p.reason,
                }
                for p in self.pairs
            ],
        }


def consistent(g: GlobalType) -> ConsistencyReport:
    """Check all ordered role pairs of g; the report lists every failure."""
    roles = sorted(roles_of(g), key=lambda r: r.name)
    projections: dict = {}
    proj_errors: dict = {}
    for r in roles:
        try:
            projections[r] = project(g, r)
        except ProjectionError as e:
            proj_errors[r] = e
    pairs = []
    for r1 in roles:
        for r2 in roles:
            if r1 == r2:
                continue
            bad = proj_errors.get(r1) or proj_errors.get(r2)
            if bad is not None:
                pairs.append(PairVerdict(r1, r2, False, f"unprojectable: {bad}"))
                continue
            try:
                v1 = restrict_to_partner(projections[r1], r2)
                v2 = restrict_to_partner(projections[r2], r1)
            except MergeError as e:
                pairs.append(
                    PairVerdict(r1, r2, False, f"restriction failed: {e.reason}")
                )
                continue
            if dual(v1, v2):
                pairs.append(PairVerdict(r1, r2, True))
            else:
                pairs.append(PairVerdict(r1, r2, False, "restricted views not dual"))
    return ConsistencyReport(all(p.ok for p in pairs), pairs)
