"""Static checking of process terms against projected local types.

A process term is written in continuation-passing style: every communication
action names the session variable it acts on and a binder for the successor
endpoint, mirroring how an endpoint handle is consumed and replaced at run
time.  The checker walks the term with a typing environment that maps
session variables to (role, local type) and data variables to value types.

Session variables are linear: an action, a delegation, or an alias kills the
old name.  Sends may implement any single offered branch; receives must
implement all of them.  Loop entry records the loop type (and a snapshot of
the other live sessions); recur must present the current descendant of the
loop endpoint at exactly that type.

The checker recovers after most errors (poisoning the affected session) so
one pass reports every independent violation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Union

from .core import (
    End,
    EndpointPayload,
    LocalType,
    Loop,
    PAYLOAD_INT,
    PAYLOAD_NONE,
    PAYLOAD_STRING,
    Recv,
    Role,
    Send,
    Sort,
    branch_lookup_name,
    struct_eq,
    unfold,
    well_formed,
)
from .projection import ProjectionError, project

Pos = Optional[tuple]  # (line, col)


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class IntLit:
    value: int
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class StrLit:
    value: str
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class VarRef:
    name: str
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SessionRef:
    name: str
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class NewSort:
    sort: Sort
    args: tuple = ()
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Field:
    target: "Expr"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Sub:
    a: "Expr"
    b: "Expr"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Lt:
    a: "Expr"
    b: "Expr"
    pos: Pos = field(default=None, compare=False)


Expr = Union[IntLit, StrLit, VarRef, SessionRef, NewSort, Field, Sub, Lt]


# ---------------------------------------------------------------------------
# Process terms


@dataclass(frozen=True)
class SendT:
    session: str
    to: Role
    payload: Expr
    bind: str
    cont: "ProcessTerm"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class RecvArm:
    sort_name: str
    payload_var: str  # "_" discards
    bind: str
    cont: "ProcessTerm"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class RecvT:
    session: str
    frm: Role
    branches: tuple  # tuple[RecvArm, ...]
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class LoopT:
    session: str
    recur_var: str
    bind: str
    body: "ProcessTerm"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class RecurT:
    recur_var: str
    session: str
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class EndT:
    results: tuple = ()
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class IfT:
    cond: Expr
    then: "ProcessTerm"
    els: "ProcessTerm"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class LetT:
    name: str
    value: Expr
    cont: "ProcessTerm"
    pos: Pos = field(default=None, compare=False)


ProcessTerm = Union[SendT, RecvT, LoopT, RecurT, EndT, IfT, LetT]


# ---------------------------------------------------------------------------
# Diagnostics


class ErrorClass(str, Enum):
    WRONG_PEER = "wrong-peer"
    WRONG_SORT = "wrong-sort"
    WRONG_ACTION_KIND = "wrong-action-kind"
    MISSING_RECV_BRANCH = "missing-recv-branch"
    WRONG_RECURSIVE_TYPE = "wrong-recursive-type"
    NON_TERMINATED_SESSION = "non-terminated-session"
    LINEARITY_REUSE = "linearity-reuse"
    UNBOUND_VARIABLE = "unbound-variable"
    EXPR_TYPE = "expr-type-mismatch"
    PROJECTION_FAILED = "projection-failed"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Diagnostic:
    cls: ErrorClass
    message: str
    path: str
    pos: Pos = None
    expected: Optional[str] = None
    found: Optional[str] = None

    def render(self, filename: str = "<proc>") -> str:
        line, col = self.pos if self.pos else (0, 0)
        detail = self.message
        if self.expected is not None or self.found is not None:
            detail += f": expected {self.expected}, found {self.found}"
        return f"{filename}:{line}:{col}: {self.cls}: {detail} (at {self.path})"

    def to_json(self) -> dict:
        return {
            "class": self.cls.value,
            "message": self.message,
            "path": self.path,
            "line": self.pos[0] if self.pos else None,
            "col": self.pos[1] if self.pos else None,
            "expected": self.expected,
            "found": self.found,
        }


# ---------------------------------------------------------------------------
# Typing environment

# Value types for data variables: base type names or a Sort.
T_INT = "int"
T_STRING = "string"
T_BOOL = "bool"
T_UNIT = "unit"


@dataclass(frozen=True)
class EndpointType:
    """Type of a session endpoint used as a delegation payload."""

    role: Role
    local: LocalType


@dataclass(frozen=True)
class LoopEntry:
    recur_var: str
    loop_type: LocalType
    others: tuple  # tuple[(var, alpha-normalized type), ...] at loop entry


@dataclass(frozen=True)
class SessionState:
    role: Role
    type: LocalType
    loop_entries: tuple = ()


POISONED = object()  # state.type sentinel after an unrecoverable protocol error


@dataclass
class TypingEnv:
    sessions: dict = field(default_factory=dict)  # var -> SessionState
    dead: dict = field(default_factory=dict)  # var -> reason string
    data: dict = field(default_factory=dict)  # var -> value type

    def copy(self) -> "TypingEnv":
        return TypingEnv(dict(self.sessions), dict(self.dead), dict(self.data))


def _show(t) -> str:
    return "<poisoned>" if t is POISONED else str(t)


class Checker:
    """One checking pass over a process term; collects diagnostics."""

    def __init__(self, filename: str = "<proc>"):
        self.filename = filename
        self.diags: list = []

    # -- diagnostics -------------------------------------------------------

    def _err(
        self,
        cls: ErrorClass,
        message: str,
        path: str,
        pos: Pos,
        expected: Optional[str] = None,
        found: Optional[str] = None,
    ) -> None:
        self.diags.append(Diagnostic(cls, message, path, pos, expected, found))

    # -- expressions -------------------------------------------------------

    def expr_type(self, env: TypingEnv, e: Expr, path: str):
        """Type of a data expression; session references are rejected here
        (they are only meaningful as delegation payloads)."""
        if isinstance(e, IntLit):
            return T_INT
        if isinstance(e, StrLit):
            return T_STRING
        if isinstance(e, (VarRef, SessionRef)):
            name = e.name
            if name in env.sessions:
                self._err(
                    ErrorClass.EXPR_TYPE,
                    f"session variable {name} used as data",
                    path,
                    e.pos,
                )
                return None
            if name in env.dead:
                self._err(
                    ErrorClass.LINEARITY_REUSE,
                    f"use of dead session variable {name} ({env.dead[name]})",
                    path,
                    e.pos,
                )
                return None
            if name not in env.data:
                self._err(ErrorClass.UNBOUND_VARIABLE, f"unbound variable {name}", path, e.pos)
                return None
            return env.data[name]
        if isinstance(e, Field):
            t = self.expr_type(env, e.target, path)
            if t is None:
                return None
            if not isinstance(t, Sort):
                self._err(
                    ErrorClass.EXPR_TYPE,
                    "field access on a non-message value",
                    path,
                    e.pos,
                    expected="a received message",
                    found=str(t),
                )
                return None
            if t.payload == PAYLOAD_INT:
                return T_INT
            if t.payload == PAYLOAD_STRING:
                return T_STRING
            self._err(
                ErrorClass.EXPR_TYPE,
                f"message sort {t.name} carries no data payload",
                path,
                e.pos,
            )
            return None
        if isinstance(e, (Sub, Lt)):
            ta = self.expr_type(env, e.a, path)
            tb = self.expr_type(env, e.b, path)
            for t, side in ((ta, e.a), (tb, e.b)):
                if t is not None and t != T_INT:
                    self._err(
                        ErrorClass.EXPR_TYPE,
                        "arithmetic on a non-integer",
                        path,
                        getattr(side, "pos", e.pos),
                        expected=T_INT,
                        found=str(t),
                    )
            return T_INT if isinstance(e, Sub) else T_BOOL
        if isinstance(e, NewSort):
            self._check_sort_args(env, e, path)
            return e.sort
        raise TypeError(f"unknown expression node: {e!r}")

    def _check_sort_args(self, env: TypingEnv, e: NewSort, path: str) -> None:
        schema = e.sort.payload
        if schema == PAYLOAD_NONE:
            if e.args:
                self._err(
                    ErrorClass.EXPR_TYPE,
                    f"sort {e.sort.name} takes no payload",
                    path,
                    e.pos,
                )
            return
        if len(e.args) != 1:
            self._err(
                ErrorClass.EXPR_TYPE,
                f"sort {e.sort.name} takes exactly one payload argument",
                path,
                e.pos,
            )
            return
        if isinstance(schema, EndpointPayload):
            return  # validated against the session in payload position
        want = T_INT if schema == PAYLOAD_INT else T_STRING
        got = self.expr_type(env, e.args[0], path)
        if got is not None and got != want:
            self._err(
                ErrorClass.EXPR_TYPE,
                f"payload of sort {e.sort.name} has the wrong type",
                path,
                e.pos,
                expected=want,
                found=str(got),
            )

    # -- session variable access -------------------------------------------

    def _session(self, env: TypingEnv, var: str, path: str, pos: Pos):
        """Look up a live session, reporting and recovering from misuse.

        Using a name that was aliased away steals the state back from the
        live alias (the alias becomes dead), so checking can continue and
        later misuse of the alias is still caught."""
        if var in env.sessions:
            return env.sessions[var]
        if var in env.dead:
            reason = env.dead[var]
            self._err(
                ErrorClass.LINEARITY_REUSE,
                f"session variable {var} is no longer usable ({reason})",
                path,
                pos,
            )
            if reason.startswith("aliased to "):
                alias = reason[len("aliased to "):]
                if alias in env.sessions:
                    state = env.sessions.pop(alias)
                    env.dead[alias] = f"superseded by original name {var}"
                    del env.dead[var]
                    env.sessions[var] = state
                    return state
            state = SessionState(Role("Unknown"), POISONED)
            del env.dead[var]
            env.sessions[var] = state
            return state
        self._err(
            ErrorClass.UNBOUND_VARIABLE, f"unknown session variable {var}", path, pos
        )
        state = SessionState(Role("Unknown"), POISONED)
        env.sessions[var] = state
        return state

    def _rebind(self, env: TypingEnv, old: str, new: str, state: SessionState) -> None:
        del env.sessions[old]
        if old != new:
            env.dead[old] = "consumed by a communication action"
        env.dead.pop(new, None)
        env.sessions[new] = state

    # -- payload matching ---------------------------------------------------

    def _delegated_session(self, e: Expr) -> Optional[str]:
        if isinstance(e, SessionRef):
            return e.name
        if isinstance(e, NewSort) and len(e.args) == 1:
            arg = e.args[0]
            if isinstance(arg, (SessionRef, VarRef)):
                return arg.name
        if isinstance(e, VarRef):
            return e.name
        return None

    def _match_payload(self, env: TypingEnv, term: SendT, ty: Send, path: str):
        """Resolve the send payload against the offered branches.

        Returns (branch_sort, continuation, delegated_var) or None after
        reporting.  A delegated session is matched by role and by structural
        equality of its current type with the branch schema."""
        e = term.payload
        offered = ", ".join(s.name for s, _ in ty.branches)
        deleg = self._delegated_session(e)
        if deleg is not None and (deleg in env.sessions or deleg in env.dead):
            state = self._session(env, deleg, path, term.pos)
            if state.type is POISONED:
                return None
            if isinstance(e, NewSort):
                cont = branch_lookup_name(ty.branches, e.sort.name)
                srt = next((s for s, _ in ty.branches if s.name == e.sort.name), None)
                if cont is None:
                    self._err(
                        ErrorClass.WRONG_SORT,
                        "sort not offered by the protocol here",
                        path,
                        term.pos,
                        expected=f"one of [{offered}]",
                        found=e.sort.name,
                    )
                    return None
                schema = srt.payload
                if not isinstance(schema, EndpointPayload):
                    self._err(
                        ErrorClass.WRONG_SORT,
                        f"sort {srt.name} does not carry an endpoint",
                        path,
                        term.pos,
                    )
                    return None
                if schema.role != state.role or not struct_eq(schema.local, state.type):
                    self._err(
                        ErrorClass.WRONG_SORT,
                        "delegated endpoint does not match the declared schema",
                        path,
                        term.pos,
                        expected=f"{schema.role} at {schema.local}",
                        found=f"{state.role} at {_show(state.type)}",
                    )
                    return None
                return srt, cont, deleg
            # bare session reference: find the unique endpoint branch that fits
            for srt, cont in ty.branches:
                schema = srt.payload
                if (
                    isinstance(schema, EndpointPayload)
                    and schema.role == state.role
                    and struct_eq(schema.local, state.type)
                ):
                    return srt, cont, deleg
            self._err(
                ErrorClass.WRONG_SORT,
                "no offered sort accepts this endpoint",
                path,
                term.pos,
                expected=f"one of [{offered}]",
                found=f"endpoint {state.role} at {_show(state.type)}",
            )
            return None
        if isinstance(e, NewSort):
            self._check_sort_args(env, e, path)
            cont = branch_lookup_name(ty.branches, e.sort.name)
            srt = next((s for s, _ in ty.branches if s.name == e.sort.name), None)
            if cont is None:
                self._err(
                    ErrorClass.WRONG_SORT,
                    "sort not offered by the protocol here",
                    path,
                    term.pos,
                    expected=f"one of [{offered}]",
                    found=e.sort.name,
                )
                return None
            return srt, cont, None
        got = self.expr_type(env, e, path)
        if isinstance(got, Sort):
            cont = branch_lookup_name(ty.branches, got.name)
            srt = next((s for s, _ in ty.branches if s.name == got.name), None)
            if cont is not None:
                return srt, cont, None
        self._err(
            ErrorClass.WRONG_SORT,
            "payload does not match any offered sort",
            path,
            term.pos,
            expected=f"one of [{offered}]",
            found=str(got),
        )
        return None

    # -- terms ---------------------------------------------------------------

    def check(self, env: TypingEnv, term: ProcessTerm, path: str = "$") -> None:
        if isinstance(term, SendT):
            self._check_send(env, term, path)
        elif isinstance(term, RecvT):
            self._check_recv(env, term, path)
        elif isinstance(term, LoopT):
            self._check_loop(env, term, path)
        elif isinstance(term, RecurT):
            self._check_recur(env, term, path)
        elif isinstance(term, EndT):
            self._check_end(env, term, path)
        elif isinstance(term, IfT):
            t = self.expr_type(env, term.cond, path)
            if t is not None and t != T_BOOL:
                self._err(
                    ErrorClass.EXPR_TYPE,
                    "condition is not a boolean",
                    path,
                    term.pos,
                    expected=T_BOOL,
                    found=str(t),
                )
            self.check(env.copy(), term.then, f"{path}.then")
            self.check(env.copy(), term.els, f"{path}.else")
        elif isinstance(term, LetT):
            self._check_let(env, term, path)
        else:
            raise TypeError(f"unknown process term: {term!r}")

    def _head_type(self, env: TypingEnv, term, path: str):
        state = self._session(env, term.session, path, term.pos)
        if state.type is POISONED:
            return state, POISONED
        return state, unfold(state.type)

    def _check_send(self, env: TypingEnv, term: SendT, path: str) -> None:
        state, ty = self._head_type(env, term, path)
        if ty is POISONED:
            self._rebind(env, term.session, term.bind, state)
            self.check(env, term.cont, f"{path}.cont")
            return
        if not isinstance(ty, Send):
            kind = "receive" if isinstance(ty, Recv) else "termination"
            self._err(
                ErrorClass.WRONG_ACTION_KIND,
                "protocol does not allow a send here",
                path,
                term.pos,
                expected=f"a {kind} ({_show(ty)})",
                found=f"send to {term.to}",
            )
            self._rebind(env, term.session, term.bind, replace(state, type=POISONED))
            self.check(env, term.cont, f"{path}.cont")
            return
        if ty.receiver != term.to:
            self._err(
                ErrorClass.WRONG_PEER,
                "send addressed to the wrong role",
                path,
                term.pos,
                expected=str(ty.receiver),
                found=str(term.to),
            )
            self._rebind(env, term.session, term.bind, replace(state, type=POISONED))
            self.check(env, term.cont, f"{path}.cont")
            return
        matched = self._match_payload(env, term, ty, path)
        if matched is None:
            self._rebind(env, term.session, term.bind, replace(state, type=POISONED))
            self.check(env, term.cont, f"{path}.cont")
            return
        _, cont_type, delegated = matched
        if delegated is not None:
            env.sessions.pop(delegated, None)
            env.dead[delegated] = "delegated away"
        self._rebind(env, term.session, term.bind, replace(state, type=cont_type))
        self.check(env, term.cont, f"{path}.cont")

    def _check_recv(self, env: TypingEnv, term: RecvT, path: str) -> None:
        state, ty = self._head_type(env, term, path)
        if ty is POISONED:
            for arm in term.branches:
                arm_env = env.copy()
                self._rebind(arm_env, term.session, arm.bind, state)
                self.check(arm_env, arm.cont, f"{path}.{arm.sort_name}")
            return
        if not isinstance(ty, Recv):
            kind = "send" if isinstance(ty, Send) else "termination"
            self._err(
                ErrorClass.WRONG_ACTION_KIND,
                "protocol does not allow a receive here",
                path,
                term.pos,
                expected=f"a {kind} ({_show(ty)})",
                found=f"receive from {term.frm}",
            )
            return
        if ty.sender != term.frm:
            self._err(
                ErrorClass.WRONG_PEER,
                "receive awaits the wrong role",
                path,
                term.pos,
                expected=str(ty.sender),
                found=str(term.frm),
            )
            return
        offered = {s.name: (s, c) for s, c in ty.branches}
        supplied = {arm.sort_name for arm in term.branches}
        missing = [n for n in offered if n not in supplied]
        if missing:
            self._err(
                ErrorClass.MISSING_RECV_BRANCH,
                "receive must implement every offered branch",
                path,
                term.pos,
                expected=f"branches for [{', '.join(offered)}]",
                found=f"missing [{', '.join(missing)}]",
            )
        for arm in term.branches:
            arm_path = f"{path}.{arm.sort_name}"
            if arm.sort_name not in offered:
                self._err(
                    ErrorClass.WRONG_SORT,
                    "receive branch for a sort the protocol does not offer",
                    arm_path,
                    arm.pos,
                    expected=f"one of [{', '.join(offered)}]",
                    found=arm.sort_name,
                )
                continue
            srt, cont_type = offered[arm.sort_name]
            arm_env = env.copy()
            schema = srt.payload
            if arm.payload_var != "_":
                if isinstance(schema, EndpointPayload):
                    arm_env.sessions[arm.payload_var] = SessionState(
                        schema.role, schema.local
                    )
                    arm_env.dead.pop(arm.payload_var, None)
                elif schema == PAYLOAD_NONE:
                    arm_env.data[arm.payload_var] = srt
                else:
                    arm_env.data[arm.payload_var] = srt
            elif isinstance(schema, EndpointPayload):
                self._err(
                    ErrorClass.LINEARITY_REUSE,
                    "a received endpoint must be bound, not discarded",
                    arm_path,
                    arm.pos,
                )
            self._rebind(arm_env, term.session, arm.bind, replace(state, type=cont_type))
            self.check(arm_env, arm.cont, arm_path)

    def _check_loop(self, env: TypingEnv, term: LoopT, path: str) -> None:
        state = self._session(env, term.session, path, term.pos)
        if state.type is POISONED:
            self._rebind(env, term.session, term.bind, state)
            self.check(env, term.body, f"{path}.loop({term.recur_var})")
            return
        ty = state.type
        if not isinstance(ty, Loop):
            self._err(
                ErrorClass.WRONG_ACTION_KIND,
                "protocol does not loop here",
                path,
                term.pos,
                expected=_show(ty),
                found=f"loop {term.recur_var}",
            )
            self._rebind(env, term.session, term.bind, replace(state, type=POISONED))
            self.check(env, term.body, f"{path}.loop({term.recur_var})")
            return
        from .core import alpha_normalize, substitute

        others = tuple(
            (v, alpha_normalize(s.type))
            for v, s in sorted(env.sessions.items())
            if v != term.session and s.type is not POISONED
        )
        entry = LoopEntry(term.recur_var, ty, others)
        body_state = SessionState(
            state.role,
            substitute(ty.body, ty.var, ty),
            state.loop_entries + (entry,),
        )
        self._rebind(env, term.session, term.bind, body_state)
        self.check(env, term.body, f"{path}.loop({term.recur_var})")

    def _check_recur(self, env: TypingEnv, term: RecurT, path: str) -> None:
        if term.session in env.dead:
            self._err(
                ErrorClass.WRONG_RECURSIVE_TYPE,
                f"recur on a stale session handle {term.session}"
                f" ({env.dead[term.session]}); the loop must recur on the"
                " current endpoint",
                path,
                term.pos,
            )
            return
        if term.session not in env.sessions:
            self._err(
                ErrorClass.UNBOUND_VARIABLE,
                f"unknown session variable {term.session}",
                path,
                term.pos,
            )
            return
        state = env.sessions.pop(term.session)
        env.dead[term.session] = "consumed by recur"
        if state.type is POISONED:
            return
        entry = None
        for candidate in reversed(state.loop_entries):
            if candidate.recur_var == term.recur_var:
                entry = candidate
                break
        if entry is None:
            self._err(
                ErrorClass.WRONG_RECURSIVE_TYPE,
                f"no enclosing loop {term.recur_var} for session {term.session}",
                path,
                term.pos,
            )
            return
        if not struct_eq(state.type, entry.loop_type):
            self._err(
                ErrorClass.WRONG_RECURSIVE_TYPE,
                "session is not back at the loop-entry type",
                path,
                term.pos,
                expected=str(entry.loop_type),
                found=_show(state.type),
            )
        snapshot = dict(entry.others)
        from .core import alpha_normalize

        for v, s in sorted(env.sessions.items()):
            if s.type is POISONED:
                continue
            if v not in snapshot:
                self._err(
                    ErrorClass.NON_TERMINATED_SESSION,
                    f"session {v} was opened inside the loop body and is still live at recur",
                    path,
                    term.pos,
                )
            elif alpha_normalize(s.type) != snapshot[v]:
                self._err(
                    ErrorClass.WRONG_RECURSIVE_TYPE,
                    f"session {v} changed state across the loop iteration",
                    path,
                    term.pos,
                )

    def _check_end(self, env: TypingEnv, term: EndT, path: str) -> None:
        for v in term.results:
            if v not in env.sessions and v not in env.dead:
                self._err(
                    ErrorClass.UNBOUND_VARIABLE,
                    f"unknown result variable {v}",
                    path,
                    term.pos,
                )
        for v, state in sorted(env.sessions.items()):
            if state.type is POISONED:
                continue
            if not isinstance(unfold(state.type), End):
                self._err(
                    ErrorClass.NON_TERMINATED_SESSION,
                    f"session {v} still has protocol left at termination",
                    path,
                    term.pos,
                    expected="end",
                    found=str(state.type),
                )

    def _check_let(self, env: TypingEnv, term: LetT, path: str) -> None:
        value = term.value
        name = (
            value.name if isinstance(value, (SessionRef, VarRef)) else None
        )
        if name is not None and name in env.sessions:
            # aliasing a session transfers ownership; the old name is dead
            state = env.sessions.pop(name)
            env.dead[name] = f"aliased to {term.name}"
            env.dead.pop(term.name, None)
            env.sessions[term.name] = state
            self.check(env, term.cont, f"{path}.let({term.name})")
            return
        t = self.expr_type(env, value, path)
        if term.name in env.sessions:
            self._err(
                ErrorClass.LINEARITY_REUSE,
                f"binding {term.name} would shadow a live session",
                path,
                term.pos,
            )
        elif t is not None:
            env.data[term.name] = t
        self.check(env, term.cont, f"{path}.let({term.name})")


def check_expr(env: TypingEnv, e: Expr):
    """Type an expression; returns (type or None, diagnostics)."""
    ch = Checker()
    if isinstance(e, SessionRef) or (
        isinstance(e, VarRef) and e.name in env.sessions
    ):
        state = env.sessions.get(e.name)
        if state is not None:
            return EndpointType(state.role, state.type), []
    t = ch.expr_type(env, e, "$")
    return t, ch.diags


def check_process(env: TypingEnv, term: ProcessTerm, filename: str = "<proc>") -> list:
    """Check a process term; returns the list of diagnostics (empty = ok)."""
    for state in env.sessions.values():
        bad = well_formed(state.type)
        if bad:
            raise ValueError(f"ill-formed local type in environment: {bad[0]}")
    ch = Checker(filename)
    ch.check(env.copy(), term)
    return ch.diags


@dataclass
class ProcReport:
    name: str
    diagnostics: list

    @property
    def ok(self) -> bool:
        return not self.diagnostics


@dataclass
class SessionCheckResult:
    reports: list
    warnings: list  # unimplemented roles etc.

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.reports)

    def all_diagnostics(self) -> list:
        return [d for r in self.reports for d in r.diagnostics]


def check_session(protocol_file, filename: str = "<file>") -> SessionCheckResult:
    """Check every process script in a protocol file against its projections.

    Roles of a referenced protocol with no process are warnings, not errors:
    each process is checked independently of who else is implemented."""
    reports = []
    warnings = []
    implemented: dict = {}
    for proc in protocol_file.procs:
        env = TypingEnv()
        diags: list = []
        for role, proto_name, var in proc.bindings:
            implemented.setdefault(proto_name, set()).add(role)
            try:
                g = protocol_file.concrete[proto_name]
            except KeyError:
                diags.append(
                    Diagnostic(
                        ErrorClass.UNBOUND_VARIABLE,
                        f"unknown protocol {proto_name}",
                        "$",
                        proc.pos,
                    )
                )
                continue
            try:
                local = project(g, role)
            except ProjectionError as e:
                diags.append(
                    Diagnostic(
                        ErrorClass.PROJECTION_FAILED,
                        f"cannot project {proto_name} onto {role}: {e}",
                        "$",
                        proc.pos,
                    )
                )
                continue
            env.sessions[var] = SessionState(role, local)
        if not diags:
            diags = check_process(env, proc.term, filename)
        reports.append(ProcReport(proc.name, diags))
    from .core import roles_of

    for proto_name, roles in implemented.items():
        g = protocol_file.concrete.get(proto_name)
        if g is None:
            continue
        for role in sorted(roles_of(g), key=lambda r: r.name):
            if role not in roles:
                warnings.append(
                    f"role {role} of protocol {proto_name} has no process (unimplemented)"
                )
    return SessionCheckResult(reports, warnings)
