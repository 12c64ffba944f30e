"""Elaboration: resolve a parsed surface file into core ASTs.

Generic global definitions are instantiated by capture-avoiding substitution
of their role and protocol parameters.  Sort references resolve against the
file's sort table; an endpoint sort's schema is the projection of a named
global onto a role, so well-formedness of delegated types falls out of the
same machinery as everything else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import surface, typecheck
from .core import (
    Com,
    END,
    EndpointPayload,
    GlobalType,
    LocalType,
    Loop,
    Recur,
    RecVar,
    Recv,
    Role,
    Send,
    Sort,
    free_rec_vars,
)
from .projection import ProjectionError, project


class ElabError(Exception):
    def __init__(self, message: str, pos=None):
        self.message = message
        self.pos = pos
        line, col = pos if pos else (0, 0)
        super().__init__(f"{line}:{col}: {message}")


@dataclass(frozen=True)
class LocalAssert:
    global_name: str
    role: Role
    declared: LocalType
    pos: object = None


@dataclass(frozen=True)
class ProcDecl:
    name: str
    bindings: tuple  # ((Role, protocolName, var), ...)
    term: typecheck.ProcessTerm
    pos: object = None


@dataclass
class ProtocolFile:
    """Elaborated protocol file: the unit the checker and runtime consume."""

    sorts: dict = field(default_factory=dict)  # name -> Sort
    global_defs: dict = field(default_factory=dict)  # name -> surface.GlobalDef
    concrete: dict = field(default_factory=dict)  # name -> GlobalType (no params)
    local_asserts: list = field(default_factory=list)
    procs: list = field(default_factory=list)
    surface: Optional[surface.SurfaceFile] = None


@dataclass
class _Ctx:
    roles: dict
    protos: dict
    recvars: dict


class _Elaborator:
    def __init__(self, sf: surface.SurfaceFile):
        self.sf = sf
        self.sort_decls: dict = {}
        self.defs: dict = {}
        self.sorts: dict = {}
        self._in_progress: set = set()
        self._concrete_memo: dict = {}

        for d in sf.sort_decls():
            if d.name in self.sort_decls:
                raise ElabError(f"duplicate sort declaration: {d.name}", d.pos)
            self.sort_decls[d.name] = d
        for d in sf.global_defs():
            if d.name in self.defs:
                raise ElabError(f"duplicate protocol definition: {d.name}", d.pos)
            self.defs[d.name] = d

    # -- sorts ---------------------------------------------------------------

    def sort(self, name: str, pos) -> Sort:
        if name in self.sorts:
            return self.sorts[name]
        decl = self.sort_decls.get(name)
        if decl is None:
            raise ElabError(f"unknown sort: {name}", pos)
        schema = decl.schema
        if isinstance(schema, surface.SEndpointSchema):
            g = self.concrete(schema.global_name, decl.pos)
            try:
                local = project(g, Role(schema.project_onto))
            except ProjectionError as e:
                raise ElabError(
                    f"endpoint schema of sort {name}: {e}", decl.pos
                ) from e
            resolved = Sort(name, EndpointPayload(Role(schema.role), local))
        else:
            resolved = Sort(name, schema)
        self.sorts[name] = resolved
        return resolved

    # -- globals -------------------------------------------------------------

    def concrete(self, name: str, pos=None) -> GlobalType:
        if name in self._concrete_memo:
            return self._concrete_memo[name]
        d = self.defs.get(name)
        if d is None:
            raise ElabError(f"unknown protocol: {name}", pos)
        if d.params:
            raise ElabError(
                f"protocol {name} is generic; it must be instantiated", pos
            )
        g = self.instantiate(name, [], pos)
        self._concrete_memo[name] = g
        return g

    def instantiate(self, name: str, args: list, pos=None) -> GlobalType:
        d = self.defs.get(name)
        if d is None:
            raise ElabError(f"unknown protocol: {name}", pos)
        if name in self._in_progress:
            raise ElabError(f"recursive protocol definition: {name}", pos)
        if len(args) != len(d.params):
            raise ElabError(
                f"protocol {name} expects {len(d.params)} argument(s),"
                f" got {len(args)}",
                pos,
            )
        roles: dict = {}
        protos: dict = {}
        for (pname, kind), arg in zip(d.params, args):
            if kind == "role":
                if not isinstance(arg, Role):
                    raise ElabError(
                        f"parameter {pname} of {name} expects a role", pos
                    )
                roles[pname] = arg
            else:
                if isinstance(arg, Role):
                    raise ElabError(
                        f"parameter {pname} of {name} expects a protocol", pos
                    )
                protos[pname] = arg
        self._in_progress.add(name)
        try:
            return self.global_type(d.body, _Ctx(roles, protos, {}))
        finally:
            self._in_progress.discard(name)

    def _role(self, name: str, ctx: _Ctx, pos) -> Role:
        if name in ctx.roles:
            return ctx.roles[name]
        if name in ctx.protos or name in ctx.recvars:
            raise ElabError(f"{name} is not a role here", pos)
        return Role(name)

    def _fresh_recvar(self, name: str, ctx: _Ctx) -> RecVar:
        # avoid capturing recursion variables that arrive free inside
        # protocol arguments (Loop binders must not bind them by accident)
        avoid = {
            v.name for g in ctx.protos.values() for v in free_rec_vars(g)
        }
        if name not in avoid:
            return RecVar(name)
        i = 1
        while f"{name}_{i}" in avoid:
            i += 1
        return RecVar(f"{name}_{i}")

    def global_type(self, t, ctx: _Ctx) -> GlobalType:
        if isinstance(t, surface.STEnd):
            return END
        if isinstance(t, surface.STRec):
            var = self._fresh_recvar(t.var, ctx)
            inner = _Ctx(ctx.roles, ctx.protos, dict(ctx.recvars))
            inner.recvars[t.var] = var
            return Loop(var, self.global_type(t.body, inner))
        if isinstance(t, surface.STCom):
            sender = self._role(t.sender, ctx, t.pos)
            receiver = self._role(t.receiver, ctx, t.pos)
            branches = tuple(
                (self.sort(sname, t.pos), self.global_type(cont, ctx))
                for sname, cont in t.branches
            )
            return Com(sender, receiver, branches)
        assert isinstance(t, surface.STRef)
        if not t.args:
            if t.name in ctx.recvars:
                return Recur(ctx.recvars[t.name])
            if t.name in ctx.protos:
                return ctx.protos[t.name]
            if t.name in ctx.roles:
                raise ElabError(f"role {t.name} used as a protocol", t.pos)
            if t.name in self.defs:
                return self.instantiate(t.name, [], t.pos)
            raise ElabError(f"unknown protocol reference: {t.name}", t.pos)
        d = self.defs.get(t.name)
        if d is None:
            raise ElabError(f"unknown protocol reference: {t.name}", t.pos)
        if len(t.args) != len(d.params):
            raise ElabError(
                f"protocol {t.name} expects {len(d.params)} argument(s),"
                f" got {len(t.args)}",
                t.pos,
            )
        args: list = []
        for (pname, kind), sarg in zip(d.params, t.args):
            if kind == "role":
                if not isinstance(sarg, surface.STRef) or sarg.args:
                    raise ElabError(
                        f"argument for role parameter {pname} must be a role name",
                        t.pos,
                    )
                args.append(self._role(sarg.name, ctx, t.pos))
            else:
                args.append(self.global_type(sarg, ctx))
        return self.instantiate(t.name, args, t.pos)

    # -- declared local types --------------------------------------------------

    def local_type(self, t, ctx: _Ctx) -> LocalType:
        if isinstance(t, surface.STEnd):
            return END
        if isinstance(t, surface.STRec):
            inner = _Ctx(ctx.roles, ctx.protos, dict(ctx.recvars))
            inner.recvars[t.var] = RecVar(t.var)
            return Loop(RecVar(t.var), self.local_type(t.body, inner))
        if isinstance(t, surface.STRef):
            if t.args or t.name not in ctx.recvars:
                raise ElabError(
                    f"unknown recursion variable in local type: {t.name}", t.pos
                )
            return Recur(ctx.recvars[t.name])
        assert isinstance(t, surface.SLAct)
        branches = tuple(
            (self.sort(sname, t.pos), self.local_type(cont, ctx))
            for sname, cont in t.branches
        )
        ctor = Send if t.direction == "!" else Recv
        return ctor(Role(t.sender), Role(t.receiver), branches)

    # -- processes -------------------------------------------------------------

    def expr(self, e) -> typecheck.Expr:
        if isinstance(e, surface.SInt):
            return typecheck.IntLit(e.value, e.pos)
        if isinstance(e, surface.SStr):
            return typecheck.StrLit(e.value, e.pos)
        if isinstance(e, surface.SVar):
            return typecheck.VarRef(e.name, e.pos)
        if isinstance(e, surface.SField):
            return typecheck.Field(self.expr(e.target), e.pos)
        if isinstance(e, surface.SSub):
            return typecheck.Sub(self.expr(e.a), self.expr(e.b), e.pos)
        if isinstance(e, surface.SLt):
            return typecheck.Lt(self.expr(e.a), self.expr(e.b), e.pos)
        if isinstance(e, surface.SCall):
            sort = self.sort(e.name, e.pos)
            return typecheck.NewSort(sort, (self.expr(e.arg),), e.pos)
        raise TypeError(f"unknown surface expression: {e!r}")

    def proc_term(self, p, default_session: str) -> typecheck.ProcessTerm:
        if isinstance(p, surface.SSend):
            session = p.session or default_session
            sort = self.sort(p.sort_name, p.pos)
            args = (self.expr(p.arg),) if p.arg is not None else ()
            payload = typecheck.NewSort(sort, args, p.pos)
            return typecheck.SendT(
                session,
                Role(p.to),
                payload,
                session,
                self.proc_term(p.cont, default_session),
                p.pos,
            )
        if isinstance(p, surface.SRecv):
            session = p.session or default_session
            arms = tuple(
                typecheck.RecvArm(
                    arm.sort_name,
                    arm.payload_var,
                    session,
                    self.proc_term(arm.cont, default_session),
                    arm.pos,
                )
                for arm in p.arms
            )
            return typecheck.RecvT(session, Role(p.frm), arms, p.pos)
        if isinstance(p, surface.SLoop):
            session = p.session or default_session
            return typecheck.LoopT(
                session, p.var, session, self.proc_term(p.body, default_session), p.pos
            )
        if isinstance(p, surface.SRecur):
            session = p.session or default_session
            return typecheck.RecurT(p.var, session, p.pos)
        if isinstance(p, surface.SEndP):
            return typecheck.EndT(p.results, p.pos)
        if isinstance(p, surface.SIf):
            return typecheck.IfT(
                self.expr(p.cond),
                self.proc_term(p.then, default_session),
                self.proc_term(p.els, default_session),
                p.pos,
            )
        if isinstance(p, surface.SLet):
            return typecheck.LetT(
                p.name,
                self.expr(p.value),
                self.proc_term(p.cont, default_session),
                p.pos,
            )
        raise TypeError(f"unknown surface process: {p!r}")

    # -- whole file --------------------------------------------------------------

    def run(self) -> ProtocolFile:
        pf = ProtocolFile(surface=self.sf)
        pf.global_defs = dict(self.defs)
        for name, d in self.defs.items():
            if not d.params:
                pf.concrete[name] = self.concrete(name, d.pos)
        for name in self.sort_decls:
            pf.sorts[name] = self.sort(name, self.sort_decls[name].pos)
        for d in self.sf.local_defs():
            if d.global_name not in self.defs:
                raise ElabError(
                    f"local type declared for unknown protocol {d.global_name}", d.pos
                )
            declared = self.local_type(d.declared, _Ctx({}, {}, {}))
            pf.local_asserts.append(
                LocalAssert(d.global_name, Role(d.role), declared, d.pos)
            )
        seen_procs: set = set()
        for d in self.sf.proc_defs():
            if d.name in seen_procs:
                raise ElabError(f"duplicate process definition: {d.name}", d.pos)
            seen_procs.add(d.name)
            bindings: list = []
            used_vars: set = set()
            for i, (role, proto, var) in enumerate(d.bindings):
                if var is None:
                    if i > 0:
                        raise ElabError(
                            f"process {d.name}: sessions after the first need"
                            " an explicit 'as' variable",
                            d.pos,
                        )
                    var = "s"
                if var in used_vars:
                    raise ElabError(
                        f"process {d.name}: duplicate session variable {var}", d.pos
                    )
                used_vars.add(var)
                if proto not in self.defs:
                    raise ElabError(
                        f"process {d.name} plays unknown protocol {proto}", d.pos
                    )
                bindings.append((Role(role), proto, var))
            default_session = bindings[0][2]
            term = self.proc_term(d.body, default_session)
            pf.procs.append(ProcDecl(d.name, tuple(bindings), term, d.pos))
        return pf


def elaborate(sf: surface.SurfaceFile) -> ProtocolFile:
    return _Elaborator(sf).run()


def instantiate(pf: ProtocolFile, name: str, args: list) -> GlobalType:
    """Instantiate a (possibly generic) definition of an elaborated file."""
    el = _Elaborator(pf.surface)
    return el.instantiate(name, list(args))


def load_text(text: str) -> ProtocolFile:
    """Parse and elaborate; raises on the first syntax or elaboration error."""
    result = surface.parse_protocol_file(text)
    if result.errors:
        raise result.errors[0]
    return elaborate(result.file)
