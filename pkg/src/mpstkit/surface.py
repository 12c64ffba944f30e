"""Surface syntax for protocol files (.mpst): lexer, parser, renderer.

A file holds sort declarations, (possibly generic) global type definitions,
declared local types that must match a projection, and process scripts:

    sort Propose(int);
    sort Accept;

    global Haggle = A -> B : Propose . rec X . B -> A : {
        Accept . end,
        Propose . A -> B : { Accept . end, Propose . X } };

    local Haggle @ B = A -> B ? Propose . rec X . ...;

    proc bob plays B in Haggle {
      recv A { Propose(v) -> ... }
    }

Parsing is deterministic recursive descent.  Errors carry line/column and
the expected-token set; the parser resynchronises at the next top-level
keyword so several errors can be reported in one pass.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from . import core

KEYWORDS = {
    "sort", "global", "local", "proc", "plays", "in", "as", "rec", "end",
    "loop", "recur", "send", "recv", "if", "then", "else", "let",
    "role", "protocol", "endpoint", "int", "string",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<arrow>->)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*|_)
  | (?P<int>\d+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<punct>[{}()\[\];:.,=@!?<\-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "int" | "string" | "punct" | "kw" | "eof"
    text: str
    line: int
    col: int


@dataclass
class ParseError(Exception):
    line: int
    col: int
    message: str
    expected: tuple = ()

    def __str__(self) -> str:
        msg = f"{self.line}:{self.col}: {self.message}"
        if self.expected:
            msg += f" (expected {', '.join(self.expected)})"
        return msg


def tokenize(text: str) -> list:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(line, col, f"unexpected character {text[pos]!r}")
        lexeme = m.group(0)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            if kind == "arrow":
                tokens.append(Token("punct", "->", line, col))
            elif kind == "ident":
                k = "kw" if lexeme in KEYWORDS else "ident"
                tokens.append(Token(k, lexeme, line, col))
            elif kind == "int":
                tokens.append(Token("int", lexeme, line, col))
            elif kind == "string":
                tokens.append(Token("string", lexeme, line, col))
            else:
                tokens.append(Token("punct", lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Surface AST

Pos = tuple  # (line, col)


@dataclass(frozen=True)
class STCom:
    sender: str
    receiver: str
    branches: tuple  # ((sortName, STy), ...)
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class STEnd:
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class STRec:
    var: str
    body: "STy"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class STRef:
    name: str
    args: tuple = ()
    pos: Pos = field(default=None, compare=False)


STy = Union[STCom, STEnd, STRec, STRef]


@dataclass(frozen=True)
class SLAct:
    sender: str
    receiver: str
    direction: str  # "!" send, "?" recv
    branches: tuple
    pos: Pos = field(default=None, compare=False)


SLTy = Union[SLAct, STEnd, STRec, STRef]


@dataclass(frozen=True)
class SortDecl:
    name: str
    schema: object  # "none" | "int" | "string" | SEndpointSchema
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SEndpointSchema:
    role: str
    global_name: str
    project_onto: str


@dataclass(frozen=True)
class GlobalDef:
    name: str
    params: tuple  # ((name, "role"|"protocol"), ...)
    body: STy
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class LocalDef:
    global_name: str
    role: str
    declared: SLTy
    pos: Pos = field(default=None, compare=False)


# surface process nodes


@dataclass(frozen=True)
class SSend:
    session: Optional[str]
    to: str
    sort_name: str
    arg: object  # SExpr or None
    cont: "SProc"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SArm:
    sort_name: str
    payload_var: str
    cont: "SProc"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SRecv:
    session: Optional[str]
    frm: str
    arms: tuple
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SLoop:
    session: Optional[str]
    var: str
    body: "SProc"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SRecur:
    session: Optional[str]
    var: str
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SEndP:
    results: tuple = ()
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SIf:
    cond: object
    then: "SProc"
    els: "SProc"
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SLet:
    name: str
    value: object
    cont: "SProc"
    pos: Pos = field(default=None, compare=False)


SProc = Union[SSend, SRecv, SLoop, SRecur, SEndP, SIf, SLet]


@dataclass(frozen=True)
class SInt:
    value: int
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SStr:
    value: str
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SVar:
    name: str
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SCall:
    name: str
    arg: object
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SField:
    target: object
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SSub:
    a: object
    b: object
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class SLt:
    a: object
    b: object
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class ProcDef:
    name: str
    bindings: tuple  # ((role, protocolName, var|None), ...)
    body: SProc
    pos: Pos = field(default=None, compare=False)


@dataclass
class SurfaceFile:
    decls: list = field(default_factory=list)

    def sort_decls(self) -> list:
        return [d for d in self.decls if isinstance(d, SortDecl)]

    def global_defs(self) -> list:
        return [d for d in self.decls if isinstance(d, GlobalDef)]

    def local_defs(self) -> list:
        return [d for d in self.decls if isinstance(d, LocalDef)]

    def proc_defs(self) -> list:
        return [d for d in self.decls if isinstance(d, ProcDef)]


@dataclass
class ParseResult:
    file: SurfaceFile
    errors: list

    @property
    def ok(self) -> bool:
        return not self.errors


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, tokens: list):
        self.tokens = tokens
        self.i = 0

    def peek(self, k: int = 0) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("punct", "kw")

    def accept(self, text: str) -> Optional[Token]:
        if self.at(text):
            return self.next()
        return None

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if not self.at(text):
            raise ParseError(tok.line, tok.col, f"unexpected {tok.text!r}", (text,))
        return self.next()

    def ident(self, what: str = "identifier") -> Token:
        tok = self.peek()
        if tok.kind != "ident" or tok.text == "_":
            raise ParseError(tok.line, tok.col, f"unexpected {tok.text!r}", (what,))
        return self.next()

    # -- declarations --------------------------------------------------------

    def file(self) -> ParseResult:
        decls: list = []
        errors: list = []
        while self.peek().kind != "eof":
            try:
                decls.append(self.decl())
            except ParseError as e:
                errors.append(e)
                self._sync()
        return ParseResult(SurfaceFile(decls), errors)

    def _sync(self) -> None:
        while self.peek().kind != "eof":
            if self.peek().kind == "kw" and self.peek().text in (
                "sort", "global", "local", "proc",
            ):
                return
            self.next()

    def decl(self):
        tok = self.peek()
        if self.at("sort"):
            return self.sort_decl()
        if self.at("global"):
            return self.global_def()
        if self.at("local"):
            return self.local_def()
        if self.at("proc"):
            return self.proc_def()
        raise ParseError(
            tok.line, tok.col, f"unexpected {tok.text!r}",
            ("sort", "global", "local", "proc"),
        )

    def sort_decl(self) -> SortDecl:
        kw = self.expect("sort")
        name = self.ident("sort name")
        schema: object = core.PAYLOAD_NONE
        if self.accept("("):
            if self.accept("int"):
                schema = core.PAYLOAD_INT
            elif self.accept("string"):
                schema = core.PAYLOAD_STRING
            elif self.accept("endpoint"):
                self.expect("[")
                role = self.ident("role")
                self.expect(",")
                gname = self.ident("protocol name")
                self.expect("@")
                onto = self.ident("role")
                self.expect("]")
                schema = SEndpointSchema(role.text, gname.text, onto.text)
            else:
                tok = self.peek()
                raise ParseError(
                    tok.line, tok.col, f"unexpected {tok.text!r}",
                    ("int", "string", "endpoint"),
                )
            self.expect(")")
        self.expect(";")
        return SortDecl(name.text, schema, (kw.line, kw.col))

    def global_def(self) -> GlobalDef:
        kw = self.expect("global")
        name = self.ident("protocol name")
        params: list = []
        if self.accept("["):
            while True:
                pname = self.ident("parameter name")
                self.expect(":")
                if self.accept("role"):
                    kind = "role"
                elif self.accept("protocol"):
                    kind = "protocol"
                else:
                    tok = self.peek()
                    raise ParseError(
                        tok.line, tok.col, f"unexpected {tok.text!r}",
                        ("role", "protocol"),
                    )
                params.append((pname.text, kind))
                if not self.accept(","):
                    break
            self.expect("]")
        self.expect("=")
        body = self.type_expr()
        self.expect(";")
        return GlobalDef(name.text, tuple(params), body, (kw.line, kw.col))

    def local_def(self) -> LocalDef:
        kw = self.expect("local")
        gname = self.ident("protocol name")
        self.expect("@")
        role = self.ident("role")
        self.expect("=")
        declared = self.local_type_expr()
        self.expect(";")
        return LocalDef(gname.text, role.text, declared, (kw.line, kw.col))

    # -- type expressions ----------------------------------------------------

    def type_expr(self) -> STy:
        tok = self.peek()
        if self.accept("end"):
            return STEnd((tok.line, tok.col))
        if self.accept("rec"):
            var = self.ident("recursion variable")
            self.expect(".")
            return STRec(var.text, self.type_expr(), (tok.line, tok.col))
        name = self.ident("role or protocol name")
        if self.accept("->"):
            receiver = self.ident("role")
            self.expect(":")
            branches = self.branches(self.type_expr)
            return STCom(name.text, receiver.text, branches, (name.line, name.col))
        args: list = []
        if self.accept("["):
            while True:
                args.append(self.type_expr())
                if not self.accept(","):
                    break
            self.expect("]")
        return STRef(name.text, tuple(args), (name.line, name.col))

    def local_type_expr(self) -> SLTy:
        tok = self.peek()
        if self.accept("end"):
            return STEnd((tok.line, tok.col))
        if self.accept("rec"):
            var = self.ident("recursion variable")
            self.expect(".")
            return STRec(var.text, self.local_type_expr(), (tok.line, tok.col))
        name = self.ident("role or recursion variable")
        if self.accept("->"):
            receiver = self.ident("role")
            if self.accept("!"):
                direction = "!"
            elif self.accept("?"):
                direction = "?"
            else:
                t = self.peek()
                raise ParseError(t.line, t.col, f"unexpected {t.text!r}", ("!", "?"))
            branches = self.branches(self.local_type_expr)
            return SLAct(
                name.text, receiver.text, direction, branches, (name.line, name.col)
            )
        return STRef(name.text, (), (name.line, name.col))

    def branches(self, sub) -> tuple:
        if self.accept("{"):
            out = [self.branch(sub)]
            while self.accept(","):
                out.append(self.branch(sub))
            self.expect("}")
            return tuple(out)
        return (self.branch(sub),)

    def branch(self, sub) -> tuple:
        sort = self.ident("sort name")
        self.expect(".")
        return (sort.text, sub())

    # -- processes -----------------------------------------------------------

    def proc_def(self) -> ProcDef:
        kw = self.expect("proc")
        name = self.ident("process name")
        self.expect("plays")
        bindings: list = []
        while True:
            role = self.ident("role")
            self.expect("in")
            proto = self.ident("protocol name")
            var = None
            if self.accept("as"):
                var = self.ident("session variable").text
            bindings.append((role.text, proto.text, var))
            if not self.accept(","):
                break
        self.expect("{")
        body = self.stmt()
        self.expect("}")
        return ProcDef(name.text, tuple(bindings), body, (kw.line, kw.col))

    def _session_sel(self) -> Optional[str]:
        if self.accept("["):
            var = self.ident("session variable")
            self.expect("]")
            return var.text
        return None

    def stmt(self) -> SProc:
        tok = self.peek()
        if self.accept("send"):
            sel = self._session_sel()
            to = self.ident("role")
            sort = self.ident("sort name")
            arg = None
            if self.accept("("):
                arg = self.expr()
                self.expect(")")
            self.expect(";")
            cont = self.stmt()
            return SSend(sel, to.text, sort.text, arg, cont, (tok.line, tok.col))
        if self.accept("recv"):
            sel = self._session_sel()
            frm = self.ident("role")
            self.expect("{")
            arms = [self.arm()]
            while self.accept(","):
                arms.append(self.arm())
            self.expect("}")
            return SRecv(sel, frm.text, tuple(arms), (tok.line, tok.col))
        if self.accept("loop"):
            sel = self._session_sel()
            var = self.ident("loop label")
            self.expect("{")
            body = self.stmt()
            self.expect("}")
            return SLoop(sel, var.text, body, (tok.line, tok.col))
        if self.accept("recur"):
            sel = self._session_sel()
            var = self.ident("loop label")
            return SRecur(sel, var.text, (tok.line, tok.col))
        if self.accept("end"):
            results: list = []
            if self.accept("("):
                results.append(self.ident("variable").text)
                while self.accept(","):
                    results.append(self.ident("variable").text)
                self.expect(")")
            return SEndP(tuple(results), (tok.line, tok.col))
        if self.accept("if"):
            cond = self.expr()
            self.expect("then")
            self.expect("{")
            then = self.stmt()
            self.expect("}")
            self.expect("else")
            self.expect("{")
            els = self.stmt()
            self.expect("}")
            return SIf(cond, then, els, (tok.line, tok.col))
        if self.accept("let"):
            name = self.ident("variable")
            self.expect("=")
            value = self.expr()
            self.expect(";")
            cont = self.stmt()
            return SLet(name.text, value, cont, (tok.line, tok.col))
        raise ParseError(
            tok.line, tok.col, f"unexpected {tok.text!r}",
            ("send", "recv", "loop", "recur", "end", "if", "let"),
        )

    def arm(self) -> SArm:
        sort = self.ident("sort name")
        self.expect("(")
        tok = self.peek()
        if tok.kind == "ident":
            var = self.next().text
        else:
            raise ParseError(tok.line, tok.col, f"unexpected {tok.text!r}", ("variable", "_"))
        self.expect(")")
        self.expect("->")
        return SArm(sort.text, var, self.stmt(), (sort.line, sort.col))

    # -- expressions ---------------------------------------------------------

    def expr(self):
        left = self.add_expr()
        tok = self.peek()
        if self.accept("<"):
            return SLt(left, self.add_expr(), (tok.line, tok.col))
        return left

    def add_expr(self):
        left = self.atom()
        while True:
            tok = self.peek()
            if self.accept("-"):
                left = SSub(left, self.atom(), (tok.line, tok.col))
            else:
                return left

    def atom(self):
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return SInt(int(tok.text), (tok.line, tok.col))
        if tok.kind == "string":
            self.next()
            raw = tok.text[1:-1]
            return SStr(raw.replace('\\"', '"').replace("\\\\", "\\"), (tok.line, tok.col))
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "ident" and tok.text != "_":
            self.next()
            if self.accept("("):
                arg = self.expr()
                self.expect(")")
                return SCall(tok.text, arg, (tok.line, tok.col))
            e: object = SVar(tok.text, (tok.line, tok.col))
            while self.at("."):
                dot = self.next()
                fieldname = self.ident("value")
                if fieldname.text != "value":
                    raise ParseError(
                        fieldname.line, fieldname.col,
                        f"unknown field {fieldname.text!r}", ("value",),
                    )
                e = SField(e, (dot.line, dot.col))
            return e
        raise ParseError(
            tok.line, tok.col, f"unexpected {tok.text!r}",
            ("integer", "string", "variable", "("),
        )


def parse_protocol_file(text: str) -> ParseResult:
    """Parse .mpst source; returns the (possibly partial) file plus errors."""
    try:
        tokens = tokenize(text)
    except ParseError as e:
        return ParseResult(SurfaceFile([]), [e])
    return _Parser(tokens).file()


# ---------------------------------------------------------------------------
# Rendering (the inverse of parsing, up to layout)


def render_global_type(t: core.GlobalType) -> str:
    if isinstance(t, core.End):
        return "end"
    if isinstance(t, core.Recur):
        return t.var.name
    if isinstance(t, core.Loop):
        return f"rec {t.var.name} . {render_global_type(t.body)}"
    assert isinstance(t, core.Com)
    return f"{t.sender} -> {t.receiver} : {_render_branches(t.branches, render_global_type)}"


def render_local_type(t: core.LocalType) -> str:
    if isinstance(t, core.End):
        return "end"
    if isinstance(t, core.Recur):
        return t.var.name
    if isinstance(t, core.Loop):
        return f"rec {t.var.name} . {render_local_type(t.body)}"
    direction = "!" if isinstance(t, core.Send) else "?"
    return (
        f"{t.sender} -> {t.receiver} {direction} "
        f"{_render_branches(t.branches, render_local_type)}"
    )


def _render_branches(branches, sub) -> str:
    if len(branches) == 1:
        s, cont = branches[0]
        return f"{s.name} . {sub(cont)}"
    inner = ", ".join(f"{s.name} . {sub(cont)}" for s, cont in branches)
    return "{ " + inner + " }"


def _render_sty(t) -> str:
    if isinstance(t, STEnd):
        return "end"
    if isinstance(t, STRec):
        return f"rec {t.var} . {_render_sty(t.body)}"
    if isinstance(t, STRef):
        if t.args:
            return f"{t.name}[{', '.join(_render_sty(a) for a in t.args)}]"
        return t.name
    if isinstance(t, STCom):
        return f"{t.sender} -> {t.receiver} : {_render_sbranches(t.branches, _render_sty)}"
    assert isinstance(t, SLAct)
    return (
        f"{t.sender} -> {t.receiver} {t.direction} "
        f"{_render_sbranches(t.branches, _render_slty)}"
    )


def _render_slty(t) -> str:
    return _render_sty(t)


def _render_sbranches(branches, sub) -> str:
    if len(branches) == 1:
        name, cont = branches[0]
        return f"{name} . {sub(cont)}"
    inner = ", ".join(f"{name} . {sub(cont)}" for name, cont in branches)
    return "{ " + inner + " }"


def _render_expr(e) -> str:
    if isinstance(e, SInt):
        return str(e.value)
    if isinstance(e, SStr):
        escaped = e.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(e, SVar):
        return e.name
    if isinstance(e, SCall):
        return f"{e.name}({_render_expr(e.arg)})"
    if isinstance(e, SField):
        return f"{_render_atom(e.target)}.value"
    if isinstance(e, SSub):
        # subtraction is left-associative; parenthesise a nested right operand
        return f"{_render_expr(e.a) if isinstance(e.a, SSub) else _render_atom(e.a)} - {_render_atom(e.b)}"
    if isinstance(e, SLt):
        return f"{_render_expr(e.a)} < {_render_expr(e.b)}"
    raise TypeError(f"unknown expression: {e!r}")


def _render_atom(e) -> str:
    if isinstance(e, (SSub, SLt)):
        return f"({_render_expr(e)})"
    return _render_expr(e)


def _render_proc(p, indent: str) -> str:
    pad = indent
    if isinstance(p, SSend):
        sel = f"[{p.session}]" if p.session else ""
        arg = f"({_render_expr(p.arg)})" if p.arg is not None else ""
        return f"{pad}send{sel} {p.to} {p.sort_name}{arg};\n" + _render_proc(p.cont, indent)
    if isinstance(p, SRecv):
        sel = f"[{p.session}]" if p.session else ""
        arms = []
        for arm in p.arms:
            body = _render_proc(arm.cont, indent + "    ")
            arms.append(f"{pad}  {arm.sort_name}({arm.payload_var}) ->\n{body}")
        joined = (",\n").join(arms)
        return f"{pad}recv{sel} {p.frm} {{\n{joined}\n{pad}}}"
    if isinstance(p, SLoop):
        sel = f"[{p.session}]" if p.session else ""
        body = _render_proc(p.body, indent + "  ")
        return f"{pad}loop{sel} {p.var} {{\n{body}\n{pad}}}"
    if isinstance(p, SRecur):
        sel = f"[{p.session}]" if p.session else ""
        return f"{pad}recur{sel} {p.var}"
    if isinstance(p, SEndP):
        if p.results:
            return f"{pad}end({', '.join(p.results)})"
        return f"{pad}end"
    if isinstance(p, SIf):
        then = _render_proc(p.then, indent + "  ")
        els = _render_proc(p.els, indent + "  ")
        return (
            f"{pad}if {_render_expr(p.cond)} then {{\n{then}\n{pad}}} "
            f"else {{\n{els}\n{pad}}}"
        )
    if isinstance(p, SLet):
        return f"{pad}let {p.name} = {_render_expr(p.value)};\n" + _render_proc(p.cont, indent)
    raise TypeError(f"unknown process node: {p!r}")


def render_file(sf: SurfaceFile) -> str:
    """Render a parsed file back to source that reparses to the same AST."""
    chunks = []
    for d in sf.decls:
        if isinstance(d, SortDecl):
            if d.schema == core.PAYLOAD_NONE:
                chunks.append(f"sort {d.name};")
            elif isinstance(d.schema, SEndpointSchema):
                chunks.append(
                    f"sort {d.name}(endpoint[{d.schema.role}, "
                    f"{d.schema.global_name} @ {d.schema.project_onto}]);"
                )
            else:
                chunks.append(f"sort {d.name}({d.schema});")
        elif isinstance(d, GlobalDef):
            params = ""
            if d.params:
                params = "[" + ", ".join(f"{n}: {k}" for n, k in d.params) + "]"
            chunks.append(f"global {d.name}{params} = {_render_sty(d.body)};")
        elif isinstance(d, LocalDef):
            chunks.append(f"local {d.global_name} @ {d.role} = {_render_sty(d.declared)};")
        elif isinstance(d, ProcDef):
            bindings = ", ".join(
                f"{r} in {p}" + (f" as {v}" if v else "")
                for r, p, v in d.bindings
            )
            body = _render_proc(d.body, "  ")
            chunks.append(f"proc {d.name} plays {bindings} {{\n{body}\n}}")
    return "\n\n".join(chunks) + "\n"
