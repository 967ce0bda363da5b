"""Waypoint script language: scanner, recursive-descent parser, checker.

Programs attach small command sequences to lifecycle events ("on
start", "on step", "on end") and to named track waypoints ("at
"stop1""). Statements are function calls with literal arguments plus a
counted repeat block. Comments run from // to end of line; semicolons
after calls are optional.

Parsing never throws: every problem becomes a positioned diagnostic
and the parser resynchronizes (statements skip to the next ';' or '}',
items skip to the next top-level 'on'/'at'). Static checking validates
calls against the function table and waypoint names against a track.

Diagnostic codes
  parse   E001 unclosed block        E002 unexpected token
          E003 duplicate handler     E004 unterminated string
          E005 unexpected character
  check   E101 unknown function      E102 wrong argument count
          E103 argument type         E104 unknown waypoint
          E105 repeat count
  warning W201 waypoint without handler
"""

import json
from dataclasses import dataclass, field

EVENT_KINDS = ("start", "step", "end")

# name -> tuple of parameter kinds: "string", "int", "number" (int or float)
FUNCTIONS = {
    "setColor": ("string",),
    "beepHorn": (),
    "flashLights": ("int",),
    "loadPassenger": (),
    "unloadAllPassengers": (),
    "pauseDriving": ("number",),
    "resumeDriving": (),
}

FILE_EXTENSION = ".wps"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    line: int
    column: int
    code: str
    message: str

    def format(self):
        return f"{self.line}:{self.column} {self.severity} {self.code}: {self.message}"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Repeat:
    count: int
    body: tuple
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Handler:
    kind: str  # "start" | "step" | "end" | "waypoint"
    waypoint: str | None
    body: tuple
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Program:
    items: tuple = ()

    def handler(self, kind, waypoint=None):
        for item in self.items:
            if item.kind == kind and item.waypoint == waypoint:
                return item
        return None

    def waypoint_names(self):
        return [it.waypoint for it in self.items if it.kind == "waypoint"]


# === scanner ===


@dataclass(frozen=True)
class _Token:
    kind: str  # ident | string | int | number | punct | eof
    value: object
    line: int
    column: int


_PUNCT = set("{}(),;")


def _scan(source, diagnostics):
    tokens = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def advance(k=1):
        nonlocal i, line, col
        for _ in range(k):
            if i < n and source[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            advance()
            continue
        if ch == "/" and i + 1 < n and source[i + 1] == "/":
            while i < n and source[i] != "\n":
                advance()
            continue
        tl, tc = line, col
        if ch in _PUNCT:
            tokens.append(_Token("punct", ch, tl, tc))
            advance()
            continue
        if ch == '"':
            advance()
            out = []
            closed = False
            while i < n:
                c = source[i]
                if c == '"':
                    advance()
                    closed = True
                    break
                if c == "\n":
                    break
                if c == "\\" and i + 1 < n:
                    esc = source[i + 1]
                    out.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    advance(2)
                    continue
                out.append(c)
                advance()
            if not closed:
                diagnostics.append(
                    Diagnostic("error", tl, tc, "E004", "unterminated string literal")
                )
            else:
                tokens.append(_Token("string", "".join(out), tl, tc))
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and source[i + 1].isdigit()):
            j = i + 1
            while j < n and source[j].isdigit():
                j += 1
            is_float = False
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            text = source[i:j]
            advance(j - i)
            if is_float:
                tokens.append(_Token("number", float(text), tl, tc))
            else:
                tokens.append(_Token("int", int(text), tl, tc))
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("ident", source[i:j], tl, tc))
            advance(j - i)
            continue
        diagnostics.append(
            Diagnostic("error", tl, tc, "E005", f"unexpected character {ch!r}")
        )
        advance()
    tokens.append(_Token("eof", None, line, col))
    return tokens


# === parser ===


class _Parser:
    def __init__(self, tokens, diagnostics):
        self.tokens = tokens
        self.pos = 0
        self.diagnostics = diagnostics

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, tok, code, message):
        self.diagnostics.append(Diagnostic("error", tok.line, tok.column, code, message))

    def at_item_start(self):
        tok = self.peek()
        return tok.kind == "ident" and tok.value in ("on", "at")

    def recover_item(self):
        """Skip to the next top-level 'on'/'at', tracking brace depth."""
        depth = 0
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                return
            if depth == 0 and self.at_item_start():
                return
            if tok.kind == "punct" and tok.value == "{":
                depth += 1
            elif tok.kind == "punct" and tok.value == "}":
                depth = max(0, depth - 1)
            self.next()

    def recover_stmt(self):
        """Skip to ';' (consumed), '}' (left in place), or statement start."""
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                return
            if tok.kind == "punct" and tok.value == "}":
                return
            if tok.kind == "punct" and tok.value == ";":
                self.next()
                return
            if tok.kind == "ident":
                return
            self.next()

    def parse_program(self):
        items = []
        seen = {}
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                break
            if not self.at_item_start():
                self.error(tok, "E002", f"expected 'on' or 'at', found {_show(tok)}")
                self.next()
                self.recover_item()
                continue
            item = self.parse_item()
            if item is None:
                continue
            key = (item.kind, item.waypoint)
            if key in seen:
                label = item.kind if item.kind != "waypoint" else f'waypoint "{item.waypoint}"'
                self.error(
                    _FakeTok(item.line, item.column), "E003", f"duplicate handler for {label}"
                )
            else:
                seen[key] = item
                items.append(item)
        return Program(items=tuple(items))

    def parse_item(self):
        kw = self.next()  # 'on' or 'at'
        if kw.value == "on":
            ev = self.peek()
            if ev.kind != "ident" or ev.value not in EVENT_KINDS:
                self.error(ev, "E002", f"expected 'start', 'step' or 'end', found {_show(ev)}")
                self.recover_item()
                return None
            self.next()
            body = self.parse_block()
            return Handler(kind=ev.value, waypoint=None, body=body, line=kw.line, column=kw.column)
        name = self.peek()
        if name.kind != "string":
            self.error(name, "E002", f"expected waypoint name string, found {_show(name)}")
            self.recover_item()
            return None
        self.next()
        body = self.parse_block()
        return Handler(kind="waypoint", waypoint=name.value, body=body, line=kw.line, column=kw.column)

    def parse_block(self):
        open_tok = self.peek()
        if not (open_tok.kind == "punct" and open_tok.value == "{"):
            self.error(open_tok, "E002", f"expected '{{', found {_show(open_tok)}")
            return ()
        self.next()
        body = []
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.value == "}":
                self.next()
                return tuple(body)
            if tok.kind == "eof":
                self.error(open_tok, "E001", "unclosed block")
                return tuple(body)
            if tok.kind == "punct" and tok.value == ";":
                self.next()
                continue
            if tok.kind == "ident" and tok.value == "repeat":
                stmt = self.parse_repeat()
            elif tok.kind == "ident":
                stmt = self.parse_call()
            else:
                self.error(tok, "E002", f"expected a statement, found {_show(tok)}")
                self.next()
                self.recover_stmt()
                continue
            if stmt is not None:
                body.append(stmt)

    def parse_repeat(self):
        kw = self.next()
        count = self.peek()
        if count.kind != "int":
            self.error(count, "E002", f"expected repeat count, found {_show(count)}")
            self.recover_stmt()
            return None
        self.next()
        body = self.parse_block()
        return Repeat(count=count.value, body=body, line=kw.line, column=kw.column)

    def parse_call(self):
        name = self.next()
        paren = self.peek()
        if not (paren.kind == "punct" and paren.value == "("):
            self.error(paren, "E002", f"expected '(' after {name.value!r}, found {_show(paren)}")
            self.recover_stmt()
            return None
        self.next()
        args = []
        tok = self.peek()
        if tok.kind == "punct" and tok.value == ")":
            self.next()
        else:
            while True:
                tok = self.peek()
                if tok.kind in ("string", "int", "number"):
                    args.append(tok.value)
                    self.next()
                else:
                    self.error(tok, "E002", f"expected a literal argument, found {_show(tok)}")
                    self.recover_stmt()
                    return None
                sep = self.peek()
                if sep.kind == "punct" and sep.value == ",":
                    self.next()
                    continue
                if sep.kind == "punct" and sep.value == ")":
                    self.next()
                    break
                self.error(sep, "E002", f"expected ',' or ')', found {_show(sep)}")
                self.recover_stmt()
                return None
        if self.peek().kind == "punct" and self.peek().value == ";":
            self.next()
        return Call(name=name.value, args=tuple(args), line=name.line, column=name.column)


class _FakeTok:
    def __init__(self, line, column):
        self.line = line
        self.column = column


def _show(tok):
    if tok.kind == "eof":
        return "end of file"
    if tok.kind == "string":
        return f'string "{tok.value}"'
    return repr(str(tok.value))


def parse(source):
    """Parse source text; returns (Program, diagnostics). Never raises."""
    diagnostics = []
    tokens = _scan(source, diagnostics)
    program = _Parser(tokens, diagnostics).parse_program()
    return program, diagnostics


# === static checks ===


def _arg_matches(kind, value):
    if kind == "string":
        return isinstance(value, str)
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    raise AssertionError(kind)


def _check_stmts(stmts, diagnostics):
    for stmt in stmts:
        if isinstance(stmt, Repeat):
            if stmt.count <= 0:
                diagnostics.append(
                    Diagnostic(
                        "error", stmt.line, stmt.column, "E105",
                        f"repeat count must be positive, got {stmt.count}",
                    )
                )
            _check_stmts(stmt.body, diagnostics)
            continue
        if stmt.name not in FUNCTIONS:
            diagnostics.append(
                Diagnostic(
                    "error", stmt.line, stmt.column, "E101",
                    f"unknown function {stmt.name!r}",
                )
            )
            continue
        spec = FUNCTIONS[stmt.name]
        if len(stmt.args) != len(spec):
            diagnostics.append(
                Diagnostic(
                    "error", stmt.line, stmt.column, "E102",
                    f"{stmt.name} takes {len(spec)} argument(s), got {len(stmt.args)}",
                )
            )
            continue
        for k, (kind, value) in enumerate(zip(spec, stmt.args)):
            if not _arg_matches(kind, value):
                diagnostics.append(
                    Diagnostic(
                        "error", stmt.line, stmt.column, "E103",
                        f"argument {k + 1} of {stmt.name} must be a {kind}",
                    )
                )


def check(program, track=None):
    """Static diagnostics for a parsed program, against a track when given."""
    diagnostics = []
    for item in program.items:
        _check_stmts(item.body, diagnostics)
    if track is not None:
        known = [wp.name for wp in track.waypoints]
        for item in program.items:
            if item.kind == "waypoint" and item.waypoint not in known:
                diagnostics.append(
                    Diagnostic(
                        "error", item.line, item.column, "E104",
                        f"track {track.id!r} has no waypoint {item.waypoint!r}",
                    )
                )
        handled = set(program.waypoint_names())
        for wp in track.waypoints:
            if wp.name not in handled:
                diagnostics.append(
                    Diagnostic(
                        "warning", 1, 1, "W201",
                        f"waypoint {wp.name!r} has no handler",
                    )
                )
    return diagnostics


def compile_program(source, track=None):
    """Parse plus check; the program is usable when no error-severity
    diagnostics are present."""
    program, diagnostics = parse(source)
    diagnostics.extend(check(program, track))
    return program, diagnostics


def has_errors(diagnostics):
    return any(d.severity == "error" for d in diagnostics)


# === pretty printer ===


def _format_literal(value):
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _print_stmts(stmts, indent, out):
    pad = "  " * indent
    for stmt in stmts:
        if isinstance(stmt, Repeat):
            out.append(f"{pad}repeat {stmt.count} {{")
            _print_stmts(stmt.body, indent + 1, out)
            out.append(pad + "}")
        else:
            args = ", ".join(_format_literal(a) for a in stmt.args)
            out.append(f"{pad}{stmt.name}({args})")


def pretty_print(program):
    """Canonical source text; parsing it back yields an equal Program."""
    chunks = []
    for item in program.items:
        head = f'at {json.dumps(item.waypoint)}' if item.kind == "waypoint" else f"on {item.kind}"
        out = [head + " {"]
        _print_stmts(item.body, 1, out)
        out.append("}")
        chunks.append("\n".join(out))
    return "\n\n".join(chunks) + ("\n" if chunks else "")
