"""Tokenizer, parser, and canonical serializer for the ``.shape`` language.

A shape file is a flat list of named bindings compiled to field
expressions, ended by exactly one export: either a ``field = ...;``
binding or a ``morph(initial=..., final=..., p=...);`` statement.

    # pac-man: two mouth segments joined with a trimmed arc
    s1   = segment(p1=(0, 0), p2=(0.6495, 0.375));
    s2   = segment(p1=(0, 0), p2=(0.6495, -0.375));
    arc  = trim(circle(c=(0, 0), r=0.75), halfplane(o=(0.6495, 0), n=(-1, 0)));
    field = requiv(m=2, s1, s2, arc);

Grammar (EBNF; ``#`` starts a line comment, whitespace is free):

    program    = { statement } ;
    statement  = binding | morph_stmt ;
    binding    = IDENT "=" expr ";" ;
    morph_stmt = "morph" "(" kwarg { "," kwarg } ")" ";" ;
    expr       = call | IDENT ;
    call       = CTOR "(" [ arg { "," arg } ] ")" ;
    arg        = kwarg | expr ;
    kwarg      = IDENT "=" value ;
    value      = NUMBER | point | BOOL | expr ;
    point      = "(" NUMBER "," NUMBER [ "," NUMBER ] ")" ;

Constructors: ``circle(c, r)``, ``segment(p1, p2)``,
``sphere(c, r, normalized)``, ``plane(o, n)``, ``halfplane(o, n)``,
``neg(x)``, ``union(a, b, s)``, ``inter(a, b, s)``,
``requiv(m, x, y, ...)``, ``trim(base, trimmer)``.  All lengths are in
meters; names must be defined before use.

Parsing normalizes programs: optional parameters are materialized with
their defaults and keyword arguments are stored in signature order, so
``parse(serialize(p))`` reproduces ``p`` structurally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .fields import (
    Circle,
    Conjunction,
    Disjunction,
    Equivalence,
    FieldError,
    FieldExpr,
    Negation,
    Plane,
    Segment,
    Sphere,
    Trim,
    validate,
)
from .morph import MorphSchedule

__all__ = [
    "Token",
    "ParseError",
    "SemanticError",
    "ShapeProgram",
    "tokenize",
    "parse",
    "serialize",
    "format_number",
]


class ShapeLangError(Exception):
    """Base for shape-language errors; carries a 1-based source position."""

    def __init__(self, line: int, col: int, message: str):
        self.line = line
        self.col = col
        self.message = message
        super().__init__(f"line {line}:{col}: {message}")


class ParseError(ShapeLangError):
    """Lexical or syntactic error, with the token set that was expected."""

    def __init__(self, line: int, col: int, message: str, expected: frozenset[str] = frozenset()):
        self.expected = expected
        super().__init__(line, col, message)


class SemanticError(ShapeLangError):
    """Well-formed syntax with an invalid meaning (names, ranges, dimensions)."""


@dataclass(frozen=True)
class Token:
    kind: str  # ident | number | lparen | rparen | comma | eq | semi | eof
    value: object
    line: int
    col: int


_PUNCT = {"(": "lparen", ")": "rparen", ",": "comma", "=": "eq", ";": "semi"}
_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789")
_DIGITS = set("0123456789")


def tokenize(source: str) -> list[Token]:
    """Lex ``source`` into tokens; raises :class:`ParseError` on bad input."""
    toks: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
                col += 1
            continue
        if ch in _IDENT_START:
            start = i
            while i < n and source[i] in _IDENT_CONT:
                i += 1
            text = source[start:i]
            toks.append(Token("ident", text, line, col))
            col += i - start
            continue
        if ch in _DIGITS or ch == "." or (ch in "+-" and i + 1 < n and source[i + 1] in _DIGITS | {"."}):
            start, startcol = i, col
            if ch in "+-":
                i += 1
            while i < n and source[i] in _DIGITS:
                i += 1
            if i < n and source[i] == ".":
                i += 1
                while i < n and source[i] in _DIGITS:
                    i += 1
            if i < n and source[i] in "eE":
                j = i + 1
                if j < n and source[j] in "+-":
                    j += 1
                if j < n and source[j] in _DIGITS:
                    i = j
                    while i < n and source[i] in _DIGITS:
                        i += 1
                else:
                    bad = min(j, n - 1)
                    raise ParseError(
                        line, col + (bad - start), "malformed exponent in number"
                    )
            raw = source[start:i]
            if i < n and (source[i] in _IDENT_CONT or source[i] == "."):
                raise ParseError(
                    line,
                    col + (i - start),
                    f"invalid character {source[i]!r} in number",
                )
            try:
                val = float(raw)
            except ValueError:
                raise ParseError(line, startcol, f"malformed number {raw!r}") from None
            toks.append(Token("number", val, line, startcol))
            col += i - start
            continue
        if ch in _PUNCT:
            toks.append(Token(_PUNCT[ch], ch, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(line, col, f"illegal character {ch!r}")
    return toks


# ---------------------------------------------------------------------------
# Source trees (references preserved for faithful serialization)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SRef:
    name: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SCall:
    ctor: str
    children: tuple  # of SRef | SCall
    params: tuple  # of (key, float | tuple | bool), in signature order
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class _Param:
    key: str
    kind: str  # number | int | point | bool
    required: bool = True
    default: object = None


@dataclass(frozen=True)
class _Ctor:
    name: str
    params: tuple[_Param, ...]
    min_children: int
    max_children: int | None  # None = unbounded
    params_first: bool = False  # requiv prints m before its children


_CONSTRUCTORS = {
    c.name: c
    for c in (
        _Ctor("circle", (_Param("c", "point"), _Param("r", "number")), 0, 0),
        _Ctor("segment", (_Param("p1", "point"), _Param("p2", "point")), 0, 0),
        _Ctor(
            "sphere",
            (
                _Param("c", "point"),
                _Param("r", "number"),
                _Param("normalized", "bool", required=False, default=True),
            ),
            0,
            0,
        ),
        _Ctor("plane", (_Param("o", "point"), _Param("n", "point")), 0, 0),
        _Ctor("halfplane", (_Param("o", "point"), _Param("n", "point")), 0, 0),
        _Ctor("neg", (), 1, 1),
        _Ctor("union", (_Param("s", "number", required=False, default=0.0),), 2, 2),
        _Ctor("inter", (_Param("s", "number", required=False, default=0.0),), 2, 2),
        _Ctor(
            "requiv",
            (_Param("m", "int", required=False, default=2),),
            2,
            None,
            params_first=True,
        ),
        _Ctor("trim", (), 2, 2),
    )
}

_RESERVED = set(_CONSTRUCTORS) | {"morph", "true", "false"}


@dataclass(frozen=True)
class ShapeProgram:
    """Parsed and validated shape program.

    ``order`` lists binding names in source order; ``defs_src`` holds the
    reference-preserving source trees used by :func:`serialize`; the
    compiled per-name field expressions are available via
    :attr:`definitions`.  Exactly one export is present: the ``field``
    binding or a morph statement.
    """

    order: tuple[str, ...]
    defs_src: dict
    morph_src: tuple | None  # (initial, final, p, s) or None
    spans: dict = field(compare=False, default_factory=dict)
    resolved: dict = field(compare=False, default_factory=dict)

    @property
    def has_field(self) -> bool:
        return "field" in self.defs_src

    @property
    def has_morph(self) -> bool:
        return self.morph_src is not None

    @property
    def definitions(self) -> dict[str, FieldExpr]:
        """Compiled field expression for every binding."""
        return dict(self.resolved)

    def field_expr(self) -> FieldExpr:
        """The exported field; raises if the program exports a morph."""
        if not self.has_field:
            raise SemanticError(1, 1, "program exports a morph, not a field")
        return self.resolved["field"]

    def morph_schedule(self, t_start: float = 0.0) -> MorphSchedule:
        """The exported morph schedule; raises if the program exports a field."""
        if not self.has_morph:
            raise SemanticError(1, 1, "program exports a field, not a morph")
        initial, final, p, s = self.morph_src
        return MorphSchedule(
            self.resolved[initial], self.resolved[final], p=p, s=s, t_start=t_start
        )


class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        eline, ecol = 1, 1
        if self.toks:
            last = self.toks[-1]
            eline, ecol = last.line, last.col
        self.toks.append(Token("eof", None, eline, ecol))
        self.i = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def advance(self) -> Token:
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def expect(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(
                tok.line,
                tok.col,
                f"expected {what} but found {self._describe(tok)}",
                expected=frozenset((what,)),
            )
        return self.advance()

    @staticmethod
    def _describe(tok: Token) -> str:
        if tok.kind == "eof":
            return "end of input"
        return repr(str(tok.value))

    # -- program ----------------------------------------------------------

    def parse(self) -> ShapeProgram:
        order: list[str] = []
        defs_src: dict = {}
        resolved: dict = {}
        spans: dict = {}
        morph_src = None
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.kind != "ident":
                raise ParseError(
                    tok.line,
                    tok.col,
                    f"expected a binding or morph export but found {self._describe(tok)}",
                    expected=frozenset(("identifier",)),
                )
            if tok.value == "morph" and self.peek(1).kind == "lparen":
                if morph_src is not None:
                    raise SemanticError(tok.line, tok.col, "duplicate morph export")
                if "field" in defs_src:
                    raise SemanticError(
                        tok.line, tok.col, "program already exports a field"
                    )
                morph_src = self._morph_stmt(resolved)
                continue
            name_tok = self.advance()
            name = name_tok.value
            if name in _RESERVED:
                raise SemanticError(
                    name_tok.line, name_tok.col, f"{name!r} is a reserved word"
                )
            if name in defs_src:
                raise SemanticError(
                    name_tok.line, name_tok.col, f"duplicate definition of {name!r}"
                )
            if name == "field" and morph_src is not None:
                raise SemanticError(
                    name_tok.line, name_tok.col, "program already exports a morph"
                )
            self.expect("eq", "'='")
            src = self._expr(resolved)
            self.expect("semi", "';'")
            expr = self._compile(src, resolved)
            diags = validate(expr)
            if diags:
                raise SemanticError(name_tok.line, name_tok.col, str(diags[0]))
            order.append(name)
            defs_src[name] = src
            resolved[name] = expr
            spans[name] = (name_tok.line, name_tok.col)
        if morph_src is None and "field" not in defs_src:
            end = self.peek()
            raise SemanticError(
                end.line, end.col, "program must export a field or a morph"
            )
        return ShapeProgram(
            order=tuple(order),
            defs_src=defs_src,
            morph_src=morph_src,
            spans=spans,
            resolved=resolved,
        )

    def _morph_stmt(self, resolved: dict) -> tuple:
        head = self.advance()  # 'morph'
        self.expect("lparen", "'('")
        kwargs: dict = {}
        while True:
            key_tok = self.expect("ident", "keyword argument")
            self.expect("eq", "'='")
            if key_tok.value in ("initial", "final"):
                ref = self.expect("ident", "shape name")
                if ref.value not in resolved:
                    raise SemanticError(
                        ref.line, ref.col, f"unknown name {ref.value!r}"
                    )
                kwargs[key_tok.value] = ref.value
            elif key_tok.value in ("p", "s"):
                num = self.expect("number", "number")
                kwargs[key_tok.value] = float(num.value)
            else:
                raise SemanticError(
                    key_tok.line,
                    key_tok.col,
                    f"unknown morph argument {key_tok.value!r}",
                )
            if self.peek().kind == "comma":
                self.advance()
                continue
            break
        self.expect("rparen", "')'")
        self.expect("semi", "';'")
        for required in ("initial", "final", "p"):
            if required not in kwargs:
                raise SemanticError(
                    head.line, head.col, f"morph is missing {required!r}"
                )
        kwargs.setdefault("s", 0.0)
        try:
            MorphSchedule(
                resolved[kwargs["initial"]],
                resolved[kwargs["final"]],
                p=kwargs["p"],
                s=kwargs["s"],
            )
        except ValueError as err:
            raise SemanticError(head.line, head.col, str(err)) from None
        return (kwargs["initial"], kwargs["final"], kwargs["p"], kwargs["s"])

    # -- expressions --------------------------------------------------------

    def _expr(self, resolved: dict):
        tok = self.expect("ident", "shape expression")
        if tok.value in _CONSTRUCTORS:
            return self._call(tok, resolved)
        if tok.value not in resolved:
            raise SemanticError(tok.line, tok.col, f"unknown name {tok.value!r}")
        return SRef(tok.value, tok.line, tok.col)

    def _call(self, head: Token, resolved: dict) -> SCall:
        spec = _CONSTRUCTORS[head.value]
        self.expect("lparen", "'('")
        children: list = []
        params: dict = {}
        if self.peek().kind != "rparen":
            while True:
                if self.peek().kind == "ident" and self.peek(1).kind == "eq":
                    key_tok = self.advance()
                    self.advance()  # '='
                    pspec = next(
                        (p for p in spec.params if p.key == key_tok.value), None
                    )
                    if pspec is None:
                        raise SemanticError(
                            key_tok.line,
                            key_tok.col,
                            f"{spec.name} has no argument {key_tok.value!r}",
                        )
                    if key_tok.value in params:
                        raise SemanticError(
                            key_tok.line,
                            key_tok.col,
                            f"duplicate argument {key_tok.value!r}",
                        )
                    params[key_tok.value] = self._value(pspec, resolved)
                else:
                    children.append(self._expr(resolved))
                if self.peek().kind == "comma":
                    self.advance()
                    continue
                break
        close = self.expect("rparen", "')'")
        hi = spec.max_children if spec.max_children is not None else len(children)
        if not (spec.min_children <= len(children) <= hi):
            want = (
                f"{spec.min_children}"
                if spec.max_children == spec.min_children
                else f"at least {spec.min_children}"
            )
            raise SemanticError(
                head.line,
                head.col,
                f"{spec.name} takes {want} shape argument(s), got {len(children)}",
            )
        ordered = []
        for pspec in spec.params:
            if pspec.key in params:
                ordered.append((pspec.key, params[pspec.key]))
            elif pspec.required:
                raise SemanticError(
                    head.line, head.col, f"{spec.name} is missing {pspec.key!r}"
                )
            else:
                ordered.append((pspec.key, pspec.default))
        return SCall(
            spec.name, tuple(children), tuple(ordered), head.line, head.col
        )

    def _value(self, pspec: _Param, resolved: dict):
        tok = self.peek()
        if pspec.kind in ("number", "int"):
            num = self.expect("number", "number")
            val = float(num.value)
            if pspec.kind == "int":
                if not val.is_integer():
                    raise SemanticError(
                        num.line, num.col, f"{pspec.key} must be an integer"
                    )
                return int(val)
            return val
        if pspec.kind == "point":
            self.expect("lparen", "'('")
            coords = [float(self.expect("number", "number").value)]
            self.expect("comma", "','")
            coords.append(float(self.expect("number", "number").value))
            if self.peek().kind == "comma":
                self.advance()
                coords.append(float(self.expect("number", "number").value))
            self.expect("rparen", "')'")
            return tuple(coords)
        if pspec.kind == "bool":
            word = self.expect("ident", "'true' or 'false'")
            if word.value not in ("true", "false"):
                raise SemanticError(
                    word.line, word.col, f"{pspec.key} must be true or false"
                )
            return word.value == "true"
        raise AssertionError(f"unhandled param kind {pspec.kind}")

    # -- compilation --------------------------------------------------------

    def _compile(self, src, resolved: dict) -> FieldExpr:
        if isinstance(src, SRef):
            return resolved[src.name]
        kids = tuple(self._compile(c, resolved) for c in src.children)
        params = dict(src.params)
        try:
            if src.ctor == "circle":
                return Circle(params["c"], params["r"])
            if src.ctor == "segment":
                return Segment(params["p1"], params["p2"])
            if src.ctor == "sphere":
                return Sphere(params["c"], params["r"], params["normalized"])
            if src.ctor in ("plane", "halfplane"):
                return Plane(params["o"], params["n"])
            if src.ctor == "neg":
                return Negation(kids[0])
            if src.ctor == "union":
                return Disjunction(kids[0], kids[1], s=params["s"])
            if src.ctor == "inter":
                return Conjunction(kids[0], kids[1], s=params["s"])
            if src.ctor == "requiv":
                return Equivalence(kids, m=params["m"])
            if src.ctor == "trim":
                return Trim(kids[0], kids[1])
        except FieldError as err:
            raise SemanticError(src.line, src.col, str(err)) from None
        raise AssertionError(f"unhandled constructor {src.ctor}")


def parse(source: str) -> ShapeProgram:
    """Parse and validate shape-language source text.

    Raises :class:`ParseError` for lexical/syntactic problems and
    :class:`SemanticError` for unknown names, bad parameter ranges, or
    dimension mismatches; both carry 1-based (line, col) positions.
    """
    return _Parser(source).parse()


def format_number(v: float) -> str:
    """Canonical decimal form: integral floats print as integers, everything
    else as the shortest digits that round-trip bit-exactly."""
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        raise ValueError("cannot serialize non-finite numbers")
    if v.is_integer() and abs(v) < 1e17:
        if v == 0.0 and math.copysign(1.0, v) < 0.0:
            return "-0"
        return str(int(v))
    return repr(v)


def _render_value(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, tuple):
        return "(" + ", ".join(format_number(c) for c in val) + ")"
    return format_number(val)


def _render(src) -> str:
    if isinstance(src, SRef):
        return src.name
    spec = _CONSTRUCTORS[src.ctor]
    parts = [f"{k}={_render_value(v)}" for k, v in src.params]
    kids = [_render(c) for c in src.children]
    inner = parts + kids if spec.params_first else kids + parts
    return f"{src.ctor}({', '.join(inner)})"


def serialize(program: ShapeProgram) -> str:
    """Canonical text for ``program``; ``parse(serialize(p))`` equals ``p``."""
    lines = [f"{name} = {_render(program.defs_src[name])};" for name in program.order]
    if program.morph_src is not None:
        initial, final, p, s = program.morph_src
        lines.append(
            f"morph(initial={initial}, final={final}, "
            f"p={format_number(p)}, s={format_number(s)});"
        )
    return "\n".join(lines) + "\n"
