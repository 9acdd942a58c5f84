"""The tool-program mini-language: one agent turn is a pipeline of tool
calls, e.g. ``rotate90() | crop(x0=10, y0=20, x1=50, y1=80) | grayscale()``.

Grammar (newlines are equivalent to ``|``)::

    program := call (SEP call)*
    call    := IDENT "(" arglist? ")"
    arglist := arg ("," arg)*
    arg     := IDENT "=" (INT | FLOAT | DQSTRING)
    IDENT   := [a-z][a-z0-9_-]*     (underscores normalize to hyphens)

Parsing and execution never raise on agent input: every program yields a
`ToolProgram` or `ParseError`, and `execute` returns `ExecSuccess` or
`ExecFailure` with a stable, span-bearing message the agent can read.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable, Union

from . import raster
from .raster import BBox, Raster

Value = Union[int, float, str]


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int, span: tuple[int, int]):
        super().__init__(f"{message} at {line}:{col}")
        self.message = message
        self.line = line
        self.col = col
        self.span = span


class DuplicateTool(Exception):
    pass


@dataclass(frozen=True)
class ToolCall:
    tool: str
    args: tuple[tuple[str, Value], ...] = ()
    source_span: tuple[int, int] = field(default=(0, 0), compare=False)

    def __post_init__(self):
        names = [n for n, _ in self.args]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate argument names in call to {self.tool!r}")
        for _, v in self.args:
            if isinstance(v, str) and ('"' in v or "\n" in v):
                raise ValueError("string arguments may not contain '\"' or newlines")
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError("float arguments must be finite")

    def arg_map(self) -> dict[str, Value]:
        return dict(self.args)


@dataclass(frozen=True)
class ToolProgram:
    calls: tuple[ToolCall, ...]

    def __post_init__(self):
        if not self.calls:
            raise ValueError("a tool program must contain at least one call")

    def render(self) -> str:
        """Canonical source text; parse(render(p)) == p."""
        parts = []
        for call in self.calls:
            args = ", ".join(
                f'{n}="{v}"' if isinstance(v, str) else f"{n}={_fmt_value(v)}"
                for n, v in call.args
            )
            parts.append(f"{call.tool}({args})")
        return " | ".join(parts)


def _fmt_value(v: Value) -> str:
    if isinstance(v, float):
        r = repr(v)
        if "e" not in r and "E" not in r:
            return r
        # repr uses scientific notation outside ~1e-4..1e16; the grammar only
        # accepts plain decimals, so emit the exact decimal expansion
        s = format(Decimal(v), "f")
        return s if "." in s else s + ".0"
    return repr(v)


_TOKEN_RE = re.compile(
    r"""
    (?P<WS>[ \t]+)
  | (?P<SEP>[|\n])
  | (?P<FLOAT>-?[0-9]+\.[0-9]+)
  | (?P<INT>-?[0-9]+)
  | (?P<IDENT>[a-z][a-z0-9_-]*)
  | (?P<STRING>"[^"\n]*")
  | (?P<LPAREN>\()
  | (?P<RPAREN>\))
  | (?P<COMMA>,)
  | (?P<EQUALS>=)
    """,
    re.VERBOSE,
)


def _line_col(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []  # (kind, lexeme, offset)
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                line, col = _line_col(text, pos)
                raise ParseError(
                    f"unexpected character {text[pos]!r}", line, col, (pos, 1)
                )
            kind = m.lastgroup
            if kind != "WS":
                self.tokens.append((kind, m.group(), pos))
            pos = m.end()
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        if self.i < len(self.tokens):
            return self.tokens[self.i]
        return ("EOF", "end of input", len(self.text))

    def next(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok[0] != "EOF":
            self.i += 1
        return tok

    def error(self, expected: str) -> ParseError:
        kind, lex, off = self.peek()
        shown = "end of input" if kind == "EOF" else repr(lex)
        line, col = _line_col(self.text, off)
        return ParseError(f"expected {expected}, found {shown}", line, col, (off, len(lex) if kind != "EOF" else 0))


def parse(text: str) -> ToolProgram:
    """Parse program source; raises ParseError with 1-based line/column.

    Runs of '|' and newlines collapse into one separator; leading and
    trailing separators are ignored.
    """
    sc = _Scanner(text)
    while sc.peek()[0] == "SEP":
        sc.next()
    calls = [_parse_call(sc)]
    while True:
        kind, _, _ = sc.peek()
        if kind == "EOF":
            break
        if kind != "SEP":
            raise sc.error("'|' or end of program")
        while sc.peek()[0] == "SEP":
            sc.next()
        if sc.peek()[0] == "EOF":
            break
        calls.append(_parse_call(sc))
    return ToolProgram(tuple(calls))


def _parse_call(sc: _Scanner) -> ToolCall:
    kind, name, start = sc.peek()
    if kind != "IDENT":
        raise sc.error("tool name")
    sc.next()
    if sc.peek()[0] != "LPAREN":
        raise sc.error("'('")
    sc.next()
    args: list[tuple[str, Value]] = []
    if sc.peek()[0] != "RPAREN":
        while True:
            args.append(_parse_arg(sc))
            kind, _, _ = sc.peek()
            if kind == "COMMA":
                sc.next()
                continue
            if kind == "RPAREN":
                break
            raise sc.error("',' or ')'")
    _, rp, rp_off = sc.next()  # RPAREN
    names = [n for n, _ in args]
    if len(set(names)) != len(names):
        dup = next(n for i, n in enumerate(names) if n in names[:i])
        line, col = _line_col(sc.text, start)
        raise ParseError(f"duplicate argument {dup!r} in call to '{name}'", line, col, (start, rp_off + 1 - start))
    canonical = name.replace("_", "-")
    return ToolCall(canonical, tuple(args), (start, rp_off + 1 - start))


def _parse_arg(sc: _Scanner) -> tuple[str, Value]:
    kind, name, _ = sc.peek()
    if kind != "IDENT":
        raise sc.error("argument name")
    sc.next()
    if sc.peek()[0] != "EQUALS":
        raise sc.error("'='")
    sc.next()
    kind, lex, _ = sc.peek()
    if kind == "INT":
        sc.next()
        return (name, int(lex))
    if kind == "FLOAT":
        sc.next()
        return (name, float(lex))
    if kind == "STRING":
        sc.next()
        return (name, lex[1:-1])
    raise sc.error("a number or string value")


# --- registry ----------------------------------------------------------------

@dataclass(frozen=True)
class ArgSpec:
    name: str
    type: str  # "int" | "num"
    required: bool = True
    default: Value | None = None


@dataclass(frozen=True)
class ToolSpec:
    name: str
    args: tuple[ArgSpec, ...]
    doc: str
    category: str  # orientation | crop | enhancement
    fn: Callable[..., Raster] | None = field(default=None, compare=False)


class Registry:
    """Stable-ordered tool table; immutable once the environment is built."""

    def __init__(self):
        self._specs: dict[str, ToolSpec] = {}

    def register(self, spec: ToolSpec) -> None:
        if spec.name in self._specs:
            raise DuplicateTool(f"tool {spec.name!r} is already registered")
        self._specs[spec.name] = spec

    def lookup(self, name: str) -> ToolSpec | None:
        return self._specs.get(name)

    def names(self) -> tuple[str, ...]:
        return tuple(self._specs)

    def __iter__(self):
        return iter(self._specs.values())

    def __len__(self):
        return len(self._specs)

    def doc_lines(self) -> tuple[str, ...]:
        lines = []
        for spec in self._specs.values():
            rendered = []
            for a in spec.args:
                rendered.append(a.name if a.required else f"{a.name}={a.default!r}")
            lines.append(f"{spec.name}({', '.join(rendered)}) - {spec.doc}")
        return tuple(lines)


def _orient_fn(kind: raster.TransformKind):
    return lambda img: raster.apply_transform(img, kind)


def default_registry() -> Registry:
    reg = Registry()
    orient_docs = {
        "rotate90": "rotate the image 90 degrees clockwise",
        "rotate180": "rotate the image 180 degrees",
        "rotate270": "rotate the image 90 degrees counter-clockwise",
        "flip-horizontal": "mirror the image left-right",
        "flip-vertical": "mirror the image top-bottom",
    }
    for name in raster.ORIENTATION_TOOLS:
        reg.register(ToolSpec(name, (), orient_docs[name], "orientation",
                              _orient_fn(raster.KIND_FOR_TOOL[name])))
    reg.register(ToolSpec(
        "crop",
        tuple(ArgSpec(n, "int") for n in ("x0", "y0", "x1", "y1")),
        "cut out the box [x0,x1) x [y0,y1); values in [0,1] given as "
        "floats are fractions of the image size",
        "crop",
    ))
    reg.register(ToolSpec("brightness", (ArgSpec("factor", "num", False, 1.3),),
                          "scale channel values by factor", "enhancement", raster.brightness))
    reg.register(ToolSpec("contrast", (ArgSpec("factor", "num", False, 1.3),),
                          "scale contrast around mid-gray by factor", "enhancement", raster.contrast))
    reg.register(ToolSpec("grayscale", (), "convert to 3-channel gray", "enhancement", raster.grayscale))
    reg.register(ToolSpec("blur", (ArgSpec("radius", "int", False, 2),),
                          "box blur with the given radius", "enhancement", raster.blur))
    reg.register(ToolSpec("sharpen", (), "unsharp mask against a radius-1 blur", "enhancement", raster.sharpen))
    reg.register(ToolSpec("edge-detect", (), "Sobel gradient magnitude", "enhancement", raster.edge_detect))
    return reg


DEFAULT_REGISTRY = default_registry()


# --- execution ----------------------------------------------------------------

@dataclass(frozen=True)
class AppliedCall:
    """One successfully executed call with its resolved arguments.

    For crop the args are the effective absolute box after fraction scaling,
    rounding, and clipping; in_size is the image the call consumed.
    """

    tool: str
    args: tuple[tuple[str, Value], ...]
    in_size: tuple[int, int]
    out_size: tuple[int, int]


@dataclass(frozen=True)
class ExecSuccess:
    result: Raster
    applied: tuple[str, ...]
    calls: tuple[AppliedCall, ...]
    log: str


@dataclass(frozen=True)
class ExecFailure:
    error_kind: str  # ParseError | UnknownTool | BadArgs | RuntimeError
    message: str
    span: tuple[int, int]
    line: int
    col: int
    applied_prefix: tuple[str, ...]

    def __post_init__(self):
        if not self.message:
            raise ValueError("failure message must be non-empty")


ExecOutcome = Union[ExecSuccess, ExecFailure]


class _CallError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind
        self.message = message


def _round_half_away(x: float) -> int:
    if x >= 0:
        return math.floor(x + 0.5)
    return math.ceil(x - 0.5)


def _resolve_crop_box(call: ToolCall, img: Raster, crop_mode: str) -> tuple[int, int, int, int]:
    got = call.arg_map()
    vals = [got[n] for n in ("x0", "y0", "x1", "y1")]
    # all four given as floats inside [0,1] means relative coordinates
    if all(isinstance(v, float) and 0.0 <= v <= 1.0 for v in vals):
        dims = (img.width, img.height, img.width, img.height)
        px = [_round_half_away(v * d) for v, d in zip(vals, dims)]
    else:
        px = [v if isinstance(v, int) else _round_half_away(v) for v in vals]
    x0, y0, x1, y1 = px
    if crop_mode == "strict":
        if x0 < 0 or y0 < 0 or x1 > img.width or y1 > img.height:
            raise _CallError("RuntimeError",
                             f"crop box ({x0},{y0},{x1},{y1}) exceeds image bounds "
                             f"{img.width}x{img.height}")
        if x0 >= x1 or y0 >= y1:
            raise _CallError("RuntimeError", f"crop box ({x0},{y0},{x1},{y1}) has no area")
    else:
        x0, y0 = max(x0, 0), max(y0, 0)
        x1, y1 = min(x1, img.width), min(y1, img.height)
        if x0 >= x1 or y0 >= y1:
            raise _CallError("RuntimeError",
                             f"crop box ({px[0]},{px[1]},{px[2]},{px[3]}) has empty "
                             f"intersection with image bounds {img.width}x{img.height}")
    return (x0, y0, x1, y1)


def _check_args(spec: ToolSpec, call: ToolCall) -> dict[str, Value]:
    got = call.arg_map()
    known = {a.name for a in spec.args}
    for name in got:
        if name not in known:
            raise _CallError("BadArgs", f"tool '{spec.name}': unexpected argument {name!r}")
    resolved: dict[str, Value] = {}
    for a in spec.args:
        if a.name in got:
            v = got[a.name]
            if a.type == "int" and not isinstance(v, int) and spec.name != "crop":
                raise _CallError("BadArgs",
                                 f"tool '{spec.name}': argument {a.name!r} must be an integer")
            if not isinstance(v, (int, float)):
                raise _CallError("BadArgs",
                                 f"tool '{spec.name}': argument {a.name!r} must be a number")
            resolved[a.name] = v
        elif a.required:
            raise _CallError("BadArgs",
                             f"tool '{spec.name}': missing required argument {a.name!r}")
        else:
            resolved[a.name] = a.default
    return resolved


def execute(program: ToolProgram | str, img: Raster,
            registry: Registry | None = None, crop_mode: str = "clip") -> ExecOutcome:
    """Run a program left to right; halts at the first failure.

    Deterministic and total: any failure (including parse failures when the
    program is given as text) is returned as an ExecFailure, never raised.
    """
    reg = registry if registry is not None else DEFAULT_REGISTRY
    if isinstance(program, str):
        source = program
        try:
            program = parse(source)
        except ParseError as e:
            return ExecFailure("ParseError", e.message, e.span, e.line, e.col, ())
    else:
        source = program.render()

    current = img
    applied: list[str] = []
    calls: list[AppliedCall] = []
    log_lines: list[str] = []
    for call in program.calls:
        line, col = _line_col(source, call.source_span[0])

        def fail(kind: str, message: str) -> ExecFailure:
            return ExecFailure(kind, message, call.source_span, line, col, tuple(applied))

        spec = reg.lookup(call.tool)
        if spec is None:
            return fail("UnknownTool",
                        f"unknown tool {call.tool!r}; registered tools: "
                        + ", ".join(reg.names()))
        try:
            kwargs = _check_args(spec, call)
            in_size = current.size
            if spec.name == "crop":
                box = _resolve_crop_box(call, current, crop_mode)
                current = raster.crop(current, BBox(*box), clip=False)
                recorded = tuple(zip(("x0", "y0", "x1", "y1"), box))
            else:
                try:
                    current = spec.fn(current, **kwargs)
                except raster.RasterError as e:
                    raise _CallError("RuntimeError", str(e)) from e
                recorded = tuple(kwargs.items())
        except _CallError as e:
            return fail(e.kind, e.message)
        applied.append(spec.name)
        calls.append(AppliedCall(spec.name, recorded, in_size, current.size))
        log_lines.append(f"{spec.name}: {in_size[0]}x{in_size[1]} -> {current.size[0]}x{current.size[1]}")
    return ExecSuccess(current, tuple(applied), tuple(calls), "\n".join(log_lines))
