"""Game definition files and JSON reports.

A game file is a sequence of ``key = value`` statements separated by
newlines or ``;``. Values are numbers (``-9/8``, ``0.5``, ``1e-10``), bare
words, quoted strings or bracketed lists, which may span lines::

    format = v1
    signature = [2, 2]
    payoff = [[0, 1, 0, -1],
              [-1, 0, 1, 0],
              [0, -1, 0, 1],
              [1, 0, -1, 0]]

Numbers in matrices and vectors are kept as exact Fractions. ``#`` starts a
comment.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import Any

import numpy as np

from .core import PolymatrixGame, Signature, validate_game
from .linalg import to_fraction

FORMAT = "v1"


class GameFileError(ValueError):
    pass


class GameSyntaxError(GameFileError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line, self.col = line, col


class GameSemanticError(GameFileError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<semi>;)
  | (?P<eq>=|:)
  | (?P<lb>\[)
  | (?P<rb>\])
  | (?P<comma>,)
  | (?P<number>[-+−]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?(/\d+)?)
  | (?P<string>"[^"\n]*")
  | (?P<word>[A-Za-z_][A-Za-z0-9_.\-]*)
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise GameSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        if kind == "nl":
            line += 1
            line_start = m.end()
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.depth = 0

    def peek(self) -> _Tok:
        # newlines are insignificant inside brackets
        while self.depth and self.toks[self.i].kind == "nl":
            self.i += 1
        return self.toks[self.i]

    def take(self, kind: str, expected: str) -> _Tok:
        tok = self.peek()
        if tok.kind != kind:
            raise GameSyntaxError(f"expected {expected}, found {tok.text or 'end of file'!r}",
                                  tok.line, tok.col)
        self.i += 1
        return tok

    def statements(self):
        out = []
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                return out
            if tok.kind in ("nl", "semi"):
                self.i += 1
                continue
            key = self.take("word", "a key")
            self.take("eq", "'='")
            value = self.value()
            end = self.peek()
            if end.kind not in ("nl", "semi", "eof"):
                raise GameSyntaxError(f"expected end of statement, found {end.text!r}",
                                      end.line, end.col)
            out.append((key, value))

    def value(self):
        tok = self.peek()
        if tok.kind == "number":
            self.i += 1
            return to_fraction(tok.text.replace("+", ""))
        if tok.kind == "word":
            self.i += 1
            return tok.text
        if tok.kind == "string":
            self.i += 1
            return tok.text[1:-1]
        if tok.kind == "lb":
            self.i += 1
            self.depth += 1
            items = []
            if self.peek().kind == "rb":
                self.i += 1
                self.depth -= 1
                return items
            while True:
                items.append(self.value())
                nxt = self.peek()
                if nxt.kind == "comma":
                    self.i += 1
                    if self.peek().kind == "rb":  # trailing comma
                        self.i += 1
                        self.depth -= 1
                        return items
                    continue
                self.take("rb", "',' or ']'")
                self.depth -= 1
                return items
        raise GameSyntaxError(f"expected a value, found {tok.text or 'end of file'!r}",
                              tok.line, tok.col)


@dataclass
class GameFile:
    """Parsed contents of a game file.

    ``skew_model``, ``model_point`` (the point whose block sums give the
    scaling), ``scaling``, ``equilibrium`` and ``incidence`` are optional, as
    are the integration defaults.
    """

    signature: tuple[int, ...]
    payoff: list[list[Fraction]]
    name: str | None = None
    skew_model: list[list[Fraction]] | None = None
    model_point: list[Fraction] | None = None
    scaling: list[Fraction] | None = None
    equilibrium: list[Fraction] | None = None
    incidence: list[list[Fraction]] | None = None
    x0: list[Fraction] | None = None
    t_span: list[Fraction] | None = None
    rtol: Fraction | None = None
    atol: Fraction | None = None
    max_step: Fraction | None = None
    method: str | None = None
    mode: str | None = None
    format: str = FORMAT
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def game(self) -> PolymatrixGame:
        return validate_game(self.signature, self.payoff)

    def skew_game(self) -> PolymatrixGame | None:
        if self.skew_model is None:
            return None
        return validate_game(self.signature, self.skew_model)


_MATRIX_KEYS = ("payoff", "skew_model", "incidence")
_VECTOR_KEYS = ("model_point", "scaling", "equilibrium", "x0", "t_span")
_SCALAR_KEYS = ("rtol", "atol", "max_step")
_WORD_KEYS = ("name", "method", "mode", "format")
_KEYS = ("signature",) + _MATRIX_KEYS + _VECTOR_KEYS + _SCALAR_KEYS + _WORD_KEYS


def parse_game_file(text: str) -> GameFile:
    """Parse and check a game file. Raises GameSyntaxError or GameSemanticError."""
    stmts = _Parser(text).statements()
    data: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for key, value in stmts:
        if key.text not in _KEYS:
            raise GameSemanticError(f"unknown key {key.text!r}", key.line)
        if key.text in data:
            raise GameSemanticError(f"duplicate key {key.text!r}", key.line)
        data[key.text] = value
        lines[key.text] = key.line

    def need(k):
        if k not in data:
            raise GameSemanticError(f"missing required key {k!r}")
        return data[k]

    fmt = data.get("format", FORMAT)
    if fmt != FORMAT:
        raise GameSemanticError(f"unsupported format {fmt!r}", lines.get("format"))

    sig_raw = need("signature")
    if not isinstance(sig_raw, list) or not sig_raw or not all(
            isinstance(v, Fraction) and v.denominator == 1 and v >= 1 for v in sig_raw):
        raise GameSemanticError("signature must be a list of positive integers", lines["signature"])
    sig = Signature(tuple(int(v) for v in sig_raw))
    n, p = sig.n, sig.p

    def matrix(k, shape):
        v = data.get(k)
        if v is None:
            return None
        if not isinstance(v, list) or not all(isinstance(r, list) for r in v):
            raise GameSemanticError(f"{k} must be a list of rows", lines[k])
        if len(v) != shape[0]:
            raise GameSemanticError(f"{k} has {len(v)} rows, expected {shape[0]}", lines[k])
        for r, row in enumerate(v, start=1):
            if len(row) != shape[1]:
                raise GameSemanticError(
                    f"{k} row {r} has {len(row)} entries, expected {shape[1]}", lines[k])
            if not all(isinstance(x, Fraction) for x in row):
                raise GameSemanticError(f"{k} row {r} has a non-numeric entry", lines[k])
        return [list(row) for row in v]

    def vector(k, length):
        v = data.get(k)
        if v is None:
            return None
        if not isinstance(v, list) or not all(isinstance(x, Fraction) for x in v):
            raise GameSemanticError(f"{k} must be a list of numbers", lines[k])
        if length is not None and len(v) != length:
            raise GameSemanticError(f"{k} has {len(v)} entries, expected {length}", lines[k])
        return list(v)

    def scalar(k):
        v = data.get(k)
        if v is None:
            return None
        if not isinstance(v, Fraction) or v <= 0:
            raise GameSemanticError(f"{k} must be a positive number", lines[k])
        return v

    def word(k, allowed=None):
        v = data.get(k)
        if v is None:
            return None
        if not isinstance(v, str) or (allowed and v not in allowed):
            raise GameSemanticError(f"{k} must be one of {allowed}" if allowed else f"{k} must be a word",
                                    lines[k])
        return v

    gf = GameFile(
        signature=sig.parts,
        payoff=matrix("payoff", (n, n)) if "payoff" in data else need("payoff"),
        name=word("name"),
        skew_model=matrix("skew_model", (n, n)),
        model_point=vector("model_point", n),
        scaling=vector("scaling", p),
        equilibrium=vector("equilibrium", n),
        incidence=matrix("incidence", (n - p, n)),
        x0=vector("x0", n),
        t_span=vector("t_span", 2),
        rtol=scalar("rtol"),
        atol=scalar("atol"),
        max_step=scalar("max_step"),
        method=word("method", ("dopri5", "rk4")),
        mode=word("mode", ("auto", "chart", "prism")),
        lines=lines,
    )
    if gf.scaling is not None and any(v == 0 for v in gf.scaling):
        raise GameSemanticError("scaling entries must be nonzero", lines["scaling"])
    if gf.skew_model is not None:
        A0 = gf.skew_model
        if any(A0[i][j] != -A0[j][i] for i in range(n) for j in range(n)):
            raise GameSemanticError("skew_model is not skew-symmetric", lines["skew_model"])
    if gf.t_span is not None and not gf.t_span[1] > gf.t_span[0]:
        raise GameSemanticError("t_span must be increasing", lines["t_span"])
    if gf.incidence is not None:
        from .poisson import validate_incidence
        try:
            validate_incidence(sig, gf.incidence)
        except ValueError as exc:
            raise GameSemanticError(str(exc), lines["incidence"]) from None
    return gf


def format_number(v) -> str:
    """Exact literal: integers plain, other rationals as ``p/q``."""
    v = to_fraction(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _fmt_vector(v) -> str:
    return "[" + ", ".join(format_number(x) for x in v) + "]"


def _fmt_matrix(M, indent: int = 1) -> str:
    rows = [_fmt_vector(r) for r in M]
    return "[" + (",\n" + " " * indent).join(rows) + "]"


def _fmt_scalar(v) -> str:
    v = to_fraction(v)
    k = len(str(v.denominator)) - 1
    if v.numerator > 0 and v.denominator == 10 ** k and k > 3:
        return f"{v.numerator}e-{k}"
    return format_number(v)


def serialize_game_file(gf: GameFile) -> str:
    """Canonical text; ``parse_game_file(serialize_game_file(gf)) == gf``."""
    out = [f"format = {gf.format}"]
    if gf.name is not None:
        out.append(f'name = "{gf.name}"')
    out.append("signature = [" + ", ".join(map(str, gf.signature)) + "]")
    for f in fields(gf):
        k = f.name
        v = getattr(gf, k)
        if v is None or k in ("signature", "name", "format", "lines"):
            continue
        if k in _MATRIX_KEYS:
            out.append(f"{k} = {_fmt_matrix(v, len(k) + 4)}")
        elif k in _VECTOR_KEYS:
            out.append(f"{k} = {_fmt_vector(v)}")
        elif k in _SCALAR_KEYS:
            out.append(f"{k} = {_fmt_scalar(v)}")
        else:
            out.append(f"{k} = {v}")
    return "\n".join(out) + "\n"


def game_file_from_game(G: PolymatrixGame, **extra) -> GameFile:
    return GameFile(signature=G.signature.parts,
                    payoff=[[to_fraction(v) for v in row] for row in G.payoff], **extra)


# -- reports ----------------------------------------------------------------


def to_jsonable(obj):
    """Fractions become exact strings, numpy values plain Python values."""
    if isinstance(obj, Fraction):
        return format_number(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else repr(f)
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()] if obj.dtype != object \
            else [to_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


def _dumps(obj, level: int = 0) -> str:
    # lists of scalars stay on one line so matrices read row by row
    pad, inner = "  " * level, "  " * (level + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {_dumps(v, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list) and any(isinstance(v, (list, dict)) for v in obj):
        items = [inner + _dumps(v, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return json.dumps(obj)


def dump_report(report: dict) -> str:
    """Deterministic JSON text with a ``format`` header."""
    body = {"format": FORMAT}
    body.update(report)
    return _dumps(to_jsonable(body)) + "\n"
