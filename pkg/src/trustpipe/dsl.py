"""Expression language used by the transform and filter components.

Precedence, loosest to tightest: or, and, comparison, additive, multiplicative,
unary not, call/atom. Null follows SQL semantics: missing columns evaluate to
null, null propagates through functions, arithmetic and comparisons, and
and/or use three-valued logic. Grammar in docs/expr-grammar.md.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass

from .errors import TrustPipeError

# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Lit:
    value: object  # str | float | bool | None


@dataclass(frozen=True)
class Col:
    name: str


@dataclass(frozen=True)
class Not:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str  # and or == != < <= > >= + - * /
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


BUILTINS = {
    "contains": 2,
    "startswith": 2,
    "endswith": 2,
    "lower": 1,
    "upper": 1,
    "replace": 3,
    "concat": 2,
    "len": 1,
    "trim": 1,
}


class LexError(TrustPipeError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset


class ParseError(TrustPipeError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset


class EvalError(TrustPipeError):
    pass


# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(\.\d+)?([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|!=|<|>|\+|-|\*|/|\(|\)|,)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"and", "or", "not", "true", "false", "null"}


@dataclass(frozen=True)
class Token:
    kind: str  # num str ident op kw eof
    text: str
    offset: int
    value: object = None


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == '"' or c == "'":
            quote = c
            j = i + 1
            buf = []
            while j < n:
                d = text[j]
                if d == "\\":
                    if j + 1 >= n:
                        raise LexError("unterminated escape", j)
                    esc = text[j + 1]
                    mapped = {"n": "\n", "t": "\t", "\\": "\\", '"': '"', "'": "'"}.get(esc)
                    if mapped is None:
                        raise LexError(f"unknown escape \\{esc}", j)
                    buf.append(mapped)
                    j += 2
                elif d == quote:
                    break
                else:
                    buf.append(d)
                    j += 1
            else:
                raise LexError("unterminated string", i)
            toks.append(Token("str", text[i : j + 1], i, "".join(buf)))
            i = j + 1
            continue
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise LexError(f"unexpected character {c!r}", i)
        if m.lastgroup == "ws":
            i = m.end()
            continue
        tok = m.group(0)
        if m.lastgroup == "num":
            toks.append(Token("num", tok, i, float(tok)))
        elif m.lastgroup == "ident":
            kind = "kw" if tok in _KEYWORDS else "ident"
            toks.append(Token(kind, tok, i))
        else:
            toks.append(Token("op", tok, i))
        i = m.end()
    toks.append(Token("eof", "", n))
    return toks


# ---------------------------------------------------------------------------
# Parser


class _P:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op: str):
        t = self.next()
        if t.kind != "op" or t.text != op:
            raise ParseError(f"expected {op!r}, got {t.text or 'end of input'!r}", t.offset)

    def parse_or(self):
        left = self.parse_and()
        while self.peek().kind == "kw" and self.peek().text == "or":
            self.next()
            left = BinOp("or", left, self.parse_and())
        return left

    def parse_and(self):
        left = self.parse_cmp()
        while self.peek().kind == "kw" and self.peek().text == "and":
            self.next()
            left = BinOp("and", left, self.parse_cmp())
        return left

    def parse_cmp(self):
        left = self.parse_add()
        t = self.peek()
        if t.kind == "op" and t.text in ("==", "!=", "<", "<=", ">", ">="):
            self.next()
            return BinOp(t.text, left, self.parse_add())
        return left

    def parse_add(self):
        left = self.parse_mul()
        while True:
            t = self.peek()
            if t.kind == "op" and t.text in ("+", "-"):
                self.next()
                left = BinOp(t.text, left, self.parse_mul())
            else:
                return left

    def parse_mul(self):
        left = self.parse_unary()
        while True:
            t = self.peek()
            if t.kind == "op" and t.text in ("*", "/"):
                self.next()
                left = BinOp(t.text, left, self.parse_unary())
            else:
                return left

    def parse_unary(self):
        t = self.peek()
        if t.kind == "kw" and t.text == "not":
            self.next()
            return Not(self.parse_unary())
        return self.parse_atom()

    def parse_atom(self):
        t = self.next()
        if t.kind == "num":
            return Lit(t.value)
        if t.kind == "str":
            return Lit(t.value)
        if t.kind == "kw":
            if t.text == "true":
                return Lit(True)
            if t.text == "false":
                return Lit(False)
            if t.text == "null":
                return Lit(None)
            raise ParseError(f"unexpected keyword {t.text!r}", t.offset)
        if t.kind == "ident":
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "(":
                if t.text not in BUILTINS:
                    raise ParseError(f"unknown function {t.text!r}", t.offset)
                self.next()
                args = []
                if not (self.peek().kind == "op" and self.peek().text == ")"):
                    args.append(self.parse_or())
                    while self.peek().kind == "op" and self.peek().text == ",":
                        self.next()
                        args.append(self.parse_or())
                self.expect_op(")")
                want = BUILTINS[t.text]
                if len(args) != want:
                    raise ParseError(
                        f"{t.text} expects {want} arg{'s' if want != 1 else ''}", t.offset
                    )
                return Call(t.text, tuple(args))
            return Col(t.text)
        if t.kind == "op" and t.text == "(":
            inner = self.parse_or()
            self.expect_op(")")
            return inner
        if t.kind == "op" and t.text == "-":
            # negative literal
            nxt = self.next()
            if nxt.kind != "num":
                raise ParseError("expected number after unary '-'", nxt.offset)
            return Lit(-nxt.value)
        raise ParseError(f"unexpected token {t.text or 'end of input'!r}", t.offset)


def parse(text: str):
    """Parse an expression; raises LexError/ParseError with byte offset."""
    p = _P(tokenize(text))
    e = p.parse_or()
    t = p.peek()
    if t.kind != "eof":
        raise ParseError(f"unexpected trailing token {t.text!r}", t.offset)
    return e


def pretty_print(e) -> str:
    """Fully parenthesized rendering; parse(pretty_print(e)) == e."""
    if isinstance(e, Lit):
        v = e.value
        if v is None:
            return "null"
        if v is True:
            return "true"
        if v is False:
            return "false"
        if isinstance(v, float):
            return repr(v)
        return '"' + str(v).replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'
    if isinstance(e, Col):
        return e.name
    if isinstance(e, Not):
        return f"not ({pretty_print(e.operand)})"
    if isinstance(e, BinOp):
        return f"({pretty_print(e.left)} {e.op} ({pretty_print(e.right)}))"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(pretty_print(a) for a in e.args)})"
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Evaluator


def _type_name(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, float):
        return "number"
    return "string"


def _want(v, ty: str, func: str):
    if ty == "string" and not isinstance(v, str):
        raise EvalError(f"{func} expects a string, got {_type_name(v)}")
    if ty == "number" and (isinstance(v, bool) or not isinstance(v, float)):
        raise EvalError(f"{func} expects a number, got {_type_name(v)}")
    return v


def _call(func: str, args: list):
    if any(a is None for a in args):
        return None
    if func == "contains":
        return _want(args[1], "string", func) in _want(args[0], "string", func)
    if func == "startswith":
        return _want(args[0], "string", func).startswith(_want(args[1], "string", func))
    if func == "endswith":
        return _want(args[0], "string", func).endswith(_want(args[1], "string", func))
    if func == "lower":
        return _want(args[0], "string", func).lower()
    if func == "upper":
        return _want(args[0], "string", func).upper()
    if func == "replace":
        return _want(args[0], "string", func).replace(
            _want(args[1], "string", func), _want(args[2], "string", func)
        )
    if func == "concat":
        return _want(args[0], "string", func) + _want(args[1], "string", func)
    if func == "len":
        return float(len(_want(args[0], "string", func)))
    if func == "trim":
        return _want(args[0], "string", func).strip()
    raise EvalError(f"unknown function {func!r}")


def evaluate(e, row: dict):
    """Evaluate against a row mapping column -> Value."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Col):
        return row.get(e.name)
    if isinstance(e, Not):
        v = evaluate(e.operand, row)
        if v is None:
            return None
        if not isinstance(v, bool):
            raise EvalError(f"not expects a bool, got {_type_name(v)}")
        return not v
    if isinstance(e, Call):
        return _call(e.func, [evaluate(a, row) for a in e.args])
    if isinstance(e, BinOp):
        return _binop(e, row)
    raise TypeError(f"not an Expr: {e!r}")


def _as_bool(v, op: str):
    if v is None or isinstance(v, bool):
        return v
    raise EvalError(f"{op} expects bool operands, got {_type_name(v)}")


def _binop(e: BinOp, row: dict):
    if e.op == "and":
        l = _as_bool(evaluate(e.left, row), "and")
        if l is False:
            return False
        r = _as_bool(evaluate(e.right, row), "and")
        if r is False:
            return False
        if l is None or r is None:
            return None
        return True
    if e.op == "or":
        l = _as_bool(evaluate(e.left, row), "or")
        if l is True:
            return True
        r = _as_bool(evaluate(e.right, row), "or")
        if r is True:
            return True
        if l is None or r is None:
            return None
        return False

    l = evaluate(e.left, row)
    r = evaluate(e.right, row)
    if l is None or r is None:
        return None
    if e.op in ("+", "-", "*", "/"):
        if isinstance(l, bool) or isinstance(r, bool) or not isinstance(l, float) or not isinstance(r, float):
            raise EvalError(f"{e.op} expects numbers, got {_type_name(l)} and {_type_name(r)}")
        if e.op == "+":
            return l + r
        if e.op == "-":
            return l - r
        if e.op == "*":
            return l * r
        if r == 0.0:
            raise EvalError("division by zero")
        return l / r
    # comparisons: mismatched non-null types are errors, not coercions
    if _type_name(l) != _type_name(r):
        raise EvalError(f"cannot compare {_type_name(l)} with {_type_name(r)}")
    if e.op == "==":
        return l == r
    if e.op == "!=":
        return l != r
    if isinstance(l, bool):
        raise EvalError(f"{e.op} not defined for bool")
    if e.op == "<":
        return l < r
    if e.op == "<=":
        return l <= r
    if e.op == ">":
        return l > r
    if e.op == ">=":
        return l >= r
    raise EvalError(f"unknown operator {e.op!r}")


# ---------------------------------------------------------------------------
# CSV tables

_NUM_CELL_RE = re.compile(r"^-?\d+(\.\d+)?([eE][+-]?\d+)?$")


@dataclass(frozen=True)
class Table:
    header: tuple
    rows: tuple  # tuple of tuples of str


def cell_value(cell: str):
    """CSV cells are typed by shape: empty -> null, numeric -> number,
    anything else -> string."""
    if cell == "":
        return None
    if _NUM_CELL_RE.match(cell):
        return float(cell)
    return cell


def value_to_cell(v) -> str:
    if v is None:
        return ""
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, float):
        if v == int(v) and abs(v) < 1e15:
            return str(int(v))
        return repr(v)
    return str(v)


def read_table(text: str) -> Table:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise EvalError("table has no header row")
    header = tuple(rows[0])
    body = []
    for r in rows[1:]:
        if len(r) != len(header):
            r = list(r[: len(header)]) + [""] * (len(header) - len(r))
        body.append(tuple(r))
    return Table(header, tuple(body))


def write_table(t: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(t.header)
    for r in t.rows:
        w.writerow(r)
    return buf.getvalue()


def row_mapping(t: Table, row: tuple) -> dict:
    return {col: cell_value(cell) for col, cell in zip(t.header, row)}


def filter_rows(t: Table, predicate) -> Table:
    """Keep rows where the predicate is true; null and false both drop."""
    kept = []
    for idx, row in enumerate(t.rows):
        try:
            v = evaluate(predicate, row_mapping(t, row))
        except EvalError as e:
            raise EvalError(f"row {idx}: {e}") from None
        if v is True:
            kept.append(row)
        elif not (v is False or v is None):
            raise EvalError(f"row {idx}: predicate returned {_type_name(v)}, expected bool")
    return Table(t.header, tuple(kept))


def transform_column(t: Table, column: str, expr) -> Table:
    """Replace (or create) one column with the expression's rendered result."""
    if column in t.header:
        col_idx = t.header.index(column)
        header = t.header
    else:
        col_idx = len(t.header)
        header = t.header + (column,)
    out = []
    for idx, row in enumerate(t.rows):
        try:
            v = evaluate(expr, row_mapping(t, row))
        except EvalError as e:
            raise EvalError(f"row {idx}: {e}") from None
        cell = value_to_cell(v)
        if col_idx < len(row):
            out.append(row[:col_idx] + (cell,) + row[col_idx + 1 :])
        else:
            out.append(row + (cell,))
    return Table(header, tuple(out))
