"""Restricted indentation-based document format used by .component, .pipeline
and .workflow files.

The grammar is a small, fully specified subset of the familiar key/value +
list style (see docs/file-formats.md). Documents are mappings at the top
level; values are mappings, lists, or scalars (string, number, bool, null).
Two-space indentation, full-line comments with '#'. No anchors, no tags, no
multi-line strings, no flow mappings. This keeps files human-authored and
diff-friendly without pulling in ambient YAML semantics.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

__all__ = ["DocSyntaxError", "parse_document", "serialize_document", "canonical_json"]


class DocSyntaxError(ValueError):
    """Syntax error with 1-based line and column."""

    def __init__(self, message: str, line: int, col: int = 1):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


_NUM_RE = re.compile(r"-?\d+(\.\d+)?([eE][+-]?\d+)?$")
_BARE_RE = re.compile(r"[^\s#\"\[\]{},:][^#]*$")


@dataclass
class _Line:
    num: int
    indent: int
    text: str  # content after indentation


def _split_lines(text: str) -> list[_Line]:
    out = []
    for i, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.rstrip()
        body = stripped.lstrip(" ")
        if not body or body.startswith("#"):
            continue
        indent = len(stripped) - len(body)
        if "\t" in raw[: indent + 1]:
            raise DocSyntaxError("tab characters are not allowed in indentation", i)
        if indent % 2 != 0:
            raise DocSyntaxError("indentation must be a multiple of 2 spaces", i, indent + 1)
        out.append(_Line(i, indent, body))
    return out


def _parse_scalar(tok: str, line: int, col: int):
    tok = tok.strip()
    if tok.startswith('"'):
        return _parse_quoted(tok, line, col)
    if tok == "[]":
        return []
    if tok == "{}":
        return {}
    if tok.startswith("["):
        return _parse_flow_list(tok, line, col)
    if tok == "true":
        return True
    if tok == "false":
        return False
    if tok == "null":
        return None
    if _NUM_RE.match(tok):
        return float(tok) if any(c in tok for c in ".eE") else int(tok)
    if not tok:
        raise DocSyntaxError("expected a value", line, col)
    if tok[0] in "{}]":
        raise DocSyntaxError(f"unexpected character {tok[0]!r}", line, col)
    return tok


def _parse_quoted(tok: str, line: int, col: int) -> str:
    out = []
    i = 1
    while i < len(tok):
        c = tok[i]
        if c == '"':
            rest = tok[i + 1 :].strip()
            if rest:
                raise DocSyntaxError("trailing characters after closing quote", line, col + i + 1)
            return "".join(out)
        if c == "\\":
            if i + 1 >= len(tok):
                raise DocSyntaxError("unterminated escape", line, col + i)
            esc = tok[i + 1]
            mapped = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc)
            if mapped is None:
                raise DocSyntaxError(f"unknown escape \\{esc}", line, col + i)
            out.append(mapped)
            i += 2
        else:
            out.append(c)
            i += 1
    raise DocSyntaxError("unterminated string", line, col)


def _parse_flow_list(tok: str, line: int, col: int) -> list:
    if not tok.endswith("]"):
        raise DocSyntaxError("unterminated inline list", line, col)
    inner = tok[1:-1].strip()
    if not inner:
        return []
    items = []
    # split on commas outside quotes
    depth_q = False
    cur = []
    i = 0
    while i < len(inner):
        c = inner[i]
        if c == '"' and (i == 0 or inner[i - 1] != "\\"):
            depth_q = not depth_q
            cur.append(c)
        elif c == "," and not depth_q:
            items.append("".join(cur))
            cur = []
        else:
            cur.append(c)
        i += 1
    items.append("".join(cur))
    return [_parse_scalar(s.strip(), line, col) for s in items]


_KEY_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*")


def _split_key(body: str, line: int, indent: int):
    m = _KEY_RE.match(body)
    if not m or len(body) == len(m.group(0)) or body[len(m.group(0))] != ":":
        raise DocSyntaxError("expected 'key: value' or 'key:'", line, indent + 1)
    key = m.group(0)
    rest = body[len(key) + 1 :]
    if rest and not rest.startswith(" "):
        raise DocSyntaxError("expected space after ':'", line, indent + len(key) + 2)
    return key, rest.strip()


class _Parser:
    def __init__(self, lines: list[_Line]):
        self.lines = lines
        self.pos = 0

    def peek(self):
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def parse_block(self, indent: int):
        ln = self.peek()
        if ln is None or ln.indent < indent:
            raise DocSyntaxError("expected an indented block", self.lines[self.pos - 1].num)
        if ln.indent > indent:
            raise DocSyntaxError("unexpected indentation", ln.num, ln.indent + 1)
        if ln.text.startswith("- ") or ln.text == "-":
            return self.parse_list(indent)
        return self.parse_mapping(indent)

    def parse_mapping(self, indent: int) -> dict:
        out: dict = {}
        while True:
            ln = self.peek()
            if ln is None or ln.indent < indent:
                return out
            if ln.indent > indent:
                raise DocSyntaxError("unexpected indentation", ln.num, ln.indent + 1)
            if ln.text.startswith("- "):
                raise DocSyntaxError("list item not allowed here", ln.num, ln.indent + 1)
            key, rest = _split_key(ln.text, ln.num, ln.indent)
            if key in out:
                raise DocSyntaxError(f"duplicate key {key!r}", ln.num, ln.indent + 1)
            self.pos += 1
            if rest:
                out[key] = _parse_scalar(rest, ln.num, ln.indent + len(key) + 3)
            else:
                nxt = self.peek()
                if nxt is None or nxt.indent <= indent:
                    raise DocSyntaxError(f"key {key!r} has no value", ln.num, ln.indent + 1)
                out[key] = self.parse_block(indent + 2)

    def parse_list(self, indent: int) -> list:
        out: list = []
        while True:
            ln = self.peek()
            if ln is None or ln.indent < indent:
                return out
            if ln.indent > indent:
                raise DocSyntaxError("unexpected indentation", ln.num, ln.indent + 1)
            if not (ln.text.startswith("- ") or ln.text == "-"):
                raise DocSyntaxError("expected list item '- ...'", ln.num, ln.indent + 1)
            body = ln.text[2:].strip() if ln.text != "-" else ""
            if not body:
                self.pos += 1
                out.append(self.parse_block(indent + 2))
                continue
            # '- key: value' starts an inline mapping whose remaining keys sit
            # at indent + 2
            if _KEY_RE.match(body) and ":" in body and _looks_like_pair(body):
                key, rest = _split_key(body, ln.num, ln.indent + 2)
                self.pos += 1
                item: dict = {}
                if rest:
                    item[key] = _parse_scalar(rest, ln.num, ln.indent + len(key) + 5)
                else:
                    item[key] = self.parse_block(indent + 4)
                nxt = self.peek()
                if nxt is not None and nxt.indent == indent + 2 and not nxt.text.startswith("- "):
                    more = self.parse_mapping(indent + 2)
                    for k, v in more.items():
                        if k in item:
                            raise DocSyntaxError(f"duplicate key {k!r}", ln.num)
                        item[k] = v
                out.append(item)
            else:
                self.pos += 1
                out.append(_parse_scalar(body, ln.num, ln.indent + 3))


def _looks_like_pair(body: str) -> bool:
    m = _KEY_RE.match(body)
    if not m:
        return False
    rest = body[len(m.group(0)) :]
    return rest.startswith(":") and (len(rest) == 1 or rest[1] == " ")


def parse_document(text: str) -> dict:
    """Parse a document; the top level must be a mapping."""
    lines = _split_lines(text)
    if not lines:
        return {}
    p = _Parser(lines)
    val = p.parse_block(0)
    if p.pos < len(p.lines):
        ln = p.lines[p.pos]
        raise DocSyntaxError("unexpected content", ln.num, ln.indent + 1)
    if not isinstance(val, dict):
        raise DocSyntaxError("top level must be a mapping", lines[0].num)
    return val


def _needs_quotes(s: str) -> bool:
    if s == "" or s in ("true", "false", "null", "[]", "{}"):
        return True
    if _NUM_RE.match(s):
        return True
    if s != s.strip():
        return True
    return any(c in s for c in "#:\"[]{},\n\t") or s.startswith("- ") or s == "-"


def _fmt_scalar(v) -> str:
    if v is None:
        return "null"
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format_float(v)
    s = str(v)
    if _needs_quotes(s):
        return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'
    return s


def serialize_document(value: dict) -> str:
    """Serialize to canonical text: insertion-ordered keys, 2-space indent."""
    out: list[str] = []
    _emit_mapping(value, 0, out)
    return "\n".join(out) + "\n" if out else ""


def _emit_mapping(m: dict, indent: int, out: list[str]):
    pad = " " * indent
    for k, v in m.items():
        if isinstance(v, dict):
            if not v:
                out.append(f"{pad}{k}: {{}}")
            else:
                out.append(f"{pad}{k}:")
                _emit_mapping(v, indent + 2, out)
        elif isinstance(v, list):
            if not v:
                out.append(f"{pad}{k}: []")
            else:
                out.append(f"{pad}{k}:")
                _emit_list(v, indent + 2, out)
        else:
            out.append(f"{pad}{k}: {_fmt_scalar(v)}")


def _emit_list(items: list, indent: int, out: list[str]):
    pad = " " * indent
    for it in items:
        if isinstance(it, dict):
            if not it:
                out.append(f"{pad}- {{}}")
                continue
            first = True
            for k, v in it.items():
                lead = f"{pad}- " if first else f"{pad}  "
                first = False
                if isinstance(v, dict) and v:
                    out.append(f"{lead}{k}:")
                    _emit_mapping(v, indent + 4, out)
                elif isinstance(v, list) and v:
                    out.append(f"{lead}{k}:")
                    _emit_list(v, indent + 4, out)
                elif isinstance(v, dict):
                    out.append(f"{lead}{k}: {{}}")
                elif isinstance(v, list):
                    out.append(f"{lead}{k}: []")
                else:
                    out.append(f"{lead}{k}: {_fmt_scalar(v)}")
        elif isinstance(it, list):
            raise ValueError("nested bare lists are not representable")
        else:
            out.append(f"{pad}- {_fmt_scalar(it)}")


def format_float(x: float) -> str:
    """Fixed float rendering (%.12g) used everywhere content is digested."""
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError("non-finite float not serializable")
    s = "%.12g" % x
    return s


def canonical_json(value) -> str:
    """Canonical JSON: sorted keys, %.12g floats, no whitespace padding."""
    return _cjson(value)


def _cjson(v) -> str:
    if v is None:
        return "null"
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, str):
        import json

        return json.dumps(v, ensure_ascii=False)
    if isinstance(v, dict):
        keys = sorted(v)
        return "{" + ",".join(_cjson(str(k)) + ":" + _cjson(v[k]) for k in keys) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_cjson(x) for x in v) + "]"
    raise TypeError(f"not canonical-JSON serializable: {type(v).__name__}")
