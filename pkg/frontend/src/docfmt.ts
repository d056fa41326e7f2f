/**
 * The restricted indentation-based document format used by .component and
 * .pipeline files: top-level mapping, `key: value` pairs, `- item` lists,
 * double-quoted strings, inline `[a, b]` lists, 2-space indentation,
 * full-line `#` comments. Serialization is canonical (insertion-ordered
 * keys, `%.12g` floats), so `serialize(parse(text)) === text` for any
 * canonically formatted document — the backend relies on that for content
 * addressing, and the editor must not introduce spurious diffs.
 */

export type DocValue =
  | string
  | number
  | boolean
  | null
  | DocValue[]
  | { [key: string]: DocValue };

export type DocMapping = { [key: string]: DocValue };

export class DocSyntaxError extends Error {
  constructor(message: string, readonly line: number, readonly col: number = 1) {
    super(`line ${line}, col ${col}: ${message}`);
    this.name = "DocSyntaxError";
  }
}

const NUM_RE = /^-?\d+(\.\d+)?([eE][+-]?\d+)?$/;
const KEY_RE = /^[A-Za-z_][A-Za-z0-9_-]*/;

interface Line {
  num: number;
  indent: number;
  text: string;
}

function splitLines(text: string): Line[] {
  const out: Line[] = [];
  const raw = text.split(/\r?\n/);
  for (let i = 0; i < raw.length; i++) {
    const stripped = (raw[i] ?? "").replace(/\s+$/, "");
    const body = stripped.replace(/^ +/, "");
    if (!body || body.startsWith("#")) continue;
    const indent = stripped.length - body.length;
    if ((raw[i] ?? "").slice(0, indent + 1).includes("\t")) {
      throw new DocSyntaxError("tab characters are not allowed in indentation", i + 1);
    }
    if (indent % 2 !== 0) {
      throw new DocSyntaxError("indentation must be a multiple of 2 spaces", i + 1, indent + 1);
    }
    out.push({ num: i + 1, indent, text: body });
  }
  return out;
}

function parseScalar(tok: string, line: number, col: number): DocValue {
  tok = tok.trim();
  if (tok.startsWith('"')) return parseQuoted(tok, line, col);
  if (tok === "[]") return [];
  if (tok === "{}") return {};
  if (tok.startsWith("[")) return parseFlowList(tok, line, col);
  if (tok === "true") return true;
  if (tok === "false") return false;
  if (tok === "null") return null;
  if (NUM_RE.test(tok)) return Number(tok);
  if (!tok) throw new DocSyntaxError("expected a value", line, col);
  if ("{}]".includes(tok[0]!)) {
    throw new DocSyntaxError(`unexpected character '${tok[0]}'`, line, col);
  }
  return tok;
}

function parseQuoted(tok: string, line: number, col: number): string {
  const out: string[] = [];
  let i = 1;
  while (i < tok.length) {
    const c = tok[i]!;
    if (c === '"') {
      if (tok.slice(i + 1).trim()) {
        throw new DocSyntaxError("trailing characters after closing quote", line, col + i + 1);
      }
      return out.join("");
    }
    if (c === "\\") {
      if (i + 1 >= tok.length) throw new DocSyntaxError("unterminated escape", line, col + i);
      const esc = tok[i + 1]!;
      const mapped = { n: "\n", t: "\t", '"': '"', "\\": "\\" }[esc];
      if (mapped === undefined) {
        throw new DocSyntaxError(`unknown escape \\${esc}`, line, col + i);
      }
      out.push(mapped);
      i += 2;
    } else {
      out.push(c);
      i += 1;
    }
  }
  throw new DocSyntaxError("unterminated string", line, col);
}

function parseFlowList(tok: string, line: number, col: number): DocValue[] {
  if (!tok.endsWith("]")) throw new DocSyntaxError("unterminated inline list", line, col);
  const inner = tok.slice(1, -1).trim();
  if (!inner) return [];
  const items: string[] = [];
  let inQuote = false;
  let cur = "";
  for (let i = 0; i < inner.length; i++) {
    const c = inner[i]!;
    if (c === '"' && (i === 0 || inner[i - 1] !== "\\")) {
      inQuote = !inQuote;
      cur += c;
    } else if (c === "," && !inQuote) {
      items.push(cur);
      cur = "";
    } else {
      cur += c;
    }
  }
  items.push(cur);
  return items.map((s) => parseScalar(s.trim(), line, col));
}

function splitKey(body: string, line: number, indent: number): [string, string] {
  const m = KEY_RE.exec(body);
  if (!m || body.length === m[0].length || body[m[0].length] !== ":") {
    throw new DocSyntaxError("expected 'key: value' or 'key:'", line, indent + 1);
  }
  const key = m[0];
  const rest = body.slice(key.length + 1);
  if (rest && !rest.startsWith(" ")) {
    throw new DocSyntaxError("expected space after ':'", line, indent + key.length + 2);
  }
  return [key, rest.trim()];
}

function looksLikePair(body: string): boolean {
  const m = KEY_RE.exec(body);
  if (!m) return false;
  const rest = body.slice(m[0].length);
  return rest.startsWith(":") && (rest.length === 1 || rest[1] === " ");
}

class Parser {
  pos = 0;
  constructor(readonly lines: Line[]) {}

  peek(): Line | null {
    return this.pos < this.lines.length ? this.lines[this.pos]! : null;
  }

  parseBlock(indent: number): DocValue {
    const ln = this.peek();
    if (ln === null || ln.indent < indent) {
      throw new DocSyntaxError("expected an indented block", this.lines[this.pos - 1]!.num);
    }
    if (ln.indent > indent) {
      throw new DocSyntaxError("unexpected indentation", ln.num, ln.indent + 1);
    }
    if (ln.text.startsWith("- ") || ln.text === "-") return this.parseList(indent);
    return this.parseMapping(indent);
  }

  parseMapping(indent: number): DocMapping {
    const out: DocMapping = {};
    for (;;) {
      const ln = this.peek();
      if (ln === null || ln.indent < indent) return out;
      if (ln.indent > indent) {
        throw new DocSyntaxError("unexpected indentation", ln.num, ln.indent + 1);
      }
      if (ln.text.startsWith("- ")) {
        throw new DocSyntaxError("list item not allowed here", ln.num, ln.indent + 1);
      }
      const [key, rest] = splitKey(ln.text, ln.num, ln.indent);
      if (key in out) {
        throw new DocSyntaxError(`duplicate key '${key}'`, ln.num, ln.indent + 1);
      }
      this.pos += 1;
      if (rest) {
        out[key] = parseScalar(rest, ln.num, ln.indent + key.length + 3);
      } else {
        const nxt = this.peek();
        if (nxt === null || nxt.indent <= indent) {
          throw new DocSyntaxError(`key '${key}' has no value`, ln.num, ln.indent + 1);
        }
        out[key] = this.parseBlock(indent + 2);
      }
    }
  }

  parseList(indent: number): DocValue[] {
    const out: DocValue[] = [];
    for (;;) {
      const ln = this.peek();
      if (ln === null || ln.indent < indent) return out;
      if (ln.indent > indent) {
        throw new DocSyntaxError("unexpected indentation", ln.num, ln.indent + 1);
      }
      if (!(ln.text.startsWith("- ") || ln.text === "-")) {
        throw new DocSyntaxError("expected list item '- ...'", ln.num, ln.indent + 1);
      }
      const body = ln.text === "-" ? "" : ln.text.slice(2).trim();
      if (!body) {
        this.pos += 1;
        out.push(this.parseBlock(indent + 2));
        continue;
      }
      if (KEY_RE.test(body) && body.includes(":") && looksLikePair(body)) {
        const [key, rest] = splitKey(body, ln.num, ln.indent + 2);
        this.pos += 1;
        const item: DocMapping = {};
        if (rest) {
          item[key] = parseScalar(rest, ln.num, ln.indent + key.length + 5);
        } else {
          item[key] = this.parseBlock(indent + 4);
        }
        const nxt = this.peek();
        if (nxt !== null && nxt.indent === indent + 2 && !nxt.text.startsWith("- ")) {
          const more = this.parseMapping(indent + 2);
          for (const [k, v] of Object.entries(more)) {
            if (k in item) throw new DocSyntaxError(`duplicate key '${k}'`, ln.num);
            item[k] = v;
          }
        }
        out.push(item);
      } else {
        this.pos += 1;
        out.push(parseScalar(body, ln.num, ln.indent + 3));
      }
    }
  }
}

/** Parse a document; the top level must be a mapping. */
export function parseDocument(text: string): DocMapping {
  const lines = splitLines(text);
  if (!lines.length) return {};
  const p = new Parser(lines);
  const val = p.parseBlock(0);
  if (p.pos < p.lines.length) {
    const ln = p.lines[p.pos]!;
    throw new DocSyntaxError("unexpected content", ln.num, ln.indent + 1);
  }
  if (val === null || typeof val !== "object" || Array.isArray(val)) {
    throw new DocSyntaxError("top level must be a mapping", lines[0]!.num);
  }
  return val;
}

// ---------------------------------------------------------------------------
// serialization

/**
 * `%.12g` float rendering matching the backend. Integer-valued numbers up to
 * 12 significant digits render as plain integers (the formats coincide).
 */
export function formatNumber(x: number): string {
  if (!Number.isFinite(x)) throw new Error("non-finite number not serializable");
  if (Object.is(x, -0)) x = 0;
  if (Number.isInteger(x) && Math.abs(x) < 1e12) return String(x);
  const [mantRaw, expRaw] = x.toExponential(11).split("e") as [string, string];
  const exp = parseInt(expRaw, 10);
  const neg = mantRaw.startsWith("-");
  const digits = mantRaw.replace("-", "").replace(".", ""); // 12 significant digits
  let body: string;
  if (exp < -4 || exp >= 12) {
    let mant = digits.replace(/0+$/, "");
    if (mant.length > 1) mant = `${mant[0]}.${mant.slice(1)}`;
    const esign = exp < 0 ? "-" : "+";
    const eabs = String(Math.abs(exp)).padStart(2, "0");
    body = `${mant}e${esign}${eabs}`;
  } else if (exp >= 0) {
    const int = digits.slice(0, exp + 1);
    const frac = digits.slice(exp + 1).replace(/0+$/, "");
    body = frac ? `${int}.${frac}` : int;
  } else {
    const frac = ("0".repeat(-exp - 1) + digits).replace(/0+$/, "");
    body = `0.${frac}`;
  }
  return neg ? `-${body}` : body;
}

function needsQuotes(s: string): boolean {
  if (s === "" || ["true", "false", "null", "[]", "{}"].includes(s)) return true;
  if (NUM_RE.test(s)) return true;
  if (s !== s.trim()) return true;
  return /[#:"\[\]{},\n\t]/.test(s) || s.startsWith("- ") || s === "-";
}

function fmtScalar(v: DocValue): string {
  if (v === null) return "null";
  if (v === true) return "true";
  if (v === false) return "false";
  if (typeof v === "number") return formatNumber(v);
  const s = String(v);
  if (needsQuotes(s)) {
    return `"${s
      .replace(/\\/g, "\\\\")
      .replace(/"/g, '\\"')
      .replace(/\n/g, "\\n")
      .replace(/\t/g, "\\t")}"`;
  }
  return s;
}

function isMapping(v: DocValue): v is DocMapping {
  return v !== null && typeof v === "object" && !Array.isArray(v);
}

/** Serialize to canonical text: insertion-ordered keys, 2-space indent. */
export function serializeDocument(value: DocMapping): string {
  const out: string[] = [];
  emitMapping(value, 0, out);
  return out.length ? out.join("\n") + "\n" : "";
}

function emitMapping(m: DocMapping, indent: number, out: string[]): void {
  const pad = " ".repeat(indent);
  for (const [k, v] of Object.entries(m)) {
    if (isMapping(v)) {
      if (!Object.keys(v).length) out.push(`${pad}${k}: {}`);
      else {
        out.push(`${pad}${k}:`);
        emitMapping(v, indent + 2, out);
      }
    } else if (Array.isArray(v)) {
      if (!v.length) out.push(`${pad}${k}: []`);
      else {
        out.push(`${pad}${k}:`);
        emitList(v, indent + 2, out);
      }
    } else {
      out.push(`${pad}${k}: ${fmtScalar(v)}`);
    }
  }
}

function emitList(items: DocValue[], indent: number, out: string[]): void {
  const pad = " ".repeat(indent);
  for (const it of items) {
    if (isMapping(it)) {
      if (!Object.keys(it).length) {
        out.push(`${pad}- {}`);
        continue;
      }
      let first = true;
      for (const [k, v] of Object.entries(it)) {
        const lead = first ? `${pad}- ` : `${pad}  `;
        first = false;
        if (isMapping(v) && Object.keys(v).length) {
          out.push(`${lead}${k}:`);
          emitMapping(v, indent + 4, out);
        } else if (Array.isArray(v) && v.length) {
          out.push(`${lead}${k}:`);
          emitList(v, indent + 4, out);
        } else if (isMapping(v)) {
          out.push(`${lead}${k}: {}`);
        } else if (Array.isArray(v)) {
          out.push(`${lead}${k}: []`);
        } else {
          out.push(`${lead}${k}: ${fmtScalar(v)}`);
        }
      }
    } else if (Array.isArray(it)) {
      throw new Error("nested bare lists are not representable");
    } else {
      out.push(`${pad}- ${fmtScalar(it)}`);
    }
  }
}
