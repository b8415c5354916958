"""Minimal strict TOML-subset reader.

Used as a fallback when the stdlib tomllib (Python 3.11+) is unavailable.
Covers what scene files need: table headers, bare keys, basic strings,
integers, floats, booleans, arrays (possibly spanning lines) and inline
tables.  Anything outside that subset is a parse error, which suits the
strict-parsing contract of scene ingestion.
"""

from __future__ import annotations

from .errors import SceneParseError


class _Cursor:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def advance(self) -> str:
        ch = self.text[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
        return ch

    def skip_ws(self, newlines: bool = False) -> None:
        while not self.eof():
            ch = self.peek()
            if ch in " \t" or (newlines and ch in "\r\n"):
                self.advance()
            elif ch == "#":
                while not self.eof() and self.peek() != "\n":
                    self.advance()
            else:
                return

    def error(self, msg: str) -> SceneParseError:
        return SceneParseError(f"line {self.line}: {msg}")


def _parse_string(cur: _Cursor) -> str:
    cur.advance()  # opening quote
    out = []
    while True:
        if cur.eof():
            raise cur.error("unterminated string")
        ch = cur.advance()
        if ch == '"':
            return "".join(out)
        if ch == "\n":
            raise cur.error("newline in string")
        if ch == "\\":
            esc = cur.advance()
            mapping = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}
            if esc in mapping:
                out.append(mapping[esc])
            elif esc == "u":
                code = "".join(cur.advance() for _ in range(4))
                out.append(chr(int(code, 16)))
            else:
                raise cur.error(f"unsupported escape \\{esc}")
        else:
            out.append(ch)


def _parse_number_or_bool(cur: _Cursor):
    start = cur.pos
    while not cur.eof() and cur.peek() not in " \t\r\n,]}#":
        cur.advance()
    token = cur.text[start : cur.pos]
    if token in ("true", "false"):
        return token == "true"
    if token in ("inf", "+inf", "-inf"):
        return float(token)
    try:
        if any(c in token for c in ".eE") and not token.startswith("0x"):
            return float(token)
        return int(token, 0)
    except ValueError:
        raise cur.error(f"cannot parse value {token!r}") from None


def _parse_value(cur: _Cursor):
    cur.skip_ws()
    ch = cur.peek()
    if ch == '"':
        return _parse_string(cur)
    if ch == "[":
        cur.advance()
        items = []
        while True:
            cur.skip_ws(newlines=True)
            if cur.peek() == "]":
                cur.advance()
                return items
            items.append(_parse_value(cur))
            cur.skip_ws(newlines=True)
            if cur.peek() == ",":
                cur.advance()
            elif cur.peek() == "]":
                cur.advance()
                return items
            else:
                raise cur.error("expected ',' or ']' in array")
    if ch == "{":
        cur.advance()
        table: dict = {}
        cur.skip_ws()
        if cur.peek() == "}":
            cur.advance()
            return table
        while True:
            cur.skip_ws()
            key = _parse_key(cur)
            cur.skip_ws()
            if cur.peek() != "=":
                raise cur.error("expected '=' in inline table")
            cur.advance()
            table[key] = _parse_value(cur)
            cur.skip_ws()
            if cur.peek() == ",":
                cur.advance()
            elif cur.peek() == "}":
                cur.advance()
                return table
            else:
                raise cur.error("expected ',' or '}' in inline table")
    return _parse_number_or_bool(cur)


def _parse_key(cur: _Cursor) -> str:
    if cur.peek() == '"':
        return _parse_string(cur)
    start = cur.pos
    while not cur.eof() and (cur.peek().isalnum() or cur.peek() in "_-"):
        cur.advance()
    if cur.pos == start:
        raise cur.error("expected a key")
    return cur.text[start : cur.pos]


def loads(text: str) -> dict:
    cur = _Cursor(text)
    root: dict = {}
    current = root
    while True:
        cur.skip_ws(newlines=True)
        if cur.eof():
            return root
        if cur.peek() == "[":
            cur.advance()
            if cur.peek() == "[":
                raise cur.error("arrays of tables are not supported")
            parts = []
            while True:
                cur.skip_ws()
                parts.append(_parse_key(cur))
                cur.skip_ws()
                if cur.peek() == ".":
                    cur.advance()
                    continue
                if cur.peek() == "]":
                    cur.advance()
                    break
                raise cur.error("expected '.' or ']' in table header")
            current = root
            for part in parts[:-1]:
                current = current.setdefault(part, {})
                if not isinstance(current, dict):
                    raise cur.error(f"table conflicts with key {part!r}")
            leaf = parts[-1]
            if leaf in current and not isinstance(current[leaf], dict):
                raise cur.error(f"duplicate table {leaf!r}")
            current = current.setdefault(leaf, {})
        else:
            key = _parse_key(cur)
            cur.skip_ws()
            if cur.peek() != "=":
                raise cur.error(f"expected '=' after key {key!r}")
            cur.advance()
            if key in current:
                raise cur.error(f"duplicate key {key!r}")
            current[key] = _parse_value(cur)
        cur.skip_ws()
        if not cur.eof() and cur.peek() not in "\r\n":
            raise cur.error("trailing content after value")


def load_toml(text: str) -> dict:
    """Parse TOML text: stdlib tomllib when present, the local subset otherwise."""
    try:
        import tomllib  # Python >= 3.11

        return tomllib.loads(text)
    except ModuleNotFoundError:
        return loads(text)
