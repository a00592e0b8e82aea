"""Line-based N-Quads parsing and serialization.

The grammar covered here is the part needed for version ingestion and flat
export: IRIs in angle brackets, literals with ``^^`` datatype or ``@lang``,
blank nodes, and an optional fourth graph term. Lines whose first non-blank
byte is ``#`` are comments. UTF-8 only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseError
from .model import Quad, Term, blank, iri, literal

STRICT = "strict"
LENIENT = "lenient"

_ESCAPES = {"t": "\t", "n": "\n", "r": "\r", '"': '"', "\\": "\\"}
_UNESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


@dataclass
class ParsedDocument:
    """Quads in file line order plus any lenient-mode warnings."""

    quads: list[Quad] = field(default_factory=list)
    warnings: list[tuple[int, str]] = field(default_factory=list)


class _LineScanner:
    """Cursor over one line; all errors carry 1-based line/column."""

    def __init__(self, text: str, lineno: int):
        self.text = text
        self.pos = 0
        self.lineno = lineno

    def fail(self, message: str) -> "ParseError":
        return ParseError(message, line=self.lineno, column=self.pos + 1)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        if self.pos >= len(self.text):
            return True
        return self.text[self.pos] == "#"

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def read_iri(self) -> Term:
        start = self.pos
        self.pos += 1  # consume '<'
        end = self.text.find(">", self.pos)
        if end < 0:
            self.pos = start
            raise self.fail("unterminated IRI")
        value = self.text[self.pos : end]
        self.pos = end + 1
        try:
            return iri(value)
        except ValueError as exc:
            self.pos = start
            raise self.fail(str(exc))

    def read_blank(self) -> Term:
        start = self.pos
        self.pos += 2  # consume '_:'
        label_start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] in "_-."
        ):
            self.pos += 1
        label = self.text[label_start : self.pos]
        # A trailing dot belongs to the statement, not the label.
        while label.endswith("."):
            label = label[:-1]
            self.pos -= 1
        try:
            return blank(label)
        except ValueError as exc:
            self.pos = start
            raise self.fail(str(exc))

    def read_literal(self) -> Term:
        self.pos += 1  # consume opening quote
        out: list[str] = []
        while True:
            if self.pos >= len(self.text):
                raise self.fail("unterminated literal")
            c = self.text[self.pos]
            if c == '"':
                self.pos += 1
                break
            if c == "\\":
                out.append(self._read_escape())
            else:
                out.append(c)
                self.pos += 1
        lexical = "".join(out)
        if self.peek() == "@":
            self.pos += 1
            tag_start = self.pos
            while self.pos < len(self.text) and (
                self.text[self.pos].isalnum() or self.text[self.pos] == "-"
            ):
                self.pos += 1
            tag = self.text[tag_start : self.pos]
            try:
                return literal(lexical, language=tag)
            except ValueError as exc:
                self.pos = tag_start
                raise self.fail(str(exc))
        if self.text.startswith("^^", self.pos):
            self.pos += 2
            if self.peek() != "<":
                raise self.fail("datatype must be an IRI")
            dt = self.read_iri()
            return literal(lexical, datatype=dt.lexical)
        return literal(lexical)

    def _read_escape(self) -> str:
        # self.text[self.pos] == '\\'
        if self.pos + 1 >= len(self.text):
            raise self.fail("dangling escape")
        marker = self.text[self.pos + 1]
        if marker in _ESCAPES:
            self.pos += 2
            return _ESCAPES[marker]
        if marker in ("u", "U"):
            width = 4 if marker == "u" else 8
            digits = self.text[self.pos + 2 : self.pos + 2 + width]
            if len(digits) < width or any(c not in "0123456789abcdefABCDEF" for c in digits):
                raise self.fail(f"malformed \\{marker} escape")
            code = int(digits, 16)
            if code > 0x10FFFF:
                raise self.fail("escape beyond the Unicode range")
            self.pos += 2 + width
            return chr(code)
        raise self.fail(f"unsupported escape \\{marker}")

    def read_term(self) -> Term:
        self.skip_ws()
        c = self.peek()
        if c == "<":
            return self.read_iri()
        if c == '"':
            return self.read_literal()
        if c == "_" and self.text.startswith("_:", self.pos):
            return self.read_blank()
        if c == "":
            raise self.fail("unexpected end of line")
        raise self.fail(f"unexpected character {c!r}")


def _parse_line(text: str, lineno: int, require_graph: bool) -> Quad | None:
    scanner = _LineScanner(text, lineno)
    if scanner.at_end():
        return None
    terms: list[Term] = []
    while True:
        scanner.skip_ws()
        if scanner.peek() == ".":
            scanner.pos += 1
            break
        if len(terms) == 4:
            raise scanner.fail("expected '.' after four terms")
        terms.append(scanner.read_term())
    if not scanner.at_end():
        raise scanner.fail("trailing content after '.'")
    if len(terms) < 3:
        raise scanner.fail("statement needs at least subject, predicate, object")
    graph = terms[3] if len(terms) == 4 else None
    if graph is not None and not graph.is_iri:
        raise scanner.fail("graph term must be an IRI")
    if require_graph and graph is None:
        raise scanner.fail("version data must name a graph; default-graph quads are reserved for metadata")
    try:
        return Quad(terms[0], terms[1], terms[2], graph)
    except ValueError as exc:
        raise scanner.fail(str(exc))


def parse_nquads(data, mode: str = STRICT, require_graph: bool = False) -> ParsedDocument:
    """Parse an N-Quads document from bytes or text.

    Strict mode raises ParseError at the first malformed line; lenient mode
    skips bad lines, recording (line number, message) warnings. Line order of
    the surviving quads is preserved.
    """
    if mode not in (STRICT, LENIENT):
        raise ValueError(f"unknown parse mode: {mode!r}")
    doc = ParsedDocument()
    if isinstance(data, (bytes, bytearray)):
        if mode == STRICT:
            try:
                text = bytes(data).decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ParseError(f"input is not UTF-8: {exc}")
        else:
            text = bytes(data).decode("utf-8", errors="replace")
    else:
        text = data
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        try:
            quad = _parse_line(line, lineno, require_graph)
        except ParseError as exc:
            if mode == STRICT:
                raise
            doc.warnings.append((lineno, exc.message))
            continue
        if quad is not None:
            doc.quads.append(quad)
    return doc


def escape_literal(lexical: str) -> str:
    return "".join(_UNESCAPES.get(c, c) for c in lexical)


def serialize_term(term: Term) -> str:
    """One term in N-Triples syntax."""
    if term.is_iri:
        return f"<{term.lexical}>"
    if term.is_blank:
        return f"_:{term.lexical}"
    body = f'"{escape_literal(term.lexical)}"'
    if term.language is not None:
        return f"{body}@{term.language}"
    if term.datatype is not None:
        return f"{body}^^<{term.datatype}>"
    return body


def serialize_quad(quad: Quad) -> str:
    parts = [
        serialize_term(quad.subject),
        serialize_term(quad.predicate),
        serialize_term(quad.object),
    ]
    if quad.graph is not None:
        parts.append(serialize_term(quad.graph))
    return " ".join(parts) + " ."


def serialize_nquads(quads) -> str:
    """Canonical form: one quad per line, ``\\n`` endings, minimal escaping."""
    return "".join(serialize_quad(q) + "\n" for q in quads)


def parse_term(text: str) -> Term:
    """Parse exactly one N-Triples term (used by snapshot files)."""
    scanner = _LineScanner(text, 1)
    term = scanner.read_term()
    if not scanner.at_end():
        raise scanner.fail("trailing content after term")
    return term
