"""
Metric-spec documents: ``key = value`` lines grouped in ``[sections]``.

Example::

    # de Sitter, flat slicing
    [model]
    dim = 4
    [lapse]
    lapse = "1"
    [spatial]
    g11 = "exp(2*t)"; g22 = "exp(2*t)"; g33 = "exp(2*t)"
    [domain]
    t = [-2, 2]
    x1 = [-10, 10]

Values are quoted strings (expressions live inside these), numbers, bare
words, or bracketed lists of numbers. ``;`` separates several assignments on
one line, ``#`` starts a comment. Assignments before the first section header
belong to ``[model]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Optional, Union

import pyparsing as pp

from ..exceptions import ParseError

SECTIONS = ("model", "constants", "lapse", "spatial", "metric", "domain")

Scalar = Union[str, float]


@dataclass(frozen=True)
class Value:
    """
    One assigned value plus where it came from.

    ``column`` points at the first character of the value; for quoted strings
    that is the opening quote, so expression columns are ``column + 1``.
    """

    raw: Union[Scalar, tuple[float, ...]]
    line: int
    column: int
    quoted: bool = False

    @property
    def text_column(self) -> int:
        return self.column + 1 if self.quoted else self.column


@dataclass
class Document:
    """
    Parsed document: section name to ordered ``{key: Value}``.
    """

    sections: dict[str, dict[str, Value]] = field(default_factory=dict)

    def section(self, name: str) -> dict[str, Value]:
        return self.sections.get(name, {})

    def get(self, section: str, key: str) -> Optional[Value]:
        return self.section(section).get(key)

    def __contains__(self, name: str) -> bool:
        return bool(self.section(name))

    def items(self) -> Iterator[tuple[str, dict[str, Value]]]:
        return iter(self.sections.items())


def _located(expr: pp.ParserElement) -> pp.ParserElement:
    return pp.Located(expr)


def _build_line_grammar() -> pp.ParserElement:
    key = pp.Word(pp.alphas + "_", pp.alphanums + "_")("key")
    number = pp.Regex(r"[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?")
    number.set_parse_action(lambda t: float(t[0]))
    quoted = pp.QuotedString('"', unquote_results=False) | pp.QuotedString(
        "'", unquote_results=False
    )
    bare = pp.Word(pp.alphanums + "_.-+")
    listing = pp.Group(
        pp.Suppress("[")
        + pp.Optional(pp.DelimitedList(number))
        + pp.Suppress("]")
    )
    value = _located(quoted | number | listing | bare)("value")
    assignment = pp.Group(key + pp.Suppress("=") + value)
    assignments = pp.DelimitedList(assignment, delim=";") + pp.Optional(
        pp.Suppress(";")
    )
    header = pp.Group(
        pp.Suppress("[")
        + pp.Word(pp.alphas + "_")("section")
        + pp.Suppress("]")
    )("header")
    comment = pp.Suppress(pp.Regex(r"#.*"))
    return (header | assignments) + pp.Optional(comment)


LINE = _build_line_grammar()


def _strip_comment(text: str) -> str:
    # '#' inside quotes is data, not a comment.
    quote = None
    for index, char in enumerate(text):
        if quote:
            if char == quote:
                quote = None
        elif char in "\"'":
            quote = char
        elif char == "#":
            return text[:index]
    return text


def _value(located: Any, line: int) -> Value:
    start, tokens, _ = located
    raw = tokens[0]
    if isinstance(raw, pp.ParseResults):
        return Value(tuple(float(x) for x in raw), line, start + 1)
    if isinstance(raw, str) and raw[:1] in "\"'":
        return Value(raw[1:-1], line, start + 1, quoted=True)
    return Value(raw, line, start + 1)


def parse_document(text: str) -> Document:
    """
    Parse a metric-spec document into a `Document`.

    :raises:
        `.ParseError` carrying the 1-based line and column of the first
        problem: bad syntax, unknown section, or a key assigned twice within a
        section.
    """
    doc = Document()
    current = "model"
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        body = _strip_comment(raw_line)
        if not body.strip():
            continue
        try:
            parsed = LINE.parse_string(body, parse_all=True)
        except pp.ParseBaseException as exc:
            rest = body[exc.loc :].strip()
            raise ParseError(
                "expected a [section] header or key = value",
                lineno,
                exc.loc + 1,
                rest.split()[0] if rest else "",
            ) from None
        except RecursionError:
            raise ParseError("line nested too deeply", lineno, 1)
        first = parsed[0]
        if "section" in first:
            name = first["section"]
            if name not in SECTIONS:
                raise ParseError(
                    "unknown section [{}]".format(name),
                    lineno,
                    body.find(name) + 1,
                    name,
                )
            current = name
            doc.sections.setdefault(name, {})
            continue
        target = doc.sections.setdefault(current, {})
        for group in parsed:
            key = group["key"]
            value = _value(group["value"], lineno)
            if key in target:
                raise ParseError(
                    "duplicate key {!r} in [{}]".format(key, current),
                    lineno,
                    body.find(key) + 1,
                    key,
                )
            target[key] = value
    return doc


def render_document(sections: dict[str, dict[str, Any]]) -> str:
    """
    Inverse of `parse_document` for plain values.

    Strings are written quoted, tuples/lists as bracketed lists, numbers via
    ``repr``.
    """
    lines = []
    for name, entries in sections.items():
        if not entries:
            continue
        lines.append("[{}]".format(name))
        for key, value in entries.items():
            if isinstance(value, str):
                rendered = '"{}"'.format(value)
            elif isinstance(value, (list, tuple)):
                rendered = "[{}]".format(
                    ", ".join(repr(float(x)) for x in value)
                )
            else:
                rendered = repr(value)
            lines.append("{} = {}".format(key, rendered))
    return "\n".join(lines) + "\n"
