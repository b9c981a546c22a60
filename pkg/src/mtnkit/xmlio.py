"""Canonical XML serialization and strict parsing of tree scores.

The writer emits one fixed byte form: UTF-8, LF line endings, two-space
indentation, attributes in alphabetical order, onsets as exact fractions in
lowest terms. Serializing a parsed file reproduces it byte for byte, and two
equal works always serialize identically.

The parser is expat-based so every error carries a line and column. Files
whose sibling order is not canonical are accepted, reordered, and reported
through the warning callback.
"""

from __future__ import annotations

import xml.parsers.expat
from fractions import Fraction
from typing import Callable

from xml.sax.saxutils import quoteattr

from .canonical import CanonicalizeError, canonicalize
from .model import (
    MTNWork, Measure, NODE_KINDS, Node, Part, StaffPosition, Token, validate,
)

MTN_VERSION = "1.0"
_HEADER = '<?xml version="1.0" encoding="UTF-8"?>\n'


class FormatError(ValueError):
    """Base for parse errors; carries the 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class MalformedXmlError(FormatError):
    pass


class UnknownElementError(FormatError):
    pass


class UnknownAttributeError(FormatError):
    pass


class FractionSyntaxError(FormatError):
    """A numeric attribute (onset, staff, step, ...) failed to parse."""


class DuplicateIdError(FormatError):
    pass


class InvalidWorkError(ValueError):
    """Serialization refused: the work fails validation."""

    def __init__(self, violation):
        super().__init__(str(violation))
        self.violation = violation


# ---------------------------------------------------------------------------
# Writing.

def _fmt_fraction(value: Fraction) -> str:
    return str(value)  # lowest terms; integers render bare


def _token_attrs(tok: Token) -> dict[str, str]:
    attrs = {"id": tok.id, "label": tok.label,
             "staff": str(tok.position.staff)}
    if tok.position.step is not None:
        attrs["step"] = str(tok.position.step)
    if tok.pair_id is not None:
        attrs["pair"] = tok.pair_id
    if tok.numeric_value is not None:
        attrs["value"] = str(tok.numeric_value)
    return attrs


def _node_attrs(node: Node) -> dict[str, str]:
    attrs: dict[str, str] = {}
    if node.onset is not None:
        attrs["onset"] = _fmt_fraction(node.onset)
    if node.synthetic:
        attrs["synthetic"] = "true"
    return attrs


def _open_tag(name: str, attrs: dict[str, str], indent: int,
              self_close: bool = False) -> str:
    parts = "".join(f" {k}={quoteattr(v)}" for k, v in sorted(attrs.items()))
    closer = "/>" if self_close else ">"
    return f"{'  ' * indent}<{name}{parts}{closer}"


def _write_node(node: Node, indent: int, out: list[str]) -> None:
    out.append(_open_tag(node.kind, _node_attrs(node), indent))
    for child in node.children:
        if isinstance(child, Token):
            out.append(_open_tag("token", _token_attrs(child), indent + 1,
                                 self_close=True))
        else:
            _write_node(child, indent + 1, out)
    out.append(f"{'  ' * indent}</{node.kind}>")


def serialize_work(work: MTNWork) -> bytes:
    """Canonical byte form of a valid work.

    Raises InvalidWorkError with the first violation when the work does not
    validate (including non-canonical sibling order).
    """
    problems = validate(work)
    if problems:
        raise InvalidWorkError(problems[0])
    out = [_HEADER.rstrip("\n")]
    out.append(_open_tag("work", {"mtn-version": MTN_VERSION,
                                  "work_id": work.work_id}, 0))
    for part in work.parts:
        out.append(_open_tag("part", {"staff_count": str(part.staff_count)}, 1))
        for m in part.measures:
            attrs = {"id": m.id}
            if m.line_start:
                attrs["line_start"] = "true"
            out.append(_open_tag("measure", attrs, 2))
            for child in m.children:
                _write_node(child, 3, out)
            out.append("    </measure>")
        out.append("  </part>")
    out.append("</work>")
    out.append("")
    return "\n".join(out).encode("utf-8")


# ---------------------------------------------------------------------------
# Parsing.

_WORK_ATTRS = {"mtn-version", "work_id"}
_PART_ATTRS = {"staff_count"}
_MEASURE_ATTRS = {"id", "line_start"}
_NODE_ATTRS = {"onset", "synthetic"}
_TOKEN_ATTRS = {"id", "label", "staff", "step", "pair", "value"}


class _Parser:
    def __init__(self, on_warning: Callable[[str], None] | None):
        self.on_warning = on_warning or (lambda msg: None)
        self.expat = xml.parsers.expat.ParserCreate("UTF-8")
        self.expat.StartElementHandler = self.start
        self.expat.EndElementHandler = self.end
        self.expat.CharacterDataHandler = self.text
        self.work_attrs: dict[str, str] | None = None
        self.parts: list[Part] = []
        self.part_attrs: dict[str, str] | None = None
        self.measures: list[Measure] = []
        self.measure_attrs: dict[str, str] | None = None
        self.stack: list[tuple[str, dict[str, str], list]] = []
        self.token_ids: set[str] = set()
        self.measure_ids: set[str] = set()

    def where(self) -> tuple[int, int]:
        return (self.expat.CurrentLineNumber,
                self.expat.CurrentColumnNumber + 1)

    def err(self, cls, message: str):
        line, col = self.where()
        raise cls(message, line, col)

    def check_attrs(self, name: str, attrs: dict[str, str],
                    allowed: set[str], required: set[str]) -> None:
        for key in attrs:
            if key not in allowed:
                self.err(UnknownAttributeError,
                         f"unknown attribute {key!r} on <{name}>")
        for key in required:
            if key not in attrs:
                self.err(UnknownAttributeError,
                         f"<{name}> is missing attribute {key!r}")

    def fraction(self, raw: str, what: str) -> Fraction:
        try:
            value = Fraction(raw)
        except (ValueError, ZeroDivisionError):
            self.err(FractionSyntaxError, f"bad {what} fraction {raw!r}")
        return value

    def integer(self, raw: str, what: str) -> int:
        try:
            return int(raw, 10)
        except ValueError:
            self.err(FractionSyntaxError, f"bad {what} number {raw!r}")

    def start(self, name: str, attrs: dict[str, str]) -> None:
        if name == "work":
            if self.work_attrs is not None or self.stack:
                self.err(UnknownElementError, "misplaced <work>")
            self.check_attrs(name, attrs, _WORK_ATTRS, _WORK_ATTRS)
            if attrs["mtn-version"] != MTN_VERSION:
                self.err(UnknownAttributeError,
                         f"unsupported mtn-version {attrs['mtn-version']!r}")
            self.work_attrs = attrs
        elif name == "part":
            if self.work_attrs is None or self.part_attrs is not None:
                self.err(UnknownElementError, "misplaced <part>")
            self.check_attrs(name, attrs, _PART_ATTRS, _PART_ATTRS)
            self.part_attrs = attrs
            self.measures = []
        elif name == "measure":
            if self.part_attrs is None or self.measure_attrs is not None:
                self.err(UnknownElementError, "misplaced <measure>")
            self.check_attrs(name, attrs, _MEASURE_ATTRS, {"id"})
            if attrs["id"] in self.measure_ids:
                self.err(DuplicateIdError,
                         f"measure id {attrs['id']!r} already used")
            self.measure_ids.add(attrs["id"])
            self.measure_attrs = attrs
            self.stack = [("__measure__", attrs, [])]
        elif name == "token":
            if self.measure_attrs is None or len(self.stack) < 2:
                self.err(UnknownElementError, "misplaced <token>")
            self.check_attrs(name, attrs, _TOKEN_ATTRS,
                             {"id", "label", "staff"})
            if attrs["id"] in self.token_ids:
                self.err(DuplicateIdError,
                         f"token id {attrs['id']!r} already used")
            self.token_ids.add(attrs["id"])
            step = (self.integer(attrs["step"], "step")
                    if "step" in attrs else None)
            value = (self.integer(attrs["value"], "value")
                     if "value" in attrs else None)
            token = Token(
                attrs["id"], attrs["label"],
                StaffPosition(self.integer(attrs["staff"], "staff"), step),
                pair_id=attrs.get("pair"), numeric_value=value)
            self.stack[-1][2].append(token)
            self.stack.append(("__token__", attrs, []))
        elif name in NODE_KINDS:
            if self.measure_attrs is None:
                self.err(UnknownElementError, f"misplaced <{name}>")
            self.check_attrs(name, attrs, _NODE_ATTRS, set())
            self.stack.append((name, attrs, []))
        else:
            self.err(UnknownElementError, f"unknown element <{name}>")

    def end(self, name: str) -> None:
        if name == "token":
            self.stack.pop()
            return
        if name in NODE_KINDS:
            kind, attrs, children = self.stack.pop()
            onset = (self.fraction(attrs["onset"], "onset")
                     if "onset" in attrs else None)
            node = Node(kind, tuple(children), onset=onset,
                        synthetic=attrs.get("synthetic") == "true")
            self.stack[-1][2].append(node)
        elif name == "measure":
            _, attrs, children = self.stack.pop()
            measure = Measure(attrs["id"], tuple(children),
                              line_start=attrs.get("line_start") == "true")
            self.measures.append(self._canonical(measure))
            self.measure_attrs = None
        elif name == "part":
            staff_count = self.integer(self.part_attrs["staff_count"],
                                       "staff_count")
            self.parts.append(Part(staff_count, tuple(self.measures)))
            self.part_attrs = None
        # </work> needs no action

    def text(self, data: str) -> None:
        if data.strip():
            self.err(MalformedXmlError,
                     f"unexpected text content {data.strip()[:20]!r}")

    def _canonical(self, measure: Measure) -> Measure:
        try:
            ordered = canonicalize(measure)
        except CanonicalizeError:
            return measure  # validation will name the missing onsets
        if ordered != measure:
            self.on_warning(
                f"measure {measure.id} was not in canonical order; reordered")
        return ordered

    def parse(self, data: bytes) -> MTNWork:
        try:
            self.expat.Parse(data, True)
        except xml.parsers.expat.ExpatError as exc:
            raise MalformedXmlError(
                xml.parsers.expat.errors.messages[exc.code],
                exc.lineno, exc.offset + 1) from exc
        if self.work_attrs is None:
            raise MalformedXmlError("no <work> element found", 1, 1)
        return MTNWork(self.work_attrs["work_id"], tuple(self.parts))


def parse_work(data: bytes | str,
               on_warning: Callable[[str], None] | None = None) -> MTNWork:
    """Parse canonical XML bytes into a work.

    Strict: unknown elements or attributes, bad numbers, and duplicate ids
    raise FormatError subclasses with line/column. Sibling order is repaired
    to canonical form with a warning rather than rejected.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    return _Parser(on_warning).parse(data)
