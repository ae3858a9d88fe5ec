"""Method boundary detection for brace-delimited languages.

This is a lightweight scanner, not a parser: comments and literals are
blanked out, braces are depth-counted, and the text preceding each ``{`` is
classified as a container (class-like), a method header, or a plain block.
It has to cope with every historical version of a file, including ones that
never compiled.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field

from .errors import ExtractionError
from .signature import strip_annotations


@dataclass(frozen=True)
class MethodSpan:
    file: str
    raw_signature: str
    start_line: int
    end_line: int

    def __post_init__(self):
        if self.start_line > self.end_line:
            raise ValueError(f"span starts after it ends: {self}")

    def contains(self, line: int) -> bool:
        return self.start_line <= line <= self.end_line


@dataclass(frozen=True)
class LanguageProfile:
    """Extractor configuration for one language family."""

    name: str
    extensions: tuple[str, ...]
    container_pattern: str = r"(?:^|[^\w$.@])(?:class|interface|enum|record|@\s*interface)\s+([A-Za-z_$][\w$]*)"
    method_pattern: str = (
        r"(?P<name>[A-Za-z_$][\w$]*)\s*\((?P<params>[^(){};]*)\)"
        r"\s*(?:throws\s+[\w$.<>,?\s]+)?\s*$"
    )
    return_type_pattern: str = r"[\w$\s.<>\[\],?&]*"
    anonymous_pattern: str = r"\bnew\s+[\w$.]+\s*(?:<[^{};]*>)?\s*\([^{};]*\)\s*$"
    keywords: frozenset[str] = frozenset(
        {
            "if", "for", "while", "switch", "catch", "synchronized", "try",
            "do", "else", "return", "new", "throw", "case", "default", "finally",
            "assert", "super", "this",
        }
    )
    enum_keyword: str = "enum"
    text_blocks: bool = True
    char_literals: bool = True

    def matches(self, path: str) -> bool:
        return path.endswith(self.extensions)

    @property
    def _container_re(self) -> re.Pattern:
        return _compiled(self.container_pattern)

    @property
    def _method_re(self) -> re.Pattern:
        return _compiled(self.method_pattern)

    @property
    def _return_type_re(self) -> re.Pattern:
        return _compiled(self.return_type_pattern)

    @property
    def _anonymous_re(self) -> re.Pattern:
        return _compiled(self.anonymous_pattern)


_REGEX_CACHE: dict[str, re.Pattern] = {}


def _compiled(pattern: str) -> re.Pattern:
    rx = _REGEX_CACHE.get(pattern)
    if rx is None:
        rx = _REGEX_CACHE[pattern] = re.compile(pattern)
    return rx


JAVA = LanguageProfile(name="java", extensions=(".java",))

PROFILES = {"java": JAVA}


def blank_literals(source: str, profile: LanguageProfile = JAVA) -> str:
    """Replace comment and literal contents with spaces, keeping newlines.

    The result has the same length and line structure as ``source``.
    """
    out = list(source)
    n = len(source)
    i = 0

    def blank(a: int, b: int) -> None:
        for k in range(a, min(b, n)):
            if out[k] != "\n":
                out[k] = " "

    while i < n:
        ch = source[i]
        if ch == "/" and i + 1 < n and source[i + 1] == "/":
            j = source.find("\n", i)
            j = n if j < 0 else j
            blank(i, j)
            i = j
        elif ch == "/" and i + 1 < n and source[i + 1] == "*":
            j = source.find("*/", i + 2)
            j = n if j < 0 else j + 2
            blank(i, j)
            i = j
        elif ch == '"' and profile.text_blocks and source.startswith('"""', i):
            j = i + 3
            while j < n and not source.startswith('"""', j):
                j += 2 if source[j] == "\\" else 1
            j = min(n, j + 3)
            blank(i + 1, j - 1)
            i = j
        elif ch == '"' or (ch == "'" and profile.char_literals):
            j = i + 1
            while j < n and source[j] != ch and source[j] != "\n":
                j += 2 if source[j] == "\\" else 1
            # an unterminated literal stops at end of line
            blank(i + 1, j)
            i = j + 1
        else:
            i += 1
    return "".join(out)


@dataclass
class _Frame:
    kind: str  # "container" | "method" | "block" | "inline"
    open_offset: int
    header_offset: int
    path: str = ""  # container path for containers, enclosing path otherwise
    signature: str = ""
    is_enum: bool = False
    enum_body_started: bool = False
    anon_counter: int = 0
    local_counters: dict[str, int] = field(default_factory=dict)


def _collapse(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def extract_method_spans(
    source_text: str, profile: LanguageProfile = JAVA, file: str = "<source>"
) -> list[MethodSpan]:
    """Return the spans of every method-like declaration that has a body.

    Spans are returned ordered by start line. Methods of anonymous or local
    classes appear as separate spans nested inside the enclosing method.
    """
    clean = blank_literals(source_text, profile)
    line_starts = [0] + [m.end() for m in re.finditer("\n", clean)]

    def line_of(offset: int) -> int:
        return bisect.bisect_right(line_starts, offset)

    stack: list[_Frame] = []
    spans: list[MethodSpan] = []
    seg_start = 0

    for m in re.finditer(r"[{};]", clean):
        i = m.start()
        ch = clean[i]
        top = stack[-1] if stack else None
        if top is not None and top.kind == "inline":
            if ch == "{":
                stack.append(_Frame("inline", i, i))
            elif ch == "}":
                stack.pop()
            continue
        if ch == ";":
            if top is not None and top.is_enum:
                stack[-1].enum_body_started = True
            seg_start = i + 1
            continue
        if ch == "}":
            if not stack:
                raise ExtractionError("unmatched closing brace", file, line_of(i))
            frame = stack.pop()
            if frame.kind == "method":
                spans.append(
                    MethodSpan(file, frame.signature, line_of(frame.header_offset), line_of(i))
                )
            seg_start = i + 1
            continue

        raw_header = clean[seg_start:i]
        stripped = raw_header.lstrip()
        header_offset = seg_start + (len(raw_header) - len(stripped))
        if not stripped:
            header_offset = i
        if (top is None or top.kind == "container") and raw_header.count("(") > raw_header.count(")"):
            # array initializer inside annotation arguments or a call expression
            stack.append(_Frame("inline", i, i))
            continue
        frame = _classify(strip_annotations(raw_header), stack, profile)
        frame.open_offset = i
        frame.header_offset = header_offset
        stack.append(frame)
        seg_start = i + 1

    if stack:
        raise ExtractionError("unclosed brace", file, line_of(stack[-1].open_offset))
    spans.sort(key=lambda s: (s.start_line, -s.end_line, s.raw_signature))
    return spans


def _enclosing_container(stack: list[_Frame]) -> _Frame | None:
    for frame in reversed(stack):
        if frame.kind == "container":
            return frame
    return None


def _classify(header: str, stack: list[_Frame], profile: LanguageProfile) -> _Frame:
    parent = stack[-1] if stack else None
    owner = _enclosing_container(stack)
    owner_path = owner.path if owner else ""
    in_code = parent is not None and parent.kind != "container"

    def child_path(name: str) -> str:
        return f"{owner_path}::{name}" if owner_path else name

    def anonymous() -> _Frame:
        if owner is None:
            return _Frame("block", 0, 0, path=owner_path)
        owner.anon_counter += 1
        return _Frame("container", 0, 0, path=child_path(str(owner.anon_counter)))

    cm = profile._container_re.search(header)
    if cm and not profile._anonymous_re.search(header):
        name = cm.group(1)
        is_enum = re.search(rf"\b{profile.enum_keyword}\s+{re.escape(name)}\b", header) is not None
        if in_code and owner is not None:
            n = owner.local_counters.get(name, 0) + 1
            owner.local_counters[name] = n
            name = f"{n}{name}"
        return _Frame("container", 0, 0, path=child_path(name), is_enum=is_enum)

    if in_code:
        if profile._anonymous_re.search(header):
            return anonymous()
        return _Frame("block", 0, 0, path=owner_path)

    if parent is not None and parent.is_enum and not parent.enum_body_started:
        # enum constant with a class body
        return anonymous()

    if parent is None:
        return _Frame("block", 0, 0)

    if profile._anonymous_re.search(header):
        return anonymous()

    mm = profile._method_re.search(header)
    if mm and mm.group("name") not in profile.keywords:
        prefix = header[: mm.start()]
        if "=" not in prefix and profile._return_type_re.fullmatch(prefix):
            sig = f"{owner_path}::{mm.group('name')}({_collapse(mm.group('params'))})"
            return _Frame("method", 0, 0, path=owner_path, signature=sig)
    return _Frame("block", 0, 0, path=owner_path)
