"""Canonical method identities and duplicate-entry aggregation.

Raw signatures come from source text (``Reader::read(char [ ] buf, int off)``)
or from bytecode-level call graphs (``Reader:read(char[],int)``). Both are
reduced to a :class:`MethodId` whose rendering is the join key between the
change ledger and the call graph: ``Reader::read(char [], int)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import NormalizationError
from .ledger import ChangeRecord

_TOKEN_RE = re.compile(r"\.\.\.|[A-Za-z_$][\w$]*(?:\s*\.\s*[A-Za-z_$][\w$]*)*|[<>,?&\[\]]|\S")
_ANNOTATION_RE = re.compile(r"@\s*[A-Za-z_$][\w$.]*")
_MODIFIERS = frozenset({"final"})


@dataclass(frozen=True)
class MethodId:
    container: str
    name: str
    param_types: tuple[str, ...] = ()

    def render(self) -> str:
        return f"{self.container}::{self.name}({', '.join(self.param_types)})"

    def __str__(self) -> str:
        return self.render()

    def __lt__(self, other: "MethodId") -> bool:
        return self.render() < other.render()

    @property
    def simple_container(self) -> str:
        return self.container.rsplit("::", 1)[-1]

    @property
    def is_constructor(self) -> bool:
        return self.name == self.simple_container


def strip_annotations(text: str) -> str:
    out = []
    i = 0
    while True:
        m = _ANNOTATION_RE.search(text, i)
        if not m:
            out.append(text[i:])
            break
        out.append(text[i : m.start()])
        j = m.end()
        k = j
        while k < len(text) and text[k].isspace():
            k += 1
        if k < len(text) and text[k] == "(":
            depth = 0
            while k < len(text):
                if text[k] == "(":
                    depth += 1
                elif text[k] == ")":
                    depth -= 1
                    if depth == 0:
                        k += 1
                        break
                k += 1
            j = k
        out.append(" ")
        i = j
    return "".join(out)


def split_params(text: str) -> list[str]:
    """Split a parameter list on commas that are not nested in ``<>`` or ``()``."""
    parts: list[str] = []
    depth = 0
    start = 0
    for i, ch in enumerate(text):
        if ch in "<(":
            depth += 1
        elif ch in ">)":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    if len(parts) == 1 and not parts[0].strip():
        return []
    return parts


def _is_word(tok: str) -> bool:
    return tok == "?" or bool(re.fullmatch(r"[A-Za-z_$][\w$.]*", tok))


def _render_generic(tokens: list[str]) -> str:
    out = ""
    prev = None
    for tok in tokens:
        if tok == ",":
            out += ", "
        elif tok == "&":
            out += " & "
        elif prev is not None and _is_word(prev) and _is_word(tok):
            out += " " + tok
        else:
            out += tok
        prev = tok
    return out


def canonical_param_type(param: str, *, erase_generics: bool = False) -> str:
    """Reduce one declared parameter to its canonical type token.

    ``final char [ ] buf`` -> ``char []``; ``String... args`` -> ``String []``;
    a bare type such as ``int`` is returned unchanged.
    """
    text = strip_annotations(param)
    raw_tokens = [re.sub(r"\s+", "", t) for t in _TOKEN_RE.findall(text)]
    # Units at generic depth 0: ("id", name, generic_tokens) or ("dim",).
    units: list[tuple] = []
    depth = 0
    generic: list[str] = []
    for tok in raw_tokens:
        if depth > 0:
            generic.append(tok)
            if tok == "<":
                depth += 1
            elif tok == ">":
                depth -= 1
                if depth == 0:
                    kind, name, _ = units[-1]
                    units[-1] = (kind, name, generic)
                    generic = []
            continue
        if tok == "<":
            if not units or units[-1][0] != "id":
                raise NormalizationError(param, "type arguments without a base type")
            depth = 1
            generic = ["<"]
        elif tok == "[":
            continue
        elif tok in ("]", "..."):
            units.append(("dim", None, None))
        elif tok in _MODIFIERS and not units:
            continue
        elif re.fullmatch(r"[A-Za-z_$][\w$.]*", tok):
            units.append(("id", tok, None))
        else:
            raise NormalizationError(param, f"unexpected token {tok!r} in parameter")
    if depth != 0:
        raise NormalizationError(param, "unbalanced type arguments")
    ids = [i for i, u in enumerate(units) if u[0] == "id"]
    if not ids:
        raise NormalizationError(param, "parameter has no type")
    if len(ids) > 2:
        raise NormalizationError(param, "too many names in parameter")
    base = units[ids[0]]
    dims = sum(1 for u in units if u[0] == "dim")
    rendered = base[1]
    if base[2] and not erase_generics:
        rendered += _render_generic(base[2])
    if dims:
        rendered += " " + "[]" * dims
    return rendered


def _split_head(text: str) -> tuple[str, str, str]:
    text = text.strip()
    open_idx = text.find("(")
    if open_idx < 0 or not text.endswith(")"):
        raise NormalizationError(text)
    head = text[:open_idx].strip()
    params = text[open_idx + 1 : -1]
    if "::" in head:
        container, name = head.rsplit("::", 1)
    elif ":" in head:
        container, name = head.rsplit(":", 1)
    else:
        raise NormalizationError(text, "signature has no container")
    container, name = container.strip(), name.strip()
    if not container or not name:
        raise NormalizationError(text)
    return container, name, params


def parse_method_ref(text: str, *, erase_generics: bool = False) -> MethodId:
    """Parse a signature without renaming containers (``$`` is preserved)."""
    container, name, params = _split_head(text)
    try:
        types = tuple(canonical_param_type(p, erase_generics=erase_generics) for p in split_params(params))
    except NormalizationError as exc:
        raise NormalizationError(text, str(exc)) from None
    return MethodId(re.sub(r"\s+", "", container), name, types)


def normalize_signature(raw_signature: str, *, erase_generics: bool = False) -> MethodId:
    """Strip parameter identifiers and canonicalize container separators."""
    mid = parse_method_ref(raw_signature, erase_generics=erase_generics)
    return MethodId(mid.container.replace("$", "::"), mid.name, mid.param_types)


def aggregate(
    raw_ledger: Mapping[str, ChangeRecord], *, erase_generics: bool = False
) -> dict[MethodId, ChangeRecord]:
    """Merge rows whose signatures normalize to the same :class:`MethodId`.

    Counts are summed; ``total_commits`` takes the maximum across duplicates.
    """
    merged: dict[MethodId, ChangeRecord] = {}
    for raw in sorted(raw_ledger):
        rec = raw_ledger[raw]
        key = normalize_signature(raw, erase_generics=erase_generics)
        prev = merged.get(key)
        if prev is None:
            merged[key] = rec
            continue
        merged[key] = ChangeRecord(
            change_commits=prev.change_commits + rec.change_commits,
            total_commits=max(prev.total_commits, rec.total_commits),
            insertions=prev.insertions + rec.insertions,
            deletions=prev.deletions + rec.deletions,
            modifications=prev.modifications + rec.modifications,
        )
    return merged


def render_keys(ledger: Mapping[MethodId, ChangeRecord]) -> dict[str, ChangeRecord]:
    return {k.render(): v for k, v in ledger.items()}


def sorted_ids(ids: Iterable[MethodId]) -> list[MethodId]:
    return sorted(ids, key=MethodId.render)
