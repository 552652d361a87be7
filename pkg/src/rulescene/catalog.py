"""Element catalog: the per-subcomponent token lists the DSL draws from.

The catalog is deliberately open: validation marks unknown tokens as novel
instead of rejecting them, so newly introduced signs or behaviors can flow
through the pipeline. Lists live in a versioned data file, never in code.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

SUBCOMPONENTS = (
    "weather",
    "time",
    "road type",
    "road marker",
    "traffic sign",
    "actor type",
    "behavior",
    "position reference",
    "position relation",
    "longitudinal oracle",
    "lateral oracle",
)

SENTINEL = "none"

_PUNCT = re.compile(r"[-_/.,:;!?'\"()]+")
_WS = re.compile(r"\s+")


class CatalogError(Exception):
    """Malformed catalog file."""


def normalize_token(text: str) -> str:
    """Comparison key for a token: lowercase, punctuation folded to spaces."""
    return _WS.sub(" ", _PUNCT.sub(" ", text.lower())).strip()


@dataclass(frozen=True)
class ElementCatalog:
    """Ordered token lists per subcomponent plus an alias table."""

    elements: dict[str, tuple[str, ...]]
    aliases: dict[str, str] = field(default_factory=dict)
    version: str = "unversioned"

    def __post_init__(self) -> None:
        for name in self.elements:
            if name not in SUBCOMPONENTS:
                raise CatalogError(f"unknown subcomponent section: {name!r}")
        # keyed lookup built once; display form is the catalog spelling
        lookup: dict[str, str] = {}
        for tokens in self.elements.values():
            for tok in tokens:
                lookup.setdefault(normalize_token(tok), tok)
        for alias, target in self.aliases.items():
            lookup.setdefault(normalize_token(alias), target)
        object.__setattr__(self, "_lookup", lookup)

    def tokens(self, subcomponent: str) -> tuple[str, ...]:
        if subcomponent not in SUBCOMPONENTS:
            raise CatalogError(f"unknown subcomponent: {subcomponent!r}")
        return self.elements.get(subcomponent, ())

    def contains(self, subcomponent: str, token: str) -> bool:
        """Membership up to normalization and aliases."""
        key = normalize_token(token)
        canon = self._lookup.get(key)
        if canon is None:
            return False
        return normalize_token(canon) in {
            normalize_token(t) for t in self.tokens(subcomponent)
        }

    def canonical(self, token: str) -> str | None:
        """Catalog spelling for a token, folding aliases; None if unknown."""
        return self._lookup.get(normalize_token(token))

    def comparison_key(self, token: str) -> str:
        """Key used when diffing representations: aliases fold together."""
        canon = self._lookup.get(normalize_token(token))
        return normalize_token(canon) if canon is not None else normalize_token(token)


def parse_catalog_text(text: str, version: str = "unversioned") -> ElementCatalog:
    elements: dict[str, list[str]] = {}
    aliases: dict[str, str] = {}
    section: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section != "aliases" and section not in SUBCOMPONENTS:
                raise CatalogError(f"line {lineno}: unknown section {section!r}")
            if section != "aliases" and section in elements:
                raise CatalogError(f"line {lineno}: duplicate section {section!r}")
            if section != "aliases":
                elements[section] = []
            continue
        if section is None:
            raise CatalogError(f"line {lineno}: token before any section")
        if section == "aliases":
            if "->" not in line:
                raise CatalogError(f"line {lineno}: alias line needs '->'")
            alias, target = (part.strip() for part in line.split("->", 1))
            if not alias or not target:
                raise CatalogError(f"line {lineno}: empty alias or target")
            aliases[alias] = target
            continue
        token = line.lower()
        if token in elements[section]:
            raise CatalogError(f"line {lineno}: duplicate token {token!r}")
        elements[section].append(token)
    cat = ElementCatalog(
        elements={k: tuple(v) for k, v in elements.items()},
        aliases=aliases,
        version=version,
    )
    for alias, target in aliases.items():
        if cat.canonical(target) is None or normalize_token(target) not in {
            normalize_token(t) for toks in cat.elements.values() for t in toks
        }:
            raise CatalogError(f"alias target not in catalog: {target!r}")
    return cat


def load_catalog(path: str | Path | None = None) -> ElementCatalog:
    """Load a catalog file; with no path, the packaged default."""
    if path is None:
        text = resources.files("rulescene.data").joinpath("catalog.txt").read_text("utf-8")
        return parse_catalog_text(text, version="builtin-v1")
    p = Path(path)
    return parse_catalog_text(p.read_text("utf-8"), version=p.name)


_default: ElementCatalog | None = None


def default_catalog() -> ElementCatalog:
    global _default
    if _default is None:
        _default = load_catalog()
    return _default
