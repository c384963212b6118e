"""Idiom lexicon and light-verb inventories.

Idiom lists arrive as flat text, one expression per line.  Entries are
kept only when they plausibly contain a verb, since downstream matching
targets verbal idioms; non-verbal fixed expressions ("at arm's length")
would only produce noise.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Iterable

from .errors import ContractViolation, ParseError


class LightVerbVariant(Enum):
    DATASET_SIX = "dataset_six"
    WMT_TEN = "wmt_ten"


_LIGHT_VERBS = {
    LightVerbVariant.DATASET_SIX: frozenset(
        {"do", "get", "give", "have", "make", "take"}),
    LightVerbVariant.WMT_TEN: frozenset(
        {"have", "take", "make", "get", "put", "give", "pay", "do", "offer", "raise"}),
}


@dataclass(frozen=True)
class LightVerbSet:
    variant: LightVerbVariant
    verbs: frozenset[str]


def light_verb_set(variant: LightVerbVariant | str) -> LightVerbSet:
    if isinstance(variant, str):
        try:
            variant = LightVerbVariant(variant)
        except ValueError:
            raise ContractViolation(f"unknown light-verb variant {variant!r}") from None
    return LightVerbSet(variant=variant, verbs=_LIGHT_VERBS[variant])


@dataclass(frozen=True)
class IdiomEntry:
    canonical: tuple[str, ...]
    surface_form: str
    contains_verb: bool

    def __post_init__(self):
        if not self.canonical or any(not part for part in self.canonical):
            raise ContractViolation(
                f"idiom {self.surface_form!r} has an empty canonical form")


@dataclass(frozen=True)
class IdiomLexicon:
    entries: frozenset[IdiomEntry]
    source_label: str = ""

    def __post_init__(self):
        seen = set()
        for entry in self.entries:
            if entry.canonical in seen:
                raise ContractViolation(
                    f"duplicate canonical form {entry.canonical!r}")
            seen.add(entry.canonical)

    def __len__(self):
        return len(self.entries)

    def ordered(self) -> list[IdiomEntry]:
        """Entries in a stable order for deterministic matching."""
        return sorted(self.entries, key=lambda e: e.canonical)


def normalize_idiom(text: str) -> tuple[str, ...]:
    """Lowercase and split an idiom line, detaching possessive clitics."""
    parts: list[str] = []
    for chunk in text.lower().split():
        if len(chunk) > 2 and chunk.endswith("'s"):
            parts.append(chunk[:-2])
            parts.append("'s")
        else:
            parts.append(chunk)
    return tuple(parts)


def load_idiom_lexicon(lines: Iterable[str], verb_lemmas: Iterable[str],
                       source_label: str = "") -> IdiomLexicon:
    """Read one idiom per line, keeping only verb-containing entries.

    A line may carry a tab-separated "verb" flag to force retention when
    none of its words is in `verb_lemmas`.  Duplicates (after
    normalization) collapse silently; verbless entries are dropped.
    """
    verbs = {v.strip().lower() for v in verb_lemmas if v.strip()}
    entries: dict[tuple[str, ...], IdiomEntry] = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        surface, _, flag = line.partition("\t")
        surface = surface.strip()
        marked = flag.strip().lower() in {"v", "verb"}
        if not surface:
            raise ParseError("idiom line holds only a flag", line=line_no)
        canonical = normalize_idiom(surface)
        contains_verb = marked or any(part in verbs for part in canonical)
        if not contains_verb:
            continue
        entries.setdefault(canonical, IdiomEntry(
            canonical=canonical, surface_form=surface, contains_verb=True))
    return IdiomLexicon(entries=frozenset(entries.values()), source_label=source_label)


def default_verb_lemmas() -> frozenset[str]:
    """English verb lemmas shipped with the package."""
    text = resources.files("vmweval").joinpath("data/verb_lemmas.txt").read_text("utf-8")
    return frozenset(
        line.strip() for line in text.splitlines()
        if line.strip() and not line.startswith("#"))


def lexicon_to_json(lex: IdiomLexicon) -> str:
    return json.dumps({
        "source_label": lex.source_label,
        "entries": [
            {"canonical": list(e.canonical), "surface_form": e.surface_form}
            for e in lex.ordered()
        ],
    }, ensure_ascii=False, indent=2)


def lexicon_from_json(text: str) -> IdiomLexicon:
    obj = json.loads(text)
    entries = frozenset(
        IdiomEntry(canonical=tuple(e["canonical"]),
                   surface_form=e["surface_form"],
                   contains_verb=True)
        for e in obj["entries"])
    return IdiomLexicon(entries=entries, source_label=obj.get("source_label", ""))
