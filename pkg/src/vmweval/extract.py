"""Candidate extraction for the three targeted VMWE categories.

VID candidates come from fuzzy idiom-lexicon matching over lemmas, VPC
and LVC candidates from dependency arcs.  Extraction is deliberately
recall-oriented: a downstream classifier decides which candidates are
genuine, so borderline hits are kept.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Union

from .corpus import Corpus, Sentence
from .errors import ContractViolation, ParseError
from .lexicon import IdiomEntry, IdiomLexicon, LightVerbSet
from .stats import bleu4

DEFAULT_VID_THRESHOLD = 0.6

# Both the spaCy-style and UD-style labels for verb particles occur in
# parsed English corpora.
PARTICLE_RELATIONS = frozenset({"prt", "compound:prt"})
OBJECT_RELATIONS = frozenset({"obj", "dobj"})


class Category(Enum):
    VID = "VID"
    VPC = "VPC"
    LVC = "LVC"


@dataclass(frozen=True)
class VidEvidence:
    idiom: IdiomEntry
    match_score: float


@dataclass(frozen=True)
class VpcEvidence:
    verb_index: int
    particle_index: int


@dataclass(frozen=True)
class LvcEvidence:
    verb_index: int
    noun_index: int


Evidence = Union[VidEvidence, VpcEvidence, LvcEvidence]


@dataclass(frozen=True)
class VMWECandidate:
    sentence_id: str
    category: Category
    span: tuple[int, ...]
    evidence: Evidence

    def __post_init__(self):
        if not self.span or list(self.span) != sorted(set(self.span)):
            raise ContractViolation(
                f"candidate span must be strictly increasing, got {self.span}")

    @property
    def ref(self) -> str:
        """Stable identifier used to join stage outputs."""
        joined = ".".join(str(i) for i in self.span)
        return f"{self.sentence_id}#{self.category.value}#{joined}"

    def surface(self, sentence: Sentence) -> str:
        return " ".join(sentence.tokens[i - 1].surface for i in self.span)


def match_idioms(sentence: Sentence, lexicon: IdiomLexicon,
                 threshold: float = DEFAULT_VID_THRESHOLD) -> list[VMWECandidate]:
    """Fuzzy-match lexicon idioms against the sentence lemmas.

    For each idiom, windows of the idiom length up to two extra tokens
    slide over the lemmas and are scored with BLEU-4 against the idiom's
    canonical form.  Only the best window per idiom survives, and only if
    it reaches `threshold`.  Ties prefer the shorter, then leftmost
    window.
    """
    lemmas = sentence.lemmas()
    candidates = []
    for idiom in lexicon.ordered():
        size = len(idiom.canonical)
        best = None
        for length in range(size, min(size + 2, len(lemmas)) + 1):
            for start in range(0, len(lemmas) - length + 1):
                score = bleu4(lemmas[start:start + length], list(idiom.canonical))
                if best is None or score > best[0]:
                    best = (score, start, length)
        if best is None or best[0] < threshold:
            continue
        score, start, length = best
        candidates.append(VMWECandidate(
            sentence_id=sentence.id,
            category=Category.VID,
            span=tuple(range(start + 1, start + length + 1)),
            evidence=VidEvidence(idiom=idiom, match_score=score),
        ))
    candidates.sort(key=lambda c: (c.span[0], len(c.span), c.evidence.idiom.canonical))
    return candidates


def _require_dependencies(sentence: Sentence, op: str):
    if not sentence.has_dependencies:
        raise ContractViolation(f"{op} needs a dependency-parsed sentence "
                                f"(sentence {sentence.id!r} has none)")


def extract_vpc(sentence: Sentence,
                relations: frozenset[str] = PARTICLE_RELATIONS) -> list[VMWECandidate]:
    """One candidate per particle arc whose governor is a verb."""
    _require_dependencies(sentence, "extract_vpc")
    candidates = []
    for tok in sentence.tokens:
        if tok.deprel not in relations or tok.head == 0:
            continue
        head = sentence.tokens[tok.head - 1]
        if head.upos != "VERB":
            continue
        span = tuple(sorted((head.index, tok.index)))
        candidates.append(VMWECandidate(
            sentence_id=sentence.id,
            category=Category.VPC,
            span=span,
            evidence=VpcEvidence(verb_index=head.index, particle_index=tok.index),
        ))
    candidates.sort(key=lambda c: c.span)
    return candidates


def extract_lvc(sentence: Sentence, light_verbs: LightVerbSet) -> list[VMWECandidate]:
    """Light verb + noun object pairs.

    Any noun whose object arc points at a light verb qualifies; no
    attempt is made to verify the noun is eventive, that is the
    classifier's job.
    """
    _require_dependencies(sentence, "extract_lvc")
    candidates = []
    for tok in sentence.tokens:
        if tok.upos != "NOUN" or tok.deprel not in OBJECT_RELATIONS or tok.head == 0:
            continue
        head = sentence.tokens[tok.head - 1]
        if head.upos != "VERB" or head.lemma not in light_verbs.verbs:
            continue
        span = tuple(sorted((head.index, tok.index)))
        candidates.append(VMWECandidate(
            sentence_id=sentence.id,
            category=Category.LVC,
            span=span,
            evidence=LvcEvidence(verb_index=head.index, noun_index=tok.index),
        ))
    candidates.sort(key=lambda c: c.span)
    return candidates


def is_non_vmwe(sentence: Sentence, lexicon: IdiomLexicon, light_verbs: LightVerbSet,
                threshold: float = DEFAULT_VID_THRESHOLD) -> bool:
    """True when no extractor finds anything; used to build control sets."""
    return (not match_idioms(sentence, lexicon, threshold)
            and not extract_vpc(sentence)
            and not extract_lvc(sentence, light_verbs))


def sample_non_vmwe(corpus: Corpus, n: int, seed: int, lexicon: IdiomLexicon,
                    light_verbs: LightVerbSet,
                    threshold: float = DEFAULT_VID_THRESHOLD,
                    ) -> tuple[list[Sentence], bool]:
    """Seeded uniform sample of clean sentences, without replacement.

    Returns the sample in corpus order plus a shortfall flag that is True
    when fewer than `n` sentences qualified (in which case all of them
    are returned).
    """
    if n < 0:
        raise ContractViolation(f"sample size must be >= 0, got {n}")
    qualifying = [s for s in corpus
                  if is_non_vmwe(s, lexicon, light_verbs, threshold)]
    if len(qualifying) <= n:
        return list(qualifying), len(qualifying) < n
    order = {s.id: i for i, s in enumerate(qualifying)}
    picked = random.Random(seed).sample(qualifying, n)
    picked.sort(key=lambda s: order[s.id])
    return picked, False


def extract_all(sentence: Sentence, lexicon: IdiomLexicon, light_verbs: LightVerbSet,
                threshold: float = DEFAULT_VID_THRESHOLD,
                categories: Iterable[Category] = tuple(Category),
                ) -> list[VMWECandidate]:
    wanted = set(categories)
    out: list[VMWECandidate] = []
    if Category.VID in wanted:
        out.extend(match_idioms(sentence, lexicon, threshold))
    if Category.VPC in wanted:
        out.extend(extract_vpc(sentence))
    if Category.LVC in wanted:
        out.extend(extract_lvc(sentence, light_verbs))
    return out


def rebuild_candidate(sentence: Sentence, category: Category,
                      span: tuple[int, ...]) -> VMWECandidate:
    """Reconstruct a candidate from its span, for downstream stages.

    Stage outputs carry only (sentence_id, category, span); the evidence
    is recovered from the sentence itself.
    """
    if any(i < 1 or i > len(sentence.tokens) for i in span):
        raise ContractViolation(
            f"span {span} is out of range for sentence {sentence.id!r}")
    tokens = [sentence.tokens[i - 1] for i in span]
    if category is Category.VID:
        canonical = tuple(t.lemma for t in tokens)
        evidence: Evidence = VidEvidence(
            idiom=IdiomEntry(canonical=canonical,
                             surface_form=" ".join(canonical),
                             contains_verb=True),
            match_score=1.0)
    elif category is Category.VPC:
        if len(span) != 2:
            raise ContractViolation(f"VPC span must have 2 indices, got {span}")
        particle = next((t for t in tokens if t.deprel in PARTICLE_RELATIONS),
                        tokens[1])
        verb = tokens[0] if particle is tokens[1] else tokens[1]
        evidence = VpcEvidence(verb_index=verb.index,
                               particle_index=particle.index)
    else:
        if len(span) != 2:
            raise ContractViolation(f"LVC span must have 2 indices, got {span}")
        noun = next((t for t in tokens if t.upos == "NOUN"), tokens[1])
        verb = tokens[0] if noun is tokens[1] else tokens[1]
        evidence = LvcEvidence(verb_index=verb.index, noun_index=noun.index)
    return VMWECandidate(sentence_id=sentence.id, category=category,
                         span=tuple(span), evidence=evidence)


def candidate_to_dict(c: VMWECandidate) -> dict:
    obj = {
        "candidate_ref": c.ref,
        "sentence_id": c.sentence_id,
        "category": c.category.value,
        "span": list(c.span),
    }
    if isinstance(c.evidence, VidEvidence):
        obj["evidence"] = {
            "idiom": {
                "canonical": list(c.evidence.idiom.canonical),
                "surface_form": c.evidence.idiom.surface_form,
            },
        }
        obj["match_score"] = c.evidence.match_score
    elif isinstance(c.evidence, VpcEvidence):
        obj["evidence"] = {
            "verb_index": c.evidence.verb_index,
            "particle_index": c.evidence.particle_index,
        }
    else:
        obj["evidence"] = {
            "verb_index": c.evidence.verb_index,
            "noun_index": c.evidence.noun_index,
        }
    return obj


def candidate_from_dict(obj: dict) -> VMWECandidate:
    try:
        category = Category(obj["category"])
        span = tuple(obj["span"])
        ev = obj["evidence"]
        if category is Category.VID:
            idiom = IdiomEntry(canonical=tuple(ev["idiom"]["canonical"]),
                               surface_form=ev["idiom"]["surface_form"],
                               contains_verb=True)
            evidence: Evidence = VidEvidence(idiom=idiom,
                                             match_score=obj["match_score"])
        elif category is Category.VPC:
            evidence = VpcEvidence(verb_index=ev["verb_index"],
                                   particle_index=ev["particle_index"])
        else:
            evidence = LvcEvidence(verb_index=ev["verb_index"],
                                   noun_index=ev["noun_index"])
        return VMWECandidate(sentence_id=obj["sentence_id"], category=category,
                             span=span, evidence=evidence)
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad candidate record: {exc}") from exc


def read_candidates(lines: Iterable[str]) -> list[VMWECandidate]:
    out = []
    for line in lines:
        line = line.strip()
        if line:
            out.append(candidate_from_dict(json.loads(line)))
    return out
