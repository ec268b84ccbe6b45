"""Probing queries from Hearst patterns and candidate class-name generation.

Two query families share the six patterns: class probes mask the hypernym
slot to elicit class names for a set of entities, and entity probes mask
the hyponym slot to characterize a class name's typical contexts.
"""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterator, Sequence

if TYPE_CHECKING:  # pragma: no cover
    from growset.lm import LmClient

MASK = "[MASK]"

# Leading tokens that disqualify a candidate as a noun phrase: conjunctions,
# prepositions, determiners, pronouns, and punctuation.
NON_NP_LEADING_TOKENS = frozenset(
    """
    and or but nor so yet either neither
    a an the this that these those such some any no every each
    of in on at by for with to from as into onto about over under after
    before between among through during against within without upon
    he she it they we you i his her its their our your my
    who whom whose which what
    , . ; : ! ? ' " ( ) [ ] { } - -- ...
    """.split()
)


@dataclass(frozen=True)
class HearstPattern:
    """A lexico-syntactic template with a hypernym slot and a hyponym slot."""

    id: int
    template: str  # uses {y} for the hypernym slot and {a} for the hyponym slot

    def render(self, hypernym: str, hyponym: str) -> str:
        return self.template.format(y=hypernym, a=hyponym)


HEARST_PATTERNS: tuple[HearstPattern, ...] = (
    HearstPattern(1, "{y} such as {a}"),
    HearstPattern(2, "such {y} as {a}"),
    HearstPattern(3, "{a} or other {y}"),
    HearstPattern(4, "{a} and other {y}"),
    HearstPattern(5, "{y}, including {a}"),
    HearstPattern(6, "{y}, especially {a}"),
)


@dataclass(frozen=True)
class ProbeQuery:
    """A word sequence containing exactly one mask token."""

    text: str
    mask_index: int  # position of the token containing the mask

    def __post_init__(self) -> None:
        if self.text.count(MASK) != 1:
            raise ValueError(f"query must contain exactly one {MASK}: {self.text!r}")

    @classmethod
    def from_text(cls, text: str) -> "ProbeQuery":
        count = text.count(MASK)
        if count != 1:
            raise ValueError(f"query must contain exactly one {MASK}, found {count}: {text!r}")
        index = next(i for i, tok in enumerate(text.split()) if MASK in tok)
        return cls(text=text, mask_index=index)

    def extend_after_mask(self, word: str) -> "ProbeQuery":
        """New query with `word` inserted directly after the mask token."""
        return ProbeQuery.from_text(self.text.replace(MASK, f"{MASK} {word}", 1))


@dataclass(frozen=True)
class ClassName:
    """A 1..3-word candidate class name, case-folded."""

    tokens: tuple[str, ...]
    surface: str = field(init=False)

    def __post_init__(self) -> None:
        if not 1 <= len(self.tokens) <= 3:
            raise ValueError(f"class name must have 1..3 tokens, got {self.tokens!r}")
        object.__setattr__(self, "tokens", tuple(t.casefold() for t in self.tokens))
        object.__setattr__(self, "surface", " ".join(self.tokens))

    @classmethod
    def from_surface(cls, surface: str) -> "ClassName":
        return cls(tuple(surface.split()))


def is_noun_phrase(tokens: Sequence[str]) -> bool:
    """Heuristic noun-phrase filter.

    Rejects candidates led by a conjunction/preposition/determiner/pronoun
    or punctuation, and candidates whose head (final) token is not
    alphabetic. Deliberately avoids a POS tagger.
    """
    if not tokens:
        return False
    return tokens[0].casefold() not in NON_NP_LEADING_TOKENS and tokens[-1].isalpha()


class CandidateClassPool:
    """Deduplicated candidate class names with generation counts.

    Deduplication is case-insensitive on the surface form; the counts are
    diagnostics only and never feed the ranking.
    """

    def __init__(self) -> None:
        self._by_surface: dict[str, ClassName] = {}
        self._counts: Counter[str] = Counter()

    def add(self, name: ClassName) -> None:
        self._by_surface.setdefault(name.surface, name)
        self._counts[name.surface] += 1

    @property
    def names(self) -> tuple[ClassName, ...]:
        return tuple(self._by_surface[s] for s in sorted(self._by_surface))

    def generation_count(self, name: ClassName | str) -> int:
        surface = name if isinstance(name, str) else name.surface
        return self._counts[surface]

    def __contains__(self, name: object) -> bool:
        if isinstance(name, ClassName):
            return name.surface in self._by_surface
        return name in self._by_surface

    def __len__(self) -> int:
        return len(self._by_surface)

    def __iter__(self) -> Iterator[ClassName]:
        return iter(self.names)


def serialize_entity_list(entities: Sequence[str]) -> str:
    """Render three entity surfaces as the list "A, B, and C"."""
    if len(entities) != 3:
        raise ValueError(f"expected exactly 3 entities, got {len(entities)}")
    return f"{entities[0]}, {entities[1]}, and {entities[2]}"


def render_class_probe(pattern: HearstPattern, entities: Sequence[str]) -> ProbeQuery:
    """Class-probing query: hypernym slot masked, hyponym slot = entity list."""
    if len(entities) != 3 or len({e.casefold() for e in entities}) != 3:
        raise ValueError("class probe requires exactly 3 distinct entity surfaces")
    return ProbeQuery.from_text(pattern.render(MASK, serialize_entity_list(entities)))


def render_entity_probes(class_name: ClassName) -> list[ProbeQuery]:
    """One entity-probing query per Hearst pattern, hyponym slot masked."""
    return [
        ProbeQuery.from_text(p.render(class_name.surface, MASK)) for p in HEARST_PATTERNS
    ]


def generate_class_names(
    entities: Sequence[str],
    lm: "LmClient",
    rng: random.Random,
    *,
    beam_width: int = 3,
    max_len: int = 3,
    num_samples: int = 30,
) -> CandidateClassPool:
    """Generate the multi-gram candidate class-name pool.

    Each sample draws 3 entities (without replacement) and one pattern
    uniformly at random, then expands a prediction tree: the top
    `beam_width` tokens at each node fill the mask, and each token also
    spawns a new query with the mask re-inserted before it as a modifier
    slot, down to names of `max_len` words. All noun-phrase candidates are
    pooled; duplicates are counted, not re-added.
    """
    if len(entities) < 3:
        raise ValueError("class-name generation requires at least 3 entities")
    if beam_width < 1 or max_len < 1 or num_samples < 1:
        raise ValueError("beam_width, max_len, and num_samples must be >= 1")

    pool = CandidateClassPool()
    for _ in range(num_samples):
        triple = rng.sample(list(entities), 3)
        pattern = rng.choice(HEARST_PATTERNS)
        frontier: list[tuple[ProbeQuery, tuple[str, ...]]] = [
            (render_class_probe(pattern, triple), ())
        ]
        for depth in range(1, max_len + 1):
            next_frontier: list[tuple[ProbeQuery, tuple[str, ...]]] = []
            for query, suffix in frontier:
                for prediction in lm.predict_masked(query, beam_width):
                    tokens = (prediction.token.casefold(),) + suffix
                    if is_noun_phrase(tokens):
                        pool.add(ClassName(tokens))
                    if depth < max_len:
                        next_frontier.append((query.extend_after_mask(prediction.token), tokens))
            frontier = next_frontier
    return pool
