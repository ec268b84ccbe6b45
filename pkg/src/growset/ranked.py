"""Ranked lists with scores: the unit of all rank ensembling."""
from __future__ import annotations

from typing import Any, Callable, Generic, Hashable, Iterator, Mapping, Sequence, TypeVar

K = TypeVar("K", bound=Hashable)


class RankedList(Generic[K]):
    """An ordered list of (key, score) pairs, best first, with 1-based ranks.

    Ordering is always deterministic: descending score, then ascending
    tie key (the key itself by default, e.g. a surface string).
    """

    __slots__ = ("_entries", "_ranks")

    def __init__(self, entries: Sequence[tuple[K, float]]):
        self._entries: tuple[tuple[K, float], ...] = tuple(entries)
        self._ranks: dict[K, int] = {key: i + 1 for i, (key, _) in enumerate(self._entries)}
        if len(self._ranks) != len(self._entries):
            raise ValueError("duplicate keys in ranked list")

    @classmethod
    def from_scores(
        cls,
        scores: Mapping[K, float],
        tie_key: Callable[[K], Any] | None = None,
    ) -> "RankedList[K]":
        key_fn = tie_key if tie_key is not None else (lambda k: k)
        ordered = sorted(scores.items(), key=lambda kv: (-kv[1], key_fn(kv[0])))
        return cls(ordered)

    def rank(self, key: K) -> int:
        return self._ranks[key]

    def score(self, key: K) -> float:
        return self._entries[self._ranks[key] - 1][1]

    def keys(self) -> tuple[K, ...]:
        return tuple(key for key, _ in self._entries)

    def key_set(self) -> frozenset[K]:
        return frozenset(self._ranks)

    def top(self, n: int) -> tuple[tuple[K, float], ...]:
        return self._entries[:n]

    @property
    def entries(self) -> tuple[tuple[K, float], ...]:
        return self._entries

    def __contains__(self, key: object) -> bool:
        return key in self._ranks

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[tuple[K, float]]:
        return iter(self._entries)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        head = ", ".join(f"{k!r}:{s:.4f}" for k, s in self._entries[:4])
        tail = ", ..." if len(self._entries) > 4 else ""
        return f"RankedList([{head}{tail}], n={len(self._entries)})"
