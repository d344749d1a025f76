"""Corpus handling and frequency-ranked vocabularies with a shortlist boundary."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable
from pathlib import Path

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
RESERVED = (BOS, EOS, UNK)
BOS_ID = 0
EOS_ID = 1
UNK_ID = 2

Sentence = list[str]
Corpus = list[Sentence]


def load_corpus(path: str | Path) -> Corpus:
    """Read one whitespace-tokenized sentence per line.  Blank lines are dropped."""
    sentences: Corpus = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tokens = line.split()
            if tokens:
                sentences.append(tokens)
    if not sentences:
        raise ValueError(f"empty corpus: {path}")
    return sentences


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sentence in corpus:
            fh.write(" ".join(sentence) + "\n")


class Vocabulary:
    """Ordered word<->id map with reserved tokens and a shortlist boundary.

    Ids are contiguous from 0.  Ids 0/1/2 are the sentence-begin, sentence-end
    and unknown tokens and always sit inside the shortlist.  Words with id
    below ``shortlist_size`` are modeled with explicit embedding columns; the
    remaining ids form the tail, covered only by full-vocabulary models and
    the probability redistribution policies.
    """

    def __init__(self, words: Iterable[str], shortlist_size: int):
        self.words: list[str] = list(words)
        self.shortlist_size = int(shortlist_size)
        if self.words[:3] != list(RESERVED):
            raise ValueError("ids 0, 1, 2 must be <s>, </s>, <unk> in that order")
        if not 3 <= self.shortlist_size <= len(self.words):
            raise ValueError(
                f"shortlist_size {self.shortlist_size} outside [3, {len(self.words)}]"
            )
        self._ids: dict[str, int] = {w: i for i, w in enumerate(self.words)}
        if len(self._ids) != len(self.words):
            raise ValueError("vocabulary contains duplicate words")
        for w in self.words:
            if not w or w.split() != [w]:
                raise ValueError(f"word contains whitespace or is empty: {w!r}")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.words == other.words and self.shortlist_size == other.shortlist_size

    def encode(self, token: str, shortlist_only: bool = False) -> int:
        """Map a token to its id.

        Tokens absent from the vocabulary map to the unknown id.  With
        ``shortlist_only`` set, tail tokens also collapse to the unknown id,
        which is how training and scoring streams for the explicit-column
        model are built.
        """
        idx = self._ids.get(token, UNK_ID)
        if shortlist_only and idx >= self.shortlist_size:
            return UNK_ID
        return idx

    def decode(self, idx: int) -> str:
        if not 0 <= idx < len(self.words):
            raise IndexError(f"word id {idx} out of range [0, {len(self.words)})")
        return self.words[idx]

    def is_shortlist(self, token: str) -> bool:
        idx = self._ids.get(token)
        return idx is not None and idx < self.shortlist_size

    @property
    def shortlist_words(self) -> list[str]:
        return self.words[: self.shortlist_size]

    @property
    def tail_words(self) -> list[str]:
        return self.words[self.shortlist_size :]

    def to_text(self) -> str:
        lines = [f"#shortlist={self.shortlist_size}"]
        lines.extend(self.words)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Vocabulary:
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#shortlist="):
            raise ValueError("vocabulary file must start with a #shortlist=<n> header")
        try:
            shortlist_size = int(lines[0].split("=", 1)[1])
        except ValueError as err:
            raise ValueError(f"bad shortlist header: {lines[0]!r}") from err
        return cls(lines[1:], shortlist_size)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Vocabulary:
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def build_vocabulary(corpus: Corpus, shortlist_size: int, full_size: int) -> Vocabulary:
    """Build a vocabulary from corpus frequencies.

    Words are ranked by descending frequency, ties broken lexicographically.
    The three reserved tokens always occupy ids 0..2 and count toward both
    sizes.  When the corpus has fewer unique words than requested, the
    shortlist and the full vocabulary shrink to what exists.
    """
    if not corpus:
        raise ValueError("empty corpus")
    if shortlist_size < 3:
        raise ValueError("shortlist_size must be at least 3 (reserved tokens)")
    if full_size < shortlist_size:
        raise ValueError("full_size must be >= shortlist_size")
    counts = Counter()
    for sentence in corpus:
        counts.update(sentence)
    for token in RESERVED:
        counts.pop(token, None)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    kept = [w for w, _ in ranked[: full_size - 3]]
    words = list(RESERVED) + kept
    return Vocabulary(words, min(shortlist_size, len(words)))
