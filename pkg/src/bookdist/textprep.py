"""Clean chapter text into lowercase bag-of-words token lists.

Cleaning rule: lowercase, then every non-alphabetic character becomes a
separator. That single rule removes digits, verse markers ("47:2."),
punctuation and special characters, and splits hyphenated or apostrophed
forms ("gnana-kanda" -> "gnana", "kanda"). Surviving tokens match [a-z]+.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import EmptyVocabularyError
from .ingest import Chapter
from .labels import BookLabel

_NON_ALPHA = re.compile(r"[^a-z]+")

# Names accepted by stopword loaders in place of a file path.
BUILTIN_STOPWORD_LISTS = ("english", "archaic")


def load_stopword_file(path) -> frozenset[str]:
    """One token per line; blank lines and '#' comments are skipped."""
    text = Path(path).read_text(encoding="utf-8")
    return _parse_stopwords(text, str(path))


def load_builtin_stopwords(name: str) -> frozenset[str]:
    if name not in BUILTIN_STOPWORD_LISTS:
        raise ValueError(f"unknown builtin stopword list: {name!r}")
    text = resources.files("bookdist.data").joinpath(f"stopwords_{name}.txt").read_text(encoding="utf-8")
    return _parse_stopwords(text, f"builtin:{name}")


def _parse_stopwords(text: str, source: str) -> frozenset[str]:
    words = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        word = line.split("#", 1)[0].strip().lower()
        if not word:
            continue
        if any(c.isspace() for c in word):
            raise ValueError(f"{source}:{lineno}: stopword {word!r} contains whitespace")
        words.add(word)
    return frozenset(words)


@dataclass(frozen=True)
class StopwordSet:
    """Base English list plus user-supplied extras (archaic forms etc.)."""

    base: frozenset[str] = field(default_factory=frozenset)
    extra: frozenset[str] = field(default_factory=frozenset)

    @property
    def words(self) -> frozenset[str]:
        return self.base | self.extra

    def __contains__(self, token: str) -> bool:
        return token in self.base or token in self.extra

    @classmethod
    def default(cls) -> "StopwordSet":
        """Bundled English list plus the bundled archaic-English list."""
        return cls(base=load_builtin_stopwords("english"),
                   extra=load_builtin_stopwords("archaic"))

    @classmethod
    def from_sources(cls, sources: list[str]) -> "StopwordSet":
        """Build from a list of file paths and/or 'builtin:<name>' entries.

        The first source becomes the base list, the rest are extras.
        """
        sets = []
        for src in sources:
            if src.startswith("builtin:"):
                sets.append(load_builtin_stopwords(src.split(":", 1)[1]))
            else:
                sets.append(load_stopword_file(src))
        if not sets:
            return cls()
        extra: frozenset[str] = frozenset()
        for s in sets[1:]:
            extra |= s
        return cls(base=sets[0], extra=extra)

    def with_extra_file(self, path) -> "StopwordSet":
        return StopwordSet(base=self.base, extra=self.extra | load_stopword_file(path))


@dataclass(frozen=True)
class TokenizedChapter:
    book: BookLabel
    index: int
    tokens: tuple[str, ...]


def tokenize_text(text: str, stops: StopwordSet | None = None) -> list[str]:
    """Lowercase, strip non-alphabetic characters, split, drop stopwords."""
    parts = _NON_ALPHA.split(text.lower())
    if stops is None:
        return [t for t in parts if t]
    return [t for t in parts if t and t not in stops]


def clean_and_tokenize(chapter: Chapter, stops: StopwordSet) -> TokenizedChapter:
    tokens = tokenize_text(chapter.raw_text, stops)
    return TokenizedChapter(book=chapter.book, index=chapter.index, tokens=tuple(tokens))


def vocabulary(chapters: list[TokenizedChapter], min_df: int = 1) -> list[str]:
    """Terms appearing in at least `min_df` distinct chapters, sorted."""
    if not chapters:
        raise EmptyVocabularyError("no chapters")
    df: dict[str, int] = {}
    for ch in chapters:
        for term in set(_tokens_of(ch)):
            df[term] = df.get(term, 0) + 1
    vocab = sorted(t for t, n in df.items() if n >= min_df)
    if not vocab:
        raise EmptyVocabularyError(f"no term reaches document frequency {min_df}")
    return vocab


def _tokens_of(chapter) -> tuple[str, ...]:
    # accept TokenizedChapter or a bare token sequence
    return chapter.tokens if hasattr(chapter, "tokens") else tuple(chapter)
