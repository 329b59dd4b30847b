"""Load raw book texts, segment them into chapters, assemble the corpus.

Segmentation is rule-driven so that every split is explicit and
reproducible. Four rule kinds are supported:

  numbered-chapter    headings that are bare chapter numbers ("1.", "IV", ...)
  verse-prefix        verse markers "N:M." grouped by the chapter number N
  heading-regex       user-supplied heading pattern, matched per line
  pre-split-directory one chapter per file, in filename order
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateLabelError,
    EmptyAfterStripError,
    EmptyCorpusError,
    MissingFileError,
    NoChaptersFoundError,
)
from .labels import BookLabel

log = logging.getLogger(__name__)

SEG_KINDS = ("numbered-chapter", "verse-prefix", "heading-regex", "pre-split-directory")

# Default heading for "numbered-chapter": a line holding just an arabic or
# roman numeral, optionally dotted or prefixed with CHAPTER/PART.
_NUMBERED_DEFAULT = r"^\s*(?:(?:CHAPTER|Chapter|PART|Part)\s+)?(?:\d+|[IVXLCDM]+)\.?\s*$"
_VERSE_DEFAULT = r"(\d+):(\d+)\."

# Files from the pre-split-directory rule are joined on form feeds so a
# RawBook is always a single text.
_PAGE_SEP = "\x0c"

_GUTENBERG_START = re.compile(r"^\s*\*\*\*\s*START OF (?:THE|THIS) PROJECT GUTENBERG.*$", re.MULTILINE | re.IGNORECASE)
_GUTENBERG_END = re.compile(r"^\s*\*\*\*\s*END OF (?:THE|THIS) PROJECT GUTENBERG.*$", re.MULTILINE | re.IGNORECASE)


@dataclass(frozen=True)
class SegRule:
    """How one book is cut into chapters."""

    kind: str
    pattern: str = ""

    def __post_init__(self):
        if self.kind not in SEG_KINDS:
            raise ValueError(f"unknown segmentation rule kind: {self.kind!r}")
        # fail early on a broken pattern
        if self.kind in ("verse-prefix", "heading-regex", "numbered-chapter"):
            re.compile(self.effective_pattern())

    def effective_pattern(self) -> str:
        if self.pattern:
            return self.pattern
        if self.kind == "numbered-chapter":
            return _NUMBERED_DEFAULT
        if self.kind == "verse-prefix":
            return _VERSE_DEFAULT
        return self.pattern


@dataclass(frozen=True)
class Chapter:
    book: BookLabel
    index: int
    raw_text: str


@dataclass(frozen=True)
class RawBook:
    label: BookLabel
    source_path: Path
    text: str
    rule: SegRule


@dataclass(frozen=True)
class Corpus:
    chapters: tuple[Chapter, ...]
    per_book_counts: dict[BookLabel, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.chapters)

    def books(self) -> tuple[BookLabel, ...]:
        seen = []
        for ch in self.chapters:
            if ch.book not in seen:
                seen.append(ch.book)
        return tuple(seen)

    def chapters_of(self, book: BookLabel) -> tuple[Chapter, ...]:
        return tuple(ch for ch in self.chapters if ch.book == book)


def strip_gutenberg(text: str) -> str:
    """Return the text strictly between the START/END sentinel lines.

    Texts without the sentinels pass through unchanged, which also makes
    the operation idempotent.
    """
    start = _GUTENBERG_START.search(text)
    end = _GUTENBERG_END.search(text)
    if start and end and start.end() < end.start():
        return text[start.end():end.start()]
    if start and not end:
        return text[start.end():]
    if end and not start:
        return text[:end.start()]
    return text


def _read_text(path: Path) -> str:
    data = path.read_bytes()
    text = data.decode("utf-8", errors="replace")
    return text.replace("\r\n", "\n").replace("\r", "\n")


def load_book(path, label: BookLabel, rule: SegRule) -> RawBook:
    """Read a source file (or pre-split directory), strip boilerplate."""
    path = Path(path)
    if not path.exists():
        raise MissingFileError(str(path))

    if rule.kind == "pre-split-directory":
        if not path.is_dir():
            raise MissingFileError(f"{path} is not a directory")
        files = sorted(p for p in path.iterdir() if p.is_file() and p.suffix == ".txt")
        parts = [strip_gutenberg(_read_text(p)).strip() for p in files]
        text = _PAGE_SEP.join(p for p in parts if p)
    else:
        text = strip_gutenberg(_read_text(path)).strip()

    if not text.strip():
        raise EmptyAfterStripError(f"{path}: no text left after boilerplate stripping")
    return RawBook(label=label, source_path=path, text=text, rule=rule)


def _segment_headings(text: str, pattern: str) -> list[str]:
    """Split at heading lines; the headings themselves are dropped."""
    rx = re.compile(pattern, re.MULTILINE)
    matches = list(rx.finditer(text))
    if not matches:
        return []
    pieces = []
    for i, m in enumerate(matches):
        lo = m.end()
        hi = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        pieces.append(text[lo:hi].strip())
    return [p for p in pieces if p]


def _segment_verses(text: str, pattern: str) -> list[str]:
    """Group verse texts "N:M. ..." by their shared chapter number N.

    Text before the first verse marker (introductions, headings) is dropped.
    Chapters are emitted in order of first appearance.
    """
    rx = re.compile(pattern)
    matches = list(rx.finditer(text))
    if not matches:
        return []
    by_chapter: dict[str, list[str]] = {}
    order: list[str] = []
    for i, m in enumerate(matches):
        lo = m.end()
        hi = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        chap = m.group(1)
        if chap not in by_chapter:
            by_chapter[chap] = []
            order.append(chap)
        verse = text[lo:hi].strip()
        if verse:
            by_chapter[chap].append(verse)
    return [" ".join(by_chapter[c]) for c in order if by_chapter[c]]


def segment(book: RawBook) -> list[Chapter]:
    """Cut a book into ordered chapters according to its rule."""
    rule = book.rule
    if rule.kind == "pre-split-directory":
        pieces = [p.strip() for p in book.text.split(_PAGE_SEP) if p.strip()]
    elif rule.kind == "verse-prefix":
        pieces = _segment_verses(book.text, rule.effective_pattern())
    else:  # numbered-chapter, heading-regex
        pieces = _segment_headings(book.text, rule.effective_pattern())

    if not pieces:
        raise NoChaptersFoundError(
            f"{book.label}: rule {rule.kind!r} matched nothing in {book.source_path}"
        )
    return [Chapter(book=book.label, index=i, raw_text=p) for i, p in enumerate(pieces)]


def build_corpus(books: list[RawBook], min_chapter_tokens: int = 0) -> Corpus:
    """Segment every book and concatenate the chapters in book order.

    Chapters with fewer than `min_chapter_tokens` whitespace tokens are
    dropped with a warning (their original indices are preserved, so a
    drop leaves a visible gap).
    """
    if not books:
        raise EmptyCorpusError("no books given")
    labels = [b.label for b in books]
    if len(set(labels)) != len(labels):
        raise DuplicateLabelError(f"duplicate book labels in {labels}")

    chapters: list[Chapter] = []
    counts: dict[BookLabel, int] = {}
    for book in books:
        kept = 0
        for ch in segment(book):
            if min_chapter_tokens and len(ch.raw_text.split()) < min_chapter_tokens:
                log.warning(
                    "dropping %s chapter %d: fewer than %d tokens",
                    ch.book, ch.index, min_chapter_tokens,
                )
                continue
            chapters.append(ch)
            kept += 1
        counts[book.label] = kept
    if not chapters:
        raise EmptyCorpusError("all chapters were dropped")
    return Corpus(chapters=tuple(chapters), per_book_counts=counts)


# --- stage handoff files ---

def write_manifest(corpus: Corpus, path) -> None:
    """Corpus manifest: one JSON line per chapter {book, index, n_chars}."""
    with open(path, "w", encoding="utf-8") as fh:
        for ch in corpus.chapters:
            rec = {"book": ch.book.id, "index": ch.index, "n_chars": len(ch.raw_text)}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def write_chapters(corpus: Corpus, path) -> None:
    """Full chapter records (text included) for downstream stages."""
    with open(path, "w", encoding="utf-8") as fh:
        for ch in corpus.chapters:
            rec = {
                "book": ch.book.id,
                "book_name": ch.book.display_name,
                "index": ch.index,
                "text": ch.raw_text,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_chapters(path) -> Corpus:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(str(path))
    chapters = []
    counts: dict[BookLabel, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            label = BookLabel(rec["book"], rec.get("book_name", ""))
            ch = Chapter(book=label, index=rec["index"], raw_text=rec["text"])
            chapters.append(ch)
            counts[label] = counts.get(label, 0) + 1
    if not chapters:
        raise EmptyCorpusError(f"{path} holds no chapters")
    return Corpus(chapters=tuple(chapters), per_book_counts=counts)
