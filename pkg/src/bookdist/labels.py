"""Book labels and the canonical eight-book registry."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnknownBookError


@dataclass(frozen=True, order=True)
class BookLabel:
    """A supervised book label. Ordering follows the id (g1 < g2 < ...)."""

    id: str
    display_name: str = ""

    def __post_init__(self):
        if not self.id:
            raise ValueError("label id must be non-empty")
        if not self.display_name:
            object.__setattr__(self, "display_name", self.id)

    def __str__(self) -> str:
        return self.id


# The canonical corpus: ids g1..g8 and their display names.
CANONICAL_BOOKS = (
    BookLabel("g1", "Buddhism"),
    BookLabel("g2", "TaoTeChing"),
    BookLabel("g3", "Upanishad"),
    BookLabel("g4", "YogaSutra"),
    BookLabel("g5", "Proverb"),
    BookLabel("g6", "Ecclesiastes"),
    BookLabel("g7", "Ecclesiasticus"),
    BookLabel("g8", "Wisdom"),
)

BOOKS_BY_ID = {b.id: b for b in CANONICAL_BOOKS}
BOOKS_BY_NAME = {b.display_name: b for b in CANONICAL_BOOKS}

# Node names used in cluster-network exports.
ABBREVIATIONS = {
    "Buddhism": "Bdd",
    "TaoTeChing": "Tao",
    "Upanishad": "Upd",
    "YogaSutra": "Yoga",
    "Proverb": "Prv",
    "Ecclesiastes": "Ecc",
    "Ecclesiasticus": "Ecs",
    "Wisdom": "Wsd",
}


def abbreviation(label: BookLabel) -> str:
    """Short node name for graph exports; falls back to the display name."""
    return ABBREVIATIONS.get(label.display_name, label.display_name)


def canonical_label(key: str) -> BookLabel:
    """Look up one of the eight canonical books by id or display name."""
    if key in BOOKS_BY_ID:
        return BOOKS_BY_ID[key]
    if key in BOOKS_BY_NAME:
        return BOOKS_BY_NAME[key]
    raise UnknownBookError(key)
