"""Exception types raised across the toolkit.

Everything derives from BookdistError so callers can catch broadly;
most also subclass ValueError so generic validation handling still works.
"""


class BookdistError(Exception):
    pass


class ConfigError(BookdistError, ValueError):
    pass


# --- ingestion ---

class MissingFileError(BookdistError, FileNotFoundError):
    pass


class EmptyAfterStripError(BookdistError, ValueError):
    """File contained nothing but boilerplate (or nothing at all)."""


class NoChaptersFoundError(BookdistError, ValueError):
    """Segmentation rule matched nothing in the book text."""


class DuplicateLabelError(BookdistError, ValueError):
    pass


class EmptyCorpusError(BookdistError, ValueError):
    pass


# --- text preparation / matrix building ---

class EmptyVocabularyError(BookdistError, ValueError):
    pass


# --- distance kernels ---

class DimensionMismatchError(BookdistError, ValueError):
    pass


class ZeroVectorError(BookdistError, ValueError):
    """Cosine similarity is undefined for a zero vector."""


class NegativeEntryError(BookdistError, ValueError):
    """Weighted Jaccard requires non-negative entries."""


class UnknownBookError(BookdistError, KeyError):
    pass


# --- clustering ---

class KTooLargeError(BookdistError, ValueError):
    pass


class EmptyInputError(BookdistError, ValueError):
    pass


class NonFiniteInputError(BookdistError, ValueError):
    pass


# --- classification ---

class TooFewChaptersError(BookdistError, ValueError):
    """Stratified split needs at least two chapters per book."""


class EmptyTrainError(BookdistError, ValueError):
    pass


class LengthMismatchError(BookdistError, ValueError):
    pass


# --- pipeline ---

class MissingUpstreamArtifactError(BookdistError, FileNotFoundError):
    """A stage was invoked before the stage that produces its inputs."""
