"""bookdist: chapter-level corpus distances, clustering and classification.

Ingest labeled books, segment them into chapters, build a sparse
document-term matrix, compare chapters and books under four distance
measures, cluster with seeded k-means, and benchmark three classifiers
on book-label prediction. Estimators follow the fit/transform/predict
convention and compose with scikit-learn tooling.
"""

__version__ = "0.1.0"

from .classify import (
    ClassifierSpec,
    ConfusionMatrix,
    DecisionTreeClassifier,
    KNNClassifier,
    LinearSVMClassifier,
    RandomForestClassifier,
    SplitSpec,
    benchmark,
    confusion,
    split,
)
from .cluster import (
    ClusterGraph,
    Dendrogram,
    LloydKMeans,
    Partition,
    book_dendrogram,
    book_graph,
    kmeans,
    sweep_k,
)
from .dtm import (
    LOG_RELATIVE,
    RAW,
    ChapterVectorizer,
    DocTermMatrix,
    build_dtm,
    load_dtm,
    save_dtm,
    sparsity,
)
from .ingest import (
    Chapter,
    Corpus,
    RawBook,
    SegRule,
    build_corpus,
    load_book,
    segment,
    strip_gutenberg,
)
from .labels import BOOKS_BY_ID, CANONICAL_BOOKS, BookLabel
from .similarity import (
    AGGREGATORS,
    MEASURES,
    BookDistanceMatrix,
    DistanceMatrix,
    between_book_matrix,
    chapter_distance,
    chapter_distance_matrix,
    cosine_similarity,
    dist_cosine,
    dist_euclidean,
    dist_jaccard,
    dist_manhattan,
    jaccard_similarity,
    within_book_matrix,
)
from .textprep import (
    StopwordSet,
    TokenizedChapter,
    clean_and_tokenize,
    tokenize_text,
    vocabulary,
)

__all__ = [name for name in dir() if not name.startswith("_")]
