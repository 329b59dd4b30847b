"""Pipeline configuration: a documented TOML file.

Example:

    [corpus]
    min_chapter_tokens = 5

    [corpus.books.g1]
    name = "Buddhism"            # optional for the canonical ids g1..g8
    path = "books/buddhism.txt"  # relative to this file
    rule = "heading-regex"
    pattern = '^\\[\\d+\\]$'

    [textprep]
    stopwords = ["builtin:english", "builtin:archaic"]  # first = base list
    min_df = 1

    [dtm]
    weighting = "raw-frequency"   # or "log-relative-frequency"

    [distances]
    measures = ["euclidean", "manhattan", "cosine", "jaccard"]
    aggregators = ["min", "max", "mean", "median"]

    [cluster]
    measure = "euclidean"
    k_min = 2
    k_max = 7
    seed = 13
    n_restarts = 10

    [dendrogram]
    measure = "euclidean"
    aggregator = "median"

    [classify]
    seed = 42
    train_fraction = 0.7
    stratified = true
    classifiers = ["knn", "svm-linear", "random-forest"]
    knn_k = 5
    knn_measure = "euclidean"
    svm_lambda = 1e-4
    svm_epochs = 50
    forest_trees = 100
    forest_max_depth = 0          # 0 means unbounded

    [output]
    dir = "out"

All paths are resolved relative to the config file's directory. Every
random choice in the pipeline flows from the seeds above (the CLI
--seed flag overrides both).
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .classify import ClassifierSpec, SplitSpec
from .dtm import WEIGHTINGS, RAW
from .errors import ConfigError
from .ingest import SEG_KINDS, SegRule
from .labels import BOOKS_BY_ID, BookLabel
from .similarity import AGGREGATORS, MEASURES

THREADS_ENV_VAR = "BOOKDIST_THREADS"


@dataclass(frozen=True)
class BookConfig:
    label: BookLabel
    path: Path
    rule: SegRule


@dataclass(frozen=True)
class ClusterConfig:
    measure: str = "euclidean"
    k_min: int = 2
    k_max: int = 7
    seed: int = 13
    n_restarts: int = 10
    max_iter: int = 100
    tol: float = 1e-9


@dataclass(frozen=True)
class DendrogramConfig:
    measure: str = "euclidean"
    aggregator: str = "median"


@dataclass(frozen=True)
class ClassifyConfig:
    split: SplitSpec = field(default_factory=SplitSpec)
    seed: int = 42
    specs: tuple[ClassifierSpec, ...] = ()


@dataclass(frozen=True)
class PipelineConfig:
    books: tuple[BookConfig, ...]
    min_chapter_tokens: int = 5
    stopword_sources: tuple[str, ...] = ("builtin:english", "builtin:archaic")
    min_df: int = 1
    weighting: str = RAW
    measures: tuple[str, ...] = MEASURES
    aggregators: tuple[str, ...] = AGGREGATORS
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    dendrogram: DendrogramConfig = field(default_factory=DendrogramConfig)
    classify: ClassifyConfig = field(default_factory=ClassifyConfig)
    out_dir: Path = Path("out")
    threads: int = 1


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV_VAR}={raw!r} is not an integer")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _one_of(value, allowed, what: str):
    _require(value in allowed, f"{what} must be one of {list(allowed)}, got {value!r}")
    return value


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    base = path.parent

    corpus = raw.get("corpus", {})
    books_tbl = corpus.get("books", {})
    _require(bool(books_tbl), f"{path}: [corpus.books.<label>] tables are required")
    books = []
    for label_id, spec in books_tbl.items():
        _require(isinstance(spec, dict), f"book {label_id!r}: expected a table")
        _require("path" in spec, f"book {label_id!r}: missing 'path'")
        kind = _one_of(spec.get("rule", "heading-regex"), SEG_KINDS, f"book {label_id!r} rule")
        name = spec.get("name", "")
        if not name and label_id in BOOKS_BY_ID:
            label = BOOKS_BY_ID[label_id]
        else:
            label = BookLabel(label_id, name)
        books.append(BookConfig(
            label=label,
            path=(base / spec["path"]).resolve(),
            rule=SegRule(kind=kind, pattern=spec.get("pattern", "")),
        ))

    textprep = raw.get("textprep", {})
    stopwords = tuple(textprep.get("stopwords", ("builtin:english", "builtin:archaic")))
    stopwords = tuple(
        s if s.startswith("builtin:") else str((base / s).resolve()) for s in stopwords
    )
    min_df = int(textprep.get("min_df", 1))
    _require(min_df >= 1, "textprep.min_df must be >= 1")

    weighting = _one_of(raw.get("dtm", {}).get("weighting", RAW), WEIGHTINGS, "dtm.weighting")

    distances = raw.get("distances", {})
    measures = tuple(distances.get("measures", MEASURES))
    for m in measures:
        _one_of(m, MEASURES, "distances.measures entry")
    aggregators = tuple(distances.get("aggregators", AGGREGATORS))
    for a in aggregators:
        _one_of(a, AGGREGATORS, "distances.aggregators entry")

    cl = raw.get("cluster", {})
    cluster = ClusterConfig(
        measure=_one_of(cl.get("measure", "euclidean"), ("euclidean", "manhattan"), "cluster.measure"),
        k_min=int(cl.get("k_min", 2)),
        k_max=int(cl.get("k_max", 7)),
        seed=int(cl.get("seed", 13)),
        n_restarts=int(cl.get("n_restarts", 10)),
        max_iter=int(cl.get("max_iter", 100)),
        tol=float(cl.get("tol", 1e-9)),
    )
    _require(2 <= cluster.k_min <= cluster.k_max, "cluster: need 2 <= k_min <= k_max")

    dd = raw.get("dendrogram", {})
    dendro = DendrogramConfig(
        measure=_one_of(dd.get("measure", "euclidean"), MEASURES, "dendrogram.measure"),
        aggregator=_one_of(dd.get("aggregator", "median"), AGGREGATORS, "dendrogram.aggregator"),
    )

    cf = raw.get("classify", {})
    split = SplitSpec(
        train_fraction=float(cf.get("train_fraction", 0.7)),
        seed=int(cf.get("seed", 42)),
        stratified=bool(cf.get("stratified", True)),
    )
    kinds = tuple(cf.get("classifiers", ("knn", "svm-linear", "random-forest")))
    specs = []
    for kind in kinds:
        if kind == "knn":
            specs.append(ClassifierSpec("knn", {
                "k": int(cf.get("knn_k", 5)),
                "measure": _one_of(cf.get("knn_measure", "euclidean"), MEASURES, "classify.knn_measure"),
            }))
        elif kind == "svm-linear":
            specs.append(ClassifierSpec("svm-linear", {
                "lam": float(cf.get("svm_lambda", 1e-4)),
                "epochs": int(cf.get("svm_epochs", 50)),
            }))
        elif kind == "random-forest":
            depth = int(cf.get("forest_max_depth", 0))
            specs.append(ClassifierSpec("random-forest", {
                "n_trees": int(cf.get("forest_trees", 100)),
                "max_depth": depth if depth > 0 else None,
                "max_features": "sqrt",
            }))
        else:
            raise ConfigError(f"classify.classifiers: unknown kind {kind!r}")
    classify = ClassifyConfig(split=split, seed=int(cf.get("seed", 42)), specs=tuple(specs))

    out_dir = Path(raw.get("output", {}).get("dir", "out"))
    if not out_dir.is_absolute():
        out_dir = base / out_dir

    return PipelineConfig(
        books=tuple(books),
        min_chapter_tokens=int(corpus.get("min_chapter_tokens", 5)),
        stopword_sources=stopwords,
        min_df=min_df,
        weighting=weighting,
        measures=measures,
        aggregators=aggregators,
        cluster=cluster,
        dendrogram=dendro,
        classify=classify,
        out_dir=out_dir,
        threads=default_threads(),
    )


def override(cfg: PipelineConfig, out_dir=None, seed=None, threads=None) -> PipelineConfig:
    """Apply CLI-level overrides; --seed reseeds clustering and the split."""
    from dataclasses import replace

    if out_dir is not None:
        cfg = replace(cfg, out_dir=Path(out_dir))
    if seed is not None:
        cfg = replace(
            cfg,
            cluster=replace(cfg.cluster, seed=int(seed)),
            classify=ClassifyConfig(
                split=SplitSpec(
                    train_fraction=cfg.classify.split.train_fraction,
                    seed=int(seed),
                    stratified=cfg.classify.split.stratified,
                ),
                seed=int(seed),
                specs=cfg.classify.specs,
            ),
        )
    if threads is not None:
        cfg = replace(cfg, threads=max(1, int(threads)))
    return cfg
