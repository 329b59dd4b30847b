"""Input-validation helpers shared by the estimators and kernels."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.exceptions import NotFittedError

from .errors import DimensionMismatchError, NonFiniteInputError


def as_vector(x) -> np.ndarray:
    """Coerce to a 1-D float64 array (sparse rows are densified)."""
    if sp.issparse(x):
        x = np.asarray(x.todense()).ravel()
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 1:
        a = a.ravel()
    return a


def check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    """Validate a vector pair for a distance kernel: 1-D, equal dimension."""
    a, b = as_vector(x), as_vector(y)
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError(
            f"vectors have dimensions {a.shape[0]} and {b.shape[0]}"
        )
    return a, b


def check_matrix(X, *, dense: bool = False) -> np.ndarray | sp.csr_matrix:
    """Coerce to a 2-D float64 array or CSR matrix."""
    if sp.issparse(X):
        X = X.tocsr().astype(np.float64)
        return np.asarray(X.todense()) if dense else X
    a = np.asarray(X, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


def check_finite(a: np.ndarray, what: str = "input") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NonFiniteInputError(f"{what} contains non-finite values")
    return a


def check_is_fitted(estimator, attribute: str):
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )


def check_random_state(seed) -> np.random.Generator:
    """Build a Generator from an int seed (or pass one through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
