"""Regression tasks, task collections, and jointly realizable generators."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .orderings import stream

_EPS = float(np.finfo(np.float64).eps)


def _frozen(a):
    a = np.asarray(a, dtype=np.float64).copy()
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class RegressionTask:
    """One linear regression task with cached least-squares quantities.

    ``pinv_solution`` is the minimum-norm least-squares solution X^+ y and
    ``min_loss`` the squared residual 0.5 * ||X pinv_solution - y||^2 at that
    point.  Immutable after construction; safe to share across threads.
    """

    X: np.ndarray
    y: np.ndarray
    pinv_solution: np.ndarray
    min_loss: float

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @cached_property
    def spectral_norm(self):
        # Full SVD: no iterative-method tolerance to reason about.
        return float(np.linalg.norm(self.X, 2))

    @cached_property
    def gram(self):
        return _frozen(self.X.T @ self.X)

    @cached_property
    def gram_eigh(self):
        """Eigenvalues (clipped at 0) and eigenvectors of X^T X."""
        xi, V = np.linalg.eigh(self.gram)
        return _frozen(np.clip(xi, 0.0, None)), _frozen(V)

    @cached_property
    def xty(self):
        return _frozen(self.X.T @ self.y)

    @cached_property
    def pinv(self):
        return _frozen(np.linalg.pinv(self.X, rcond=max(self.X.shape) * _EPS))


def new_task(X, y):
    """Build a task from a data matrix and target vector, caching X^+ y."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be a 2-D matrix, got shape {X.shape}")
    if y.ndim != 1:
        raise ValueError(f"y must be a 1-D vector, got shape {y.shape}")
    n, d = X.shape
    if n < 1 or d < 1:
        raise ValueError(f"X must be at least 1x1, got shape {X.shape}")
    if y.shape[0] != n:
        raise ValueError(f"row count mismatch: X has {n} rows, y has {y.shape[0]} entries")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("task data contains non-finite entries")
    # Rank decision: singular values below max(n, d) * eps * sigma_max are zero.
    p = np.linalg.pinv(X, rcond=max(n, d) * _EPS) @ y
    residual = X @ p - y
    min_loss = 0.5 * float(residual @ residual)
    return RegressionTask(X=_frozen(X), y=_frozen(y), pinv_solution=_frozen(p),
                          min_loss=min_loss)


@dataclass(frozen=True, eq=False)
class TaskCollection:
    """M tasks sharing feature dimension d, with data radius R.

    ``w_star``, when present, is a planted solution fitting every task
    exactly (generator metadata; not required for arbitrary collections).
    """

    tasks: tuple
    d: int
    radius: float
    w_star: np.ndarray | None = None

    @property
    def M(self):
        return len(self.tasks)


def new_collection(tasks, w_star=None):
    tasks = tuple(tasks)
    if not tasks:
        raise ValueError("a collection needs at least one task")
    d = tasks[0].d
    for t in tasks:
        if t.d != d:
            raise ValueError(f"tasks disagree on dimension: {t.d} vs {d}")
    if w_star is not None:
        w_star = _frozen(w_star)
        if w_star.shape != (d,):
            raise ValueError(f"w_star must have length {d}")
    return TaskCollection(tasks=tasks, d=d,
                          radius=max(t.spectral_norm for t in tasks),
                          w_star=w_star)


def radius(collection):
    """Largest spectral norm over the collection's data matrices."""
    if not collection.tasks:
        raise ValueError("empty collection")
    return max(t.spectral_norm for t in collection.tasks)


@dataclass(frozen=True)
class RealizableSpec:
    """Recipe for a synthetic collection solved exactly by one vector.

    ``w_star`` may be supplied; otherwise it is drawn from the seeded stream.
    ``radius`` > 0 rescales all data matrices uniformly so the largest
    spectral norm hits that value (targets are built after rescaling, keeping
    realizability exact).
    """

    d: int
    M: int
    n: int
    radius: float
    seed: int
    w_star: np.ndarray | None = None


def generate_realizable(spec):
    """Deterministically generate a jointly realizable Gaussian collection."""
    if spec.d < 1 or spec.M < 1 or spec.n < 1:
        raise ValueError("d, M and n must all be >= 1")
    rng = stream(spec.seed)
    w_star = spec.w_star
    if w_star is None:
        w_star = rng.standard_normal(spec.d)
    else:
        w_star = np.asarray(w_star, dtype=np.float64)
        if w_star.shape != (spec.d,):
            raise ValueError(f"w_star must have length {spec.d}")
    mats = [rng.standard_normal((spec.n, spec.d)) for _ in range(spec.M)]
    if spec.radius > 0:
        r0 = max(np.linalg.norm(X, 2) for X in mats)
        if r0 > 0:
            mats = [X * (spec.radius / r0) for X in mats]
    tasks = [new_task(X, X @ w_star) for X in mats]
    return new_collection(tasks, w_star=w_star)


def generate_aligned_pairs(pairs, angle, d, target_radius=1.0, seed=0):
    """Collection of nearly parallel rank-one task pairs (a hard instance).

    Pair j contributes two unit rows in the coordinate plane (2j, 2j+1)
    separated by ``angle`` radians.  Small angles make training-to-convergence
    grind: consecutive exact projections between almost-parallel constraints
    advance only O(angle^2) per alternation, while partial (regularized)
    updates are unaffected.  The planted solution is Gaussian from ``seed``.
    """
    pairs = int(pairs)
    if pairs < 1:
        raise ValueError("need at least one pair")
    if d < 2 * pairs:
        raise ValueError(f"d must be >= {2 * pairs} to hold {pairs} disjoint planes")
    if not 0 < angle < np.pi / 2:
        raise ValueError("angle must lie in (0, pi/2)")
    w_star = stream(seed).standard_normal(d)
    rows = []
    for j in range(pairs):
        a = np.zeros(d)
        a[2 * j] = 1.0
        b = np.zeros(d)
        b[2 * j] = np.cos(angle)
        b[2 * j + 1] = np.sin(angle)
        rows += [a, b]
    scale = float(target_radius) if target_radius > 0 else 1.0
    mats = [scale * r[None, :] for r in rows]
    tasks = [new_task(X, X @ w_star) for X in mats]
    return new_collection(tasks, w_star=w_star)


def min_norm_solution(collection):
    """Minimum-norm least-squares solution of the stacked system."""
    X = np.vstack([t.X for t in collection.tasks])
    y = np.concatenate([t.y for t in collection.tasks])
    return np.linalg.pinv(X, rcond=max(X.shape) * _EPS) @ y


def collection_to_dict(collection):
    """JSON-ready representation (matrices as nested lists)."""
    out = {
        "tasks": [{"X": t.X.tolist(), "y": t.y.tolist()} for t in collection.tasks],
    }
    if collection.w_star is not None:
        out["w_star"] = collection.w_star.tolist()
    return out


def collection_from_dict(data):
    tasks = [new_task(item["X"], item["y"]) for item in data["tasks"]]
    w_star = data.get("w_star")
    return new_collection(tasks, w_star=None if w_star is None else np.asarray(w_star))
