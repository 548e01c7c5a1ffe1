"""Task orderings with deterministic, splittable seeding.

All randomness in this package flows through :func:`stream`, which constructs
a Philox4x64 counter-based bit generator keyed by
``numpy.random.SeedSequence(seed, spawn_key=path)``.  Philox streams are fixed
by the algorithm (not by platform state), and SeedSequence hashing is stable
across platforms and numpy releases, so any ``(seed, path)`` pair reproduces
the same draws everywhere.  Parallel Monte Carlo trials use disjoint paths,
e.g. ``stream(base_seed, k, trial)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WITH_REPLACEMENT = "with-replacement"
WITHOUT_REPLACEMENT = "without-replacement"
EXPLICIT = "explicit"

_KINDS = (WITH_REPLACEMENT, WITHOUT_REPLACEMENT, EXPLICIT)


def stream(seed, *path):
    """Independent generator for (seed, path); same inputs, same stream."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seq))


def derived_seed(seed, *path):
    """Stable 64-bit fingerprint of the (seed, path) stream, for logging."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return int(seq.generate_state(1, np.uint64)[0])


@dataclass(frozen=True, eq=False)
class Ordering:
    """A realized task ordering tau_1..tau_k with 1-based indices in [1..M]."""

    indices: np.ndarray
    kind: str
    M: int
    seed: int | None = None
    path: tuple = ()

    def __len__(self):
        return len(self.indices)


def sample_ordering(kind, M, k, seed, path=()):
    """Sample a uniform task ordering of length k over tasks 1..M.

    ``path`` selects an independent sub-stream of ``seed`` (one per trial),
    so concurrent trials never share generator state.
    """
    if kind not in (WITH_REPLACEMENT, WITHOUT_REPLACEMENT):
        raise ValueError(f"unknown ordering kind: {kind!r}")
    M = int(M)
    k = int(k)
    if M < 1:
        raise ValueError("M must be >= 1")
    if k < 0:
        raise ValueError("k must be >= 0")
    rng = stream(seed, *path)
    if kind == WITH_REPLACEMENT:
        idx = rng.integers(1, M + 1, size=k)
    else:
        if k > M:
            raise ValueError(f"without-replacement needs k <= M, got k={k}, M={M}")
        idx = rng.permutation(M)[:k] + 1
    idx = np.asarray(idx, dtype=np.int64)
    idx.flags.writeable = False
    return Ordering(indices=idx, kind=kind, M=M, seed=int(seed), path=tuple(path))


def explicit_ordering(indices, M):
    """Wrap a user-provided index sequence (1-based) as an Ordering."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError("explicit ordering must be a 1-D index sequence")
    M = int(M)
    if len(idx) and (idx.min() < 1 or idx.max() > M):
        raise ValueError(f"ordering entries must lie in [1..{M}]")
    idx = idx.copy()
    idx.flags.writeable = False
    return Ordering(indices=idx, kind=EXPLICIT, M=M)
