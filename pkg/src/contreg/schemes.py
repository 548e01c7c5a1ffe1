"""Continual update rules and trajectory runner.

Four ways to ingest one task from the current iterate:

* ``regularized_step``    solve the task exactly, anchored to the iterate by a
                          proximal coefficient (closed form, SPD solve);
* ``budgeted_step``       a literal inner loop of plain gradient steps;
* ``unregularized_step``  train to convergence (project onto the task's
                          solution set);
* ``igd_step``            one gradient step on a quadratic surrogate.

The first two are the schemes under study; the surrogate path must reproduce
them step for step, which the tests check rather than assume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import task_loss
from .surrogates import build_budgeted_surrogate, build_regularized_surrogate

REGULARIZED = "regularized"
BUDGETED = "budgeted"
UNREGULARIZED = "unregularized"
IGD_REGULARIZED = "igd-of-regularized"
IGD_BUDGETED = "igd-of-budgeted"

SCHEME_KINDS = (REGULARIZED, BUDGETED, UNREGULARIZED, IGD_REGULARIZED, IGD_BUDGETED)

_COEFFICIENT_SCHEMES = (REGULARIZED, IGD_REGULARIZED)
_BUDGET_SCHEMES = (BUDGETED, IGD_BUDGETED)


def regularized_step(w, task, lam):
    """Minimize the task loss plus (lam/2) * ||w' - w||^2 in closed form."""
    if not lam > 0:
        raise ValueError(f"regularization coefficient must be positive, got {lam}")
    lhs = task.gram + lam * np.eye(task.d)
    return np.linalg.solve(lhs, task.xty + lam * np.asarray(w, dtype=np.float64))


def budgeted_step(w, task, gamma, n_steps):
    """Run n_steps explicit gradient steps of size gamma on the task loss."""
    n_steps = int(n_steps)
    if n_steps < 1:
        raise ValueError(f"budget must be >= 1, got {n_steps}")
    r2 = task.spectral_norm ** 2
    if not (gamma > 0 and gamma * r2 < 1):
        raise ValueError(f"inner step size must satisfy 0 < gamma * R_m^2 < 1, "
                         f"got gamma={gamma}, R_m^2={r2}")
    w = np.asarray(w, dtype=np.float64).copy()
    X, y = task.X, task.y
    for _ in range(n_steps):
        w -= gamma * (X.T @ (X @ w - y))
    return w


def unregularized_step(w, task):
    """Train to convergence: the closest point solving the task exactly."""
    w = np.asarray(w, dtype=np.float64)
    return w - task.pinv @ (task.X @ w - task.y)


def igd_step(w, surrogate, eta):
    """Single gradient step of size eta on a quadratic surrogate."""
    if not eta > 0:
        raise ValueError(f"step size must be positive, got {eta}")
    w = np.asarray(w, dtype=np.float64)
    return w - eta * (surrogate.A @ (w - surrogate.anchor))


@dataclass(frozen=True)
class StepRecord:
    """Bookkeeping for one continual step (1-based task index)."""

    task: int
    params: tuple
    eta: float
    loss_before: float
    loss_after: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Iterates w_0..w_k plus the realized ordering and per-step records."""

    iterates: np.ndarray
    ordering: np.ndarray
    per_step: tuple
    scheme: str

    @property
    def k(self):
        return len(self.ordering)


def _indices(ordering):
    return ordering.indices if hasattr(ordering, "indices") else np.asarray(ordering, np.int64)


def run_continual(collection, ordering, schedule, scheme, w0=None):
    """Run one continual trajectory of a given scheme kind.

    ``schedule`` supplies per-step strengths; it may be None only for the
    unregularized scheme.  For the igd-of-* kinds the surrogate is rebuilt at
    every step from the current task and the step-t schedule entries, and the
    update is taken through it (never through the scheme's own closed form).
    """
    if scheme not in SCHEME_KINDS:
        raise ValueError(f"unknown scheme kind: {scheme!r}")
    idx = _indices(ordering)
    k = len(idx)
    if len(idx) and (idx.min() < 1 or idx.max() > collection.M):
        raise ValueError(f"ordering entries must lie in [1..{collection.M}]")

    if scheme == UNREGULARIZED:
        if schedule is not None and schedule.k != k:
            raise ValueError(f"schedule length {schedule.k} != ordering length {k}")
    else:
        if schedule is None:
            raise ValueError(f"scheme {scheme!r} needs a schedule")
        if schedule.k != k:
            raise ValueError(f"schedule length {schedule.k} != ordering length {k}")
        if scheme in _COEFFICIENT_SCHEMES and schedule.lam is None:
            raise ValueError(f"scheme {scheme!r} needs a coefficient schedule")
        if scheme in _BUDGET_SCHEMES and schedule.gamma is None:
            raise ValueError(f"scheme {scheme!r} needs a budget schedule")

    if w0 is None:
        w = np.zeros(collection.d)
    else:
        w = np.asarray(w0, dtype=np.float64).copy()
        if w.shape != (collection.d,):
            raise ValueError(f"w0 must have length {collection.d}")

    skip_first = schedule is not None and schedule.unregularized_first
    iterates = np.empty((k + 1, collection.d))
    iterates[0] = w
    records = []
    for t in range(1, k + 1):
        m = int(idx[t - 1])
        task = collection.tasks[m - 1]
        before = task_loss(w, task)
        params = ()
        eta = 1.0
        if scheme == UNREGULARIZED or (t == 1 and skip_first):
            w = unregularized_step(w, task)
        elif scheme == REGULARIZED:
            params = (float(schedule.lam[t - 1]),)
            w = regularized_step(w, task, params[0])
        elif scheme == BUDGETED:
            params = (float(schedule.gamma[t - 1]), int(schedule.n_steps[t - 1]))
            w = budgeted_step(w, task, *params)
        elif scheme == IGD_REGULARIZED:
            params = (float(schedule.lam[t - 1]),)
            eta = float(schedule.eta[t - 1])
            s = build_regularized_surrogate(task, params[0], eta)
            w = igd_step(w, s, eta)
        else:  # IGD_BUDGETED
            params = (float(schedule.gamma[t - 1]), int(schedule.n_steps[t - 1]))
            eta = float(schedule.eta[t - 1])
            s = build_budgeted_surrogate(task, params[0], params[1], eta)
            w = igd_step(w, s, eta)
        iterates[t] = w
        records.append(StepRecord(task=m, params=params, eta=eta,
                                  loss_before=before, loss_after=task_loss(w, task)))

    iterates.flags.writeable = False
    return Trajectory(iterates=iterates, ordering=idx, per_step=tuple(records),
                      scheme=scheme)
