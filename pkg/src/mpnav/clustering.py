"""Affinity propagation over motion-primitive features."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .primitives import DEFAULT_SCALE, FeatureScale, MotionPrimitive, featurize

log = logging.getLogger(__name__)

ACTIVE = "active"
CANDIDATE = "candidate"


@dataclass
class MPCluster:
    exemplar_id: int
    member_ids: set[int]
    votes: int = 0
    status: str = ACTIVE
    exemplar: MotionPrimitive | None = None
    enabled: bool = True

    def __post_init__(self):
        if self.exemplar_id not in self.member_ids:
            raise ValueError("exemplar must be a member of its cluster")
        if self.status not in (ACTIVE, CANDIDATE):
            raise ValueError(f"bad cluster status {self.status!r}")


@dataclass(frozen=True)
class APParams:
    damping: float = 0.9
    max_iter: int = 1000
    convergence_iter: int = 100
    preference: float | None = None  # fixed value; overrides the quantile
    preference_quantile: float = 0.5  # of off-diagonal similarities; 0.5 is the median


@dataclass
class APResult:
    exemplars: list[int]
    assignment: np.ndarray  # point index -> exemplar index
    converged: bool
    iterations: int
    labels: np.ndarray = field(default=None)  # point index -> position in ``exemplars``


def similarity_matrix(features: Sequence[np.ndarray], preference: float | None = None,
                      quantile: float = 0.5) -> np.ndarray:
    """Negative squared Euclidean distances; the diagonal holds the preference.

    Without an explicit ``preference`` the diagonal is the given quantile of
    the off-diagonal similarities (the median by default).
    """
    X = np.asarray(features, dtype=float)
    n = len(X)
    if n == 0:
        return np.zeros((0, 0))
    X = X.reshape(n, -1)
    # explicit differences keep S exactly symmetric and zero for duplicates
    diff = X[:, None, :] - X[None, :, :]
    S = -np.einsum("ijk,ijk->ij", diff, diff)
    if preference is None:
        off = S[~np.eye(n, dtype=bool)]
        preference = float(np.quantile(off, quantile)) if off.size else 0.0
    np.fill_diagonal(S, preference)
    return S


def _responsibility(S: np.ndarray, A: np.ndarray) -> np.ndarray:
    n = S.shape[0]
    AS = A + S
    idx = np.argmax(AS, axis=1)
    rows = np.arange(n)
    first = AS[rows, idx]
    AS[rows, idx] = -np.inf
    second = np.max(AS, axis=1)
    R = S - first[:, None]
    R[rows, idx] = S[rows, idx] - second
    return R


def _availability(R: np.ndarray) -> np.ndarray:
    Rp = np.maximum(R, 0.0)
    np.fill_diagonal(Rp, np.diag(R))
    col = Rp.sum(axis=0)
    A = col[None, :] - Rp
    dA = np.diag(A).copy()
    A = np.minimum(A, 0.0)
    np.fill_diagonal(A, dA)
    return A


def ap_iteration(S: np.ndarray, R: np.ndarray, A: np.ndarray, damping: float):
    """One damped sweep: responsibilities first, then availabilities."""
    R = damping * R + (1.0 - damping) * _responsibility(S, A)
    A = damping * A + (1.0 - damping) * _availability(R)
    return R, A


def assign_to_exemplars(S: np.ndarray, exemplars: Sequence[int]) -> np.ndarray:
    """Each point goes to the exemplar of highest similarity (lowest index on ties);
    exemplars are their own."""
    ex = np.asarray(exemplars, dtype=int)
    out = ex[np.argmax(S[:, ex], axis=1)]
    out[ex] = ex
    return out


def affinity_propagation(S: np.ndarray, damping: float = 0.9, max_iter: int = 1000,
                         convergence_iter: int = 100) -> APResult:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("similarity matrix must be square")
    if not 0.5 <= damping < 1.0:
        raise ValueError("damping must lie in [0.5, 1)")
    n = S.shape[0]
    if n == 0:
        return APResult([], np.zeros(0, dtype=int), True, 0, np.zeros(0, dtype=int))
    if n == 1:
        return APResult([0], np.zeros(1, dtype=int), True, 0, np.zeros(1, dtype=int))

    # Deterministic tie breaking: lower indices very slightly preferred as
    # exemplars, so exact duplicates do not split symmetric messages.
    scale = float(np.max(np.abs(S))) or 1.0
    S = S.copy()
    S[np.diag_indices(n)] -= scale * 1e-12 * np.arange(n)

    R = np.zeros_like(S)
    A = np.zeros_like(S)
    last = None
    stable = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        R, A = ap_iteration(S, R, A, damping)
        ex = tuple(np.flatnonzero(np.diag(A) + np.diag(R) > 0))
        if ex == last and ex:
            stable += 1
        else:
            stable = 0
            last = ex
        if stable >= convergence_iter:
            converged = True
            break

    exemplars = list(np.flatnonzero(np.diag(A) + np.diag(R) > 0))
    if not exemplars:
        exemplars = [int(np.argmax(np.diag(A) + np.diag(R)))]
        if converged:
            log.debug("affinity propagation found no positive exemplar; using best evidence")
    if not converged:
        log.warning("affinity propagation did not converge in %d iterations", max_iter)
    assignment = assign_to_exemplars(S, exemplars)
    labels = np.searchsorted(np.asarray(exemplars), assignment)
    return APResult([int(e) for e in exemplars], assignment, converged, it, labels)


def net_similarity(S: np.ndarray, exemplars: Sequence[int]) -> float:
    assignment = assign_to_exemplars(S, exemplars)
    return float(sum(S[i, k] for i, k in enumerate(assignment)))


# Median preference over-compresses teleop libraries (about 14:1); the 0.95
# quantile lands near 3.5:1.
LIBRARY_AP = APParams(preference_quantile=0.95)


def build_clusters(mps: Sequence[MotionPrimitive], params: APParams = APParams(),
                   scale: FeatureScale = DEFAULT_SCALE) -> list[MPCluster]:
    if not mps:
        return []
    feats = [featurize(m, scale) for m in mps]
    S = similarity_matrix(feats, params.preference, params.preference_quantile)
    res = affinity_propagation(S, params.damping, params.max_iter, params.convergence_iter)
    clusters = []
    for e in res.exemplars:
        members = {mps[i].id for i in np.flatnonzero(res.assignment == e)}
        clusters.append(MPCluster(mps[e].id, members, 0, ACTIVE, mps[e]))
    clusters.sort(key=lambda c: c.exemplar_id)
    return clusters
