"""Nearest-neighbor regression with optional seasonal lag blocks.

Patterns follow the multiplicative seasonal layout: ``p`` consecutive lags
plus, for each seasonal lag ``ell = 1..P``, a block of ``p + 1`` values
around the point one season times ``ell`` before the target (the extra value
is the one aligned with the target itself).  Pattern dimension is therefore
``p + P * (p + 1)``.

Exact neighbor search is a tie-broken linear scan (lower provenance index
wins at equal distance).  The approximate mode answers from a kd-tree with a
bounded relative distance error and exists because it is faster on large
reference samples; accuracy-critical work should use exact mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyNeighborhoodError, InsufficientDataError
from .forecast_core import Forecaster

UNIFORM = "uniform"
INVERSE_DISTANCE = "inverse_distance"

#: Relative distance slack of the approximate kd-tree queries.
APPROX_EPS = 0.1


@dataclass(frozen=True)
class NnrSpec:
    """Hyperparameters of one nearest-neighbor regression model."""

    p: int
    P: int = 0
    s: int = 0
    weight_mode: str = UNIFORM
    k: int | None = None
    epsilon: float | None = None
    search_mode: str = "exact"
    #: Reproduce the unnormalized inverse-distance average (weighted sum
    #: divided by the neighbor count instead of the weight sum).
    literal_inverse_sum: bool = False

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.P < 0:
            raise ValueError("P must be >= 0")
        if (self.P == 0) != (self.s == 0):
            raise ValueError("s must be 0 exactly when P is 0")
        if self.P > 0 and self.s < 2:
            raise ValueError("seasonal specs need a season length >= 2")
        if self.weight_mode not in (UNIFORM, INVERSE_DISTANCE):
            raise ValueError(f"unknown weight mode {self.weight_mode!r}")
        if (self.k is None) == (self.epsilon is None):
            raise ValueError("exactly one of k / epsilon must be set")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.search_mode not in ("exact", "approximate"):
            raise ValueError(f"unknown search mode {self.search_mode!r}")

    @property
    def dimension(self) -> int:
        return self.p + self.P * (self.p + 1)


def lag_offsets(spec: NnrSpec) -> np.ndarray:
    """Lag offsets (<= 0) of a pattern, newest first, seasonal blocks appended."""
    offsets = list(range(0, -spec.p, -1))
    for ell in range(1, spec.P + 1):
        base = ell * spec.s
        offsets.extend(-(base - 1 + i) for i in range(spec.p + 1))
    return np.array(offsets, dtype=np.int64)


@dataclass(frozen=True)
class ReferenceSample:
    """Lag patterns with their observed successors."""

    patterns: np.ndarray  # (N, dim)
    targets: np.ndarray  # (N,)
    indices: np.ndarray  # (N,) provenance: time index of each pattern's newest value

    def __post_init__(self):
        for name in ("patterns", "targets", "indices"):
            arr = getattr(self, name)
            arr.flags.writeable = False

    def __len__(self) -> int:
        return len(self.targets)


def build_reference_sample(
    values: np.ndarray, spec: NnrSpec, mask: np.ndarray | None = None
) -> ReferenceSample:
    """Collect every (pattern, next value) pair fully inside unmasked data.

    ``mask`` marks values usable as reference data (True = usable); pairs
    touching a masked or missing value are omitted.
    """
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if n <= spec.p + spec.P * spec.s + 2:
        raise InsufficientDataError(
            f"need more than {spec.p + spec.P * spec.s + 2} training values, have {n}"
        )
    usable = np.isfinite(values)
    if mask is not None:
        usable = usable & np.asarray(mask, dtype=bool)

    offsets = lag_offsets(spec)
    reach = int(-offsets.min())
    anchors = np.arange(reach, n - 1)
    pattern_idx = anchors[:, None] + offsets[None, :]
    keep = usable[pattern_idx].all(axis=1) & usable[anchors + 1]
    anchors = anchors[keep]
    if anchors.size == 0:
        raise InsufficientDataError("no fully unmasked patterns in the training data")
    return ReferenceSample(
        patterns=values[anchors[:, None] + offsets[None, :]],
        targets=values[anchors + 1],
        indices=anchors,
    )


def _squared_distances(patterns: np.ndarray, query: np.ndarray) -> np.ndarray:
    diff = patterns - query
    return np.einsum("ij,ij->i", diff, diff)


def find_neighbors(
    sample: ReferenceSample, query: np.ndarray, spec: NnrSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Neighbor positions and distances, ordered by (distance, provenance).

    Fixed-k returns exactly k neighbors; the distance threshold returns all
    within epsilon and raises EmptyNeighborhoodError when there are none.
    """
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (sample.patterns.shape[1],):
        raise ValueError(
            f"query dimension {query.shape} does not match patterns "
            f"({sample.patterns.shape[1]},)"
        )
    d2 = _squared_distances(sample.patterns, query)
    if spec.k is not None:
        if spec.k > len(sample):
            raise InsufficientDataError(
                f"k={spec.k} exceeds the {len(sample)} available patterns"
            )
        order = np.argsort(d2, kind="stable")[: spec.k]
        return order, np.sqrt(d2[order])
    within = np.nonzero(d2 <= spec.epsilon * spec.epsilon)[0]
    if within.size == 0:
        raise EmptyNeighborhoodError(f"no patterns within epsilon={spec.epsilon}")
    order = within[np.argsort(d2[within], kind="stable")]
    return order, np.sqrt(d2[order])


def _combine(targets: np.ndarray, distances: np.ndarray, spec: NnrSpec) -> float:
    if spec.weight_mode == UNIFORM:
        return float(targets.mean())
    if distances[0] == 0.0:
        # zero-distance override: the first (lowest provenance) exact match
        return float(targets[0])
    weights = 1.0 / distances
    denom = len(targets) if spec.literal_inverse_sum else weights.sum()
    return float((weights * targets).sum() / denom)


def _select_and_combine(
    patterns: np.ndarray, targets: np.ndarray, query: np.ndarray, spec: NnrSpec
) -> float:
    """Exact neighbor selection and prediction over the given pattern set.

    Candidate rows must be in ascending provenance order; selection sorts by
    (distance, position), matching find_neighbors semantics.
    """
    d2 = _squared_distances(patterns, query)
    if spec.k is not None:
        if spec.k > len(targets):
            raise InsufficientDataError(
                f"k={spec.k} exceeds the {len(targets)} available patterns"
            )
        order = np.argsort(d2, kind="stable")[: spec.k]
    else:
        within = np.nonzero(d2 <= spec.epsilon * spec.epsilon)[0]
        if within.size == 0:
            raise EmptyNeighborhoodError(f"no patterns within epsilon={spec.epsilon}")
        order = within[np.argsort(d2[within], kind="stable")]
    return _combine(targets[order], np.sqrt(d2[order]), spec)


def nnr_predict_one(sample: ReferenceSample, query: np.ndarray, spec: NnrSpec) -> float:
    """One-step prediction from the neighbor set of ``query``."""
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (sample.patterns.shape[1],):
        raise ValueError(
            f"query dimension {query.shape} does not match patterns "
            f"({sample.patterns.shape[1]},)"
        )
    return _select_and_combine(sample.patterns, sample.targets, query, spec)


class NnrModel(Forecaster):
    """Fitted nearest-neighbor forecaster over a frozen reference sample."""

    def __init__(self, sample: ReferenceSample, spec: NnrSpec):
        self.sample = sample
        self.spec = spec
        self._offsets = lag_offsets(spec)
        self._pattern_sq_norms = np.einsum("ij,ij->i", sample.patterns, sample.patterns)
        self._tree = cKDTree(sample.patterns) if spec.search_mode == "approximate" else None

    def required_lags(self) -> np.ndarray:
        return self._offsets

    def predict_one(self, lag_vector: np.ndarray) -> float:
        if self._tree is not None:
            return float(self._predict_batch(np.asarray(lag_vector)[None, :])[0])
        return nnr_predict_one(self.sample, lag_vector, self.spec)

    def predict_step(self, lag_matrix: np.ndarray, state: Any, step: int) -> np.ndarray:
        return self._predict_batch(lag_matrix)

    # -- batched prediction ------------------------------------------------

    def _predict_batch(self, queries: np.ndarray) -> np.ndarray:
        """Vectorized predictions; NaN rows mark failed trajectories.

        The fast path computes squared distances with a Gram-matrix identity,
        whose rounding can reorder mathematically tied distances. Rows where
        the selection is ambiguous at that rounding scale are redone through
        the exact single-query path, so batch results always agree with
        find_neighbors / nnr_predict_one.
        """
        out = np.full(len(queries), np.nan)
        alive = np.isfinite(queries).all(axis=1)
        if not alive.any():
            return out
        q = np.ascontiguousarray(queries[alive], dtype=np.float64)
        if self._tree is not None:
            out[alive] = self._approximate_batch(q)
            return out
        q_norms = np.einsum("ij,ij->i", q, q)
        d2 = q @ self.sample.patterns.T
        d2 *= -2.0
        d2 += q_norms[:, None]
        d2 += self._pattern_sq_norms[None, :]
        # tiny negatives from cancellation are harmless for selection and are
        # clamped before any sqrt below
        # absolute d^2 ambiguity scale of the Gram identity (generous)
        tol = 1e-9 * (q_norms + self._pattern_sq_norms.max() + 1.0)
        if self.spec.k is not None:
            vals, suspicious, cutoff = self._fixed_k_batch(d2, tol)
        else:
            vals, suspicious, cutoff = self._epsilon_batch(d2, tol)
        for row in np.nonzero(suspicious)[0]:
            # exact redo on the candidate superset (contains every true neighbor)
            candidates = np.nonzero(d2[row] <= cutoff[row])[0]
            if self.spec.k is not None and candidates.size < self.spec.k:
                candidates = np.arange(d2.shape[1])
            try:
                vals[row] = _select_and_combine(
                    self.sample.patterns[candidates],
                    self.sample.targets[candidates],
                    q[row],
                    self.spec,
                )
            except EmptyNeighborhoodError:
                vals[row] = np.nan
        out[alive] = vals
        return out

    def _fixed_k_batch(self, d2: np.ndarray, tol: np.ndarray):
        k = self.spec.k
        n = d2.shape[1]
        if k > n:
            raise InsufficientDataError(f"k={k} exceeds the {n} available patterns")
        targets = self.sample.targets
        if k == n:
            selected = np.broadcast_to(np.arange(n), d2.shape)
            kth = d2.max(axis=1)
            suspicious = np.zeros(len(d2), dtype=bool)
        else:
            # partition index k: positions :k hold the k smallest, position k
            # holds the (k+1)-th smallest exactly
            order = np.argpartition(d2, k, axis=1)[:, : k + 1]
            selected = order[:, :k]
            sel_d2 = np.take_along_axis(d2, selected, axis=1)
            kth = sel_d2.max(axis=1)
            next_best = np.take_along_axis(d2, order[:, k:], axis=1)[:, 0]
            # boundary ambiguity: (k+1)-th distance within tolerance of the k-th
            suspicious = next_best <= kth + tol
        cutoff = kth + tol
        if self.spec.weight_mode == UNIFORM:
            return targets[selected].mean(axis=1), suspicious, cutoff
        suspicious = suspicious | (d2.min(axis=1) <= tol)  # zero-distance override
        sel_d2 = np.take_along_axis(d2, selected, axis=1)
        distances = np.sqrt(np.maximum(sel_d2, 1e-300))
        weights = 1.0 / distances
        denom = float(k) if self.spec.literal_inverse_sum else weights.sum(axis=1)
        return (weights * targets[selected]).sum(axis=1) / denom, suspicious, cutoff

    def _epsilon_batch(self, d2: np.ndarray, tol: np.ndarray):
        eps2 = self.spec.epsilon * self.spec.epsilon
        within = d2 <= eps2
        counts = within.sum(axis=1)
        # membership ambiguity at the epsilon boundary
        suspicious = (np.abs(d2 - eps2) <= tol[:, None]).any(axis=1)
        cutoff = np.full(len(d2), eps2) + tol
        preds = np.full(len(d2), np.nan)
        nonempty = counts > 0
        targets = self.sample.targets
        if self.spec.weight_mode == UNIFORM:
            if nonempty.any():
                sums = within[nonempty].astype(np.float64) @ targets
                preds[nonempty] = sums / counts[nonempty]
            return preds, suspicious, cutoff
        suspicious = suspicious | (d2.min(axis=1) <= tol)
        if nonempty.any():
            sub = d2[nonempty]
            w = np.where(within[nonempty], 1.0 / np.sqrt(np.maximum(sub, 1e-300)), 0.0)
            num = w @ targets
            denom = counts[nonempty] if self.spec.literal_inverse_sum else w.sum(axis=1)
            preds[nonempty] = num / denom
        return preds, suspicious, cutoff

    def _approximate_batch(self, q: np.ndarray) -> np.ndarray:
        spec = self.spec
        targets = self.sample.targets
        if spec.k is not None:
            k = min(spec.k, len(self.sample))
            distances, idx = self._tree.query(q, k=k, eps=APPROX_EPS)
            if k == 1:
                distances, idx = distances[:, None], idx[:, None]
            if spec.weight_mode == UNIFORM:
                return targets[idx].mean(axis=1)
            out = np.empty(len(q))
            for row in range(len(q)):
                out[row] = _combine(targets[idx[row]], distances[row], spec)
            return out
        out = np.full(len(q), np.nan)
        hits = self._tree.query_ball_point(q, r=spec.epsilon, eps=APPROX_EPS)
        for row, neighborhood in enumerate(hits):
            if not neighborhood:
                continue
            neighborhood = np.sort(np.asarray(neighborhood))
            diff = self.sample.patterns[neighborhood] - q[row]
            d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            order = np.argsort(d, kind="stable")
            out[row] = _combine(targets[neighborhood[order]], d[order], spec)
        return out


def nnr_fit(values: np.ndarray, spec: NnrSpec, mask: np.ndarray | None = None) -> NnrModel:
    """Build the reference sample and wrap it as a forecaster."""
    sample = build_reference_sample(values, spec, mask)
    if spec.k is not None and spec.k > len(sample):
        raise InsufficientDataError(
            f"k={spec.k} exceeds the {len(sample)} patterns the training data yields"
        )
    return NnrModel(sample, spec)
