"""Post-processing of allocation samples.

Builds the posterior similarity matrix (co-clustering frequencies),
extracts a representative partition by maximising the sum of pairwise
similarities (medoid clustering over 1 - S, or exhaustive search for
tiny n), and produces Rao-Blackwellised predictions that average over
probabilistic allocations within each retained sweep.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.special import expit

from stickmix.model import safe_log

__all__ = [
    "PartitionEstimate",
    "accumulate_similarity",
    "merge_similarity_counts",
    "optimal_partition",
    "map_partition",
    "partition_score",
    "predict",
]


def accumulate_similarity(z_samples: np.ndarray) -> np.ndarray:
    """S_ij = fraction of retained sweeps in which Z_i = Z_j.

    z_samples is (sweeps, n); raises on zero sweeps.
    """
    z_samples = np.asarray(z_samples)
    if z_samples.ndim == 1:
        z_samples = z_samples.reshape(1, -1)
    if z_samples.shape[0] == 0:
        raise ValueError("need at least one retained sweep")
    counts = merge_similarity_counts(z_samples)
    return counts / z_samples.shape[0]


def merge_similarity_counts(z_samples: np.ndarray) -> np.ndarray:
    """Raw co-clustering counts; associative across per-chain partials."""
    z_samples = np.asarray(z_samples)
    n = z_samples.shape[1]
    counts = np.zeros((n, n))
    for z in z_samples:
        counts += z[:, None] == z[None, :]
    return counts


def partition_score(S: np.ndarray, labels: np.ndarray) -> float:
    """Sum over pairs i<j of (2*co_clustered - 1) * (S_ij - 0.5).

    An affine transform of the pairwise-similarity sum; 0.5 is the
    indifference point so singleton-heavy and lump-everything
    partitions are penalised symmetrically.
    """
    labels = np.asarray(labels)
    co = labels[:, None] == labels[None, :]
    iu = np.triu_indices(len(labels), k=1)
    return float(((2.0 * co[iu] - 1.0) * (S[iu] - 0.5)).sum())


@dataclass
class PartitionEstimate:
    labels: np.ndarray  # 1-based cluster labels
    k: int
    score: float
    method: str


def _pam(D: np.ndarray, k: int) -> np.ndarray:
    """Deterministic partitioning around medoids: greedy build + swap."""
    n = D.shape[0]
    medoids: list[int] = []
    # build
    for _ in range(k):
        best, best_cost = -1, np.inf
        for cand in range(n):
            if cand in medoids:
                continue
            cost = np.minimum.reduce([D[m] for m in medoids + [cand]]).sum()
            if cost < best_cost - 1e-15:
                best, best_cost = cand, cost
        medoids.append(best)
    # swap until no improvement
    current = np.minimum.reduce([D[m] for m in medoids]).sum()
    improved = True
    while improved:
        improved = False
        for idx in range(k):
            for cand in range(n):
                if cand in medoids:
                    continue
                trial = medoids.copy()
                trial[idx] = cand
                cost = np.minimum.reduce([D[m] for m in trial]).sum()
                if cost < current - 1e-12:
                    medoids, current, improved = trial, cost, True
    assign = np.argmin(D[np.array(medoids)], axis=0)
    return assign + 1


def _set_partitions(items: list[int]):
    """All set partitions of items (Bell-number enumeration)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
        yield [[first]] + part


def optimal_partition(
    S: np.ndarray,
    k_range,
    method: str = "pam",
) -> PartitionEstimate:
    """Partition maximising the pairwise-similarity score.

    method "pam" runs medoid clustering on 1 - S for each k in k_range
    and keeps the best-scoring candidate (ties toward smaller k);
    "exhaustive" searches every partition with block count in k_range
    (tiny n only).
    """
    S = np.asarray(S, dtype=np.float64)
    n = S.shape[0]
    k_range = [int(k) for k in k_range if 1 <= int(k) <= n]
    if not k_range:
        raise ValueError("empty candidate range")
    if method == "exhaustive":
        kset = set(k_range)
        best, best_score = None, -np.inf
        for part in _set_partitions(list(range(n))):
            if len(part) not in kset:
                continue
            labels = np.empty(n, dtype=np.int64)
            for lab, block in enumerate(sorted(part, key=min), start=1):
                labels[block] = lab
            score = partition_score(S, labels)
            if score > best_score + 1e-15 or (
                abs(score - best_score) <= 1e-15
                and best is not None
                and len(part) < best[1]
            ):
                best, best_score = (labels, len(part)), score
        return PartitionEstimate(best[0], best[1], best_score, "exhaustive")
    if method != "pam":
        raise ValueError(f"unknown method {method!r}")
    D = 1.0 - S
    best = None
    for k in sorted(k_range):
        labels = _pam(D, k) if k < n else np.arange(1, n + 1)
        kk = len(np.unique(labels))
        score = partition_score(S, labels)
        if best is None or score > best.score + 1e-15:
            best = PartitionEstimate(labels, kk, score, "pam")
    return best


def map_partition(z_samples: np.ndarray, log_mpp_values: np.ndarray) -> np.ndarray:
    """In-sample partition with the highest marginal partition posterior."""
    log_mpp_values = np.asarray(log_mpp_values, dtype=np.float64)
    if len(log_mpp_values) == 0:
        raise ValueError("need at least one scored sample")
    return np.asarray(z_samples)[int(np.nanargmax(log_mpp_values))]


def predict(
    x_star,
    w_star,
    states,
) -> float:
    """Rao-Blackwellised predictive probability P(Y=1 | x*, w*).

    For each retained state, allocation weights q_c are proportional to
    psi_c * prod_j phi_{c,j,x*_j} over the instantiated sticks (the
    unrepresented tail mass is ignored), and the predictive is the
    across-state mean of sum_c q_c * logit^{-1}(theta_c + beta'w*).

    states is an iterable of dicts or objects exposing psi, theta, phi
    and beta in the ChainState layout.
    """
    x_star = np.asarray(x_star, dtype=np.int64)
    w_star = np.asarray(w_star, dtype=np.float64)
    preds = []
    for st in states:
        psi = np.asarray(_get(st, "psi"), dtype=np.float64)
        theta = np.asarray(_get(st, "theta"), dtype=np.float64)
        beta = np.asarray(_get(st, "beta"), dtype=np.float64)
        phi = [np.asarray(p, dtype=np.float64) for p in _get(st, "phi")]
        logq = safe_log(psi).copy()
        for j, x in enumerate(x_star):
            if not 0 <= x < phi[j].shape[1]:
                raise ValueError(f"category index {x} out of range for covariate {j}")
            logq += safe_log(phi[j][:, x])
        q = np.exp(logq - logq.max())
        q /= q.sum()
        eta = theta + (beta @ w_star if len(beta) else 0.0)
        preds.append(float(q @ expit(eta)))
    if not preds:
        raise ValueError("need at least one retained state")
    return float(np.mean(preds))


def _get(st, name):
    if isinstance(st, dict):
        return st[name]
    return getattr(st, name)
