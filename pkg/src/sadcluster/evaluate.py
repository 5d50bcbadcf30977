"""Clustering metrics: Hungarian-matched accuracy, AMI, cosine silhouette.

Accuracy maximizes the matched count over injective cluster-to-label
mappings (computed by the Hungarian algorithm on the negated confusion
matrix). AMI uses natural logarithms, arithmetic-mean normalization, and
the exact expected mutual information under the permutation model.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import gammaln

from .rng import derive_rng


@dataclass
class EvalReport:
    """ACC/AMI/silhouette plus the confusion matrix and mapping behind ACC."""

    acc: float
    ami: float
    silhouette: float
    confusion: np.ndarray
    mapping: dict[int, int]


def hungarian(cost: np.ndarray) -> np.ndarray:
    """Column assigned to each row in a minimum-cost perfect matching.

    Rectangular inputs are zero-padded to square first, so every row gets
    a column. O(k^3).
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost must be a matrix")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix has non-finite entries")
    rows, cols = cost.shape
    size = max(rows, cols)
    padded = np.zeros((size, size))
    padded[:rows, :cols] = cost
    row_ind, col_ind = linear_sum_assignment(padded)
    perm = np.empty(size, dtype=np.int64)
    perm[row_ind] = col_ind
    return perm


def confusion_matrix(labels, clusters) -> np.ndarray:
    """Count matrix: rows index true labels, columns index clusters."""
    labels = np.asarray(labels, dtype=np.int64)
    clusters = np.asarray(clusters, dtype=np.int64)
    if labels.shape != clusters.shape:
        raise ValueError("labels and clusters must have equal length")
    if labels.size == 0:
        raise ValueError("need at least one point")
    if np.any(labels < 0) or np.any(clusters < 0):
        raise ValueError("labels and clusters must be non-negative")
    n_labels = int(labels.max()) + 1
    n_clusters = int(clusters.max()) + 1
    counts = np.zeros((n_labels, n_clusters), dtype=np.int64)
    np.add.at(counts, (labels, clusters), 1)
    return counts


def clustering_accuracy(labels, clusters) -> tuple[float, dict[int, int]]:
    """Best-mapping accuracy and the cluster-to-label mapping achieving it."""
    counts = confusion_matrix(labels, clusters)
    n_labels, n_clusters = counts.shape
    size = max(n_labels, n_clusters)
    padded = np.zeros((size, size), dtype=np.float64)
    padded[:n_labels, :n_clusters] = counts
    perm = hungarian(-padded)
    mapping = {}
    matched = 0
    for label_row, cluster_col in enumerate(perm):
        if label_row < n_labels and cluster_col < n_clusters:
            mapping[int(cluster_col)] = label_row
            matched += counts[label_row, cluster_col]
    acc = matched / counts.sum()
    return float(acc), mapping


def entropy(counts: np.ndarray) -> float:
    """Natural-log entropy of a discrete distribution given by counts."""
    counts = counts[counts > 0].astype(np.float64)
    n = counts.sum()
    p = counts / n
    return float(-(p * np.log(p)).sum())


def mutual_information(counts: np.ndarray) -> float:
    """MI (natural logs) of the joint distribution given by a count matrix."""
    n = counts.sum()
    a = counts.sum(axis=1)
    b = counts.sum(axis=0)
    mi = 0.0
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            nij = counts[i, j]
            if nij > 0:
                mi += (nij / n) * np.log(n * nij / (a[i] * b[j]))
    return float(mi)


def expected_mutual_information(a: np.ndarray, b: np.ndarray, n: int) -> float:
    """E[MI] over random tables with fixed margins (permutation model).

    Exact sum over the hypergeometric support using log-gamma terms.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    emi = 0.0
    log_n = np.log(n)
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            for nij in range(lo, hi + 1):
                log_term = (
                    gammaln(ai + 1) + gammaln(bj + 1)
                    + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                    - gammaln(n + 1) - gammaln(nij + 1)
                    - gammaln(ai - nij + 1) - gammaln(bj - nij + 1)
                    - gammaln(n - ai - bj + nij + 1)
                )
                emi += (nij / n) * (log_n + np.log(nij) - np.log(ai * bj)) * np.exp(log_term)
    return float(emi)


def adjusted_mutual_information(labels, clusters) -> float:
    """AMI with arithmetic-mean normalization and natural logarithms.

    Defined as 1.0 when both partitions are a single cluster (identical
    trivial partitions).
    """
    counts = confusion_matrix(labels, clusters)
    a = counts.sum(axis=1)
    b = counts.sum(axis=0)
    a = a[a > 0]
    b = b[b > 0]
    if a.size == 1 and b.size == 1:
        return 1.0
    n = int(counts.sum())
    mi = mutual_information(counts)
    emi = expected_mutual_information(a, b, n)
    h_mean = (entropy(a) + entropy(b)) / 2.0
    denom = h_mean - emi
    if denom == 0.0:
        return 0.0
    return float((mi - emi) / denom)


def silhouette_score(embeddings: np.ndarray, assignments, sample_cap: int = 2000,
                     seed: int = 0) -> float:
    """Mean silhouette with cosine distance d = 1 - cos.

    s(i) = (b - a) / max(a, b) with a = mean intra-cluster distance
    (excluding self) and b = smallest mean distance to another cluster.
    Singletons score 0, as does the a = b = 0 degenerate case. When n
    exceeds ``sample_cap``, scores are averaged over a seeded subsample
    of points (distances still use the full dataset).
    """
    x = np.asarray(embeddings, dtype=np.float64)
    assignments = np.asarray(assignments, dtype=np.int64)
    n = x.shape[0]
    if assignments.shape != (n,):
        raise ValueError("assignments must match embeddings rows")
    if n < 3:
        raise ValueError("need at least 3 points")
    cluster_ids = np.unique(assignments)
    if cluster_ids.size < 2:
        raise ValueError("silhouette requires at least 2 clusters")
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        raise ValueError("embeddings contain a zero row")
    unit = x / norms[:, None]

    if n > sample_cap:
        sample = np.sort(derive_rng(seed, "silhouette").choice(n, size=sample_cap, replace=False))
    else:
        sample = np.arange(n)

    counts = {int(c): int(np.sum(assignments == c)) for c in cluster_ids}
    sims = unit[sample] @ unit.T
    dists = 1.0 - sims
    scores = np.empty(sample.size)
    for row, i in enumerate(sample):
        own = int(assignments[i])
        if counts[own] == 1:
            scores[row] = 0.0
            continue
        d = dists[row]
        a = (d[assignments == own].sum() - d[i]) / (counts[own] - 1)
        b = np.inf
        for c in cluster_ids:
            c = int(c)
            if c == own:
                continue
            b = min(b, d[assignments == c].mean())
        top = max(a, b)
        scores[row] = 0.0 if top == 0.0 else (b - a) / top
    return float(scores.mean())


def evaluate_clustering(labels, clusters, embeddings: np.ndarray | None = None,
                        sample_cap: int = 2000, seed: int = 0) -> EvalReport:
    """Full metric report; silhouette is NaN when embeddings are omitted."""
    acc, mapping = clustering_accuracy(labels, clusters)
    ami = adjusted_mutual_information(labels, clusters)
    if embeddings is not None:
        sil = silhouette_score(embeddings, clusters, sample_cap=sample_cap, seed=seed)
    else:
        sil = float("nan")
    return EvalReport(
        acc=acc,
        ami=ami,
        silhouette=sil,
        confusion=confusion_matrix(labels, clusters),
        mapping=mapping,
    )
