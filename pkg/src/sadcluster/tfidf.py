"""TF-IDF vectors, cosine similarity, and top-1 positive sampling.

Provides the lexical half of positive-pair construction: each document
gets a smoothed TF-IDF vector, every document is paired with its most
cosine-similar neighbor, and across epochs the lexical similarity is
blended with model-embedding similarity by a decaying weight so the
pairing shifts from lexical to semantic as training progresses.
"""

import re
from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .corpus import Corpus, Document

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize_text(text: str) -> list[str]:
    """Lowercase tokens split on non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class TfIdfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    num_docs: int


@dataclass
class SparseVector:
    """L2 vector stored as sorted (index, value) pairs.

    ``indices`` are strictly increasing and < dim; ``values`` are finite
    and strictly positive. Empty support encodes the zero vector.
    """

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.indices.shape != self.values.shape:
            raise ValueError("indices and values must have the same length")
        if self.indices.size:
            if not np.all(np.diff(self.indices) > 0):
                raise ValueError("indices must be strictly increasing")
            if self.indices[0] < 0 or self.indices[-1] >= self.dim:
                raise ValueError("index out of range")
            if not np.all(np.isfinite(self.values)) or not np.all(self.values > 0):
                raise ValueError("values must be finite and positive")

    @property
    def is_zero(self) -> bool:
        return self.indices.size == 0

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))


@dataclass
class PositivePairing:
    """For each document index n, its sampled partner m != n."""

    partner: np.ndarray
    similarity: np.ndarray

    def __post_init__(self):
        self.partner = np.asarray(self.partner, dtype=np.int64)
        self.similarity = np.asarray(self.similarity, dtype=np.float64)
        n = self.partner.shape[0]
        if np.any(self.partner == np.arange(n)):
            raise ValueError("a document cannot be its own partner")
        if np.any((self.partner < 0) | (self.partner >= n)):
            raise ValueError("partner index out of range")


def fit_tfidf(corpus: Corpus) -> TfIdfModel:
    """Fit vocabulary and smoothed idf weights on a corpus.

    idf[t] = ln((1 + N) / (1 + df(t))) + 1, always > 0.
    """
    if len(corpus) == 0:
        raise ValueError("cannot fit TF-IDF on an empty corpus")
    df: Counter = Counter()
    for doc in corpus.documents:
        df.update(set(tokenize_text(doc.text)))
    if not df:
        raise ValueError("corpus contains no tokens")
    vocabulary = {token: i for i, token in enumerate(sorted(df))}
    n = len(corpus)
    df_arr = np.array([df[token] for token in sorted(df)], dtype=np.float64)
    idf = np.log((1.0 + n) / (1.0 + df_arr)) + 1.0
    return TfIdfModel(vocabulary=vocabulary, idf=idf, num_docs=n)


def transform(model: TfIdfModel, doc: Document) -> SparseVector:
    """TF-IDF vector of one document, L2-normalized; OOV tokens ignored."""
    counts: Counter = Counter()
    for token in tokenize_text(doc.text):
        idx = model.vocabulary.get(token)
        if idx is not None:
            counts[idx] += 1
    dim = len(model.vocabulary)
    if not counts:
        return SparseVector(np.empty(0, dtype=np.int64), np.empty(0), dim)
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices], dtype=np.float64) * model.idf[indices]
    values /= np.sqrt(np.dot(values, values))
    return SparseVector(indices, values, dim)


def transform_corpus(model: TfIdfModel, corpus: Corpus) -> list[SparseVector]:
    return [transform(model, doc) for doc in corpus.documents]


def _sparse_dot(a: SparseVector, b: SparseVector) -> float:
    # merged walk over the two sorted index lists
    total = 0.0
    i = j = 0
    ai, av, bi, bv = a.indices, a.values, b.indices, b.values
    while i < ai.size and j < bi.size:
        if ai[i] == bi[j]:
            total += av[i] * bv[j]
            i += 1
            j += 1
        elif ai[i] < bi[j]:
            i += 1
        else:
            j += 1
    return total


def cosine_similarity(a, b) -> float:
    """Cosine of two vectors (sparse or dense); 0.0 if either has zero norm."""
    if isinstance(a, SparseVector) and isinstance(b, SparseVector):
        na, nb = a.norm(), b.norm()
        if na == 0.0 or nb == 0.0:
            return 0.0
        return _sparse_dot(a, b) / (na * nb)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def _to_csr(vectors: list[SparseVector]) -> scipy.sparse.csr_matrix:
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + v.indices.size
    indices = np.concatenate([v.indices for v in vectors]) if vectors else np.empty(0, np.int64)
    data = np.concatenate([v.values for v in vectors]) if vectors else np.empty(0)
    dim = vectors[0].dim if vectors else 0
    return scipy.sparse.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


def similarity_matrix(vectors) -> np.ndarray:
    """Dense n x n cosine similarity matrix; zero-norm rows give 0 rows."""
    if isinstance(vectors, np.ndarray):
        x = np.asarray(vectors, dtype=np.float64)
        norms = np.linalg.norm(x, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        unit = x / safe[:, None]
        sims = unit @ unit.T
    else:
        if any(not isinstance(v, SparseVector) for v in vectors):
            raise TypeError("expected a list of SparseVector or a 2-D array")
        if len({v.dim for v in vectors}) > 1:
            raise ValueError("all vectors must share the same dimension")
        x = _to_csr(vectors)
        norms = np.sqrt(np.asarray(x.multiply(x).sum(axis=1)).ravel())
        safe = np.where(norms > 0, norms, 1.0)
        unit = scipy.sparse.diags(1.0 / safe) @ x
        sims = np.asarray((unit @ unit.T).todense())
    zero = norms == 0
    if np.any(zero):
        sims[zero, :] = 0.0
        sims[:, zero] = 0.0
    return sims


def top1_from_matrix(sims: np.ndarray) -> PositivePairing:
    """Partner of each row = argmax off the diagonal, ties to smallest index."""
    n = sims.shape[0]
    if n < 2:
        raise ValueError("need at least 2 documents to sample positives")
    if sims.shape != (n, n):
        raise ValueError("similarity matrix must be square")
    masked = sims.astype(np.float64, copy=True)
    np.fill_diagonal(masked, -np.inf)
    partner = np.argmax(masked, axis=1)
    return PositivePairing(partner, masked[np.arange(n), partner])


def top1_positive_sampling(vectors) -> PositivePairing:
    """Pair each document with its most cosine-similar other document."""
    return top1_from_matrix(similarity_matrix(vectors))


def blended_similarity(sim_tfidf: np.ndarray, sim_model: np.ndarray,
                       alpha: float, epoch: int) -> np.ndarray:
    """Per-epoch blend of lexical and model similarity.

    S = a^(epoch-1) * sim_tfidf + (1 - a^(epoch-1)) * sim_model. At
    epoch 1 the result is sim_tfidf exactly, bit for bit.
    """
    sim_tfidf = np.asarray(sim_tfidf, dtype=np.float64)
    sim_model = np.asarray(sim_model, dtype=np.float64)
    if sim_tfidf.shape != sim_model.shape:
        raise ValueError(
            f"shape mismatch: {sim_tfidf.shape} vs {sim_model.shape}"
        )
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if epoch < 1:
        raise ValueError("epoch numbering starts at 1")
    if epoch == 1:
        return sim_tfidf.copy()
    w = alpha ** (epoch - 1)
    return w * sim_tfidf + (1.0 - w) * sim_model


def label_match_rate(pairing: PositivePairing, labels) -> float:
    """Fraction of documents whose sampled partner shares their label.

    Diagnostic only: uses gold labels for reporting, never for training.
    """
    labels = list(labels)
    if any(label is None for label in labels):
        raise ValueError("all documents must be labeled to compute match rate")
    if len(labels) != pairing.partner.shape[0]:
        raise ValueError("labels and pairing size mismatch")
    arr = np.asarray(labels)
    return float(np.mean(arr[pairing.partner] == arr))
