"""Token vocabulary and the trainable mean-pooling encoder.

The built-in encoder is deliberately small: an embedding table, a mean
pool over non-pad token positions, and an optional affine projection
with tanh. It trains from scratch with exact analytic gradients, and the
same interfaces accept externally computed document embeddings (e.g.
from a pre-trained transformer run out of process).
"""

import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .rng import derive_rng
from .tfidf import tokenize_text

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

# Embeddings are plain float64 arrays of dimension d'.
Embedding = np.ndarray

CHECKPOINT_FORMAT = "sadcluster-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class Vocabulary:
    """Dense token→id map with reserved pad=0 and unk=1."""

    token_to_id: dict[str, int]

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD_TOKEN]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK_TOKEN]

    def __len__(self) -> int:
        return len(self.token_to_id)


@dataclass
class TokenSequence:
    """Fixed-length id sequence: real ids first, pad ids as suffix."""

    ids: np.ndarray
    length: int
    max_len: int

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.ids.shape != (self.max_len,):
            raise ValueError("ids must have exactly max_len entries")
        if not 0 <= self.length <= self.max_len:
            raise ValueError("length out of range")
        if np.any(self.ids[self.length:] != 0):
            raise ValueError("pad ids must form the suffix")


@dataclass
class EncoderParams:
    """Trainable tensors: V x d embedding table, optional d x d' projection."""

    embedding_table: np.ndarray
    projection_w: np.ndarray | None = None
    projection_b: np.ndarray | None = None

    @property
    def output_dim(self) -> int:
        if self.projection_w is not None:
            return self.projection_w.shape[1]
        return self.embedding_table.shape[1]

    def check_finite(self) -> None:
        for name, tensor in self.tensors().items():
            if not np.all(np.isfinite(tensor)):
                raise FloatingPointError(f"non-finite values in {name}")

    def tensors(self) -> dict[str, np.ndarray]:
        out = {"embedding_table": self.embedding_table}
        if self.projection_w is not None:
            out["projection_w"] = self.projection_w
            out["projection_b"] = self.projection_b
        return out

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            embedding_table=self.embedding_table.copy(),
            projection_w=None if self.projection_w is None else self.projection_w.copy(),
            projection_b=None if self.projection_b is None else self.projection_b.copy(),
        )


def build_vocab(corpus: Corpus, max_vocab: int = 30000) -> Vocabulary:
    """Keep the ``max_vocab`` most frequent tokens, ties lexicographic."""
    if max_vocab < 1:
        raise ValueError("max_vocab must be >= 1")
    counts: Counter = Counter()
    for doc in corpus.documents:
        counts.update(tokenize_text(doc.text))
    if not counts:
        raise ValueError("corpus contains no tokens")
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    token_to_id = {PAD_TOKEN: 0, UNK_TOKEN: 1}
    for token, _ in ranked[:max_vocab]:
        token_to_id[token] = len(token_to_id)
    return Vocabulary(token_to_id)


def tokenize(text: str, vocab: Vocabulary, max_len: int) -> TokenSequence:
    """Tokenize, truncate to ``max_len``, map OOV to unk, pad to length."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    tokens = tokenize_text(text)[:max_len]
    ids = np.zeros(max_len, dtype=np.int64)
    unk = vocab.unk_id
    for i, token in enumerate(tokens):
        ids[i] = vocab.token_to_id.get(token, unk)
    return TokenSequence(ids=ids, length=len(tokens), max_len=max_len)


def init_params(vocab_size: int, embed_dim: int, output_dim: int | None,
                seed: int) -> EncoderParams:
    """Seeded initialization: table uniform(-0.05, 0.05), Xavier projection.

    ``output_dim=None`` builds a projection-free encoder whose output is
    the pooled ``embed_dim`` vector itself.
    """
    table_rng = derive_rng(seed, "init", "embedding")
    table = table_rng.uniform(-0.05, 0.05, size=(vocab_size, embed_dim))
    table[0, :] = 0.0  # pad row, never pooled but kept at zero
    if output_dim is None:
        return EncoderParams(embedding_table=table)
    proj_rng = derive_rng(seed, "init", "projection")
    limit = np.sqrt(6.0 / (embed_dim + output_dim))
    w = proj_rng.uniform(-limit, limit, size=(embed_dim, output_dim))
    b = np.zeros(output_dim)
    return EncoderParams(embedding_table=table, projection_w=w, projection_b=b)


def _stack(seqs: list[TokenSequence]) -> tuple[np.ndarray, np.ndarray]:
    for i, seq in enumerate(seqs):
        if seq.length == 0:
            raise ValueError(f"sequence {i}: all-pad input cannot be encoded")
    ids = np.stack([seq.ids for seq in seqs])
    lengths = np.array([seq.length for seq in seqs], dtype=np.int64)
    return ids, lengths


def encode_batch_forward(params: EncoderParams, seqs: list[TokenSequence]):
    """Forward pass for a batch; returns (outputs, cache for backward)."""
    ids, lengths = _stack(seqs)
    mask = np.arange(ids.shape[1])[None, :] < lengths[:, None]
    gathered = params.embedding_table[ids] * mask[:, :, None]
    pooled = gathered.sum(axis=1) / lengths[:, None]
    if params.projection_w is None:
        return pooled, {"ids": ids, "lengths": lengths, "mask": mask}
    out = np.tanh(pooled @ params.projection_w + params.projection_b)
    cache = {"ids": ids, "lengths": lengths, "mask": mask,
             "pooled": pooled, "out": out}
    return out, cache


def encode_batch_backward(params: EncoderParams, cache: dict,
                          grad_out: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. all tensors, given dL/d(outputs)."""
    ids, lengths, mask = cache["ids"], cache["lengths"], cache["mask"]
    if params.projection_w is None:
        grad_pooled = grad_out
        grads = {}
    else:
        grad_affine = grad_out * (1.0 - cache["out"] ** 2)
        grads = {
            "projection_w": cache["pooled"].T @ grad_affine,
            "projection_b": grad_affine.sum(axis=0),
        }
        grad_pooled = grad_affine @ params.projection_w.T
    per_position = (grad_pooled / lengths[:, None])[:, None, :] * mask[:, :, None]
    grad_table = np.zeros_like(params.embedding_table)
    np.add.at(grad_table, ids.ravel(), per_position.reshape(-1, per_position.shape[2]))
    grads["embedding_table"] = grad_table
    return grads


def encode_batch(params: EncoderParams, seqs: list[TokenSequence]) -> np.ndarray:
    """Embed a batch of sequences; row order matches input order."""
    out, _ = encode_batch_forward(params, seqs)
    return out


def encode(params: EncoderParams, seq: TokenSequence) -> Embedding:
    """Embed one sequence: mean of its token rows, projected if configured."""
    return encode_batch(params, [seq])[0]


def embed_corpus(params: EncoderParams, vocab: Vocabulary, corpus: Corpus,
                 max_len: int) -> np.ndarray:
    """Embed every document of a corpus at the given max length."""
    seqs = []
    for doc in corpus.documents:
        seq = tokenize(doc.text, vocab, max_len)
        if seq.length == 0:
            raise ValueError(f"document {doc.id!r} has no tokens")
        seqs.append(seq)
    return encode_batch(params, seqs)


def load_external_embeddings(path) -> dict[str, np.ndarray]:
    """Read id-keyed embeddings: header ``dim=<d>``, then ``<id> <d floats>``."""
    embeddings: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise ValueError("expected header line 'dim=<d>'")
        try:
            dim = int(header[4:])
        except ValueError as err:
            raise ValueError(f"bad dimension in header: {header!r}") from err
        if dim < 1:
            raise ValueError("embedding dimension must be >= 1")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            doc_id, values = parts[0], parts[1:]
            if len(values) != dim:
                raise ValueError(
                    f"line {lineno}: expected {dim} values, got {len(values)}"
                )
            if doc_id in embeddings:
                raise ValueError(f"line {lineno}: duplicate id {doc_id!r}")
            vec = np.array([float(v) for v in values])
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"line {lineno}: non-finite value")
            embeddings[doc_id] = vec
    return embeddings


def lookup_external(embeddings: dict[str, np.ndarray], corpus: Corpus) -> np.ndarray:
    """Stack external embeddings in corpus order; absent ids raise by name."""
    rows = []
    for doc in corpus.documents:
        if doc.id not in embeddings:
            raise KeyError(f"no external embedding for document id {doc.id!r}")
        rows.append(embeddings[doc.id])
    return np.stack(rows)


def save_checkpoint(params: EncoderParams, path) -> None:
    """Write parameters as deterministic jsonl (header, then one tensor/line)."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION,
                  "tensors": sorted(params.tensors())}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for name in sorted(params.tensors()):
            tensor = params.tensors()[name]
            record = {"name": name, "shape": list(tensor.shape),
                      "data": tensor.ravel().tolist()}
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_checkpoint(path) -> EncoderParams:
    """Read parameters written by ``save_checkpoint``."""
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a checkpoint file")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        tensors = {}
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            tensors[record["name"]] = np.array(record["data"]).reshape(record["shape"])
    if set(tensors) != set(header["tensors"]):
        raise ValueError("checkpoint tensor list does not match header")
    if "embedding_table" not in tensors:
        raise ValueError("checkpoint is missing the embedding table")
    return EncoderParams(
        embedding_table=tensors["embedding_table"],
        projection_w=tensors.get("projection_w"),
        projection_b=tensors.get("projection_b"),
    )
