"""Contrastive training: batches, NT-Xent loss, optimizers, training loop.

Positive pairs come either from shuffle & divide (two halves of the same
document) or from TF-IDF top-1 sampling (a document and its most similar
neighbor). Each mini-batch holds B pairs laid out as rows (2i, 2i+1);
every anchor sees its positive plus 2B-2 negatives. Model selection is
label-free: after each epoch the corpus is embedded, clustered with
spherical k-means, and scored by cosine silhouette; the epoch with the
best silhouette wins.
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .augment import shuffle_divide
from .cluster import spherical_kmeans
from .corpus import Corpus
from .encoder import (
    EncoderParams,
    TokenSequence,
    Vocabulary,
    build_vocab,
    embed_corpus,
    encode_batch_backward,
    encode_batch_forward,
    init_params,
    tokenize,
)
from .evaluate import silhouette_score
from .rng import derive_rng, derive_seed
from .tfidf import (
    PositivePairing,
    blended_similarity,
    fit_tfidf,
    label_match_rate,
    similarity_matrix,
    top1_from_matrix,
    transform_corpus,
)


@dataclass
class TrainConfig:
    """Hyperparameters for contrastive training.

    ``epochs=None`` uses the method default: ceil(n / batch_size) for
    sad, 4 for tps. ``num_clusters`` drives the per-epoch k-means used
    for silhouette model selection and must be set before training.
    """

    method: str = "sad"
    batch_size: int = 320
    temperature: float = 0.5
    learning_rate: float = 3e-5
    optimizer: str = "adamw"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    epochs: int | None = None
    alpha: float = 0.5
    seed: int = 0
    max_len_train: int = 128
    max_len_test: int = 256
    num_clusters: int | None = None
    embed_dim: int = 64
    output_dim: int | None = 64
    max_vocab: int = 30000

    def __post_init__(self):
        if self.method not in ("sad", "tps"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.optimizer not in ("adamw", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.epochs is not None and self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.max_len_train < 1 or self.max_len_test < 1:
            raise ValueError("max lengths must be >= 1")


@dataclass
class ContrastiveBatch:
    """2B views with positives at (2i, 2i+1), plus their source doc ids."""

    views: list[TokenSequence]
    source_ids: list[str]

    def __post_init__(self):
        if len(self.views) != len(self.source_ids):
            raise ValueError("views and source_ids must align")
        if len(self.views) % 2 != 0 or len(self.views) < 4:
            raise ValueError("batch must hold at least 2 pairs")

    @property
    def num_pairs(self) -> int:
        return len(self.views) // 2


@dataclass
class TrainResult:
    best_params: EncoderParams
    final_params: EncoderParams
    vocab: Vocabulary
    history: list[dict]
    best_epoch: int


def build_batch_sad(docs, rng: np.random.Generator, vocab: Vocabulary,
                    max_len_train: int) -> ContrastiveBatch:
    """Shuffle-and-divide batch: each document contributes both halves."""
    views = []
    source_ids = []
    for doc in docs:
        pair = shuffle_divide(doc, rng)
        views.append(tokenize(pair.view_a, vocab, max_len_train))
        views.append(tokenize(pair.view_b, vocab, max_len_train))
        source_ids.extend([doc.id, doc.id])
    return ContrastiveBatch(views=views, source_ids=source_ids)


def build_batch_tps(pairing: PositivePairing, documents, anchors,
                    vocab: Vocabulary, max_len: int) -> ContrastiveBatch:
    """TPS batch from anchor indices: views (2i, 2i+1) = (D_n, D_partner[n]).

    A document may appear at most once in a batch, whether as anchor or
    partner; a collision raises.
    """
    views = []
    source_ids = []
    used: set[int] = set()
    for n in anchors:
        n = int(n)
        m = int(pairing.partner[n])
        if n in used or m in used:
            raise ValueError(
                f"document collision in batch: anchor {n} / partner {m} "
                "already sampled"
            )
        used.update((n, m))
        views.append(tokenize(documents[n].text, vocab, max_len))
        views.append(tokenize(documents[m].text, vocab, max_len))
        source_ids.extend([documents[n].id, documents[m].id])
    return ContrastiveBatch(views=views, source_ids=source_ids)


def plan_tps_batches(pairing: PositivePairing, batch_size: int,
                     rng: np.random.Generator) -> list[list[int]]:
    """Split all documents into collision-free anchor batches.

    Documents are visited in a random order; an anchor whose pair would
    collide with the current batch is deferred to the next one. Batches
    with fewer than 2 pairs are dropped.
    """
    n = pairing.partner.shape[0]
    remaining = deque(int(i) for i in rng.permutation(n))
    batches = []
    while remaining:
        current: list[int] = []
        used: set[int] = set()
        deferred: list[int] = []
        while remaining and len(current) < batch_size:
            i = remaining.popleft()
            m = int(pairing.partner[i])
            if i in used or m in used:
                deferred.append(i)
                continue
            current.append(i)
            used.update((i, m))
        if len(current) >= 2:
            batches.append(current)
        if not current:
            break
        remaining = deque(deferred + list(remaining))
    return batches


def _normalize_embeddings(embeddings: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] % 2 != 0:
        raise ValueError("embeddings must be a 2B x d matrix")
    if x.shape[0] < 4:
        raise ValueError("need at least 2 pairs (no negatives otherwise)")
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero-norm embedding row")
    return x / norms[:, None], norms


def _masked_logits(unit: np.ndarray, temperature: float) -> np.ndarray:
    logits = (unit @ unit.T) / temperature
    np.fill_diagonal(logits, -np.inf)
    return logits


def nt_xent_loss(embeddings: np.ndarray, temperature: float) -> float:
    """Normalized temperature-scaled cross entropy over 2B embeddings.

    Row 2i's positive is row 2i+1 and vice versa; all other 2B-2 rows
    are negatives. Rows are L2-normalized first, and the log-sum-exp is
    stabilized by max subtraction.
    """
    unit, _ = _normalize_embeddings(embeddings)
    n = unit.shape[0]
    logits = _masked_logits(unit, temperature)
    pos = np.arange(n) ^ 1
    row_max = logits.max(axis=1)
    lse = row_max + np.log(np.exp(logits - row_max[:, None]).sum(axis=1))
    losses = lse - logits[np.arange(n), pos]
    return float(losses.mean())


def nt_xent_gradient(embeddings: np.ndarray, temperature: float) -> np.ndarray:
    """Exact gradient of ``nt_xent_loss`` w.r.t. the unnormalized rows."""
    unit, norms = _normalize_embeddings(embeddings)
    n = unit.shape[0]
    logits = _masked_logits(unit, temperature)
    pos = np.arange(n) ^ 1
    row_max = logits.max(axis=1)
    shifted = np.exp(logits - row_max[:, None])
    softmax = shifted / shifted.sum(axis=1, keepdims=True)
    g = softmax
    g[np.arange(n), pos] -= 1.0
    g /= n
    grad_unit = (g + g.T) @ unit / temperature
    radial = np.sum(grad_unit * unit, axis=1, keepdims=True)
    return (grad_unit - radial * unit) / norms[:, None]


@dataclass
class OptimizerState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def init_optimizer_state() -> OptimizerState:
    return OptimizerState()


def optimizer_step(params, grads: dict[str, np.ndarray], config: TrainConfig,
                   state: OptimizerState) -> None:
    """One in-place AdamW (decoupled weight decay) or SGD update.

    ``params`` is an EncoderParams or a plain name-to-array dict; arrays
    are updated in place. Non-finite gradients abort with the tensor name.
    """
    tensors = params.tensors() if isinstance(params, EncoderParams) else params
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"non-finite gradient for {name}")
        if tensors[name].shape != grad.shape:
            raise ValueError(f"shape mismatch for {name}")
    lr = config.learning_rate
    wd = config.weight_decay
    if config.optimizer == "sgd":
        for name, grad in grads.items():
            tensors[name] -= lr * (grad + wd * tensors[name])
    else:
        state.step += 1
        t = state.step
        b1, b2 = config.beta1, config.beta2
        for name, grad in grads.items():
            if name not in state.m:
                state.m[name] = np.zeros_like(grad)
                state.v[name] = np.zeros_like(grad)
            m = state.m[name]
            v = state.v[name]
            m *= b1
            m += (1 - b1) * grad
            v *= b2
            v += (1 - b2) * grad**2
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            tensors[name] -= lr * (m_hat / (np.sqrt(v_hat) + config.eps)
                                   + wd * tensors[name])
    for name, tensor in tensors.items():
        if not np.all(np.isfinite(tensor)):
            raise FloatingPointError(f"non-finite values in {name} after update")


def _train_step(params: EncoderParams, state: OptimizerState,
                batch: ContrastiveBatch, config: TrainConfig) -> float:
    out, cache = encode_batch_forward(params, batch.views)
    loss = nt_xent_loss(out, config.temperature)
    grad_out = nt_xent_gradient(out, config.temperature)
    grads = encode_batch_backward(params, cache, grad_out)
    optimizer_step(params, grads, config, state)
    return loss


def default_epochs(method: str, corpus_size: int, batch_size: int) -> int:
    """Method defaults: ceil(n / B) for sad, 4 for tps."""
    if method == "sad":
        return max(1, math.ceil(corpus_size / batch_size))
    return 4


def train(corpus: Corpus, config: TrainConfig) -> TrainResult:
    """Contrastive training with label-free epoch selection.

    Each epoch regenerates positives (reshuffled halves for sad, blended
    top-1 resampling for tps), steps through the mini-batches, then
    embeds the whole corpus, clusters it, and records the silhouette.
    The returned ``best_params`` are from the best-silhouette epoch
    (ties to the earliest); history has one record per epoch.
    """
    if config.num_clusters is None or config.num_clusters < 2:
        raise ValueError("config.num_clusters must be set (>= 2) for training")
    n = len(corpus)
    if n < max(2, config.num_clusters):
        raise ValueError(f"corpus too small: {n} documents")
    vocab = build_vocab(corpus, config.max_vocab)
    params = init_params(len(vocab), config.embed_dim, config.output_dim,
                         seed=config.seed)
    state = init_optimizer_state()
    if config.epochs is not None:
        epochs = config.epochs
    else:
        epochs = default_epochs(config.method, n, config.batch_size)
    if epochs < 1:
        raise ValueError("training needs at least 1 epoch")

    sim_tfidf = None
    if config.method == "tps":
        model = fit_tfidf(corpus)
        sim_tfidf = similarity_matrix(transform_corpus(model, corpus))

    all_labeled = all(doc.label is not None for doc in corpus.documents)
    history: list[dict] = []
    best_epoch = -1
    best_silhouette = -np.inf
    best_params = params.copy()

    for epoch in range(1, epochs + 1):
        rng = derive_rng(config.seed, "epoch", epoch)
        batch_losses: list[float] = []
        match_rate = None

        if config.method == "sad":
            order = rng.permutation(n)
            batch_starts = range(0, n, config.batch_size)
            for b, start in enumerate(batch_starts):
                idx = order[start:start + config.batch_size]
                if idx.size < 2:
                    continue  # loss undefined below 2 pairs
                docs = [corpus.documents[i] for i in idx]
                try:
                    batch = build_batch_sad(docs, rng, vocab, config.max_len_train)
                    batch_losses.append(_train_step(params, state, batch, config))
                except (ValueError, FloatingPointError) as err:
                    raise RuntimeError(f"epoch {epoch}, batch {b}: {err}") from err
        else:
            if epoch == 1:
                sims = sim_tfidf.copy()
            else:
                embeddings = embed_corpus(params, vocab, corpus, config.max_len_test)
                sims = blended_similarity(sim_tfidf, similarity_matrix(embeddings),
                                          config.alpha, epoch)
            pairing = top1_from_matrix(sims)
            if all_labeled:
                match_rate = label_match_rate(pairing, corpus.labels_array())
            for b, anchors in enumerate(plan_tps_batches(pairing, config.batch_size, rng)):
                try:
                    batch = build_batch_tps(pairing, corpus.documents, anchors,
                                            vocab, config.max_len_train)
                    batch_losses.append(_train_step(params, state, batch, config))
                except (ValueError, FloatingPointError) as err:
                    raise RuntimeError(f"epoch {epoch}, batch {b}: {err}") from err

        embeddings = embed_corpus(params, vocab, corpus, config.max_len_test)
        kmeans_seed = derive_seed(config.seed, "kmeans-epoch", epoch)
        silhouette_seed = derive_seed(config.seed, "silhouette-epoch", epoch)
        cluster_model = spherical_kmeans(embeddings, k=config.num_clusters,
                                         seed=kmeans_seed)
        silhouette = silhouette_score(embeddings, cluster_model.assignments,
                                      sample_cap=2000, seed=silhouette_seed)
        record = {
            "epoch": epoch,
            "loss": float(np.mean(batch_losses)) if batch_losses else float("nan"),
            "batch_losses": batch_losses,
            "silhouette": silhouette,
            "kmeans_seed": kmeans_seed,
            "silhouette_seed": silhouette_seed,
        }
        if match_rate is not None:
            record["label_match_rate"] = match_rate
        history.append(record)
        if silhouette > best_silhouette:
            best_silhouette = silhouette
            best_epoch = epoch
            best_params = params.copy()

    return TrainResult(
        best_params=best_params,
        final_params=params,
        vocab=vocab,
        history=history,
        best_epoch=best_epoch,
    )


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def supervised_finetune(params: EncoderParams, vocab: Vocabulary,
                        train_corpus: Corpus, test_corpus: Corpus,
                        use_sad: bool, config: TrainConfig) -> tuple[dict, float]:
    """Fine-tune encoder + a linear softmax head on labeled documents.

    With ``use_sad``, every training document is replaced each epoch by
    one freshly shuffled half (train-time augmentation). Returns the head
    tensors and the held-out accuracy. The head starts at zero, so with
    0 epochs predictions collapse to class 0 (chance level on balanced
    data).
    """
    train_labels = np.array(train_corpus.labels_array())
    test_labels = np.array(test_corpus.labels_array())
    k = int(max(train_labels.max(), test_labels.max())) + 1
    head = {
        "head_w": np.zeros((params.output_dim, k)),
        "head_b": np.zeros(k),
    }
    params = params.copy()
    enc_state = init_optimizer_state()
    head_state = init_optimizer_state()
    epochs = 10 if config.epochs is None else config.epochs
    n = len(train_corpus)

    for epoch in range(1, epochs + 1):
        rng = derive_rng(config.seed, "finetune-epoch", epoch)
        texts = []
        for doc in train_corpus.documents:
            if use_sad and len(doc.sentences) >= 2:
                texts.append(shuffle_divide(doc, rng).view_a)
            else:
                texts.append(doc.text)
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            seqs = [tokenize(texts[i], vocab, config.max_len_train) for i in idx]
            labels = train_labels[idx]
            out, cache = encode_batch_forward(params, seqs)
            logits = out @ head["head_w"] + head["head_b"]
            probs = _softmax_rows(logits)
            d_logits = probs.copy()
            d_logits[np.arange(idx.size), labels] -= 1.0
            d_logits /= idx.size
            head_grads = {
                "head_w": out.T @ d_logits,
                "head_b": d_logits.sum(axis=0),
            }
            grad_out = d_logits @ head["head_w"].T
            enc_grads = encode_batch_backward(params, cache, grad_out)
            optimizer_step(head, head_grads, config, head_state)
            optimizer_step(params, enc_grads, config, enc_state)

    test_emb = embed_corpus(params, vocab, test_corpus, config.max_len_test)
    predictions = np.argmax(test_emb @ head["head_w"] + head["head_b"], axis=1)
    accuracy = float(np.mean(predictions == test_labels))
    return head, accuracy
