"""Unsupervised text classification by contrastive representation learning.

The pipeline: split documents into sentences, form positive pairs either
by shuffling and halving each document (shuffle & divide) or by TF-IDF
nearest-neighbor sampling, train a small mean-pooling encoder with the
normalized temperature-scaled cross entropy loss, cluster the resulting
embeddings with spherical k-means, and pick the best epoch by silhouette
score, all without labels.
"""

from .augment import DocumentViewPair, shuffle_divide, shuffle_divide_epoch
from .cluster import ClusterModel, assign, spherical_kmeans
from .contrastive import (
    ContrastiveBatch,
    TrainConfig,
    TrainResult,
    build_batch_sad,
    build_batch_tps,
    nt_xent_gradient,
    nt_xent_loss,
    optimizer_step,
    plan_tps_batches,
    supervised_finetune,
    train,
)
from .corpus import (
    Corpus,
    Document,
    filter_min_sentences,
    load_corpus,
    make_document,
    preprocess_newsgroup_style,
    preprocess_reuters_style,
    save_corpus,
    split_sentences,
)
from .encoder import (
    EncoderParams,
    Vocabulary,
    build_vocab,
    embed_corpus,
    encode,
    encode_batch,
    init_params,
    load_checkpoint,
    load_external_embeddings,
    lookup_external,
    save_checkpoint,
    tokenize,
)
from .evaluate import (
    EvalReport,
    adjusted_mutual_information,
    clustering_accuracy,
    confusion_matrix,
    evaluate_clustering,
    hungarian,
    silhouette_score,
)
from .rng import derive_rng, derive_seed, fisher_yates
from .synth import generate_synthetic_corpus
from .tfidf import (
    PositivePairing,
    SparseVector,
    TfIdfModel,
    blended_similarity,
    cosine_similarity,
    fit_tfidf,
    label_match_rate,
    similarity_matrix,
    top1_from_matrix,
    top1_positive_sampling,
    transform,
    transform_corpus,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterModel",
    "ContrastiveBatch",
    "Corpus",
    "Document",
    "DocumentViewPair",
    "EncoderParams",
    "EvalReport",
    "PositivePairing",
    "SparseVector",
    "TfIdfModel",
    "TrainConfig",
    "TrainResult",
    "Vocabulary",
    "adjusted_mutual_information",
    "assign",
    "blended_similarity",
    "build_batch_sad",
    "build_batch_tps",
    "build_vocab",
    "clustering_accuracy",
    "confusion_matrix",
    "cosine_similarity",
    "derive_rng",
    "derive_seed",
    "embed_corpus",
    "encode",
    "encode_batch",
    "evaluate_clustering",
    "filter_min_sentences",
    "fisher_yates",
    "fit_tfidf",
    "generate_synthetic_corpus",
    "hungarian",
    "init_params",
    "label_match_rate",
    "load_checkpoint",
    "load_corpus",
    "load_external_embeddings",
    "lookup_external",
    "make_document",
    "nt_xent_gradient",
    "nt_xent_loss",
    "optimizer_step",
    "plan_tps_batches",
    "preprocess_newsgroup_style",
    "preprocess_reuters_style",
    "save_checkpoint",
    "save_corpus",
    "shuffle_divide",
    "shuffle_divide_epoch",
    "silhouette_score",
    "similarity_matrix",
    "spherical_kmeans",
    "split_sentences",
    "supervised_finetune",
    "tokenize",
    "top1_from_matrix",
    "top1_positive_sampling",
    "train",
    "transform",
    "transform_corpus",
]
