"""Word/hashtag embedding space trained with CBOW and negative sampling."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..errors import TrainingError
from ..stream import Post
from .text import corpus_tokens

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Word2VecParams:
    dim: int = 64
    window: int = 5
    negative: int = 5
    epochs: int = 10
    lr: float = 0.05
    min_lr: float = 1e-4
    min_count: int = 2
    batch_size: int = 128
    ns_exponent: float = 0.75

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EmbeddingSpace:
    tokens: list[str]
    vectors: np.ndarray
    params: Word2VecParams = field(default_factory=Word2VecParams)
    counts: list[int] | None = None

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.shape[0] != len(self.tokens):
            raise ValueError("one vector row per token required")
        self.index = {t: i for i, t in enumerate(self.tokens)}
        self.hashtag_mask = np.array([t.startswith("#") for t in self.tokens], dtype=bool)
        # hashtag rows sorted by name: a stable sort on -similarity then breaks ties lexicographically
        rows = np.flatnonzero(self.hashtag_mask)
        names = [self.tokens[i][1:] for i in rows]
        order = sorted(range(len(names)), key=names.__getitem__)
        self._hashtag_rows = rows[order]
        self._hashtag_names = [names[i] for i in order]
        mat = self.vectors[self._hashtag_rows]
        norms = np.linalg.norm(mat, axis=1, keepdims=True)
        self._hashtag_unit = mat / np.where(norms > 0, norms, 1.0)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def hashtags(self) -> list[str]:
        return list(self._hashtag_names)

    @property
    def words(self) -> list[str]:
        return [t for t in self.tokens if not t.startswith("#")]

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def has_hashtag(self, h: str) -> bool:
        return ("#" + h) in self.index

    def vector(self, token: str) -> np.ndarray:
        return self.vectors[self.index[token]]

    def hashtag_vector(self, h: str) -> np.ndarray:
        return self.vectors[self.index["#" + h]]

    def hashtag_similarities(self, v: np.ndarray) -> np.ndarray:
        """Cosine similarity of each row of ``v`` against all hashtags (name order)."""
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("cannot rank hashtags against a zero vector")
        return (v / norms) @ self._hashtag_unit.T


def knn_hashtags(space: EmbeddingSpace, v: np.ndarray, m: int) -> list[tuple[str, float]]:
    """The ``m`` hashtags most cosine-similar to ``v``; ties broken by hashtag name."""
    if m < 1:
        raise ValueError("m must be >= 1")
    sims = space.hashtag_similarities(v)[0]
    order = np.argsort(-sims, kind="stable")[:m]
    return [(space._hashtag_names[i], float(sims[i])) for i in order]


def knn_batch(space: EmbeddingSpace, vs: np.ndarray, m: int) -> list[list[str]]:
    sims = space.hashtag_similarities(vs)
    order = np.argsort(-sims, axis=1, kind="stable")[:, :m]
    names = space._hashtag_names
    return [[names[i] for i in row] for row in order]


def _coefficients(idx: np.ndarray, weights: np.ndarray, n_cols: int) -> np.ndarray:
    """Dense (batch, n_cols) matrix with weights[b, j] accumulated at column idx[b, j]."""
    rows = np.repeat(np.arange(idx.shape[0]), idx.shape[1])
    flat = rows * n_cols + idx.ravel()
    return np.bincount(flat, weights=weights.ravel(), minlength=idx.shape[0] * n_cols).reshape(idx.shape[0], n_cols)


def _training_examples(sentences: list[list[int]], window: int):
    """(context matrix padded with -1, context counts, centre ids) for every position."""
    ctx_rows, centers = [], []
    width = 2 * window
    for sent in sentences:
        n = len(sent)
        if n < 2:
            continue
        for i, c in enumerate(sent):
            ctx = sent[max(0, i - window):i] + sent[i + 1:i + 1 + window]
            ctx_rows.append(ctx + [-1] * (width - len(ctx)))
            centers.append(c)
    if not centers:
        return np.empty((0, width), dtype=np.int64), np.empty(0), np.empty(0, dtype=np.int64)
    ctx = np.asarray(ctx_rows, dtype=np.int64)
    counts = (ctx >= 0).sum(axis=1).astype(np.float64)
    return ctx, counts, np.asarray(centers, dtype=np.int64)


def train_word2vec(posts: Sequence[Post], params: Word2VecParams | None = None, seed: int = 0) -> EmbeddingSpace:
    """Train CBOW with negative sampling on the posts' text, hashtags kept as tokens."""
    params = params or Word2VecParams()
    sentences_tok = [corpus_tokens(p) for p in posts]
    freq = Counter(t for s in sentences_tok for t in s)
    if not freq:
        raise TrainingError("empty corpus: no tokens to train on")
    if not any(t.startswith("#") for t in freq):
        raise TrainingError("corpus contains no hashtag occurrences")

    vocab = sorted((t for t, c in freq.items() if c >= params.min_count), key=lambda t: (-freq[t], t))
    if not vocab:
        raise TrainingError(f"no token reaches min_count={params.min_count}")
    index = {t: i for i, t in enumerate(vocab)}
    sentences = [[index[t] for t in s if t in index] for s in sentences_tok]
    ctx, ctx_counts, centers = _training_examples(sentences, params.window)

    rng = np.random.default_rng(seed)
    V, d = len(vocab), params.dim
    w_in = (rng.random((V, d)) - 0.5) / d
    w_out = np.zeros((V + 1, d))  # extra zero row absorbs padding lookups
    w_in_pad = np.vstack([w_in, np.zeros((1, d))])

    counts = np.array([freq[t] for t in vocab], dtype=np.float64)
    noise = counts ** params.ns_exponent
    noise /= noise.sum()
    cum_noise = np.cumsum(noise)

    n = len(centers)
    total_steps = max(1, params.epochs * ((n + params.batch_size - 1) // params.batch_size))
    step = 0
    for _ in range(params.epochs):
        if n == 0:
            break
        perm = rng.permutation(n)
        for start in range(0, n, params.batch_size):
            lr = params.lr - (params.lr - params.min_lr) * step / total_steps
            step += 1
            b = perm[start:start + params.batch_size]
            bctx = ctx[b]
            pad_ctx = np.where(bctx >= 0, bctx, V)
            # mean-of-context as a (batch, V+1) averaging matrix; padding column V stays zero
            avg = _coefficients(pad_ctx, np.broadcast_to(1.0 / ctx_counts[b][:, None], pad_ctx.shape), V + 1)
            h = avg @ w_in_pad

            negs = np.searchsorted(cum_noise, rng.random((len(b), params.negative)))
            negs = np.minimum(negs, V - 1)
            targets = np.concatenate([centers[b][:, None], negs], axis=1)
            labels = np.zeros(targets.shape)
            labels[:, 0] = 1.0
            valid = np.ones(targets.shape)
            valid[:, 1:] = negs != centers[b][:, None]

            logits = np.take_along_axis(h @ w_out.T, targets, axis=1)
            score = 1.0 / (1.0 + np.exp(-np.clip(logits, -30, 30)))
            coef = _coefficients(targets, (labels - score) * valid * lr, V + 1)
            grad_h = coef @ w_out
            w_out += coef.T @ h
            w_in_pad += avg.T @ grad_h
            w_in_pad[V] = 0.0

    vectors = w_in_pad[:V].copy()
    if not np.all(np.isfinite(vectors)):
        raise TrainingError("non-finite word vectors after training")
    log.debug("word2vec: %d tokens, %d examples, %d epochs", V, n, params.epochs)
    return EmbeddingSpace(vocab, vectors, params, [int(freq[t]) for t in vocab])
