"""Encoder + mapper semantic translation into the hashtag space, and its training.

The encoder is a trainable token table mean-pooled over a post's words; the mapper
is a tanh MLP with a linear output layer. Gradients are written out by hand and
checked against finite differences in the test suite.
"""
from __future__ import annotations

import copy
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigurationError, TrainingError
from ..stream import Post
from .embedding import EmbeddingSpace, knn_batch, knn_hashtags
from .text import text_tokens

log = logging.getLogger(__name__)

UNK = "<unk>"
EPS = 1e-12


class EmptyPostError(ValueError):
    pass


@dataclass
class Encoder:
    """Token embedding table; row 0 is the shared UNK embedding."""

    tokens: list[str]
    table: np.ndarray
    frozen: bool = False

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.float64)
        if self.tokens[0] != UNK:
            raise ValueError("row 0 of the encoder table must be UNK")
        self.index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def dim(self) -> int:
        return self.table.shape[1]

    def freeze(self) -> None:
        self.frozen = True

    def unfreeze(self) -> None:
        self.frozen = False

    def token_ids(self, text: str) -> list[int]:
        return [self.index.get(t, 0) for t in text_tokens(text)]

    def batch_ids(self, posts: Sequence[Post]) -> tuple[np.ndarray, np.ndarray]:
        """Padded id matrix (pad = len(table)) and token counts per post."""
        rows = [self.token_ids(p.text) for p in posts]
        width = max([len(r) for r in rows] + [1])
        pad = len(self.tokens)
        ids = np.full((len(rows), width), pad, dtype=np.int64)
        for i, r in enumerate(rows):
            ids[i, :len(r)] = r
        return ids, np.array([len(r) for r in rows], dtype=np.float64)

    def pool(self, ids: np.ndarray, counts: np.ndarray) -> np.ndarray:
        ext = np.vstack([self.table, np.zeros((1, self.dim))])
        return ext[ids].sum(axis=1) / np.maximum(counts, 1.0)[:, None]

    def fingerprint(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.table).tobytes()).hexdigest()

    @classmethod
    def pretrained(cls, space: EmbeddingSpace, dim: int | None = None, seed: int = 0) -> "Encoder":
        """Initialise from the word rows of an embedding space (a copy, never shared).

        A seeded random projection is applied when ``dim`` differs from the space.
        """
        words = space.words
        rows = np.array([space.vector(w) for w in words]).reshape(len(words), space.dim)
        dim = dim or space.dim
        if dim != space.dim:
            proj = np.random.default_rng(seed).normal(0.0, 1.0 / np.sqrt(space.dim), (space.dim, dim))
            rows = rows @ proj
        table = np.vstack([np.zeros((1, dim)), rows])
        return cls([UNK] + words, table.copy())

    @classmethod
    def random(cls, words: Sequence[str], dim: int, seed: int = 0, scale: float = 0.1) -> "Encoder":
        rng = np.random.default_rng(seed)
        table = rng.normal(0.0, scale, (len(words) + 1, dim))
        table[0] = 0.0
        return cls([UNK] + list(words), table)


def encode(encoder: Encoder, post: Post) -> tuple[np.ndarray, bool]:
    """Mean token embedding of the post's words; (zero vector, True) when it has none."""
    ids = encoder.token_ids(post.text)
    if not ids:
        return np.zeros(encoder.dim), True
    return encoder.table[ids].mean(axis=0), False


@dataclass
class Mapper:
    sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, sizes: Sequence[int], seed: int = 0) -> "Mapper":
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(list(sizes), weights, biases)

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def forward(self, x: np.ndarray):
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, acts: list[np.ndarray], grad_out: np.ndarray):
        """Gradients for (weights, biases) and the input, given d loss / d output."""
        gw, gb = [None] * len(self.weights), [None] * len(self.biases)
        g = grad_out
        for i in reversed(range(len(self.weights))):
            if i < len(self.weights) - 1:
                g = g * (1.0 - acts[i + 1] ** 2)
            gw[i] = acts[i].T @ g
            gb[i] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return gw, gb, g

    def reset_weights(self, seed: int) -> None:
        fresh = Mapper.init(self.sizes, seed)
        self.weights, self.biases = fresh.weights, fresh.biases


def cosine_distance_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean of 1 - cos(pred_i, target_i) and its gradient with respect to ``pred``."""
    pn = np.linalg.norm(pred, axis=1, keepdims=True)
    tn = np.linalg.norm(target, axis=1, keepdims=True)
    pn_safe = np.maximum(pn, EPS)
    cos = np.sum(pred * target, axis=1, keepdims=True) / (pn_safe * tn)
    n = pred.shape[0]
    loss = float(np.mean(1.0 - cos))
    grad = -(target / (pn_safe * tn) - cos * pred / pn_safe**2) / n
    return loss, grad


@dataclass
class SemanticMapper:
    encoder: Encoder
    mapper: Mapper
    version: int = 0

    def __post_init__(self):
        if self.encoder.dim != self.mapper.in_dim:
            raise ValueError(f"encoder dim {self.encoder.dim} != mapper input {self.mapper.in_dim}")

    def embed(self, posts: Sequence[Post]) -> np.ndarray:
        ids, counts = self.encoder.batch_ids(posts)
        return self.mapper(self.encoder.pool(ids, counts))

    def __call__(self, post: Post) -> np.ndarray:
        return self.embed([post])[0]


@dataclass
class TrainingPair:
    post: Post
    target: np.ndarray


def compute_targets(space: EmbeddingSpace, posts: Sequence[Post]) -> list[TrainingPair]:
    """Mean in-vocabulary hashtag vector per post; posts without one (or degenerate) are omitted."""
    pairs = []
    scale = float(np.max(np.linalg.norm(space.vectors, axis=1))) if len(space.tokens) else 0.0
    for post in posts:
        vecs = [space.hashtag_vector(h) for h in post.hashtags if space.has_hashtag(h)]
        if not vecs:
            continue
        target = np.mean(vecs, axis=0)
        if np.linalg.norm(target) <= 1e-9 * max(scale, EPS):
            continue  # cancelling hashtags: cosine loss is undefined at the origin
        pairs.append(TrainingPair(post, target))
    return pairs


@dataclass
class TrainingReport:
    phase: str
    losses: list[float] = field(default_factory=list)
    n_pairs: int = 0
    epochs: int = 0
    lr: float = 0.0

    @property
    def initial_loss(self) -> float:
        return self.losses[0]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


def _prepare(sm: SemanticMapper, pairs: Sequence[TrainingPair]):
    if not pairs:
        raise TrainingError("no training pairs")
    ids, counts = sm.encoder.batch_ids([p.post for p in pairs])
    targets = np.array([p.target for p in pairs])
    return ids, counts, targets


def _full_loss(sm: SemanticMapper, ids, counts, targets) -> float:
    pred = sm.mapper(sm.encoder.pool(ids, counts))
    return cosine_distance_loss(pred, targets)[0]


def _train(sm, pairs, epochs, lr, batch_size, seed, update_encoder, phase) -> TrainingReport:
    ids, counts, targets = _prepare(sm, pairs)
    rng = np.random.default_rng(seed)
    report = TrainingReport(phase, [_full_loss(sm, ids, counts, targets)], len(pairs), epochs, lr)
    n = len(pairs)
    pad = len(sm.encoder.tokens)
    for epoch in range(epochs):
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            b = perm[start:start + batch_size]
            x = sm.encoder.pool(ids[b], counts[b])
            pred, acts = sm.mapper.forward(x)
            _, grad = cosine_distance_loss(pred, targets[b])
            gw, gb, gx = sm.mapper.backward(acts, grad)
            if update_encoder:
                per_token = gx / np.maximum(counts[b], 1.0)[:, None]
                g_table = np.zeros((pad + 1, sm.encoder.dim))
                np.add.at(g_table, ids[b], np.broadcast_to(per_token[:, None, :], ids[b].shape + (sm.encoder.dim,)))
                sm.encoder.table -= lr * g_table[:pad]
            for i in range(len(gw)):
                sm.mapper.weights[i] -= lr * gw[i]
                sm.mapper.biases[i] -= lr * gb[i]
        loss = _full_loss(sm, ids, counts, targets)
        if not np.isfinite(loss):
            raise TrainingError(
                f"{phase}: non-finite loss at epoch {epoch + 1} (lr={lr}, pairs={n}, previous={report.losses[-1]:.4f})"
            )
        report.losses.append(loss)
    sm.version += 1
    log.debug("%s: loss %.4f -> %.4f over %d epochs", phase, report.losses[0], report.losses[-1], epochs)
    return report


def transfer_learning(sm: SemanticMapper, pairs: Sequence[TrainingPair], epochs: int, lr: float,
                      batch_size: int = 32, seed: int = 0) -> TrainingReport:
    """Train the mapper only; the encoder must be frozen and is left bit-identical."""
    if not sm.encoder.frozen:
        raise ConfigurationError("transfer learning requires a frozen encoder")
    return _train(sm, pairs, epochs, lr, batch_size, seed, False, "transfer")


def fine_tuning(sm: SemanticMapper, pairs: Sequence[TrainingPair], epochs: int, lr_low: float, *,
                transfer_lr: float, batch_size: int = 32, seed: int = 0,
                update_encoder: bool = True) -> TrainingReport:
    """Low-learning-rate training starting from current weights.

    With ``update_encoder`` the encoder is unfrozen and trained end to end;
    otherwise only the mapper moves and the encoder stays frozen.
    """
    if not lr_low < transfer_lr:
        raise ConfigurationError(f"fine-tuning lr {lr_low} must be below transfer lr {transfer_lr}")
    if update_encoder:
        sm.encoder.unfreeze()
    else:
        sm.encoder.freeze()
    return _train(sm, pairs, epochs, lr_low, batch_size, seed, update_encoder,
                  "fine_tune" if update_encoder else "fine_tune_mapper")


@dataclass
class HashtagModel:
    """Embedding space plus the semantic mapper translating posts into it.

    ``pretrained`` keeps the encoder table as it was first initialised, for
    strategies that restart from it.
    """

    space: EmbeddingSpace
    sm: SemanticMapper
    pretrained: Encoder | None = None

    def __post_init__(self):
        if self.sm.mapper.out_dim != self.space.dim:
            raise ValueError("mapper output dim must equal embedding space dim")

    def copy(self) -> "HashtagModel":
        return HashtagModel(self.space, copy.deepcopy(self.sm), self.pretrained)

    def recommend(self, post: Post, k: int, eta: int = 0) -> list[str]:
        return recommend(self, post, k, eta)

    def recommend_batch(self, posts: Sequence[Post], k: int, eta: int = 0) -> list[list[str] | None]:
        """Recommendations per post; None for posts with no words left after hashtag removal."""
        if k < 1 or eta < 0:
            raise ValueError("k must be >= 1 and eta >= 0")
        out: list[list[str] | None] = [None] * len(posts)
        live = [i for i, p in enumerate(posts) if text_tokens(p.text)]
        if not live:
            return out
        vs = self.sm.embed([posts[i] for i in live])
        ok = np.linalg.norm(vs, axis=1) > 0
        ranked = knn_batch(self.space, np.where(ok[:, None], vs, 1.0), k + eta)
        for j, i in enumerate(live):
            out[i] = ranked[j] if ok[j] else None
        return out


def recommend(model: HashtagModel, post: Post, k: int, eta: int = 0) -> list[str]:
    """The k + eta hashtags nearest to the post's mapped vector."""
    if k < 1 or eta < 0:
        raise ValueError("k must be >= 1 and eta >= 0")
    if not text_tokens(post.text):
        raise EmptyPostError(f"post {post.id} has no text once hashtags are removed")
    v = model.sm(post)
    return [h for h, _ in knn_hashtags(model.space, v, k + eta)]
