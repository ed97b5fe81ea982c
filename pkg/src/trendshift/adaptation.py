"""Bootstrap, daily shift detection, strategy-specific adaptation, and model hot swap."""
from __future__ import annotations

import copy
import logging
import threading
import time
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Callable, Sequence

from .config import AdaptationStrategy, PipelineConfig, child_seed
from .errors import AdaptationAborted, ConfigurationError, SwapRefused, TrainingError
from .evaluation import EvalRecord, evaluate_posts
from .recommender.embedding import train_word2vec
from .recommender.model import (
    Encoder,
    HashtagModel,
    Mapper,
    SemanticMapper,
    compute_targets,
    fine_tuning,
    transfer_learning,
)
from .recommender.text import text_tokens
from .stream import Post, PostStream, count_hashtags
from .topology import Topology, spout_emit
from .trends import ShiftEvent, TrendingSet, detect_shift, top_hashtags

log = logging.getLogger(__name__)


def bootstrap(stream: PostStream, when: date, config: PipelineConfig) -> tuple[HashtagModel, TrendingSet]:
    """Train the initial model on the ``d_B`` days ending ``when`` and seed the trending set."""
    config.validate()
    tc = config.training
    B = stream.get_last_window(config.d_B, when)
    if not B:
        raise ConfigurationError(f"bootstrap window of {config.d_B} days ending {when} has no posts")
    try:
        space = train_word2vec(B, tc.w2v, seed=child_seed(config.seed, "w2v", when))
    except TrainingError as exc:
        raise ConfigurationError(f"bootstrap failed: {exc}") from None
    pairs = compute_targets(space, B)
    if not pairs:
        raise ConfigurationError("bootstrap window yields no supervised (post, hashtags) pairs")

    encoder = Encoder.pretrained(space, tc.encoder_dim, seed=child_seed(config.seed, "encoder"))
    pretrained = copy.deepcopy(encoder)
    sm = SemanticMapper(encoder, Mapper.init(tc.mapper_sizes, seed=child_seed(config.seed, "mapper", when)))
    encoder.freeze()
    transfer_learning(sm, pairs, tc.tl_epochs, tc.lr, tc.batch_size, child_seed(config.seed, "tl", when))
    fine_tuning(sm, pairs, tc.ft_epochs, tc.lr_low, transfer_lr=tc.lr, batch_size=tc.batch_size,
                seed=child_seed(config.seed, "ft", when))
    sm.encoder.freeze()
    trending = top_hashtags(count_hashtags(B), config.n, when)
    return HashtagModel(space, sm, pretrained), trending


def adapt(old: HashtagModel, W_posts: Sequence[Post], F_posts: Sequence[Post],
          strategy: AdaptationStrategy | str, config: PipelineConfig, when: date | None = None) -> HashtagModel:
    """Build a new model realigned to the recent windows; ``old`` is never mutated.

    Every strategy retrains the embedding space on W. They differ in how the
    semantic mapper follows:

    * tlw-ftf: reset mapper, transfer learning on W with the current encoder
      frozen, then end-to-end fine-tuning on F from the current weights.
    * tlw-ftw: encoder restored to its pre-trained weights, reset mapper,
      transfer learning on W, end-to-end fine-tuning on W.
    * ft-e-mlp-f: end-to-end fine-tuning on F only.
    * ft-mlp-f: mapper-only fine-tuning on F; the encoder is untouched.
    """
    strategy = AdaptationStrategy.parse(strategy)
    tc = config.training
    if not W_posts or not F_posts:
        raise AdaptationAborted(f"empty {'W' if not W_posts else 'F'} window")
    tag = when or date.min
    try:
        space = train_word2vec(W_posts, tc.w2v, seed=child_seed(config.seed, "w2v", tag))
    except TrainingError as exc:
        raise AdaptationAborted(f"embedding update failed: {exc}") from exc
    pairs_W = compute_targets(space, W_posts)
    pairs_F = compute_targets(space, F_posts)
    if not pairs_F or (strategy in (AdaptationStrategy.TLW_FTF, AdaptationStrategy.TLW_FTW) and not pairs_W):
        raise AdaptationAborted("no supervised pairs in the adaptation windows")

    sm = copy.deepcopy(old.sm)
    ft_kw = dict(transfer_lr=tc.lr, batch_size=tc.batch_size, seed=child_seed(config.seed, "ft", tag))
    try:
        if strategy in (AdaptationStrategy.TLW_FTF, AdaptationStrategy.TLW_FTW):
            if strategy is AdaptationStrategy.TLW_FTW:
                if old.pretrained is None:
                    raise AdaptationAborted("no pre-trained encoder weights to restore")
                sm.encoder = copy.deepcopy(old.pretrained)
            sm.mapper.reset_weights(child_seed(config.seed, "mapper", tag))
            sm.encoder.freeze()
            transfer_learning(sm, pairs_W, tc.tl_epochs, tc.lr, tc.batch_size, child_seed(config.seed, "tl", tag))
            ft_pairs = pairs_W if strategy is AdaptationStrategy.TLW_FTW else pairs_F
            fine_tuning(sm, ft_pairs, tc.ft_epochs, tc.lr_low, **ft_kw)
        elif strategy is AdaptationStrategy.FT_E_MLP_F:
            fine_tuning(sm, pairs_F, tc.ft_epochs, tc.lr_low, **ft_kw)
        else:
            fine_tuning(sm, pairs_F, tc.ft_epochs, tc.lr_low, update_encoder=False, **ft_kw)
    except TrainingError as exc:
        raise AdaptationAborted(str(exc)) from exc
    sm.encoder.freeze()
    return HashtagModel(space, sm, old.pretrained)


class ModelRegistry:
    """Holds the serving model; readers take one consistent (model, version) snapshot."""

    def __init__(self, model: HashtagModel, probe: Post | None = None, version: int = 1, k: int = 5):
        self._current = (model, version)
        self._lock = threading.Lock()
        self.probe = probe
        self.k = k
        self.in_flight: object | None = None

    def current(self) -> tuple[HashtagModel, int]:
        return self._current

    @property
    def model(self) -> HashtagModel:
        return self._current[0]

    @property
    def version(self) -> int:
        return self._current[1]

    def recommend(self, post: Post, k: int, eta: int = 0) -> tuple[list[str], int]:
        model, version = self._current
        return model.recommend(post, k, eta), version

    def self_check(self, model: HashtagModel) -> None:
        if self.probe is None:
            return
        try:
            recs = model.recommend(self.probe, self.k)
        except Exception as exc:
            raise SwapRefused(f"self-check failed: {exc}") from exc
        if not recs or any(not model.space.has_hashtag(h) for h in recs):
            raise SwapRefused("self-check returned no valid hashtags")

    def swap_model(self, new_model: HashtagModel) -> int:
        self.self_check(new_model)
        with self._lock:
            _, version = self._current
            self._current = (new_model, version + 1)
            return version + 1


def swap_model(registry: ModelRegistry, new_model: HashtagModel) -> int:
    return registry.swap_model(new_model)


def default_probe(posts: Sequence[Post]) -> Post | None:
    return next((p for p in posts if p.hashtags and text_tokens(p.text)), None)


@dataclass
class AdaptationJob:
    when: date
    trending: TrendingSet
    W_posts: list[Post]
    F_posts: list[Post]
    strategy: AdaptationStrategy
    event: ShiftEvent | None = None


class AdaptationWorker:
    """Runs adaptation jobs off the serving path, one at a time.

    A job submitted while another is running replaces any queued job, so a burst
    of shifts collapses into a single follow-up run on the latest windows.
    """

    def __init__(self, registry: ModelRegistry, config: PipelineConfig,
                 on_done: Callable[[AdaptationJob, int | None, BaseException | None, float], None] | None = None):
        self.registry = registry
        self.config = config
        self.on_done = on_done
        self._lock = threading.Lock()
        self._pending: AdaptationJob | None = None
        self._thread: threading.Thread | None = None
        self.coalesced = 0

    def submit(self, job: AdaptationJob) -> str:
        with self._lock:
            if self._thread is not None:
                if self._pending is not None:
                    self.coalesced += 1
                self._pending = job
                return "queued"
            self._thread = threading.Thread(target=self._loop, args=(job,), daemon=True)
            self.registry.in_flight = job
            self._thread.start()
            return "started"

    def _loop(self, job: AdaptationJob) -> None:
        try:
            while job is not None:
                t0 = time.perf_counter()
                version, error = None, None
                try:
                    new_model = adapt(self.registry.model, job.W_posts, job.F_posts, job.strategy, self.config, job.when)
                    version = self.registry.swap_model(new_model)
                except (AdaptationAborted, SwapRefused) as exc:
                    error = exc
                if self.on_done is not None:
                    self.on_done(job, version, error, time.perf_counter() - t0)
                with self._lock:
                    job, self._pending = self._pending, None
                    self.registry.in_flight = job
                    if job is None:
                        self._thread = None
        finally:
            # an unexpected error must not leave wait() blocked forever
            if job is not None:
                with self._lock:
                    self._thread = None
                    self._pending = None
                    self.registry.in_flight = None

    def wait(self) -> None:
        while True:
            with self._lock:
                t = self._thread
            if t is None:
                return
            t.join()

    @property
    def busy(self) -> bool:
        with self._lock:
            return self._thread is not None


@dataclass
class RunLog:
    shifts: list[ShiftEvent] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    records: list[EvalRecord] = field(default_factory=list)
    adapt_seconds: list[float] = field(default_factory=list)
    models: dict[int, HashtagModel] = field(default_factory=dict)


def run_loop(
    stream: PostStream,
    config: PipelineConfig,
    registry: ModelRegistry,
    trending: TrendingSet,
    start: date,
    end: date | None = None,
    *,
    event_sink: Callable[[dict], None] | None = None,
    topology: Topology | None = None,
    evaluate: bool = True,
    async_adaptation: bool = False,
    keep_models: bool = False,
) -> RunLog:
    """Advance tumbling windows from ``start`` (the bootstrap date) to ``end``.

    Each window's posts are first served by the current model (and scored when
    ``evaluate``), then counted through the topology and compared with the
    trending set. On a shift, adaptation either runs to completion before the
    next window (default) or on a background worker while serving continues.
    """
    config.validate()
    end = end or stream.last_day
    topology = topology or Topology(config.stage, seed=config.seed, mode="deterministic")
    out = RunLog()
    state_lock = threading.Lock()
    current = {"trending": trending}
    if keep_models:
        out.models[registry.version] = registry.model

    def emit(event: dict) -> None:
        with state_lock:
            out.events.append(event)
        if event_sink is not None:
            event_sink(event)

    def finished(job: AdaptationJob, version: int | None, error: BaseException | None, seconds: float) -> None:
        with state_lock:
            out.adapt_seconds.append(seconds)
        if error is None:
            with state_lock:
                current["trending"] = job.trending
            if keep_models:
                out.models[version] = registry.model
            emit({"type": "swap", "date": job.when.isoformat(), "version": version, "strategy": job.strategy.value})
        else:
            log.warning("adaptation for %s aborted: %s", job.when, error)
            emit({"type": "abort", "date": job.when.isoformat(), "version": registry.version,
                  "strategy": job.strategy.value, "reason": str(error)})

    worker = AdaptationWorker(registry, config, finished) if async_adaptation else None

    d = start + timedelta(days=config.d_T)
    while d <= end:
        T_posts = [p for day in _days_back(d, config.d_T) for p in spout_emit(stream, config.filters, day)]
        if evaluate:
            out.records.extend(evaluate_posts(registry, T_posts, config.k, config.eta))
        counts = topology.run_window(T_posts, d)
        window_trends = top_hashtags(counts, config.n, d)
        with state_lock:
            reference = current["trending"]
        event = detect_shift(reference, window_trends, config.omega, d, config.strategy.value)
        if event is not None:
            out.shifts.append(event)
            emit({"type": "shift", "date": d.isoformat(), "version": registry.version,
                  "delta": round(event.delta, 6), "strategy": config.strategy.value})
            job = AdaptationJob(
                d, window_trends,
                stream.get_last_window(config.d_W, d),
                stream.get_last_window(config.d_F, d),
                config.strategy, event,
            )
            if worker is not None:
                worker.submit(job)
            else:
                t0 = time.perf_counter()
                try:
                    new_model = adapt(registry.model, job.W_posts, job.F_posts, job.strategy, config, d)
                    version = registry.swap_model(new_model)
                    finished(job, version, None, time.perf_counter() - t0)
                except (AdaptationAborted, SwapRefused) as exc:
                    finished(job, None, exc, time.perf_counter() - t0)
        d += timedelta(days=config.d_T)
    if worker is not None:
        worker.wait()
    return out


def _days_back(d: date, n: int) -> list[date]:
    return [d - timedelta(days=i) for i in reversed(range(n))]
