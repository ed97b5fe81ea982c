"""In-process spout -> reader -> combiner -> detector dataflow.

Two execution modes share the same stage logic: ``threaded`` runs every task in
its own thread connected by bounded queues; ``deterministic`` polls the same
tasks round-robin on the calling thread. Final count tables are identical.
"""
from __future__ import annotations

import csv
import queue
import threading
import zlib
from collections import Counter, deque
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, LateTupleError
from .stream import Post, PostStream

SHUFFLE = "shuffle"
FIELD = "field"
GROUPINGS = (SHUFFLE, FIELD)


class StreamTuple(NamedTuple):
    key: str
    value: int
    origin: str
    window: date | None = None


@dataclass(frozen=True)
class StageConfig:
    parallelism: int = 2
    grouping: str = SHUFFLE
    combiner_enabled: bool = True
    combiner_flush_size: int = 64
    queue_capacity: int = 256

    def __post_init__(self):
        if self.parallelism < 1:
            raise ConfigurationError("parallelism must be >= 1")
        if self.grouping not in GROUPINGS:
            raise ConfigurationError(f"grouping must be one of {GROUPINGS}, got {self.grouping!r}")
        if self.combiner_flush_size < 1:
            raise ConfigurationError("combiner_flush_size must be >= 1")
        if self.queue_capacity < 1:
            raise ConfigurationError("queue_capacity must be >= 1")


def spout_emit(stream: PostStream, filters: Sequence[str], day: date) -> list[Post]:
    """Posts of ``day`` whose text contains any filter keyword (case-insensitive)."""
    posts = stream.day(day)
    if not filters:
        return posts
    needles = [f.lower() for f in filters]
    return [p for p in posts if any(k in p.text.lower() for k in needles)]


def reader_process(post: Post, window: date | None = None) -> list[StreamTuple]:
    return [StreamTuple(h, 1, "reader", window) for h in post.hashtags]


def combiner_flush(buffer: Iterable[StreamTuple]) -> list[StreamTuple]:
    """Sum buffered values by key, in order of first appearance."""
    sums: dict[str, int] = {}
    window = None
    for tup in buffer:
        sums[tup.key] = sums.get(tup.key, 0) + tup.value
        window = tup.window
    return [StreamTuple(k, v, "combiner", window) for k, v in sums.items()]


def stable_hash(key: str) -> int:
    return zlib.crc32(key.encode("utf-8"))


def route(tup: StreamTuple | str, grouping: str, n_tasks: int, rng: np.random.Generator | None = None) -> int:
    if n_tasks < 1:
        raise ConfigurationError("n_tasks must be >= 1")
    if n_tasks == 1:
        return 0
    if grouping == FIELD:
        key = tup if isinstance(tup, str) else tup.key
        return stable_hash(key) % n_tasks
    if grouping == SHUFFLE:
        if rng is None:
            raise ValueError("shuffle grouping needs a random generator")
        return int(rng.integers(n_tasks))
    raise ConfigurationError(f"unknown grouping {grouping!r}")


def detector_ingest(tuples: Iterable[StreamTuple], boundary: date | None, table: Counter | None = None) -> Counter:
    table = Counter() if table is None else table
    for tup in tuples:
        if boundary is not None and tup.window is not None and tup.window != boundary:
            raise LateTupleError(f"tuple {tup} does not belong to window ending {boundary}")
        table[tup.key] += tup.value
    return table


@dataclass
class StageMetrics:
    tuples_emitted: int = 0
    tuples_received: int = 0
    max_queue_depth: int = 0
    per_task_received: list[int] = field(default_factory=list)


class TopologyMetrics:
    STAGES = ("spout", "reader", "combiner", "detector")

    def __init__(self, parallelism: int):
        self.stages = {
            "spout": StageMetrics(per_task_received=[0]),
            "reader": StageMetrics(per_task_received=[0] * parallelism),
            "combiner": StageMetrics(per_task_received=[0] * parallelism),
            "detector": StageMetrics(per_task_received=[0]),
        }
        self._lock = threading.Lock()

    def emitted(self, stage: str, n: int = 1) -> None:
        with self._lock:
            self.stages[stage].tuples_emitted += n

    def received(self, stage: str, task: int, n: int = 1) -> None:
        with self._lock:
            m = self.stages[stage]
            m.tuples_received += n
            m.per_task_received[task] += n

    def depth(self, stage: str, d: int) -> None:
        with self._lock:
            m = self.stages[stage]
            if d > m.max_queue_depth:
                m.max_queue_depth = d

    @property
    def tuples_received_by_detector(self) -> int:
        return self.stages["detector"].tuples_received

    def load_imbalance(self, stage: str = "combiner") -> float:
        loads = self.stages[stage].per_task_received
        lo = min(loads)
        return float("inf") if lo == 0 else max(loads) / lo

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["stage", "tuples_emitted", "tuples_received", "max_queue_depth"])
            for name in self.STAGES:
                m = self.stages[name]
                w.writerow([name, m.tuples_emitted, m.tuples_received, m.max_queue_depth])


_END = object()


class _Reader:
    def __init__(self, idx: int, seed: int):
        self.idx = idx
        self.rng = np.random.default_rng([seed, 1, idx])


class _Combiner:
    def __init__(self, idx: int, flush_size: int):
        self.idx = idx
        self.flush_size = flush_size
        self.buffer: list[StreamTuple] = []

    def push(self, tup: StreamTuple) -> list[StreamTuple]:
        self.buffer.append(tup)
        if len(self.buffer) >= self.flush_size:
            return self.flush()
        return []

    def flush(self) -> list[StreamTuple]:
        out = combiner_flush(self.buffer)
        self.buffer = []
        return out


class Topology:
    """Counts hashtags of one tumbling window at a time through the staged pipeline.

    Spout-to-reader routing is always shuffle; ``config.grouping`` governs the
    reader-to-combiner edge. Without a combiner, readers feed the detector directly.
    """

    def __init__(self, config: StageConfig | None = None, seed: int = 0, mode: str = "threaded"):
        if mode not in ("threaded", "deterministic"):
            raise ConfigurationError(f"unknown topology mode {mode!r}")
        self.config = config or StageConfig()
        self.seed = seed
        self.mode = mode
        self.metrics = TopologyMetrics(self.config.parallelism)
        self._windows = 0

    def run_window(self, posts: Sequence[Post], boundary: date | None = None) -> Counter:
        self._windows += 1
        seed = int(np.random.SeedSequence([self.seed, self._windows]).generate_state(1)[0])
        if self.mode == "deterministic":
            return self._run_polling(posts, boundary, seed)
        return self._run_threaded(posts, boundary, seed)

    def count_days(self, stream: PostStream, days: Iterable[date], filters: Sequence[str] = ()) -> dict[date, Counter]:
        return {d: self.run_window(spout_emit(stream, filters, d), d) for d in days}

    # deterministic round-robin polling

    def _run_polling(self, posts, boundary, seed) -> Counter:
        cfg, met = self.config, self.metrics
        p = cfg.parallelism
        cap = cfg.queue_capacity
        spout_rng = np.random.default_rng([seed, 0])
        readers = [_Reader(i, seed) for i in range(p)]
        combiners = [_Combiner(i, cfg.combiner_flush_size) for i in range(p)]
        reader_q = [deque() for _ in range(p)]
        comb_q = [deque() for _ in range(p)]
        det_q: deque = deque()
        table: Counter = Counter()
        pending = deque(posts)
        ends_to_comb = [0] * p

        def put(q, item, stage):
            q.append(item)
            met.depth(stage, len(q))

        spout_done = False
        while True:
            progressed = False
            # downstream first so bounded queues always drain
            while det_q:
                item = det_q.popleft()
                met.received("detector", 0)
                detector_ingest([item], boundary, table)
                progressed = True
            if cfg.combiner_enabled:
                for c in combiners:
                    q = comb_q[c.idx]
                    if q and len(det_q) < cap:
                        item = q.popleft()
                        progressed = True
                        if item is _END:
                            ends_to_comb[c.idx] += 1
                            if ends_to_comb[c.idx] == p:
                                for out in c.flush():
                                    met.emitted("combiner")
                                    put(det_q, out, "detector")
                            continue
                        met.received("combiner", c.idx)
                        for out in c.push(item):
                            met.emitted("combiner")
                            put(det_q, out, "detector")
            for r in readers:
                q = reader_q[r.idx]
                if not q:
                    continue
                if cfg.combiner_enabled and any(len(cq) >= cap for cq in comb_q):
                    continue
                if not cfg.combiner_enabled and len(det_q) >= cap:
                    continue
                item = q.popleft()
                progressed = True
                if item is _END:
                    if cfg.combiner_enabled:
                        for cq in comb_q:
                            put(cq, _END, "combiner")
                    continue
                met.received("reader", r.idx)
                for tup in reader_process(item, boundary):
                    met.emitted("reader")
                    if cfg.combiner_enabled:
                        put(comb_q[route(tup, cfg.grouping, p, r.rng)], tup, "combiner")
                    else:
                        put(det_q, tup, "detector")
            if not spout_done:
                if pending:
                    target = route("", SHUFFLE, p, spout_rng)
                    if len(reader_q[target]) < cap:
                        met.received("spout", 0)
                        met.emitted("spout")
                        put(reader_q[target], pending.popleft(), "reader")
                        progressed = True
                else:
                    for rq in reader_q:
                        rq.append(_END)
                    spout_done = True
                    progressed = True
            if not progressed:
                break
        return table

    # one thread per task, bounded queues

    def _run_threaded(self, posts, boundary, seed) -> Counter:
        cfg, met = self.config, self.metrics
        p = cfg.parallelism
        cap = cfg.queue_capacity
        reader_q = [queue.Queue(cap) for _ in range(p)]
        comb_q = [queue.Queue(cap) for _ in range(p)]
        det_q: queue.Queue = queue.Queue(cap)
        table: Counter = Counter()
        errors: list[BaseException] = []

        def put(q, item, stage):
            q.put(item)
            met.depth(stage, q.qsize())

        def spout():
            rng = np.random.default_rng([seed, 0])
            for post in posts:
                met.received("spout", 0)
                met.emitted("spout")
                put(reader_q[route("", SHUFFLE, p, rng)], post, "reader")
            for q in reader_q:
                q.put(_END)

        def reader(r: _Reader):
            q = reader_q[r.idx]
            while True:
                item = q.get()
                if item is _END:
                    if cfg.combiner_enabled:
                        for cq in comb_q:
                            cq.put(_END)
                    else:
                        det_q.put(_END)
                    return
                met.received("reader", r.idx)
                for tup in reader_process(item, boundary):
                    met.emitted("reader")
                    if cfg.combiner_enabled:
                        put(comb_q[route(tup, cfg.grouping, p, r.rng)], tup, "combiner")
                    else:
                        put(det_q, tup, "detector")

        def combiner(c: _Combiner):
            q = comb_q[c.idx]
            ends = 0
            while True:
                item = q.get()
                if item is _END:
                    ends += 1
                    if ends == p:
                        for out in c.flush():
                            met.emitted("combiner")
                            put(det_q, out, "detector")
                        det_q.put(_END)
                        return
                    continue
                met.received("combiner", c.idx)
                for out in c.push(item):
                    met.emitted("combiner")
                    put(det_q, out, "detector")

        def detector():
            ends = 0
            while ends < p:
                item = det_q.get()
                if item is _END:
                    ends += 1
                    continue
                met.received("detector", 0)
                try:
                    detector_ingest([item], boundary, table)
                except LateTupleError as exc:
                    errors.append(exc)

        def guarded(fn, *args):
            def run():
                try:
                    fn(*args)
                except BaseException as exc:  # surfaced after join
                    errors.append(exc)
            return run

        threads = [threading.Thread(target=guarded(spout), daemon=True)]
        threads += [threading.Thread(target=guarded(reader, _Reader(i, seed)), daemon=True) for i in range(p)]
        if cfg.combiner_enabled:
            threads += [
                threading.Thread(target=guarded(combiner, _Combiner(i, cfg.combiner_flush_size)), daemon=True)
                for i in range(p)
            ]
        det_thread = threading.Thread(target=guarded(detector), daemon=True)
        for t in threads:
            t.start()
        det_thread.start()
        for t in threads:
            t.join()
        det_thread.join()
        if errors:
            raise errors[0]
        return table
