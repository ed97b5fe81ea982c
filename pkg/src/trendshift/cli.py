"""Command-line entry point: ``generate``, ``run`` and ``compare-strategies``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import yaml

from . import __version__
from .adaptation import ModelRegistry, bootstrap, default_probe, run_loop
from .config import AdaptationStrategy, PipelineConfig
from .corpus import CorpusSpec, write_corpus
from .errors import ConfigurationError, TrendshiftError
from .evaluation import (
    daily_series,
    evaluate_stream,
    mean_recall,
    weekly_series,
    write_daily_csv,
    write_weekly_csv,
)
from .recommender.snapshot import save_snapshot
from .stream import PostStream
from .topology import Topology
from .trends import write_shift_log

log = logging.getLogger("trendshift")

# flag dest -> PipelineConfig field (nested fields use dots)
FLAG_FIELDS = {
    "bootstrap_days": "d_B",
    "tumbling_days": "d_T",
    "sliding_days": "d_W",
    "finetune_days": "d_F",
    "omega": "omega",
    "top_n": "n",
    "k": "k",
    "eta": "eta",
    "strategy": "strategy",
    "seed": "seed",
    "parallelism": "stage.parallelism",
    "grouping": "stage.grouping",
}


class InsufficientHistory(TrendshiftError):
    pass


# ---------------------------------------------------------------- helpers

def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _run_id(command: str, config: dict, input_digest: str) -> str:
    payload = json.dumps({"command": command, "config": config, "input": input_digest}, sort_keys=True)
    return hashlib.sha1(payload.encode()).hexdigest()[:12]


def _deep_update(base: dict, changes: dict) -> dict:
    for key, value in changes.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config file is not valid YAML/JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigurationError("config file must hold a mapping")
    if "config" in raw and "run_id" in raw:  # a run manifest: replay its resolved config
        raw = raw["config"]
    return raw


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    """Defaults, then explicit flags, then the config file (highest precedence)."""
    merged = PipelineConfig().to_dict()
    for dest, target in FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        node = merged
        *parents, leaf = target.split(".")
        for p in parents:
            node = node[p]
        node[leaf] = value
    if getattr(args, "config", None):
        _deep_update(merged, _load_config_file(args.config))
    return PipelineConfig.from_dict(merged).validate()


def _write_manifest(path: Path, manifest: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=False, default_flow_style=False)


def _load_stream(path: str) -> PostStream:
    p = Path(path)
    if not p.is_file():
        raise TrendshiftError(f"input file not found: {path}")
    return PostStream.load(p)


def _bootstrap_date(stream: PostStream, config: PipelineConfig) -> date:
    if not len(stream):
        raise InsufficientHistory(f"input has no posts; bootstrap needs {config.d_B} days")
    covered = (stream.last_day - stream.first_day).days + 1
    if covered < config.d_B:
        raise InsufficientHistory(
            f"insufficient history: input covers {covered} days, bootstrap needs {config.d_B} days"
        )
    return stream.first_day + timedelta(days=config.d_B - 1)


class _Timer:
    def __init__(self):
        self.phases: dict[str, float] = {}

    def phase(self, name: str):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.phases[name] = round(timer.phases.get(name, 0.0) + time.perf_counter() - self.t0, 4)

        return _Ctx()


# ---------------------------------------------------------------- commands

def cmd_generate(args: argparse.Namespace) -> int:
    spec = CorpusSpec.load(args.spec)
    spec.validate()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    n = write_corpus(spec, out)
    manifest = {
        "command": "generate",
        "version": __version__,
        "spec": str(args.spec),
        "output": str(out),
        "posts": n,
        "days": spec.days,
        "seed": spec.seed,
        "sha256": _sha256_file(out),
    }
    _write_manifest(Path(str(out) + ".manifest.yaml"), manifest)
    print(f"wrote {n} posts to {out}")
    return 0


def _topology(config: PipelineConfig, deterministic: bool) -> Topology:
    return Topology(config.stage, seed=config.seed, mode="deterministic" if deterministic else "threaded")


def cmd_run(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    timer = _Timer()
    manifest: dict = {"command": "run", "version": __version__, "status": "failed",
                      "input": str(args.input), "output": str(out),
                      "started": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    try:
        config = resolve_config(args)
        manifest["config"] = config.to_dict()
        manifest["seed"] = config.seed
        manifest["strategy"] = config.strategy.value
        stream = _load_stream(args.input)
        digest = _sha256_file(Path(args.input))
        manifest["input_sha256"] = digest
        manifest["run_id"] = _run_id("run", manifest["config"], digest)
        when = _bootstrap_date(stream, config)

        with timer.phase("bootstrap"):
            model, trending = bootstrap(stream, when, config)
        registry = ModelRegistry(model, default_probe(stream.posts), k=config.k)
        events_path = out / "events.jsonl"
        with open(events_path, "w", encoding="utf-8") as events_fh:
            def sink(event: dict) -> None:
                events_fh.write(json.dumps(event, sort_keys=True) + "\n")

            sink({"type": "bootstrap", "date": when.isoformat(), "version": registry.version,
                  "trending": list(trending.hashtags)})
            topo = _topology(config, args.deterministic)
            with timer.phase("loop"):
                result = run_loop(stream, config, registry, trending, when, event_sink=sink, topology=topo,
                                  async_adaptation=args.async_adaptation, keep_models=True)

        write_shift_log(result.shifts, out / "shifts.csv")
        daily = daily_series(result.records)
        write_daily_csv(daily, out / "daily_recall.csv")
        write_weekly_csv(weekly_series(daily), out / "weekly_recall.csv")
        topo.metrics.write_csv(out / "topology_metrics.csv")

        with timer.phase("static_baseline"):
            static = ModelRegistry(model)
            s_records, s_daily, s_weekly = evaluate_stream(static, stream, when + timedelta(days=config.d_T),
                                                           stream.last_day, config.k, config.eta)
        write_daily_csv(s_daily, out / "static_daily_recall.csv")
        write_weekly_csv(s_weekly, out / "static_weekly_recall.csv")

        with timer.phase("snapshots"):
            fingerprints = {}
            for version, m in sorted(result.models.items()):
                save_snapshot(m, out / "snapshots" / f"v{version}", version)
                fingerprints[version] = m.sm.encoder.fingerprint()

        manifest.update({
            "status": "ok",
            "bootstrap_date": when.isoformat(),
            "shifts": len(result.shifts),
            "final_version": registry.version,
            "encoder_fingerprints": fingerprints,
            "adapt_seconds": [round(s, 4) for s in result.adapt_seconds],
            "mean_recall": _round(mean_recall(result.records)),
            "static_mean_recall": _round(mean_recall(s_records)),
        })
        print(f"{len(result.shifts)} shifts, final model v{registry.version}, "
              f"mean R@{config.k} {manifest['mean_recall']} (static {manifest['static_mean_recall']})")
        return 0
    except BaseException as exc:
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        manifest["timings"] = timer.phases
        _write_manifest(out / "manifest.yaml", manifest)


def _round(x: float) -> float | None:
    return None if x != x else round(x, 6)


def cmd_compare_strategies(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    timer = _Timer()
    manifest: dict = {"command": "compare-strategies", "version": __version__, "status": "failed",
                      "input": str(args.input), "output": str(out)}
    try:
        config = resolve_config(args)
        manifest["config"] = config.to_dict()
        manifest["seed"] = config.seed
        stream = _load_stream(args.input)
        digest = _sha256_file(Path(args.input))
        manifest["input_sha256"] = digest
        manifest["run_id"] = _run_id("compare-strategies", manifest["config"], digest)
        when = _bootstrap_date(stream, config)
        with timer.phase("bootstrap"):
            model, trending = bootstrap(stream, when, config)
        probe = default_probe(stream.posts)

        runs = {}
        for strategy in AdaptationStrategy:
            cfg = config.with_(strategy=strategy)
            registry = ModelRegistry(model.copy(), probe, k=config.k)
            t0 = time.perf_counter()
            runs[strategy] = run_loop(stream, cfg, registry, trending, when,
                                      topology=_topology(cfg, args.deterministic))
            runs[strategy].final_version = registry.version
            timer.phases[strategy.value] = round(time.perf_counter() - t0, 4)
        with timer.phase("static"):
            s_records, _, _ = evaluate_stream(ModelRegistry(model), stream, when + timedelta(days=config.d_T),
                                              stream.last_day, config.k, config.eta)

        first_shifts = [r.shifts[0].date for r in runs.values() if r.shifts]
        post_from = min(first_shifts) + timedelta(days=config.d_T) if first_shifts else None

        def post(records):
            return _round(mean_recall(records, post_from)) if post_from else None

        rows = [(s.value, len(r.shifts), r.final_version, _round(mean_recall(r.records)), post(r.records))
                for s, r in runs.items()]
        rows.append(("static", 0, 1, _round(mean_recall(s_records)), post(s_records)))
        with open(out / "strategies.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["strategy", "shifts", "final_version", "mean_recall", "post_shift_recall"])
            for row in rows:
                w.writerow(["" if v is None else v for v in row])
        with open(out / "timings.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["strategy", "wall_seconds", "adapt_seconds"])
            for s, r in runs.items():
                w.writerow([s.value, f"{timer.phases[s.value]:.4f}", f"{sum(r.adapt_seconds):.4f}"])

        manifest.update({"status": "ok", "post_shift_from": post_from.isoformat() if post_from else None})
        width = max(len(r[0]) for r in rows)
        print(f"{'strategy':<{width}}  shifts  mean_recall  post_shift_recall  wall_s")
        for name, shifts, _, mean, post_mean in rows:
            wall = f"{timer.phases[name]:.2f}" if name in timer.phases and name != "static" else "-"
            print(f"{name:<{width}}  {shifts:>6}  {_fmt(mean):>11}  {_fmt(post_mean):>17}  {wall:>6}")
        return 0
    except BaseException as exc:
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        manifest["timings"] = timer.phases
        _write_manifest(out / "manifest.yaml", manifest)


def _fmt(x) -> str:
    return "-" if x is None else f"{x:.4f}"


# ---------------------------------------------------------------- parser

def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="corpus JSONL (one post per line)")
    p.add_argument("--out", default="runs/latest", help="output directory")
    p.add_argument("--config", help="YAML/JSON config file, or a previous run manifest; overrides flags")
    g = p.add_argument_group("pipeline (defaults: 14 / 1 / 14 / 4 days, omega 0.9, top-n 10, k 5, eta 0)")
    g.add_argument("--bootstrap-days", type=int)
    g.add_argument("--tumbling-days", type=int)
    g.add_argument("--sliding-days", type=int)
    g.add_argument("--finetune-days", type=int)
    g.add_argument("--omega", type=float)
    g.add_argument("--top-n", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--eta", type=int)
    g.add_argument("--strategy", choices=[s.value for s in AdaptationStrategy])
    g.add_argument("--seed", type=int)
    g.add_argument("--parallelism", type=int, help="tasks per topology stage")
    g.add_argument("--grouping", choices=["shuffle", "field"])
    p.add_argument("--deterministic", action="store_true", help="single-threaded polling topology")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trendshift", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic corpus from a JSON spec")
    gen.add_argument("spec")
    gen.add_argument("out")
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser("run", help="bootstrap, detect shifts, adapt, evaluate")
    _add_pipeline_flags(run)
    run.add_argument("--async-adaptation", action="store_true",
                     help="adapt on a background worker while serving continues (not reproducible)")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare-strategies", help="all adaptation strategies from one shared bootstrap")
    _add_pipeline_flags(cmp_)
    cmp_.set_defaults(func=cmd_compare_strategies)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrendshiftError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
