"""On-disk model snapshots: a metadata JSON plus plain .npy matrices and text vocabularies.

Layout of a snapshot directory::

    meta.json          dims, hyperparameters, version, fingerprints
    space_tokens.txt   one embedding-space token per line
    space_vectors.npy
    encoder_tokens.txt
    encoder_table.npy
    mapper_w{i}.npy / mapper_b{i}.npy
    pretrained_table.npy   (optional; pretrained encoder rows, same tokens)
"""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .embedding import EmbeddingSpace, Word2VecParams
from .model import Encoder, HashtagModel, Mapper, SemanticMapper

FORMAT = 1


def _write_lines(path: Path, items) -> None:
    path.write_text("".join(f"{t}\n" for t in items), encoding="utf-8")


def _read_lines(path: Path) -> list[str]:
    return path.read_text(encoding="utf-8").splitlines()


def save_snapshot(model: HashtagModel, path: str | Path, version: int, extra: dict | None = None) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    sm = model.sm
    _write_lines(out / "space_tokens.txt", model.space.tokens)
    np.save(out / "space_vectors.npy", model.space.vectors)
    _write_lines(out / "encoder_tokens.txt", sm.encoder.tokens)
    np.save(out / "encoder_table.npy", sm.encoder.table)
    for i, (w, b) in enumerate(zip(sm.mapper.weights, sm.mapper.biases)):
        np.save(out / f"mapper_w{i}.npy", w)
        np.save(out / f"mapper_b{i}.npy", b)
    pre = model.pretrained
    if pre is not None:
        if pre.tokens != sm.encoder.tokens:
            raise ValueError("pretrained encoder must share the serving encoder's tokens")
        np.save(out / "pretrained_table.npy", pre.table)
    meta = {
        "format": FORMAT,
        "version": version,
        "space_dim": model.space.dim,
        "n_space_tokens": len(model.space.tokens),
        "n_hashtags": len(model.space.hashtags),
        "encoder_dim": sm.encoder.dim,
        "encoder_frozen": sm.encoder.frozen,
        "mapper_sizes": list(sm.mapper.sizes),
        "train_steps": sm.version,
        "w2v": asdict(model.space.params),
        "space_counts": model.space.counts,
        "encoder_fingerprint": sm.encoder.fingerprint(),
        "has_pretrained": pre is not None,
        **(extra or {}),
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def load_snapshot(path: str | Path) -> tuple[HashtagModel, dict]:
    src = Path(path)
    meta = json.loads((src / "meta.json").read_text(encoding="utf-8"))
    if meta.get("format") != FORMAT:
        raise ValueError(f"unsupported snapshot format {meta.get('format')!r}")
    space = EmbeddingSpace(
        _read_lines(src / "space_tokens.txt"),
        np.load(src / "space_vectors.npy"),
        Word2VecParams(**meta["w2v"]),
        meta.get("space_counts"),
    )
    enc_tokens = _read_lines(src / "encoder_tokens.txt")
    encoder = Encoder(enc_tokens, np.load(src / "encoder_table.npy"), frozen=meta["encoder_frozen"])
    n_layers = len(meta["mapper_sizes"]) - 1
    mapper = Mapper(
        list(meta["mapper_sizes"]),
        [np.load(src / f"mapper_w{i}.npy") for i in range(n_layers)],
        [np.load(src / f"mapper_b{i}.npy") for i in range(n_layers)],
    )
    pretrained = None
    if meta.get("has_pretrained"):
        pretrained = Encoder(list(enc_tokens), np.load(src / "pretrained_table.npy"), frozen=True)
    if encoder.fingerprint() != meta["encoder_fingerprint"]:
        raise ValueError("encoder table does not match its recorded fingerprint")
    model = HashtagModel(space, SemanticMapper(encoder, mapper, meta["train_steps"]), pretrained)
    return model, meta
