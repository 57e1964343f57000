"""JSON Lines persistence for datasets and ADCPM dumps."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .scene import PathKind, PathRecord, Sample, Source


def sample_to_dict(s: Sample) -> dict:
    return {
        "id": s.id,
        "t": s.timestamp,
        "y": int(s.label),
        "src": s.source.value,
        "paths": [
            {"re": p.gain.real, "im": p.gain.imag, "tau": p.delay, "az": p.azimuth,
             "el": p.elevation, "kind": p.kind.value}
            for p in s.paths
        ],
    }


def sample_from_dict(d: dict) -> Sample:
    paths = [
        PathRecord(complex(p["re"], p["im"]), float(p["tau"]), float(p["az"]), float(p["el"]), PathKind(p["kind"]))
        for p in d["paths"]
    ]
    return Sample(str(d["id"]), paths, int(d["y"]), float(d["t"]), Source(d["src"]))


def dumps_sample(s: Sample) -> str:
    return json.dumps(sample_to_dict(s), separators=(",", ":"))


def write_dataset(path: str | Path, samples: Iterable[Sample]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for s in samples:
            f.write(dumps_sample(s))
            f.write("\n")
            n += 1
    return n


def read_dataset(path: str | Path) -> list[Sample]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(sample_from_dict(json.loads(line)))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: malformed sample ({exc})") from exc
    return out


def write_adcpm_jsonl(path: str | Path, ids: Sequence[str], maps: np.ndarray,
                      pooled: tuple[int, int] | None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for sid, p in zip(ids, maps):
            rec = {"id": sid, "shape": list(p.shape), "pooled": list(pooled) if pooled else None,
                   "p": [float(v) for v in np.ravel(p)]}
            f.write(json.dumps(rec, separators=(",", ":")))
            f.write("\n")


def read_adcpm_jsonl(path: str | Path) -> tuple[list[str], list[np.ndarray], list]:
    ids, maps, pooled = [], [], []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            ids.append(rec["id"])
            maps.append(np.array(rec["p"], dtype=float).reshape(rec["shape"]))
            pooled.append(tuple(rec["pooled"]) if rec["pooled"] else None)
    return ids, maps, pooled
