"""Labeled GAF tensor collections and the ``GAFD`` binary file format.

File layout (all integers little-endian)::

    b"GAFD"  version:u32=1  items:u32  H:u32=10  W:u32=10  C:u32=4
    per item: label:u8  window_id:u64  H*W*C float32 (row-major H, W, C)

Metadata that does not fit the binary layout (provenance, seed, RNG
algorithm, per-item channel scales and adversarial bookkeeping) goes to a
JSON sidecar at ``<path>.json``.
"""

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .candlestick import PatternLabel
from .errors import DatasetFormatError
from .rng import RNG_ALGORITHM

MAGIC = b"GAFD"
VERSION = 1
SIDE = 10
NCHAN = 4
ITEM_FLOATS = SIDE * SIDE * NCHAN
_HEADER = struct.Struct("<4sIIIII")
_ITEM = np.dtype([("label", "u1"), ("window_id", "<u8"), ("data", "<f4", (ITEM_FLOATS,))])

CLEAN = "clean"
ADVERSARIAL = "adversarial"
MERGED = "merged"

ADV_FLAG = np.uint64(1) << np.uint64(63)


def clean_window_id(label: int, index: int) -> int:
    return (int(label) << 32) | int(index)


def adversarial_window_id(source_id: int, seq: int) -> int:
    return int(ADV_FLAG) | (int(source_id) << 16) | int(seq)


def source_window_id(window_id) -> np.ndarray:
    """Map adversarial ids back to the clean window they came from."""
    wid = np.asarray(window_id, dtype=np.uint64)
    adv = (wid & ADV_FLAG) != 0
    return np.where(adv, (wid & ~ADV_FLAG) >> np.uint64(16), wid)


@dataclass
class Dataset:
    """Tensors are ``(N, 4, 10, 10)`` float64, channel-first in memory (the
    file format stores float32).

    ``scales`` holds the per-item per-channel (min, max) of the source window
    so decoded tensors can be mapped back to prices; ``meta`` carries optional
    per-item arrays such as adversarial depth.
    """

    tensors: np.ndarray
    labels: np.ndarray
    window_ids: np.ndarray
    provenance: str = CLEAN
    seed: int = 0
    scales: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tensors = np.asarray(self.tensors, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        self.window_ids = np.asarray(self.window_ids, dtype=np.uint64)
        n = len(self.labels)
        if self.tensors.shape != (n, NCHAN, SIDE, SIDE):
            raise DatasetFormatError(f"tensors must be ({n}, 4, 10, 10), got {self.tensors.shape}")
        if self.window_ids.shape != (n,):
            raise DatasetFormatError("window_ids length does not match labels")
        if n and (self.labels.min() < 1 or self.labels.max() > 8):
            raise DatasetFormatError("labels must lie in 1..8")
        if self.scales is not None:
            self.scales = np.asarray(self.scales, dtype=np.float64).reshape(n, NCHAN, 2)
        self.meta = {k: np.asarray(v) for k, v in self.meta.items()}

    def __len__(self):
        return len(self.labels)

    def class_counts(self) -> dict[int, int]:
        return {int(lab): int(np.sum(self.labels == lab)) for lab in PatternLabel}

    def subset(self, index, provenance=None) -> "Dataset":
        index = np.asarray(index)
        return Dataset(
            self.tensors[index],
            self.labels[index],
            self.window_ids[index],
            provenance=provenance or self.provenance,
            seed=self.seed,
            scales=None if self.scales is None else self.scales[index],
            meta={k: v[index] for k, v in self.meta.items()},
        )

    @staticmethod
    def concat(parts, provenance, seed=0) -> "Dataset":
        parts = list(parts)
        keys = set(parts[0].meta)
        for p in parts[1:]:
            keys &= set(p.meta)
        has_scales = all(p.scales is not None for p in parts)
        return Dataset(
            np.concatenate([p.tensors for p in parts]),
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.window_ids for p in parts]),
            provenance=provenance,
            seed=seed,
            scales=np.concatenate([p.scales for p in parts]) if has_scales else None,
            meta={k: np.concatenate([p.meta[k] for p in parts]) for k in sorted(keys)},
        )

    def to_bytes(self) -> bytes:
        n = len(self)
        items = np.empty(n, dtype=_ITEM)
        items["label"] = self.labels
        items["window_id"] = self.window_ids
        items["data"] = self.tensors.transpose(0, 2, 3, 1).reshape(n, ITEM_FLOATS)
        return _HEADER.pack(MAGIC, VERSION, n, SIDE, SIDE, NCHAN) + items.tobytes()

    def sidecar(self) -> dict:
        doc = {
            "provenance": self.provenance,
            "seed": int(self.seed),
            "rng": RNG_ALGORITHM,
            "items": len(self),
            "class_counts": {str(k): v for k, v in self.class_counts().items()},
        }
        if self.scales is not None:
            doc["scales"] = self.scales.tolist()
        if self.meta:
            doc["meta"] = {k: v.tolist() for k, v in sorted(self.meta.items())}
        return doc

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


def save(ds: Dataset, path) -> Path:
    path = Path(path)
    path.write_bytes(ds.to_bytes())
    sidecar_path(path).write_text(json.dumps(ds.sidecar(), sort_keys=True))
    return path


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def from_bytes(raw: bytes) -> Dataset:
    if len(raw) < _HEADER.size:
        raise DatasetFormatError("file too short for GAFD header")
    magic, version, n, h, w, c = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DatasetFormatError(f"unsupported GAFD version {version}")
    if (h, w, c) != (SIDE, SIDE, NCHAN):
        raise DatasetFormatError(f"unsupported tensor shape {(h, w, c)}")
    body = raw[_HEADER.size:]
    if len(body) != n * _ITEM.itemsize:
        raise DatasetFormatError(f"expected {n} items, payload has {len(body)} bytes")
    items = np.frombuffer(body, dtype=_ITEM, count=n)
    tensors = items["data"].reshape(n, SIDE, SIDE, NCHAN).transpose(0, 3, 1, 2)
    tensors = np.ascontiguousarray(tensors, dtype=np.float64)
    return Dataset(tensors, items["label"].copy(), items["window_id"].copy())


def load(path) -> Dataset:
    path = Path(path)
    ds = from_bytes(path.read_bytes())
    side = sidecar_path(path)
    if side.exists():
        doc = json.loads(side.read_text())
        ds.provenance = doc.get("provenance", ds.provenance)
        ds.seed = int(doc.get("seed", 0))
        if "scales" in doc:
            ds.scales = np.asarray(doc["scales"], dtype=np.float64).reshape(len(ds), NCHAN, 2)
        ds.meta = {k: np.asarray(v) for k, v in doc.get("meta", {}).items()}
    return ds
