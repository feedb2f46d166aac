"""Persistent store of per-checkpoint embedding matrices.

One binary store file per fine-tuned checkpoint, so every downstream hit keeps
its per-model provenance.  Vectors are L2-normalized at ingest; cosine
similarity then reduces to a dot product.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

MAGIC = b"ENCB"
STORE_VERSION = 1
FLAG_NORMALIZED = 0x01

NORM_TOL = 1e-4


class StoreError(ValueError):
    """Base class for store parse/validation failures."""


class BadMagicError(StoreError):
    pass


class UnsupportedVersionError(StoreError):
    pass


class TruncatedStoreError(StoreError):
    pass


class CountMismatchError(StoreError):
    pass


class IngestError(ValueError):
    """Invalid text-interchange input; message carries the offending line."""


@dataclass
class EmbeddingMatrix:
    """One checkpoint's embeddings: ordered item ids plus an (n, dim) f32 array."""

    model_id: str
    epoch: int
    dim: int
    item_ids: list[str]
    vectors: np.ndarray
    normalized: bool = False
    _index: dict[str, int] = field(default=None, repr=False, compare=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float32).reshape(len(self.item_ids), self.dim)
        self._index = {item_id: i for i, item_id in enumerate(self.item_ids)}
        self.validate()

    def validate(self) -> None:
        if self.epoch < 0:
            raise ValueError(f"epoch must be non-negative, got {self.epoch}")
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if len(self._index) != len(self.item_ids):
            seen: set[str] = set()
            for item_id in self.item_ids:
                if item_id in seen:
                    raise ValueError(f"duplicate item_id {item_id!r}")
                seen.add(item_id)
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("non-finite vector component")
        if self.normalized and len(self.item_ids) > 0:
            norms = np.linalg.norm(self.vectors.astype(np.float64), axis=1)
            worst = float(np.max(np.abs(norms - 1.0)))
            if worst > NORM_TOL:
                raise ValueError(f"normalized flag set but a vector norm deviates by {worst:.2e}")

    def __len__(self) -> int:
        return len(self.item_ids)

    @property
    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return zip(self.item_ids, self.vectors)

    def index_of(self, item_id: str) -> int:
        return self._index[item_id]

    def vector_for(self, item_id: str) -> np.ndarray:
        return self.vectors[self._index[item_id]]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return (
            self.model_id == other.model_id
            and self.epoch == other.epoch
            and self.dim == other.dim
            and self.item_ids == other.item_ids
            and self.normalized == other.normalized
            and np.array_equal(self.vectors, other.vectors)
        )


@dataclass
class ModelSet:
    """Checkpoints over one corpus, sorted by epoch ascending.

    A model's position in this order is its ensemble index n; later epochs get
    larger n and hence a larger vote weight downstream.
    """

    models: list[EmbeddingMatrix]

    def __post_init__(self) -> None:
        if not self.models:
            raise ValueError("ModelSet needs at least one matrix")
        self.models = sorted(self.models, key=lambda m: m.epoch)
        epochs = [m.epoch for m in self.models]
        for a, b in zip(epochs, epochs[1:]):
            if a == b:
                raise ValueError(f"duplicate epoch {a}")
        dims = {m.dim for m in self.models}
        if len(dims) != 1:
            raise ValueError(f"mismatched dims across checkpoints: {sorted(dims)}")
        base = set(self.models[0].item_ids)
        for m in self.models[1:]:
            ids = set(m.item_ids)
            if ids != base:
                missing = sorted(base ^ ids)[0]
                raise ValueError(
                    f"item_id sets differ between {self.models[0].model_id!r} and "
                    f"{m.model_id!r} (e.g. {missing!r} is not shared)"
                )

    @property
    def z(self) -> int:
        return len(self.models)

    @property
    def dim(self) -> int:
        return self.models[0].dim

    @property
    def corpus_size(self) -> int:
        return len(self.models[0])

    def __iter__(self) -> Iterator[EmbeddingMatrix]:
        return iter(self.models)

    def by_model_id(self, model_id: str) -> tuple[int, EmbeddingMatrix]:
        for n, m in enumerate(self.models):
            if m.model_id == model_id:
                return n, m
        raise KeyError(model_id)


def ingest_text(path: str | Path, model_id: str | None = None, epoch: int | None = None) -> EmbeddingMatrix:
    """Parse the line-delimited text interchange format into a normalized matrix.

    Line 1 is a header record with model_id, epoch and dim; each following line
    holds one ``{"id": ..., "vec": [...]}`` record.  Explicit ``model_id`` /
    ``epoch`` arguments override the header values.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = [ln for ln in (raw.rstrip("\n") for raw in fh)]
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise IngestError(f"{path}: empty input")

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path} line 1: invalid header JSON ({exc})") from exc
    for key in ("model_id", "epoch", "dim"):
        if key not in header:
            raise IngestError(f"{path} line 1: header missing {key!r}")
    dim = int(header["dim"])
    if dim < 1:
        raise IngestError(f"{path} line 1: dim must be positive, got {dim}")
    model_id = header["model_id"] if model_id is None else model_id
    epoch = int(header["epoch"]) if epoch is None else int(epoch)

    item_ids: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"{path} line {lineno}: invalid JSON ({exc})") from exc
        if "id" not in rec or "vec" not in rec:
            raise IngestError(f"{path} line {lineno}: record needs 'id' and 'vec'")
        item_id = str(rec["id"])
        vec = np.asarray(rec["vec"], dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] != dim:
            raise IngestError(
                f"{path} line {lineno}: vector has {vec.size} components, expected {dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise IngestError(f"{path} line {lineno}: non-finite vector component")
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise IngestError(f"{path} line {lineno}: zero-norm vector cannot be normalized")
        if item_id in seen:
            raise IngestError(f"{path} line {lineno}: duplicate id {item_id!r}")
        seen.add(item_id)
        item_ids.append(item_id)
        rows.append((vec / norm).astype(np.float32))

    vectors = np.vstack(rows) if rows else np.zeros((0, dim), dtype=np.float32)
    return EmbeddingMatrix(
        model_id=model_id, epoch=epoch, dim=dim, item_ids=item_ids, vectors=vectors, normalized=True
    )


def write_text(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Inverse of ingest_text (vectors are written as already stored)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"model_id": matrix.model_id, "epoch": matrix.epoch, "dim": matrix.dim}) + "\n")
        for item_id, vec in matrix.items:
            fh.write(json.dumps({"id": item_id, "vec": [float(x) for x in vec]}) + "\n")


def write_store(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write the binary store format (all integers little-endian)."""
    matrix.validate()
    model_id_bytes = matrix.model_id.encode("utf-8")
    if len(model_id_bytes) > 0xFFFF:
        raise ValueError("model_id too long for store format")
    buf = bytearray()
    buf += MAGIC
    flags = FLAG_NORMALIZED if matrix.normalized else 0
    buf += struct.pack("<HHIQ", STORE_VERSION, flags, matrix.dim, len(matrix.item_ids))
    buf += struct.pack("<H", len(model_id_bytes)) + model_id_bytes
    buf += struct.pack("<I", matrix.epoch)
    vectors = np.ascontiguousarray(matrix.vectors, dtype="<f4")
    for i, item_id in enumerate(matrix.item_ids):
        id_bytes = item_id.encode("utf-8")
        if len(id_bytes) > 0xFFFF:
            raise ValueError(f"item_id too long for store format: {item_id!r}")
        buf += struct.pack("<H", len(id_bytes)) + id_bytes
        buf += vectors[i].tobytes()
    Path(path).write_bytes(bytes(buf))


class _Reader:
    """Byte cursor that raises TruncatedStoreError on short reads."""

    def __init__(self, data: bytes, path: Path) -> None:
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedStoreError(f"{self.path}: truncated while reading {what}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    @property
    def remaining(self) -> int:
        return len(self.data) - self.pos


def read_store(path: str | Path) -> EmbeddingMatrix:
    """Parse a binary store file; the result round-trips write_store bit-exactly."""
    path = Path(path)
    r = _Reader(path.read_bytes(), path)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    version, flags, dim, count = struct.unpack("<HHIQ", r.take(16, "header"))
    if version != STORE_VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported store version {version}")
    (id_len,) = struct.unpack("<H", r.take(2, "model_id length"))
    model_id = r.take(id_len, "model_id").decode("utf-8")
    (epoch,) = struct.unpack("<I", r.take(4, "epoch"))

    item_ids: list[str] = []
    vectors = np.zeros((count, dim), dtype=np.float32)
    vec_bytes = dim * 4
    for i in range(count):
        if r.remaining == 0:
            raise CountMismatchError(f"{path}: header declares {count} records but file ends after {i}")
        (n,) = struct.unpack("<H", r.take(2, f"record {i} id length"))
        item_ids.append(r.take(n, f"record {i} id").decode("utf-8"))
        vectors[i] = np.frombuffer(r.take(vec_bytes, f"record {i} vector"), dtype="<f4")
    if r.remaining != 0:
        raise CountMismatchError(f"{path}: {r.remaining} trailing bytes after {count} records")

    return EmbeddingMatrix(
        model_id=model_id,
        epoch=epoch,
        dim=dim,
        item_ids=item_ids,
        vectors=vectors,
        normalized=bool(flags & FLAG_NORMALIZED),
    )


def open_model_set(paths: Sequence[str | Path]) -> ModelSet:
    """Load several store files into an epoch-ordered, cross-validated ModelSet."""
    if not paths:
        raise ValueError("open_model_set needs at least one store path")
    return ModelSet(models=[read_store(p) for p in paths])
