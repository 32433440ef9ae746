"""Embedding data model and the GGFS on-disk format.

A dataset is a list of image records, each carrying one whole-image
("totality") embedding plus zero or more patch embeddings of the same
dimension. Embeddings are stored as float32 little-endian so files are
bit-exact across platforms; all estimator arithmetic upgrades to float64.

GGFS layout (version 1, all integers little-endian):

    bytes 0-3   magic b"GGFS"
    bytes 4-7   u32 version = 1
    u32 dim D, u32 class count C, u64 record count R
    C times:    u16 name byte length, UTF-8 class name
    u16 provenance byte length, UTF-8 provenance
    R times:    u64 record_id, u32 class_index, u16 patch count M,
                (1+M)*D float32 (totality vector first, then patches)

A JSON-lines text alternative is accepted for hand-written fixtures
(`read_dataset_jsonl`); the binary format is canonical.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, GgfsFormatError

GGFS_MAGIC = b"GGFS"
GGFS_VERSION = 1

_HEADER = struct.Struct("<4sIIIQ")
_RECORD_HEAD = struct.Struct("<QIH")
_U16 = struct.Struct("<H")


@dataclass
class ImageRecord:
    """One image: class label, totality embedding, M patch embeddings.

    ``totality`` has shape (D,), ``patches`` shape (M, D); both float32.
    """

    record_id: int
    class_index: int
    totality: np.ndarray
    patches: np.ndarray

    def __post_init__(self):
        self.totality = np.asarray(self.totality, dtype=np.float32)
        self.patches = np.asarray(self.patches, dtype=np.float32)
        if self.totality.ndim != 1:
            raise DataError(f"record {self.record_id}: totality must be 1-D")
        if self.patches.size == 0:
            self.patches = self.patches.reshape(0, self.totality.shape[0])
        if self.patches.ndim != 2 or self.patches.shape[1] != self.totality.shape[0]:
            raise DataError(
                f"record {self.record_id}: patches must have shape (M, {self.totality.shape[0]})"
            )

    @property
    def dim(self) -> int:
        return self.totality.shape[0]

    @property
    def patch_count(self) -> int:
        return self.patches.shape[0]


@dataclass
class EmbeddingDataset:
    """A split's records plus its class table and provenance string."""

    dim: int
    class_names: list[str]
    records: list[ImageRecord] = field(default_factory=list)
    provenance: str = ""

    def validate(self) -> "EmbeddingDataset":
        """Raise DataError on any invariant violation; return self otherwise."""
        if self.dim < 1:
            raise DataError(f"dimension must be >= 1, got {self.dim}")
        seen_ids = set()
        for rec in self.records:
            if rec.dim != self.dim:
                raise DataError(
                    f"record {rec.record_id}: dimension {rec.dim} != dataset dimension {self.dim}"
                )
            if rec.class_index < 0 or rec.class_index >= len(self.class_names):
                raise DataError(
                    f"record {rec.record_id}: class_index {rec.class_index} out of range "
                    f"for {len(self.class_names)} classes"
                )
            if not np.isfinite(rec.totality).all() or not np.isfinite(rec.patches).all():
                raise DataError(f"record {rec.record_id}: non-finite embedding value")
            if rec.record_id in seen_ids:
                raise DataError(f"duplicate record_id {rec.record_id}")
            seen_ids.add(rec.record_id)
        return self

    def records_by_class(self) -> list[np.ndarray]:
        """Positions of each class's records, in record order, per class index."""
        buckets: list[list[int]] = [[] for _ in self.class_names]
        for pos, rec in enumerate(self.records):
            buckets[rec.class_index].append(pos)
        return [np.asarray(b, dtype=np.int64) for b in buckets]


def write_dataset(dataset: EmbeddingDataset, destination) -> int:
    """Serialize ``dataset`` to the GGFS binary format.

    ``destination`` is a path or a writable binary file object. Returns the
    number of bytes written. Non-finite values are rejected before any byte
    is emitted.
    """
    dataset.validate()
    buf = io.BytesIO()
    buf.write(
        _HEADER.pack(GGFS_MAGIC, GGFS_VERSION, dataset.dim, len(dataset.class_names), len(dataset.records))
    )
    for name in dataset.class_names:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise DataError(f"class name too long ({len(raw)} bytes)")
        buf.write(_U16.pack(len(raw)))
        buf.write(raw)
    prov = dataset.provenance.encode("utf-8")
    if len(prov) > 0xFFFF:
        raise DataError(f"provenance too long ({len(prov)} bytes)")
    buf.write(_U16.pack(len(prov)))
    buf.write(prov)
    for rec in dataset.records:
        if rec.patch_count > 0xFFFF:
            raise DataError(f"record {rec.record_id}: too many patches ({rec.patch_count})")
        buf.write(_RECORD_HEAD.pack(rec.record_id, rec.class_index, rec.patch_count))
        payload = np.concatenate([rec.totality[None, :], rec.patches], axis=0)
        buf.write(np.ascontiguousarray(payload, dtype="<f4").tobytes())
    data = buf.getvalue()
    if hasattr(destination, "write"):
        destination.write(data)
    else:
        with open(destination, "wb") as fh:
            fh.write(data)
    return len(data)


class _Cursor:
    """Tracks the read offset so truncation diagnostics can name it."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise GgfsFormatError(f"truncated while reading {what}", offset=self.pos)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk


def read_dataset(source) -> EmbeddingDataset:
    """Parse a GGFS byte stream back into an EmbeddingDataset.

    ``source`` is a path, a readable binary file object, or bytes. Trailing
    bytes after the final record are rejected.
    """
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()

    cur = _Cursor(data)
    magic, version, dim, n_classes, n_records = _HEADER.unpack(cur.take(_HEADER.size, "header"))
    if magic != GGFS_MAGIC:
        raise GgfsFormatError(f"bad magic {magic!r}, expected {GGFS_MAGIC!r}", offset=0)
    if version != GGFS_VERSION:
        raise GgfsFormatError(f"unsupported version {version}", offset=4)
    if dim < 1:
        raise GgfsFormatError(f"dimension must be >= 1, got {dim}", offset=8)

    class_names = []
    for i in range(n_classes):
        (length,) = _U16.unpack(cur.take(_U16.size, f"class {i} name length"))
        class_names.append(cur.take(length, f"class {i} name").decode("utf-8"))
    (prov_len,) = _U16.unpack(cur.take(_U16.size, "provenance length"))
    provenance = cur.take(prov_len, "provenance").decode("utf-8")

    records = []
    for r in range(n_records):
        rec_id, class_index, m = _RECORD_HEAD.unpack(
            cur.take(_RECORD_HEAD.size, f"record {r} header")
        )
        if class_index >= n_classes:
            raise GgfsFormatError(
                f"record {rec_id}: class_index {class_index} out of range for {n_classes} classes",
                offset=cur.pos - _RECORD_HEAD.size,
            )
        payload = cur.take(4 * (1 + m) * dim, f"record {rec_id} payload")
        vecs = np.frombuffer(payload, dtype="<f4").reshape(1 + m, dim)
        records.append(ImageRecord(rec_id, class_index, vecs[0].copy(), vecs[1:].copy()))
    if cur.pos != len(data):
        raise GgfsFormatError(
            f"{len(data) - cur.pos} trailing bytes after final record", offset=cur.pos
        )

    return EmbeddingDataset(dim, class_names, records, provenance).validate()


def read_dataset_jsonl(source) -> EmbeddingDataset:
    """Read the JSON-lines fixture format: one record object per line.

    Each line holds ``record_id``, ``class`` (string name or integer index),
    ``totality`` and ``patches``. The class table is built from the names in
    order of first appearance; integer classes get generated names.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()

    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"line {lineno}: invalid JSON ({exc})") from exc
    if not rows:
        raise DataError("empty JSON-lines dataset")

    names: list[str] = []
    name_to_index: dict[str, int] = {}
    max_int_class = -1
    for row in rows:
        cls = row["class"]
        if isinstance(cls, str) and cls not in name_to_index:
            name_to_index[cls] = len(names)
            names.append(cls)
        elif isinstance(cls, int):
            max_int_class = max(max_int_class, cls)
    if max_int_class >= 0:
        if names:
            raise DataError("mixed string and integer class labels")
        names = [f"class_{i}" for i in range(max_int_class + 1)]
        name_to_index = {n: i for i, n in enumerate(names)}

    dim = len(rows[0]["totality"])
    records = [
        ImageRecord(
            record_id=int(row["record_id"]),
            class_index=row["class"] if isinstance(row["class"], int) else name_to_index[row["class"]],
            totality=np.asarray(row["totality"], dtype=np.float32),
            patches=np.asarray(row.get("patches", []), dtype=np.float32).reshape(-1, dim),
        )
        for row in rows
    ]
    return EmbeddingDataset(dim, names, records, provenance="jsonl").validate()


def draw_patch_indices(patch_count: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``m`` patches drawn without replacement, in draw order.

    ``m == patch_count`` returns all patches in stored order without
    consuming the stream, so draws for smaller ``m`` are nested prefixes of
    one permutation. Shared by `subsample_patches` and the evaluation
    harness so both consume the stream identically.
    """
    if m < 1 or m > patch_count:
        raise DataError(f"patch subsample size {m} out of bounds [1, {patch_count}]")
    if m == patch_count:
        return np.arange(patch_count, dtype=np.int64)
    return rng.permutation(patch_count)[:m].astype(np.int64)


def subsample_patches(record: ImageRecord, m: int, rng: np.random.Generator) -> np.ndarray:
    """Sample ``m`` of the record's patches without replacement.

    Returns an (m, D) float32 array in draw order; deterministic for a fixed
    generator state.
    """
    idx = draw_patch_indices(record.patch_count, m, rng)
    return record.patches[idx]
