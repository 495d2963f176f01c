"""Embedding sets, the WXE1 file format, and the extractor contract.

Feature extraction runs out of process: an external command produces a
WXE1 file, keeping the metric core free of any neural-network runtime. The
format is bit-exact and little-endian so files hash identically across
machines:

    magic  "WXE1"                      4 bytes
    u32    version (= 1)
    u32    dim
    u64    n
    u16    space_tag length, then UTF-8 bytes
    f32    n * dim values, row-major
    per id: u16 length, then UTF-8 bytes

Storage is float32; metric math promotes to float64 internally.
"""

from __future__ import annotations

import hashlib
import shlex
import struct
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    FormatError,
    InvalidDataError,
    IoError,
    ProcessFailureError,
    TruncationError,
)

MAGIC = b"WXE1"
VERSION = 1

# Known embedding spaces: tag -> (dim, l2-normalize rows at load).
DEFAULT_SPACE_REGISTRY: dict[str, tuple[int, bool]] = {
    "inception-pool3": (2048, False),
    "clip-image": (512, False),
}


@dataclass(frozen=True)
class EmbeddingSet:
    """n x dim float32 matrix with per-row image ids and a space tag."""

    data: np.ndarray
    ids: tuple[str, ...]
    space_tag: str

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise InvalidDataError(f"embeddings must be 2-D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise InvalidDataError("embeddings contain NaN or Inf")
        ids = tuple(str(i) for i in self.ids)
        if len(ids) != arr.shape[0]:
            raise InvalidDataError(
                f"{len(ids)} ids for {arr.shape[0]} rows"
            )
        if len(set(ids)) != len(ids):
            raise InvalidDataError("image ids must be unique")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.space_tag.encode("utf-8"))
        h.update(np.ascontiguousarray(self.data).tobytes())
        h.update("\x00".join(self.ids).encode("utf-8"))
        return h.hexdigest()

    def normalized(self) -> "EmbeddingSet":
        """Copy with L2-normalized rows (zero rows left untouched)."""
        norms = np.linalg.norm(self.data.astype(np.float64), axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return EmbeddingSet(
            (self.data / norms).astype(np.float32), self.ids, self.space_tag
        )


def write_embeddings(es: EmbeddingSet, path) -> None:
    """Serialize to the WXE1 layout; output bytes are fully deterministic."""
    tag = es.space_tag.encode("utf-8")
    if len(tag) > 0xFFFF:
        raise InvalidDataError("space tag too long")
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<I", es.dim),
        struct.pack("<Q", es.n),
        struct.pack("<H", len(tag)),
        tag,
        np.ascontiguousarray(es.data, dtype="<f4").tobytes(),
    ]
    for image_id in es.ids:
        raw = image_id.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise InvalidDataError(f"id too long: {image_id[:32]}...")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    try:
        p.write_bytes(b"".join(parts))
    except OSError as exc:
        raise IoError(f"cannot write {p}: {exc}") from exc


class _Reader:
    def __init__(self, blob: bytes, name: str):
        self.blob = blob
        self.pos = 0
        self.name = name

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.blob):
            raise TruncationError(
                f"{self.name}: truncated at byte {self.pos} (wanted {count} more)"
            )
        out = self.blob[self.pos : self.pos + count]
        self.pos += count
        return out


def read_embeddings(path) -> EmbeddingSet:
    """Exact inverse of :func:`write_embeddings`, with validation."""
    p = Path(path)
    try:
        blob = p.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {p}: {exc}") from exc
    r = _Reader(blob, str(p))
    if r.take(4) != MAGIC:
        raise FormatError(f"{p}: bad magic (not a WXE1 file)")
    (version,) = struct.unpack("<I", r.take(4))
    if version != VERSION:
        raise FormatError(f"{p}: unsupported version {version}")
    (dim,) = struct.unpack("<I", r.take(4))
    (n,) = struct.unpack("<Q", r.take(8))
    (tag_len,) = struct.unpack("<H", r.take(2))
    tag = r.take(tag_len).decode("utf-8")
    data = np.frombuffer(r.take(4 * dim * n), dtype="<f4").reshape(n, dim)
    ids = []
    for _ in range(n):
        (id_len,) = struct.unpack("<H", r.take(2))
        ids.append(r.take(id_len).decode("utf-8"))
    if r.pos != len(blob):
        raise FormatError(f"{p}: {len(blob) - r.pos} trailing bytes")
    if not np.isfinite(data).all():
        raise FormatError(f"{p}: embeddings contain NaN or Inf")
    return EmbeddingSet(data.copy(), tuple(ids), tag)


def load_embeddings(path, registry: dict[str, tuple[int, bool]] | None = None,
                    ) -> EmbeddingSet:
    """Read a WXE1 file and apply the space-tag registry.

    Known tags are checked for the registered dimension and optionally
    L2-normalized at load.
    """
    es = read_embeddings(path)
    reg = DEFAULT_SPACE_REGISTRY if registry is None else registry
    if es.space_tag in reg:
        dim, normalize = reg[es.space_tag]
        if es.dim != dim:
            raise FormatError(
                f"{path}: space tag {es.space_tag!r} registers dim {dim}, "
                f"file has {es.dim}"
            )
        if normalize:
            es = es.normalized()
    return es


def run_extractor(command_template: str, image_list, out_path,
                  registry: dict[str, tuple[int, bool]] | None = None,
                  timeout: float | None = None) -> EmbeddingSet:
    """Invoke the configured external extractor and read its output back.

    ``command_template`` must contain ``{input_list}`` and ``{output}``
    placeholders. The image list is written one path per line; the spawned
    process must emit a WXE1 file at the output path.
    """
    if "{input_list}" not in command_template or "{output}" not in command_template:
        raise InvalidDataError(
            "command template must contain {input_list} and {output}"
        )
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    list_path = out.with_suffix(out.suffix + ".images.txt")
    list_path.write_text("\n".join(str(p) for p in image_list) + "\n")

    argv = [
        part.format(input_list=str(list_path), output=str(out))
        for part in shlex.split(command_template)
    ]
    proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    if proc.returncode != 0:
        raise ProcessFailureError(
            f"extractor exited {proc.returncode}: {proc.stderr.strip()[:500]}"
        )
    if not out.exists():
        raise ProcessFailureError(f"extractor wrote no output at {out}")
    return load_embeddings(out, registry=registry)
