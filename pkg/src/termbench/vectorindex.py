"""Exact L2 nearest-neighbour search over embedded titles or definitions.

Index file layout (little-endian)::

    8 bytes   magic b"TBVIDX01"
    8 bytes   uint64 header length H
    H bytes   UTF-8 JSON header {kind, dimension, count, dtype, model_id,
              vectors_offset, ids_offset, ids_length}
    ...       zero padding up to vectors_offset (64-byte aligned)
    count*dimension float32 vector block, row-major
    ids_length bytes  UTF-8 JSON array of page ids, row order

The scan is exhaustive; the vector block is memory-mapped and streamed in
chunks, so corpus size is bounded by disk, not RAM.
"""

from __future__ import annotations

import json
import logging
import os
import shutil
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from termbench.errors import DataError, ProviderError

log = logging.getLogger(__name__)

MAGIC = b"TBVIDX01"
KINDS = ("title", "definition")
_ALIGN = 64


@dataclass(frozen=True)
class Neighbor:
    page_id: str
    distance: float
    rank: int


class IndexBuildInterrupted(ProviderError):
    """Embedding failed mid-build; completed chunks are kept for resume."""

    def __init__(self, done: int, total: int, cause: Exception) -> None:
        super().__init__(f"index build stopped at {done}/{total}: {cause}")
        self.done = done
        self.total = total


class VectorIndex:
    def __init__(
        self,
        kind: str,
        page_ids: Sequence[str],
        vectors: np.ndarray,
        model_id: str = "",
    ) -> None:
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        vectors = np.asarray(vectors, dtype="<f4")
        if vectors.ndim != 2 or vectors.shape[0] != len(page_ids):
            raise ValueError("vectors must be (count, dimension) matching page_ids")
        self.kind = kind
        self.page_ids = np.asarray([str(p) for p in page_ids], dtype=object)
        self.vectors = vectors
        self.model_id = model_id

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.page_ids)

    def save(self, path: str | os.PathLike[str]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        ids_blob = json.dumps(list(self.page_ids), ensure_ascii=False).encode("utf-8")
        n, d = self.vectors.shape
        header = {
            "kind": self.kind,
            "dimension": int(d),
            "count": int(n),
            "dtype": "<f4",
            "model_id": self.model_id,
            "vectors_offset": 0,
            "ids_offset": 0,
            "ids_length": len(ids_blob),
        }
        # offsets depend on the header length, which depends on the offsets;
        # two passes converge because the digit count stabilizes
        for _ in range(3):
            blob = json.dumps(header).encode("utf-8")
            start = 16 + len(blob)
            vectors_offset = (start + _ALIGN - 1) // _ALIGN * _ALIGN
            header["vectors_offset"] = vectors_offset
            header["ids_offset"] = vectors_offset + n * d * 4
        blob = json.dumps(header).encode("utf-8")
        tmp = path.with_suffix(path.suffix + ".tmp")
        with tmp.open("wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            fh.write(b"\0" * (header["vectors_offset"] - 16 - len(blob)))
            fh.write(np.ascontiguousarray(self.vectors, dtype="<f4").tobytes())
            fh.write(ids_blob)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | os.PathLike[str]) -> "VectorIndex":
        path = Path(path)
        with path.open("rb") as fh:
            if fh.read(8) != MAGIC:
                raise DataError(f"{path} is not a vector index")
            (hlen,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(hlen))
            fh.seek(header["ids_offset"])
            ids = json.loads(fh.read(header["ids_length"]))
        n, d = header["count"], header["dimension"]
        if n:
            vectors = np.memmap(path, dtype="<f4", mode="r", offset=header["vectors_offset"], shape=(n, d))
        else:
            vectors = np.zeros((0, d), dtype="<f4")
        return cls(header["kind"], ids, vectors, header.get("model_id", ""))


def build_index(
    corpus,
    kind: str,
    embedder,
    out_path: str | os.PathLike[str] | None = None,
    batch_size: int = 256,
    checkpoint_dir: str | os.PathLike[str] | None = None,
) -> VectorIndex:
    """Embed every corpus page's title (or definition) in corpus order.

    With ``checkpoint_dir`` each finished batch is saved as it completes; if
    the embedder fails, :class:`IndexBuildInterrupted` is raised and a later
    call with the same directory resumes from the first missing batch.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    pages = list(corpus.pages())
    texts = [p.title if kind == "title" else p.definition for p in pages]
    ckpt = Path(checkpoint_dir) if checkpoint_dir else None
    if ckpt:
        ckpt.mkdir(parents=True, exist_ok=True)
    chunks = []
    for b, start in enumerate(range(0, len(texts), batch_size)):
        chunk_file = ckpt / f"chunk_{b:06d}.npy" if ckpt else None
        if chunk_file is not None and chunk_file.exists():
            chunks.append(np.load(chunk_file))
            continue
        batch = texts[start : start + batch_size]
        try:
            vecs = np.asarray(embedder.embed(batch), dtype="<f4")
        except ProviderError as exc:
            raise IndexBuildInterrupted(start, len(texts), exc) from exc
        if chunks and vecs.shape[1] != chunks[0].shape[1]:
            raise DataError("embedder changed dimension mid-build")
        if chunk_file is not None:
            np.save(chunk_file, vecs)
        chunks.append(vecs)
    if not chunks:
        raise DataError("corpus is empty")
    index = VectorIndex(kind, [p.page_id for p in pages], np.concatenate(chunks), embedder.model_id)
    if out_path is not None:
        index.save(out_path)
        index = VectorIndex.load(out_path)
    if ckpt:
        shutil.rmtree(ckpt, ignore_errors=True)
    return index


def _order(dist: np.ndarray, ids: np.ndarray) -> np.ndarray:
    # lexsort uses the last key as primary
    return np.lexsort((ids.astype(str), dist))


def knn_vector(index: VectorIndex, query: np.ndarray, k: int, chunk_rows: int = 65536) -> list[Neighbor]:
    """Top-``k`` pages by ascending (L2 distance, page_id)."""
    n = len(index)
    if k <= 0 or k > n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != index.dimension:
        raise ValueError(f"query dimension {q.shape[0]} != index dimension {index.dimension}")

    best_d = np.empty(0)
    best_i = np.empty(0, dtype=np.int64)
    for start in range(0, n, chunk_rows):
        block = np.asarray(index.vectors[start : start + chunk_rows], dtype=np.float64)
        diff = block - q
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        cand_d = np.concatenate([best_d, d])
        cand_i = np.concatenate([best_i, np.arange(start, start + len(d))])
        if len(cand_d) > k:
            # keep everything tied with the k-th distance so tie-breaks stay exact
            kth = np.partition(cand_d, k - 1)[k - 1]
            keep = cand_d <= kth
            cand_d, cand_i = cand_d[keep], cand_i[keep]
        order = _order(cand_d, index.page_ids[cand_i])[:k]
        best_d, best_i = cand_d[order], cand_i[order]
    return [
        Neighbor(page_id=str(index.page_ids[i]), distance=float(dist), rank=r)
        for r, (i, dist) in enumerate(zip(best_i, best_d), start=1)
    ]


def knn(index: VectorIndex, query: str, k: int, embedder) -> list[Neighbor]:
    if k <= 0 or k > len(index):
        raise ValueError(f"k must be in 1..{len(index)}, got {k}")
    qvec = np.asarray(embedder.embed([query]), dtype=np.float32)[0]
    return knn_vector(index, qvec, k)
