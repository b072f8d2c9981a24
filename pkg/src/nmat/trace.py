"""Memory-reference traces: records, the ``NMATTRACE v1`` text format, streaming."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Iterator, NamedTuple

import numpy as np

from .errors import ConfigError, TraceFormatError

MAGIC = "NMATTRACE v1"
VADDR_BITS = 48
ASID_BITS = 12
BLOCK_BYTES = 64

KB = 1 << 10
MB = 1 << 20
GB = 1 << 30
PAGE_SIZES = (4 * KB, 2 * MB, 1 * GB)

# rows per numpy chunk when streaming
CHUNK = 1 << 16


class Kind(str, Enum):
    LOAD = "L"
    STORE = "S"


class TraceRecord(NamedTuple):
    kind: Kind
    vaddr: int
    asid: int
    igap: int

    def encode(self) -> str:
        return f"{self.kind.value},{self.vaddr:x},{self.asid},{self.igap}"


def check_record(rec: TraceRecord) -> None:
    if not 0 <= rec.vaddr < (1 << VADDR_BITS):
        raise TraceFormatError(f"vaddr {rec.vaddr:#x} outside 48-bit space")
    if not 0 <= rec.asid < (1 << ASID_BITS):
        raise TraceFormatError(f"asid {rec.asid} outside 12-bit range")
    if rec.igap < 0:
        raise TraceFormatError(f"negative igap {rec.igap}")


def vpn_of(vaddr: int, page_size: int) -> int:
    if page_size not in PAGE_SIZES:
        raise ConfigError(f"unsupported page size {page_size}")
    return vaddr // page_size


class Chunk(NamedTuple):
    """Columnar slice of a trace; ``kinds`` holds 0 for loads, 1 for stores."""

    kinds: np.ndarray
    vaddrs: np.ndarray
    asids: np.ndarray
    igaps: np.ndarray

    def __len__(self) -> int:
        return len(self.vaddrs)

    def records(self) -> Iterator[TraceRecord]:
        kmap = (Kind.LOAD, Kind.STORE)
        for k, v, a, g in zip(self.kinds.tolist(), self.vaddrs.tolist(),
                              self.asids.tolist(), self.igaps.tolist()):
            yield TraceRecord(kmap[k], v, a, g)


def make_chunk(vaddrs, igaps, asid: int = 1, kinds=None) -> Chunk:
    vaddrs = np.asarray(vaddrs, dtype=np.int64)
    n = len(vaddrs)
    igaps = np.broadcast_to(np.asarray(igaps, dtype=np.int64), (n,)).copy()
    if kinds is None:
        kinds = np.zeros(n, dtype=np.int8)
    return Chunk(np.asarray(kinds, dtype=np.int8), vaddrs,
                 np.full(n, asid, dtype=np.int64), igaps)


@dataclass
class TraceStream:
    """Re-iterable trace source.

    ``factory`` returns a fresh iterator of :class:`Chunk` on every call, so
    iterating twice yields the identical sequence.  ``meta`` carries the
    ``# key=value`` header comments of a file (or the generator's config).
    """

    factory: Callable[[], Iterator[Chunk]]
    record_count: int | None = None
    meta: dict[str, str] = field(default_factory=dict)
    source: str = "<memory>"

    def chunks(self) -> Iterator[Chunk]:
        return self.factory()

    def __iter__(self) -> Iterator[TraceRecord]:
        for ch in self.factory():
            yield from ch.records()

    def __len__(self) -> int:
        if self.record_count is None:
            self.record_count = sum(len(c) for c in self.factory())
        return self.record_count

    @classmethod
    def from_records(cls, records: Iterable[TraceRecord], **kw) -> "TraceStream":
        recs = list(records)
        for r in recs:
            check_record(r)
        if recs:
            ch = Chunk(
                np.array([0 if r.kind == Kind.LOAD else 1 for r in recs], dtype=np.int8),
                np.array([r.vaddr for r in recs], dtype=np.int64),
                np.array([r.asid for r in recs], dtype=np.int64),
                np.array([r.igap for r in recs], dtype=np.int64),
            )
            chunks = [ch]
        else:
            chunks = []
        return cls(lambda: iter(chunks), record_count=len(recs), **kw)

    @classmethod
    def from_vaddrs(cls, vaddrs, igap: int = 0, asid: int = 1, **kw) -> "TraceStream":
        ch = make_chunk(vaddrs, igap, asid)
        return cls(lambda: iter([ch]), record_count=len(ch), **kw)


def _parse_line(line: str, lineno: int) -> tuple[int, int, int, int]:
    parts = line.split(",")
    if len(parts) != 4:
        raise TraceFormatError(f"expected 4 fields, got {len(parts)}", lineno)
    k, va, asid, igap = (p.strip() for p in parts)
    if k == "L":
        kind = 0
    elif k == "S":
        kind = 1
    else:
        raise TraceFormatError(f"unknown access kind {k!r}", lineno)
    try:
        vaddr = int(va, 16)
    except ValueError:
        raise TraceFormatError(f"address {va!r} is not hex", lineno) from None
    if va.lower().startswith("0x") or va.startswith("-"):
        raise TraceFormatError(f"address {va!r} must be bare hex", lineno)
    try:
        a = int(asid)
        g = int(igap)
    except ValueError:
        raise TraceFormatError("asid and igap must be decimal", lineno) from None
    if vaddr >= 1 << VADDR_BITS:
        raise TraceFormatError(f"address {va} exceeds 48 bits", lineno)
    if not 0 <= a < 1 << ASID_BITS:
        raise TraceFormatError(f"asid {a} outside 12-bit range", lineno)
    if g < 0:
        raise TraceFormatError(f"negative igap {g}", lineno)
    return kind, vaddr, a, g


def _read_header(fh, path) -> dict[str, str]:
    first = fh.readline()
    if first.rstrip("\r\n").strip() != MAGIC:
        raise TraceFormatError(f"{path}: missing {MAGIC!r} header", 1)
    return {}


def _iter_file_chunks(path: Path) -> Iterator[Chunk]:
    with open(path, "r", encoding="ascii") as fh:
        _read_header(fh, path)
        buf: list[tuple[int, int, int, int]] = []
        for lineno, line in enumerate(fh, start=2):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            buf.append(_parse_line(s, lineno))
            if len(buf) >= CHUNK:
                yield _to_chunk(buf)
                buf = []
        if buf:
            yield _to_chunk(buf)


def _to_chunk(buf) -> Chunk:
    arr = np.array(buf, dtype=np.int64)
    return Chunk(arr[:, 0].astype(np.int8), arr[:, 1].copy(), arr[:, 2].copy(), arr[:, 3].copy())


def _scan_meta(path: Path) -> dict[str, str]:
    meta: dict[str, str] = {}
    with open(path, "r", encoding="ascii") as fh:
        _read_header(fh, path)
        for line in fh:
            s = line.strip()
            if not s:
                continue
            if not s.startswith("#"):
                break
            body = s[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                meta[k.strip()] = v.strip()
    return meta


def open_trace(path: str | Path) -> TraceStream:
    """Open a trace file; the header is validated eagerly, records lazily."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    meta = _scan_meta(p)
    count = int(meta["records"]) if meta.get("records", "").isdigit() else None
    return TraceStream(lambda: _iter_file_chunks(p), record_count=count, meta=meta, source=str(p))


def encode_trace(stream: TraceStream, out: io.TextIOBase, meta: dict[str, str] | None = None) -> int:
    """Write ``stream`` in the text format; returns the record count."""
    out.write(MAGIC + "\n")
    for k, v in (meta if meta is not None else stream.meta).items():
        out.write(f"# {k}={v}\n")
    n = 0
    for ch in stream.chunks():
        kc = np.where(ch.kinds == 0, "L", "S")
        lines = [f"{k},{v:x},{a},{g}" for k, v, a, g in
                 zip(kc.tolist(), ch.vaddrs.tolist(), ch.asids.tolist(), ch.igaps.tolist())]
        if lines:
            out.write("\n".join(lines))
            out.write("\n")
        n += len(lines)
    return n


def write_trace(stream: TraceStream, path: str | Path, meta: dict[str, str] | None = None) -> int:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        return encode_trace(stream, fh, meta)
