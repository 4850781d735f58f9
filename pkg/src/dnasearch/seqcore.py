"""DNA alphabet handling, 2-bit codes, FASTA/query ingestion, query generation.

Two code conventions coexist:

* *base codes*: A=0, C=1, G=2, T=3 -- the public 2-bit encoding.
* *ranks*: $=0, A=1, C=2, G=3, T=4 -- internal arrays where the sentinel
  must sort below every base. rank == base code + 1.

All stored sequences (``Reference.ranks``, ``Query.ranks``) use ranks.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Union

import numpy as np

SENTINEL_RANK = 0
ALPHABET = "ACGT"
SENTINEL_CHAR = "$"
RANK_TO_CHAR = "$ACGT"

_CHAR_TO_BASE = {c: i for i, c in enumerate(ALPHABET)}
_CHAR_TO_BASE.update({c.lower(): i for i, c in enumerate(ALPHABET)})

# byte-value -> rank lookup; 255 marks invalid bytes
_BYTE_TO_RANK = np.full(256, 255, dtype=np.uint8)
for _c, _i in _CHAR_TO_BASE.items():
    _BYTE_TO_RANK[ord(_c)] = _i + 1


class SequenceError(ValueError):
    """Base class for sequence ingestion errors."""


class InvalidCharacterError(SequenceError):
    def __init__(self, char: str, offset: int, line: int | None = None):
        self.char = char
        self.offset = offset
        self.line = line
        where = f"line {line}, column {offset + 1}" if line is not None else f"offset {offset}"
        super().__init__(f"invalid character {char!r} at {where} (expected one of ACGT)")


class EmptyInputError(SequenceError):
    pass


@dataclass(frozen=True)
class Reference:
    """Sentinel-terminated reference text.

    ``ranks`` has length ``n`` (sentinel included); ``ranks[n-1] == 0`` and
    every other position is a base rank in 1..4.
    """

    name: str
    ranks: np.ndarray

    def __post_init__(self):
        ranks = np.ascontiguousarray(self.ranks, dtype=np.uint8)
        object.__setattr__(self, "ranks", ranks)
        if ranks.size < 2:
            raise SequenceError("reference must contain at least one base")
        if ranks[-1] != SENTINEL_RANK:
            raise SequenceError("reference must end with the sentinel")
        body = ranks[:-1]
        if body.min() < 1 or body.max() > 4:
            raise SequenceError("reference body contains non-base ranks")

    @property
    def n(self) -> int:
        return int(self.ranks.size)

    def bases(self) -> str:
        """Sequence without the sentinel, as text."""
        return "".join(RANK_TO_CHAR[r] for r in self.ranks[:-1])


@dataclass(frozen=True)
class Query:
    """One query in a batch. ``ranks`` is None when the line failed to parse."""

    qid: int
    ranks: np.ndarray | None
    error: str | None = None

    @property
    def valid(self) -> bool:
        return self.error is None

    def __len__(self) -> int:
        return 0 if self.ranks is None else int(self.ranks.size)

    def text(self) -> str:
        if self.ranks is None:
            return ""
        return "".join(RANK_TO_CHAR[r] for r in self.ranks)


def encode_base(c: str) -> int:
    """2-bit code of a single base character; case-insensitive."""
    code = _CHAR_TO_BASE.get(c)
    if code is None:
        raise InvalidCharacterError(c, 0)
    return code


def decode_base(code: int) -> str:
    if not 0 <= code <= 3:
        raise ValueError(f"base code out of range: {code}")
    return ALPHABET[code]


def encode_ranks(seq: Union[str, bytes], line: int | None = None) -> np.ndarray:
    """Encode a base string to a rank array, rejecting anything outside ACGT."""
    if isinstance(seq, str):
        seq = seq.encode("ascii", errors="replace")
    raw = np.frombuffer(seq, dtype=np.uint8)
    ranks = _BYTE_TO_RANK[raw]
    bad = np.flatnonzero(ranks == 255)
    if bad.size:
        off = int(bad[0])
        raise InvalidCharacterError(chr(raw[off]), off, line)
    return ranks


def ranks_to_text(ranks: Iterable[int]) -> str:
    return "".join(RANK_TO_CHAR[r] for r in ranks)


def _as_stream(source: Union[bytes, str, BinaryIO]) -> BinaryIO:
    if isinstance(source, bytes):
        return io.BytesIO(source)
    if isinstance(source, str):
        return io.BytesIO(source.encode("ascii"))
    return source


def load_fasta(source: Union[bytes, str, BinaryIO]) -> Reference:
    """Parse FASTA into a Reference.

    Multi-record inputs are concatenated in file order into one text; the
    name is taken from the first header. Characters outside ACGT (including
    N) are a hard error.
    """
    stream = _as_stream(source)
    name = None
    chunks: list[np.ndarray] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(b">"):
            if name is None:
                tokens = line[1:].split()
                name = tokens[0].decode("ascii", errors="replace") if tokens else "reference"
            continue
        if name is None:
            raise SequenceError(f"line {lineno}: sequence data before FASTA header")
        chunks.append(encode_ranks(bytes(line), line=lineno))
    if name is None or not chunks:
        raise EmptyInputError("no FASTA sequence data found")
    body = np.concatenate(chunks)
    ranks = np.empty(body.size + 1, dtype=np.uint8)
    ranks[:-1] = body
    ranks[-1] = SENTINEL_RANK
    return Reference(name=name, ranks=ranks)


def write_fasta(ref: Reference, width: int = 70) -> bytes:
    """Inverse of load_fasta (modulo line wrapping and case)."""
    seq = ref.bases()
    lines = [f">{ref.name}"]
    lines.extend(seq[i : i + width] for i in range(0, len(seq), width))
    return ("\n".join(lines) + "\n").encode("ascii")


def parse_queries(source: Union[bytes, str, BinaryIO]) -> list[Query]:
    """One query per line (LF or CRLF). Blank lines are skipped.

    Lines with invalid characters become Query objects with ``error`` set,
    so one bad read never aborts the batch.
    """
    stream = _as_stream(source)
    queries: list[Query] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        qid = len(queries)
        try:
            ranks = encode_ranks(bytes(line), line=lineno)
        except InvalidCharacterError as exc:
            queries.append(Query(qid=qid, ranks=None, error=str(exc)))
        else:
            queries.append(Query(qid=qid, ranks=ranks))
    return queries


def generate_queries(ref: Reference, length: int, count: int, seed: int) -> list[Query]:
    """Sample ``count`` substrings of the reference (sentinel excluded).

    Start positions are uniform over [0, n-1-length]; deterministic for a
    fixed seed.
    """
    if not 1 <= length <= ref.n - 1:
        raise SequenceError(
            f"query length {length} out of range for reference of {ref.n - 1} bases"
        )
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, ref.n - length, size=count)  # high exclusive: n-1-length inclusive
    return [
        Query(qid=i, ranks=ref.ranks[s : s + length].copy())
        for i, s in enumerate(starts)
    ]


def generate_query_matrix(ref: Reference, length: int, count: int, seed: int) -> np.ndarray:
    """Same sampling as :func:`generate_queries`, returned as a rank matrix.

    The result has shape ``(count, length)`` and dtype uint8; row i equals the
    ranks of query i produced by ``generate_queries`` with the same seed.
    """
    if not 1 <= length <= ref.n - 1:
        raise SequenceError(
            f"query length {length} out of range for reference of {ref.n - 1} bases"
        )
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, ref.n - length, size=count)
    return ref.ranks[starts[:, None] + np.arange(length)]
