"""Vocabularies, trainable embedding tables, and pretrained word vectors."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ValidationError
from .paths import PAD, UNK, SspTriple

PAD_ID = 0
UNK_ID = 1


@dataclass(frozen=True)
class Vocab:
    """Dense string-to-id map with PAD at 0 and UNK at 1; lookup is total."""

    symbols: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.symbols[:2] != (PAD, UNK):
            raise ValidationError("vocab must start with the PAD and UNK symbols")
        object.__setattr__(self, "index", {s: i for i, s in enumerate(self.symbols)})
        if len(self.index) != len(self.symbols):
            raise ValidationError("vocab contains duplicate symbols")

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def size(self) -> int:
        return len(self.symbols)

    def lookup(self, symbol: str) -> int:
        return self.index.get(symbol, UNK_ID)

    def ids(self, symbols: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.lookup(s) for s in symbols)


def _from_counts(counts: Counter, min_freq: int) -> Vocab:
    kept = [s for s, c in counts.items() if c >= min_freq and s not in (PAD, UNK)]
    kept.sort(key=lambda s: (-counts[s], s))
    return Vocab(symbols=(PAD, UNK, *kept))


def build_vocab(paths: Iterable[SspTriple], min_freq: int = 2) -> tuple[Vocab, Vocab, Vocab]:
    """Word, dependency-tag, and POS-tag vocabularies over a path corpus.

    Words below min_freq are dropped (they resolve to UNK); tag vocabularies
    always keep everything. Symbol order is frequency-descending, then
    lexicographic, so identical corpora give identical vocabularies.
    """
    if min_freq < 1:
        raise ValidationError("min_freq must be at least 1")
    words: Counter = Counter()
    deps: Counter = Counter()
    poss: Counter = Counter()
    for path in paths:
        words.update(path.words)
        deps.update(path.deps)
        poss.update(path.poss)
    return _from_counts(words, min_freq), _from_counts(deps, 1), _from_counts(poss, 1)


@dataclass
class EmbeddingTable:
    """Trainable rows, one per vocab symbol."""

    rows: np.ndarray

    def __post_init__(self) -> None:
        if self.rows.ndim != 2:
            raise ValidationError("embedding table must be 2-dimensional")
        if not np.all(np.isfinite(self.rows)):
            raise ValidationError("embedding table contains non-finite values")

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def init(cls, vocab_size: int, dim: int, rng: np.random.Generator) -> "EmbeddingTable":
        return cls(rows=rng.uniform(-0.1, 0.1, size=(vocab_size, dim)))


class PretrainedVectors:
    """Fixed word vectors loaded from a text file, used for cluster labeling."""

    def __init__(self, vectors: Mapping[str, np.ndarray], dim: int):
        self._vectors = dict(vectors)
        self.dim = dim

    def __contains__(self, token: str) -> bool:
        return token in self._vectors

    def __getitem__(self, token: str) -> np.ndarray:
        return self._vectors[token]

    def __len__(self) -> int:
        return len(self._vectors)

    def get(self, token: str) -> np.ndarray | None:
        return self._vectors.get(token)


def load_pretrained(path: str | Path) -> PretrainedVectors:
    """Parse "token v1 v2 ... vd" lines; an optional "count dim" header is skipped."""
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read vector file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(_is_int(p) for p in parts):
                continue  # header
            token, values = parts[0], parts[1:]
            if not values:
                raise ValidationError(f"line {lineno}: no vector values for token {token!r}")
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise ValidationError(f"line {lineno}: unparseable vector value ({exc})") from exc
            if not np.all(np.isfinite(vec)):
                raise ValidationError(f"line {lineno}: non-finite vector value")
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise ValidationError(f"line {lineno}: dimension {vec.shape[0]} != expected {dim}")
            if token in vectors:
                raise ValidationError(f"line {lineno}: duplicate token {token!r}")
            vectors[token] = vec
    if dim is None:
        raise ValidationError("no vectors found in file")
    return PretrainedVectors(vectors, dim)


def _is_int(s: str) -> bool:
    try:
        int(s)
    except ValueError:
        return False
    return True
