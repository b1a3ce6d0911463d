"""Shortest paths between entity pairs on dependency trees.

Each instance yields three parallel sequences over the tokens on the path
from the subject's representative token to the object's: the words, the
dependency tags, and the POS tags. Instances are grouped per ordered
entity pair for training and inference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import EntitySpan, ParsedSentence
from .errors import ValidationError

PAD = "<PAD>"
UNK = "<UNK>"

# Tag categories used to pick a representative token out of a multi-token
# entity span, in preference order. "compound" is deliberately absent.
SUBJECT_DEPS = frozenset({"nsubj", "nsubjpass", "csubj"})
OBJECT_DEPS = frozenset({"dobj", "pobj", "iobj", "obj"})
MODIFIER_DEPS = frozenset({"amod", "nmod", "appos", "poss"})


@dataclass(frozen=True)
class SspTriple:
    """Parallel word / dependency-tag / POS-tag sequences of one path."""

    words: tuple[str, ...]
    deps: tuple[str, ...]
    poss: tuple[str, ...]

    def __post_init__(self) -> None:
        if not (len(self.words) == len(self.deps) == len(self.poss)):
            raise ValidationError("path sequences must have equal length")
        if len(self.words) < 1:
            raise ValidationError("path must contain at least one token")

    def __len__(self) -> int:
        return len(self.words)


@dataclass(frozen=True)
class PaddedPath:
    """A path brought to fixed length, plus its original length."""

    words: tuple[str, ...]
    deps: tuple[str, ...]
    poss: tuple[str, ...]
    true_length: int

    @property
    def triple(self) -> SspTriple:
        return SspTriple(self.words, self.deps, self.poss)


@dataclass(frozen=True)
class PairGroup:
    """All path instances of one ordered (subject, object) entity pair."""

    pair: tuple[str, str]
    paths: tuple[SspTriple, ...]


def representative_token(sentence: ParsedSentence, span: EntitySpan) -> int:
    """Pick the token that stands for a (possibly compound) entity span.

    Preference: a subject-tagged token, then object-tagged, then
    modifier-tagged. Otherwise fall back to a token whose head lies outside
    the span (the span's own syntactic head); the last one if several.
    """
    indices = range(span.start, span.end)
    for tags in (SUBJECT_DEPS, OBJECT_DEPS, MODIFIER_DEPS):
        for i in indices:
            if sentence.tokens[i].dep in tags:
                return i
    external = [i for i in indices if not span.start <= sentence.tokens[i].head < span.end]
    return external[-1]


def _chain_to_root(sentence: ParsedSentence, start: int) -> list[int]:
    chain = [start]
    while sentence.tokens[chain[-1]].head != -1:
        chain.append(sentence.tokens[chain[-1]].head)
    return chain


def shortest_path(sentence: ParsedSentence) -> SspTriple:
    """The unique tree path from the subject representative to the object's."""
    src = representative_token(sentence, sentence.subject)
    dst = representative_token(sentence, sentence.object)
    if src == dst:
        raise ValidationError(f"sentence {sentence.id!r}: degenerate path (entities share a representative token)")

    up_src = _chain_to_root(sentence, src)
    up_dst = _chain_to_root(sentence, dst)
    on_src_side = {idx: depth for depth, idx in enumerate(up_src)}
    for depth, idx in enumerate(up_dst):
        if idx in on_src_side:
            indices = up_src[: on_src_side[idx]] + [idx] + up_dst[:depth][::-1]
            break
    else:  # both chains end at the root, so unreachable
        raise ValidationError(f"sentence {sentence.id!r}: entities are not connected")

    toks = [sentence.tokens[i] for i in indices]
    return SspTriple(
        words=tuple(t.text for t in toks),
        deps=tuple(t.dep for t in toks),
        poss=tuple(t.pos for t in toks),
    )


def pad_or_truncate(path: SspTriple, n_l: int) -> PaddedPath:
    """Force a path to length n_l: pad at the end, or truncate keeping the
    first n_l-1 elements plus the final element so both endpoints survive."""
    if n_l < 2:
        raise ValidationError("n_l must be at least 2")
    k = len(path)
    if k > n_l:
        keep = list(range(n_l - 1)) + [k - 1]
        return PaddedPath(
            words=tuple(path.words[i] for i in keep),
            deps=tuple(path.deps[i] for i in keep),
            poss=tuple(path.poss[i] for i in keep),
            true_length=n_l,
        )
    fill = n_l - k
    return PaddedPath(
        words=path.words + (PAD,) * fill,
        deps=path.deps + (PAD,) * fill,
        poss=path.poss + (PAD,) * fill,
        true_length=k,
    )


def group_pairs(
    instances: Iterable[tuple[tuple[str, str], SspTriple]],
    min_paths: int = 2,
) -> list[PairGroup]:
    """Group path instances by ordered pair key, dropping pairs with fewer
    than min_paths instances. Output is deterministic: groups sorted by key,
    paths within a group sorted by content (duplicates kept)."""
    if min_paths < 1:
        raise ValidationError("min_paths must be at least 1")
    buckets: dict[tuple[str, str], list[SspTriple]] = {}
    for pair, path in instances:
        buckets.setdefault(pair, []).append(path)
    groups = []
    for pair in sorted(buckets):
        paths = buckets[pair]
        if len(paths) >= min_paths:
            paths.sort(key=lambda p: (p.words, p.deps, p.poss))
            groups.append(PairGroup(pair=pair, paths=tuple(paths)))
    return groups


def extract_instances(sentences: Sequence[ParsedSentence]) -> list[tuple[tuple[str, str], SspTriple]]:
    """Shortest-path extraction over a corpus, in corpus order."""
    from .corpus import pair_key

    return [(pair_key(s), shortest_path(s)) for s in sentences]
