"""Encoder-decoder relation extractor.

Encoding: each path position embeds its word, dependency tag, and POS tag,
the concatenation feeds a forward and a backward LSTM, and the two hidden
states per position are concatenated. A path's encoding is the
concatenation of all position states; a pair's relation vector is the
elementwise sum over its paths' encodings.

Decoding: at every step, attention scores over the per-position blocks of
the relation vector are computed from the previous GRU state; the
softmax-weighted block sum, concatenated with the previous step's context,
is projected to the GRU input. Word logits come from a linear layer on the
GRU state. No ground-truth word is fed back in.

Training predicts one held-out path of a pair from the pair's remaining
paths, with cross entropy averaged over the target's unpadded length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import fmean
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .errors import NumericError, ValidationError
from .paths import PairGroup, pad_or_truncate
from .vocab import Vocab


@dataclass
class ModelConfig:
    n_h: int = 32  # forward LSTM hidden size
    n_h2: int = 32  # backward LSTM hidden size
    n_g: int = 64  # decoder GRU hidden (and input) size
    n_l: int = 10  # fixed path length
    d_w: int = 50  # word embedding dim
    d_d: int = 16  # dependency-tag embedding dim
    d_p: int = 16  # POS-tag embedding dim
    max_input_paths: int = 8
    learning_rate: float = 0.05
    epochs: int = 10
    batch_size: int = 8
    seed: int = 13

    def __post_init__(self) -> None:
        for name in ("n_h", "n_h2", "n_g", "n_l", "d_w", "d_d", "d_p", "max_input_paths", "batch_size"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"config {name} must be positive")
        if self.n_l < 2:
            raise ValidationError("config n_l must be at least 2")
        if self.learning_rate <= 0:
            raise ValidationError("config learning_rate must be positive")
        if self.epochs < 0:
            raise ValidationError("config epochs must be non-negative")

    @property
    def block_dim(self) -> int:
        return self.n_h + self.n_h2

    @property
    def relation_dim(self) -> int:
        return self.block_dim * self.n_l


@dataclass(frozen=True)
class PathIds:
    """A padded path resolved to vocabulary ids."""

    word_ids: tuple[int, ...]
    dep_ids: tuple[int, ...]
    pos_ids: tuple[int, ...]
    true_length: int


class ModelParams:
    """All trainable tensors: embedding tables, both encoder LSTMs, the
    attention maps, the decoder GRU, and the output projection."""

    def __init__(self, cfg: ModelConfig, n_words: int, n_deps: int, n_pos: int, rng: np.random.Generator):
        self.cfg = cfg
        self.n_words = n_words
        d_x = cfg.d_w + cfg.d_d + cfg.d_p

        def embedding(shape, name):
            return ad.Value(rng.uniform(-0.1, 0.1, size=shape), name=name)

        self.word_emb = embedding((n_words, cfg.d_w), "word_emb")
        self.dep_emb = embedding((n_deps, cfg.d_d), "dep_emb")
        self.pos_emb = embedding((n_pos, cfg.d_p), "pos_emb")
        self.enc_fwd = ad.LstmParams.init(cfg.n_h, d_x, rng, "enc_fwd")
        self.enc_bwd = ad.LstmParams.init(cfg.n_h2, d_x, rng, "enc_bwd")
        self.attn_w = ad.glorot(rng, (cfg.n_l, cfg.n_g), "attn_w")
        self.attn_b = ad.Value(np.zeros(cfg.n_l), name="attn_b")
        self.ctx_w = ad.glorot(rng, (cfg.n_g, cfg.block_dim + cfg.n_g), "ctx_w")
        self.dec = ad.GruParams.init(cfg.n_g, cfg.n_g, rng, "dec")
        self.out_w = ad.glorot(rng, (n_words, cfg.n_g), "out_w")
        self.out_b = ad.Value(np.zeros(n_words), name="out_b")

    def named(self) -> dict[str, ad.Value]:
        out = {"word_emb": self.word_emb, "dep_emb": self.dep_emb, "pos_emb": self.pos_emb}
        for prefix, cell in (("enc_fwd", self.enc_fwd), ("enc_bwd", self.enc_bwd)):
            for v in cell.values():
                out[v.name] = v
        out["attn_w"] = self.attn_w
        out["attn_b"] = self.attn_b
        out["ctx_w"] = self.ctx_w
        for v in self.dec.values():
            out[v.name] = v
        out["out_w"] = self.out_w
        out["out_b"] = self.out_b
        return out

    def trainable(self) -> list[ad.Value]:
        return list(self.named().values())

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: v.data for name, v in self.named().items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        own = self.named()
        missing = sorted(set(own) - set(arrays))
        extra = sorted(set(arrays) - set(own))
        if missing or extra:
            raise ValidationError(f"checkpoint mismatch: missing {missing}, unexpected {extra}")
        for name, value in own.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.size != value.data.size:
                raise ValidationError(f"parameter {name!r}: expected {value.data.shape}, got {arr.shape}")
            value.data = arr.reshape(value.data.shape).copy()
            value.grad = np.zeros_like(value.data)


def paths_to_ids(group: PairGroup, vocabs: tuple[Vocab, Vocab, Vocab], n_l: int) -> list[PathIds]:
    word_vocab, dep_vocab, pos_vocab = vocabs
    out = []
    for path in group.paths:
        padded = pad_or_truncate(path, n_l)
        out.append(
            PathIds(
                word_ids=word_vocab.ids(padded.words),
                dep_ids=dep_vocab.ids(padded.deps),
                pos_ids=pos_vocab.ids(padded.poss),
                true_length=padded.true_length,
            )
        )
    return out


def _embed_positions(params: ModelParams, path: PathIds) -> list[ad.Value]:
    return [
        ad.concat([ad.row(params.word_emb, w), ad.row(params.dep_emb, d), ad.row(params.pos_emb, p)])
        for w, d, p in zip(path.word_ids, path.dep_ids, path.pos_ids)
    ]


def encode_blocks(params: ModelParams, path: PathIds) -> list[ad.Value]:
    """Per-position concatenated forward/backward LSTM states."""
    cfg = params.cfg
    if len(path.word_ids) != cfg.n_l:
        raise ValidationError(f"path length {len(path.word_ids)} != configured n_l {cfg.n_l}")
    xs = _embed_positions(params, path)

    forward = []
    state = ad.LstmState.zeros(cfg.n_h)
    for x in xs:
        state = ad.lstm_step(x, state, params.enc_fwd)
        forward.append(state.h)

    backward_rev = []
    state = ad.LstmState.zeros(cfg.n_h2)
    for x in reversed(xs):
        state = ad.lstm_step(x, state, params.enc_bwd)
        backward_rev.append(state.h)
    backward = backward_rev[::-1]

    return [ad.concat([f, b]) for f, b in zip(forward, backward)]


def encode_path(params: ModelParams, path: PathIds) -> ad.Value:
    """Fixed-size encoding of one path: all position blocks concatenated."""
    return ad.concat(encode_blocks(params, path))


def aggregate(encodings: Sequence[np.ndarray]) -> np.ndarray:
    """Relation vector of a pair: elementwise sum of its path encodings."""
    if len(encodings) == 0:
        raise ValidationError("aggregate: no encodings given")
    out = np.array(encodings[0], dtype=np.float64)
    for e in encodings[1:]:
        if e.shape != out.shape:
            raise ValidationError("aggregate: encodings differ in dimension")
        out = out + e
    return out


def split_blocks(vector: np.ndarray, n_l: int) -> list[np.ndarray]:
    if vector.ndim != 1 or vector.shape[0] % n_l != 0:
        raise ValidationError(f"relation vector of size {vector.shape} does not split into {n_l} blocks")
    return list(vector.reshape(n_l, -1))


def decode_path(params: ModelParams, blocks: Sequence[ad.Value]) -> list[ad.Value]:
    """Word logits for every step, attending over the relation-vector blocks."""
    cfg = params.cfg
    if len(blocks) != cfg.n_l:
        raise ValidationError(f"expected {cfg.n_l} blocks, got {len(blocks)}")
    hidden = ad.GruState.zeros(cfg.n_g)
    context_prev = ad.Value(np.zeros(cfg.n_g))
    logits = []
    for _ in range(cfg.n_l):
        scores = ad.add(ad.matvec(params.attn_w, hidden.h), params.attn_b)
        weights = ad.softmax(scores)
        focus = ad.blend(weights, list(blocks))
        context = ad.matvec(params.ctx_w, ad.concat([focus, context_prev]))
        hidden = ad.gru_step(context, hidden, params.dec)
        logits.append(ad.add(ad.matvec(params.out_w, hidden.h), params.out_b))
        context_prev = context
    return logits


def decode_vector(params: ModelParams, relation_vector: np.ndarray) -> list[ad.Value]:
    """Decode from a plain relation vector (no gradient into the encoder)."""
    blocks = [ad.Value(b) for b in split_blocks(relation_vector, params.cfg.n_l)]
    return decode_path(params, blocks)


def _path_prediction_loss(params: ModelParams, inputs: Sequence[PathIds], target: PathIds) -> ad.Value:
    per_path_blocks = [encode_blocks(params, p) for p in inputs]
    summed = [ad.add_n([blocks[i] for blocks in per_path_blocks]) for i in range(params.cfg.n_l)]
    logits = decode_path(params, summed)
    n = target.true_length
    losses = [ad.softmax_cross_entropy(logits[i], target.word_ids[i]) for i in range(n)]
    return ad.scale(ad.add_n(losses), 1.0 / n)


def training_loss(params: ModelParams, group: Sequence[PathIds], held_out: int) -> ad.Value:
    """Cross entropy of predicting path `held_out` from the group's other
    paths, averaged over the target's unpadded length."""
    if len(group) < 2:
        raise ValidationError("training needs a group with at least 2 paths")
    if not 0 <= held_out < len(group):
        raise ValidationError(f"held-out index {held_out} out of range")
    target = group[held_out]
    inputs = [p for i, p in enumerate(group) if i != held_out]
    return _path_prediction_loss(params, inputs, target)


def infer_relation_vector(params: ModelParams, paths: Sequence[PathIds]) -> np.ndarray:
    """Relation vector over all of a pair's paths (nothing held out)."""
    return aggregate([encode_path(params, p).data for p in paths])


@dataclass
class TrainResult:
    params: ModelParams
    epoch_losses: list[float] = field(default_factory=list)


EpochCallback = Callable[[int, float, ModelParams], None]


def train(
    groups: Sequence[tuple[tuple[str, str], Sequence[PathIds]]],
    cfg: ModelConfig,
    n_words: int,
    n_deps: int,
    n_pos: int,
    on_epoch: EpochCallback | None = None,
) -> TrainResult:
    """SGD over the held-out-path objective.

    Per epoch: shuffle groups, pick the held-out index uniformly per group,
    cap the encoder inputs at max_input_paths (random subsample), sum losses
    over each batch of size m, clip the global gradient norm, and step. All
    randomness flows from cfg.seed, so identical inputs give bitwise
    identical parameters.
    """
    if not groups:
        raise ValidationError("train: no groups")
    rng = np.random.default_rng(cfg.seed)
    params = ModelParams(cfg, n_words, n_deps, n_pos, rng)
    trainable = params.trainable()
    result = TrainResult(params=params)

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(groups))
        batch: list[ad.Value] = []
        example_losses: list[float] = []
        for gi in order:
            pair, paths = groups[int(gi)]
            u = int(rng.integers(len(paths)))
            inputs = [p for i, p in enumerate(paths) if i != u]
            if len(inputs) > cfg.max_input_paths:
                keep = sorted(rng.choice(len(inputs), size=cfg.max_input_paths, replace=False).tolist())
                inputs = [inputs[i] for i in keep]
            try:
                loss = _path_prediction_loss(params, inputs, paths[u])
                example_losses.append(float(loss.data))
                batch.append(loss)
                if len(batch) == cfg.batch_size:
                    _apply_batch(trainable, batch, cfg.learning_rate)
                    batch = []
            except NumericError as exc:
                raise NumericError(f"epoch {epoch + 1}, pair {pair}: {exc}") from exc
        if batch:
            _apply_batch(trainable, batch, cfg.learning_rate)
        mean_loss = fmean(example_losses)
        if not math.isfinite(mean_loss):
            raise NumericError(f"epoch {epoch + 1}: mean loss is not finite")
        result.epoch_losses.append(mean_loss)
        if on_epoch is not None:
            on_epoch(epoch + 1, mean_loss, params)
    return result


def _apply_batch(trainable: Sequence[ad.Value], batch: list[ad.Value], learning_rate: float) -> None:
    total = batch[0] if len(batch) == 1 else ad.add_n(batch)
    ad.backward(total)
    ad.clip_gradients(trainable)
    ad.sgd_step(trainable, learning_rate)
    ad.zero_grad(trainable)
