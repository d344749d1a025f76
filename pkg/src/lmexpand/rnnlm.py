"""Shortlist LSTM language model trained with truncated backpropagation.

The network embeds the previous word, runs it through stacked LSTM layers
(no peepholes) and projects the top hidden state onto one output column per
explicit-vocabulary word, plus a per-word output bias.  Dropout, when
enabled, is applied only to non-recurrent connections: the embedded input
of the first layer, the hidden state handed from one layer to the next, and
the top hidden state before the output projection.  The recurrent paths
h_{t-1} -> h_t and c_{t-1} -> c_t are never masked, and masks are resampled
at every timestep.  All math is float64.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .vocab import BOS_ID, EOS_ID, Corpus, Vocabulary

MAGIC = b"RNNLM1"


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class LstmLayer:
    """One LSTM layer; gate rows are stacked input/forget/output/candidate."""

    w_in: np.ndarray  # (4H, in_dim)
    w_rec: np.ndarray  # (4H, H)
    bias: np.ndarray  # (4H,)


@dataclass
class RnnLmModel:
    vocab: Vocabulary
    input_embed: np.ndarray  # (n_explicit, embed_dim), one row per shortlist word
    layers: list[LstmLayer]
    output_embed: np.ndarray  # (n_explicit, hidden_dim)
    output_bias: np.ndarray  # (n_explicit,)

    @property
    def embed_dim(self) -> int:
        return self.input_embed.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.output_embed.shape[1]

    @property
    def n_explicit(self) -> int:
        return self.input_embed.shape[0]

    @property
    def num_layers(self) -> int:
        return len(self.layers)


@dataclass
class RnnState:
    h: np.ndarray  # (num_layers, hidden_dim)
    c: np.ndarray


@dataclass
class StepOutput:
    logits: np.ndarray  # (n_explicit,)
    state: RnnState


def init_model(
    vocab: Vocabulary,
    embed_dim: int,
    hidden_dim: int,
    num_layers: int,
    seed: int = 0,
) -> RnnLmModel:
    """Uniform [-0.05, 0.05] weights, zero biases except forget-gate bias 1."""
    rng = np.random.default_rng(seed)
    n = vocab.shortlist_size

    def uniform(shape):
        return rng.uniform(-0.05, 0.05, size=shape)

    layers = []
    in_dim = embed_dim
    for _ in range(num_layers):
        bias = np.zeros(4 * hidden_dim)
        bias[hidden_dim : 2 * hidden_dim] = 1.0
        layers.append(
            LstmLayer(
                w_in=uniform((4 * hidden_dim, in_dim)),
                w_rec=uniform((4 * hidden_dim, hidden_dim)),
                bias=bias,
            )
        )
        in_dim = hidden_dim
    return RnnLmModel(
        vocab=vocab,
        input_embed=uniform((n, embed_dim)),
        layers=layers,
        output_embed=uniform((n, hidden_dim)),
        output_bias=np.zeros(n),
    )


def zero_state(model: RnnLmModel) -> RnnState:
    shape = (model.num_layers, model.hidden_dim)
    return RnnState(h=np.zeros(shape), c=np.zeros(shape))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - np.max(x, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def _lstm_cell(layer: LstmLayer, x, h, c):
    hdim = h.shape[-1]
    z = x @ layer.w_in.T + h @ layer.w_rec.T + layer.bias
    i = _sigmoid(z[..., :hdim])
    f = _sigmoid(z[..., hdim : 2 * hdim])
    o = _sigmoid(z[..., 2 * hdim : 3 * hdim])
    g = np.tanh(z[..., 3 * hdim :])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return i, f, o, g, c_new, tc, h_new


def forward_step(
    model: RnnLmModel,
    word: int,
    state: RnnState,
    dropout_masks: list[np.ndarray] | None = None,
) -> StepOutput:
    """Advance one timestep and return logits over the explicit vocabulary.

    ``dropout_masks``, when given, holds num_layers + 1 vectors: one for the
    embedded input and one for each layer's outgoing hidden state.
    """
    if not 0 <= word < model.n_explicit:
        raise IndexError(f"word id {word} outside explicit range [0, {model.n_explicit})")
    x = model.input_embed[word]
    if dropout_masks is not None:
        x = x * dropout_masks[0]
    h_out = np.empty_like(state.h)
    c_out = np.empty_like(state.c)
    for l, layer in enumerate(model.layers):
        *_, c_new, _, h_new = _lstm_cell(layer, x, state.h[l], state.c[l])
        h_out[l] = h_new
        c_out[l] = c_new
        x = h_new * dropout_masks[l + 1] if dropout_masks is not None else h_new
    # einsum keeps each row's reduction independent of the row count, so
    # appending embedding rows leaves existing logits bit-identical (BLAS
    # gemv reblocks by matrix size and perturbs trailing rows by 1 ulp)
    logits = np.einsum("vd,d->v", model.output_embed, x) + model.output_bias
    return StepOutput(logits=logits, state=RnnState(h=h_out, c=c_out))


def logits_from_state(model: RnnLmModel, state: RnnState) -> np.ndarray:
    """Prediction logits of a state (projection of its top hidden vector)."""
    # same row-count-independent reduction as forward_step
    return np.einsum("vd,d->v", model.output_embed, state.h[-1]) + model.output_bias


def score_sentence(model: RnnLmModel, ids: list[int]) -> np.ndarray:
    """Per-position ln probabilities for a shortlist-encoded sentence.

    The model is fed the begin token followed by the sentence; the returned
    array has len(ids) + 1 entries, the last one for the end-of-sentence
    event.
    """
    if not ids:
        raise ValueError("empty sentence")
    inputs = [BOS_ID] + list(ids)
    targets = list(ids) + [EOS_ID]
    state = zero_state(model)
    out = np.empty(len(targets))
    for pos, (w_in, w_next) in enumerate(zip(inputs, targets)):
        step = forward_step(model, w_in, state)
        out[pos] = log_softmax(step.logits)[w_next]
        state = step.state
    return out


def perplexity(logprobs: np.ndarray) -> float:
    logprobs = np.asarray(logprobs, dtype=float)
    if logprobs.size == 0:
        raise ValueError("no scoreable tokens")
    return float(np.exp(-np.mean(logprobs)))


def corpus_perplexity(model: RnnLmModel, corpus: Corpus) -> float:
    """Shortlist perplexity: tail and unknown tokens collapse to <unk>."""
    parts = [
        score_sentence(model, [model.vocab.encode(t, shortlist_only=True) for t in s])
        for s in corpus
    ]
    return perplexity(np.concatenate(parts))


def named_parameters(model: RnnLmModel) -> list[tuple[str, np.ndarray]]:
    params = [("input_embed", model.input_embed)]
    for i, layer in enumerate(model.layers):
        params.append((f"layers.{i}.w_in", layer.w_in))
        params.append((f"layers.{i}.w_rec", layer.w_rec))
        params.append((f"layers.{i}.bias", layer.bias))
    params.append(("output_embed", model.output_embed))
    params.append(("output_bias", model.output_bias))
    return params


def loss_and_grads(
    model: RnnLmModel,
    inputs: np.ndarray,  # (T, B) int ids
    targets: np.ndarray,  # (T, B)
    h0: np.ndarray,  # (num_layers, B, hidden_dim)
    c0: np.ndarray,
    masks: list[list[np.ndarray]] | None = None,  # masks[t][level], level 0..L
) -> tuple[float, dict[str, np.ndarray], np.ndarray, np.ndarray]:
    """Mean cross-entropy over a BPTT window plus exact analytic gradients.

    The initial state is treated as a constant (gradients are truncated at
    the window boundary).  Returns the loss, a gradient dict keyed like
    ``named_parameters``, and the final (detached) state arrays.
    """
    T, B = inputs.shape
    L = model.num_layers
    hdim = model.hidden_dim

    h_prev = h0.copy()
    c_prev = c0.copy()
    caches: list[list[tuple]] = []
    tops = []
    logps = []
    loss = 0.0
    for t in range(T):
        x = model.input_embed[inputs[t]]
        if masks is not None:
            x = x * masks[t][0]
        layer_caches = []
        for l, layer in enumerate(model.layers):
            i, f, o, g, c_new, tc, h_new = _lstm_cell(layer, x, h_prev[l], c_prev[l])
            layer_caches.append((x, h_prev[l].copy(), c_prev[l].copy(), i, f, o, g, tc))
            h_prev[l] = h_new
            c_prev[l] = c_new
            x = h_new * masks[t][l + 1] if masks is not None else h_new
        caches.append(layer_caches)
        tops.append(x)
        logits = x @ model.output_embed.T + model.output_bias
        logp = log_softmax(logits)
        logps.append(logp)
        loss -= logp[np.arange(B), targets[t]].sum()
    denom = T * B
    loss /= denom

    grads = {name: np.zeros_like(arr) for name, arr in named_parameters(model)}
    dh_time = np.zeros((L, B, hdim))
    dc_time = np.zeros((L, B, hdim))
    for t in range(T - 1, -1, -1):
        dlogits = np.exp(logps[t])
        dlogits[np.arange(B), targets[t]] -= 1.0
        dlogits /= denom
        grads["output_embed"] += dlogits.T @ tops[t]
        grads["output_bias"] += dlogits.sum(axis=0)
        dx = dlogits @ model.output_embed
        pending = dx * masks[t][L] if masks is not None else dx
        for l in range(L - 1, -1, -1):
            x_l, h_l_prev, c_l_prev, i, f, o, g, tc = caches[t][l]
            layer = model.layers[l]
            dh = pending + dh_time[l]
            dc = dh * o * (1.0 - tc * tc) + dc_time[l]
            dz = np.concatenate(
                [
                    dc * g * i * (1.0 - i),
                    dc * c_l_prev * f * (1.0 - f),
                    dh * tc * o * (1.0 - o),
                    dc * i * (1.0 - g * g),
                ],
                axis=1,
            )
            grads[f"layers.{l}.w_in"] += dz.T @ x_l
            grads[f"layers.{l}.w_rec"] += dz.T @ h_l_prev
            grads[f"layers.{l}.bias"] += dz.sum(axis=0)
            dh_time[l] = dz @ layer.w_rec
            dc_time[l] = dc * f
            dxin = dz @ layer.w_in
            if l > 0:
                pending = dxin * masks[t][l] if masks is not None else dxin
            else:
                demb = dxin * masks[t][0] if masks is not None else dxin
                np.add.at(grads["input_embed"], inputs[t], demb)
    return float(loss), grads, h_prev, c_prev


@dataclass
class TrainConfig:
    """Knobs for truncated-BPTT SGD training.

    The learning rate halves when validation perplexity stops improving by
    at least 1% relative, and training stops early once it rises outright.
    """

    unroll: int = 10
    dropout: float = 0.5
    lr: float = 1.0
    clip: float = 5.0
    epochs: int = 5
    batch: int = 16
    seed: int = 0


def _training_stream(corpus: Corpus, vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
    inputs: list[int] = []
    targets: list[int] = []
    for sentence in corpus:
        ids = [vocab.encode(t, shortlist_only=True) for t in sentence]
        inputs.extend([BOS_ID] + ids)
        targets.extend(ids + [EOS_ID])
    return np.array(inputs, dtype=np.int64), np.array(targets, dtype=np.int64)


def train_bptt(
    model: RnnLmModel,
    corpus: Corpus,
    config: TrainConfig,
    val_corpus: Corpus | None = None,
) -> tuple[RnnLmModel, list[float]]:
    """Train in place; returns the model and per-epoch validation perplexity.

    Sentences are concatenated into one stream, split across ``batch``
    parallel sub-streams; hidden state is carried across window boundaries
    within an epoch.  Without a validation corpus the history holds training
    perplexity instead.
    """
    if not corpus:
        raise ValueError("empty corpus")
    rng = np.random.default_rng(config.seed)
    inp, tgt = _training_stream(corpus, model.vocab)
    batch = max(1, min(config.batch, inp.size // max(config.unroll, 1), inp.size))
    cols = inp.size // batch
    if cols == 0:
        raise ValueError("corpus too small for the requested batch size")
    X = inp[: batch * cols].reshape(batch, cols)
    Y = tgt[: batch * cols].reshape(batch, cols)
    L, hdim = model.num_layers, model.hidden_dim
    keep = 1.0 - config.dropout
    if not 0.0 < keep <= 1.0:
        raise ValueError("dropout must lie in [0, 1)")
    params = named_parameters(model)
    lr = config.lr
    history: list[float] = []
    best = math.inf
    prev = math.inf

    for epoch in range(config.epochs):
        h = np.zeros((L, batch, hdim))
        c = np.zeros((L, batch, hdim))
        total_nll = 0.0
        total_tok = 0
        for start in range(0, cols, config.unroll):
            xw = X[:, start : start + config.unroll].T.copy()
            yw = Y[:, start : start + config.unroll].T.copy()
            T = xw.shape[0]
            masks = None
            if config.dropout > 0.0:
                masks = [
                    [
                        (rng.random((batch, dim)) < keep) / keep
                        for dim in [model.embed_dim] + [hdim] * L
                    ]
                    for _ in range(T)
                ]
            loss, grads, h, c = loss_and_grads(model, xw, yw, h, c, masks)
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss} at epoch {epoch} window {start // config.unroll}"
                )
            gnorm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            scale = lr if gnorm <= config.clip else lr * config.clip / gnorm
            for name, arr in params:
                arr -= scale * grads[name]
            total_nll += loss * xw.size
            total_tok += xw.size
        if val_corpus is not None:
            score = corpus_perplexity(model, val_corpus)
        else:
            score = math.exp(total_nll / total_tok)
        history.append(score)
        if score > prev:
            break
        if score > best * 0.99:
            lr *= 0.5
        best = min(best, score)
        prev = score
    return model, history


def save_checkpoint(model: RnnLmModel, path: str) -> None:
    """Binary checkpoint: magic, dims, embedded vocabulary, parameter blocks.

    Matrices are serialized column-major in their word-per-column shapes
    (embed_dim x n_explicit for the input embedding, hidden_dim x n_explicit
    for the output embedding, 4*hidden x fan-in for LSTM blocks) as
    little-endian float64, so round-trips are bit-exact.
    """
    vocab_blob = model.vocab.to_text().encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(
            struct.pack(
                "<IIIII",
                model.embed_dim,
                model.hidden_dim,
                model.num_layers,
                len(model.vocab),
                model.vocab.shortlist_size,
            )
        )
        fh.write(struct.pack("<Q", len(vocab_blob)))
        fh.write(vocab_blob)
        fh.write(np.ascontiguousarray(model.input_embed, dtype="<f8").tobytes())
        for layer in model.layers:
            fh.write(np.asarray(layer.w_in, dtype="<f8").tobytes(order="F"))
            fh.write(np.asarray(layer.w_rec, dtype="<f8").tobytes(order="F"))
            fh.write(np.asarray(layer.bias, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.output_embed, dtype="<f8").tobytes())
        fh.write(np.asarray(model.output_bias, dtype="<f8").tobytes())


def load_checkpoint(path: str) -> RnnLmModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise ValueError(f"not a checkpoint file (bad magic): {path}")
    off = len(MAGIC)
    try:
        embed_dim, hidden_dim, num_layers, total_words, shortlist = struct.unpack_from(
            "<IIIII", blob, off
        )
        off += struct.calcsize("<IIIII")
        (vlen,) = struct.unpack_from("<Q", blob, off)
        off += struct.calcsize("<Q")
        vocab_blob = blob[off : off + vlen]
        if len(vocab_blob) != vlen:
            raise struct.error("vocabulary block truncated")
        off += vlen
    except struct.error as err:
        raise ValueError(f"truncated checkpoint: {path}") from err
    vocab = Vocabulary.from_text(vocab_blob.decode("utf-8"))
    if len(vocab) != total_words or vocab.shortlist_size != shortlist:
        raise ValueError("checkpoint header disagrees with embedded vocabulary")

    def take(count: int) -> np.ndarray:
        nonlocal off
        nbytes = count * 8
        if off + nbytes > len(blob):
            raise ValueError(f"truncated checkpoint: {path}")
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off).copy()
        off += nbytes
        return arr

    input_embed = take(shortlist * embed_dim).reshape(shortlist, embed_dim)
    layers = []
    in_dim = embed_dim
    for _ in range(num_layers):
        w_in = take(4 * hidden_dim * in_dim).reshape((4 * hidden_dim, in_dim), order="F")
        w_rec = take(4 * hidden_dim * hidden_dim).reshape(
            (4 * hidden_dim, hidden_dim), order="F"
        )
        bias = take(4 * hidden_dim)
        layers.append(LstmLayer(w_in=w_in, w_rec=w_rec, bias=bias))
        in_dim = hidden_dim
    output_embed = take(shortlist * hidden_dim).reshape(shortlist, hidden_dim)
    output_bias = take(shortlist)
    if off != len(blob):
        raise ValueError(f"checkpoint has {len(blob) - off} unexpected trailing bytes")
    return RnnLmModel(
        vocab=vocab,
        input_embed=input_embed,
        layers=layers,
        output_embed=output_embed,
        output_bias=output_bias,
    )
