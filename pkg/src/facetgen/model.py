"""A compact encoder-decoder with exact gradients.

The encoder averages the input token embeddings and projects the mean
through ``tanh`` into a context vector ``c``.  The decoder is a GRU-style
cell whose hidden state starts at ``c``; at each step it reads the previous
token embedding together with ``c``::

    u   = [emb(prev); c]
    z   = sigmoid(Wx_z u + Wh_z h + b_z)
    r   = sigmoid(Wx_r u + Wh_r h + b_r)
    n   = tanh(Wx_n u + r * (Wh_n h) + b_n)
    h'  = (1 - z) * n + z * h
    out = W_out h' + b_out

Everything runs in float64.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .text import BOS_ID

PARAM_NAMES = (
    "embedding",
    "enc_weight",
    "enc_bias",
    "gate_input",
    "gate_hidden",
    "gate_bias",
    "out_weight",
    "out_bias",
)

_MAGIC = b"FACETGEN-CKPT-1\n"


class NumericError(FloatingPointError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    embedding_dim: int = 32
    hidden_dim: int = 64
    max_input_tokens: int = 512
    max_output_tokens: int = 128
    init_seed: int = 0

    def __post_init__(self):
        if min(self.vocab_size, self.embedding_dim, self.hidden_dim) < 1:
            raise ValueError("model dimensions must be >= 1")
        if min(self.max_input_tokens, self.max_output_tokens) < 2:
            raise ValueError("maximum lengths must be >= 2")

    def shapes(self) -> dict[str, tuple[int, ...]]:
        V, E, H = self.vocab_size, self.embedding_dim, self.hidden_dim
        return {
            "embedding": (V, E),
            "enc_weight": (H, E),
            "enc_bias": (H,),
            "gate_input": (3 * H, E + H),
            "gate_hidden": (3 * H, H),
            "gate_bias": (3 * H,),
            "out_weight": (V, H),
            "out_bias": (V,),
        }


@dataclass(frozen=True, eq=False)
class Parameters:
    config: ModelConfig
    weights: dict[str, np.ndarray]

    def __post_init__(self):
        shapes = self.config.shapes()
        if set(self.weights) != set(shapes):
            raise ValueError("parameter names do not match the model config")
        for name, arr in self.weights.items():
            if arr.shape != shapes[name]:
                raise ValueError(f"{name}: shape {arr.shape} != {shapes[name]}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.weights[name]

    def replace(self, weights: dict[str, np.ndarray]) -> "Parameters":
        return Parameters(self.config, weights)

    def copy(self) -> "Parameters":
        return Parameters(self.config, {k: v.copy() for k, v in self.weights.items()})

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights[k].ravel() for k in PARAM_NAMES])


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def init_parameters(config: ModelConfig) -> Parameters:
    """Uniform(-s, s) weights with ``s = 1/sqrt(fan_in)``; zero biases."""
    rng = np.random.default_rng(config.init_seed)
    weights = {}
    for name, shape in config.shapes().items():
        if name.endswith("bias"):
            weights[name] = np.zeros(shape)
        else:
            fan_in = config.embedding_dim if name == "embedding" else shape[1]
            bound = 1.0 / np.sqrt(fan_in)
            weights[name] = rng.uniform(-bound, bound, size=shape)
    return Parameters(config, {k: _frozen(v) for k, v in weights.items()})


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _pad(seqs: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    width = int(lengths.max()) if len(seqs) else 0
    ids = np.zeros((len(seqs), width), dtype=np.int64)
    for b, s in enumerate(seqs):
        ids[b, :len(s)] = s
    mask = np.arange(width)[None, :] < lengths[:, None]
    return ids, mask.astype(np.float64), lengths


def _check_input(params: Parameters, ids: Sequence[int]) -> None:
    if len(ids) == 0:
        raise ValueError("empty input")
    if len(ids) > params.config.max_input_tokens:
        raise ValueError("input too long")


def _check_target(params: Parameters, ids: Sequence[int]) -> None:
    if len(ids) == 0:
        raise ValueError("empty target")
    if len(ids) > params.config.max_output_tokens:
        raise ValueError("target too long")


def _encode_batch(params: Parameters, inputs):
    X, M, lengths = _pad(inputs)
    emb = params["embedding"]
    pooled = (emb[X] * M[:, :, None]).sum(axis=1) / lengths[:, None]
    C = np.tanh(pooled @ params["enc_weight"].T + params["enc_bias"])
    return C, (X, M, lengths, pooled)


def encode_batch(params: Parameters, inputs: Sequence[Sequence[int]]) -> np.ndarray:
    for ids in inputs:
        _check_input(params, ids)
    return _encode_batch(params, inputs)[0]


def encode(params: Parameters, ids: Sequence[int]) -> np.ndarray:
    """Context vector for one input sequence."""
    return encode_batch(params, [ids])[0]


def decoder_step(params: Parameters, h: np.ndarray, prev: np.ndarray, context: np.ndarray):
    """One batched decoder step; returns the new hidden state and raw logits."""
    H = params.config.hidden_dim
    u = np.concatenate([params["embedding"][prev], context], axis=1)
    gx = u @ params["gate_input"].T
    gh = h @ params["gate_hidden"].T
    b = params["gate_bias"]
    z = _sigmoid(gx[:, :H] + gh[:, :H] + b[:H])
    r = _sigmoid(gx[:, H:2 * H] + gh[:, H:2 * H] + b[H:2 * H])
    n = np.tanh(gx[:, 2 * H:] + r * gh[:, 2 * H:] + b[2 * H:])
    h_new = (1.0 - z) * n + z * h
    logits = h_new @ params["out_weight"].T + params["out_bias"]
    return h_new, logits, (u, z, r, n, gh[:, 2 * H:], h)


def step_logits(params: Parameters, context: np.ndarray, prefix: Sequence[int]) -> np.ndarray:
    """Next-token scores after ``prefix`` (BOS is implicit)."""
    if len(prefix) >= params.config.max_output_tokens:
        raise ValueError("prefix too long")
    c = np.asarray(context, dtype=np.float64)[None, :]
    h = c
    logits = None
    for tok in [BOS_ID, *prefix]:
        h, logits, _ = decoder_step(params, h, np.array([tok]), c)
    return logits[0]


def sequence_nll(params: Parameters, context: np.ndarray, target: Sequence[int]) -> float:
    """Per-token mean negative log-likelihood of ``target`` under teacher forcing."""
    _check_target(params, target)
    c = np.asarray(context, dtype=np.float64)[None, :]
    nll, _ = _decode_forward(params, c, [target])
    return float(nll[0])


def _decode_forward(params: Parameters, C: np.ndarray, targets):
    Y, MY, ylen = _pad(targets)
    B, T = Y.shape
    prev = np.concatenate([np.full((B, 1), BOS_ID), Y[:, :-1]], axis=1)
    h = C
    total = np.zeros(B)
    steps = []
    rows = np.arange(B)
    for t in range(T):
        h, logits, cache = decoder_step(params, h, prev[:, t], C)
        logp = _log_softmax(logits)
        total -= logp[rows, Y[:, t]] * MY[:, t]
        steps.append((cache, h, np.exp(logp)))
    nll = total / ylen
    return nll, (Y, MY, ylen, prev, steps)


@dataclass
class ForwardCache:
    nll: np.ndarray
    enc: tuple
    dec: tuple
    contexts: np.ndarray


def forward(params: Parameters, inputs: Sequence[Sequence[int]], targets: Sequence[Sequence[int]]) -> ForwardCache:
    """Per-example NLLs for a batch, keeping what ``backward`` needs."""
    if len(inputs) != len(targets) or not inputs:
        raise ValueError("inputs and targets must be non-empty and aligned")
    for x in inputs:
        _check_input(params, x)
    for y in targets:
        _check_target(params, y)
    with np.errstate(over="ignore", invalid="ignore"):
        C, enc = _encode_batch(params, inputs)
        nll, dec = _decode_forward(params, C, targets)
    if not np.all(np.isfinite(nll)):
        raise NumericError("numeric overflow")
    return ForwardCache(nll, enc, dec, C)


def backward(params: Parameters, cache: ForwardCache, coefs: np.ndarray) -> dict[str, np.ndarray]:
    """Gradient of ``sum_b coefs[b] * nll[b]`` with respect to every parameter."""
    H, E = params.config.hidden_dim, params.config.embedding_dim
    coefs = np.asarray(coefs, dtype=np.float64)
    Y, MY, ylen, prev, steps = cache.dec
    X, MX, xlen, pooled = cache.enc
    C = cache.contexts
    B = Y.shape[0]
    rows = np.arange(B)
    g = {k: np.zeros_like(v) for k, v in params.weights.items()}
    W_x, W_h, W_out = params["gate_input"], params["gate_hidden"], params["out_weight"]
    scale = coefs / ylen
    dh = np.zeros((B, H))
    dC = np.zeros((B, H))
    for t in range(len(steps) - 1, -1, -1):
        (u, z, r, n, ghn, h_prev), h_new, probs = steps[t]
        dlogits = probs.copy()
        dlogits[rows, Y[:, t]] -= 1.0
        dlogits *= (scale * MY[:, t])[:, None]
        g["out_weight"] += dlogits.T @ h_new
        g["out_bias"] += dlogits.sum(axis=0)
        dh = dh + dlogits @ W_out
        dn = dh * (1.0 - z)
        dz = dh * (h_prev - n)
        dh_prev = dh * z
        da_n = dn * (1.0 - n * n)
        da_r = da_n * ghn * r * (1.0 - r)
        da_z = dz * z * (1.0 - z)
        dgx = np.concatenate([da_z, da_r, da_n], axis=1)
        dgh = np.concatenate([da_z, da_r, da_n * r], axis=1)
        g["gate_bias"] += dgx.sum(axis=0)
        g["gate_input"] += dgx.T @ u
        g["gate_hidden"] += dgh.T @ h_prev
        du = dgx @ W_x
        np.add.at(g["embedding"], prev[:, t], du[:, :E])
        dC += du[:, E:]
        dh = dh_prev + dgh @ W_h
    dC += dh
    da_c = dC * (1.0 - C * C)
    g["enc_weight"] += da_c.T @ pooled
    g["enc_bias"] += da_c.sum(axis=0)
    dpooled = da_c @ params["enc_weight"]
    per_token = (dpooled / xlen[:, None])[:, None, :] * MX[:, :, None]
    np.add.at(g["embedding"], X.ravel(), per_token.reshape(-1, E))
    for v in g.values():
        if not np.all(np.isfinite(v)):
            raise NumericError("numeric overflow")
    return g


def nll_gradient(params: Parameters, batch, normalize: bool = True):
    """Weighted NLL and its gradient over ``(input, target, weight)`` triples.

    With ``normalize`` the loss is the weighted mean (weights divided by
    their sum); without it, the plain weighted sum.
    """
    batch = list(batch)
    if not batch:
        raise ValueError("empty batch")
    inputs, targets, weights = zip(*batch)
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w <= 0):
        raise ValueError("example weights must be positive")
    if normalize:
        w = w / w.sum()
    cache = forward(params, inputs, targets)
    return float(w @ cache.nll), backward(params, cache, w)


def save_checkpoint(path, params: Parameters, meta: dict | None = None) -> None:
    """Write a JSON header line followed by the raw float64 parameter vector."""
    header = {
        "config": asdict(params.config),
        "params": [[k, list(params[k].shape)] for k in PARAM_NAMES],
        "meta": meta or {},
    }
    blob = params.flat().astype("<f8").tobytes()
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(head)))
        fh.write(head)
        fh.write(blob)


def load_checkpoint(path) -> tuple[Parameters, dict]:
    data = Path(path).read_bytes()
    if not data.startswith(_MAGIC):
        raise ValueError(f"{path} is not a checkpoint file")
    pos = len(_MAGIC)
    (n,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    header = json.loads(data[pos:pos + n].decode("utf-8"))
    flat = np.frombuffer(data[pos + n:], dtype="<f8").astype(np.float64)
    config = ModelConfig(**header["config"])
    weights, offset = {}, 0
    for name, shape in header["params"]:
        size = int(np.prod(shape))
        weights[name] = _frozen(flat[offset:offset + size].reshape(shape))
        offset += size
    if offset != flat.size:
        raise ValueError("checkpoint size does not match its header")
    return Parameters(config, weights), header["meta"]
