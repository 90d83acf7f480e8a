"""Dense numerical core: vanilla stacked LSTM with exact BPTT, fully
connected softmax/cross-entropy head, Adam, gradient clipping, and a
versioned binary checkpoint format.

All math is float64 by default; tests assert gradient exactness at that
precision. Shapes follow the (time, batch, features) convention.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import NaNError, ShapeError

DTYPE = np.float64


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out)).astype(DTYPE)


@dataclass
class DenseParams:
    w: np.ndarray  # (in, out)
    b: np.ndarray  # (out,)

    @classmethod
    def init(cls, rng: np.random.Generator, n_in: int, n_out: int) -> "DenseParams":
        return cls(xavier_uniform(rng, n_in, n_out), np.zeros(n_out, dtype=DTYPE))


@dataclass
class LstmLayerParams:
    """Gate blocks laid out [input, forget, cell, output] along the last axis."""
    w_x: np.ndarray  # (d_in, 4h)
    w_h: np.ndarray  # (h, 4h)
    b: np.ndarray    # (4h,)

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[0]

    @classmethod
    def init(cls, rng: np.random.Generator, d_in: int, h: int) -> "LstmLayerParams":
        w_x = xavier_uniform(rng, d_in, h, shape=(d_in, 4 * h))
        w_h = xavier_uniform(rng, h, h, shape=(h, 4 * h))
        b = np.zeros(4 * h, dtype=DTYPE)
        b[h:2 * h] = 1.0  # forget-gate bias
        return cls(w_x, w_h, b)


@dataclass
class LstmCache:
    x: list[np.ndarray]          # per layer input (T, B, d_in)
    gates: list[np.ndarray]      # per layer activated gates (T, B, 4h)
    c: list[np.ndarray]          # per layer cell states (T, B, h)
    h: list[np.ndarray]          # per layer hidden states (T, B, h)


def _check_finite(name: str, *arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NaNError(f"non-finite values in {name}")


def lstm_forward(layers: list[LstmLayerParams],
                 x: np.ndarray) -> tuple[np.ndarray, LstmCache]:
    """Run a stacked vanilla LSTM over x of shape (T, B, d) (or (T, d)).

    Returns the top layer's hidden states (T, B, h) and the cache needed for
    backprop. Initial hidden and cell states are zero.
    """
    if x.ndim == 2:
        x = x[:, None, :]
    if x.ndim != 3 or x.shape[0] < 1:
        raise ShapeError(f"expected (T, B, d) input, got {x.shape}")
    if x.shape[2] != layers[0].w_x.shape[0]:
        raise ShapeError(f"input dim {x.shape[2]} != layer-0 dim {layers[0].w_x.shape[0]}")
    T, B = x.shape[:2]
    cache = LstmCache([], [], [], [])
    inp = x.astype(DTYPE)
    for p in layers:
        h_sz = p.hidden_size
        gates = np.empty((T, B, 4 * h_sz), dtype=DTYPE)
        cs = np.empty((T, B, h_sz), dtype=DTYPE)
        hs = np.empty((T, B, h_sz), dtype=DTYPE)
        h_prev = np.zeros((B, h_sz), dtype=DTYPE)
        c_prev = np.zeros((B, h_sz), dtype=DTYPE)
        for t in range(T):
            z = inp[t] @ p.w_x + h_prev @ p.w_h + p.b
            i = sigmoid(z[:, :h_sz])
            f = sigmoid(z[:, h_sz:2 * h_sz])
            g = np.tanh(z[:, 2 * h_sz:3 * h_sz])
            o = sigmoid(z[:, 3 * h_sz:])
            c_prev = f * c_prev + i * g
            h_prev = o * np.tanh(c_prev)
            gates[t] = np.concatenate([i, f, g, o], axis=1)
            cs[t] = c_prev
            hs[t] = h_prev
        cache.x.append(inp)
        cache.gates.append(gates)
        cache.c.append(cs)
        cache.h.append(hs)
        inp = hs
    return cache.h[-1], cache


def lstm_backward(layers: list[LstmLayerParams], cache: LstmCache,
                  d_h_top: np.ndarray):
    """Exact BPTT. d_h_top is the upstream gradient on the top layer's hidden
    states, shape (T, B, h); inject zeros at timesteps that carry no loss.

    Returns (per-layer grads [(d_w_x, d_w_h, d_b)], d_input (T, B, d0)).
    """
    if d_h_top.shape != cache.h[-1].shape:
        raise ShapeError(f"upstream grad shape {d_h_top.shape} != {cache.h[-1].shape}")
    grads = [None] * len(layers)
    d_out = d_h_top
    for li in range(len(layers) - 1, -1, -1):
        p = layers[li]
        h_sz = p.hidden_size
        x, gates, cs, hs = cache.x[li], cache.gates[li], cache.c[li], cache.h[li]
        T, B = x.shape[:2]
        d_w_x = np.zeros_like(p.w_x)
        d_w_h = np.zeros_like(p.w_h)
        d_b = np.zeros_like(p.b)
        d_x = np.zeros_like(x)
        dh_next = np.zeros((B, h_sz), dtype=DTYPE)
        dc_next = np.zeros((B, h_sz), dtype=DTYPE)
        for t in range(T - 1, -1, -1):
            i = gates[t][:, :h_sz]
            f = gates[t][:, h_sz:2 * h_sz]
            g = gates[t][:, 2 * h_sz:3 * h_sz]
            o = gates[t][:, 3 * h_sz:]
            c_t = cs[t]
            tanh_c = np.tanh(c_t)
            dh = d_out[t] + dh_next
            do = dh * tanh_c
            dc = dh * o * (1 - tanh_c ** 2) + dc_next
            c_prev = cs[t - 1] if t > 0 else np.zeros_like(c_t)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dc_next = dc * f
            dz = np.concatenate([di * i * (1 - i), df * f * (1 - f),
                                 dg * (1 - g ** 2), do * o * (1 - o)], axis=1)
            d_w_x += x[t].T @ dz
            h_prev = hs[t - 1] if t > 0 else np.zeros((B, h_sz), dtype=DTYPE)
            d_w_h += h_prev.T @ dz
            d_b += dz.sum(axis=0)
            d_x[t] = dz @ p.w_x.T
            dh_next = dz @ p.w_h.T
        grads[li] = (d_w_x, d_w_h, d_b)
        d_out = d_x
    return grads, d_out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits: np.ndarray, target: int):
    """Single-sample stable cross entropy: returns (probs, loss, d_logits)."""
    if not 0 <= target < logits.shape[-1]:
        raise ShapeError(f"target {target} out of range for {logits.shape[-1]} classes")
    z = logits - logits.max()
    lse = np.log(np.exp(z).sum())
    probs = np.exp(z - lse)
    loss = lse - z[target]
    d = probs.copy()
    d[target] -= 1.0
    return probs, float(loss), d


def dense_softmax_xent(params: DenseParams, x: np.ndarray, target: int):
    """FCL + softmax + cross entropy for one input vector.

    Returns (probs, loss, (d_w, d_b, d_x)).
    """
    if x.shape != (params.w.shape[0],):
        raise ShapeError(f"input shape {x.shape} != ({params.w.shape[0]},)")
    logits = x @ params.w + params.b
    probs, loss, d_logits = softmax_xent(logits, target)
    d_w = np.outer(x, d_logits)
    d_b = d_logits
    d_x = params.w @ d_logits
    return probs, loss, (d_w, d_b, d_x)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Bias-corrected Adam update, in place."""
    state.t += 1
    t = state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape mismatch for {name}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)


def sgd_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             lr: float) -> None:
    for name, p in params.items():
        p -= lr * grads[name]


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float = 5.0) -> float:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


# --- checkpoint format ------------------------------------------------------

_MAGIC = b"DGRC"
_VERSION = 1


def save_checkpoint(path, blocks: dict[str, np.ndarray],
                    manifest: dict | None = None) -> None:
    """Versioned binary checkpoint: magic, version, named float64 blocks.
    Hyperparameters/seed go to a sidecar `<path>.manifest` text file."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", _VERSION, len(blocks)))
        for name, arr in blocks.items():
            nb = name.encode("utf-8")
            a = np.asarray(arr, dtype=DTYPE, order="C")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", a.ndim))
            f.write(struct.pack(f"<{a.ndim}q", *a.shape))
            f.write(a.astype("<f8").tobytes())
    if manifest is not None:
        with open(str(path) + ".manifest", "w", encoding="utf-8") as f:
            for k in sorted(manifest):
                f.write(f"{k}={manifest[k]}\n")


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ShapeError(f"{path}: not a checkpoint file")
        version, count = struct.unpack("<II", f.read(8))
        if version != _VERSION:
            raise ShapeError(f"{path}: unsupported checkpoint version {version}")
        blocks = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", f.read(4))
            name = f.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<I", f.read(4))
            shape = struct.unpack(f"<{ndim}q", f.read(8 * ndim))
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(8 * n), dtype="<f8").astype(DTYPE)
            blocks[name] = data.reshape(shape)
    manifest = {}
    try:
        with open(str(path) + ".manifest", encoding="utf-8") as f:
            for line in f:
                if "=" in line:
                    k, v = line.rstrip("\n").split("=", 1)
                    manifest[k] = v
    except FileNotFoundError:
        pass
    return blocks, manifest
