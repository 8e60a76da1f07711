"""Dense ReLU network with hand-written reverse-mode gradients and Adam.

Everything is 64-bit numpy: the networks are small (4 x 300 hidden units),
so determinism and gradient-check fidelity matter more than speed. The
output layer is linear and reshaped to (num_actions, num_quantiles);
num_quantiles = 1 gives a plain action-value head.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_MAGIC = b"RISKCROSS-NET/1\n"


class TrainingError(Exception):
    """Non-finite gradients or corrupted optimizer state."""


class MlpNetwork:
    """Fully-connected ReLU layers, linear head, row-vector convention (x @ W + b)."""

    def __init__(
        self,
        input_dim: int,
        num_actions: int,
        num_quantiles: int,
        hidden: tuple[int, ...] = (300, 300, 300, 300),
        seed: int = 0,
    ):
        self.input_dim = int(input_dim)
        self.num_actions = int(num_actions)
        self.num_quantiles = int(num_quantiles)
        self.hidden = tuple(int(h) for h in hidden)
        dims = [self.input_dim, *self.hidden, self.num_actions * self.num_quantiles]
        rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / fan_in)  # He-uniform, fan-in scaling
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def layer_dims(self) -> list[int]:
        return [self.input_dim, *self.hidden, self.num_actions * self.num_quantiles]

    def parameters(self) -> list[np.ndarray]:
        """Fixed ordering: W0, b0, W1, b1, ... Used by the optimizer and serializer."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        """(batch, actions, quantiles) head values."""
        out, _ = self._forward(np.atleast_2d(np.asarray(x, dtype=float)), want_cache=False)
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        """(actions, quantiles) head values for a single feature vector."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.input_dim:
            raise ValueError(f"expected input of length {self.input_dim}, got shape {x.shape}")
        return self.forward_batch(x[None, :])[0]

    def _forward(self, x: np.ndarray, want_cache: bool):
        if x.shape[1] != self.input_dim:
            raise ValueError(f"expected input dim {self.input_dim}, got {x.shape[1]}")
        cache = [x] if want_cache else None
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
            if want_cache:
                cache.append(h)
        out = h @ self.weights[-1] + self.biases[-1]
        return out.reshape(x.shape[0], self.num_actions, self.num_quantiles), cache

    def forward_with_cache(self, x: np.ndarray):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self._forward(x, want_cache=True)

    # -- specialized head paths used by the training loop ------------------
    #
    # The generic forward/backward always materialize the full
    # (batch, actions * quantiles) head. During training only the per-action
    # means (for double-Q argmax) and the quantiles of one action per row
    # are needed, which cuts the dominant head matmuls by num_actions.

    def forward_hidden(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Trunk activations only: (last hidden, cache of all activations)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cache = [x]
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
            cache.append(h)
        return h, cache

    def head_means(self, h: np.ndarray) -> np.ndarray:
        """(batch, actions) per-action quantile means from trunk activations."""
        w = self.weights[-1].reshape(-1, self.num_actions, self.num_quantiles).mean(axis=2)
        b = self.biases[-1].reshape(self.num_actions, self.num_quantiles).mean(axis=1)
        return h @ w + b

    def head_select(self, h: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """(batch, quantiles) head output restricted to one action per row."""
        n = self.num_quantiles
        w = self.weights[-1]
        b = self.biases[-1]
        out = np.empty((h.shape[0], n))
        for a in range(self.num_actions):
            rows = np.nonzero(actions == a)[0]
            if rows.size:
                out[rows] = h[rows] @ w[:, a * n : (a + 1) * n] + b[a * n : (a + 1) * n]
        return out

    def backward_selected(
        self, cache: list[np.ndarray], actions: np.ndarray, grad_pred: np.ndarray
    ) -> list[np.ndarray]:
        """Gradients when the head gradient is nonzero for one action per row.

        Equivalent to backward_from_cache with a zero-padded head gradient,
        without touching the zero blocks of the final layer.
        """
        n = self.num_quantiles
        w_head = self.weights[-1]
        h_last = cache[-1]
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        dw = np.zeros_like(w_head)
        db = np.zeros_like(self.biases[-1])
        delta = np.zeros((h_last.shape[0], w_head.shape[0]))
        for a in range(self.num_actions):
            rows = np.nonzero(actions == a)[0]
            if not rows.size:
                continue
            g = grad_pred[rows]
            dw[:, a * n : (a + 1) * n] = h_last[rows].T @ g
            db[a * n : (a + 1) * n] = g.sum(axis=0)
            delta[rows] = g @ w_head[:, a * n : (a + 1) * n].T
        grads[-2], grads[-1] = dw, db
        delta *= cache[-1] > 0.0
        for layer in range(len(self.weights) - 2, -1, -1):
            h_in = cache[layer]
            grads[2 * layer] = h_in.T @ delta
            grads[2 * layer + 1] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (h_in > 0.0)
        return grads

    def backward_from_cache(self, cache: list[np.ndarray], output_grad: np.ndarray) -> list[np.ndarray]:
        """Parameter gradients given forward activations and the head gradient.

        output_grad has shape (batch, actions, quantiles); the returned list
        matches `parameters()` ordering. ReLU masks are recovered from the
        cached post-activation values (h > 0 iff pre-activation > 0).
        """
        batch = cache[0].shape[0]
        g = np.asarray(output_grad, dtype=float).reshape(batch, -1)
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        delta = g
        for layer in range(len(self.weights) - 1, -1, -1):
            h_in = cache[layer]
            grads[2 * layer] = h_in.T @ delta
            grads[2 * layer + 1] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (h_in > 0.0)
        return grads

    def backward(self, x: np.ndarray, output_grad: np.ndarray) -> list[np.ndarray]:
        """Exact gradients of the forward map for a single input."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        _, cache = self._forward(x, want_cache=True)
        og = np.asarray(output_grad, dtype=float)
        if og.shape == (self.num_actions, self.num_quantiles):
            og = og[None, ...]
        return self.backward_from_cache(cache, og)

    def clone(self) -> "MlpNetwork":
        net = MlpNetwork.__new__(MlpNetwork)
        net.input_dim = self.input_dim
        net.num_actions = self.num_actions
        net.num_quantiles = self.num_quantiles
        net.hidden = self.hidden
        net.weights = [w.copy() for w in self.weights]
        net.biases = [b.copy() for b in self.biases]
        return net

    def copy_from(self, other: "MlpNetwork") -> None:
        for dst, src in zip(self.parameters(), other.parameters()):
            np.copyto(dst, src)


@dataclass
class AdamState:
    """Bias-corrected Adam moments, congruent with the parameter list."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    _scratch: list[np.ndarray] = field(default_factory=list, repr=False)

    @staticmethod
    def for_network(net: MlpNetwork, lr: float) -> "AdamState":
        params = net.parameters()
        return AdamState(
            lr=lr,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def optimizer_step(
    params: list[np.ndarray], grads: list[np.ndarray], state: AdamState
) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update, in place. Raises TrainingError on non-finite gradients.

    All elementwise work goes through per-parameter scratch buffers; the
    update is called a few hundred thousand times per training run, so
    avoiding temporaries matters.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise TrainingError("parameter/gradient/moment shapes are not congruent")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient")
    if len(state._scratch) != len(params):
        state._scratch = [np.empty_like(p) for p in params]
    state.step_count += 1
    b1c = 1.0 - state.beta1**state.step_count
    b2c = 1.0 - state.beta2**state.step_count
    for p, g, m, v, s in zip(params, grads, state.m, state.v, state._scratch):
        m *= state.beta1
        np.multiply(g, 1.0 - state.beta1, out=s)
        m += s
        v *= state.beta2
        np.multiply(g, g, out=s)
        s *= 1.0 - state.beta2
        v += s
        np.divide(v, b2c, out=s)
        np.sqrt(s, out=s)
        s += state.eps
        np.divide(m, s, out=s)
        s *= state.lr / b1c
        p -= s
    return params, state


def save_network(net: MlpNetwork, meta: dict, path: str) -> None:
    """Deterministic binary dump: magic, JSON header, raw little-endian float64."""
    header = {
        "input_dim": net.input_dim,
        "num_actions": net.num_actions,
        "num_quantiles": net.num_quantiles,
        "hidden": list(net.hidden),
        "meta": meta,
    }
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    buf.write(len(head).to_bytes(8, "little"))
    buf.write(head)
    for p in net.parameters():
        buf.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_network(path: str) -> tuple[MlpNetwork, dict]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a riskcross network checkpoint")
    off = len(CHECKPOINT_MAGIC)
    head_len = int.from_bytes(blob[off : off + 8], "little")
    off += 8
    header = json.loads(blob[off : off + head_len].decode("utf-8"))
    off += head_len
    net = MlpNetwork(
        input_dim=header["input_dim"],
        num_actions=header["num_actions"],
        num_quantiles=header["num_quantiles"],
        hidden=tuple(header["hidden"]),
    )
    for p in net.parameters():
        n = p.size * 8
        p[...] = np.frombuffer(blob[off : off + n], dtype="<f8").reshape(p.shape)
        off += n
    if off != len(blob):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return net, header["meta"]
