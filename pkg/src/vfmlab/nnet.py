"""Minimal fully connected feed-forward network.

Scalar-output ReLU network with analytic reverse-mode gradients with
respect to both parameters and inputs. The hybrid models embed this
network inside a physics pipeline, so gradients must compose by chain
rule; everything here is plain numpy with no hidden state.

Parameters live either structured (per-layer weight matrices and bias
vectors) or as one flat vector with a stable layout (W1, b1, W2, b2,
...; matrices row-major). Flatten and unflatten are exact inverses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import stream_rng

# RNG stream coordinates under an init seed.
STREAM_NET_INIT = (2, 0)


@dataclass(frozen=True)
class NetSpec:
    """Architecture: layer widths from input to output, plus init seed.

    Hidden layers use ReLU; the output layer is identity and must have
    width one.
    """

    layer_sizes: tuple[int, ...]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(w) for w in self.layer_sizes))
        if len(self.layer_sizes) < 3:
            raise ValueError("need at least input, one hidden and output layer, "
                             f"got {self.layer_sizes}")
        if any(w < 1 for w in self.layer_sizes):
            raise ValueError(f"all layer widths must be at least 1, got {self.layer_sizes}")
        if self.layer_sizes[-1] != 1:
            raise ValueError(f"output width must be 1, got {self.layer_sizes[-1]}")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(len(sizes) - 1))


@dataclass(frozen=True, eq=False)
class NetParams:
    """Per-layer weights and biases; W_l has shape (width_out, width_in)."""

    spec: NetSpec
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        sizes = self.spec.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("layer count mismatch with spec")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
                raise ValueError(f"layer {i} shapes {w.shape}/{b.shape} do not "
                                 f"match spec widths {sizes[i]}->{sizes[i + 1]}")
            w.setflags(write=False)
            b.setflags(write=False)


def init(spec: NetSpec) -> NetParams:
    """Scaled-uniform fan initialization; biases zero; seed-deterministic.

    Weights of each layer are drawn from U(-a, a) with
    a = sqrt(6 / (fan_in + fan_out)).
    """
    rng = stream_rng(spec.seed, *STREAM_NET_INIT)
    sizes = spec.layer_sizes
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-bound, bound, (n_out, n_in)))
        biases.append(np.zeros(n_out))
    return NetParams(spec, tuple(weights), tuple(biases))


def flatten(params: NetParams) -> np.ndarray:
    """Stable flat layout: W1 row-major, b1, W2, b2, ..."""
    chunks = []
    for w, b in zip(params.weights, params.biases):
        chunks.append(w.ravel())
        chunks.append(b)
    return np.concatenate(chunks)


def unflatten(spec: NetSpec, flat: np.ndarray) -> NetParams:
    """Inverse of flatten; rejects wrongly sized vectors."""
    flat = np.asarray(flat, dtype=float)
    if flat.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} parameters, got {flat.shape}")
    sizes = spec.layer_sizes
    weights, biases = [], []
    pos = 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        weights.append(flat[pos:pos + n_out * n_in].reshape(n_out, n_in).copy())
        pos += n_out * n_in
        biases.append(flat[pos:pos + n_out].copy())
        pos += n_out
    return NetParams(spec, tuple(weights), tuple(biases))


@dataclass(frozen=True, eq=False)
class ForwardCache:
    """Activations saved by forward_cached for reuse in backprop."""

    inputs: np.ndarray
    activations: tuple[np.ndarray, ...]
    masks: tuple[np.ndarray, ...]
    out: np.ndarray


def _as_batch(spec: NetSpec, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != spec.n_inputs:
        raise ValueError(f"input must have {spec.n_inputs} features, got shape {x.shape}")
    return batch, single


def forward_cached(params: NetParams, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Batched forward pass keeping activations for backprop."""
    batch, _ = _as_batch(params.spec, x)
    a = batch
    activations, masks = [], []
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        z = a @ w.T + b
        mask = z > 0.0
        a = np.where(mask, z, 0.0)
        activations.append(a)
        masks.append(mask)
    out = (a @ params.weights[-1].T + params.biases[-1])[:, 0]
    return out, ForwardCache(batch, tuple(activations), tuple(masks), out)


def forward(params: NetParams, x) -> float | np.ndarray:
    """Network output for one input vector or an (n, d) batch."""
    batch, single = _as_batch(params.spec, x)
    out, _ = forward_cached(params, batch)
    return float(out[0]) if single else out


def backprop(params: NetParams, cache: ForwardCache,
             weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reverse-mode pass with per-sample output cotangents.

    Returns (g, dx) where g = sum_i weights[i] * d out_i / d params as a
    flat vector and dx[i] = weights[i] * d out_i / d x_i. One call costs
    a handful of matrix products regardless of batch size, which is what
    makes minibatch training affordable.
    """
    w_arrs, b_arrs = params.weights, params.biases
    n_layers = len(w_arrs)
    grads_w = [None] * n_layers
    grads_b = [None] * n_layers
    delta = np.asarray(weights, dtype=float)[:, None]
    for layer in range(n_layers - 1, -1, -1):
        a_prev = cache.inputs if layer == 0 else cache.activations[layer - 1]
        grads_w[layer] = delta.T @ a_prev
        grads_b[layer] = delta.sum(axis=0)
        delta = delta @ w_arrs[layer]
        if layer > 0:
            delta = delta * cache.masks[layer - 1]
    flat = np.concatenate([np.concatenate([gw.ravel(), gb])
                           for gw, gb in zip(grads_w, grads_b)])
    return flat, delta


def gradients(params: NetParams, x) -> tuple[np.ndarray, np.ndarray]:
    """(d out/d params flat, d out/d x) for a single input vector."""
    batch, single = _as_batch(params.spec, x)
    if not single:
        raise ValueError("gradients expects a single input vector")
    _, cache = forward_cached(params, batch)
    flat, dx = backprop(params, cache, np.ones(1))
    return flat, dx[0]
