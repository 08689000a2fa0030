"""Minimal fully connected networks with manual forward/backward passes,
an Adam optimizer, and the binary checkpoint container.

Everything is plain float64 numpy: training at desk scale does not need a
tensor framework, and the novelty module wants exact Jacobians.
"""

import json

import numpy as np
from scipy.special import expit

from .density import read_tensor, write_tensor
from .exceptions import NumericsError

ACTIVATIONS = ("relu", "tanh", "identity", "sigmoid")


def _activate(name, pre):
    if name == "relu":
        return np.maximum(pre, 0.0)
    if name == "tanh":
        return np.tanh(pre)
    if name == "sigmoid":
        return expit(pre)
    if name == "identity":
        return pre
    raise ValueError(f"unknown activation {name!r}")


def _activate_grad(name, pre):
    """Derivative of the activation, evaluated at the pre-activation."""
    if name == "relu":
        return (pre > 0.0).astype(np.float64)
    if name == "tanh":
        t = np.tanh(pre)
        return 1.0 - t * t
    if name == "sigmoid":
        s = expit(pre)
        return s * (1.0 - s)
    if name == "identity":
        return np.ones_like(pre)
    raise ValueError(f"unknown activation {name!r}")


class Mlp:
    """Stack of affine layers with elementwise activations.

    layers is a list of (weight, bias, activation) with weight shaped
    (fan_in, fan_out); batches are row-major (n, fan_in).
    """

    def __init__(self, layers):
        if not layers:
            raise ValueError("Mlp needs at least one layer")
        prev_out = None
        checked = []
        for weight, bias, activation in layers:
            weight = np.asarray(weight, dtype=np.float64)
            bias = np.asarray(bias, dtype=np.float64).ravel()
            if weight.ndim != 2 or bias.shape != (weight.shape[1],):
                raise ValueError("layer weight must be (fan_in, fan_out) with matching bias")
            if activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation {activation!r}")
            if prev_out is not None and weight.shape[0] != prev_out:
                raise ValueError(
                    f"layer input {weight.shape[0]} does not chain with previous output {prev_out}")
            prev_out = weight.shape[1]
            checked.append((weight, bias, activation))
        self.layers = checked

    @classmethod
    def create(cls, dims, activations, rng):
        """Glorot-uniform initialization for the given layer widths."""
        if len(dims) < 2 or len(activations) != len(dims) - 1:
            raise ValueError("need len(dims) >= 2 and one activation per layer")
        layers = []
        for fan_in, fan_out, activation in zip(dims[:-1], dims[1:], activations):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weight = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            layers.append((weight, np.zeros(fan_out), activation))
        return cls(layers)

    @property
    def input_dim(self):
        return self.layers[0][0].shape[0]

    @property
    def output_dim(self):
        return self.layers[-1][0].shape[1]

    @property
    def dims(self):
        return [self.input_dim] + [w.shape[1] for w, _, _ in self.layers]

    @property
    def activations(self):
        return [act for _, _, act in self.layers]

    def parameters(self):
        """Flat list [W0, b0, W1, b1, ...], live references."""
        params = []
        for weight, bias, _ in self.layers:
            params.append(weight)
            params.append(bias)
        return params

    def forward(self, batch):
        """Layer-by-layer affine + activation.

        Returns (outputs, cache); the cache keeps each layer's input and
        pre-activation for the backward pass.
        """
        a = np.asarray(batch, dtype=np.float64)
        if a.ndim == 1:
            a = a.reshape(1, -1)
        if a.shape[1] != self.input_dim:
            raise ValueError(f"batch has {a.shape[1]} columns, expected {self.input_dim}")
        cache = []
        for weight, bias, activation in self.layers:
            pre = a @ weight + bias
            cache.append((a, pre))
            a = _activate(activation, pre)
        return a, cache

    def backward(self, cache, output_grad):
        """Exact reverse-mode gradients of the cached forward pass.

        Returns (param_grads, input_grad); param_grads pairs up with
        parameters() as [dW0, db0, dW1, db1, ...].
        """
        g = np.asarray(output_grad, dtype=np.float64)
        if g.ndim == 1:
            g = g.reshape(1, -1)
        if len(cache) != len(self.layers):
            raise ValueError("cache does not match this network's layers")
        if g.shape != (cache[-1][1].shape[0], self.output_dim):
            raise ValueError("output_grad shape does not match the cached forward pass")
        grads = [None] * (2 * len(self.layers))
        for idx in range(len(self.layers) - 1, -1, -1):
            weight, _, activation = self.layers[idx]
            inputs, pre = cache[idx]
            if inputs.shape[1] != weight.shape[0]:
                raise ValueError("cache does not match this network's layers")
            g_pre = g * _activate_grad(activation, pre)
            grads[2 * idx] = inputs.T @ g_pre
            grads[2 * idx + 1] = g_pre.sum(axis=0)
            g = g_pre @ weight.T
        return grads, g

    def jacobian(self, x):
        """(output_dim, input_dim) Jacobian at a single input point.

        Propagates one tangent row per input dimension alongside the forward
        pass; exact reverse of what backward() would assemble row-by-row.
        """
        x = np.asarray(x, dtype=np.float64).ravel()
        if x.shape[0] != self.input_dim:
            raise ValueError(f"point has dim {x.shape[0]}, expected {self.input_dim}")
        a = x.reshape(1, -1)
        tangent = np.eye(self.input_dim)
        for weight, bias, activation in self.layers:
            pre = a @ weight + bias
            if not np.all(np.isfinite(pre)):
                raise NumericsError("non-finite activations while assembling the Jacobian")
            tangent = (tangent @ weight) * _activate_grad(activation, pre)
            a = _activate(activation, pre)
        return tangent.T


class AdamState:
    """First/second-moment accumulators plus step count for a parameter list."""

    def __init__(self, params, learning_rate=2e-4, beta1=0.5, beta2=0.999,
                 epsilon=1e-8):
        if not 0.0 < beta1 < 1.0 or not 0.0 < beta2 < 1.0:
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if learning_rate <= 0.0 or epsilon <= 0.0:
            raise ValueError("learning_rate and epsilon must be positive")
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.step_count = 0
        self.first_moment = [np.zeros_like(p) for p in params]
        self.second_moment = [np.zeros_like(p) for p in params]


def adam_step(params, grads, state):
    """One bias-corrected Adam update, applied to params in place.

    Raises NumericsError on non-finite gradients so training surfaces the
    failure as a diagnostic rather than silently corrupting parameters.
    """
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ValueError("params, grads, and state must have matching lengths")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericsError("non-finite gradient passed to the optimizer")
    state.step_count += 1
    bc1 = 1.0 - state.beta1 ** state.step_count
    bc2 = 1.0 - state.beta2 ** state.step_count
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return params, state


class Autoencoder:
    """Encoder/decoder pair; latent dimension is the encoder output width."""

    def __init__(self, encoder, decoder):
        if encoder.output_dim != decoder.input_dim:
            raise ValueError("encoder output width must match decoder input width")
        if encoder.input_dim != decoder.output_dim:
            raise ValueError("decoder must map back to the data dimension")
        self.encoder = encoder
        self.decoder = decoder

    @property
    def data_dim(self):
        return self.encoder.input_dim

    @property
    def latent_dim(self):
        return self.encoder.output_dim

    def encode(self, batch):
        out, _ = self.encoder.forward(batch)
        return out

    def decode(self, batch):
        out, _ = self.decoder.forward(batch)
        return out

    def reconstruct(self, batch):
        return self.decode(self.encode(batch))


def save_checkpoint(path, model, metadata=None):
    """Write a model checkpoint: JSON header line describing layer shapes and
    activations, then one binary tensor block per parameter, plus a plain-text
    ``<path>.meta`` sidecar with the given metadata."""
    header = {
        "encoder": {"dims": model.encoder.dims, "activations": model.encoder.activations},
        "decoder": {"dims": model.decoder.dims, "activations": model.decoder.activations},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        for param in model.encoder.parameters() + model.decoder.parameters():
            write_tensor(fh, param.reshape(1, -1) if param.ndim == 1 else param)
    meta = {"data_dim": model.data_dim, "latent_dim": model.latent_dim,
            "encoder_activations": ",".join(model.encoder.activations),
            "decoder_activations": ",".join(model.decoder.activations)}
    if metadata:
        meta.update(metadata)
    with open(str(path) + ".meta", "w", encoding="utf-8") as fh:
        for key, value in meta.items():
            fh.write(f"{key} = {value}\n")


def _read_net(fh, spec):
    layers = []
    dims, activations = spec["dims"], spec["activations"]
    for fan_in, fan_out, activation in zip(dims[:-1], dims[1:], activations):
        weight = read_tensor(fh)
        bias = read_tensor(fh).ravel()
        if weight.shape != (fan_in, fan_out) or bias.shape != (fan_out,):
            raise ValueError("checkpoint tensor shapes do not match the header")
        layers.append((weight, bias, activation))
    return Mlp(layers)


def load_checkpoint(path):
    """Read a checkpoint written by save_checkpoint.

    Returns (model, metadata) where metadata is the sidecar parsed into a
    string-valued dict (empty when the sidecar is missing).
    """
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        encoder = _read_net(fh, header["encoder"])
        decoder = _read_net(fh, header["decoder"])
    model = Autoencoder(encoder, decoder)
    metadata = {}
    try:
        with open(str(path) + ".meta", "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#") or "=" not in line:
                    continue
                key, value = line.split("=", 1)
                metadata[key.strip()] = value.strip()
    except FileNotFoundError:
        pass
    return model, metadata
