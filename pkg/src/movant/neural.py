"""Small dense networks with hand-written backprop and Adam.

Networks are fixed at two hidden ReLU layers. All parameters live in one flat
float64 vector so optimiser and target updates are single vector operations.
"""

import json
import struct

import numpy as np

from . import kernels


class Mlp:
    """in -> ReLU(hidden[0]) -> ReLU(hidden[1]) -> out, with tanh or identity head."""

    def __init__(self, n_in, n_out, hidden=(64, 64), head="identity", rng=None, theta=None):
        if head not in ("tanh", "identity"):
            raise ValueError(f"unknown head {head!r}")
        self.sizes = (int(n_in), int(hidden[0]), int(hidden[1]), int(n_out))
        self.head = head
        if theta is None:
            theta = np.zeros(self.n_params)
            if rng is not None:
                self._init_uniform(theta, rng)
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ValueError("parameter vector does not match layer sizes")
        self.theta = theta

    @property
    def n_params(self):
        n0, n1, n2, n3 = self.sizes
        return n0 * n1 + n1 + n1 * n2 + n2 + n2 * n3 + n3

    @property
    def tanh_head(self):
        return self.head == "tanh"

    def layer_slices(self):
        """(weight slice, weight shape, bias slice) per layer."""
        out = []
        o = 0
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            out.append((slice(o, o + a * b), (a, b), slice(o + a * b, o + a * b + b)))
            o += a * b + b
        return out

    def _init_uniform(self, theta, rng):
        # U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases
        for w, shape, b in self.layer_slices():
            bound = 1.0 / np.sqrt(shape[0])
            theta[w] = rng.uniform(-bound, bound, size=shape[0] * shape[1])
            theta[b] = rng.uniform(-bound, bound, size=shape[1])

    def same_shape(self, other):
        return self.sizes == other.sizes and self.head == other.head

    def copy(self):
        return Mlp(self.sizes[0], self.sizes[3], self.sizes[1:3], self.head, theta=self.theta.copy())

    def forward(self, x):
        """Output only; ``x`` may be one input vector or a batch (B, n_in)."""
        return self.forward_cache(x)[-1]

    def forward_cache(self, x):
        """Forward pass keeping what ``backward`` needs: (X, h1, h2, z, y)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        X = np.ascontiguousarray(x[None] if single else x)
        h1, h2, z = kernels.mlp_forward(self.theta, *self.sizes, X)
        y = np.tanh(z) if self.tanh_head else z
        return X, h1, h2, z, (y[0] if single else y)

    def backward(self, cache, grad_out, grad_pre=None):
        """Reverse-mode gradients for the batch in ``cache``.

        ``grad_pre`` optionally adds a gradient taken directly with respect to
        the pre-head output. Returns ``(param_grad, input_grad)`` with the
        parameter gradient summed over the batch.
        """
        X, h1, h2, z, y = cache
        g = np.asarray(grad_out, dtype=np.float64)
        single = y.ndim == 1
        G = g[None] if g.ndim == 1 else g
        if self.tanh_head:
            Y = y[None] if single else y
            G = G * (1.0 - Y * Y)
        if grad_pre is not None:
            G = G + grad_pre
        grad, gx = kernels.mlp_backward(self.theta, *self.sizes, X, h1, h2, np.ascontiguousarray(G))
        return grad, (gx[0] if single else gx)


def forward(net, x):
    return net.forward(x)


def backward(net, x, grad_out):
    return net.backward(net.forward_cache(x), grad_out)


class AdamState:
    def __init__(self, n_params, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.step = 0


def adam_step(state, params, grads):
    """Bias-corrected Adam update of ``params`` in place; returns ``params``."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("shape mismatch between parameters, gradients and Adam state")
    state.step += 1
    if state.lr == 0.0:
        return params
    kernels.adam_update(params, np.ascontiguousarray(grads, dtype=np.float64), state.m, state.v,
                        state.lr, state.beta1, state.beta2, state.eps, float(state.step))
    return params


def soft_update(target, online, tau):
    """target <- tau * online + (1 - tau) * target, in place."""
    if not target.same_shape(online):
        raise ValueError("soft_update between different architectures")
    if tau == 1.0:
        target.theta[:] = online.theta
    elif tau != 0.0:
        target.theta *= 1.0 - tau
        target.theta += tau * online.theta
    return target


# ---------------------------------------------------------------------------
# checkpoints: 8-byte little-endian header length, JSON header, raw <f8 payload

MAGIC = b"MOVANTCK"


def save_arrays(path, header, arrays):
    header = dict(header)
    header["arrays"] = [[name, int(a.size)] for name, a in arrays]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_arrays(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path} is not a movant checkpoint")
        (n,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(n))
        arrays = {}
        for name, size in header["arrays"]:
            arrays[name] = np.frombuffer(fh.read(8 * size), dtype="<f8").astype(np.float64)
    return header, arrays


def net_header(net):
    return {"sizes": list(net.sizes), "head": net.head}


def net_from(header, theta):
    n0, n1, n2, n3 = header["sizes"]
    return Mlp(n0, n3, (n1, n2), header["head"], theta=theta)
