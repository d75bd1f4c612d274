"""Highway network with shared inner weights and p-norm coupled gates.

Layer 1 is an ordinary dense layer. Layers 2..T reuse one candidate
transform ``(W, b)`` and one gate transform ``(U1, c1)``::

    cand_t = g(W h_{t-1} + b)
    a1_t   = sigmoid(U1 h_{t-1} + c1)
    a2_t   = (1 - a1_t**p) ** (1/p)
    h_t    = a1_t * cand_t + a2_t * h_{t-1}

and a softmax head reads ``h_T``. Activations are stored column-wise,
``(width, batch)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .gates import PNorm, sigmoid, sigmoid_grad
from .numeric import DimensionError, Matrix, Rng, init_weights

PARAM_NAMES = ("W_in", "b_in", "W", "b", "U1", "c1", "W_out", "b_out")

HighwayGrads = dict  # name -> Matrix, same keys as PARAM_NAMES


class TraceMismatchError(ValueError):
    pass


ACTIVATIONS = {
    "tanh": (np.tanh, lambda y: 1.0 - y * y),
    "relu": (lambda z: np.maximum(z, 0.0), lambda y: (y > 0).astype(np.float64)),
    # test hook: g(z) = z
    "identity": (lambda z: z, lambda y: np.ones_like(y)),
}


@dataclass
class HighwayParams:
    W_in: Matrix
    b_in: Matrix
    W: Matrix
    b: Matrix
    U1: Matrix
    c1: Matrix
    W_out: Matrix
    b_out: Matrix
    layers: int
    pn: PNorm
    activation: str = "tanh"

    def __post_init__(self):
        if self.layers < 2:
            raise ValueError("a highway network needs at least 2 layers")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        k, d = self.W_in.shape
        expected = {
            "b_in": (k, 1), "W": (k, k), "b": (k, 1), "U1": (k, k), "c1": (k, 1),
            "W_out": (self.W_out.shape[0], k), "b_out": (self.W_out.shape[0], 1),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionError(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def input_dim(self) -> int:
        return self.W_in.shape[1]

    @property
    def hidden(self) -> int:
        return self.W_in.shape[0]

    @property
    def n_classes(self) -> int:
        return self.W_out.shape[0]

    def arrays(self) -> dict[str, Matrix]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "HighwayParams":
        return replace(self, **{n: a.copy() for n, a in self.arrays().items()})

    def with_arrays(self, arrays: dict[str, Matrix]) -> "HighwayParams":
        return replace(self, **arrays)


def init_highway(input_dim: int, hidden: int, n_classes: int, layers: int, p: float,
                 rng: Rng, activation: str = "tanh", gate_bias: float = -1.0
                 ) -> HighwayParams:
    """Glorot-uniform weights, zero biases, and gate bias ``gate_bias``.

    A negative gate bias starts the stack close to pure carry.
    """
    return HighwayParams(
        W_in=init_weights(hidden, input_dim, rng),
        b_in=init_weights(hidden, 1, scheme="zeros"),
        W=init_weights(hidden, hidden, rng),
        b=init_weights(hidden, 1, scheme="zeros"),
        U1=init_weights(hidden, hidden, rng),
        c1=init_weights(hidden, 1, scheme="constant", constant=gate_bias),
        W_out=init_weights(n_classes, hidden, rng),
        b_out=init_weights(n_classes, 1, scheme="zeros"),
        layers=layers,
        pn=PNorm(p),
        activation=activation,
    )


@dataclass
class ForwardTrace:
    x: Matrix
    hs: list = field(default_factory=list)      # h_1 .. h_T
    cands: list = field(default_factory=list)   # cand_2 .. cand_T
    a1s: list = field(default_factory=list)
    a2s: list = field(default_factory=list)
    logits: Matrix | None = None
    log_probs: Matrix | None = None
    forced_a1: bool = False
    forced_a2: bool = False
    shapes: tuple = ()

    @property
    def probs(self) -> Matrix:
        return np.exp(self.log_probs)


def log_softmax(z: Matrix) -> Matrix:
    z = z - z.max(axis=0, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=0, keepdims=True))


def forward(params: HighwayParams, x: Matrix, *, force_a1: float | None = None,
            force_a2: float | None = None) -> ForwardTrace:
    """Run the stack on ``x`` of shape ``(input_dim, batch)``.

    ``force_a1`` / ``force_a2`` pin a gate to a constant (test hooks); a
    pinned gate passes no gradient.
    """
    if x.ndim != 2 or x.shape[0] != params.input_dim:
        raise DimensionError(
            f"input has shape {x.shape}, expected ({params.input_dim}, batch)")
    g, _ = ACTIVATIONS[params.activation]
    pn = params.pn
    tr = ForwardTrace(x=x, forced_a1=force_a1 is not None, forced_a2=force_a2 is not None,
                      shapes=tuple(a.shape for a in params.arrays().values()))
    h = g(params.W_in @ x + params.b_in)
    tr.hs.append(h)
    for _ in range(2, params.layers + 1):
        cand = g(params.W @ h + params.b)
        if force_a1 is None:
            a1 = sigmoid(params.U1 @ h + params.c1)
        else:
            a1 = np.full_like(h, force_a1)
        a2 = pn.complement(a1) if force_a2 is None else np.full_like(h, force_a2)
        h = a1 * cand + a2 * h
        tr.cands.append(cand)
        tr.a1s.append(a1)
        tr.a2s.append(a2)
        tr.hs.append(h)
    tr.logits = params.W_out @ h + params.b_out
    tr.log_probs = log_softmax(tr.logits)
    return tr


def nll(trace: ForwardTrace, targets) -> float:
    """Mean negative log-likelihood (nats) of ``targets`` under the trace."""
    targets = np.asarray(targets, dtype=np.intp)
    return float(-trace.log_probs[targets, np.arange(targets.size)].mean())


def predict(params: HighwayParams, x: Matrix) -> np.ndarray:
    return np.argmax(forward(params, x).logits, axis=0)


def backward(params: HighwayParams, trace: ForwardTrace, targets) -> HighwayGrads:
    """Gradients of the mean NLL with respect to every parameter array."""
    if trace.shapes != tuple(a.shape for a in params.arrays().values()) \
            or len(trace.hs) != params.layers:
        raise TraceMismatchError("trace was not produced by these parameters")
    targets = np.asarray(targets, dtype=np.intp)
    batch = trace.x.shape[1]
    if targets.shape != (batch,):
        raise DimensionError(f"expected {batch} targets, got shape {targets.shape}")
    _, g_grad = ACTIVATIONS[params.activation]
    pn = params.pn

    dlogits = trace.probs
    dlogits[targets, np.arange(batch)] -= 1.0
    dlogits /= batch
    h_top = trace.hs[-1]
    grads = {
        "W_out": dlogits @ h_top.T,
        "b_out": dlogits.sum(axis=1, keepdims=True),
        "W": np.zeros_like(params.W),
        "b": np.zeros_like(params.b),
        "U1": np.zeros_like(params.U1),
        "c1": np.zeros_like(params.c1),
    }
    dh = params.W_out.T @ dlogits
    for t in range(params.layers - 1, 0, -1):
        h_prev = trace.hs[t - 1]
        cand, a1, a2 = trace.cands[t - 1], trace.a1s[t - 1], trace.a2s[t - 1]
        dcand = dh * a1 * g_grad(cand)
        grads["W"] += dcand @ h_prev.T
        grads["b"] += dcand.sum(axis=1, keepdims=True)
        dh_prev = dh * a2 + params.W.T @ dcand
        if not trace.forced_a1:
            da1 = dh * cand
            if not trace.forced_a2:
                # a2 depends on a1 through the p-norm relation
                da1 += dh * h_prev * pn.complement_grad(a1, a2)
            dgate = da1 * sigmoid_grad(a1)
            grads["U1"] += dgate @ h_prev.T
            grads["c1"] += dgate.sum(axis=1, keepdims=True)
            dh_prev += params.U1.T @ dgate
        dh = dh_prev
    dpre = dh * g_grad(trace.hs[0])
    grads["W_in"] = dpre @ trace.x.T
    grads["b_in"] = dpre.sum(axis=1, keepdims=True)
    return {name: grads[name] for name in PARAM_NAMES}


def loss_and_grads(params: HighwayParams, x: Matrix, targets):
    tr = forward(params, x)
    return nll(tr, targets), backward(params, tr, targets), tr


def gate_matrices(params: HighwayParams, x_row) -> tuple[Matrix, Matrix]:
    """Gate activations for one sample as two ``(layers - 1, hidden)`` matrices."""
    x = np.asarray(x_row, dtype=np.float64).reshape(-1, 1)
    tr = forward(params, x)
    return np.hstack(tr.a1s).T, np.hstack(tr.a2s).T
