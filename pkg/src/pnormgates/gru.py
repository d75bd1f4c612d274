"""Character-level GRU whose forget gate is the p-norm complement of the update gate.

Inputs are one-hot characters fed straight into the cell (no embedding
table), so every input matrix is ``hidden x vocab``. One step::

    r    = sigmoid(W_r x + U_r h + b_r)
    cand = tanh(W_h x + U_h (r * h) + b_h)
    a1   = sigmoid(W_a x + U_a h + b_a)
    a2   = (1 - a1**p) ** (1/p)
    h'   = a1 * cand + a2 * h

Sequences in a minibatch may differ in length; positions past the end of a
sequence are masked out of the loss instead of padded into it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .gates import PNorm, sigmoid, sigmoid_grad
from .highway import TraceMismatchError
from .numeric import DimensionError, Matrix, Rng, init_weights

PARAM_NAMES = ("W_r", "U_r", "b_r", "W_h", "U_h", "b_h", "W_a", "U_a", "b_a",
               "W_out", "b_out")

GruGrads = dict


class SequenceDataError(ValueError):
    pass


@dataclass
class GruParams:
    W_r: Matrix
    U_r: Matrix
    b_r: Matrix
    W_h: Matrix
    U_h: Matrix
    b_h: Matrix
    W_a: Matrix
    U_a: Matrix
    b_a: Matrix
    W_out: Matrix
    b_out: Matrix
    pn: PNorm

    def __post_init__(self):
        k, v = self.W_r.shape
        want = {"W_h": (k, v), "W_a": (k, v), "U_r": (k, k), "U_h": (k, k), "U_a": (k, k),
                "b_r": (k, 1), "b_h": (k, 1), "b_a": (k, 1), "W_out": (v, k), "b_out": (v, 1)}
        for name, shape in want.items():
            if getattr(self, name).shape != shape:
                raise DimensionError(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def hidden(self) -> int:
        return self.W_r.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.W_r.shape[1]

    def arrays(self) -> dict[str, Matrix]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "GruParams":
        return replace(self, **{n: a.copy() for n, a in self.arrays().items()})

    def with_arrays(self, arrays: dict[str, Matrix]) -> "GruParams":
        return replace(self, **arrays)


def init_gru(vocab_size: int, hidden: int, p: float, rng: Rng,
             gate_bias: float = 0.0) -> GruParams:
    def w(rows, cols):
        return init_weights(rows, cols, rng)

    def zeros(rows):
        return init_weights(rows, 1, scheme="zeros")

    return GruParams(
        W_r=w(hidden, vocab_size), U_r=w(hidden, hidden), b_r=zeros(hidden),
        W_h=w(hidden, vocab_size), U_h=w(hidden, hidden), b_h=zeros(hidden),
        W_a=w(hidden, vocab_size), U_a=w(hidden, hidden),
        b_a=init_weights(hidden, 1, scheme="constant", constant=gate_bias),
        W_out=w(vocab_size, hidden), b_out=zeros(vocab_size),
        pn=PNorm(p),
    )


@dataclass
class StepTrace:
    r: Matrix
    cand: Matrix
    a1: Matrix
    a2: Matrix


def one_hot(indices, size: int) -> Matrix:
    indices = np.atleast_1d(np.asarray(indices, dtype=np.intp))
    if indices.size and (indices.min() < 0 or indices.max() >= size):
        raise SequenceDataError(f"character index outside vocabulary of size {size}")
    out = np.zeros((size, indices.size))
    out[indices, np.arange(indices.size)] = 1.0
    return out


def step(params: GruParams, x_t, h_prev: Matrix, *, force_a1: float | None = None,
         force_r: float | None = None) -> tuple[Matrix, StepTrace]:
    """Advance the cell one character.

    ``x_t`` is an index (or array of indices, one per column) or an already
    one-hot ``(vocab, batch)`` matrix. ``force_a1`` / ``force_r`` pin a gate
    (test hooks).
    """
    x = np.asarray(x_t)
    if x.ndim < 2:
        x = one_hot(x, params.vocab_size)
    if x.shape[0] != params.vocab_size:
        raise DimensionError(f"input has {x.shape[0]} rows, vocabulary is {params.vocab_size}")
    if h_prev.shape != (params.hidden, x.shape[1]):
        raise DimensionError(
            f"h_prev has shape {h_prev.shape}, expected ({params.hidden}, {x.shape[1]})")
    if force_r is None:
        r = sigmoid(params.W_r @ x + params.U_r @ h_prev + params.b_r)
    else:
        r = np.full_like(h_prev, force_r)
    cand = np.tanh(params.W_h @ x + params.U_h @ (r * h_prev) + params.b_h)
    if force_a1 is None:
        a1 = sigmoid(params.W_a @ x + params.U_a @ h_prev + params.b_a)
    else:
        a1 = np.full_like(h_prev, force_a1)
    a2 = params.pn.complement(a1)
    return a1 * cand + a2 * h_prev, StepTrace(r, cand, a1, a2)


@dataclass
class SequenceTrace:
    inputs: np.ndarray        # (steps, batch) character fed at each step
    targets: np.ndarray       # (steps, batch) character to predict
    mask: np.ndarray          # (steps, batch) True where the target counts
    hs: list                  # h_0 .. h_steps, each (hidden, batch)
    rs: list
    cands: list
    a1s: list
    a2s: list
    log_probs: np.ndarray     # (steps, vocab, batch)
    loss: float               # mean NLL per counted position, nats
    shapes: tuple = ()

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def total_nats(self) -> float:
        return self.loss * self.count

    def step_nll(self) -> np.ndarray:
        """Per-step NLL of each column (zero where masked)."""
        steps, batch = self.targets.shape
        lp = self.log_probs[np.arange(steps)[:, None], self.targets, np.arange(batch)[None, :]]
        return np.where(self.mask, -lp, 0.0)


def _pack(seqs, vocab_size: int, last_only: bool):
    seqs = [np.asarray(s, dtype=np.intp) for s in seqs]
    if not seqs:
        raise SequenceDataError("empty batch")
    lengths = np.array([len(s) for s in seqs])
    if lengths.min() < 2:
        raise SequenceDataError("every sequence needs at least 2 characters")
    for s in seqs:
        if s.min() < 0 or s.max() >= vocab_size:
            raise SequenceDataError(f"character index outside vocabulary of size {vocab_size}")
    steps = int(lengths.max()) - 1
    chars = np.zeros((steps + 1, len(seqs)), dtype=np.intp)
    for j, s in enumerate(seqs):
        chars[:len(s), j] = s
    pos = np.arange(steps)[:, None]
    if last_only:
        mask = pos == (lengths - 2)[None, :]
    else:
        mask = pos < (lengths - 1)[None, :]
    return chars[:-1], chars[1:], mask


def forward_batch(params: GruParams, seqs, *, last_only: bool = False) -> SequenceTrace:
    """Teacher-forced unroll of several sequences at once from ``h_0 = 0``.

    The loss is the mean NLL over all counted positions; ``last_only``
    counts only the final prediction of each sequence.
    """
    inputs, targets, mask = _pack(seqs, params.vocab_size, last_only)
    steps, batch = inputs.shape
    k = params.hidden
    pn = params.pn
    # input projections for every step in one gather
    w_x = np.vstack([params.W_r, params.W_h, params.W_a])[:, inputs.T.ravel()]
    w_x = w_x.reshape(3 * k, batch, steps)
    b_r, b_h, b_a = params.b_r, params.b_h, params.b_a
    u_ra = np.vstack([params.U_r, params.U_a])
    h = np.zeros((k, batch))
    hs, rs, cands, a1s, a2s = [h], [], [], [], []
    for t in range(steps):
        xp = w_x[:, :, t]
        uh = u_ra @ h
        r = sigmoid(xp[:k] + uh[:k] + b_r)
        cand = np.tanh(xp[k:2 * k] + params.U_h @ (r * h) + b_h)
        a1 = sigmoid(xp[2 * k:] + uh[k:] + b_a)
        a2 = pn.complement(a1)
        h = a1 * cand + a2 * h
        hs.append(h)
        rs.append(r)
        cands.append(cand)
        a1s.append(a1)
        a2s.append(a2)
    h_all = np.stack(hs[1:])                                  # (steps, k, batch)
    logits = np.einsum("vk,tkb->tvb", params.W_out, h_all) + params.b_out[None]
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    picked = log_probs[np.arange(steps)[:, None], targets, np.arange(batch)[None, :]]
    count = int(mask.sum())
    loss = float(-(picked * mask).sum() / count)
    return SequenceTrace(inputs, targets, mask, hs, rs, cands, a1s, a2s, log_probs, loss,
                         shapes=tuple(a.shape for a in params.arrays().values()))


def forward_sequence(params: GruParams, chars) -> tuple[SequenceTrace, float]:
    """Single-sequence unroll; returns the trace and its mean NLL in nats."""
    trace = forward_batch(params, [chars])
    return trace, trace.loss


def backward_batch(params: GruParams, trace: SequenceTrace) -> GruGrads:
    """Full backpropagation through time for the mean NLL of ``trace``."""
    if trace.shapes != tuple(a.shape for a in params.arrays().values()):
        raise TraceMismatchError("trace was not produced by these parameters")
    steps, batch = trace.inputs.shape
    k, vocab = params.hidden, params.vocab_size
    pn = params.pn

    dlogits = np.exp(trace.log_probs)
    dlogits[np.arange(steps)[:, None], trace.targets, np.arange(batch)[None, :]] -= 1.0
    dlogits *= trace.mask[:, None, :] / trace.count
    h_all = np.stack(trace.hs[1:])
    grads = {
        "W_out": np.einsum("tvb,tkb->vk", dlogits, h_all),
        "b_out": dlogits.sum(axis=(0, 2))[:, None],
    }
    dh_out = np.einsum("vk,tvb->tkb", params.W_out, dlogits)

    dz_r = np.empty((steps, k, batch))
    dz_h = np.empty((steps, k, batch))
    dz_a = np.empty((steps, k, batch))
    rh = np.empty((steps, k, batch))
    dh = np.zeros((k, batch))
    for t in range(steps - 1, -1, -1):
        dh = dh + dh_out[t]
        h_prev = trace.hs[t]
        r, cand, a1, a2 = trace.rs[t], trace.cands[t], trace.a1s[t], trace.a2s[t]
        dzh = dh * a1 * (1.0 - cand * cand)
        da1 = dh * (cand + h_prev * pn.complement_grad(a1, a2))
        dza = da1 * sigmoid_grad(a1)
        drh = params.U_h.T @ dzh
        dzr = drh * h_prev * sigmoid_grad(r)
        dz_r[t], dz_h[t], dz_a[t] = dzr, dzh, dza
        rh[t] = r * h_prev
        dh = dh * a2 + drh * r + params.U_r.T @ dzr + params.U_a.T @ dza

    h_prev_all = np.stack(trace.hs[:-1])
    x_cols = trace.inputs.ravel()
    for gate, dz in (("r", dz_r), ("h", dz_h), ("a", dz_a)):
        flat = dz.transpose(1, 0, 2).reshape(k, -1)          # (k, steps*batch)
        dw = np.zeros((vocab, k))
        np.add.at(dw, x_cols, flat.T)
        grads[f"W_{gate}"] = dw.T
        grads[f"b_{gate}"] = flat.sum(axis=1, keepdims=True)
        src = rh if gate == "h" else h_prev_all
        grads[f"U_{gate}"] = np.einsum("tib,tjb->ij", dz, src)
    return {name: grads[name] for name in PARAM_NAMES}


def backward_sequence(params: GruParams, trace: SequenceTrace, chars=None) -> GruGrads:
    if chars is not None:
        chars = np.asarray(chars, dtype=np.intp)
        if trace.inputs.shape[1] != 1 or not (
                np.array_equal(trace.inputs[:, 0], chars[:-1])
                and np.array_equal(trace.targets[:, 0], chars[1:])):
            raise TraceMismatchError("trace does not belong to this character sequence")
    return backward_batch(params, trace)


def loss_and_grads(params: GruParams, seqs, *, last_only: bool = False):
    trace = forward_batch(params, seqs, last_only=last_only)
    return trace.loss, backward_batch(params, trace), trace


def corpus_nats(params: GruParams, sequences, batch: int = 64) -> tuple[float, int]:
    """Total NLL (nats) and number of predicted positions over ``sequences``."""
    total, count = 0.0, 0
    seqs = list(sequences)
    for start in range(0, len(seqs), batch):
        tr = forward_batch(params, seqs[start:start + batch])
        total += tr.total_nats
        count += tr.count
    return total, count


def bits_per_character(params: GruParams, corpus, batch: int = 64) -> float:
    """Mean ``-log2 P(next char | prefix)`` over every predicted position."""
    sequences = getattr(corpus, "sequences", corpus)
    if len(sequences) == 0:
        raise SequenceDataError("cannot score an empty corpus")
    total, count = corpus_nats(params, sequences, batch)
    return total / count / math.log(2.0)


def predict_last(params: GruParams, seqs) -> np.ndarray:
    """Most likely final character of each sequence given all but the last."""
    tr = forward_batch(params, seqs, last_only=True)
    pos = np.argmax(tr.mask, axis=0)
    return np.argmax(tr.log_probs[pos, :, np.arange(tr.mask.shape[1])], axis=1)
