"""Independent reference models for cross-checking the package.

Written per sample with explicit loops and the plain convex gate
``a2 = 1 - a1``; nothing here imports the package's math.
"""
import math

import numpy as np


def _sig(z):
    return 1.0 / (1.0 + np.exp(-z))


def highway_convex(arrays, layers, x, targets):
    """Forward activations, mean NLL and gradients of a convex-gated highway net.

    ``arrays`` maps parameter names to arrays; ``x`` is ``(d, batch)``.
    """
    W_in, b_in = arrays["W_in"], arrays["b_in"][:, 0]
    W, b = arrays["W"], arrays["b"][:, 0]
    U1, c1 = arrays["U1"], arrays["c1"][:, 0]
    W_out, b_out = arrays["W_out"], arrays["b_out"][:, 0]
    grads = {k: np.zeros_like(v) for k, v in arrays.items()}
    batch = x.shape[1]
    loss = 0.0
    acts = []
    for j in range(batch):
        xj = x[:, j]
        hs = [np.tanh(W_in @ xj + b_in)]
        cands, gates = [], []
        for _ in range(layers - 1):
            prev = hs[-1]
            cand = np.tanh(W @ prev + b)
            gate = _sig(U1 @ prev + c1)
            hs.append(gate * cand + (1.0 - gate) * prev)
            cands.append(cand)
            gates.append(gate)
        logits = W_out @ hs[-1] + b_out
        m = logits.max()
        logz = m + math.log(np.exp(logits - m).sum())
        loss += (logz - logits[targets[j]]) / batch
        acts.append((hs, cands, gates))

        dlog = np.exp(logits - logz)
        dlog[targets[j]] -= 1.0
        dlog /= batch
        grads["W_out"] += np.outer(dlog, hs[-1])
        grads["b_out"][:, 0] += dlog
        dh = W_out.T @ dlog
        for t in range(layers - 2, -1, -1):
            prev, cand, gate = hs[t], cands[t], gates[t]
            d_cand_pre = dh * gate * (1 - cand ** 2)
            d_gate_pre = dh * (cand - prev) * gate * (1 - gate)
            grads["W"] += np.outer(d_cand_pre, prev)
            grads["b"][:, 0] += d_cand_pre
            grads["U1"] += np.outer(d_gate_pre, prev)
            grads["c1"][:, 0] += d_gate_pre
            dh = dh * (1 - gate) + W.T @ d_cand_pre + U1.T @ d_gate_pre
        d_in = dh * (1 - hs[0] ** 2)
        grads["W_in"] += np.outer(d_in, xj)
        grads["b_in"][:, 0] += d_in
    return loss, grads, acts


def gru_convex(arrays, chars):
    """Mean NLL, per-step states and BPTT gradients of a convex-gated GRU on one sequence."""
    A = {k: v for k, v in arrays.items()}
    V = A["W_r"].shape[1]
    k = A["W_r"].shape[0]
    h = np.zeros(k)
    cache = []
    loss = 0.0
    n = len(chars) - 1
    for t in range(n):
        x = np.zeros(V)
        x[chars[t]] = 1.0
        r = _sig(A["W_r"] @ x + A["U_r"] @ h + A["b_r"][:, 0])
        cand = np.tanh(A["W_h"] @ x + A["U_h"] @ (r * h) + A["b_h"][:, 0])
        z = _sig(A["W_a"] @ x + A["U_a"] @ h + A["b_a"][:, 0])
        h_new = (1 - z) * h + z * cand
        logits = A["W_out"] @ h_new + A["b_out"][:, 0]
        p = np.exp(logits - logits.max())
        p /= p.sum()
        loss -= math.log(p[chars[t + 1]]) / n
        cache.append((x, h, r, cand, z, h_new, p))
        h = h_new

    G = {key: np.zeros_like(v) for key, v in A.items()}
    dh_next = np.zeros(k)
    for t in range(n - 1, -1, -1):
        x, h_prev, r, cand, z, h_new, p = cache[t]
        dlog = p.copy()
        dlog[chars[t + 1]] -= 1
        dlog /= n
        G["W_out"] += np.outer(dlog, h_new)
        G["b_out"][:, 0] += dlog
        dh = A["W_out"].T @ dlog + dh_next
        dz = dh * (cand - h_prev) * z * (1 - z)
        dc = dh * z * (1 - cand ** 2)
        G["W_a"] += np.outer(dz, x)
        G["U_a"] += np.outer(dz, h_prev)
        G["b_a"][:, 0] += dz
        G["W_h"] += np.outer(dc, x)
        G["U_h"] += np.outer(dc, r * h_prev)
        G["b_h"][:, 0] += dc
        d_rh = A["U_h"].T @ dc
        dr = d_rh * h_prev * r * (1 - r)
        G["W_r"] += np.outer(dr, x)
        G["U_r"] += np.outer(dr, h_prev)
        G["b_r"][:, 0] += dr
        dh_next = dh * (1 - z) + d_rh * r + A["U_r"].T @ dr + A["U_a"].T @ dz
    states = [c[5] for c in cache]
    return loss, G, states


class VanillaRNN:
    """Ungated baseline ``h_t = tanh(W x_t + U h_{t-1} + b)`` with softmax output."""

    def __init__(self, vocab, hidden, seed):
        rng = np.random.Generator(np.random.PCG64(seed))

        def glorot(r, c):
            s = math.sqrt(6 / (r + c))
            return rng.uniform(-s, s, (r, c))

        self.W = glorot(hidden, vocab)
        self.U = glorot(hidden, hidden)
        self.b = np.zeros((hidden, 1))
        self.W_out = glorot(vocab, hidden)
        self.b_out = np.zeros((vocab, 1))

    def params(self):
        return [self.W, self.U, self.b, self.W_out, self.b_out]

    def loss_and_grads_last(self, seqs):
        """Mean NLL of each sequence's final character, and gradients."""
        seqs = np.asarray(seqs)
        batch, length = seqs.shape
        hs = [np.zeros((self.U.shape[0], batch))]
        for t in range(length - 1):
            hs.append(np.tanh(self.W[:, seqs[:, t]] + self.U @ hs[-1] + self.b))
        logits = self.W_out @ hs[-1] + self.b_out
        logits -= logits.max(axis=0)
        p = np.exp(logits) / np.exp(logits).sum(axis=0)
        tgt = seqs[:, -1]
        loss = -np.log(p[tgt, np.arange(batch)]).mean()
        dlog = p.copy()
        dlog[tgt, np.arange(batch)] -= 1
        dlog /= batch
        gW, gU, gb = np.zeros_like(self.W), np.zeros_like(self.U), np.zeros_like(self.b)
        gWo, gbo = dlog @ hs[-1].T, dlog.sum(axis=1, keepdims=True)
        dh = self.W_out.T @ dlog
        for t in range(length - 2, -1, -1):
            dpre = dh * (1 - hs[t + 1] ** 2)
            np.add.at(gW.T, seqs[:, t], dpre.T)
            gU += dpre @ hs[t].T
            gb += dpre.sum(axis=1, keepdims=True)
            dh = self.U.T @ dpre
        return loss, [gW, gU, gb, gWo, gbo], p

    def predict_last(self, seqs):
        _, _, p = self.loss_and_grads_last(seqs)
        return p.argmax(axis=0)
