"""Gate nonlinearities and the p-norm coupling between the two gates.

The nonlinearity gate ``a1`` scales the candidate state and the linearity
gate ``a2`` scales the carried state. Here ``a2`` is never learned; it is
fixed by ``(a1**p + a2**p) ** (1/p) == 1``, i.e.
``a2 = (1 - a1**p) ** (1/p)``. ``p == 1`` gives the usual convex
combination ``a2 = 1 - a1``; larger ``p`` opens both gates wider.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_EPSILON = 1e-12


class GateNumericError(ValueError):
    pass


@dataclass(frozen=True)
class PNorm:
    p: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not np.isfinite(self.p) or self.p <= 0:
            raise ValueError(f"p must be a positive real, got {self.p}")
        if not (0 < self.epsilon <= 1e-6):
            raise ValueError(f"epsilon must lie in (0, 1e-6], got {self.epsilon}")

    def complement(self, a1):
        return pnorm_complement(a1, self)

    def complement_grad(self, a1, a2):
        return pnorm_complement_grad(a1, a2, self)


def sigmoid(x):
    # tanh form: no overflow, and sigmoid(-x) == 1 - sigmoid(x) exactly
    out = 0.5 + 0.5 * np.tanh(0.5 * np.asarray(x, dtype=np.float64))
    return out if out.ndim else float(out)


def sigmoid_grad(y):
    """Derivative of the sigmoid expressed through its output ``y``."""
    return y * (1.0 - y)


def tanh_grad(y):
    return 1.0 - y * y


def pnorm_complement(a1, pn: PNorm):
    """Linearity gate ``(1 - a1**p) ** (1/p)``, element-wise.

    ``a1`` is clamped to ``[eps, 1 - eps]`` first and the result is clamped
    to the same interval, which keeps the backward pass finite.
    """
    a = np.asarray(a1, dtype=np.float64)
    if not np.isfinite(a).all():
        raise GateNumericError("pnorm_complement: non-finite gate value")
    eps = pn.epsilon
    a = np.minimum(np.maximum(a, eps), 1.0 - eps)
    if pn.p == 1.0:
        a2 = 1.0 - a
    else:
        # 1 - a**p without cancellation
        rest = -np.expm1(pn.p * np.log(a))
        a2 = np.exp(np.log(np.maximum(rest, eps)) / pn.p)
    a2 = np.minimum(np.maximum(a2, eps), 1.0 - eps)
    return a2 if a2.ndim else float(a2)


def pnorm_complement_grad(a1, a2, pn: PNorm):
    """``d a2 / d a1 = -(a1 / a2) ** (p - 1)`` for a clamped forward pair."""
    eps = pn.epsilon
    a = np.asarray(a1, dtype=np.float64)
    if pn.p == 1.0:
        g = -np.ones_like(a)
    else:
        a = np.minimum(np.maximum(a, eps), 1.0 - eps)
        b = np.asarray(a2, dtype=np.float64)
        g = -np.exp((pn.p - 1.0) * np.log(a / b))
    return g if g.ndim else float(g)


def pnorm_residual(a1, a2, p: float):
    """Largest deviation of ``(a1**p + a2**p) ** (1/p)`` from 1."""
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)
    return float(np.max(np.abs((a1 ** p + a2 ** p) ** (1.0 / p) - 1.0)))
