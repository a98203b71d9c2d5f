"""Adamax parameter updates.

Adamax tracks a first-moment estimate m and an infinity-norm accumulator u
per parameter.  One step:

    t <- t + 1
    m <- beta1 * m + (1 - beta1) * g
    u <- max(beta2 * u, |g|)
    theta <- theta - (alpha / (1 - beta1**t)) * m / (u + eps)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamaxState:
    alpha: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    u: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray], alpha: float) -> "AdamaxState":
        state = cls(alpha=alpha)
        state.m = [np.zeros_like(p) for p in params]
        state.u = [np.zeros_like(p) for p in params]
        return state


def adamax_step(params: list[np.ndarray], grads: list[np.ndarray],
                state: AdamaxState) -> tuple[list[np.ndarray], AdamaxState]:
    """Apply one Adamax update in place; returns (params, state) for chaining."""
    if not (len(params) == len(grads) == len(state.m) == len(state.u)):
        raise ValueError("params, grads and optimizer state must have equal lengths")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, state {m.shape}")
    state.t += 1
    scale = state.alpha / (1.0 - state.beta1 ** state.t)
    for p, g, m, u in zip(params, grads, state.m, state.u):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        np.maximum(state.beta2 * u, np.abs(g), out=u)
        p -= (scale * m / (u + state.eps)).astype(p.dtype, copy=False)
    return params, state
