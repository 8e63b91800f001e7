"""Nuclear-norm ball projection and projected first-order optimizers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class NuclearBall:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("nuclear ball radius must be positive")


def project_l1_ball(v, radius: float) -> np.ndarray:
    """Euclidean projection of a nonnegative vector onto
    ``{w >= 0 : sum(w) <= radius}`` (sort and threshold)."""
    v = np.asarray(v, dtype=np.float64)
    if not radius > 0:
        raise ValueError("radius must be positive")
    if np.any(v < 0):
        raise ValueError("entries must be nonnegative")
    if v.sum() <= radius:
        return v.copy()
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, len(u) + 1)
    rho = np.nonzero(u * ks > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def nuclear_norm(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False).sum())


def project_nuclear(a, ball: NuclearBall) -> np.ndarray:
    """Euclidean projection onto ``{X : ||X||_* <= ball.radius}``."""
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite matrix entries")
    if a.size == 0:
        return a.copy()
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.sum() <= ball.radius:
        return a.copy()
    return (u * project_l1_ball(s, ball.radius)) @ vt


def nuclear_budget(r: float, f_in: int, f_out: int, k: int) -> float:
    """Nuclear radius ``R * sqrt(F_out * F_in * (K + 1))`` covering filters
    whose per-hop columns have l2 norm at most ``R``."""
    return r * math.sqrt(f_out * f_in * (k + 1))


@dataclass
class OptimizerState:
    """State of a projected optimizer for one parameter matrix."""

    kind: str = "projected-adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("projected-gd", "projected-adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not self.lr > 0:
            raise ValueError("step size must be positive")


def step(state: OptimizerState, a, grad, ball: NuclearBall | None):
    """One projected update. Returns ``(new_a, new_state)``.

    With ``ball=None`` the parameter is unconstrained (used for biases).
    """
    a = np.asarray(a, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if a.shape != grad.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {grad.shape}")
    t = state.t + 1
    if state.kind == "projected-gd":
        new = a - state.lr * grad
        new_state = replace(state, t=t)
    else:
        m = np.zeros_like(a) if state.m is None else state.m
        v = np.zeros_like(a) if state.v is None else state.v
        if m.shape != a.shape:
            raise ValueError("optimizer moments do not match the parameter shape")
        m = state.beta1 * m + (1 - state.beta1) * grad
        v = state.beta2 * v + (1 - state.beta2) * grad * grad
        m_hat = m / (1 - state.beta1**t)
        v_hat = v / (1 - state.beta2**t)
        new = a - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_state = replace(state, t=t, m=m, v=v)
    if not np.all(np.isfinite(new)):
        raise FloatingPointError("optimizer step produced non-finite values")
    if ball is not None:
        new = project_nuclear(new, ball)
    return new, new_state


class PlateauSchedule:
    """Halve the step size after ``patience`` epochs without improvement."""

    def __init__(self, lr: float, patience: int = 20, factor: float = 0.5, min_lr: float = 1e-6):
        self.lr = lr
        self.patience = patience
        self.factor = factor
        self.min_lr = min_lr
        self.best = math.inf
        self.bad_epochs = 0

    def update(self, objective: float) -> float:
        if objective < self.best:
            self.best = objective
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.bad_epochs = 0
        return self.lr
