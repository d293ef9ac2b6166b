"""Optimizers (RMSprop, Adam) and the warmup/inverse-sqrt learning-rate law."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import DTYPE, Tensor


class TrainingDiverged(RuntimeError):
    """A loss went NaN/inf; training aborts with context instead of continuing."""


@dataclass
class LrSchedule:
    """lr(n) = k_prime * d_model**-0.5 * min(n**-0.5, n * warmup_n**-1.5).

    Rises linearly for the first warmup_n steps, then decays like 1/sqrt(n).
    """

    k_prime: float
    d_model: int
    warmup_n: int

    def __call__(self, n):
        return lr_at(self, n)


def lr_at(schedule, n):
    if n < 1:
        raise ValueError(f"lr_at needs step n >= 1, got {n}")
    s = schedule
    return s.k_prime * s.d_model ** -0.5 * min(n ** -0.5, n * s.warmup_n ** -1.5)


class _Optimizer:
    """Shared bookkeeping: named parameter dict, step counter, state dict io."""

    def __init__(self, params):
        if not isinstance(params, dict):
            params = {f"p{i}": p for i, p in enumerate(params)}
        for name, p in params.items():
            if not isinstance(p, Tensor):
                raise TypeError(f"optimizer parameter {name!r} is not a Tensor")
        self.params = params
        self.n = 0

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def _check(self, name, p):
        if p.grad.shape != p.data.shape:
            raise ValueError(
                f"gradient shape {p.grad.shape} does not match parameter {name!r} shape {p.data.shape}"
            )


class RMSprop(_Optimizer):
    """r <- rho*r + (1-rho)*g^2;  p <- p - lr * g / (sqrt(r) + eps)."""

    def __init__(self, params, lr=2e-4, rho=0.9, eps=1e-8):
        super().__init__(params)
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self.r = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self):
        self.n += 1
        for name, p in self.params.items():
            if p.grad is None:
                continue
            self._check(name, p)
            g = p.grad
            r = self.r[name]
            r *= self.rho
            r += (1.0 - self.rho) * g * g
            p.data -= self.lr * g / (np.sqrt(r) + self.eps)

    def state_dict(self):
        out = {f"r.{k}": v for k, v in self.r.items()}
        out["n"] = np.array([self.n], dtype=DTYPE)
        return out

    def load_state_dict(self, state):
        self.n = int(state["n"][0])
        for k in self.r:
            self.r[k] = np.array(state[f"r.{k}"], dtype=DTYPE)


class Adam(_Optimizer):
    """Bias-corrected Adam; lr may follow an LrSchedule."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.98, eps=1e-9, schedule=None):
        super().__init__(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.schedule = schedule
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self):
        self.n += 1
        lr = self.schedule(self.n) if self.schedule is not None else self.lr
        c1 = 1.0 - self.beta1 ** self.n
        c2 = 1.0 - self.beta2 ** self.n
        for name, p in self.params.items():
            if p.grad is None:
                continue
            self._check(name, p)
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_dict(self):
        out = {}
        for k in self.m:
            out[f"m.{k}"] = self.m[k]
            out[f"v.{k}"] = self.v[k]
        out["n"] = np.array([self.n], dtype=DTYPE)
        return out

    def load_state_dict(self, state):
        self.n = int(state["n"][0])
        for k in self.m:
            self.m[k] = np.array(state[f"m.{k}"], dtype=DTYPE)
            self.v[k] = np.array(state[f"v.{k}"], dtype=DTYPE)


def optimizer_step(kind, state, params, grads=None):
    """Functional wrapper: apply grads (or the params' own .grad) in place."""
    if grads is not None:
        for (name, p), g in zip(params.items(), grads):
            if np.shape(g) != p.data.shape:
                raise ValueError(f"grad shape {np.shape(g)} mismatches parameter {name!r} {p.data.shape}")
            p.grad = np.asarray(g, dtype=DTYPE)
    if kind not in ("rmsprop", "adam"):
        raise ValueError(f"unknown optimizer kind {kind!r}")
    state.step()
