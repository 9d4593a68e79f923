"""SGD and Adam over nested {layer: {tensor: array}} parameter dicts."""

from __future__ import annotations

import numpy as np

from ..validation import ValidationError


def _walk(params, grads):
    for name, group in params.items():
        g_group = grads.get(name, {})
        for key, p in group.items():
            g = g_group.get(key)
            yield name, key, p, g


class SGD:
    def __init__(self, lr):
        if not (lr > 0):
            raise ValidationError(f"lr must be positive, got {lr}")
        self.lr = lr
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        for name, key, p, g in _walk(params, grads):
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise ValidationError(f"non-finite gradient for {name}.{key}")
            p -= self.lr * g
        return params


class Adam:
    """Standard Adam with bias correction."""

    def __init__(self, lr, beta1=0.9, beta2=0.99, eps=1e-8):
        if not (lr > 0):
            raise ValidationError(f"lr must be positive, got {lr}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValidationError(f"betas must lie in [0,1), got {beta1}, {beta2}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for name, key, p, g in _walk(params, grads):
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise ValidationError(f"non-finite gradient for {name}.{key}")
            sk = (name, key)
            if sk not in self.m:
                self.m[sk] = np.zeros_like(p)
                self.v[sk] = np.zeros_like(p)
            m = self.m[sk]
            v = self.v[sk]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params
