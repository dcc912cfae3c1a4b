"""Adam optimizer over lists of parameter tensors."""

from __future__ import annotations

import numpy as np

from . import kernels
from .autodiff import Tensor
from .errors import ContractError, ParameterError


def init_adam_state(params):
    """Fresh first/second moment buffers and step counter."""
    return {
        "step": 0,
        "m": [np.zeros_like(p.data) for p in params],
        "v": [np.zeros_like(p.data) for p in params],
    }


def adam_step(params, grads, state, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
    """Apply one Adam update in place and advance the step counter.

    From fresh state a zero gradient leaves the parameters unchanged.
    """
    if lr <= 0:
        raise ParameterError(f"learning rate must be positive, got {lr}")
    state["step"] += 1
    step = state["step"]
    b1, b2 = betas
    K = kernels.active
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        data = p.data if isinstance(p, Tensor) else p
        if g.shape != data.shape or m.shape != data.shape:
            raise ContractError(
                f"adam_step: buffer shape {g.shape} does not match parameter {data.shape}"
            )
        K.adam_step(data, g, m, v, step, lr, b1, b2, eps)


class Adam:
    """Stateful wrapper; parameters with grad=None are skipped."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.betas = (float(betas[0]), float(betas[1]))
        self.eps = float(eps)
        self.state = init_adam_state(self.params)

    def step(self):
        live = [(i, p) for i, p in enumerate(self.params) if p.grad is not None]
        if not live:
            return
        self.state["step"] += 1
        step = self.state["step"]
        K = kernels.active
        for i, p in live:
            if p.grad.shape != p.data.shape:
                raise ContractError(
                    f"adam: grad shape {p.grad.shape} does not match parameter {p.data.shape}"
                )
            K.adam_step(
                p.data, p.grad, self.state["m"][i], self.state["v"][i],
                step, self.lr, self.betas[0], self.betas[1], self.eps,
            )

    def zero_grad(self):
        for p in self.params:
            p.grad = None
