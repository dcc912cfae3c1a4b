"""Loss machinery: reparameterized sampling, classifier head, Gaussian KL.

The training objective is cross-entropy on the sampled representation plus
beta times the closed-form KL divergence between the embedding Gaussian and
a standard-normal prior. One noise draw per sample per step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import Tensor
from .errors import ContractError, DimensionError, ParameterError


@dataclass
class ClassifierParams:
    """Two-layer perceptron from the bottleneck to class logits."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2]

    @property
    def num_classes(self):
        return self.w2.shape[1]


def init_classifier(rng, bottleneck, hidden, num_classes):
    return ClassifierParams(
        w1=ad.glorot(rng, bottleneck, hidden),
        b1=ad.parameter(np.zeros(hidden)),
        w2=ad.glorot(rng, hidden, num_classes),
        b2=ad.parameter(np.zeros(num_classes)),
    )


@dataclass
class LossBreakdown:
    """Scalar tensors satisfying total = ce + beta * kl exactly."""

    total: Tensor
    ce: Tensor
    kl: Tensor
    beta: float

    def values(self):
        return {
            "total": self.total.item(),
            "ce": self.ce.item(),
            "kl": self.kl.item(),
            "beta": self.beta,
        }


def reparameterize(emb, eps_gauss):
    """z = mu + sigma * eps; gradients reach mu and sigma, not the noise."""
    eps = ad.tensor(np.asarray(eps_gauss, dtype=np.float64))
    if eps.shape != emb.mu.shape:
        raise DimensionError(f"noise shape {eps.shape} does not match mu {emb.mu.shape}")
    z = ad.add(emb.mu, ad.multiply(emb.sigma, eps))
    emb.z = z
    return z


def kl_to_standard_normal(emb):
    """0.5 * sum(mu^2 + sigma^2 - 1 - ln sigma^2); zero iff mu=0, sigma=1."""
    if np.any(emb.sigma.data <= 0):
        raise ContractError("sigma must be strictly positive")
    mu2 = ad.multiply(emb.mu, emb.mu)
    s2 = ad.multiply(emb.sigma, emb.sigma)
    log_s2 = ad.multiply_scalar(ad.log(emb.sigma), 2.0)
    inner = ad.subtract(ad.add(mu2, s2), ad.add_scalar(log_s2, 1.0))
    return ad.multiply_scalar(ad.sum(inner), 0.5)


def classify(z, params):
    """Raw class logits; softmax happens inside the loss."""
    if z.ndim != 1 or z.shape[0] != params.w1.shape[0]:
        raise DimensionError(
            f"representation length {z.shape} does not match classifier input {params.w1.shape[0]}"
        )
    row = ad.reshape(z, (1, z.shape[0]))
    hidden = ad.relu(ad.rowvec_add(ad.matmul(row, params.w1), params.b1))
    logits = ad.rowvec_add(ad.matmul(hidden, params.w2), params.b2)
    return ad.reshape(logits, (params.num_classes,))


def cross_entropy(logits, y):
    """-log softmax(logits)[y] with log-sum-exp stabilization."""
    logits = logits if isinstance(logits, Tensor) else ad.tensor(logits)
    if logits.ndim != 1:
        raise DimensionError(f"logits must be a vector, got shape {logits.shape}")
    c = logits.shape[0]
    y = int(y)
    if not 0 <= y < c:
        raise ContractError(f"class index {y} outside [0, {c})")
    K = kernels.active
    loss, probs = K.softmax_xent(logits.data, y)
    onehot = np.zeros(c)
    onehot[y] = 1.0

    def grad_fn(g):
        return (g.item() * (probs - onehot),)

    return ad.record("cross_entropy", (logits,), np.asarray(loss), grad_fn)


def vib_loss(emb, logits, y, beta):
    """Per-sample breakdown; the batch loss is the mean of per-sample totals."""
    if beta < 0:
        raise ParameterError(f"beta must be non-negative, got {beta}")
    ce = cross_entropy(logits, y)
    kl = kl_to_standard_normal(emb)
    total = ad.add(ce, ad.multiply_scalar(kl, beta))
    return LossBreakdown(total=total, ce=ce, kl=kl, beta=float(beta))


def combine_losses(breakdowns):
    """Mean of per-sample breakdowns, keeping total = ce + beta * kl exact."""
    if not breakdowns:
        raise ContractError("no losses to combine")
    beta = breakdowns[0].beta
    if any(b.beta != beta for b in breakdowns):
        raise ContractError("cannot combine losses with different beta values")
    inv = 1.0 / len(breakdowns)

    def mean_of(parts):
        acc = parts[0]
        for p in parts[1:]:
            acc = ad.add(acc, p)
        return ad.multiply_scalar(acc, inv)

    ce = mean_of([b.ce for b in breakdowns])
    kl = mean_of([b.kl for b in breakdowns])
    total = ad.add(ce, ad.multiply_scalar(kl, beta))
    return LossBreakdown(total=total, ce=ce, kl=kl, beta=beta)
