"""Graph encoders producing a diagonal-Gaussian embedding of the whole graph.

Two backbones over weighted dense adjacencies: symmetric-normalized
convolution (gcn) and sum-aggregation with a per-layer MLP (gin). Node
embeddings are mean-pooled into a 2K vector whose halves parameterize the
mean and (via softplus) the standard deviation of the bottleneck Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, DimensionError, ParameterError

SIGMA_FLOOR = 1e-6  # keeps the KL term finite for collapsed deviations

BACKBONES = ("gcn", "gin")


@dataclass
class GaussianEmbedding:
    """Bottleneck posterior: mean, standard deviation, optional sample."""

    mu: Tensor
    sigma: Tensor
    z: Tensor | None = None

    @property
    def dim(self):
        return self.mu.shape[0]


@dataclass
class EncoderParams:
    backbone: str
    layers: list  # gcn: [Tensor w]; gin: [(w1, b1, w2, b2)]
    bottleneck: int
    gin_eps: float = 0.0

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise ParameterError(f"backbone must be one of {BACKBONES}, got {self.backbone!r}")
        if self.bottleneck < 1:
            raise ParameterError(f"bottleneck size must be >= 1, got {self.bottleneck}")

    def parameters(self):
        if self.backbone == "gcn":
            return list(self.layers)
        out = []
        for mlp in self.layers:
            out.extend(mlp)
        return out


def init_encoder(rng, backbone, in_dim, hidden, bottleneck, num_layers=2, gin_eps=0.0):
    """Widths run in_dim -> hidden -> ... -> 2*bottleneck."""
    if num_layers < 1:
        raise ParameterError(f"need at least one layer, got {num_layers}")
    widths = [in_dim] + [hidden] * (num_layers - 1) + [2 * bottleneck]
    layers = []
    for w_in, w_out in zip(widths, widths[1:]):
        if backbone == "gcn":
            layers.append(ad.glorot(rng, w_in, w_out))
        else:
            layers.append(
                (
                    ad.glorot(rng, w_in, w_out),
                    ad.parameter(np.zeros(w_out)),
                    ad.glorot(rng, w_out, w_out),
                    ad.parameter(np.zeros(w_out)),
                )
            )
    return EncoderParams(backbone=backbone, layers=layers, bottleneck=bottleneck, gin_eps=gin_eps)


def gcn_layer(h, a, w, activation=True):
    """relu(D^-1/2 (A + I) D^-1/2 H W) with weighted degrees; final layer linear.

    Self-loops of weight one guarantee strictly positive degrees, so the
    normalization is defined even for isolated nodes.
    """
    if h.shape[0] != a.shape[0]:
        raise DimensionError(f"features {h.shape} do not match adjacency {a.shape}")
    n = a.shape[0]
    a_tilde = ad.add(a, ad.tensor(np.eye(n)))
    deg = ad.sum(a_tilde, axis=1)
    inv_sqrt = ad.power(deg, -0.5)
    scale = ad.matmul(ad.reshape(inv_sqrt, (n, 1)), ad.reshape(inv_sqrt, (1, n)))
    propagated = ad.matmul(ad.multiply(a_tilde, scale), h)
    out = ad.matmul(propagated, w)
    return ad.relu(out) if activation else out


def gin_layer(h, a, mlp, eps_gin=0.0):
    """MLP((1 + eps) h_v + sum_u a[u, v] h_u) with a relu-hidden 2-layer MLP."""
    if h.shape[0] != a.shape[0]:
        raise DimensionError(f"features {h.shape} do not match adjacency {a.shape}")
    w1, b1, w2, b2 = mlp
    agg = ad.add(ad.multiply_scalar(h, 1.0 + eps_gin), ad.matmul(a, h))
    hidden = ad.relu(ad.rowvec_add(ad.matmul(agg, w1), b1))
    return ad.rowvec_add(ad.matmul(hidden, w2), b2)


def encode_xa(x, a, params):
    """Encode a (features, adjacency) pair into a GaussianEmbedding."""
    x = x if isinstance(x, Tensor) else ad.tensor(x)
    a = a if isinstance(a, Tensor) else ad.tensor(a)
    if x.shape[0] == 0:
        raise ContractError("cannot encode a graph with zero nodes")
    if x.ndim != 2 or a.shape != (x.shape[0], x.shape[0]):
        raise DimensionError(f"inconsistent shapes: x {x.shape}, a {a.shape}")
    h = x
    last = len(params.layers) - 1
    for i, layer in enumerate(params.layers):
        if params.backbone == "gcn":
            h = gcn_layer(h, a, layer, activation=(i < last))
        else:
            h = gin_layer(h, a, layer, eps_gin=params.gin_eps)
    pooled = ad.mean(h, axis=0)
    k = params.bottleneck
    if pooled.shape[0] != 2 * k:
        raise DimensionError(
            f"encoder output width {pooled.shape[0]} is not twice the bottleneck {k}"
        )
    mu = ad.slice1d(pooled, 0, k)
    sigma = ad.add_scalar(ad.softplus(ad.slice1d(pooled, k, 2 * k)), SIGMA_FLOOR)
    return GaussianEmbedding(mu=mu, sigma=sigma)


def encode(g_ib, params):
    """Encode a learned graph; pooling makes the result node-order invariant."""
    return encode_xa(g_ib.x_ib, g_ib.a_ib, params)
