"""Learned-graph generator: feature masking plus Bernoulli structure learning.

The generator turns an input graph into an ``IBGraph``: features pass through
a learnable sigmoid gate, node embeddings from a two-layer perceptron score
every node pair, and the resulting edge probabilities are sampled with a
binary concrete relaxation, symmetrized and thresholded. The output structure
depends only on the (masked) features, never on the input adjacency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DimensionError, ParameterError

PROB_EPS = 1e-6  # probability clamp bound that keeps the relaxation logits finite


@dataclass
class FeatureMaskParams:
    """Per-dimension gate; effective mask is sigmoid(logits / temperature)."""

    mask_logits: Tensor
    temperature_m: float = 1.0

    def __post_init__(self):
        if self.temperature_m <= 0:
            raise ParameterError(f"mask temperature must be positive, got {self.temperature_m}")
        if self.mask_logits.ndim != 1:
            raise DimensionError("mask_logits must be a vector")

    def parameters(self):
        return [self.mask_logits]


def init_feature_mask(dim, temperature_m=1.0, init_logit=0.0):
    return FeatureMaskParams(
        mask_logits=ad.parameter(np.full(dim, float(init_logit))),
        temperature_m=temperature_m,
    )


@dataclass
class StructureLearnerParams:
    """Two-layer perceptron scoring node pairs, plus relaxation settings."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    temperature: float = 0.1
    threshold: float = 0.1

    def __post_init__(self):
        if self.temperature <= 0:
            raise ParameterError(f"concrete temperature must be positive, got {self.temperature}")
        if self.threshold < 0:
            raise ParameterError(f"edge threshold must be non-negative, got {self.threshold}")

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2]


def init_structure_learner(rng, in_dim, hidden, out_dim, temperature=0.1, threshold=0.1):
    return StructureLearnerParams(
        w1=ad.glorot(rng, in_dim, hidden),
        b1=ad.parameter(np.zeros(hidden)),
        w2=ad.glorot(rng, hidden, out_dim),
        b2=ad.parameter(np.zeros(out_dim)),
        temperature=temperature,
        threshold=threshold,
    )


@dataclass
class IBGraph:
    """Learned graph: masked features, relaxed adjacency, edge probabilities."""

    x_ib: Tensor
    a_ib: Tensor
    edge_probs: Tensor | None = None
    label: int | None = None

    @property
    def num_nodes(self):
        return self.x_ib.shape[0]


def mask_vector(params, train_mode):
    """Effective mask in (0, 1); hard-binarized at 0.5 in eval mode."""
    m = ad.sigmoid(ad.multiply_scalar(params.mask_logits, 1.0 / params.temperature_m))
    if train_mode:
        return m
    return ad.tensor((m.data >= 0.5).astype(np.float64))


def mask_features(x, params, x_r, train_mode):
    """Gate features as x_r + (x - x_r) * mask, the mask broadcast over rows.

    x_r is a draw from the empirical feature distribution (a row shuffle of
    x), so a closed gate replaces a dimension with feature noise rather than
    zeros. Differentiable in mask_logits when train_mode is set.
    """
    x = x if isinstance(x, Tensor) else ad.tensor(x)
    x_r = x_r if isinstance(x_r, Tensor) else ad.tensor(x_r)
    if x.shape != x_r.shape:
        raise DimensionError(f"x and x_r shapes differ: {x.shape} vs {x_r.shape}")
    if x.shape[1] != params.mask_logits.shape[0]:
        raise DimensionError(
            f"mask length {params.mask_logits.shape[0]} does not match feature dim {x.shape[1]}"
        )
    m = mask_vector(params, train_mode)
    return ad.add(x_r, ad.rowvec_multiply(ad.subtract(x, x_r), m))


def _offdiag(n):
    return ad.tensor(1.0 - np.eye(n))


def edge_probabilities(x_ib, params):
    """Pairwise edge probabilities sigmoid(z zT); symmetric, zero diagonal."""
    h = ad.relu(ad.rowvec_add(ad.matmul(x_ib, params.w1), params.b1))
    z = ad.rowvec_add(ad.matmul(h, params.w2), params.b2)
    pi = ad.sigmoid(ad.gram(z))
    return ad.multiply(pi, _offdiag(x_ib.shape[0]))


def sample_uniform_symmetric(rng, n):
    """One uniform draw per undirected pair, mirrored; diagonal is neutral 0.5."""
    eps = np.full((n, n), 0.5)
    iu, iv = np.triu_indices(n, k=1)
    draws = np.clip(rng.uniform(size=iu.size), 1e-12, 1.0 - 1e-12)
    eps[iu, iv] = draws
    eps[iv, iu] = draws
    return eps


def concrete_sample(pi, temperature, eps, train_mode, eval_mode="expected"):
    """Relaxed Bernoulli sample of every edge.

    Training: sigmoid((logit(pi) + logit(eps)) / t) with pi clamped to
    [1e-6, 1 - 1e-6] and one shared eps draw per undirected pair. Evaluation
    is deterministic: the expected value pi (default) or a hard 1[pi >= 0.5].
    The output keeps a zero diagonal.
    """
    if temperature <= 0:
        raise ParameterError(f"concrete temperature must be positive, got {temperature}")
    pi = pi if isinstance(pi, Tensor) else ad.tensor(pi)
    n = pi.shape[0]
    if not train_mode:
        if eval_mode == "expected":
            return ad.multiply(pi, _offdiag(n))
        if eval_mode == "hard":
            return ad.tensor((pi.data >= 0.5).astype(np.float64) * (1.0 - np.eye(n)))
        raise ParameterError(f"unknown eval adjacency mode {eval_mode!r}")
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (n, n):
        raise DimensionError(f"eps shape {eps.shape} does not match pi shape {pi.shape}")
    p = ad.clamp(pi, PROB_EPS, 1.0 - PROB_EPS)
    logit_p = ad.subtract(ad.log(p), ad.log(ad.add_scalar(ad.negate(p), 1.0)))
    logit_e = ad.tensor(np.log(eps) - np.log1p(-eps))
    relaxed = ad.sigmoid(ad.multiply_scalar(ad.add(logit_p, logit_e), 1.0 / temperature))
    return ad.multiply(relaxed, _offdiag(n))


def sparsify(a_relaxed, threshold):
    """Symmetrize as (a + aT)/2, zero entries below the threshold.

    The survivor mask is computed from forward values and treated as a
    constant, so the backward pass flows only through surviving entries.
    """
    if threshold < 0:
        raise ParameterError(f"edge threshold must be non-negative, got {threshold}")
    a_relaxed = a_relaxed if isinstance(a_relaxed, Tensor) else ad.tensor(a_relaxed)
    n = a_relaxed.shape[0]
    sym = ad.multiply_scalar(ad.add(a_relaxed, ad.transpose(a_relaxed)), 0.5)
    keep = (sym.data >= threshold).astype(np.float64) * (1.0 - np.eye(n))
    return ad.multiply(sym, ad.tensor(keep))


def generate(g, mask_params, struct_params, rng, train_mode, eval_adjacency="expected"):
    """Full generator pass: mask, score pairs, relax, sparsify.

    The input adjacency is never read; two graphs that differ only in
    structure produce identical outputs under equal rng state.
    """
    n = g.num_nodes
    x = ad.tensor(g.features)
    x_r = ad.tensor(g.features[rng.permutation(n)])
    x_ib = mask_features(x, mask_params, x_r, train_mode)
    pi = edge_probabilities(x_ib, struct_params)
    eps = sample_uniform_symmetric(rng, n)
    relaxed = concrete_sample(
        pi, struct_params.temperature, eps, train_mode, eval_mode=eval_adjacency
    )
    a_ib = sparsify(relaxed, struct_params.threshold)
    return IBGraph(x_ib=x_ib, a_ib=a_ib, edge_probs=pi, label=g.label)


# -- export ----------------------------------------------------------------


def ibgraph_to_record(ibg):
    """JSON-lines record of a learned graph, with per-edge weights."""
    a = ibg.a_ib.data
    n = a.shape[0]
    iu, iv = np.triu_indices(n, k=1)
    keep = a[iu, iv] > 0
    edges = [[int(u), int(v)] for u, v in zip(iu[keep], iv[keep])]
    rec = {
        "n": n,
        "x": ibg.x_ib.data.tolist(),
        "edges": edges,
        "w": [float(w) for w in a[iu, iv][keep]],
    }
    if ibg.label is not None:
        rec["y"] = int(ibg.label)
    return rec


def write_ibgraph_jsonl(ibg, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(ibgraph_to_record(ibg), separators=(",", ":")))
        fh.write("\n")


def to_dot(adjacency, name="g"):
    """Graphviz DOT text for a weighted undirected adjacency matrix."""
    a = adjacency.data if isinstance(adjacency, Tensor) else np.asarray(adjacency)
    n = a.shape[0]
    lines = [f"graph {name} {{", "  node [shape=circle];"]
    for i in range(n):
        lines.append(f"  {i};")
    iu, iv = np.triu_indices(n, k=1)
    for u, v in zip(iu, iv):
        w = a[u, v]
        if w > 0:
            lines.append(f'  {u} -- {v} [label="{w:.4f}", penwidth={0.5 + 2.5 * w:.2f}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_dot(adjacency, path, name="g"):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_dot(adjacency, name=name))
