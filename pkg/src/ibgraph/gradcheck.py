"""Finite-difference verification of every gradient path.

Central differences with h = 1e-5 are compared against reverse-mode
gradients, entrywise: relative error where the magnitudes are meaningful,
absolute error below 1e-8. The end-to-end check drives a full
generate -> encode -> reparameterize -> loss pass on a five-node graph and
differentiates with respect to every parameter, re-seeding the noise draws
per evaluation so the objective is a deterministic function of the weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import encoder as enc
from . import generator as gen
from . import objective as obj
from .autodiff import Tape, backward
from .errors import ContractError
from .graphs import synth_two_class

FD_STEP = 1e-5
OP_TOL = 1e-4
END_TO_END_TOL = 1e-3
TINY = 1e-8


def finite_difference(f, x, h=FD_STEP):
    """Central-difference gradient of scalar f at array x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = f(x)
        flat[i] = orig - h
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * h)
    return grad


def max_mismatch(analytic, numeric, tiny=TINY):
    """Worst entrywise error: relative above `tiny`, absolute below."""
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    err = np.abs(analytic - numeric)
    small = scale < tiny
    rel = np.where(small, err, err / np.maximum(scale, tiny))
    return float(rel.max()) if rel.size else 0.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_error: float
    tolerance: float

    @property
    def ok(self):
        return self.max_error < self.tolerance


def _check_case(name, build, x0, tol=OP_TOL):
    """Compare autodiff and finite differences for loss = build(leaf)."""

    def value(x):
        with Tape():
            return build(ad.tensor(x)).item()

    leaf = ad.parameter(x0)
    with Tape():
        loss = build(leaf)
        backward(loss)
    numeric = finite_difference(value, np.array(x0))
    return CheckResult(name, max_mismatch(leaf.grad, numeric), tol)


def run_op_checks(seed=0):
    """Finite-difference check of every differentiable operation.

    Inputs are drawn once in [-2, 2]; relu/clamp cases get a margin away
    from their kinks so the difference quotient samples a smooth patch.
    """
    rng = np.random.default_rng(seed)

    def rand(*shape):
        return rng.uniform(-2.0, 2.0, size=shape)

    def rand_margin(*shape, margin=1e-3):
        x = rand(*shape)
        return np.where(np.abs(x) < margin, margin, x)

    def away_from(x, points, margin=1e-2):
        for p in points:
            x = np.where(np.abs(x - p) < margin, p + margin, x)
        return x

    w43 = ad.tensor(rand(4, 3))
    w35 = ad.tensor(rand(3, 5))
    w45 = ad.tensor(rand(4, 5))
    w34 = ad.tensor(rand(3, 4))
    w44 = rand(4, 4)
    v3 = ad.tensor(rand(3))
    v4 = ad.tensor(rand(4))
    v5 = ad.tensor(rand(5))
    v12 = ad.tensor(rand(12))
    div_denom = ad.tensor(rand_margin(4, 3, margin=0.5))

    cases = [
        ("matmul", lambda t: ad.sum(ad.multiply(ad.matmul(t, w35), w45)), rand(4, 3)),
        ("add", lambda t: ad.sum(ad.multiply(ad.add(t, w43), w43)), rand(4, 3)),
        ("subtract", lambda t: ad.sum(ad.multiply(ad.subtract(t, w43), w43)), rand(4, 3)),
        ("multiply", lambda t: ad.sum(ad.multiply(ad.multiply(t, w43), w43)), rand(4, 3)),
        ("divide", lambda t: ad.sum(ad.divide(t, div_denom)), rand(4, 3)),
        ("divide_denom", lambda t: ad.sum(ad.divide(w43, t)), rand_margin(4, 3, margin=0.5)),
        ("negate", lambda t: ad.sum(ad.multiply(ad.negate(t), w43)), rand(4, 3)),
        ("add_scalar", lambda t: ad.sum(ad.multiply(ad.add_scalar(t, 1.7), w43)), rand(4, 3)),
        ("multiply_scalar", lambda t: ad.sum(ad.multiply(ad.multiply_scalar(t, -0.3), w43)), rand(4, 3)),
        ("rowvec_add", lambda t: ad.sum(ad.multiply(ad.rowvec_add(w43, t), w43)), rand(3)),
        ("rowvec_multiply", lambda t: ad.sum(ad.multiply(ad.rowvec_multiply(w43, t), w43)), rand(3)),
        ("relu", lambda t: ad.sum(ad.multiply(ad.relu(t), w43)), rand_margin(4, 3)),
        ("sigmoid", lambda t: ad.sum(ad.multiply(ad.sigmoid(t), w43)), rand(4, 3)),
        ("softplus", lambda t: ad.sum(ad.multiply(ad.softplus(t), w43)), rand(4, 3)),
        ("exp", lambda t: ad.sum(ad.multiply(ad.exp(t), w43)), rand(4, 3)),
        ("log", lambda t: ad.sum(ad.multiply(ad.log(t), w43)), np.abs(rand(4, 3)) + 0.5),
        ("power", lambda t: ad.sum(ad.multiply(ad.power(t, -0.5), w43)), np.abs(rand(4, 3)) + 0.5),
        ("clamp", lambda t: ad.sum(ad.multiply(ad.clamp(t, -1.0, 1.0), w43)),
         away_from(rand(4, 3), (-1.0, 1.0))),
        ("sum_all", lambda t: ad.multiply_scalar(ad.sum(t), 0.7), rand(4, 3)),
        ("sum_axis0", lambda t: ad.sum(ad.multiply(ad.sum(t, axis=0), v3)), rand(4, 3)),
        ("sum_axis1", lambda t: ad.sum(ad.multiply(ad.sum(t, axis=1), v4)), rand(4, 3)),
        ("mean_all", lambda t: ad.multiply_scalar(ad.mean(t), 1.3), rand(4, 3)),
        ("mean_axis0", lambda t: ad.sum(ad.multiply(ad.mean(t, axis=0), v3)), rand(4, 3)),
        ("mean_axis1", lambda t: ad.sum(ad.multiply(ad.mean(t, axis=1), v4)), rand(4, 3)),
        ("transpose", lambda t: ad.sum(ad.multiply(ad.transpose(t), w34)), rand(4, 3)),
        ("gram", lambda t: ad.sum(ad.multiply(ad.gram(t), ad.tensor(w44))), rand(4, 3)),
        ("reshape", lambda t: ad.sum(ad.multiply(ad.reshape(t, (12,)), v12)), rand(4, 3)),
        ("slice", lambda t: ad.sum(ad.multiply(ad.slice1d(t, 2, 7), v5)), rand(9)),
        ("cross_entropy", lambda t: obj.cross_entropy(t, 1), rand(4)),
    ]
    return [_check_case(name, build, x0) for name, build, x0 in cases]


def _build_small_model(seed, feature_dim, num_classes=2, bottleneck=3):
    rng = np.random.default_rng(seed)
    mask = gen.init_feature_mask(feature_dim, init_logit=0.5)
    struct = gen.init_structure_learner(rng, feature_dim, hidden=4, out_dim=3,
                                        temperature=0.5, threshold=0.05)
    encoder = enc.init_encoder(rng, "gcn", feature_dim, hidden=4, bottleneck=bottleneck)
    clf = obj.init_classifier(rng, bottleneck, hidden=4, num_classes=num_classes)
    params = mask.parameters() + struct.parameters() + encoder.parameters() + clf.parameters()
    return mask, struct, encoder, clf, params


def _end_to_end_loss(graph, mask, struct, encoder, clf, noise_seed, beta):
    rng = np.random.default_rng(noise_seed)
    ibg = gen.generate(graph, mask, struct, rng, train_mode=True)
    emb = enc.encode(ibg, encoder)
    z = obj.reparameterize(emb, rng.standard_normal(emb.dim))
    logits = obj.classify(z, clf)
    return obj.vib_loss(emb, logits, graph.label, beta)


def _smoothness_margins(graph, mask, struct, encoder, clf, noise_seed, beta):
    """Min distance of relu inputs from 0 and of the relaxed adjacency from
    the sparsification threshold, measured on the recorded forward pass."""
    with Tape() as tape:
        _end_to_end_loss(graph, mask, struct, encoder, clf, noise_seed, beta)
    relu_margin = np.inf
    for e in tape.entries:
        if e.op == "relu":
            relu_margin = min(relu_margin, float(np.abs(e.inputs[0].data).min()))
    # Replicate the generator's rng consumption to get the pre-threshold matrix.
    rng = np.random.default_rng(noise_seed)
    with ad.no_grad():
        x_r = graph.features[rng.permutation(graph.num_nodes)]
        x_ib = gen.mask_features(ad.tensor(graph.features), mask, ad.tensor(x_r), True)
        pi = gen.edge_probabilities(x_ib, struct)
        eps = gen.sample_uniform_symmetric(rng, graph.num_nodes)
        relaxed = gen.concrete_sample(pi, struct.temperature, eps, True)
        sym = 0.5 * (relaxed.data + relaxed.data.T)
    off = ~np.eye(graph.num_nodes, dtype=bool)
    threshold_margin = float(np.abs(sym[off] - struct.threshold).min())
    return relu_margin, threshold_margin


def run_end_to_end_check(seed=0, beta=1e-3, margin=1e-3):
    """Finite differences through the whole pipeline on a 5-node graph.

    Seeds advance until every relu input and every relaxed adjacency entry
    sits at least ``margin`` away from its kink, so the loss is smooth in
    the probed neighborhood.
    """
    for attempt in range(64):
        trial = seed + attempt
        dataset = synth_two_class(2, 5, 2, 0.2, seed=trial, feature_dim=3, separation=1.0)
        graph = dataset[0]
        mask, struct, encoder, clf, params = _build_small_model(trial, dataset.feature_dim)
        noise_seed = trial + 1000
        relu_m, thr_m = _smoothness_margins(graph, mask, struct, encoder, clf, noise_seed, beta)
        if relu_m > margin and thr_m > margin:
            break
    else:
        raise ContractError("no seed kept the forward pass away from its kinks")

    with Tape():
        loss = _end_to_end_loss(graph, mask, struct, encoder, clf, noise_seed, beta)
        backward(loss.total)
    analytic = np.concatenate([p.grad.ravel().copy() for p in params])

    def value_at(vec):
        offset = 0
        for p in params:
            p.data[...] = vec[offset:offset + p.size].reshape(p.shape)
            offset += p.size
        with Tape():
            return _end_to_end_loss(graph, mask, struct, encoder, clf, noise_seed, beta).total.item()

    vec0 = np.concatenate([p.data.ravel().copy() for p in params])
    numeric = finite_difference(value_at, vec0)
    value_at(vec0)  # restore parameters
    return CheckResult("end_to_end", max_mismatch(analytic, numeric), END_TO_END_TOL)


def run_all(seed=0):
    """Op-level checks plus the end-to-end check; list of CheckResult."""
    results = run_op_checks(seed)
    results.append(run_end_to_end_check(seed))
    return results
