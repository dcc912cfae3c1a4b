"""Graph and dataset representation, file I/O, synthesis, and perturbation.

Graphs are undirected: dense symmetric adjacency with zero diagonal and
entries in [0, 1]. Datasets live on disk as UTF-8 JSON lines, one graph per
line::

    {"n": int, "x": [[float, ...], ...], "edges": [[u, v], ...], "y": int}

with 0-based node indices and u < v per edge. The writer emits edges sorted
lexicographically. Weighted graphs carry a parallel "w" list, one weight per
edge. All values are immutable after construction, so graphs can be shared
across concurrently training folds.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DatasetFormatError, ParameterError, ValidationError


@dataclass(frozen=True)
class Graph:
    features: np.ndarray
    adjacency: np.ndarray
    label: int | None = None

    def __post_init__(self):
        # Copy so freezing the invariant-checked arrays never aliases caller data.
        x = np.array(self.features, dtype=np.float64, order="C")
        a = np.array(self.adjacency, dtype=np.float64, order="C")
        if x.ndim != 2:
            raise ValidationError(f"features must be a 2-d matrix, got shape {x.shape}")
        n = x.shape[0]
        if a.shape != (n, n):
            raise ValidationError(f"adjacency shape {a.shape} does not match {n} nodes")
        if not np.array_equal(a, a.T):
            raise ValidationError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0.0):
            raise ValidationError("adjacency must have a zero diagonal")
        if a.min() < 0.0 or a.max() > 1.0:
            raise ValidationError("adjacency entries must lie in [0, 1]")
        x.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "adjacency", a)
        if self.label is not None:
            object.__setattr__(self, "label", int(self.label))

    @property
    def num_nodes(self):
        return self.features.shape[0]

    @property
    def feature_dim(self):
        return self.features.shape[1]

    def edge_list(self):
        """Undirected edges as sorted (u, v) pairs with u < v."""
        u, v = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(u.tolist(), v.tolist()))

    @property
    def num_edges(self):
        return len(self.edge_list())


def graphs_equal(a, b):
    return (
        a.label == b.label
        and np.array_equal(a.features, b.features)
        and np.array_equal(a.adjacency, b.adjacency)
    )


@dataclass(frozen=True)
class GraphDataset:
    graphs: tuple
    num_classes: int
    feature_dim: int
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        if not self.graphs:
            raise ValidationError("dataset contains no graphs")
        for i, g in enumerate(self.graphs):
            if g.feature_dim != self.feature_dim:
                raise ValidationError(
                    f"graph {i} has feature dim {g.feature_dim}, expected {self.feature_dim}"
                )
            if g.label is not None and not 0 <= g.label < self.num_classes:
                raise ValidationError(
                    f"graph {i} label {g.label} outside [0, {self.num_classes})"
                )

    def __len__(self):
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]

    def labels(self):
        return [g.label for g in self.graphs]

    def subset(self, indices, name=None):
        return GraphDataset(
            tuple(self.graphs[i] for i in indices),
            num_classes=self.num_classes,
            feature_dim=self.feature_dim,
            name=self.name if name is None else name,
        )


@dataclass(frozen=True)
class PerturbationSpec:
    ratio: float
    mode: str
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0:
            raise ParameterError(f"perturbation ratio must be in [0, 1], got {self.ratio}")
        if self.mode not in ("remove", "add"):
            raise ParameterError(f"perturbation mode must be 'remove' or 'add', got {self.mode!r}")


@dataclass(frozen=True)
class NuisanceTag:
    """Oracle-only marker for a task-irrelevant component of synthetic data.

    Tags name what the generator injected independently of the label (noise
    feature dimensions, spurious edges) so verification code can measure
    how much of it a learned representation retains.
    """

    kind: str  # "feature-dims" or "edges"
    indices: tuple = ()
    description: str = ""

    def __post_init__(self):
        if self.kind not in ("feature-dims", "edges"):
            raise ParameterError(f"unknown nuisance kind {self.kind!r}")


def synth_nuisance_tags(signal_dims, feature_dim, noise_edges_ratio):
    """Nuisance components of a synth_two_class dataset, by construction."""
    tags = [
        NuisanceTag(
            kind="feature-dims",
            indices=tuple(range(signal_dims, feature_dim)),
            description="pure-noise feature dimensions, independent of the label",
        )
    ]
    if noise_edges_ratio > 0:
        tags.append(
            NuisanceTag(
                kind="edges",
                description=f"{noise_edges_ratio:.0%} spurious popularity-biased edges",
            )
        )
    return tags


# -- file format ----------------------------------------------------------


def _graph_to_record(g):
    edges = g.edge_list()
    rec = {
        "n": g.num_nodes,
        "x": g.features.tolist(),
        "edges": [[u, v] for u, v in edges],
    }
    weights = [float(g.adjacency[u, v]) for u, v in edges]
    if any(w != 1.0 for w in weights):
        rec["w"] = weights
    if g.label is not None:
        rec["y"] = g.label
    return rec


def _record_to_graph(rec, lineno):
    def fail(msg):
        raise DatasetFormatError(f"line {lineno}: {msg}")

    if not isinstance(rec, dict):
        fail("record is not a JSON object")
    for key in ("n", "x", "edges"):
        if key not in rec:
            fail(f"missing field {key!r}")
    n = rec["n"]
    if not isinstance(n, int) or n < 1:
        fail(f"'n' must be a positive integer, got {n!r}")
    x = np.asarray(rec["x"], dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != n:
        fail(f"'x' must be an {n}-row matrix")
    a = np.zeros((n, n))
    weights = rec.get("w")
    if weights is not None and len(weights) != len(rec["edges"]):
        fail("'w' length does not match 'edges'")
    for k, edge in enumerate(rec["edges"]):
        if not (isinstance(edge, list) and len(edge) == 2):
            fail(f"edge {k} is not a [u, v] pair")
        u, v = edge
        if not (isinstance(u, int) and isinstance(v, int) and 0 <= u < v < n):
            fail(f"edge {k} = {edge} violates 0 <= u < v < n")
        w = 1.0 if weights is None else float(weights[k])
        if not 0.0 <= w <= 1.0:
            fail(f"edge {k} weight {w} outside [0, 1]")
        a[u, v] = a[v, u] = w
    y = rec.get("y")
    if y is not None and not isinstance(y, int):
        fail(f"'y' must be an integer, got {y!r}")
    try:
        return Graph(features=x, adjacency=a, label=y)
    except ValidationError as err:
        fail(str(err))


def save_dataset(dataset, path):
    with open(path, "w", encoding="utf-8") as fh:
        for g in dataset:
            fh.write(json.dumps(_graph_to_record(g), separators=(",", ":")))
            fh.write("\n")


def load_dataset(path, name=None):
    graphs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as err:
                raise DatasetFormatError(f"line {lineno}: invalid JSON ({err.msg})") from err
            graphs.append(_record_to_graph(rec, lineno))
    if not graphs:
        raise DatasetFormatError(f"{path}: empty dataset")
    dims = {g.feature_dim for g in graphs}
    if len(dims) != 1:
        raise ValidationError(f"mixed feature dims in dataset: {sorted(dims)}")
    labels = [g.label for g in graphs if g.label is not None]
    num_classes = (max(labels) + 1) if labels else 0
    return GraphDataset(
        tuple(graphs),
        num_classes=num_classes,
        feature_dim=dims.pop(),
        name=name or str(path),
    )


# -- synthetic two-class datasets -----------------------------------------


def _sbm_adjacency(rng, n, blocks, p_in, p_out, first_block=None, activity_sd=0.0):
    """Degree-corrected stochastic block model, symmetric 0/1 adjacency.

    Every node gets a lognormal activity level (mean one); the probability
    of an edge is the block rate scaled by both endpoint activities, which
    produces the heavy-tailed degree profile of social graphs. first_block
    pins the size of community 0; the rest split evenly.
    """
    if first_block is None:
        sizes = [n // blocks + (1 if i < n % blocks else 0) for i in range(blocks)]
    else:
        first_block = min(first_block, n - blocks + 1)
        rest = n - first_block
        k = blocks - 1
        sizes = [first_block] + [rest // k + (1 if i < rest % k else 0) for i in range(k)]
    membership = np.repeat(np.arange(blocks), sizes)
    if activity_sd > 0.0:
        activity = rng.lognormal(mean=-0.5 * activity_sd**2, sigma=activity_sd, size=n)
    else:
        activity = np.ones(n)
    a = np.zeros((n, n))
    for u in range(n):
        for v in range(u + 1, n):
            p = p_in if membership[u] == membership[v] else p_out
            if rng.random() < min(p * activity[u] * activity[v], 0.95):
                a[u, v] = a[v, u] = 1.0
    return a, membership


def _add_noise_edges(rng, a, ratio):
    """Insert floor(ratio * |E|) spurious edges, biased toward high-degree
    endpoints (popular-node noise, the regime of social graphs)."""
    n = a.shape[0]
    iu, iv = np.triu_indices(n, k=1)
    present = a[iu, iv] > 0
    k = int(np.floor(ratio * int(present.sum())))
    absent = np.flatnonzero(~present)
    if k == 0 or absent.size == 0:
        return a
    deg = a.sum(axis=1)
    weight = (deg[iu[absent]] + 1.0) * (deg[iv[absent]] + 1.0)
    weight = weight / weight.sum()
    pick = rng.choice(absent, size=min(k, absent.size), replace=False, p=weight)
    a = a.copy()
    a[iu[pick], iv[pick]] = 1.0
    a[iv[pick], iu[pick]] = 1.0
    return a


def synth_two_class(
    n_graphs,
    nodes_per_graph,
    signal_dims,
    noise_edges_ratio,
    seed,
    feature_dim=8,
    separation=1.0,
    noise_scale=2.0,
    noise_offset_scale=1.5,
    distinct_structure=True,
    name="synth-two-class",
):
    """Balanced two-class dataset with signal in features and block structure.

    Class 0 graphs use a two-community block model and class 1 graphs a
    three-community one (unless distinct_structure is False, in which case
    both classes share the two-community layout). The class signal lives on
    the first community's nodes: their first ``signal_dims`` feature
    dimensions are shifted by +-separation/2 per class, so the graph-level
    mean of the signal dimensions separates the classes while propagation
    over corrupted structure dilutes it. All remaining dimensions are pure
    label-independent noise: per-node draws with deviation ``noise_scale``
    plus a per-graph offset with deviation ``noise_offset_scale`` (a
    memorizable fingerprint that pooling cannot average away). Finally,
    ``noise_edges_ratio`` of the existing edges are added back as spurious
    edges at random positions.
    """
    if n_graphs < 2 or nodes_per_graph < 2:
        raise ParameterError("need at least 2 graphs and 2 nodes per graph")
    if feature_dim < 1 or not 0 <= signal_dims <= feature_dim:
        raise ParameterError(
            f"signal_dims must be in [0, feature_dim], got {signal_dims}/{feature_dim}"
        )
    if not 0.0 <= noise_edges_ratio <= 1.0:
        raise ParameterError(f"noise_edges_ratio must be in [0, 1], got {noise_edges_ratio}")
    rng = np.random.default_rng(seed)
    carriers = max(2, int(round(0.3 * nodes_per_graph)))
    graphs = []
    for i in range(n_graphs):
        y = i % 2
        x = rng.normal(0.0, 1.0, size=(nodes_per_graph, feature_dim))
        x[:, signal_dims:] *= noise_scale
        x[:, signal_dims:] += rng.normal(0.0, noise_offset_scale, size=feature_dim - signal_dims)
        if y == 1 and distinct_structure:
            a, membership = _sbm_adjacency(
                rng, nodes_per_graph, blocks=3, p_in=0.5, p_out=0.08, first_block=carriers
            )
        else:
            a, membership = _sbm_adjacency(
                rng, nodes_per_graph, blocks=2, p_in=0.5, p_out=0.06, first_block=carriers
            )
        shift = (separation / 2.0) if y == 1 else (-separation / 2.0)
        x[membership == 0, :signal_dims] += shift
        a = _add_noise_edges(rng, a, noise_edges_ratio)
        graphs.append(Graph(features=x, adjacency=a, label=y))
    return GraphDataset(tuple(graphs), num_classes=2, feature_dim=feature_dim, name=name)


# -- edge perturbation ----------------------------------------------------


def perturb_edges(g, spec):
    """Remove or add floor(ratio * |E|) undirected edges, uniformly at random.

    Node count, features, label and symmetry are always preserved. In add
    mode the insertion count is capped at the number of absent slots; hitting
    the cap (including a complete input graph) raises a warning and inserts
    what fits.
    """
    if not isinstance(spec, PerturbationSpec):
        spec = PerturbationSpec(**spec)
    rng = np.random.default_rng(spec.seed)
    n = g.num_nodes
    iu, iv = np.triu_indices(n, k=1)
    present = g.adjacency[iu, iv] > 0
    n_edges = int(present.sum())
    k = int(np.floor(spec.ratio * n_edges))
    a = np.array(g.adjacency)
    if spec.mode == "remove":
        pool = np.flatnonzero(present)
        if k > 0 and pool.size:
            pick = rng.choice(pool, size=k, replace=False)
            a[iu[pick], iv[pick]] = 0.0
            a[iv[pick], iu[pick]] = 0.0
    else:
        pool = np.flatnonzero(~present)
        if k > pool.size:
            warnings.warn(
                f"add mode wanted {k} edges but only {pool.size} slots are absent",
                stacklevel=2,
            )
            k = pool.size
        if k > 0:
            pick = rng.choice(pool, size=k, replace=False)
            a[iu[pick], iv[pick]] = 1.0
            a[iv[pick], iu[pick]] = 1.0
    return Graph(features=g.features, adjacency=a, label=g.label)


def perturb_dataset(dataset, ratio, mode, seed):
    """Apply perturb_edges per graph with per-graph derived seeds."""
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**31 - 1, size=len(dataset))
    graphs = tuple(
        perturb_edges(g, PerturbationSpec(ratio=ratio, mode=mode, seed=int(s)))
        for g, s in zip(dataset, seeds)
    )
    return GraphDataset(
        graphs,
        num_classes=dataset.num_classes,
        feature_dim=dataset.feature_dim,
        name=f"{dataset.name}|{mode}:{ratio}",
    )
