"""Training loop, cross-validation, beta sweeps, denoising runs, timing.

Every run is a pure function of its configuration seed: all noise streams
(init, shuffling, per-sample draws, evaluation draws, fold assignment)
derive from ``config.seed`` plus fixed integer tags, so repeating a run
reproduces its metrics bit for bit.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import encoder as enc
from . import generator as gen
from . import objective as obj
from .autodiff import Tape, backward, no_grad
from .errors import ParameterError, TrainingError, ValidationError
from .graphs import Graph, perturb_dataset
from .optim import Adam

# rng stream tags
_INIT, _SHUFFLE, _SAMPLE, _EVAL, _FOLDS, _PERTURB, _TIMING = 1, 2, 3, 4, 5, 6, 7


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    lr: float = 1e-3
    beta: float = 1e-3
    bottleneck: int = 16
    temperature: float = 0.1
    threshold: float = 0.1
    temperature_m: float = 1.0
    backbone: str = "gcn"
    folds: int = 10
    seed: int = 0
    eval_adjacency: str = "expected"
    model: str = "vib"  # "vib" or "plain" (backbone on the raw graph)
    batch_size: int = 1
    struct_hidden: int = 16
    struct_out: int = 16
    encoder_hidden: int = 32
    encoder_layers: int = 2
    classifier_hidden: int = 16
    gin_eps: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.beta < 0:
            raise ParameterError(f"beta must be non-negative, got {self.beta}")
        if self.bottleneck < 1:
            raise ParameterError(f"bottleneck must be >= 1, got {self.bottleneck}")
        if self.temperature <= 0:
            raise ParameterError(f"temperature must be positive, got {self.temperature}")
        if self.threshold < 0:
            raise ParameterError(f"threshold must be non-negative, got {self.threshold}")
        if self.folds < 2:
            raise ParameterError(f"cross-validation needs folds >= 2, got {self.folds}")
        if self.backbone not in enc.BACKBONES:
            raise ParameterError(f"backbone must be one of {enc.BACKBONES}")
        if self.model not in ("vib", "plain"):
            raise ParameterError(f"model must be 'vib' or 'plain', got {self.model!r}")
        if self.eval_adjacency not in ("expected", "hard"):
            raise ParameterError(f"eval_adjacency must be 'expected' or 'hard'")
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")

    def as_dict(self):
        return asdict(self)


@dataclass
class EpochLog:
    epoch: int
    total: float
    ce: float
    kl: float
    train_accuracy: float
    eval_accuracy: float


@dataclass
class ExperimentReport:
    """Per-fold accuracies plus their mean/std and full epoch logs."""

    config: dict
    fold_accuracies: list
    mean_accuracy: float
    std_accuracy: float
    epoch_logs: list = field(default_factory=list)  # one list of EpochLog per fold
    epoch_seconds: list = field(default_factory=list)  # mean wall clock per fold

    @staticmethod
    def from_folds(config, fold_accuracies, epoch_logs, epoch_seconds):
        accs = [float(a) for a in fold_accuracies]
        return ExperimentReport(
            config=dict(config),
            fold_accuracies=accs,
            mean_accuracy=float(np.mean(accs)),
            std_accuracy=float(np.std(accs)),
            epoch_logs=epoch_logs,
            epoch_seconds=epoch_seconds,
        )

    def metrics_dict(self):
        """Deterministic report payload; wall-clock stays out on purpose."""
        return {
            "config": self.config,
            "fold_accuracies": self.fold_accuracies,
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "final_epoch": [
                {
                    "total": logs[-1].total,
                    "ce": logs[-1].ce,
                    "kl": logs[-1].kl,
                    "train_accuracy": logs[-1].train_accuracy,
                    "eval_accuracy": logs[-1].eval_accuracy,
                }
                for logs in self.epoch_logs
            ],
        }

    def epochs_csv_rows(self):
        rows = [("fold", "epoch", "total", "ce", "kl", "train_accuracy", "eval_accuracy")]
        for fold, logs in enumerate(self.epoch_logs):
            for log in logs:
                rows.append(
                    (fold, log.epoch, repr(log.total), repr(log.ce), repr(log.kl),
                     repr(log.train_accuracy), repr(log.eval_accuracy))
                )
        return rows


@dataclass
class Model:
    kind: str
    mask: gen.FeatureMaskParams | None
    struct: gen.StructureLearnerParams | None
    encoder: enc.EncoderParams
    classifier: obj.ClassifierParams

    def parameters(self):
        params = []
        if self.mask is not None:
            params.extend(self.mask.parameters())
        if self.struct is not None:
            params.extend(self.struct.parameters())
        params.extend(self.encoder.parameters())
        params.extend(self.classifier.parameters())
        return params


def _stream_rng(seed, *tags):
    return np.random.default_rng([int(seed)] + [int(t) for t in tags])


def build_model(config, feature_dim, num_classes, stream=()):
    rng = _stream_rng(config.seed, *stream, _INIT)
    if config.model == "vib":
        # Start with the gate mostly open: a half-open mask replaces half of
        # every feature with empirical noise and eval binarization then
        # coin-flips dimensions.
        mask = gen.init_feature_mask(
            feature_dim, temperature_m=config.temperature_m, init_logit=2.0
        )
        struct = gen.init_structure_learner(
            rng, feature_dim, config.struct_hidden, config.struct_out,
            temperature=config.temperature, threshold=config.threshold,
        )
    else:
        mask = struct = None
    encoder = enc.init_encoder(
        rng, config.backbone, feature_dim, config.encoder_hidden,
        config.bottleneck, num_layers=config.encoder_layers, gin_eps=config.gin_eps,
    )
    classifier = obj.init_classifier(
        rng, config.bottleneck, config.classifier_hidden, num_classes
    )
    return Model(kind=config.model, mask=mask, struct=struct,
                 encoder=encoder, classifier=classifier)


def _forward(model, graph, config, rng, train_mode):
    """One sample's loss breakdown and predicted class."""
    if model.kind == "vib":
        ibg = gen.generate(
            graph, model.mask, model.struct, rng, train_mode,
            eval_adjacency=config.eval_adjacency,
        )
        emb = enc.encode(ibg, model.encoder)
    else:
        emb = enc.encode_xa(graph.features, graph.adjacency, model.encoder)
    if train_mode and model.kind == "vib":
        z = obj.reparameterize(emb, rng.standard_normal(emb.dim))
    else:
        z = emb.mu
    logits = obj.classify(z, model.classifier)
    beta = config.beta if model.kind == "vib" else 0.0
    breakdown = obj.vib_loss(emb, logits, graph.label, beta)
    return breakdown, int(np.argmax(logits.data))


def _first_non_finite(tape):
    for e in tape.entries:
        if not np.all(np.isfinite(e.output.data)):
            return e
    return None


def _evaluate(model, dataset, config, *, stream=()):
    """Deterministic accuracy: hard mask, expected adjacency, z = mu."""
    correct = 0
    with no_grad():
        for gi, graph in enumerate(dataset):
            rng = _stream_rng(config.seed, *stream, _EVAL, gi)
            _, pred = _forward(model, graph, config, rng, train_mode=False)
            correct += int(pred == graph.label)
    return correct / len(dataset)


def train(dataset, config, eval_dataset=None, stream=()):
    """Full training run; logs one line per epoch, deterministic under seed.

    When no eval split is given the training set doubles as one. Aborts
    with a diagnostic naming the first non-finite tensor if the loss leaves
    the reals.
    """
    if len(dataset) == 0:
        raise ValidationError("cannot train on an empty dataset")
    if any(g.label is None for g in dataset):
        raise ValidationError("training needs a label on every graph")
    eval_ds = dataset if eval_dataset is None else eval_dataset
    model = build_model(config, dataset.feature_dim, dataset.num_classes, stream=stream)
    opt = Adam(model.parameters(), lr=config.lr)
    shuffle_rng = _stream_rng(config.seed, *stream, _SHUFFLE)
    logs = []
    seconds = []
    n = len(dataset)
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(n)
        ce_sum = kl_sum = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            with Tape() as tape:
                parts = []
                for gi in batch:
                    rng = _stream_rng(config.seed, *stream, _SAMPLE, epoch, int(gi))
                    breakdown, pred = _forward(model, dataset[int(gi)], config, rng, True)
                    parts.append(breakdown)
                    correct += int(pred == dataset[int(gi)].label)
                    ce_sum += breakdown.ce.item()
                    kl_sum += breakdown.kl.item()
                combined = parts[0] if len(parts) == 1 else obj.combine_losses(parts)
                if not np.isfinite(combined.total.item()):
                    bad = _first_non_finite(tape)
                    where = f"op {bad.op!r} at tape index {bad.index}" if bad else "loss"
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}: first non-finite tensor is {where}"
                    )
                backward(combined.total)
            opt.step()
            opt.zero_grad()
        ce_mean = ce_sum / n
        kl_mean = kl_sum / n
        beta = config.beta if model.kind == "vib" else 0.0
        logs.append(
            EpochLog(
                epoch=epoch,
                total=ce_mean + beta * kl_mean,
                ce=ce_mean,
                kl=kl_mean,
                train_accuracy=correct / n,
                eval_accuracy=_evaluate(model, eval_ds, config, stream=stream),
            )
        )
        seconds.append(time.perf_counter() - t0)
    report = ExperimentReport.from_folds(
        config.as_dict(), [logs[-1].eval_accuracy], [logs], [float(np.mean(seconds))]
    )
    return model, report


# -- cross-validation --------------------------------------------------------


def stratified_folds(labels, folds, rng):
    """Disjoint exhaustive folds, stratified by label where possible."""
    labels = list(labels)
    if folds > len(labels):
        raise ParameterError(f"{folds} folds exceed dataset size {len(labels)}")
    counts = {}
    for y in labels:
        counts[y] = counts.get(y, 0) + 1
    assignments = [[] for _ in range(folds)]
    if min(counts.values()) < folds:
        warnings.warn(
            f"class with {min(counts.values())} members cannot be stratified into "
            f"{folds} folds; falling back to an unstratified split",
            stacklevel=2,
        )
        order = rng.permutation(len(labels))
        for pos, idx in enumerate(order):
            assignments[pos % folds].append(int(idx))
    else:
        for y in sorted(counts):
            members = [i for i, lab in enumerate(labels) if lab == y]
            order = rng.permutation(len(members))
            for pos, j in enumerate(order):
                assignments[pos % folds].append(members[int(j)])
    return [sorted(fold) for fold in assignments]


def cross_validate(dataset, config, folds_indices=None):
    """K-fold evaluation with one fresh model per fold.

    The fold partition depends only on the seed and the labels, so sweeps
    over other hyperparameters share identical folds and model seeds.
    """
    if folds_indices is None:
        rng = _stream_rng(config.seed, _FOLDS)
        folds_indices = stratified_folds(dataset.labels(), config.folds, rng)
    accs, logs, secs = [], [], []
    for fold, test_idx in enumerate(folds_indices):
        test_set = set(test_idx)
        train_idx = [i for i in range(len(dataset)) if i not in test_set]
        _, rep = train(
            dataset.subset(train_idx),
            config,
            eval_dataset=dataset.subset(test_idx),
            stream=(fold,),
        )
        accs.append(rep.fold_accuracies[0])
        logs.append(rep.epoch_logs[0])
        secs.append(rep.epoch_seconds[0])
    return ExperimentReport.from_folds(config.as_dict(), accs, logs, secs)


def beta_sweep(dataset, config, betas):
    """One cross-validation per beta over shared folds and seeds."""
    if not betas:
        raise ParameterError("beta sweep needs at least one beta")
    rng = _stream_rng(config.seed, _FOLDS)
    folds_indices = stratified_folds(dataset.labels(), config.folds, rng)
    return [
        cross_validate(dataset, replace(config, beta=float(b)), folds_indices=folds_indices)
        for b in betas
    ]


def denoise_experiment(dataset, config, ratios, modes=("remove",), runs=5):
    """Train/eval on edge-perturbed copies of the dataset.

    Each (mode, ratio) cell runs ``runs`` independent seeds; every run
    perturbs each graph, splits off one stratified fold as the test set and
    trains on the rest. The perturbation and split seeds do not depend on
    the ratio, so the ratio-0 cell reproduces the clean-data run exactly.
    """
    results = {}
    for mode in modes:
        for ratio in ratios:
            if not 0.0 <= ratio <= 1.0:
                raise ParameterError(f"ratio {ratio} outside [0, 1]")
            accs, logs, secs = [], [], []
            for run in range(runs):
                perturbed = perturb_dataset(
                    dataset, ratio, mode,
                    seed=int(_stream_rng(config.seed, _PERTURB, run).integers(2**31 - 1)),
                )
                fold_rng = _stream_rng(config.seed, _FOLDS, run)
                folds_indices = stratified_folds(perturbed.labels(), config.folds, fold_rng)
                test_idx = folds_indices[0]
                test_set = set(test_idx)
                train_idx = [i for i in range(len(perturbed)) if i not in test_set]
                _, rep = train(
                    perturbed.subset(train_idx),
                    config,
                    eval_dataset=perturbed.subset(test_idx),
                    stream=(run,),
                )
                accs.append(rep.fold_accuracies[0])
                logs.append(rep.epoch_logs[0])
                secs.append(rep.epoch_seconds[0])
            results[(mode, float(ratio))] = ExperimentReport.from_folds(
                config.as_dict(), accs, logs, secs
            )
    return results


# -- complexity probe ---------------------------------------------------------


def _er_graph(rng, n, feature_dim, p=0.3):
    x = rng.normal(size=(n, feature_dim))
    a = np.zeros((n, n))
    if n > 1:
        iu, iv = np.triu_indices(n, k=1)
        hit = rng.random(iu.size) < p
        a[iu[hit], iv[hit]] = 1.0
        a[iv[hit], iu[hit]] = 1.0
    return Graph(features=x, adjacency=a, label=0)


def timing_probe(config, sizes, feature_dim=16, steps=8, warmup=2, repeats=3):
    """Mean forward+backward seconds per training step at each node count.

    Each size is measured ``repeats`` times and the smallest mean is kept,
    which filters scheduler noise out of the scaling fit.
    """
    if list(sizes) != sorted(sizes):
        raise ParameterError("sizes must be ascending")
    results = []
    for n in sizes:
        rng = _stream_rng(config.seed, _TIMING, n)
        graph = _er_graph(rng, int(n), feature_dim)
        model = build_model(config, feature_dim, 2)

        def run_block(count):
            t0 = time.perf_counter()
            for _ in range(count):
                with Tape():
                    breakdown, _ = _forward(model, graph, config, rng, True)
                    backward(breakdown.total)
            return (time.perf_counter() - t0) / count

        run_block(max(warmup, 1))
        results.append((int(n), min(run_block(steps) for _ in range(repeats))))
    return results


def fit_power_law(sizes_and_times):
    """Least-squares fit of t = c * n^p in log space; returns (c, p)."""
    ns = np.array([n for n, _ in sizes_and_times], dtype=np.float64)
    ts = np.array([t for _, t in sizes_and_times], dtype=np.float64)
    if np.any(ts <= 0):
        raise ValidationError("timings must be positive")
    slope, intercept = np.polyfit(np.log(ns), np.log(ts), 1)
    return float(np.exp(intercept)), float(slope)
