"""Training loop determinism, cross-validation, sweeps, and timing probes."""

import numpy as np
import pytest

from ibgraph.errors import ParameterError, TrainingError, ValidationError
from ibgraph.graphs import Graph, GraphDataset, synth_two_class
from ibgraph.harness import (
    TrainConfig,
    beta_sweep,
    cross_validate,
    denoise_experiment,
    fit_power_law,
    stratified_folds,
    timing_probe,
    train,
)

TINY = dict(bottleneck=4, struct_hidden=4, struct_out=4,
            encoder_hidden=8, classifier_hidden=4)


def _dataset(n=12, seed=0, **kw):
    return synth_two_class(n, 8, 2, 0.2, seed=seed, feature_dim=4,
                           separation=5.0, **kw)


class TestTrain:
    def test_learns_separable_data(self):
        ds = _dataset(n=30)
        cfg = TrainConfig(epochs=50, beta=1e-3, seed=1, **TINY)
        _, report = train(ds, cfg)
        assert report.epoch_logs[0][-1].train_accuracy > 0.95

    def test_beta_zero_total_equals_ce_every_epoch(self):
        ds = _dataset()
        cfg = TrainConfig(epochs=3, beta=0.0, seed=2, **TINY)
        _, report = train(ds, cfg)
        for log in report.epoch_logs[0]:
            assert log.total == log.ce

    def test_logged_identity_total_ce_kl(self):
        ds = _dataset()
        cfg = TrainConfig(epochs=3, beta=0.05, seed=3, **TINY)
        _, report = train(ds, cfg)
        for log in report.epoch_logs[0]:
            assert log.total == log.ce + 0.05 * log.kl

    def test_same_seed_reproduces_logs_exactly(self):
        ds = _dataset()
        cfg = TrainConfig(epochs=3, seed=4, **TINY)
        _, rep_a = train(ds, cfg)
        _, rep_b = train(ds, cfg)
        assert rep_a.epoch_logs == rep_b.epoch_logs

    def test_plain_model_trains_without_generator(self):
        ds = _dataset()
        cfg = TrainConfig(epochs=3, model="plain", seed=5, **TINY)
        model, report = train(ds, cfg)
        assert model.mask is None and model.struct is None
        for log in report.epoch_logs[0]:
            assert log.kl >= 0.0 and log.total == log.ce

    def test_non_finite_loss_aborts_with_diagnostic(self):
        x = np.full((3, 4), 1e200)
        a = np.zeros((3, 3))
        g = Graph(features=x, adjacency=a, label=0)
        ds = GraphDataset((g, g), num_classes=1, feature_dim=4)
        cfg = TrainConfig(epochs=1, seed=6, **TINY)
        with pytest.raises(TrainingError, match="non-finite"):
            train(ds, cfg)

    def test_empty_or_unlabeled_dataset_rejected(self):
        g = Graph(features=np.zeros((2, 4)), adjacency=np.zeros((2, 2)))
        ds = GraphDataset((g,), num_classes=0, feature_dim=4)
        with pytest.raises(ValidationError):
            train(ds, TrainConfig(epochs=1, **TINY))


class TestCrossValidation:
    def test_two_folds_partition_four_graphs(self):
        labels = [0, 1, 0, 1]
        folds = stratified_folds(labels, 2, np.random.default_rng(0))
        assert sorted(folds[0] + folds[1]) == [0, 1, 2, 3]
        assert not set(folds[0]) & set(folds[1])
        for fold in folds:
            assert sorted(labels[i] for i in fold) == [0, 1]

    def test_small_class_falls_back_with_warning(self):
        labels = [0, 0, 0, 0, 1]
        with pytest.warns(UserWarning, match="stratified"):
            folds = stratified_folds(labels, 2, np.random.default_rng(1))
        assert sorted(folds[0] + folds[1]) == [0, 1, 2, 3, 4]

    def test_more_folds_than_graphs_rejected(self):
        with pytest.raises(ParameterError):
            stratified_folds([0, 1], 3, np.random.default_rng(0))

    def test_report_mean_matches_fold_list(self):
        ds = _dataset(n=12)
        cfg = TrainConfig(epochs=2, folds=3, seed=7, **TINY)
        report = cross_validate(ds, cfg)
        assert len(report.fold_accuracies) == 3
        assert report.mean_accuracy == pytest.approx(
            float(np.mean(report.fold_accuracies)), abs=1e-12
        )
        assert report.std_accuracy == pytest.approx(
            float(np.std(report.fold_accuracies)), abs=1e-12
        )

    def test_default_protocol_is_ten_fold(self):
        assert TrainConfig().folds == 10


class TestBetaSweep:
    def test_single_element_sweep_equals_cross_validate(self):
        ds = _dataset(n=12)
        cfg = TrainConfig(epochs=2, folds=2, beta=1e-3, seed=8, **TINY)
        sweep = beta_sweep(ds, cfg, [1e-3])
        direct = cross_validate(ds, cfg)
        assert sweep[0].fold_accuracies == direct.fold_accuracies
        assert sweep[0].epoch_logs == direct.epoch_logs

    def test_betas_share_folds_and_seeds(self):
        ds = _dataset(n=12)
        cfg = TrainConfig(epochs=2, folds=2, seed=9, **TINY)
        a, b = beta_sweep(ds, cfg, [0.0, 0.0])
        assert a.fold_accuracies == b.fold_accuracies

    def test_empty_grid_rejected(self):
        with pytest.raises(ParameterError):
            beta_sweep(_dataset(), TrainConfig(**TINY), [])


class TestDenoise:
    def test_ratio_zero_cell_matches_clean_run_for_both_modes(self):
        ds = _dataset(n=12)
        cfg = TrainConfig(epochs=2, folds=3, seed=10, **TINY)
        res = denoise_experiment(ds, cfg, ratios=[0.0], modes=("remove", "add"), runs=2)
        assert res[("remove", 0.0)].fold_accuracies == res[("add", 0.0)].fold_accuracies

    def test_runs_dimension(self):
        ds = _dataset(n=12)
        cfg = TrainConfig(epochs=1, folds=3, seed=11, **TINY)
        res = denoise_experiment(ds, cfg, ratios=[0.0, 0.5], runs=2)
        assert set(res) == {("remove", 0.0), ("remove", 0.5)}
        assert all(len(rep.fold_accuracies) == 2 for rep in res.values())


class TestTiming:
    def test_probe_runs_and_reports_positive_times(self):
        cfg = TrainConfig(epochs=1, seed=12, **TINY)
        measured = timing_probe(cfg, [6, 12], steps=2, warmup=1)
        assert [n for n, _ in measured] == [6, 12]
        assert all(t > 0 for _, t in measured)

    def test_single_node_graph_runs(self):
        cfg = TrainConfig(epochs=1, seed=13, **TINY)
        measured = timing_probe(cfg, [1], steps=1, warmup=0)
        assert measured[0][0] == 1

    def test_sizes_must_ascend(self):
        with pytest.raises(ParameterError):
            timing_probe(TrainConfig(**TINY), [16, 8], steps=1)

    def test_power_law_fit_recovers_exponent(self):
        sizes = [16, 32, 64, 128]
        times = [(n, 2e-6 * n**2) for n in sizes]
        c, p = fit_power_law(times)
        assert p == pytest.approx(2.0, abs=1e-9)
        assert c == pytest.approx(2e-6, rel=1e-9)
