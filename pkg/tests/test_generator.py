"""Feature masking, edge scoring, concrete relaxation, sparsification."""

import numpy as np
import pytest

import ibgraph.autodiff as ad
import ibgraph.generator as gen
from ibgraph.autodiff import Tape, backward, parameter, tensor
from ibgraph.errors import ParameterError
from ibgraph.gradcheck import finite_difference, max_mismatch
from ibgraph.graphs import Graph, synth_two_class


def _zero_struct(d, hidden=2, out=1, **kw):
    return gen.StructureLearnerParams(
        w1=parameter(np.zeros((d, hidden))),
        b1=parameter(np.zeros(hidden)),
        w2=parameter(np.zeros((hidden, out))),
        b2=parameter(np.zeros(out)),
        **kw,
    )


def _assert_ibgraph_invariants(ibg, threshold):
    a = ibg.a_ib.data
    assert np.array_equal(a, a.T)
    assert np.all(np.diag(a) == 0.0)
    assert a.min() >= 0.0 and a.max() <= 1.0
    off = a[~np.eye(a.shape[0], dtype=bool)]
    assert np.all((off == 0.0) | (off >= threshold))


class TestFeatureMask:
    def test_wide_open_mask_returns_x(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(4, 3))
        x_r = rng.normal(size=(4, 3))
        params = gen.init_feature_mask(3, init_logit=500.0)  # sigmoid saturates at 1
        out = gen.mask_features(tensor(x), params, tensor(x_r), train_mode=True)
        np.testing.assert_allclose(out.data, x, rtol=0, atol=1e-12)

    def test_closed_mask_returns_x_r(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(4, 3))
        x_r = rng.normal(size=(4, 3))
        params = gen.init_feature_mask(3, init_logit=-500.0)
        out = gen.mask_features(tensor(x), params, tensor(x_r), train_mode=True)
        np.testing.assert_array_equal(out.data, x_r)

    def test_half_open_single_dim(self):
        params = gen.init_feature_mask(1, init_logit=0.0)  # sigmoid(0) = 0.5
        out = gen.mask_features(tensor([[2.0]]), params, tensor([[0.0]]), train_mode=True)
        np.testing.assert_array_equal(out.data, [[1.0]])

    def test_eval_mode_binarizes_at_half(self):
        params = gen.init_feature_mask(2)
        params.mask_logits.data[:] = [0.2, -0.2]  # sigmoid: ~0.55, ~0.45
        x = np.array([[1.0, 1.0]])
        x_r = np.array([[9.0, 9.0]])
        out = gen.mask_features(tensor(x), params, tensor(x_r), train_mode=False)
        np.testing.assert_array_equal(out.data, [[1.0, 9.0]])

    def test_gradient_reaches_mask_logits(self):
        rng = np.random.default_rng(2)
        x, x_r = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
        params = gen.init_feature_mask(3, init_logit=0.3)
        with Tape():
            out = gen.mask_features(tensor(x), params, tensor(x_r), train_mode=True)
            backward(ad.sum(ad.multiply(out, out)))
        analytic = params.mask_logits.grad.copy()

        def f(v):
            with Tape():
                p = gen.FeatureMaskParams(mask_logits=tensor(v))
                out = gen.mask_features(tensor(x), p, tensor(x_r), train_mode=True)
                return ad.sum(ad.multiply(out, out)).item()

        numeric = finite_difference(f, np.full(3, 0.3))
        assert max_mismatch(analytic, numeric) < 1e-3


class TestEdgeProbabilities:
    def test_zero_network_gives_half_everywhere_off_diagonal(self):
        x = tensor(np.random.default_rng(0).normal(size=(4, 3)))
        pi = gen.edge_probabilities(x, _zero_struct(3))
        off = ~np.eye(4, dtype=bool)
        np.testing.assert_array_equal(pi.data[off], np.full(12, 0.5))
        assert np.all(np.diag(pi.data) == 0.0)

    def test_strong_embeddings_saturate(self):
        # Bias-only network puts z(u) = z(v) = [10]; sigmoid(100) ~ 1.
        params = _zero_struct(2, hidden=1, out=1)
        params.b2.data[:] = 10.0
        pi = gen.edge_probabilities(tensor(np.zeros((2, 2))), params)
        assert pi.data[0, 1] > 0.9999

    def test_symmetric_for_random_inputs(self):
        rng = np.random.default_rng(3)
        params = gen.init_structure_learner(rng, 4, 8, 5)
        pi = gen.edge_probabilities(tensor(rng.normal(size=(6, 4))), params)
        np.testing.assert_allclose(pi.data, pi.data.T, atol=1e-12)
        assert np.all((pi.data >= 0.0) & (pi.data < 1.0))


class TestConcreteSample:
    def test_neutral_point_is_half_for_any_temperature(self):
        pi = tensor(np.array([[0.0, 0.5], [0.5, 0.0]]))
        eps = np.full((2, 2), 0.5)
        for t in (0.05, 0.1, 1.0, 10.0):
            out = gen.concrete_sample(pi, t, eps, train_mode=True)
            assert out.data[0, 1] == pytest.approx(0.5, abs=1e-12)

    def test_cold_temperature_saturates(self):
        pi = tensor(np.array([[0.0, 0.9], [0.9, 0.0]]))
        out = gen.concrete_sample(pi, 0.1, np.full((2, 2), 0.5), train_mode=True)
        # sigmoid(10 ln 9) = 1 / (1 + 9^-10)
        expected = 1.0 / (1.0 + 9.0 ** -10)
        assert out.data[0, 1] == pytest.approx(expected, rel=1e-9)
        assert out.data[0, 1] > 0.9999

    def test_monotone_in_pi_for_fixed_noise(self):
        grid = np.linspace(0.05, 0.95, 19)
        for eps_val in (0.2, 0.5, 0.8):
            outs = []
            for p in grid:
                pi = tensor(np.array([[0.0, p], [p, 0.0]]))
                out = gen.concrete_sample(pi, 0.3, np.full((2, 2), eps_val), True)
                outs.append(out.data[0, 1])
            assert np.all(np.diff(outs) > 0)

    def test_hard_rounded_samples_match_bernoulli_rate(self):
        # One big call: every undirected pair is an independent draw.
        n = 460  # > 1e5 pairs
        rng = np.random.default_rng(12)
        iu = np.triu_indices(n, k=1)
        for p in (0.1, 0.5, 0.9):
            pi = tensor(np.full((n, n), p) * (1.0 - np.eye(n)))
            eps = gen.sample_uniform_symmetric(rng, n)
            with ad.no_grad():
                out = gen.concrete_sample(pi, 0.1, eps, train_mode=True)
            rate = float((out.data[iu] > 0.5).mean())
            assert rate == pytest.approx(p, abs=0.01)

    def test_eval_mode_expected_returns_pi(self):
        rng = np.random.default_rng(5)
        params = gen.init_structure_learner(rng, 3, 4, 3)
        pi = gen.edge_probabilities(tensor(rng.normal(size=(5, 3))), params)
        out = gen.concrete_sample(pi, 0.1, None, train_mode=False)
        np.testing.assert_array_equal(out.data, pi.data)

    def test_eval_mode_hard_rounds(self):
        pi = tensor(np.array([[0.0, 0.7, 0.2], [0.7, 0.0, 0.5], [0.2, 0.5, 0.0]]))
        out = gen.concrete_sample(pi, 0.1, None, train_mode=False, eval_mode="hard")
        np.testing.assert_array_equal(out.data, [[0, 1, 0], [1, 0, 1], [0, 1, 0]])

    def test_temperature_must_be_positive(self):
        pi = tensor(np.zeros((2, 2)))
        with pytest.raises(ParameterError):
            gen.concrete_sample(pi, 0.0, np.full((2, 2), 0.5), True)


class TestSparsify:
    def test_zero_threshold_keeps_symmetrized_input(self):
        rng = np.random.default_rng(6)
        a = rng.uniform(0, 1, size=(4, 4))
        np.fill_diagonal(a, 0.0)
        out = gen.sparsify(tensor(a), 0.0)
        np.testing.assert_allclose(out.data, 0.5 * (a + a.T), atol=1e-15)

    def test_threshold_above_one_zeroes_everything(self):
        rng = np.random.default_rng(7)
        a = rng.uniform(0, 1, size=(5, 5))
        out = gen.sparsify(tensor(a), 1.0 + 1e-9)
        np.testing.assert_array_equal(out.data, np.zeros((5, 5)))

    def test_mixed_entries(self):
        a = np.array([[0.0, 0.05, 0.5], [0.05, 0.0, 0.05], [0.5, 0.05, 0.0]])
        out = gen.sparsify(tensor(a), 0.1)
        np.testing.assert_array_equal(
            out.data, [[0.0, 0.0, 0.5], [0.0, 0.0, 0.0], [0.5, 0.0, 0.0]]
        )

    def test_negative_threshold_rejected(self):
        with pytest.raises(ParameterError):
            gen.sparsify(tensor(np.zeros((2, 2))), -0.1)

    def test_straight_through_gradient_only_on_survivors(self):
        a = parameter(np.array([[0.0, 0.05, 0.5], [0.05, 0.0, 0.05], [0.5, 0.05, 0.0]]))
        with Tape():
            backward(ad.sum(gen.sparsify(a, 0.1)))
        assert a.grad[0, 2] > 0 and a.grad[0, 1] == 0.0


class TestGenerate:
    def _setup(self, seed=0, n=6, d=4, **struct_kw):
        rng = np.random.default_rng(seed)
        ds = synth_two_class(2, n, 2, 0.2, seed=seed, feature_dim=d)
        mask = gen.init_feature_mask(d, init_logit=0.4)
        struct = gen.init_structure_learner(rng, d, 8, 4, **struct_kw)
        return ds[0], mask, struct

    def test_identity_composition_yields_near_complete_graph(self):
        g, mask, _ = self._setup()
        mask.mask_logits.data[:] = 500.0
        struct = _zero_struct(4, hidden=1, out=1, temperature=0.1, threshold=0.0)
        struct.b2.data[:] = 10.0  # pi ~ 1 everywhere
        rng = np.random.default_rng(1)
        ibg = gen.generate(g, mask, struct, rng, train_mode=False)
        off = ~np.eye(g.num_nodes, dtype=bool)
        assert np.all(ibg.a_ib.data[off] > 0.999)
        np.testing.assert_allclose(ibg.x_ib.data, g.features, atol=1e-12)

    def test_reference_settings_satisfy_invariants(self):
        g, mask, struct = self._setup(temperature=0.1, threshold=0.1)
        ibg = gen.generate(g, mask, struct, np.random.default_rng(3), train_mode=True)
        _assert_ibgraph_invariants(ibg, threshold=0.1)
        assert ibg.edge_probs is not None

    def test_fixed_rng_is_deterministic(self):
        g, mask, struct = self._setup()
        a = gen.generate(g, mask, struct, np.random.default_rng(9), True)
        b = gen.generate(g, mask, struct, np.random.default_rng(9), True)
        assert np.array_equal(a.a_ib.data, b.a_ib.data)
        assert np.array_equal(a.x_ib.data, b.x_ib.data)

    def test_output_is_independent_of_input_adjacency(self):
        g, mask, struct = self._setup(n=7)
        other_a = np.zeros_like(g.adjacency)
        other_a[0, 1] = other_a[1, 0] = 1.0
        g2 = Graph(features=g.features, adjacency=other_a, label=g.label)
        out1 = gen.generate(g, mask, struct, np.random.default_rng(4), True)
        out2 = gen.generate(g2, mask, struct, np.random.default_rng(4), True)
        assert np.array_equal(out1.a_ib.data, out2.a_ib.data)
        assert np.array_equal(out1.x_ib.data, out2.x_ib.data)

    def test_adjacency_gradient_matches_finite_differences(self):
        g, mask, struct = self._setup(seed=2, threshold=0.05, temperature=0.5)
        noise = np.random.default_rng(21)
        eps = gen.sample_uniform_symmetric(noise, g.num_nodes)
        x = tensor(g.features)
        x_r = tensor(g.features[::-1].copy())

        def loss_from(params):
            x_ib = gen.mask_features(x, mask, x_r, True)
            pi = gen.edge_probabilities(x_ib, params)
            relaxed = gen.concrete_sample(pi, params.temperature, eps, True)
            return ad.sum(gen.sparsify(relaxed, params.threshold))

        with Tape():
            sym = loss_from(struct)
            backward(sym)
        analytic = struct.w2.grad.copy()
        w0 = struct.w2.data.copy()

        def f(v):
            with Tape():
                p = gen.StructureLearnerParams(
                    w1=tensor(struct.w1.data), b1=tensor(struct.b1.data),
                    w2=tensor(v), b2=tensor(struct.b2.data),
                    temperature=struct.temperature, threshold=struct.threshold,
                )
                return loss_from(p).item()

        numeric = finite_difference(f, w0)
        assert max_mismatch(analytic, numeric) < 1e-3


class TestExport:
    def test_jsonl_record_carries_weights(self):
        g, = synth_two_class(2, 5, 2, 0.2, seed=0, feature_dim=3).graphs[:1]
        mask = gen.init_feature_mask(3)
        struct = gen.init_structure_learner(np.random.default_rng(0), 3, 4, 3)
        ibg = gen.generate(g, mask, struct, np.random.default_rng(0), train_mode=False)
        rec = gen.ibgraph_to_record(ibg)
        assert rec["n"] == 5
        assert len(rec["w"]) == len(rec["edges"])
        assert all(0 < w <= 1 for w in rec["w"])

    def test_dot_output_lists_positive_edges(self):
        a = np.array([[0.0, 0.8], [0.8, 0.0]])
        dot = gen.to_dot(a, name="t")
        assert "graph t" in dot
        assert "0 -- 1" in dot and "0.8000" in dot
