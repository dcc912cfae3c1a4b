"""Exact entropies, mutual information, and the variational bound checks."""

import math

import numpy as np
import pytest

import ibgraph.infotheory as it
from ibgraph.errors import ContractError, ValidationError


def _joint(table, names=None):
    table = np.asarray(table, dtype=np.float64)
    names = names or tuple(f"v{i}" for i in range(table.ndim))
    return it.DiscreteJoint(names=tuple(names), table=table)


class TestEntropy:
    def test_uniform_binary_is_ln2(self):
        j = _joint([0.5, 0.5], names=("X",))
        assert it.entropy(j, "X") == pytest.approx(math.log(2.0), rel=1e-14)

    def test_deterministic_is_zero(self):
        j = _joint([1.0, 0.0, 0.0], names=("X",))
        assert it.entropy(j, "X") == 0.0

    def test_quarter_three_quarters(self):
        j = _joint([0.25, 0.75], names=("X",))
        assert it.entropy(j, "X") == pytest.approx(0.5623351446188083, abs=1e-12)

    def test_unknown_variable_rejected(self):
        with pytest.raises(ContractError):
            it.entropy(_joint([0.5, 0.5], names=("X",)), "Y")


class TestMutualInformation:
    def test_independent_product_is_zero(self):
        px = np.array([0.3, 0.7])
        py = np.array([0.2, 0.5, 0.3])
        j = _joint(np.outer(px, py), names=("X", "Y"))
        assert it.mutual_information(j, "X", "Y") == pytest.approx(0.0, abs=1e-14)

    def test_copy_channel_recovers_entropy(self):
        j = _joint(np.eye(2) * 0.5, names=("X", "Y"))
        assert it.mutual_information(j, "X", "Y") == pytest.approx(math.log(2.0), rel=1e-14)

    def test_matches_definitional_sum(self):
        rng = np.random.default_rng(0)
        t = rng.gamma(1.0, size=(3, 3))
        t /= t.sum()
        j = _joint(t, names=("A", "B"))
        pa, pb = t.sum(axis=1), t.sum(axis=0)
        brute = sum(
            t[a, b] * math.log(t[a, b] / (pa[a] * pb[b]))
            for a in range(3)
            for b in range(3)
            if t[a, b] > 0
        )
        assert it.mutual_information(j, "A", "B") == pytest.approx(brute, rel=1e-12)

    def test_overlapping_sets_rejected(self):
        j = _joint(np.full((2, 2), 0.25), names=("A", "B"))
        with pytest.raises(ContractError):
            it.mutual_information(j, ("A", "B"), "B")

    def test_invalid_table_rejected(self):
        with pytest.raises(ValidationError):
            _joint([0.5, 0.6], names=("X",))


class TestMarkovChain:
    def test_deterministic_channels_supported_on_function_graph(self):
        p_y = [0.5, 0.5]
        p_n = [1.0]
        chain_g = np.zeros((2, 1, 2))
        chain_g[0, 0, 0] = chain_g[1, 0, 1] = 1.0  # g = y
        chain_z = np.eye(2)  # z = g
        j = it.build_markov_chain(p_y, p_n, chain_g, chain_z)
        nz = np.argwhere(j.table > 0)
        assert len(nz) == 2
        for y, n, g, z in nz:
            assert y == g == z

    def test_label_marginal_is_recovered(self):
        rng = np.random.default_rng(1)
        p_y = np.array([0.2, 0.3, 0.5])
        p_n = np.array([0.6, 0.4])
        cg = rng.gamma(1.0, size=(3, 2, 4))
        cg /= cg.sum(axis=-1, keepdims=True)
        cz = rng.gamma(1.0, size=(4, 3))
        cz /= cz.sum(axis=-1, keepdims=True)
        j = it.build_markov_chain(p_y, p_n, cg, cz)
        np.testing.assert_allclose(j.marginal("Y"), p_y, atol=1e-15)

    def test_non_stochastic_channel_rejected(self):
        with pytest.raises(ValidationError):
            it.build_markov_chain([1.0], [1.0], np.full((1, 1, 2), 0.4), np.eye(2))

    def test_data_processing_inequality_holds_on_random_chains(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            j, _, _, _ = it.random_instance(rng)
            upstream = it.mutual_information(j, "Z", ("Y", "N"))
            downstream = it.mutual_information(j, "Z", "G")
            assert upstream <= downstream + it.SLACK


class TestNuisanceBound:
    def test_constant_summary_gives_zero_both_sides(self):
        p_y = [0.5, 0.5]
        p_n = [0.3, 0.7]
        rng = np.random.default_rng(3)
        cg = rng.gamma(1.0, size=(2, 2, 3))
        cg /= cg.sum(axis=-1, keepdims=True)
        cz = np.full((3, 2), 0.5)  # Z independent of G
        res = it.check_lemma1(it.build_markov_chain(p_y, p_n, cg, cz))
        assert res.holds
        assert res.lhs == pytest.approx(0.0, abs=1e-12)
        assert res.rhs == pytest.approx(0.0, abs=1e-12)

    def test_bijective_chain_achieves_equality(self):
        # g enumerates (y, n); z copies g. Both sides equal H(N).
        p_y = [0.5, 0.5]
        p_n = [0.25, 0.75]
        cg = np.zeros((2, 2, 4))
        for y in range(2):
            for n in range(2):
                cg[y, n, 2 * y + n] = 1.0
        j = it.build_markov_chain(p_y, p_n, cg, np.eye(4))
        res = it.check_lemma1(j)
        h_n = it.entropy(j, "N")
        assert res.holds and res.tight
        assert res.lhs == pytest.approx(h_n, rel=1e-12)
        assert res.rhs == pytest.approx(h_n, rel=1e-12)

    def test_holds_on_random_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            j, _, _, _ = it.random_instance(rng)
            assert it.check_lemma1(j).holds


class TestVariationalBounds:
    def test_true_posterior_achieves_equality(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            j, _, _, _ = it.random_instance(rng)
            res = it.check_prediction_bound(j, it.true_posterior(j))
            assert res.tight, (res.lhs, res.rhs)

    def test_uniform_classifier_adds_kl_gap(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            j, _, _, _ = it.random_instance(rng)
            ny = j.table.shape[0]
            nz = j.table.shape[3]
            res = it.check_prediction_bound(j, np.full((nz, ny), 1.0 / ny))
            assert res.holds and res.rhs >= res.lhs - it.SLACK

    def test_zero_entry_on_support_reports_infinite_bound(self):
        j = _joint(np.eye(2) * 0.5, names=("Y", "Z"))
        full = it.build_markov_chain(
            [0.5, 0.5], [1.0],
            np.eye(2).reshape(2, 1, 2), np.eye(2),
        )
        q = np.array([[1.0, 0.0], [1.0, 0.0]])  # q(y=1|z) = 0 on support
        res = it.check_prediction_bound(full, q)
        assert res.holds and math.isinf(res.rhs)

    def test_true_marginal_achieves_equality(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            j, _, _, _ = it.random_instance(rng)
            res = it.check_compression_bound(j, it.true_marginal(j))
            assert res.tight, (res.lhs, res.rhs)

    def test_uniform_prior_bound_exceeds_mi(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            j, _, _, _ = it.random_instance(rng)
            nz = j.table.shape[3]
            res = it.check_compression_bound(j, np.full(nz, 1.0 / nz))
            assert res.holds

    def test_randomized_bounds_hold(self):
        rng = np.random.default_rng(9)
        for _ in range(1000):
            j, q, r, beta = it.random_instance(rng)
            assert it.check_prediction_bound(j, q).holds
            assert it.check_compression_bound(j, r).holds
            assert it.check_combined_bound(j, q, r, beta).holds

    def test_verify_bounds_summary_is_clean(self):
        summary = it.verify_bounds(instances=200, seed=11)
        assert summary["failures"] == 0
        assert summary["max_violation"] <= 1e-10
        assert set(summary["checks"]) == {
            "nuisance", "prediction", "compression", "combined",
            "tightness", "data_processing",
        }


class TestGaussianQuantization:
    def test_converges_to_closed_form(self):
        for mu, sigma in ((1.0, 1.0), (0.5, 0.7), (-1.5, 2.0)):
            closed = it.gaussian_kl_closed_form(mu, sigma)
            quant = it.gaussian_kl_quantized(mu, sigma, bins=512)
            assert quant == pytest.approx(closed, rel=0.02)

    def test_quantization_from_below(self):
        # Coarsening is a data processing step, so the discrete KL cannot
        # exceed the continuous one.
        closed = it.gaussian_kl_closed_form(0.8, 1.4)
        for bins in (16, 64, 512):
            assert it.gaussian_kl_quantized(0.8, 1.4, bins=bins) <= closed + 1e-12
