"""Parity between the numpy kernels and the compiled extension."""

import numpy as np
import pytest

from ibgraph import _pykernels, kernels

compiled = pytest.mark.skipif(
    "compiled" not in kernels.available(), reason="compiled kernels not built"
)


def _ck():
    import ibgraph._ckernels as _ckernels

    return _ckernels


RTOL = 1e-12
ATOL = 1e-13


@compiled
class TestKernelParity:
    rng = np.random.default_rng(77)

    def _cmp(self, name, *args, **kwargs):
        got_py = getattr(_pykernels, name)(*[np.copy(a) if isinstance(a, np.ndarray) else a for a in args], **kwargs)
        got_c = getattr(_ck(), name)(*[np.copy(a) if isinstance(a, np.ndarray) else a for a in args], **kwargs)
        np.testing.assert_allclose(got_c, got_py, rtol=RTOL, atol=ATOL)

    def test_matmul_family(self):
        a = self.rng.normal(size=(7, 5))
        b = self.rng.normal(size=(5, 6))
        self._cmp("matmul", a, b)
        self._cmp("matmul_nt", a, self.rng.normal(size=(9, 5)))
        self._cmp("matmul_tn", self.rng.normal(size=(5, 7)), self.rng.normal(size=(5, 6)))

    @pytest.mark.parametrize("name", ["ew_add", "ew_sub", "ew_mul", "ew_div"])
    def test_binary_elementwise(self, name):
        a = self.rng.normal(size=(4, 6))
        b = self.rng.normal(size=(4, 6)) + 3.0
        self._cmp(name, a, b)

    @pytest.mark.parametrize("name", ["ew_neg", "relu", "sigmoid", "softplus", "exp"])
    def test_unary_elementwise(self, name):
        self._cmp(name, self.rng.normal(size=(5, 5)) * 3)

    def test_unary_on_scalars_and_vectors(self):
        for shape in ((), (7,)):
            self._cmp("sigmoid", self.rng.normal(size=shape))
            self._cmp("softplus", self.rng.normal(size=shape))

    def test_log_and_power(self):
        a = np.abs(self.rng.normal(size=(4, 4))) + 0.2
        self._cmp("log", a)
        self._cmp("power", a, -0.5)
        self._cmp("power_grad", self.rng.normal(size=(4, 4)), a, -0.5)

    def test_scalar_ops(self):
        a = self.rng.normal(size=(3, 3))
        self._cmp("scal_add", a, 1.25)
        self._cmp("scal_mul", a, -0.75)

    def test_grad_kernels(self):
        g = self.rng.normal(size=(4, 4))
        a = self.rng.normal(size=(4, 4))
        s = _pykernels.sigmoid(a)
        self._cmp("relu_grad", g, a)
        self._cmp("sigmoid_grad", g, s)
        self._cmp("softplus_grad", g, a)
        self._cmp("clamp_grad", g, a, -1.0, 1.0)

    def test_clamp(self):
        self._cmp("clamp", self.rng.normal(size=(4, 4)) * 2, -1.0, 1.0)

    def test_reductions(self):
        a = self.rng.normal(size=(6, 4))
        assert np.isclose(_ck().sum_all(a), _pykernels.sum_all(a), rtol=RTOL)
        assert np.isclose(_ck().mean_all(a), _pykernels.mean_all(a), rtol=RTOL)
        for axis in (0, 1):
            self._cmp("sum_axis", a, axis)
            self._cmp("mean_axis", a, axis)

    def test_broadcasts(self):
        v = self.rng.normal(size=5)
        self._cmp("bcast_rows", v, 4)
        self._cmp("bcast_cols", v, 3)
        x = self.rng.normal(size=(4, 5))
        self._cmp("rowvec_add", x, v)
        self._cmp("rowvec_mul", x, v)

    def test_softmax_xent(self):
        logits = self.rng.normal(size=6) * 5
        for y in (0, 3, 5):
            lp, pp = _pykernels.softmax_xent(logits, y)
            lc, pc = _ck().softmax_xent(logits, y)
            assert np.isclose(lc, lp, rtol=RTOL)
            np.testing.assert_allclose(pc, pp, rtol=RTOL, atol=ATOL)

    def test_adam_step_parity(self):
        p0 = self.rng.normal(size=8)
        g = self.rng.normal(size=8)
        buffers = {}
        for name, mod in (("python", _pykernels), ("compiled", _ck())):
            p, m, v = p0.copy(), np.zeros(8), np.zeros(8)
            for step in range(1, 4):
                mod.adam_step(p, g, m, v, step, 1e-3, 0.9, 0.999, 1e-8)
            buffers[name] = (p, m, v)
        for a, b in zip(buffers["python"], buffers["compiled"]):
            np.testing.assert_allclose(a, b, rtol=RTOL, atol=ATOL)


@compiled
def test_backend_switch_is_reversible():
    before = kernels.backend_name()
    kernels.use("python")
    assert kernels.backend_name() == "python"
    kernels.use("compiled")
    assert kernels.backend_name() == "compiled"
    kernels.use(before)


def test_unknown_backend_rejected():
    from ibgraph.errors import ParameterError

    with pytest.raises(ParameterError):
        kernels.use("cuda")
