import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gradinn import autodiff as ad
from gradinn import losses as L
from gradinn import network as nw
from gradinn.problems import friedman as fr


def const_params(spec, c=0.0):
    """Zero weights and zero biases except a constant output bias ``c``."""
    p = nw.init_glorot(spec, 0)
    weights = [np.zeros_like(W) for W in p.weights]
    biases = [np.zeros_like(b) for b in p.biases]
    biases[-1] = np.full_like(biases[-1], c)
    return nw.MlpParams(weights, biases)


def bound(params, g):
    return nw.bind(params, g)


class TestDataLoss:
    def test_exact_predictions(self):
        spec = nw.MlpSpec(1, 1, (2,))
        g = ad.Graph()
        assert L.loss_data(bound(const_params(spec, 1.5), g), spec, g, [[0.0], [1.0]], [[1.5], [1.5]]).value == 0.0

    def test_single_sample(self):
        spec = nw.MlpSpec(1, 1, (2,))
        g = ad.Graph()
        assert L.loss_data(bound(const_params(spec, 2.0), g), spec, g, [[0.3]], [[0.0]]).value == 4.0

    def test_two_outputs(self):
        spec = nw.MlpSpec(1, 2, (2,))
        g = ad.Graph()
        out = L.loss_data(bound(const_params(spec, 0.0), g), spec, g, [[0.0], [1.0]], [[1.0, 0.0], [0.0, 1.0]])
        assert out.value == 1.0

    def test_empty_batch(self):
        spec = nw.MlpSpec(1, 1, (2,))
        g = ad.Graph()
        with pytest.raises(ValueError):
            L.loss_data(bound(const_params(spec), g), spec, g, np.zeros((0, 1)), np.zeros((0, 1)))


class TestGradientMatch:
    def test_zero_when_both_vanish(self):
        su, sf = nw.MlpSpec(2, 1, (3,)), nw.MlpSpec(2, 2, (3,))
        g = ad.Graph()
        v = L.loss_gradient_match(bound(const_params(su, 0.7), g), su, bound(const_params(sf), g), sf, g, [[0.1, 0.2]])
        assert v.value == 0.0

    def test_constant_prior(self):
        c = 0.8
        su, sf = nw.MlpSpec(1, 1, (3,)), nw.MlpSpec(1, 1, (3,))
        g = ad.Graph()
        Xc = np.linspace(-1, 1, 7)[:, None]
        v = L.loss_gradient_match(bound(const_params(su), g), su, bound(const_params(sf, c), g), sf, g, Xc)
        assert v.value == pytest.approx(c**2, rel=1e-15)

    def test_prior_gradient_matches_finite_differences(self):
        su, sf = nw.MlpSpec(1, 1, (3,)), nw.MlpSpec(1, 1, (4,))
        pu, pf = nw.init_scaled(su, 1, 1.5), nw.init_scaled(sf, 2, 1.5)
        Xc = np.array([[-0.5], [0.3], [1.1]])

        def loss_at(pf_):
            g = ad.Graph()
            return L.loss_gradient_match(bound(pu, g), su, bound(pf_, g), sf, g, Xc)

        g = ad.Graph()
        bf = bound(pf, g)
        out = L.loss_gradient_match(bound(pu, g), su, bf, sf, g, Xc)
        leaves = bf.leaves()
        grads = ad.gradient(g, out, leaves)
        h = 1e-6
        flat = [(li, idx) for li, W in enumerate(pf.weights) for idx in np.ndindex(W.shape)]
        for k, (li, idx) in enumerate(flat[:6]):
            plus, minus = pf.copy(), pf.copy()
            plus.weights[li][idx] += h
            minus.weights[li][idx] -= h
            fd = (loss_at(plus).value - loss_at(minus).value) / (2 * h)
            an = grads[bf.weights[li][idx[0]][idx[1]]].value
            assert abs(an - fd) / max(abs(an), 1e-8) < 1e-5

    @given(st.permutations(list(range(6))))
    def test_order_invariant(self, perm):
        su, sf = nw.MlpSpec(2, 1, (3,)), nw.MlpSpec(2, 2, (3,))
        pu, pf = nw.init_scaled(su, 1, 1.5), nw.init_scaled(sf, 2, 1.5)
        Xc = np.random.default_rng(0).uniform(-1, 1, (6, 2))
        mask = jnp.ones(6)
        a = L.batch_gradient_match(pu.tree(), pf.tree(), jnp.asarray(Xc), mask)
        b = L.batch_gradient_match(pu.tree(), pf.tree(), jnp.asarray(Xc[list(perm)]), mask)
        assert float(a) == pytest.approx(float(b), rel=1e-14)


class TestHessianMatch:
    def test_zero(self):
        su, sg = nw.MlpSpec(2, 1, (3,)), nw.MlpSpec(2, 4, (3,))
        g = ad.Graph()
        assert L.loss_hessian_match(bound(const_params(su), g), su, bound(const_params(sg), g), sg, g, [[0.0, 1.0]]).value == 0.0

    def test_constant_prior_two_inputs(self):
        c = 0.6
        su, sg = nw.MlpSpec(2, 1, (3,)), nw.MlpSpec(2, 4, (3,))
        g = ad.Graph()
        Xc = np.random.default_rng(1).uniform(-1, 1, (5, 2))
        v = L.loss_hessian_match(bound(const_params(su), g), su, bound(const_params(sg, c), g), sg, g, Xc)
        assert v.value == pytest.approx(4 * c**2, rel=1e-15)

    @given(st.permutations(list(range(5))))
    def test_order_invariant(self, perm):
        su, sg = nw.MlpSpec(2, 1, (3,)), nw.MlpSpec(2, 4, (3,))
        pu, pg = nw.init_scaled(su, 1, 1.5), nw.init_scaled(sg, 2, 1.5)
        Xc = np.random.default_rng(0).uniform(-1, 1, (5, 2))
        m = jnp.ones(5)
        a = L.batch_hessian_match(pu.tree(), pg.tree(), jnp.asarray(Xc), m)
        b = L.batch_hessian_match(pu.tree(), pg.tree(), jnp.asarray(Xc[list(perm)]), m)
        assert float(a) == pytest.approx(float(b), rel=1e-14)


class TestConsistency:
    def test_zero(self):
        sf, sg = nw.MlpSpec(1, 1, (3,)), nw.MlpSpec(1, 1, (3,))
        g = ad.Graph()
        assert L.loss_consistency(bound(const_params(sf, 2.0), g), sf, bound(const_params(sg), g), sg, g, [[0.5]]).value == 0.0

    def test_constant_prior(self):
        c = 1.25
        sf, sg = nw.MlpSpec(1, 1, (3,)), nw.MlpSpec(1, 1, (3,))
        g = ad.Graph()
        v = L.loss_consistency(bound(const_params(sf), g), sf, bound(const_params(sg, c), g), sg, g, [[0.0], [2.0]])
        assert v.value == pytest.approx(c**2, rel=1e-15)


class TestSobolev:
    def test_exact(self):
        spec = nw.MlpSpec(1, 1, (2,))
        g = ad.Graph()
        assert L.loss_sobolev(bound(const_params(spec, 3.0), g), spec, g, [[1.0]], [[3.0]], [[[0.0]]]).value == 0.0

    def test_friedman_origin(self):
        spec = nw.MlpSpec(5, 1, (3,))
        x = np.zeros((1, 5))
        y = fr.friedman_eval(x).reshape(1, 1)
        dy = fr.friedman_grad(x).reshape(1, 1, 5)
        g = ad.Graph()
        assert L.loss_sobolev(bound(const_params(spec), g), spec, g, x, y, dy).value == pytest.approx(550.0, rel=1e-14)


class TestPenalty:
    def spec_params(self):
        return nw.MlpParams([np.array([[1.0]]), np.array([[-2.0]])], [np.array([0.3]), np.array([0.9])])

    @pytest.mark.parametrize("l1,l2,expected", [(0, 0, 0.0), (0.5, 0, 1.5), (0, 0.1, 0.5)])
    def test_values(self, l1, l2, expected):
        g = ad.Graph()
        assert L.penalty(bound(self.spec_params(), g), g, l1, l2).value == pytest.approx(expected)
        assert float(L.batch_penalty(self.spec_params().tree(), l1, l2)) == pytest.approx(expected)


class TestConfig:
    def test_enabled(self):
        assert L.LossConfig().enabled == ("l_u",)
        assert L.LossConfig(use_F=True, use_G=True, use_consistency=True).enabled == ("l_u", "l_f", "l_g", "l_gf")

    @pytest.mark.parametrize("kw", [dict(use_G=True), dict(use_F=True, use_consistency=True), dict(l1=-1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            L.LossConfig(**kw)

    def test_compose(self):
        terms = dict(l_u=1.0, l_f=2.0, l_g=4.0, l_gf=8.0)
        assert L.compose(L.LossConfig(), terms).total == 1.0
        assert L.compose(L.LossConfig(use_F=True), terms).total == 3.0
        assert L.compose(L.LossConfig(use_F=True, use_G=True), terms).total == 7.0
        assert L.compose(L.LossConfig(use_F=True, use_G=True, use_consistency=True), terms).total == 15.0

    def test_compose_requires_enabled_terms(self):
        with pytest.raises(ValueError):
            L.compose(L.LossConfig(use_F=True), {"l_u": 1.0})

    def test_weights(self):
        cfg = L.LossConfig(use_F=True, weight_U=2.0, weight_F=0.5)
        assert L.compose(cfg, dict(l_u=1.0, l_f=4.0)).total == 4.0

    def test_without_collocation(self):
        cfg = L.LossConfig(use_F=True, use_G=True, l2=0.1)
        assert cfg.without_collocation() == L.LossConfig(l2=0.1)


def test_graph_and_batch_routes_agree():
    su, sf, sg = nw.MlpSpec(2, 1, (4,)), nw.MlpSpec(2, 2, (3,)), nw.MlpSpec(2, 4, (3,))
    pu, pf, pg = nw.init_scaled(su, 3, 1.5), nw.init_scaled(sf, 4, 1.5), nw.init_scaled(sg, 5, 1.5)
    X = np.random.default_rng(2).uniform(-1, 1, (4, 2))
    Y = np.random.default_rng(3).normal(size=(4, 1))
    g = ad.Graph()
    bu, bf, bg = bound(pu, g), bound(pf, g), bound(pg, g)
    m = jnp.ones(4)
    pairs = [
        (L.loss_data(bu, su, g, X, Y), L.batch_data(pu.tree(), X, Y, m)),
        (L.loss_gradient_match(bu, su, bf, sf, g, X), L.batch_gradient_match(pu.tree(), pf.tree(), X, m)),
        (L.loss_hessian_match(bu, su, bg, sg, g, X), L.batch_hessian_match(pu.tree(), pg.tree(), X, m)),
        (L.loss_consistency(bf, sf, bg, sg, g, X), L.batch_consistency(pf.tree(), pg.tree(), X, m)),
    ]
    for graph_value, batch_value in pairs:
        assert graph_value.value == pytest.approx(float(batch_value), rel=1e-12)


def test_mask_drops_padding():
    spec = nw.MlpSpec(1, 1, (2,))
    p = const_params(spec, 1.0)
    X = jnp.array([[0.0], [1.0], [2.0]])
    Y = jnp.array([[1.0], [3.0], [100.0]])
    assert float(L.batch_data(p.tree(), X, Y, jnp.array([1.0, 1.0, 0.0]))) == pytest.approx(2.0)
