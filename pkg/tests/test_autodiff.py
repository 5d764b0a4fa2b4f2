import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gradinn import autodiff as ad

finite = st.floats(-3, 3, allow_nan=False)


def d(graph, out, x):
    return ad.gradient(graph, out, [x])[x]


class TestLeaves:
    @pytest.mark.parametrize("v", [0.0, 1.5, -2.25])
    def test_leaf_value(self, v):
        g = ad.Graph()
        assert ad.var(g, v).value == v

    def test_graphs_are_independent(self):
        a, b = ad.Graph(), ad.Graph()
        x, y = a.var(1.0), b.var(2.0)
        assert x.graph is a and y.graph is b
        with pytest.raises(ad.GraphError):
            x + y

    def test_arity_mismatch(self):
        g = ad.Graph()
        with pytest.raises(ad.GraphError):
            g.apply("mul", [g.var(1.0)])


class TestPrimitives:
    def test_sigmoid_at_zero(self):
        assert ad.sigmoid(ad.Graph().var(0.0)).value == 0.5

    def test_mul(self):
        g = ad.Graph()
        assert (g.var(3.0) * g.var(4.0)).value == 12.0

    def test_sin_zero(self):
        assert ad.sin(ad.Graph().var(0.0)).value == 0.0

    def test_helpers_accept_floats(self):
        assert ad.exp(0.0) == 1.0
        assert ad.square(3.0) == 9.0
        assert ad.pow_int(2.0, 3) == 8.0

    def test_unknown_op(self):
        g = ad.Graph()
        with pytest.raises(ad.GraphError):
            g.apply("tanh", [g.var(1.0)])

    def test_division_by_zero(self):
        g = ad.Graph()
        with pytest.raises(ad.EvaluationError):
            g.var(1.0) / g.var(0.0)

    @given(finite, finite)
    def test_operator_values_match_floats(self, a, b):
        g = ad.Graph()
        x, y = g.vars([a, b])
        assert (x + y).value == a + b
        assert (x - y).value == a - b
        assert (x * y).value == a * b
        assert (-x).value == -a
        assert ad.cos(x).value == pytest.approx(math.cos(a))


class TestGradient:
    def test_square(self):
        g = ad.Graph()
        x = g.var(3.0)
        assert d(g, x * x, x).value == 6.0

    def test_second_derivative_of_cube(self):
        g = ad.Graph()
        x = g.var(2.0)
        assert d(g, d(g, x * x * x, x), x).value == pytest.approx(12.0)

    def test_sigmoid_slope(self):
        g = ad.Graph()
        x = g.var(0.0)
        assert d(g, ad.sigmoid(x), x).value == 0.25

    def test_unreached_input_gives_zero(self):
        g = ad.Graph()
        x, y = g.vars([1.0, 2.0])
        assert ad.gradient(g, x * x, [y])[y].value == 0.0

    def test_gradient_nodes_live_on_the_graph(self):
        g = ad.Graph()
        x = g.var(1.3)
        before = g.next_id
        gx = d(g, ad.sin(x), x)
        assert gx.graph is g and g.next_id > before

    def test_foreign_output_rejected(self):
        g, h = ad.Graph(), ad.Graph()
        x = g.var(1.0)
        with pytest.raises(ad.GraphError):
            ad.gradient(h, x * x, [x])

    @given(finite, finite)
    def test_mixed_partials_commute(self, a, b):
        g = ad.Graph()
        x, y = g.vars([a, b])
        f = ad.sin(x * y) + ad.exp(0.3 * x) * ad.sigmoid(y)
        grads = ad.gradient(g, f, [x, y])
        fxy = d(g, grads[x], y).value
        fyx = d(g, grads[y], x).value
        assert fxy == pytest.approx(fyx, abs=1e-12)

    @given(finite, finite, st.floats(-2, 2), st.floats(-2, 2))
    def test_linearity(self, a, b, ca, cb):
        g = ad.Graph()
        x, y = g.vars([a, b])
        f, h = ad.sin(x) * y, ad.sigmoid(x + y)
        combo = ad.gradient(g, f * ca + h * cb, [x, y])
        gf, gh = ad.gradient(g, f, [x, y]), ad.gradient(g, h, [x, y])
        for v in (x, y):
            assert combo[v].value == pytest.approx(ca * gf[v].value + cb * gh[v].value, abs=1e-12)

    def test_third_order_against_closed_form(self):
        # f = t * sigmoid(t x); compare d/dt f_xx with differences of the closed form
        def fxx(x0, t0):
            s = 1 / (1 + math.exp(-t0 * x0))
            return t0**3 * s * (1 - s) * (1 - 2 * s)

        x0, t0, h = 0.4, 1.3, 1e-5
        g = ad.Graph()
        x, t = g.vars([x0, t0])
        f = t * ad.sigmoid(t * x)
        third = d(g, d(g, d(g, f, x), x), t).value
        fd = (fxx(x0, t0 + h) - fxx(x0, t0 - h)) / (2 * h)
        assert abs(third - fd) / abs(fd) < 1e-5


class TestFiniteDifferenceCheck:
    def test_sum_of_squares(self):
        err = ad.finite_difference_check(lambda v: v[0] * v[0] + v[1] * v[1] + v[2] * v[2], [1, 2, 3])
        assert np.all(err < 1e-6)

    def test_constant(self):
        err = ad.finite_difference_check(lambda v: v[0] * 0.0 + 4.0, [0.7])
        assert np.all(err == 0.0)

    def test_sin_at_stationary_point(self):
        assert ad.finite_difference_check(lambda v: ad.sin(v[0]), [math.pi / 2])[0] < 1e-6

    def test_bad_step(self):
        with pytest.raises(ValueError):
            ad.finite_difference_check(lambda v: v[0], [1.0], h=0.0)

    @pytest.mark.parametrize(
        "fn",
        [
            lambda v: v[0] / v[1],
            lambda v: ad.pow_int(v[0], 4) - v[1],
            lambda v: ad.exp(v[0]) * ad.cos(v[1]),
            lambda v: ad.sigmoid(v[0] * v[1]),
        ],
    )
    @given(a=st.floats(0.3, 2.0), b=st.floats(0.3, 2.0))
    def test_primitives_first_order(self, fn, a, b):
        err = ad.finite_difference_check(fn, [a, b])
        assert np.all(err < 1e-6)


def test_docstring_example():
    import doctest

    assert doctest.testmod(ad).failed == 0
