import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microdp import GradientSet, l2_norm, linear_combine


def grad(**layers):
    return GradientSet({k: np.asarray(v, dtype=float) for k, v in layers.items()})


class TestL2Norm:
    def test_zero_gradient(self):
        assert l2_norm(grad(w=[0.0, 0.0, 0.0])) == 0.0

    def test_three_four_five(self):
        assert l2_norm(grad(w=[3.0, 4.0])) == 5.0

    def test_global_across_layers(self):
        assert l2_norm(grad(a=[3.0], b=[4.0])) == 5.0

    def test_empty_errors(self):
        with pytest.raises(ValueError, match="empty-gradient"):
            l2_norm(GradientSet({}))


class TestLinearCombine:
    def test_identity(self):
        g = grad(w=[1.0, -2.0], b=[0.5])
        out = linear_combine([(1.0, g)])
        assert (out["w"] == g["w"]).all() and (out["b"] == g["b"]).all()

    def test_convex_combination_of_equal_terms(self):
        g = grad(w=[1.0, -2.0], b=[0.5])
        out = linear_combine([(0.5, g), (0.5, g)])
        assert out.allclose(g, rtol=0.0, atol=0.0)

    def test_cancellation(self):
        g = grad(w=[1.0, -2.0], b=[0.5])
        out = linear_combine([(1.0, g), (-1.0, g)])
        assert (out["w"] == 0.0).all() and (out["b"] == 0.0).all()

    def test_layer_id_mismatch(self):
        with pytest.raises(ValueError, match="shape-mismatch"):
            linear_combine([(1.0, grad(w=[1.0])), (1.0, grad(b=[1.0]))])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="shape-mismatch"):
            linear_combine([(1.0, grad(w=[1.0])), (1.0, grad(w=[1.0, 2.0]))])

    def test_empty_terms(self):
        with pytest.raises(ValueError, match="empty-combination"):
            linear_combine([])

    def test_deterministic_across_calls(self):
        rng = np.random.default_rng(0)
        terms = [
            (float(rng.normal()), grad(w=rng.normal(size=17), b=rng.normal(size=3)))
            for _ in range(5)
        ]
        a = linear_combine(terms)
        b = linear_combine(terms)
        assert (a["w"] == b["w"]).all() and (a["b"] == b["b"]).all()


class TestInvariants:
    # Magnitudes are kept clear of the regime where squaring underflows.
    _scalar = st.floats(-1e6, 1e6).filter(lambda x: x == 0.0 or abs(x) > 1e-6)

    @given(
        coeff=_scalar,
        values=st.lists(_scalar, min_size=1, max_size=20),
    )
    @settings(max_examples=200, deadline=None)
    def test_norm_is_absolutely_homogeneous(self, coeff, values):
        g = grad(w=values)
        scaled = linear_combine([(coeff, g)])
        expected = abs(coeff) * l2_norm(g)
        assert l2_norm(scaled) == pytest.approx(expected, rel=1e-12, abs=1e-300)

    def test_results_stay_finite(self):
        rng = np.random.default_rng(1)
        g = grad(w=rng.normal(size=100) * 1e150)
        out = linear_combine([(0.5, g), (0.5, g)])
        assert np.isfinite(out["w"]).all()

    def test_layer_order_is_stable(self):
        g = grad(b=[1.0], a=[2.0], c=[3.0])
        assert g.layer_ids() == ("b", "a", "c")
        assert linear_combine([(2.0, g)]).layer_ids() == ("b", "a", "c")

    def test_arrays_are_read_only(self):
        g = grad(w=[1.0, 2.0])
        with pytest.raises(ValueError):
            g["w"][0] = 9.0
