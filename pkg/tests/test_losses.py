import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conceptdetect.gradcheck import loss_gradient_error
from conceptdetect.losses import (
    EPSILON,
    LOSS_KINDS,
    LossSpec,
    bce,
    one_minus_soft_f1,
    product_loss,
    soft_f1_components,
    sum_loss,
)
from conceptdetect.metrics import sample_f1

LN2 = math.log(2.0)


def random_batch(rng, b=5, k=12, lo=0.02, hi=0.98):
    y = (rng.random((b, k)) < 0.3).astype(np.float64)
    p = rng.uniform(lo, hi, size=(b, k))
    return y, p


class TestBCE:
    def test_confident_correct(self, backend):
        assert bce([[1.0]], [[1 - EPSILON]], backend=backend).value == pytest.approx(0.0, abs=2e-7)

    def test_half(self, backend):
        assert bce([[1.0]], [[0.5]], backend=backend).value == pytest.approx(0.693147, abs=1e-6)

    def test_gradient_fd(self, rng, backend):
        for _ in range(10):
            assert loss_gradient_error("bce", *random_batch(rng), backend=backend) < 1e-4

    def test_clamped_coordinates_have_zero_gradient(self, backend):
        out = bce([[1.0, 0.0, 1.0]], [[0.0, 1.0, 0.5]], backend=backend)
        assert out.gradient[0, 0] == 0.0 and out.gradient[0, 1] == 0.0
        assert np.isfinite(out.value) and out.gradient[0, 2] != 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            bce([[1, 0]], [[0.5, 0.5, 0.5]])


class TestSoftF1Components:
    def test_exact_prediction(self, backend):
        tp, fp, fn, p, r, f1 = soft_f1_components([[1, 0]], [[1.0, 0.0]], backend=backend)
        assert (tp[0], fp[0], fn[0]) == (1.0, 0.0, 0.0)
        assert f1[0] == pytest.approx(1.0, abs=2 * EPSILON)

    def test_half_scores(self, backend):
        tp, fp, fn, p, r, f1 = soft_f1_components([[1, 0, 0]], [[0.5, 0.5, 0.0]], backend=backend)
        assert (tp[0], fp[0], fn[0]) == (0.5, 0.5, 0.5)
        assert p[0] == pytest.approx(0.5, abs=1e-6) and r[0] == pytest.approx(0.5, abs=1e-6)
        assert f1[0] == pytest.approx(0.5, abs=1e-6)

    def test_degenerate_row(self, backend):
        tp, fp, fn, p, r, f1 = soft_f1_components([[0, 0]], [[0.3, 0.3]], backend=backend)
        assert (tp[0], fn[0]) == (0.0, 0.0)
        assert fp[0] == pytest.approx(0.6)
        assert (p[0], r[0], f1[0]) == (0.0, 0.0, 0.0)

    def test_nan_guard(self, backend):
        *_, f1 = soft_f1_components([[1, 0], [1, 0]], [[np.nan, 0.2], [0.9, 0.1]], backend=backend)
        assert f1[0] == 0.0 and f1[1] > 0.0
        out = one_minus_soft_f1([[1, 0], [1, 0]], [[np.nan, 0.2], [0.9, 0.1]], backend=backend)
        assert np.isfinite(out.value)
        assert np.all(out.gradient[0] == 0.0)


class TestOneMinusSoftF1:
    def test_perfect(self, backend):
        assert one_minus_soft_f1([[1, 0, 1]], [[1.0, 0.0, 1.0]], backend=backend).value <= 2 * EPSILON

    def test_hand_value(self, backend):
        assert one_minus_soft_f1([[1, 0, 0]], [[0.5, 0.5, 0.0]], backend=backend).value == pytest.approx(0.5, abs=1e-6)

    def test_gradient_fd(self, rng, backend):
        for _ in range(10):
            assert loss_gradient_error("one_minus_soft_f1", *random_batch(rng), backend=backend) < 1e-4

    def test_monotone_in_positive_score(self, backend):
        values = [one_minus_soft_f1([[1, 0, 0]], [[s, 0.2, 0.1]], backend=backend).value
                  for s in np.linspace(0.01, 0.99, 50)]
        assert all(b < a for a, b in zip(values, values[1:]))


class TestCombined:
    def test_product_hand_value(self, backend):
        out = product_loss([[1, 0]], [[0.5, 0.5]], backend=backend)
        assert out.value == pytest.approx(0.5 * LN2, abs=1e-4)
        assert out.value == pytest.approx(0.34657, abs=1e-4)

    def test_sum_hand_value(self, backend):
        assert sum_loss([[1, 0]], [[0.5, 0.5]], backend=backend).value == pytest.approx(1.193147, abs=1e-4)

    @pytest.mark.parametrize("fn", [product_loss, sum_loss])
    def test_perfect(self, fn, backend):
        assert fn([[1, 0]], [[1 - EPSILON, EPSILON]], backend=backend).value == pytest.approx(0.0, abs=1e-6)

    @pytest.mark.parametrize("kind", ["product", "sum"])
    def test_gradient_fd(self, kind, rng, backend):
        for _ in range(10):
            assert loss_gradient_error(kind, *random_batch(rng), backend=backend) < 1e-4

    def test_composition(self, rng, backend):
        y, p = random_batch(rng)
        f = one_minus_soft_f1(y, p, backend=backend)
        b = bce(y, p, backend=backend)
        assert product_loss(y, p, backend=backend).value == f.value * b.value
        s = sum_loss(y, p, backend=backend)
        assert s.value == f.value + b.value
        assert np.array_equal(s.gradient, f.gradient + b.gradient)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 4).flatmap(lambda b: st.integers(1, 10).flatmap(lambda k: st.tuples(
        arrays(np.float64, (b, k), elements=st.sampled_from([0.0, 1.0])),
        arrays(np.float64, (b, k), elements=st.floats(0.0, 1.0))))))
    def test_finite_and_in_range(self, yp):
        y, p = yp
        outs = {kind: LossSpec(kind)(y, p) for kind in LOSS_KINDS}
        for out in outs.values():
            assert np.isfinite(out.value) and np.all(np.isfinite(out.gradient))
            assert out.value >= 0.0 and out.gradient.shape == p.shape
        assert 0.0 <= outs["one_minus_soft_f1"].value <= 1.0
        assert outs["sum"].value >= outs["one_minus_soft_f1"].value
        assert outs["sum"].value >= outs["bce"].value
        *_, f1 = soft_f1_components(y, p)
        assert np.all((f1 >= 0) & (f1 <= 1))

    @pytest.mark.parametrize("y,p", [
        ([[0, 0, 0]], [[0.0, 0.0, 0.0]]),
        ([[0, 0, 0]], [[1.0, 1.0, 1.0]]),
        ([[1, 1, 1]], [[0.0, 0.0, 0.0]]),
        ([[1, 0, 1]], [[1.0, 1.0, 1.0]]),
    ])
    def test_finite_at_extremes(self, y, p, backend):
        for kind in LOSS_KINDS:
            out = LossSpec(kind)(y, p, backend=backend)
            assert np.isfinite(out.value) and np.all(np.isfinite(out.gradient))

    @given(st.integers(1, 24).flatmap(lambda k: st.tuples(
        arrays(np.uint8, k, elements=st.integers(0, 1)), arrays(np.uint8, k, elements=st.integers(0, 1)))))
    def test_soft_equals_hard_on_binary(self, yp):
        y, p = yp
        *_, f1 = soft_f1_components(y[None].astype(float), p[None].astype(float))
        hard = sample_f1(y, p).f1
        if not y.any() and not p.any():
            # both-empty: hard rule says 1.0, soft-F1 gives 0 (tp = 0)
            assert f1[0] == 0.0 and hard == 1.0
        else:
            assert abs(f1[0] - hard) <= 3 * EPSILON

    def test_spec_rejects_bad_kind(self):
        with pytest.raises(ValueError):
            LossSpec("focal")
        with pytest.raises(ValueError):
            LossSpec("bce", 0.0)
