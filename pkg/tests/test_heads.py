import numpy as np
import pytest

from tagm.heads import HeadParams, bce_loss, head_backward, nll_loss, sigmoid_head, softmax_head


class TestSoftmaxHead:
    def test_zero_params_uniform(self):
        p = HeadParams.zeros(4, 10)
        probs = softmax_head(np.ones(4), p)
        assert np.allclose(probs, 0.1, atol=1e-15)

    def test_dominant_logit(self):
        p = HeadParams(w=np.zeros((3, 2)), b=np.array([10.0, 0.0, 0.0]))
        probs = softmax_head(np.ones(2), p)
        assert int(np.argmax(probs)) == 0
        assert probs[0] > 0.9999

    def test_reference_value(self):
        p = HeadParams(w=np.array([[1.0], [2.0]]), b=np.zeros(2))
        probs = softmax_head(np.array([1.0]), p)
        assert np.allclose(probs, [0.26894142, 0.73105858], atol=1e-8)

    def test_argmax_shift_invariant(self, rng):
        logits = rng.normal(size=6)
        p1 = HeadParams(w=np.zeros((6, 1)), b=logits)
        p2 = HeadParams(w=np.zeros((6, 1)), b=logits + 57.0)
        h = np.zeros(1)
        assert np.argmax(softmax_head(h, p1)) == np.argmax(softmax_head(h, p2))


class TestNll:
    def test_perfect_prediction(self):
        probs = np.array([0.0, 1.0, 0.0])
        loss, grad = nll_loss(probs, 1)
        assert loss == 0.0
        assert np.array_equal(grad, np.zeros(3))

    def test_uniform_baseline(self):
        loss, _ = nll_loss(np.full(10, 0.1), 3)
        assert loss == pytest.approx(np.log(10.0), rel=1e-12)

    def test_closed_form_gradient(self):
        loss, grad = nll_loss(np.array([0.2, 0.8]), 0)
        assert loss == pytest.approx(-np.log(0.2), rel=1e-12)
        assert np.allclose(grad, [-0.8, 0.8], atol=1e-15)

    def test_out_of_range_label(self):
        with pytest.raises(IndexError):
            nll_loss(np.array([0.5, 0.5]), 2)

    def test_grad_sums_to_zero(self, rng):
        for _ in range(20):
            z = rng.normal(size=5)
            probs = np.exp(z - z.max())
            probs /= probs.sum()
            _, grad = nll_loss(probs, int(rng.integers(5)))
            assert abs(grad.sum()) <= 1e-12

    def test_saturated_probability_is_finite(self):
        loss, _ = nll_loss(np.array([0.0, 1.0]), 0)
        assert np.isfinite(loss)
        assert loss == pytest.approx(-np.log(1e-12), rel=1e-12)


class TestSigmoidHead:
    def test_zero_params(self):
        p = HeadParams.zeros(3, 4)
        assert np.array_equal(sigmoid_head(np.ones(3), p), np.full(4, 0.5))

    def test_saturated_bias(self):
        p = HeadParams(w=np.zeros((2, 3)), b=np.array([0.0, -40.0]))
        probs = sigmoid_head(np.ones(3), p)
        assert probs[1] < 1e-17

    def test_reference_values(self):
        p = HeadParams(w=np.zeros((2, 1)), b=np.array([0.0, 2.0]))
        probs = sigmoid_head(np.ones(1), p)
        assert probs[0] == 0.5
        assert probs[1] == pytest.approx(0.880797077977882, abs=1e-12)


class TestBce:
    def test_perfect_prediction_near_zero(self):
        loss, grad = bce_loss(np.array([1.0, 0.0]), np.array([1.0, 0.0]))
        assert loss == pytest.approx(0.0, abs=1e-10)
        assert np.allclose(grad, 0.0, atol=1e-15)

    def test_uninformed_predictor(self):
        k = 7
        loss, _ = bce_loss(np.full(k, 0.5), (np.arange(k) % 2).astype(float))
        assert loss == pytest.approx(k * np.log(2.0), rel=1e-12)

    def test_closed_form_gradient(self):
        loss, grad = bce_loss(np.array([0.8]), np.array([1.0]))
        assert loss == pytest.approx(-np.log(0.8), rel=1e-12)
        assert np.allclose(grad, [-0.2], atol=1e-15)

    def test_non_binary_target_rejected(self):
        with pytest.raises(ValueError):
            bce_loss(np.array([0.5]), np.array([0.3]))

    def test_non_negative(self, rng):
        for _ in range(20):
            p = rng.random(4)
            t = (rng.random(4) < 0.5).astype(float)
            loss, _ = bce_loss(p, t)
            assert loss >= 0.0


def test_head_backward_shapes_and_values(rng):
    p = HeadParams.init(3, 4, rng)
    h = rng.normal(size=3)
    grad_logits = rng.normal(size=4)
    g, grad_h = head_backward(h, p, grad_logits)
    assert np.allclose(g.w, np.outer(grad_logits, h), atol=1e-15)
    assert np.array_equal(g.b, grad_logits)
    assert np.allclose(grad_h, p.w.T @ grad_logits, atol=1e-15)
