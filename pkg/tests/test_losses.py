import math

import numpy as np
import pytest

from qmoe.errors import InputError, NumericalError
from qmoe.losses import bce_from_logits, bce_loss, contrastive_loss, softplus
from qmoe.rng import Rng


class TestContrastiveLoss:
    def test_uniform_similarities_give_ln_b(self):
        # identical rows: all four similarities equal -> softmax uniform
        q = np.ones((2, 3))
        d = np.ones((2, 3))
        loss, _ = contrastive_loss(q, d)
        assert loss == pytest.approx(math.log(2.0), abs=1e-12)
        q4 = np.tile([1.0, 2.0], (4, 1))
        loss4, _ = contrastive_loss(q4, np.tile([0.5, -0.5], (4, 1)))
        assert loss4 == pytest.approx(math.log(4.0), abs=1e-12)

    def test_strongly_separated_pairs_near_zero(self):
        # s(q_i, d_i) = +10, s(q_i, d_j) = -10 -> loss = log(1 + e^-20)
        q = np.array([[1.0, 0.0], [0.0, 1.0]])
        d = np.array([[10.0, -10.0], [-10.0, 10.0]])
        loss, _ = contrastive_loss(q, d, temperature=1.0)
        assert loss == pytest.approx(math.log1p(math.exp(-20.0)), rel=1e-9)
        assert loss == pytest.approx(2.061e-9, rel=1e-3)

    def test_loss_nonnegative(self):
        for seed in range(10):
            rng = Rng(seed)
            b = 2 + rng.integer(6)
            loss, _ = contrastive_loss(rng.normal((b, 5)), rng.normal((b, 5)))
            assert loss >= 0.0

    def test_gradients_match_finite_differences(self):
        for seed, similarity in [(0, "dot"), (1, "cosine"), (2, "dot"), (3, "cosine")]:
            rng = Rng(seed)
            q = rng.normal((4, 8))
            d = rng.normal((4, 8))
            tau = 0.7 if seed % 2 else 1.3
            _, grad = contrastive_loss(q, d, temperature=tau, similarity=similarity)
            h = 1e-4
            for i in range(4):
                for j in range(8):
                    up, down = q.copy(), q.copy()
                    up[i, j] += h
                    down[i, j] -= h
                    lu, _ = contrastive_loss(up, d, temperature=tau,
                                             similarity=similarity)
                    ld, _ = contrastive_loss(down, d, temperature=tau,
                                             similarity=similarity)
                    fd = (lu - ld) / (2 * h)
                    err = abs(grad[i, j] - fd) / max(abs(grad[i, j]), abs(fd), 1e-6)
                    assert err < 1e-4

    def test_batch_order_invariance(self):
        rng = Rng(9)
        q = rng.normal((6, 4))
        d = rng.normal((6, 4))
        loss, _ = contrastive_loss(q, d)
        perm = Rng(10).permutation(6)
        loss_p, _ = contrastive_loss(q[perm], d[perm])
        assert loss_p == pytest.approx(loss, rel=1e-12)

    def test_rejects_singleton_batch(self):
        with pytest.raises(InputError):
            contrastive_loss(np.ones((1, 3)), np.ones((1, 3)))

    def test_rejects_mismatched_shapes(self):
        with pytest.raises(InputError):
            contrastive_loss(np.ones((2, 3)), np.ones((2, 4)))

    def test_nonfinite_similarity_is_numerical_error(self):
        q = np.array([[1.0, 0.0], [0.0, 1e308]])
        d = np.array([[1.0, 0.0], [0.0, 1e308]])
        with pytest.raises(NumericalError):
            contrastive_loss(q, d)

    def test_cosine_zero_vector_is_numerical_error(self):
        q = np.array([[0.0, 0.0], [1.0, 0.0]])
        d = np.ones((2, 2))
        with pytest.raises(NumericalError):
            contrastive_loss(q, d, similarity="cosine")


class TestBceLoss:
    def test_max_entropy_predictions(self):
        loss, _ = bce_loss(np.array([0.5, 0.5]), np.array([1, 0]))
        assert loss == pytest.approx(math.log(2.0), abs=1e-12)

    def test_near_perfect_prediction_tends_to_zero(self):
        eps = 1e-9
        loss, _ = bce_loss(np.array([1 - eps, eps]), np.array([1, 0]))
        assert loss < 1e-8

    def test_hand_case(self):
        loss, _ = bce_loss(np.array([0.75, 0.25]), np.array([1, 1]))
        expected = (-math.log(0.75) - math.log(0.25)) / 2
        assert loss == pytest.approx(expected, abs=1e-12)

    def test_gradient_formula(self):
        p = np.array([0.6, 0.2, 0.9])
        y = np.array([1, 0, 1])
        _, grad = bce_loss(p, y)
        np.testing.assert_allclose(grad, (p - y) / 3)

    def test_saturated_scores_rejected(self):
        with pytest.raises(NumericalError):
            bce_loss(np.array([0.0, 0.5]), np.array([0, 1]))
        with pytest.raises(NumericalError):
            bce_loss(np.array([1.0, 0.5]), np.array([1, 0]))

    def test_nonbinary_labels_rejected(self):
        with pytest.raises(InputError):
            bce_loss(np.array([0.5]), np.array([0.5]))

    def test_logit_space_matches_probability_space(self):
        rng = Rng(3)
        z = 3.0 * rng.normal((5, 4))
        y = (rng.uniform((5, 4)) < 0.5).astype(np.float64)
        loss_logit, grad_logit = bce_from_logits(z, y)
        p = 1.0 / (1.0 + np.exp(-z))
        per_row = [bce_loss(p[i], y[i])[0] for i in range(5)]
        assert loss_logit == pytest.approx(np.mean(per_row), rel=1e-12)
        row_grads = np.stack([bce_loss(p[i], y[i])[1] for i in range(5)]) / 5
        np.testing.assert_allclose(grad_logit, row_grads, rtol=1e-10)

    def test_logit_space_never_saturates(self):
        z = np.array([[-5000.0, 5000.0]])
        y = np.array([[0.0, 1.0]])
        loss, grad = bce_from_logits(z, y)
        assert loss == 0.0
        assert np.all(np.isfinite(grad))


def test_softplus_stable_and_correct():
    z = np.array([-1000.0, -1.0, 0.0, 1.0, 1000.0])
    out = softplus(z)
    assert np.all(np.isfinite(out))
    assert out[2] == pytest.approx(math.log(2.0))
    assert out[4] == pytest.approx(1000.0)
    assert out[1] == pytest.approx(math.log1p(math.exp(-1.0)))
