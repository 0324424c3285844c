import math

import numpy as np
import pytest

from qmoe.errors import InputError
from qmoe.linalg import glorot_uniform_init, matvec, relu, sigmoid
from qmoe.rng import Rng


class TestMatvec:
    def test_identity(self):
        m = np.eye(3, dtype=np.float32)
        v = np.array([1.0, 2.0, 3.0], dtype=np.float32)
        assert np.array_equal(matvec(m, v), v)

    def test_hand_case(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
        v = np.array([1.0, 1.0], dtype=np.float32)
        assert np.array_equal(matvec(m, v), [3.0, 7.0])

    def test_zero_matrix_annihilates(self):
        m = np.zeros((2, 2), dtype=np.float32)
        v = np.array([5.0, -5.0], dtype=np.float32)
        assert np.array_equal(matvec(m, v), [0.0, 0.0])

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InputError):
            matvec(np.zeros((2, 3)), np.zeros(2))

    def test_linearity(self):
        # matvec(m, a*u + b*v) == a*matvec(m,u) + b*matvec(m,v)
        for seed in range(20):
            rng = Rng(seed)
            rows = 1 + rng.integer(6)
            cols = 1 + rng.integer(6)
            m = rng.normal((rows, cols))
            u = rng.normal((cols,))
            v = rng.normal((cols,))
            a, b = rng.normal(), rng.normal()
            lhs = matvec(m, a * u + b * v)
            rhs = a * matvec(m, u) + b * matvec(m, v)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-6, atol=1e-9)


class TestGlorotInit:
    def test_bound_for_1x5_is_one(self):
        # a = sqrt(6 / (1 + 5)) = 1
        m = glorot_uniform_init(1, 5, Rng(0))
        assert m.shape == (1, 5)
        assert np.all(np.abs(m) <= 1.0)

    def test_fixed_seed_reproducible(self):
        a = glorot_uniform_init(20, 30, Rng(42))
        b = glorot_uniform_init(20, 30, Rng(42))
        assert np.array_equal(a, b)

    def test_large_sample_mean_near_zero(self):
        for seed in (0, 1, 99):
            m = glorot_uniform_init(100, 100, Rng(seed))
            assert abs(float(m.mean())) < 0.02

    def test_entries_within_bound(self):
        rows, cols = 13, 7
        a = math.sqrt(6.0 / (rows + cols))
        m = glorot_uniform_init(rows, cols, Rng(5))
        assert np.all(np.abs(m) <= a)

    def test_rejects_nonpositive_dims(self):
        with pytest.raises(InputError):
            glorot_uniform_init(0, 3, Rng(0))
        with pytest.raises(InputError):
            glorot_uniform_init(3, -1, Rng(0))

    def test_dtype_selectable(self):
        assert glorot_uniform_init(2, 2, Rng(0)).dtype == np.float32
        assert glorot_uniform_init(2, 2, Rng(0), dtype=np.float64).dtype == np.float64


class TestElementwise:
    def test_sigmoid_at_zero(self):
        assert sigmoid(np.array([0.0]))[0] == pytest.approx(0.5)

    def test_sigmoid_ln3(self):
        # sigma(ln 3) = 3/4 exactly
        assert sigmoid(np.array([math.log(3.0)]))[0] == pytest.approx(0.75, abs=1e-12)

    def test_relu_definition(self):
        out = relu(np.array([-1.0, 2.0, 0.0]))
        assert np.array_equal(out, [0.0, 2.0, 0.0])

    def test_sigmoid_open_interval_even_when_saturated(self):
        v = np.array([-1e4, -50.0, 0.0, 50.0, 1e4], dtype=np.float32)
        out = sigmoid(v)
        assert np.all(out > 0.0) and np.all(out < 1.0)
        out64 = sigmoid(v.astype(np.float64))
        assert np.all(out64 > 0.0) and np.all(out64 < 1.0)

    def test_relu_nonnegative_property(self):
        for seed in range(10):
            v = Rng(seed).normal((64,))
            assert np.all(relu(v) >= 0.0)
