import numpy as np
import pytest
from scipy.optimize import linprog

from gemini import autodiff as ad
from gemini.autodiff import Tensor
from gemini.transport import DiscreteMeasure, emd, emd_gradient_wrt_weights, emd_tensor


def lp_oracle(a, b, C):
    """Transport cost by a generic dense LP solve."""
    n, m = C.shape
    A_eq = np.zeros((n + m, n * m))
    for i in range(n):
        A_eq[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        A_eq[n + j, j::m] = 1.0
    res = linprog(C.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def random_simplex(rng, n, zeros=False):
    w = rng.exponential(size=n)
    if zeros and n > 1:
        w[rng.random(n) < 0.3] = 0.0
        if w.sum() == 0:
            w[0] = 1.0
    return w / w.sum()


def tangent_fd(f, w, direction, h=1e-5):
    return (f(w + h * direction) - f(w - h * direction)) / (2 * h)


class TestEmdExamples:
    def test_identical_measures_cost_zero(self, rng):
        p = random_simplex(rng, 5)
        C = np.abs(rng.normal(size=(5, 5)))
        C = C + C.T
        np.fill_diagonal(C, 0)
        res = emd(p, p, C)
        assert res.cost_value == pytest.approx(0.0, abs=1e-15)

    def test_single_coupling(self):
        res = emd([1.0, 0.0], [0.0, 1.0], np.array([[0.0, 3.0], [3.0, 0.0]]))
        assert res.cost_value == pytest.approx(3.0)
        np.testing.assert_allclose(res.dual_u, [0.0, -3.0], atol=1e-12)

    def test_half_mass_moves(self):
        res = emd([0.5, 0.5], [0.0, 1.0], np.array([[0.0, 2.0], [2.0, 0.0]]))
        assert res.cost_value == pytest.approx(1.0)
        np.testing.assert_allclose(res.plan, [[0.0, 0.5], [0.0, 0.5]])

    def test_unnormalised_rejected(self):
        with pytest.raises(ValueError, match="sum"):
            emd([0.5, 0.6], [0.5, 0.5], np.zeros((2, 2)))

    def test_zero_mass_rejected(self):
        with pytest.raises(ValueError, match="zero total mass"):
            DiscreteMeasure(np.zeros(3))

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            DiscreteMeasure(np.array([1.5, -0.5]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="cost shape"):
            emd([0.5, 0.5], [1.0], np.zeros((2, 2)))


class TestEmdOracle:
    @pytest.mark.parametrize("pivot", ["block", "bland"])
    def test_matches_lp(self, rng, pivot):
        for _ in range(250):
            n, m = rng.integers(1, 7, size=2)
            a = random_simplex(rng, n, zeros=True)
            b = random_simplex(rng, m, zeros=True)
            C = rng.uniform(0, 5, size=(n, m))
            if rng.random() < 0.3:
                C = np.round(C)  # ties make degenerate pivots likely
            res = emd(a, b, C, pivot=pivot)
            assert abs(res.cost_value - lp_oracle(a, b, C)) <= 1e-8
            np.testing.assert_allclose(res.plan.sum(axis=1), a, atol=1e-8)
            np.testing.assert_allclose(res.plan.sum(axis=0), b, atol=1e-8)
            assert np.all(res.plan >= -1e-15)

    def test_strong_duality_and_slackness(self, rng):
        for _ in range(200):
            n, m = rng.integers(1, 7, size=2)
            a, b = random_simplex(rng, n), random_simplex(rng, m)
            C = rng.uniform(0, 5, size=(n, m))
            res = emd(a, b, C)
            assert res.cost_value == pytest.approx(res.dual_u @ a + res.dual_v @ b, abs=1e-8)
            slack = C - res.dual_u[:, None] - res.dual_v[None, :]
            assert slack.min() >= -1e-9
            assert np.all(res.plan[slack > 1e-9] <= 1e-12)
            assert abs(res.dual_u.sum()) <= 1e-10

    def test_uniform_batches_are_degenerate_but_fine(self, rng):
        X = rng.normal(size=(40, 2))
        C = np.linalg.norm(X[:, None] - X[None], axis=-1)
        u = np.full(40, 1 / 40)
        w = random_simplex(rng, 40)
        assert emd(w, u, C).cost_value == pytest.approx(lp_oracle(w, u, C), abs=1e-8)
        assert emd(u, u[::-1], C).cost_value == pytest.approx(0.0, abs=1e-12)

    def test_symmetry(self, rng):
        for _ in range(50):
            n, m = rng.integers(1, 7, size=2)
            a, b = random_simplex(rng, n), random_simplex(rng, m)
            C = rng.uniform(0, 5, size=(n, m))
            assert emd(a, b, C).cost_value == pytest.approx(emd(b, a, C.T).cost_value, abs=1e-10)

    def test_triangle_inequality(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 6))
            X = rng.normal(size=(n, 2))
            C = np.linalg.norm(X[:, None] - X[None], axis=-1)
            p, q, r = (random_simplex(rng, n) for _ in range(3))
            lhs = emd(p, q, C).cost_value + emd(q, r, C).cost_value
            assert lhs >= emd(p, r, C).cost_value - 1e-10


class TestDualGradients:
    def test_simplex_tangent_fd(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 7))
            X = rng.normal(size=(n, 2))
            C = np.linalg.norm(X[:, None] - X[None], axis=-1)
            p, q = random_simplex(rng, n), random_simplex(rng, n)
            res = emd(p, q, C)
            u, v = emd_gradient_wrt_weights(res)
            # direction moving mass between two atoms stays on the simplex
            i, j = rng.choice(n, size=2, replace=False)
            d = np.zeros(n)
            d[i], d[j] = 1.0, -1.0
            h = 1e-5 * min(p[j], p[i], 1.0)
            fd = tangent_fd(lambda w: emd(w, q, C).cost_value, p, d, h)
            # random continuous data: duals are unique, so the value is smooth
            assert fd == pytest.approx(u @ d, rel=1e-4, abs=1e-8)
            fdq = tangent_fd(lambda w: emd(p, w, C).cost_value, q, d, 1e-5 * min(q[i], q[j]))
            assert fdq == pytest.approx(v @ d, rel=1e-4, abs=1e-8)

    def test_two_atom_duals(self):
        C = np.array([[0.0, 3.0], [3.0, 0.0]])
        res = emd([1.0, 0.0], [0.0, 1.0], C)
        u, _ = emd_gradient_wrt_weights(res)
        np.testing.assert_allclose(u, [0.0, -3.0], atol=1e-12)
        # moving eps of source mass onto atom 1 (already at the target) lowers the cost by 3 eps
        h = 1e-5
        fd = (emd([1 - h, h], [0, 1], C).cost_value - 3.0) / h
        assert fd == pytest.approx(u[1] - u[0], rel=1e-6)

    def test_constant_shift_is_invisible(self, rng):
        p, q = random_simplex(rng, 4), random_simplex(rng, 4)
        C = rng.uniform(0, 1, size=(4, 4))
        res = emd(p, q, C)
        c = 0.731
        assert (res.dual_u + c) @ p + (res.dual_v - c) @ q == pytest.approx(res.cost_value, abs=1e-12)

    def test_tensor_backward(self, rng):
        n = 6
        X = rng.normal(size=(n, 2))
        C = np.linalg.norm(X[:, None] - X[None], axis=-1)
        q = random_simplex(rng, n)
        z = rng.normal(size=(1, n))

        def value(zz):
            w = np.exp(zz - zz.max())
            return emd(w.ravel() / w.sum(), q, C).cost_value

        t = Tensor(z, requires_grad=True)
        emd_tensor(ad.transpose(ad.softmax(t)), q, C).backward()
        h = 1e-5
        num = np.array([(value(z + h * e) - value(z - h * e)) / (2 * h) for e in np.eye(n)[:, None, :]])
        np.testing.assert_allclose(t.grad.ravel(), num.ravel(), rtol=1e-4, atol=1e-8)
