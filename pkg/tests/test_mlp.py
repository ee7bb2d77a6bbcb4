import numpy as np
import pytest

from equiapprox.mlp import MlpParams, mlp_backward, mlp_forward


def test_flat_round_trip(rng):
    p = MlpParams.init([5, 4, 3], rng)
    q = MlpParams.from_flat(p.sizes, p.flat())
    assert np.array_equal(p.flat(), q.flat())
    assert p.num_params == 5 * 4 + 4 + 4 * 3 + 3
    with pytest.raises(ValueError):
        MlpParams.from_flat(p.sizes, p.flat()[:-1])


def test_zero_params_give_zero_logits():
    out, _ = mlp_forward(MlpParams.zeros([3, 4, 2]), np.ones((5, 3)))
    assert np.all(out == 0.0)


def test_backward_matches_differences(rng):
    p = MlpParams.init([4, 5, 5, 3], rng)
    X = rng.normal(size=(6, 4))
    W = rng.normal(size=(6, 3))
    out, acts = mlp_forward(p, X)
    grad = mlp_backward(p, acts, W).flat()
    flat = p.flat()
    h = 1e-6
    for k in range(flat.size):
        e = np.zeros_like(flat)
        e[k] = h
        f = lambda v: float(np.sum(W * mlp_forward(MlpParams.from_flat(p.sizes, v), X)[0]))  # noqa: E731
        assert (f(flat + e) - f(flat - e)) / (2 * h) == pytest.approx(grad[k], rel=1e-6, abs=1e-8)


def test_axpy_and_scale(rng):
    p = MlpParams.init([2, 3], rng)
    q = p.axpy(2.0, p.scale(0.5))
    assert np.allclose(q.flat(), 2 * p.flat())
    assert p.is_finite()
    p.weights[0][0, 0] = np.inf
    assert not p.is_finite()
