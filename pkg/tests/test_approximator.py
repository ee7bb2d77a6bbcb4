import numpy as np
import pytest

from conftest import rand_game
from equiapprox.approximator import (
    ApproximatorModel,
    backward,
    batch_loss,
    batch_loss_and_grad,
    check_equivariance,
    forward,
    forward_many,
    project_both,
    project_O,
    project_P,
    project_Q,
    projector,
)
from equiapprox.distributions import identity2x2
from equiapprox.game import (
    CapacityError,
    DimensionError,
    Game,
    GamePermutation,
    GameShape,
    JointStrategy,
    PlayerPermutation,
    ProductStrategy,
    enumerate_game_permutations,
    permute_game,
    permute_joint,
    permute_product,
)
from equiapprox.mlp import MlpParams

S22 = GameShape.of([2, 2])
S23 = GameShape.of([2, 3])
SWAP_BOTH = GamePermutation.from_maps([[1, 0], [1, 0]])


def model(shape, head, mode, seed=3, hidden=(8, 8)):
    return ApproximatorModel.create(shape, head, mode, hidden=hidden, seed=seed)


def gap(a, b):
    if isinstance(a, JointStrategy):
        return float(np.abs(a.probs - b.probs).max())
    return max(float(np.abs(x - y).max()) for x, y in zip(a, b))


def test_zero_model_outputs_uniform():
    g = identity2x2()
    s = forward(ApproximatorModel.create(S22, "product", "general", seed=None), g)
    assert [v.tolist() for v in s] == [[0.5, 0.5], [0.5, 0.5]]
    pi = forward(ApproximatorModel.create(S22, "joint", "general", seed=None), g)
    assert np.all(pi.probs == 0.25)


def test_mode_head_compatibility():
    with pytest.raises(ValueError):
        model(S22, "joint", "both")
    with pytest.raises(ValueError):
        model(S22, "product", "pe")


def test_shape_mismatch(rng):
    m = model(S22, "product", "general")
    with pytest.raises(DimensionError):
        forward(m, rand_game(rng, [2, 3]))


def test_both_mode_on_identity_is_mixed_ne():
    for seed in range(5):
        s = model(S22, "product", "both", seed=seed)(identity2x2())
        assert gap(s, ProductStrategy.uniform(S22)) <= 1e-12


def test_outputs_are_interior_simplex_points(rng):
    for head, mode in [("product", "general"), ("product", "both"), ("joint", "pe")]:
        m = ApproximatorModel.create(S23, head, mode, seed=1, output_scale=5.0)
        for g in [rand_game(rng, [2, 3]) for _ in range(10)]:
            out = m(g)
            vecs = [out.probs.ravel()] if isinstance(out, JointStrategy) else list(out)
            for v in vecs:
                assert v.min() > 0.0
                assert abs(v.sum() - 1.0) <= 1e-9


def test_forward_many_matches_single(rng):
    m = model(S23, "product", "both")
    games = [rand_game(rng, [2, 3]) for _ in range(4)]
    for g, s in zip(games, forward_many(m, games)):
        assert gap(s, forward(m, g)) <= 1e-15


@pytest.mark.parametrize("shape", [S22, S23, GameShape.of([2, 2, 2])])
@pytest.mark.parametrize("head,mode", [("product", "opi"), ("product", "ppe"), ("product", "both"), ("joint", "pe")])
def test_projected_models_are_equivariant(rng, shape, head, mode):
    m = model(shape, head, mode)
    for _ in range(3):
        g = rand_game(rng, list(shape.action_counts))
        for rho in enumerate_game_permutations(shape):
            assert check_equivariance(m, g, rho, mode) <= 1e-9


def test_general_model_is_not_equivariant(rng):
    m = model(S22, "product", "general")
    g = rand_game(rng, [2, 2])
    assert check_equivariance(m, g, SWAP_BOTH, "both") > 1e-6
    assert check_equivariance(m, g, SWAP_BOTH, "general") == 0.0
    assert check_equivariance(m, g, GamePermutation(), "both") == 0.0
    # a single player permutation is accepted as well
    assert check_equivariance(m, g, PlayerPermutation(0, [1, 0]), "opi") > 1e-6


def test_project_O_hand_average(rng):
    # on 2x2, O averages player 0's output over {id, swap of player 1} and vice versa
    base = model(S22, "product", "general")
    g = rand_game(rng, [2, 2])
    s1 = GamePermutation.from_maps([None, [1, 0]])
    s0 = GamePermutation.from_maps([[1, 0], None])
    out = project_O(base, g)
    assert np.allclose(out[0], (base(g)[0] + base(permute_game(g, s1))[0]) / 2, atol=1e-15)
    assert np.allclose(out[1], (base(g)[1] + base(permute_game(g, s0))[1]) / 2, atol=1e-15)


def test_project_P_hand_average(rng):
    base = model(S22, "product", "general")
    g = rand_game(rng, [2, 2])
    s0 = GamePermutation.from_maps([[1, 0], None])
    out = project_P(base, g)
    swapped = base(permute_game(g, s0))[0][::-1]
    assert np.allclose(out[0], (base(g)[0] + swapped) / 2, atol=1e-15)


def test_project_Q_hand_average(rng):
    base = model(S22, "joint", "general")
    g = rand_game(rng, [2, 2])
    total = np.zeros((2, 2))
    for rho in enumerate_game_permutations(S22):
        total += permute_joint(base(permute_game(g, rho)), rho.inverse()).probs
    assert np.allclose(project_Q(base, g).probs, total / 4, atol=1e-15)


def test_constant_base_is_unchanged(rng):
    pi = JointStrategy(rng.dirichlet(np.ones(6)).reshape(2, 3))
    out = project_Q(lambda g: pi, rand_game(rng, [2, 3]))
    # a constant map is only PE if its value is symmetric; Q averages it over the group
    sym = np.mean([permute_joint(pi, r.inverse()).probs for r in enumerate_game_permutations(S23)], axis=0)
    assert np.allclose(out.probs, sym, atol=1e-15)
    uniform = JointStrategy.uniform(S23)
    assert gap(project_Q(lambda g: uniform, rand_game(rng, [2, 3])), uniform) <= 1e-15


def test_idempotence_and_fixed_points(rng):
    g = rand_game(rng, [2, 3])
    prod = model(S23, "product", "general")
    joint = model(S23, "joint", "general")
    for op, base, mode in [(project_O, prod, "opi"), (project_P, prod, "ppe"), (project_Q, joint, "pe")]:
        once = op(base, g)
        twice = op(lambda x: op(base, x), g)
        assert gap(once, twice) <= 1e-12
        projected = base.with_mode(mode)
        assert gap(projected(g), once) <= 1e-12
        assert gap(op(projected, g), projected(g)) <= 1e-12
    both = prod.with_mode("both")
    assert gap(both(g), project_both(prod, g)) <= 1e-12
    # O and P commute
    assert gap(project_P(lambda x: project_O(prod, x), g), project_O(lambda x: project_P(prod, x), g)) <= 1e-12
    assert gap(projector("PO", prod)(g), both(g)) <= 1e-15


def test_capacity_and_sampled_mode(rng):
    shape = GameShape.of([7, 2])
    with pytest.raises(CapacityError):
        ApproximatorModel.create(shape, "product", "both", hidden=(4,))(rand_game(rng, [7, 2]))
    m = ApproximatorModel.create(shape, "product", "both", hidden=(4,), num_samples=16)
    s = m(rand_game(rng, [7, 2]))
    assert m.plan().sampled
    assert abs(s[0].sum() - 1.0) <= 1e-9


def test_zero_game_gradient_vanishes():
    g = Game(np.full((2, 2, 2), 0.3))
    m = model(S22, "product", "general")
    grad = backward(m, g, "NE")
    assert np.all(grad.flat() == 0.0)


def test_duplicated_batch_gradient(rng):
    g = rand_game(rng, [2, 2])
    m = model(S22, "product", "both")
    one = batch_loss_and_grad(m, [g], "NE")
    two = batch_loss_and_grad(m, [g, g], "NE")
    assert two.loss == pytest.approx(one.loss, abs=1e-15)
    assert np.allclose(two.grad.flat(), one.grad.flat(), atol=1e-15)


def test_loss_concept_checks(rng):
    g = rand_game(rng, [2, 2])
    with pytest.raises(ValueError):
        batch_loss(model(S22, "product", "general"), [g], "CCE")
    with pytest.raises(ValueError):
        batch_loss(model(S22, "joint", "general"), [g], "CE")


@pytest.mark.parametrize("head,mode", [("product", "general"), ("product", "opi"), ("product", "ppe"),
                                       ("product", "both"), ("joint", "general"), ("joint", "pe")])
def test_gradient_matches_differences(rng, head, mode):
    concept = "NE" if head == "product" else "CCE"
    checked = 0
    while checked < 3:
        m = ApproximatorModel.create(S23, head, mode, hidden=(5,), seed=int(rng.integers(1000)), output_scale=3.0)
        games = [rand_game(rng, [2, 3]) for _ in range(2)]
        lg = batch_loss_and_grad(m, games, concept)
        if lg.margins.min() <= 1e-6:
            continue
        flat, sizes = m.params.flat(), m.params.sizes
        fd = np.empty_like(flat)
        for k in range(flat.size):
            e = np.zeros_like(flat)
            e[k] = 1e-5
            up = batch_loss(m.with_params(MlpParams.from_flat(sizes, flat + e)), games, concept)
            down = batch_loss(m.with_params(MlpParams.from_flat(sizes, flat - e)), games, concept)
            fd[k] = (up - down) / 2e-5
        g = lg.grad.flat()
        assert np.linalg.norm(g - fd) <= 1e-4 * max(np.linalg.norm(g), np.linalg.norm(fd))
        checked += 1


def test_selection_symmetry_on_invariant_game(rng):
    # build a game fixed by swapping actions 0,1 for both players
    base = rand_game(rng, [3, 3])
    g = Game((base.payoffs + permute_game(base, GamePermutation.from_maps([[1, 0, 2], [1, 0, 2]])).payoffs) / 2)
    rho = GamePermutation.from_maps([[1, 0, 2], [1, 0, 2]])
    s = model(g.shape, "product", "both")(g)
    assert gap(s, permute_product(s, rho)) <= 1e-9
    pi = model(g.shape, "joint", "pe")(g)
    assert gap(pi, permute_joint(pi, rho)) <= 1e-9
