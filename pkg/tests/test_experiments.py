import json
import warnings

import numpy as np
import pytest

from equiapprox.approximator import ApproximatorModel
from equiapprox.distributions import DistributionSpec, identity2x2, pd2x2, sample, swr3x3
from equiapprox.experiments import (
    ExperimentReport,
    PreconditionError,
    coordination_orbit_welfare,
    exp_coordination,
    exp_generalization,
    exp_orbit_benefit,
    exp_selection,
    exp_selection_identity,
    exp_swr,
    orbit_images,
    symmetry_reduction,
)
from equiapprox.game import Game, GamePermutation, GameShape, ProductStrategy
from equiapprox.training import TrainConfig

S22 = GameShape.of([2, 2])


def test_report_save(tmp_path):
    r = ExperimentReport("demo", {"a": 1}, arms={"x": {"v": np.float64(0.5)}}, verdicts={"ok": True},
                         rows=[{"k": 1, "v": 2.0}])
    paths = r.save(tmp_path, seed=3)
    assert [p.name for p in paths] == ["demo_seed3.json", "demo_seed3.csv"]
    doc = json.loads(paths[0].read_text())
    assert doc["arms"]["x"]["v"] == 0.5 and doc["verdicts"] == {"ok": True}
    assert paths[1].read_text().splitlines() == ["k,v", "1,2.0"]


def test_orbit_images_with_multiplicity():
    assert len(orbit_images(identity2x2())) == 4
    assert len(set(orbit_images(identity2x2()))) == 2


@pytest.mark.parametrize("variant", ["Q_cce", "P_on_opi", "O_on_ppe"])
def test_orbit_benefit_variants(variant):
    games = sample(DistributionSpec("uniform", S22, seed=1), 30)
    r = exp_orbit_benefit(games, variant, seed=2)
    assert r.passed
    assert len(r.rows) == 30
    arm = next(iter(r.arms.values()))
    assert arm["fraction_holding"] == 1.0


def test_orbit_benefit_constant_model_is_equal():
    games = sample(DistributionSpec("uniform", S22, seed=1), 10)
    zero = ApproximatorModel.create(S22, "joint", "general", seed=None)
    r = exp_orbit_benefit(games, "Q_cce", model=zero)
    assert all(abs(row["raw"] - row["pe"]) <= 1e-12 for row in r.rows)


def test_orbit_benefit_preconditions():
    games = sample(DistributionSpec("uniform", S22, seed=1), 3)
    with pytest.raises(PreconditionError):
        exp_orbit_benefit(games, "constant_sum")
    with pytest.raises(PreconditionError):
        exp_orbit_benefit(sample(DistributionSpec("uniform", GameShape.of([2, 2, 2]), seed=1), 2), "O_on_ppe")
    with pytest.raises(ValueError):
        exp_orbit_benefit(games, "R_cce")


def test_selection_identity():
    r = exp_selection_identity(seed=1, train_steps=50)
    assert r.verdicts == {"both_symmetric": True, "pe_symmetric": True, "both_is_mixed_ne": True,
                          "pe_diagonals_equal": True}
    # the unconstrained learner is free to move toward a pure equilibrium
    assert "general_trained" in r.arms


def test_selection_requires_invariance(rng):
    g = Game(rng.random((2, 2, 2)))
    with pytest.raises(PreconditionError):
        exp_selection(g, GamePermutation.from_maps([[1, 0], [1, 0]]))
    with pytest.raises(PreconditionError):
        exp_selection(identity2x2(), GamePermutation())


def test_symmetry_reduction_gives_pd():
    reduced, lift = symmetry_reduction(swr3x3(0.1), GamePermutation.from_maps([[1, 0, 2], [1, 0, 2]]))
    assert np.allclose(reduced.payoffs, pd2x2(0.1).payoffs)
    s = lift(ProductStrategy((np.array([1.0, 0.0]), np.array([0.0, 1.0]))))
    assert s[0].tolist() == [0.5, 0.5, 0.0] and s[1].tolist() == [0.0, 0.0, 1.0]


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.25])
def test_swr_ratio(eps):
    r = exp_swr(eps)
    assert abs(r.arms["ratio"]["value"] - eps) <= 1e-6
    assert r.arms["general"]["max_ne_welfare"] == pytest.approx(2.0)
    assert r.arms["both"]["max_reachable_welfare"] == pytest.approx(2 * eps)


def test_swr_general_mode_and_validation():
    assert exp_swr(0.1, mode="general").arms["ratio"]["value"] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        exp_swr(0.0)
    with pytest.raises(ValueError):
        exp_swr(0.1, mode="opi")


def test_swr_training_arm_is_reported():
    r = exp_swr(0.1, train_steps=20)
    assert set(r.arms["trained"]) == {"strategy", "approximation", "welfare"}


@pytest.mark.parametrize("N,M", [(2, 2), (2, 3), (3, 2)])
def test_coordination_welfare(N, M):
    for seed in range(3):
        assert coordination_orbit_welfare(N, M, seed=seed) == pytest.approx(N / M ** (N - 1), abs=1e-9)


def test_coordination_report():
    r = exp_coordination()
    assert r.passed
    assert [row["orbit_size"] for row in r.rows] == [2, 6, 4]


def test_generalization_untrained_and_validation():
    cfg = TrainConfig(iterations=0)
    r = exp_generalization(S22, m_train=20, m_test=200, seeds=(0, 1, 2), config=cfg, hidden=(8,))
    assert {"general", "both"} <= set(r.arms)
    for arm in r.arms.values():
        assert abs(arm["mean_gap"]) < 0.05
    with pytest.raises(ValueError):
        exp_generalization(S22, seeds=(0, 1))


def test_generalization_cce_runs():
    cfg = TrainConfig(iterations=20, batch_size=8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        r = exp_generalization(S22, m_train=20, m_test=40, seeds=(0, 1, 2), concept="CCE", config=cfg, hidden=(8,))
    assert "pe" in r.arms and len(r.rows) == 6
