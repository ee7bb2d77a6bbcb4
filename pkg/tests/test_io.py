import json

import numpy as np
import pytest

from equiapprox import io
from equiapprox.approximator import ApproximatorModel
from equiapprox.distributions import NAMED_GAMES, DistributionSpec, identity2x2, named_game, sample
from equiapprox.game import GameShape


@pytest.mark.parametrize("name", sorted(NAMED_GAMES))
def test_named_game_round_trip(tmp_path, name):
    g = named_game(name)
    assert io.load_game(io.save_game(g, tmp_path / "g.json")) == g


def test_random_game_round_trip_is_exact(tmp_path):
    for g in sample(DistributionSpec("uniform", GameShape.of([3, 2, 2]), seed=1), 5):
        back = io.load_game(io.save_game(g, tmp_path / "g.json"))
        assert np.array_equal(back.payoffs, g.payoffs)


def _write(tmp_path, doc):
    p = tmp_path / "g.json"
    p.write_text(json.dumps(doc))
    return p


def test_out_of_range_entry_names_field(tmp_path):
    doc = io.game_to_dict(identity2x2())
    doc["payoffs"][1][0][1] = 1.5
    with pytest.raises(io.FormatError) as err:
        io.load_game(_write(tmp_path, doc))
    assert err.value.path == "payoffs[1][0][1]"
    assert "1.5" in str(err.value)


def test_missing_version(tmp_path):
    doc = io.game_to_dict(identity2x2())
    del doc["version"]
    with pytest.raises(io.FormatError, match="version"):
        io.load_game(_write(tmp_path, doc))


def test_structure_errors(tmp_path):
    doc = io.game_to_dict(identity2x2())
    doc["payoffs"][0].append([0.0, 0.0])
    with pytest.raises(io.FormatError) as err:
        io.game_from_dict(doc)
    assert err.value.path == "payoffs[0]"
    doc = io.game_to_dict(identity2x2())
    doc["num_players"] = 3
    with pytest.raises(io.FormatError, match="num_players"):
        io.game_from_dict(doc)
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": 1,\n "payoffs": [1,}')
    with pytest.raises(io.FormatError, match="line 2"):
        io.load_game(bad)


def test_load_games_directory(tmp_path):
    games = sample(DistributionSpec("uniform", GameShape.of([2, 2]), seed=1), 3)
    io.save_games(games, tmp_path / "d")
    (tmp_path / "d" / io.MANIFEST_NAME).write_text("{}")
    assert io.load_games(tmp_path / "d") == games
    with pytest.raises(io.FormatError):
        io.load_games(tmp_path / "empty_dir_missing")


def test_model_round_trip(tmp_path):
    m = ApproximatorModel.create(GameShape.of([2, 3]), "product", "both", hidden=(4, 3), seed=2)
    back = io.load_model(io.save_model(m, tmp_path / "m.json"))
    assert back.mode == m.mode and back.head == m.head and back.hidden == [4, 3]
    assert np.array_equal(back.params.flat(), m.params.flat())
    doc = json.loads((tmp_path / "m.json").read_text())
    doc["params"] = doc["params"][:-1]
    with pytest.raises(io.FormatError):
        io.model_from_dict(doc)


def test_parse_shape():
    assert io.parse_shape("2x3x2") == GameShape.of([2, 3, 2])
    assert io.parse_shape([3, 3]) == GameShape.of([3, 3])
    with pytest.raises(io.ConfigError):
        io.parse_shape("2by2")
    with pytest.raises(io.ConfigError):
        io.parse_shape("3")


def test_config_defaults_and_validation(tmp_path):
    cfg = io.validate_config({})
    assert cfg["train"]["iterations"] == 2000 and cfg["model"]["hidden"] == [64, 64]
    with pytest.raises(io.ConfigError, match="train/lr"):
        io.validate_config({"train": {"lr": -1}})
    with pytest.raises(io.ConfigError):
        io.validate_config({"unknown": 1})
    with pytest.raises(io.ConfigError, match="joint head"):
        io.validate_config({"model": {"head": "product", "mode": "general"}, "train": {"concept": "CCE"}})


def test_config_toml(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('seed = 3\n[model]\nmode = "both"\nhidden = [8]\n[train]\niterations = 5\n')
    cfg = io.load_config(p)
    assert cfg["seed"] == 3 and cfg["model"]["mode"] == "both" and cfg["train"]["batch_size"] == 32
    p.write_text("seed = \n")
    with pytest.raises(io.ConfigError):
        io.load_config(p)
