import json

import pytest

from equiapprox.approximator import ApproximatorModel
from equiapprox.cli import main
from equiapprox.game import GameShape
from equiapprox.io import save_model


def test_gen_is_byte_identical(tmp_path):
    args = ["gen", "--dist", "uniform", "--shape", "2x2", "--count", "10", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = sorted((tmp_path / "a").iterdir())
    b = sorted((tmp_path / "b").iterdir())
    assert len(a) == 11
    assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]


def test_gen_uses_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("EQUIAPPROX_OUT", str(tmp_path / "env"))
    assert main(["gen", "--dist", "named", "--name", "swr3x3", "--param", "eps=0.1", "--count", "1"]) == 0
    assert (tmp_path / "env" / "game_00000.json").exists()


def test_train_then_eval(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "distribution": {"kind": "orbit", "shape": "2x2", "count": 20},
        "model": {"mode": "both", "hidden": [8]},
        "train": {"iterations": 10, "batch_size": 4, "checkpoint_every": 5},
    }))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "run"), "--seed", "4"]) == 0
    run = tmp_path / "run"
    assert (run / "model.json").exists() and (run / "model_step000005.json").exists()
    assert (run / "trace.csv").read_text().count("\n") == 11
    assert json.loads((run / "train_summary.json").read_text())["config"]["seed"] == 4
    main(["gen", "--shape", "2x2", "--count", "3", "--out", str(tmp_path / "g")])
    capsys.readouterr()
    assert main(["eval", "--model", str(run / "model.json"), "--games", str(tmp_path / "g")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["count"] == 3 and summary["concept"] == "NE"


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"model": {"head": "joint", "mode": "both"}}))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("error code=2 kind=config:")


def test_bad_game_file_exit_code(tmp_path, capsys):
    bad = tmp_path / "g.json"
    bad.write_text(json.dumps({"version": 1, "num_players": 2, "action_counts": [1, 1], "payoffs": [[[1.5]], [[0]]]}))
    model = save_model(ApproximatorModel.create(GameShape.of([1, 1]), hidden=(2,)), tmp_path / "m.json")
    assert main(["eval", "--model", str(model), "--games", str(bad)]) == 2
    assert "payoffs[0][0][0]" in capsys.readouterr().err


def test_capacity_exit_code(tmp_path, capsys):
    assert main(["gen", "--shape", "1000x1000x2", "--count", "1", "--out", str(tmp_path)]) == 3
    assert "kind=capacity" in capsys.readouterr().err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2


def test_verify_quick(capsys):
    assert main(["verify", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out


def test_demo(capsys, tmp_path):
    assert main(["demo", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "sigma_1=(0.500000, 0.500000)" in out
    assert (tmp_path / "selection_seed0.json").exists()


def test_swr_prints_ratio(capsys, tmp_path):
    assert main(["swr", "--eps", "0.05", "--out", str(tmp_path)]) == 0
    assert "ratio=0.05" in capsys.readouterr().out
    assert (tmp_path / "swr_eps0.05_seed0.csv").exists()
