"""JSON game files, model checkpoints, and run configuration."""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path
from typing import Any, Iterable

import jsonschema
import numpy as np

from .approximator import ApproximatorModel, EquivarianceMode, HeadKind, layer_sizes
from .game import Game, GameShape
from .mlp import MlpParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

GAME_FILE_VERSION = 1
MODEL_FORMAT = "equiapprox-model"
MODEL_VERSION = 1
MANIFEST_NAME = "manifest.json"


class FormatError(ValueError):
    """A file that does not parse into the expected object; ``path`` names the field."""

    def __init__(self, message: str, path: str = "", source: str | None = None):
        where = ""
        if source:
            where += f"{source}: "
        if path:
            where += f"{path}: "
        super().__init__(where + message)
        self.message = message
        self.path = path
        self.source = source


class ConfigError(ValueError):
    pass


def parse_shape(text) -> GameShape:
    """'2x3' or [2, 3] -> GameShape."""
    if isinstance(text, GameShape):
        return text
    if isinstance(text, str):
        try:
            counts = [int(p) for p in text.lower().split("x")]
        except ValueError:
            raise ConfigError(f"bad shape {text!r}; expected e.g. 2x2 or 3x3x2") from None
    else:
        counts = [int(p) for p in text]
    try:
        return GameShape.of(counts)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _read_json(path) -> Any:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read file ({exc.strerror})", source=str(path)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", source=str(path)) from None


# -- games ---------------------------------------------------------------------

def game_to_dict(game: Game) -> dict:
    return {
        "version": GAME_FILE_VERSION,
        "num_players": game.num_players,
        "action_counts": list(game.action_counts),
        "payoffs": game.payoffs.tolist(),
    }


def _check_nested(value, dims: tuple[int, ...], path: str):
    """Walk a nested list against ``dims`` and report the first bad field."""
    if not dims:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise FormatError(f"expected a number, got {type(value).__name__}", path)
        if not math.isfinite(value) or not 0.0 <= value <= 1.0:
            raise FormatError(f"payoff {value!r} outside [0, 1]", path)
        return
    if not isinstance(value, list):
        raise FormatError(f"expected a list of length {dims[0]}", path)
    if len(value) != dims[0]:
        raise FormatError(f"expected length {dims[0]}, got {len(value)}", path)
    for k, item in enumerate(value):
        _check_nested(item, dims[1:], f"{path}[{k}]")


def game_from_dict(doc: Any, source: str | None = None) -> Game:
    try:
        if not isinstance(doc, dict):
            raise FormatError("expected a JSON object")
        for key in ("version", "num_players", "action_counts", "payoffs"):
            if key not in doc:
                raise FormatError("missing required field", key)
        if doc["version"] != GAME_FILE_VERSION:
            raise FormatError(f"unsupported version {doc['version']!r}", "version")
        counts = doc["action_counts"]
        if not isinstance(counts, list) or not all(isinstance(c, int) and not isinstance(c, bool) for c in counts):
            raise FormatError("expected a list of integers", "action_counts")
        if doc["num_players"] != len(counts):
            raise FormatError(f"{doc['num_players']!r} does not match {len(counts)} action counts", "num_players")
        try:
            shape = GameShape.of(counts)
        except ValueError as exc:
            raise FormatError(str(exc), "action_counts") from None
        _check_nested(doc["payoffs"], (shape.num_players,) + shape.action_counts, "payoffs")
        return Game(np.array(doc["payoffs"], dtype=float))
    except FormatError as exc:
        if source is None:
            raise
        raise FormatError(exc.message, exc.path, source) from None


def save_game(game: Game, path) -> Path:
    """Write ``game`` as JSON; floats use shortest round-trip repr, so reloading is exact."""
    path = Path(path)
    path.write_text(json.dumps(game_to_dict(game)) + "\n")
    return path


def load_game(path) -> Game:
    path = Path(path)
    doc = _read_json(path)
    return game_from_dict(doc, source=str(path))


def save_games(games: Iterable[Game], out_dir, prefix: str = "game") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return [save_game(g, out / f"{prefix}_{k:05d}.json") for k, g in enumerate(games)]


def load_games(paths) -> list[Game]:
    """Load from files and/or directories (``*.json`` sorted by name, manifests skipped)."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    games = []
    for p in map(Path, paths):
        if p.is_dir():
            files = sorted(f for f in p.glob("*.json") if f.name != MANIFEST_NAME)
            if not files:
                raise FormatError("directory contains no .json game files", source=str(p))
            games.extend(load_game(f) for f in files)
        else:
            games.append(load_game(p))
    return games


# -- model checkpoints ---------------------------------------------------------

def model_to_dict(model: ApproximatorModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "action_counts": list(model.shape.action_counts),
        "head": model.head.value,
        "mode": model.mode.value,
        "hidden": model.hidden,
        "num_samples": model.num_samples,
        "sample_seed": model.sample_seed,
        "params": model.params.flat().tolist(),
    }


def model_from_dict(doc: Any) -> ApproximatorModel:
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"not a {MODEL_FORMAT} document", "format")
    if doc.get("version") != MODEL_VERSION:
        raise FormatError(f"unsupported version {doc.get('version')!r}", "version")
    try:
        shape = GameShape.of(doc["action_counts"])
        head = HeadKind(doc["head"])
        mode = EquivarianceMode.parse(doc["mode"])
        sizes = layer_sizes(shape, head, doc["hidden"])
        params = MlpParams.from_flat(sizes, np.array(doc["params"], dtype=float))
        return ApproximatorModel(shape, head, mode, params, doc.get("num_samples"), doc.get("sample_seed", 0))
    except KeyError as exc:
        raise FormatError("missing required field", str(exc.args[0])) from None
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def save_model(model: ApproximatorModel, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(model)) + "\n")
    return path


def load_model(path) -> ApproximatorModel:
    doc = _read_json(path)
    try:
        return model_from_dict(doc)
    except FormatError as exc:
        raise FormatError(exc.message, exc.path, str(path)) from None


# -- run configuration ---------------------------------------------------------

_SHAPE = {"oneOf": [
    {"type": "string", "pattern": r"^\d+(x\d+)+$"},
    {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2},
]}

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "distribution": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["uniform", "orbit", "named"]},
                "shape": _SHAPE,
                "count": {"type": "integer", "minimum": 1},
                "base_game": {"type": "string"},
                "name": {"type": "string"},
                "params": {"type": "object"},
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "head": {"enum": ["product", "joint"]},
                "mode": {"enum": [m.value for m in EquivarianceMode]},
                "hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "output_scale": {"type": "number", "exclusiveMinimum": 0},
                "num_samples": {"type": "integer", "minimum": 1},
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "iterations": {"type": "integer", "minimum": 0},
                "batch_size": {"type": "integer", "minimum": 1},
                "lr": {"type": "number", "minimum": 0},
                "concept": {"enum": ["NE", "CCE", "ne", "cce"]},
                "eval_every": {"type": "integer", "minimum": 0},
                "checkpoint_every": {"type": "integer", "minimum": 0},
                "log_every": {"type": "integer", "minimum": 0},
            },
        },
        "experiment": {
            "type": "object",
            "required": ["name"],
            "properties": {
                "name": {"enum": ["generalization", "orbit_benefit", "selection", "swr", "coordination"]},
            },
        },
    },
}

DEFAULT_CONFIG = {
    "seed": 0,
    "distribution": {"kind": "uniform", "shape": "2x2", "count": 500},
    "model": {"head": "product", "mode": "general", "hidden": [64, 64], "output_scale": 1.0},
    "train": {"iterations": 2000, "batch_size": 32, "lr": 0.1, "concept": "NE"},
}


def _merge(defaults: dict, override: dict) -> dict:
    out = dict(defaults)
    for k, v in override.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def validate_config(doc: Any) -> dict:
    """Schema-check a config document and fill defaults."""
    try:
        jsonschema.validate(doc, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    cfg = _merge(DEFAULT_CONFIG, doc)
    parse_shape(cfg["distribution"].get("shape", "2x2"))
    head, mode = cfg["model"]["head"], cfg["model"]["mode"]
    allowed = {"product": {"general", "opi", "ppe", "both"}, "joint": {"general", "pe"}}
    if mode not in allowed[head]:
        raise ConfigError(f"model: mode {mode!r} is not available with a {head} head")
    concept = cfg["train"]["concept"].upper()
    if (concept == "NE") != (head == "product"):
        raise ConfigError(f"train: {concept} training needs a {'product' if concept == 'NE' else 'joint'} head")
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        if path.suffix == ".toml":
            doc = tomllib.loads(path.read_text())
        else:
            doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return validate_config(doc)
