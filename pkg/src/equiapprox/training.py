"""Minibatch SGD on mean equilibrium approximation."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .approximator import (
    ApproximatorModel,
    EquivarianceMode,
    batch_loss_and_grad,
    forward_many,
    head_for_concept,
)
from .distributions import make_rng
from .game import DimensionError, Game
from .metrics import SolutionConcept, approximation, social_welfare

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    iterations: int = 2000
    batch_size: int = 32
    lr: float = 0.1
    seed: int = 0
    concept: SolutionConcept = SolutionConcept.NE
    mode: EquivarianceMode | None = None  # None keeps the model's own mode
    eval_every: int = 0  # 0 disables held-out evaluation
    checkpoint_every: int = 0
    log_every: int = 1

    def __post_init__(self):
        self.concept = SolutionConcept.parse(self.concept)
        if self.mode is not None:
            self.mode = EquivarianceMode.parse(self.mode)
        if self.concept is SolutionConcept.CE:
            raise ValueError("training supports NE and CCE losses only")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not (self.lr >= 0 and math.isfinite(self.lr)):
            raise ValueError("learning rate must be finite and non-negative")
        for name in ("eval_every", "checkpoint_every", "log_every"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["concept"] = self.concept.value
        d["mode"] = self.mode.value if self.mode is not None else None
        return d


@dataclass
class TraceRow:
    step: int
    loss: float
    eval_mean: float | None = None
    wall_time: float = 0.0


@dataclass
class TrainTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.rows])

    def deterministic_rows(self) -> list[tuple]:
        """Rows without wall-clock time, for reproducibility comparisons."""
        return [(r.step, r.loss, r.eval_mean) for r in self.rows]

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "loss", "eval_mean", "wall_time"])
            for r in self.rows:
                w.writerow([r.step, repr(r.loss), "" if r.eval_mean is None else repr(r.eval_mean), f"{r.wall_time:.6f}"])
        return path


@dataclass
class EvalSummary:
    mean: float
    max: float
    std: float
    mean_welfare: float
    count: int

    def to_dict(self) -> dict:
        return asdict(self)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    """Endless stream of minibatches from successive shuffled epochs."""
    pending: list[int] = []
    while True:
        while len(pending) < batch_size:
            pending.extend(rng.permutation(n).tolist())
        batch, pending = pending[:batch_size], pending[batch_size:]
        yield batch


def train(
    model: ApproximatorModel,
    train_set: Sequence[Game],
    config: TrainConfig,
    eval_set: Sequence[Game] | None = None,
    on_checkpoint: Callable[[int, ApproximatorModel], None] | None = None,
) -> tuple[ApproximatorModel, TrainTrace]:
    """Run ``config.iterations`` plain SGD steps; returns the final model and trace."""
    if not train_set:
        raise ValueError("training set is empty")
    if config.mode is not None:
        model = model.with_mode(config.mode)
    if head_for_concept(config.concept) is not model.head:
        raise ValueError(f"{config.concept.value} training needs a {head_for_concept(config.concept).value} head")
    for g in train_set:
        if g.shape != model.shape:
            raise DimensionError(f"training game shape {g.shape} does not match model shape {model.shape}")

    rng = make_rng(config.seed)
    batches = _batches(len(train_set), config.batch_size, rng)
    params = model.params
    trace = TrainTrace()
    start = time.perf_counter()
    for step in range(1, config.iterations + 1):
        batch = [train_set[k] for k in next(batches)]
        current = model.with_params(params)
        lg = batch_loss_and_grad(current, batch, config.concept)
        if not math.isfinite(lg.loss):
            raise FloatingPointError(f"non-finite loss {lg.loss} at step {step}")
        params = params.axpy(-config.lr, lg.grad)
        if not params.is_finite():
            raise FloatingPointError(f"parameters became non-finite at step {step} (lr={config.lr})")
        eval_mean = None
        if eval_set and config.eval_every and step % config.eval_every == 0:
            eval_mean = evaluate(model.with_params(params), eval_set, config.concept).mean
        if eval_mean is not None or (config.log_every and step % config.log_every == 0):
            trace.rows.append(TraceRow(step, lg.loss, eval_mean, time.perf_counter() - start))
        if on_checkpoint is not None and config.checkpoint_every and step % config.checkpoint_every == 0:
            on_checkpoint(step, model.with_params(params))
        if step % 500 == 0:
            log.debug("step %d loss %.6f", step, lg.loss)
    return model.with_params(params), trace


def evaluate(model, games: Sequence[Game], concept) -> EvalSummary:
    """Aggregate approximation and welfare of ``model`` (a model or any game -> strategy callable)."""
    if not games:
        raise ValueError("no games to evaluate")
    concept = SolutionConcept.parse(concept)
    if isinstance(model, ApproximatorModel):
        strategies = forward_many(model, games)
    else:
        strategies = [model(g) for g in games]
    gaps = np.array([approximation(g, s, concept) for g, s in zip(games, strategies)])
    welfare = np.array([social_welfare(g, s) for g, s in zip(games, strategies)])
    return EvalSummary(float(gaps.mean()), float(gaps.max()), float(gaps.std()), float(welfare.mean()), len(games))


def generalization_gap(model, train_set: Sequence[Game], test_set: Sequence[Game], concept) -> float:
    """Mean test approximation minus mean train approximation."""
    if not train_set or not test_set:
        raise ValueError("both sets must be nonempty")
    return evaluate(model, test_set, concept).mean - evaluate(model, train_set, concept).mean
