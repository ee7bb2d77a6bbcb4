"""Equilibrium approximators and orbit-averaging projections.

A model is a general MLP ``base`` mapping flattened payoffs to logits, with
one softmax per player (product head) or one softmax over joint actions
(joint head). Equivariant modes wrap the base in orbit averaging:

    OPI   out_j = mean over rho_-j of base(rho_-j u)_j
    PPE   out_j = mean over rho_j of rho_j^-1 base(rho_j u)_j
    BOTH  out_j = mean over rho of rho_j^-1 base(rho u)_j      (= P o O)
    PE    out   = mean over rho of rho^-1 base(rho u)

These are the composed per-player operators written out in closed form;
the literal operators are available as :func:`project_O`, :func:`project_P`
and :func:`project_Q` for any callable base.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np

from .game import (
    ORBIT_ENUM_LIMIT,
    CapacityError,
    DimensionError,
    Game,
    GamePermutation,
    GameShape,
    JointStrategy,
    PlayerPermutation,
    ProductStrategy,
    _permute_axes,
    enumerate_game_permutations,
    permute_game,
    permute_joint,
    permute_product,
    random_game_permutation,
)
from .metrics import SolutionConcept, joint_loss_grad, product_loss_grad
from .mlp import MlpParams, mlp_backward, mlp_forward

Strategy = Union[ProductStrategy, JointStrategy]
Forward = Callable[[Game], Strategy]

DEFAULT_HIDDEN = (64, 64)
DEFAULT_ORBIT_SAMPLES = 64
# cap on the number of orbit members evaluated per forward pass in exact mode
MAX_ORBIT_MEMBERS = 10**5


class HeadKind(str, enum.Enum):
    PRODUCT = "product"
    JOINT = "joint"


class EquivarianceMode(str, enum.Enum):
    GENERAL = "general"
    OPI = "opi"
    PPE = "ppe"
    BOTH = "both"
    PE = "pe"

    @classmethod
    def parse(cls, value) -> "EquivarianceMode":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


PRODUCT_MODES = frozenset({EquivarianceMode.GENERAL, EquivarianceMode.OPI, EquivarianceMode.PPE, EquivarianceMode.BOTH})
JOINT_MODES = frozenset({EquivarianceMode.GENERAL, EquivarianceMode.PE})


def head_for_concept(concept) -> HeadKind:
    concept = SolutionConcept.parse(concept)
    return HeadKind.PRODUCT if concept is SolutionConcept.NE else HeadKind.JOINT


@dataclass
class ApproximatorModel:
    shape: GameShape
    head: HeadKind
    mode: EquivarianceMode
    params: MlpParams
    # sampled orbit averaging when an orbit is too large to enumerate
    num_samples: int | None = None
    sample_seed: int = 0

    def __post_init__(self):
        self.head = HeadKind(self.head)
        self.mode = EquivarianceMode.parse(self.mode)
        allowed = PRODUCT_MODES if self.head is HeadKind.PRODUCT else JOINT_MODES
        if self.mode not in allowed:
            raise ValueError(f"mode {self.mode.value} is not available with a {self.head.value} head")
        sizes = self.params.sizes
        if sizes[0] != self.input_dim or sizes[-1] != self.output_dim:
            raise DimensionError(
                f"MLP sizes {sizes} do not fit shape {self.shape} with a {self.head.value} head"
            )
        if not self.params.is_finite():
            raise ValueError("model parameters must be finite")

    @classmethod
    def create(
        cls,
        shape: GameShape,
        head=HeadKind.PRODUCT,
        mode=EquivarianceMode.GENERAL,
        hidden: Sequence[int] = DEFAULT_HIDDEN,
        seed: int | None = 0,
        output_scale: float = 1.0,
        num_samples: int | None = None,
    ) -> "ApproximatorModel":
        """Random LeCun-initialised model, or all-zero weights when ``seed`` is None."""
        head = HeadKind(head)
        sizes = layer_sizes(shape, head, hidden)
        if seed is None:
            params = MlpParams.zeros(sizes)
        else:
            params = MlpParams.init(sizes, np.random.Generator(np.random.Philox(seed)), output_scale)
        return cls(shape, head, mode, params, num_samples=num_samples)

    @property
    def input_dim(self) -> int:
        return _input_dim(self.shape)

    @property
    def output_dim(self) -> int:
        return _output_dim(self.shape, self.head)

    @property
    def hidden(self) -> list[int]:
        return self.params.sizes[1:-1]

    def with_params(self, params: MlpParams) -> "ApproximatorModel":
        return replace(self, params=params)

    def with_mode(self, mode) -> "ApproximatorModel":
        return replace(self, mode=EquivarianceMode.parse(mode))

    def plan(self) -> "_OrbitPlan":
        return _orbit_plan(self.shape, self.head, self.mode, self.num_samples, self.sample_seed)

    def __call__(self, game: Game) -> Strategy:
        return forward(self, game)


def _input_dim(shape: GameShape) -> int:
    return shape.num_players * shape.num_joint_actions


def _output_dim(shape: GameShape, head: HeadKind) -> int:
    if HeadKind(head) is HeadKind.PRODUCT:
        return sum(shape.action_counts)
    return shape.num_joint_actions


def layer_sizes(shape: GameShape, head, hidden: Sequence[int]) -> list[int]:
    return [_input_dim(shape), *hidden, _output_dim(shape, head)]


# -- orbit plans ---------------------------------------------------------------

@dataclass
class _OrbitPlan:
    members: list[GamePermutation]
    input_idx: np.ndarray  # (K, input_dim) gather into flattened payoffs
    weights: np.ndarray  # (n, K) for product heads, (K,) for joint heads
    out_idx: list[np.ndarray] | np.ndarray  # per-player (K, m_j) or (K, |A|) gathers
    sampled: bool = False


def _subgroup(shape: GameShape, players, num_samples, rng) -> tuple[list[GamePermutation], bool]:
    players = sorted(players)
    if not players:
        return [GamePermutation()], False
    sizes = [math.factorial(shape.action_counts[i]) for i in players]
    if max(sizes) <= ORBIT_ENUM_LIMIT and math.prod(sizes) <= MAX_ORBIT_MEMBERS:
        return enumerate_game_permutations(shape, players), False
    if num_samples is None:
        raise CapacityError(
            f"orbit over players {players} of shape {shape} is too large to enumerate; "
            "set num_samples for sampled averaging"
        )
    return [random_game_permutation(shape, rng, players) for _ in range(num_samples)], True


@functools.lru_cache(maxsize=256)
def _orbit_plan(shape: GameShape, head: HeadKind, mode: EquivarianceMode, num_samples, seed) -> _OrbitPlan:
    n = shape.num_players
    rng = np.random.Generator(np.random.Philox(seed))
    everyone = range(n)
    sampled = False
    if head is HeadKind.PRODUCT:
        sets = []
        for j in everyone:
            if mode is EquivarianceMode.GENERAL:
                group, s = [GamePermutation()], False
            elif mode is EquivarianceMode.OPI:
                group, s = _subgroup(shape, [k for k in everyone if k != j], num_samples, rng)
            elif mode is EquivarianceMode.PPE:
                group, s = _subgroup(shape, [j], num_samples, rng)
            else:
                group, s = _subgroup(shape, everyone, num_samples, rng)
            sampled |= s
            sets.append(group)
    else:
        if mode is EquivarianceMode.GENERAL:
            group, sampled = [GamePermutation()], False
        else:
            group, sampled = _subgroup(shape, everyone, num_samples, rng)
        sets = [group]

    index: dict[GamePermutation, int] = {}
    members: list[GamePermutation] = []
    for group in sets:
        for rho in group:
            if rho not in index:
                index[rho] = len(members)
                members.append(rho)
    K = len(members)
    weights = np.zeros((len(sets), K))
    for j, group in enumerate(sets):
        for rho in group:
            weights[j, index[rho]] += 1.0 / len(group)

    base = np.arange(_input_dim(shape)).reshape((n,) + shape.action_counts)
    input_idx = np.stack([_permute_axes(base, rho, offset=1).ravel() for rho in members])

    unpermute = mode is not EquivarianceMode.OPI
    if head is HeadKind.PRODUCT:
        out_idx = []
        for j, m in enumerate(shape.action_counts):
            rows = []
            for rho in members:
                p = rho.get(j)
                # (rho_j^-1 sigma)(a) = sigma(rho_j(a))
                rows.append(p.map if (unpermute and p is not None) else np.arange(m))
            out_idx.append(np.array(rows, dtype=np.intp))
        weights_out = weights
    else:
        joint = np.arange(shape.num_joint_actions).reshape(shape.action_counts)
        out_idx = np.stack([_permute_axes(joint, rho.inverse()).ravel() for rho in members])
        weights_out = weights[0]
    return _OrbitPlan(members, input_idx, weights_out, out_idx, sampled)


# -- forward / backward --------------------------------------------------------

def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _check_games(model: ApproximatorModel, games: Sequence[Game]):
    for g in games:
        if g.shape != model.shape:
            raise DimensionError(f"game shape {g.shape} does not match model shape {model.shape}")


def _forward_arrays(model: ApproximatorModel, payoffs: np.ndarray):
    """Batched forward; ``payoffs`` has shape (B, n, m_1, ..., m_n)."""
    plan = model.plan()
    B = payoffs.shape[0]
    K = len(plan.members)
    flat = payoffs.reshape(B, -1)
    X = flat[:, plan.input_idx].reshape(B * K, -1)
    Z, acts = mlp_forward(model.params, X)
    Z = Z.reshape(B, K, -1)
    rows = np.arange(K)[:, None]
    if model.head is HeadKind.PRODUCT:
        outs, probs = [], []
        off = 0
        for j, m in enumerate(model.shape.action_counts):
            S = _softmax(Z[..., off:off + m])
            probs.append(S)
            gathered = S[:, rows, plan.out_idx[j]]
            outs.append(np.einsum("k,bkm->bm", plan.weights[j], gathered))
            off += m
        return outs, (plan, acts, probs)
    S = _softmax(Z)
    gathered = S[:, rows, plan.out_idx]
    out = np.einsum("k,bkp->bp", plan.weights, gathered)
    return out, (plan, acts, S)


def _backward_arrays(model: ApproximatorModel, cache, dout) -> MlpParams:
    plan, acts, probs = cache
    K = len(plan.members)
    rows = np.arange(K)[:, None]
    if model.head is HeadKind.PRODUCT:
        dZ_parts = []
        for j, S in enumerate(probs):
            dS = np.zeros_like(S)
            dS[:, rows, plan.out_idx[j]] = plan.weights[j][None, :, None] * dout[j][:, None, :]
            dZ_parts.append(S * (dS - np.sum(S * dS, axis=-1, keepdims=True)))
        dZ = np.concatenate(dZ_parts, axis=-1)
    else:
        S = probs
        dS = np.zeros_like(S)
        dS[:, rows, plan.out_idx] = plan.weights[None, :, None] * dout[:, None, :]
        dZ = S * (dS - np.sum(S * dS, axis=-1, keepdims=True))
    B = dZ.shape[0]
    return mlp_backward(model.params, acts, dZ.reshape(B * K, -1))


def _to_strategies(model: ApproximatorModel, out) -> list[Strategy]:
    if model.head is HeadKind.PRODUCT:
        B = out[0].shape[0]
        return [ProductStrategy(tuple(v[b] for v in out)) for b in range(B)]
    return [JointStrategy(p.reshape(model.shape.action_counts)) for p in out]


def forward_many(model: ApproximatorModel, games: Sequence[Game]) -> list[Strategy]:
    if not games:
        return []
    _check_games(model, games)
    out, _ = _forward_arrays(model, np.stack([g.payoffs for g in games]))
    return _to_strategies(model, out)


def forward(model: ApproximatorModel, game: Game) -> Strategy:
    """Predicted strategy for ``game`` (product or joint per the model head)."""
    return forward_many(model, [game])[0]


def base_forward(model: ApproximatorModel) -> Forward:
    """The unprojected general network underlying ``model``."""
    return model.with_mode(EquivarianceMode.GENERAL)


def _check_loss(model: ApproximatorModel, concept) -> SolutionConcept:
    concept = SolutionConcept.parse(concept)
    if concept is SolutionConcept.CE:
        raise ValueError("training losses are defined for NE and CCE only")
    if head_for_concept(concept) is not model.head:
        raise ValueError(f"{concept.value} loss needs a {head_for_concept(concept).value} head")
    return concept


@dataclass
class LossGrad:
    loss: float  # mean approximation over the batch
    grad: MlpParams
    losses: np.ndarray = field(repr=False)
    margins: np.ndarray = field(repr=False)  # argmax margin per game


def batch_loss_and_grad(model: ApproximatorModel, games: Sequence[Game], concept) -> LossGrad:
    """Mean approximation over ``games`` and its (sub)gradient w.r.t. parameters."""
    concept = _check_loss(model, concept)
    _check_games(model, games)
    payoffs = np.stack([g.payoffs for g in games])
    B = len(games)
    out, cache = _forward_arrays(model, payoffs)
    losses = np.empty(B)
    margins = np.empty(B)
    if model.head is HeadKind.PRODUCT:
        dout = [np.empty_like(v) for v in out]
        for b in range(B):
            val, grads, margin = product_loss_grad(payoffs[b], [v[b] for v in out])
            losses[b], margins[b] = val, margin
            for j, g in enumerate(grads):
                dout[j][b] = g / B
    else:
        shape = model.shape.action_counts
        dout = np.empty_like(out)
        for b in range(B):
            val, g, margin = joint_loss_grad(payoffs[b], out[b].reshape(shape))
            losses[b], margins[b] = val, margin
            dout[b] = g.ravel() / B
    grad = _backward_arrays(model, cache, dout)
    if not (np.all(np.isfinite(losses)) and grad.is_finite()):
        raise FloatingPointError("non-finite loss or gradient")
    return LossGrad(float(losses.mean()), grad, losses, margins)


def batch_loss(model: ApproximatorModel, games: Sequence[Game], concept) -> float:
    return batch_loss_and_grad(model, games, concept).loss


def backward(model: ApproximatorModel, game: Game, concept) -> MlpParams:
    """Gradient of the single-game approximation loss w.r.t. model parameters."""
    return batch_loss_and_grad(model, [game], concept).grad


# -- literal orbit-averaging operators -----------------------------------------

def _group(shape, players, num_samples, rng):
    rng = rng if rng is not None else np.random.Generator(np.random.Philox(0))
    group, _ = _subgroup(shape, players, num_samples, rng)
    return group


def _average(vectors: list[np.ndarray]) -> np.ndarray:
    return np.mean(np.stack(vectors), axis=0)


def project_O(base: Forward, game: Game, num_samples: int | None = None, rng=None) -> ProductStrategy:
    """(O f)(u)_j: average of f(rho u)_j over permutations of every player but j."""
    n = game.num_players
    cache: dict[GamePermutation, ProductStrategy] = {}

    def f(rho):
        if rho not in cache:
            cache[rho] = base(permute_game(game, rho))
        return cache[rho]

    out = []
    for j in range(n):
        group = _group(game.shape, [k for k in range(n) if k != j], num_samples, rng)
        out.append(_average([f(rho)[j] for rho in group]))
    return ProductStrategy(tuple(out))


def project_P(base: Forward, game: Game, num_samples: int | None = None, rng=None) -> ProductStrategy:
    """(P f)(u)_j: average of rho_j^-1 f(rho_j u)_j over permutations of player j."""
    out = []
    for j in range(game.num_players):
        vecs = []
        for rho in _group(game.shape, [j], num_samples, rng):
            sigma = base(permute_game(game, rho))
            vecs.append(permute_product(sigma, rho.inverse())[j])
        out.append(_average(vecs))
    return ProductStrategy(tuple(out))


def project_Q(base: Forward, game: Game, num_samples: int | None = None, rng=None) -> JointStrategy:
    """(Q f)(u): average of rho^-1 f(rho u) over the full product group."""
    tensors = []
    for rho in _group(game.shape, range(game.num_players), num_samples, rng):
        pi = base(permute_game(game, rho))
        tensors.append(permute_joint(pi, rho.inverse()).probs)
    return JointStrategy(_average(tensors))


def project_both(base: Forward, game: Game) -> ProductStrategy:
    """P o O: orbit-average to OPI first, then to PPE."""
    return project_P(lambda g: project_O(base, g), game)


def projector(kind: str, base: Forward) -> Forward:
    """Wrap ``base`` into a callable applying operator ``kind`` in {O, P, Q, PO}."""
    ops = {"O": project_O, "P": project_P, "Q": project_Q, "PO": project_both}
    op = ops[kind.upper()]
    return lambda g: op(base, g)


# -- equivariance checks -------------------------------------------------------

def _vec_gap(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())


def check_equivariance(f: Forward, game: Game, rho: GamePermutation, mode) -> float:
    """Largest violation of ``mode``'s defining equations under ``rho``.

    Each per-player factor rho_i of ``rho`` is checked on its own, and for
    BOTH and PE the full product as well. Returns 0 for GENERAL.
    """
    mode = EquivarianceMode.parse(mode)
    if isinstance(rho, PlayerPermutation):
        rho = GamePermutation([rho])
    if mode is EquivarianceMode.GENERAL:
        return 0.0
    base_out = f(game)
    worst = 0.0
    singles = [GamePermutation([p]) for p in rho.per_player.values()]
    if mode is EquivarianceMode.PE:
        for r in singles + [rho]:
            lhs = f(permute_game(game, r)).probs
            rhs = permute_joint(base_out, r).probs
            worst = max(worst, _vec_gap(lhs, rhs))
        return worst
    n = game.num_players
    for i, p in rho.per_player.items():
        r = GamePermutation([p])
        out = f(permute_game(game, r))
        if mode in (EquivarianceMode.PPE, EquivarianceMode.BOTH):
            worst = max(worst, _vec_gap(out[i], permute_product(base_out, r)[i]))
        if mode in (EquivarianceMode.OPI, EquivarianceMode.BOTH):
            for j in range(n):
                if j != i:
                    worst = max(worst, _vec_gap(out[j], base_out[j]))
    if mode is EquivarianceMode.BOTH:
        out = f(permute_game(game, rho))
        expected = permute_product(base_out, rho)
        worst = max(worst, max(_vec_gap(a, b) for a, b in zip(out, expected)))
    return worst
