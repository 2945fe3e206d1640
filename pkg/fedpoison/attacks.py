"""
Module/Script Name: attacks.py
Path: fedpoison/attacks.py

Description:
Model poisoning attacks run by the f compromised clients.

The attacker sees only what its own clients see: their honest local updates,
their local parameters and their training data. From those it computes the
malicious mean and a distance threshold, builds one malicious update and
installs it on every controlled client.

Supports:
- DISBELIEVE on parameters (train away from the data inside the P_dist ball)
- DISBELIEVE on gradients (unit malicious gradient scaled by bisection into
  the G_dist ball)
- LIE (mean minus z standard deviations)
- Min-Max (mean pushed along a direction as far as the spread allows)
- Gaussian noise, scaling and label flipping baselines

Author(s):
fedpoison maintainers

Created Date:
2026-10-19

Last Modified Date:
2026-10-19

Version:
v1.0.0

Comments:
- v1.0.0: Initial implementation
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.spatial.distance import pdist

from .aggregation import ClientUpdate
from .config_schema import AttackConfig, ExperimentConfig, Mode
from .errors import AttackError, DegenerateAttackError
from .nn_core import (
    Batch,
    ModelSpec,
    ModelState,
    iter_minibatches,
    loss_and_grad,
    make_optimizer,
    optimizer_step,
)

SCALE_SEARCH_START = 0.001
SCALE_SEARCH_END = 1000.0
SCALE_SEARCH_TOLERANCE = 0.01

MIN_MAX_GAMMA_MAX = 1000.0
MIN_MAX_TOLERANCE = 0.01

ATTACK_STREAM_OFFSET = 10_000


def attack_rng(seed: int, round_idx: int, client_id: int) -> np.random.Generator:
    """Attacker-side random stream, disjoint from the honest client streams."""
    return np.random.default_rng([seed, round_idx, ATTACK_STREAM_OFFSET + client_id])


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters the attacker uses to train its malicious model M."""

    optimizer: str = "sgd"
    lr: float = 0.01
    batch_size: int = 16
    max_epochs: int = 5
    grad_epochs: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def from_experiment(cls, cfg: ExperimentConfig) -> TrainConfig:
        """Attack overrides where given, honest client settings otherwise."""
        attack = cfg.attack
        return cls(
            optimizer=attack.optimizer or cfg.optimizer,
            lr=attack.lr if attack.lr is not None else cfg.lr_local,
            batch_size=attack.batch_size if attack.batch_size is not None else cfg.batch_size,
            max_epochs=attack.max_epochs,
            grad_epochs=attack.grad_epochs,
            beta1=cfg.beta1,
            beta2=cfg.beta2,
            eps=cfg.eps,
        )


@dataclass(frozen=True)
class AttackContext:
    """Everything the attacker observes in one round."""

    spec: ModelSpec
    malicious_updates: List[ClientUpdate]
    malicious_params: List[np.ndarray]
    combined_data: Optional[Batch]
    mode: Mode

    def __post_init__(self) -> None:
        f = len(self.malicious_updates)
        if f < 2:
            raise AttackError(f"attacks need f >= 2 malicious clients, got {f}", {"f": f})
        if len(self.malicious_params) != f:
            raise AttackError(
                f"{len(self.malicious_params)} parameter vectors for {f} malicious updates"
            )
        d = self.spec.param_dim
        for vector in [u.vector for u in self.malicious_updates] + list(self.malicious_params):
            if np.shape(vector) != (d,):
                raise AttackError(f"malicious vector of shape {np.shape(vector)}, expected ({d},)")

    @property
    def f(self) -> int:
        return len(self.malicious_updates)

    def update_matrix(self) -> np.ndarray:
        return np.stack([u.vector for u in self.malicious_updates])


@dataclass
class AttackDiagnostics:
    """Per-round attack bookkeeping written to the run CSV."""

    mu_param_norm: Optional[float] = None
    mu_grad_norm: Optional[float] = None
    threshold: Optional[float] = None
    achieved_sq_dist: Optional[float] = None
    sf: Optional[float] = None
    fallback_used: Optional[bool] = None
    training_steps: int = 0
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ScaleSearchResult:
    sf: float
    diff: float
    iterations: int
    fallback_used: bool


def malicious_means(ctx: AttackContext) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Element-wise means of the malicious clients' parameters and, in gradient
    mode, of their submitted gradients.
    """
    mu_param = np.mean(np.stack(ctx.malicious_params), axis=0)
    mu_grad = ctx.update_matrix().mean(axis=0) if ctx.mode == "gradients" else None
    return mu_param, mu_grad


def pairwise_extreme_sqdist(
    vectors: Sequence[np.ndarray], which: Literal["max", "min"]
) -> float:
    """
    Largest or smallest squared Euclidean distance over all unordered pairs.

    Raises:
        AttackError: With fewer than two vectors
    """
    if len(vectors) < 2:
        raise AttackError(f"pairwise distances need at least 2 vectors, got {len(vectors)}")
    distances = pdist(np.stack([np.asarray(v, dtype=np.float64) for v in vectors]), "sqeuclidean")
    if which == "max":
        return float(distances.max())
    if which == "min":
        return float(distances.min())
    raise ValueError(f"which must be 'max' or 'min', got '{which}'")


def _require_data(ctx: AttackContext) -> Batch:
    if ctx.combined_data is None or len(ctx.combined_data) == 0:
        raise AttackError("malicious clients hold no training data")
    return ctx.combined_data


def disbelieve_params(
    ctx: AttackContext, train_cfg: TrainConfig, rng: np.random.Generator
) -> Tuple[np.ndarray, AttackDiagnostics]:
    """
    DISBELIEVE on parameters.

    M starts at mu_param and trains on the combined malicious data with the
    negated classification loss. After every optimizer step the squared
    distance to mu_param is checked against P_dist (largest squared distance
    between two malicious clients); the first step that leaves the ball is
    undone and training stops. Training also stops after max_epochs.

    Returns:
        (malicious parameter vector, diagnostics); the vector always lies
        within P_dist of mu_param

    Raises:
        AttackError: Outside parameter mode, or without training data
    """
    if ctx.mode != "parameters":
        raise AttackError("disbelieve_params runs in parameter mode only")
    data = _require_data(ctx)
    mu_param, _ = malicious_means(ctx)
    p_dist = pairwise_extreme_sqdist(ctx.malicious_params, "max")

    state = ModelState(ctx.spec, mu_param.copy())
    opt = make_optimizer(
        train_cfg.optimizer, train_cfg.lr, train_cfg.beta1, train_cfg.beta2, train_cfg.eps
    )
    steps = 0
    achieved = 0.0
    left_ball = False
    for _ in range(train_cfg.max_epochs):
        for minibatch in iter_minibatches(data, train_cfg.batch_size, rng):
            _, grad = loss_and_grad(state, minibatch, sign=-1)
            candidate = optimizer_step(state, grad, opt)
            sq_dist = float(np.sum((candidate.params - mu_param) ** 2))
            if sq_dist > p_dist:
                left_ball = True
                break
            state = candidate
            achieved = sq_dist
            steps += 1
        if left_ball:
            break

    logger.debug(
        f"disbelieve(params): {steps} steps, sq_dist {achieved:.6g} of P_dist {p_dist:.6g}"
    )
    diagnostics = AttackDiagnostics(
        mu_param_norm=float(np.linalg.norm(mu_param)),
        threshold=p_dist,
        achieved_sq_dist=achieved,
        training_steps=steps,
    )
    return state.params, diagnostics


def binary_search_scale(g_hat: np.ndarray, mu_grad: np.ndarray, g_dist: float) -> ScaleSearchResult:
    """
    Find the scale sf so that ||sf * g_hat - mu_grad||^2 <= g_dist.

    Bisection on [0.001, 1000] until the bracket is narrower than 0.01: an
    infeasible midpoint moves the lower end up, a feasible one moves the
    upper end down. The last midpoint is returned when feasible, else the
    last feasible midpoint seen. When no midpoint was feasible the
    minimiser of the distance, <g_hat, mu_grad> clamped to the interval, is
    used instead and fallback_used is set.

    Raises:
        AttackError: If g_hat is not a unit vector or g_dist < 0
    """
    g_hat = np.asarray(g_hat, dtype=np.float64)
    mu_grad = np.asarray(mu_grad, dtype=np.float64)
    if abs(float(np.linalg.norm(g_hat)) - 1.0) > 1e-9:
        raise AttackError("binary_search_scale needs a unit direction")
    if g_dist < 0:
        raise AttackError(f"G_dist must be >= 0, got {g_dist}")

    def sq_diff(sf: float) -> float:
        return float(np.sum((sf * g_hat - mu_grad) ** 2))

    start, end = SCALE_SEARCH_START, SCALE_SEARCH_END
    iterations = 0
    sf = diff = float("nan")
    feasible: Optional[Tuple[float, float]] = None
    while abs(start - end) > SCALE_SEARCH_TOLERANCE:
        iterations += 1
        sf = (start + end) / 2.0
        diff = sq_diff(sf)
        if diff > g_dist:
            start = sf
        else:
            end = sf
            feasible = (sf, diff)

    if diff <= g_dist:
        return ScaleSearchResult(sf, diff, iterations, False)
    if feasible is not None:
        return ScaleSearchResult(feasible[0], feasible[1], iterations, False)

    sf_star = float(np.clip(np.dot(g_hat, mu_grad), SCALE_SEARCH_START, SCALE_SEARCH_END))
    logger.warning(
        f"scale search found no feasible sf in [{SCALE_SEARCH_START}, {SCALE_SEARCH_END}]; "
        f"using closest-point scale {sf_star:.6g}"
    )
    return ScaleSearchResult(sf_star, sq_diff(sf_star), iterations, True)


def ball_edge_scale(g_hat: np.ndarray, mu_grad: np.ndarray, g_dist: float) -> Optional[float]:
    """
    Largest sf in [0.001, 1000] with ||sf * g_hat - mu_grad||^2 <= g_dist.

    diff(sf) = sf^2 - 2 sf a + ||mu||^2 with a = <g_hat, mu_grad>, so the
    feasible scales are a +/- sqrt(a^2 - ||mu||^2 + g_dist). The upper root is
    pulled in by a relative 1e-9 so the result stays inside the ball.

    Returns:
        The scale, or None when no scale in the interval is feasible
    """
    a = float(np.dot(g_hat, mu_grad))
    discriminant = a * a - float(np.dot(mu_grad, mu_grad)) + g_dist
    if discriminant < 0:
        return None
    half_width = float(np.sqrt(discriminant))
    upper = a + half_width * (1.0 - 1e-9)
    if upper < SCALE_SEARCH_START or a - half_width > SCALE_SEARCH_END:
        return None
    return float(min(upper, SCALE_SEARCH_END))


def disbelieve_grads(
    ctx: AttackContext, train_cfg: TrainConfig, rng: np.random.Generator
) -> Tuple[np.ndarray, AttackDiagnostics]:
    """
    DISBELIEVE on gradients.

    M starts at mu_param and trains for grad_epochs on the negated loss with
    no distance check. Its full-batch gradient over the combined data is
    normalised and rescaled by binary_search_scale against G_dist (smallest
    squared distance between two malicious gradients). When the search falls
    back and part of the G_dist ball is reachable along the unit gradient, the
    scale moves out to the ball edge (ball_edge_scale).

    Returns:
        (sf * unit malicious gradient, diagnostics)

    Raises:
        AttackError: Outside gradient mode, or without training data
        DegenerateAttackError: If the malicious gradient is exactly zero
    """
    if ctx.mode != "gradients":
        raise AttackError("disbelieve_grads runs in gradient mode only")
    data = _require_data(ctx)
    mu_param, mu_grad = malicious_means(ctx)
    assert mu_grad is not None
    g_dist = pairwise_extreme_sqdist([u.vector for u in ctx.malicious_updates], "min")

    state = ModelState(ctx.spec, mu_param.copy())
    opt = make_optimizer(
        train_cfg.optimizer, train_cfg.lr, train_cfg.beta1, train_cfg.beta2, train_cfg.eps
    )
    steps = 0
    for _ in range(train_cfg.grad_epochs):
        for minibatch in iter_minibatches(data, train_cfg.batch_size, rng):
            _, grad = loss_and_grad(state, minibatch, sign=-1)
            state = optimizer_step(state, grad, opt)
            steps += 1

    _, malicious_grad = loss_and_grad(state, data, sign=-1)
    norm = float(np.linalg.norm(malicious_grad))
    if norm == 0.0:
        raise DegenerateAttackError(
            "malicious gradient is zero and cannot be normalised", {"training_steps": steps}
        )
    g_hat = malicious_grad / norm
    search = binary_search_scale(g_hat, mu_grad, g_dist)
    sf, diff = search.sf, search.diff
    edge_scaled = False
    if search.fallback_used:
        # a descent-opposing g_hat makes diff increase over the whole bracket,
        # so the bisection never visits the feasible scales near 0.001
        edge = ball_edge_scale(g_hat, mu_grad, g_dist)
        if edge is not None and edge > sf:
            sf = edge
            diff = float(np.sum((sf * g_hat - mu_grad) ** 2))
            edge_scaled = True

    logger.debug(
        f"disbelieve(grads): sf {sf:.6g} after {search.iterations} iterations, "
        f"diff {diff:.6g} of G_dist {g_dist:.6g}" + (" (ball edge)" if edge_scaled else "")
    )
    diagnostics = AttackDiagnostics(
        mu_param_norm=float(np.linalg.norm(mu_param)),
        mu_grad_norm=float(np.linalg.norm(mu_grad)),
        threshold=g_dist,
        achieved_sq_dist=diff,
        sf=sf,
        fallback_used=search.fallback_used,
        training_steps=steps,
        extra={"search_iterations": search.iterations, "edge_scaled": edge_scaled},
    )
    return sf * g_hat, diagnostics


def lie_attack(ctx: AttackContext, z: float) -> np.ndarray:
    """LIE: per coordinate mu - z * sigma (population standard deviation)."""
    updates = ctx.update_matrix()
    return updates.mean(axis=0) - z * updates.std(axis=0)


def min_max_attack(
    ctx: AttackContext, direction: Literal["inverse-unit", "negative-std"] = "inverse-unit"
) -> np.ndarray:
    """
    Min-Max: mu + gamma * p with the largest gamma in [0, 1000] (bisection,
    tolerance 0.01) whose Euclidean distance to every known update stays
    within the largest distance between two known updates.

    p is -mu / ||mu|| (inverse-unit) or -sigma (negative-std). A zero mean
    falls back to negative-std.
    """
    updates = ctx.update_matrix()
    mu = updates.mean(axis=0)
    if direction == "inverse-unit":
        mu_norm = float(np.linalg.norm(mu))
        if mu_norm == 0.0:
            logger.warning("min-max: mean update is zero; using negative-std direction")
            direction = "negative-std"
        else:
            perturbation = -mu / mu_norm
    if direction == "negative-std":
        perturbation = -updates.std(axis=0)

    threshold = float(pdist(updates, "euclidean").max())

    def worst_distance(gamma: float) -> float:
        return float(np.linalg.norm(mu + gamma * perturbation - updates, axis=1).max())

    lo, hi = 0.0, MIN_MAX_GAMMA_MAX
    while hi - lo > MIN_MAX_TOLERANCE:
        mid = (lo + hi) / 2.0
        if worst_distance(mid) <= threshold:
            lo = mid
        else:
            hi = mid
    logger.debug(f"min-max: gamma {lo:.6g}, distance bound {threshold:.6g}")
    return mu + lo * perturbation


def gaussian_noise_attack(update: np.ndarray, sigma: float, seed: Any) -> np.ndarray:
    """update + N(0, sigma^2 I) drawn from default_rng(seed)."""
    update = np.asarray(update, dtype=np.float64)
    if sigma < 0:
        raise AttackError(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return update.copy()
    return update + sigma * np.random.default_rng(seed).standard_normal(update.shape)


def scale_attack(update: np.ndarray, lam: float) -> np.ndarray:
    return lam * np.asarray(update, dtype=np.float64)


def label_flip(batch: Batch, class_count: int) -> Batch:
    """
    Reverse the labels: y -> (C - 1) - y. Inputs are untouched.

    Raises:
        AttackError: If a label lies outside [0, C)
    """
    if batch.labels.min() < 0 or batch.labels.max() >= class_count:
        raise AttackError(f"labels must lie in [0, {class_count}) to flip")
    return Batch(batch.inputs, (class_count - 1) - batch.labels)


@dataclass(frozen=True)
class AttackOutcome:
    """Replacement updates for the malicious clients plus diagnostics."""

    updates: List[ClientUpdate]
    diagnostics: AttackDiagnostics


def _replicate(updates: Sequence[ClientUpdate], vector: np.ndarray) -> List[ClientUpdate]:
    return [
        ClientUpdate(u.client_id, u.kind, vector.copy(), u.num_samples) for u in updates
    ]


class Attacker:
    """
    Runs the configured attack for one round.

    Usage:
        attacker = Attacker(cfg.attack, TrainConfig.from_experiment(cfg))
        outcome = attacker.apply(ctx, seed=cfg.seed, round_idx=r)
    """

    def __init__(self, attack_cfg: AttackConfig, train_cfg: TrainConfig):
        self.cfg = attack_cfg
        self.train_cfg = train_cfg

    @property
    def kind(self) -> str:
        return self.cfg.kind

    @property
    def poisons_data(self) -> bool:
        """Label flipping acts on training data before local training."""
        return self.cfg.kind == "label_flip"

    def poison_batch(self, batch: Batch, class_count: int) -> Batch:
        return label_flip(batch, class_count) if self.poisons_data else batch

    def apply(self, ctx: AttackContext, seed: int, round_idx: int) -> AttackOutcome:
        """
        Build the malicious submissions for this round.

        Raises:
            AttackError: If the attack's preconditions do not hold
        """
        kind = self.cfg.kind
        honest = ctx.malicious_updates
        if kind in ("none", "label_flip"):
            return AttackOutcome(list(honest), AttackDiagnostics())

        if kind == "noise":
            noisy = [
                ClientUpdate(
                    u.client_id,
                    u.kind,
                    gaussian_noise_attack(
                        u.vector,
                        self.cfg.sigma,
                        [seed, round_idx, ATTACK_STREAM_OFFSET + u.client_id],
                    ),
                    u.num_samples,
                )
                for u in honest
            ]
            return AttackOutcome(noisy, AttackDiagnostics())

        if kind == "scale":
            scaled = [
                ClientUpdate(
                    u.client_id, u.kind, scale_attack(u.vector, self.cfg.scale), u.num_samples
                )
                for u in honest
            ]
            return AttackOutcome(scaled, AttackDiagnostics())

        mu_update = ctx.update_matrix().mean(axis=0)
        if kind == "lie":
            vector = lie_attack(ctx, self.cfg.z)
            diagnostics = AttackDiagnostics(
                achieved_sq_dist=float(np.sum((vector - mu_update) ** 2))
            )
        elif kind == "min_max":
            vector = min_max_attack(ctx, self.cfg.direction)
            diagnostics = AttackDiagnostics(
                achieved_sq_dist=float(np.sum((vector - mu_update) ** 2))
            )
        elif kind == "disbelieve":
            rng = attack_rng(seed, round_idx, min(u.client_id for u in honest))
            if ctx.mode == "parameters":
                vector, diagnostics = disbelieve_params(ctx, self.train_cfg, rng)
            else:
                try:
                    vector, diagnostics = disbelieve_grads(ctx, self.train_cfg, rng)
                except DegenerateAttackError as e:
                    logger.warning(f"{e}; malicious clients send the mean gradient")
                    vector = mu_update
                    diagnostics = AttackDiagnostics(
                        mu_grad_norm=float(np.linalg.norm(mu_update)), achieved_sq_dist=0.0
                    )
        else:
            raise AttackError(f"unknown attack kind '{kind}'")

        return AttackOutcome(_replicate(honest, vector), diagnostics)
