"""
Module/Script Name: federation.py
Path: fedpoison/federation.py

Description:
Federated learning simulation loop.

Each round the global model is broadcast, every client trains locally, the
attacker (if any) replaces the submissions of clients 0..f-1, the defense
aggregates, the global model is updated and scored on the held-out test
split. Parameter aggregation and gradient aggregation are both supported.

All randomness is drawn from generators seeded by (seed, round, client id),
so a run is a pure function of its ExperimentConfig.

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

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from .aggregation import AggregationRule, ClientUpdate, DefenseRegistry, create_default_registry
from .attacks import AttackContext, AttackDiagnostics, Attacker, TrainConfig
from .config_schema import ExperimentConfig, Mode
from .data import DataSplit, Partition, make_dataset, make_partition
from .errors import NumericError
from .metrics import macro_ovr_auc
from .nn_core import (
    Batch,
    ModelSpec,
    ModelState,
    init_model,
    iter_minibatches,
    loss_and_grad,
    make_optimizer,
    optimizer_step,
    predict_proba,
)


def client_rng(seed: int, round_idx: int, client_id: int) -> np.random.Generator:
    return np.random.default_rng([seed, round_idx, client_id])


@dataclass(frozen=True)
class ClientShard:
    """A client's local data; batch is None for an empty shard."""

    client_id: int
    batch: Optional[Batch]


@dataclass(frozen=True)
class RoundRecord:
    """Outcome of one communication round."""

    round: int
    test_auc: float
    defense: str
    attack: str
    selected: Optional[int] = None
    weights: List[Tuple[int, float]] = field(default_factory=list)
    diagnostics: AttackDiagnostics = field(default_factory=AttackDiagnostics)
    wallclock_s: Optional[float] = None


@dataclass(frozen=True)
class SimulationState:
    """Everything a round needs; only global_params changes between rounds."""

    spec: ModelSpec
    split: DataSplit
    partition: Partition
    global_params: np.ndarray
    rule: AggregationRule
    attacker: Attacker

    def shard(self, client_id: int) -> ClientShard:
        indices = self.partition.client_indices[client_id]
        if indices.size == 0:
            return ClientShard(client_id, None)
        return ClientShard(client_id, self.split.train.take(indices))


def _train_client(
    spec: ModelSpec,
    batch: Batch,
    global_params: np.ndarray,
    cfg: ExperimentConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """local_epochs of minibatch training from global_params; returns final params."""
    state = ModelState(spec, np.array(global_params, dtype=np.float64))
    opt = make_optimizer(cfg.optimizer, cfg.lr_local, cfg.beta1, cfg.beta2, cfg.eps)
    for _ in range(cfg.local_epochs):
        for minibatch in iter_minibatches(batch, cfg.batch_size, rng):
            _, grad = loss_and_grad(state, minibatch)
            state = optimizer_step(state, grad, opt)
    return state.params


def _local_submission(
    shard: ClientShard,
    global_params: np.ndarray,
    spec: ModelSpec,
    cfg: ExperimentConfig,
    round_idx: int,
    kind: Mode,
) -> Optional[Tuple[ClientUpdate, np.ndarray]]:
    """(submitted update, final local params), or None for an empty shard."""
    if shard.batch is None:
        logger.warning(f"client {shard.client_id} has no data; skipped this round")
        return None
    rng = client_rng(cfg.seed, round_idx, shard.client_id)
    params = _train_client(spec, shard.batch, global_params, cfg, rng)
    if kind == "parameters":
        vector = params
    else:
        vector = (np.asarray(global_params) - params) / cfg.lr_local
    return ClientUpdate(shard.client_id, kind, vector, len(shard.batch)), params


def local_train_params(
    shard: ClientShard,
    global_params: np.ndarray,
    spec: ModelSpec,
    cfg: ExperimentConfig,
    round_idx: int,
) -> Optional[ClientUpdate]:
    """
    Honest local training; submits the final parameters.

    Returns:
        ClientUpdate of kind "parameters", or None for an empty shard
    """
    submission = _local_submission(shard, global_params, spec, cfg, round_idx, "parameters")
    return submission[0] if submission else None


def local_train_grads(
    shard: ClientShard,
    global_params: np.ndarray,
    spec: ModelSpec,
    cfg: ExperimentConfig,
    round_idx: int,
) -> Optional[ClientUpdate]:
    """
    Honest local training; submits (global - final) / lr_local.

    After one full-batch SGD step this is the batch gradient at global_params.

    Returns:
        ClientUpdate of kind "gradients", or None for an empty shard
    """
    submission = _local_submission(shard, global_params, spec, cfg, round_idx, "gradients")
    return submission[0] if submission else None


def build_state(
    cfg: ExperimentConfig, registry: Optional[DefenseRegistry] = None
) -> SimulationState:
    """Generate data, partition it, initialise the global model and pick the rules."""
    split = make_dataset(cfg)
    spec = ModelSpec(cfg.layer_sizes(split.train.input_dim, split.train.class_count))
    partition = make_partition(cfg, split.train)
    registry = registry or create_default_registry(cfg.assumed_f, cfg.trim_k)
    logger.debug(
        f"dataset: {len(split.train)} train / {len(split.test)} test rows, "
        f"shard sizes {partition.sizes()}, d={spec.param_dim}"
    )
    return SimulationState(
        spec=spec,
        split=split,
        partition=partition,
        global_params=init_model(spec, cfg.seed).params,
        rule=registry.get(cfg.defense.kind),
        attacker=Attacker(cfg.attack, TrainConfig.from_experiment(cfg)),
    )


def evaluate_auc(spec: ModelSpec, params: np.ndarray, split: DataSplit) -> float:
    """Macro one-vs-rest AUC of the model on the test split."""
    probabilities = predict_proba(ModelState(spec, params), split.test.inputs)
    if not np.all(np.isfinite(probabilities)):
        raise NumericError("model produced non-finite probabilities", component="federation")
    return macro_ovr_auc(probabilities, split.test.labels)


def run_round(
    state: SimulationState, cfg: ExperimentConfig, round_idx: int
) -> Tuple[np.ndarray, RoundRecord]:
    """
    One communication round.

    Returns:
        (new global parameter vector, RoundRecord)

    Raises:
        AggregationError: If the defense rejects the round's updates
        NumericError: If the global model stops being finite
    """
    started = time.perf_counter()
    attacker = state.attacker
    attacking = attacker.kind != "none"
    malicious_ids = set(range(cfg.f)) if attacking else set()

    updates: List[ClientUpdate] = []
    final_params: Dict[int, np.ndarray] = {}
    for client_id in range(len(state.partition)):
        shard = state.shard(client_id)
        if client_id in malicious_ids and shard.batch is not None:
            shard = ClientShard(
                client_id, attacker.poison_batch(shard.batch, state.spec.num_classes)
            )
        submission = _local_submission(
            shard, state.global_params, state.spec, cfg, round_idx, cfg.mode
        )
        if submission is None:
            continue
        update, params = submission
        updates.append(update)
        final_params[client_id] = params

    diagnostics = AttackDiagnostics()
    malicious = [u for u in updates if u.client_id in malicious_ids]
    if attacking and len(malicious) < 2:
        logger.warning(
            f"round {round_idx}: only {len(malicious)} malicious client(s) hold data; "
            "submitting their updates unchanged"
        )
    elif attacking:
        combined = np.concatenate(
            [state.partition.client_indices[u.client_id] for u in malicious]
        )
        ctx = AttackContext(
            spec=state.spec,
            malicious_updates=malicious,
            malicious_params=[final_params[u.client_id] for u in malicious],
            combined_data=state.split.train.take(combined) if combined.size else None,
            mode=cfg.mode,
        )
        outcome = attacker.apply(ctx, cfg.seed, round_idx)
        replacements = {u.client_id: u for u in outcome.updates}
        updates = [replacements.get(u.client_id, u) for u in updates]
        diagnostics = outcome.diagnostics

    aggregated = state.rule.aggregate(updates)
    if cfg.mode == "parameters":
        new_params = aggregated.aggregate
    else:
        new_params = state.global_params - cfg.lr_server * aggregated.aggregate
    if not np.all(np.isfinite(new_params)):
        raise NumericError(
            f"global model is non-finite after round {round_idx}",
            component="federation",
            details={"round": round_idx},
        )

    auc = evaluate_auc(state.spec, new_params, state.split)
    record = RoundRecord(
        round=round_idx,
        test_auc=auc,
        defense=state.rule.name,
        attack=attacker.kind,
        selected=aggregated.selected,
        weights=aggregated.weights_by_client(),
        diagnostics=diagnostics,
        wallclock_s=time.perf_counter() - started if cfg.output.wallclock else None,
    )
    logger.debug(f"round {round_idx}: auc {auc:.4f}")
    return new_params, record


class FederatedSimulation:
    """
    Runs an experiment round by round.

    Usage:
        sim = FederatedSimulation(cfg)
        records = sim.run(sink=writer.write, progress_callback=print_progress)
    """

    def __init__(self, cfg: ExperimentConfig, registry: Optional[DefenseRegistry] = None):
        self.cfg = cfg
        self.state = build_state(cfg, registry)

    @property
    def global_params(self) -> np.ndarray:
        return self.state.global_params

    def run(
        self,
        sink: Optional[Callable[[RoundRecord], None]] = None,
        progress_callback: Optional[Callable[[int, str], None]] = None,
    ) -> List[RoundRecord]:
        """
        Run all rounds, streaming each record to sink as it is produced.

        Args:
            sink: Called with every RoundRecord
            progress_callback: Optional callback for progress updates (percent: int, message: str)
        """
        cfg = self.cfg
        logger.info(
            f"running {cfg.rounds} rounds: mode={cfg.mode}, defense={cfg.defense.kind}, "
            f"attack={cfg.attack.kind}, n={cfg.n}, f={cfg.f}, seed={cfg.seed}"
        )
        records: List[RoundRecord] = []
        for round_idx in range(1, cfg.rounds + 1):
            new_params, record = run_round(self.state, cfg, round_idx)
            self.state = replace(self.state, global_params=new_params)
            records.append(record)
            if sink:
                sink(record)
            if progress_callback:
                progress_callback(
                    int(100 * round_idx / cfg.rounds),
                    f"round {round_idx}/{cfg.rounds} auc={record.test_auc:.4f}",
                )
        logger.info(f"finished: final auc {records[-1].test_auc:.4f}")
        return records


def run_experiment(
    cfg: ExperimentConfig, sink: Optional[Callable[[RoundRecord], None]] = None
) -> List[RoundRecord]:
    """Run a full experiment and return its records in round order."""
    return FederatedSimulation(cfg).run(sink=sink)


def train_centralized(cfg: ExperimentConfig) -> List[np.ndarray]:
    """
    Train a single model on the whole training split, one local-training pass
    per round with client 0's random stream.

    Returns:
        Parameter vector after each round
    """
    split = make_dataset(cfg)
    spec = ModelSpec(cfg.layer_sizes(split.train.input_dim, split.train.class_count))
    params = init_model(spec, cfg.seed).params
    batch = split.train.batch()
    trajectory = []
    for round_idx in range(1, cfg.rounds + 1):
        params = _train_client(spec, batch, params, cfg, client_rng(cfg.seed, round_idx, 0))
        trajectory.append(params)
    return trajectory
