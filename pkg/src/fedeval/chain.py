"""Simulated blockchain with deterministic contract re-execution.

One miner per height is selected as leader and proposes a block. The
block's state transition (secure aggregation of the round's masked
updates, per-group Shapley evaluation, global-model update) is a pure
function of the previous state and the transactions, so every honest
miner re-executes it and accepts only on a bit-exact state digest match.
A fraudulent leader who inflates its own contribution is rejected and the
next selected leader re-proposes.

State digests are SHA-256 over a canonical, field-ordered, length-prefixed
serialization with all reals written as raw little-endian 64-bit patterns,
which makes verification an integer comparison rather than a tolerance
question.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .model import (
    Dataset,
    TrainConfig,
    UtilityEvaluator,
    average_weights,
    train_local,
    weight_length,
    zero_weights,
)
from .rng import SplitMix64, derive_u64, hash_seed
from .secure_agg import (
    DHParams,
    FixedPointCodec,
    MaskedUpdate,
    derive_shared,
    keygen,
    mask_update,
    secure_aggregate,
)
from .shapley import (
    ContributionLedger,
    Grouping,
    RoundContribution,
    accumulate,
    group_sv_round,
    grouping,
    permutation,
)

# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------


def _u64(x: int) -> bytes:
    return int(x).to_bytes(8, "little")


def _f64(x: float) -> bytes:
    return struct.pack("<d", float(x))


def _blob(b: bytes) -> bytes:
    return _u64(len(b)) + b


def _bigint(n: int) -> bytes:
    n = int(n)
    return _blob(n.to_bytes(max(1, (n.bit_length() + 7) // 8), "big"))


def _u64_array(a: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(a, dtype="<u8")
    return _u64(arr.size) + arr.tobytes()


def _f64_array(a: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(a, dtype="<f8")
    return _u64(arr.size) + arr.tobytes()


def _str(s: str) -> bytes:
    return _blob(s.encode("utf-8"))


def dataset_digest(data: Dataset) -> bytes:
    h = hashlib.sha256()
    h.update(b"dataset-v1")
    h.update(_u64(data.num_classes))
    h.update(_u64(data.features.shape[0]))
    h.update(_u64(data.features.shape[1]))
    h.update(np.ascontiguousarray(data.features, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(data.labels, dtype="<i8").tobytes())
    return h.digest()


def model_digest(weights: np.ndarray) -> bytes:
    return hashlib.sha256(b"model-v1" + _f64_array(weights)).digest()


def _ser_contribution(rc: RoundContribution) -> bytes:
    parts = [_u64(rc.round), _u64(len(rc.per_owner))]
    for owner in sorted(rc.per_owner):
        parts.append(_u64(owner) + _f64(rc.per_owner[owner]))
    parts.append(_u64(len(rc.per_group)))
    for j in sorted(rc.per_group):
        parts.append(_u64(j) + _f64(rc.per_group[j]))
    return b"".join(parts)


def _ser_ledger(ledger: ContributionLedger) -> bytes:
    parts = [_u64(len(ledger.rounds))]
    parts.extend(_ser_contribution(rc) for rc in ledger.rounds)
    parts.append(_u64(len(ledger.totals)))
    for owner in sorted(ledger.totals):
        parts.append(_u64(owner) + _f64(ledger.totals[owner]))
    return b"".join(parts)


# ---------------------------------------------------------------------------
# Transactions and blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfigTx:
    """On-chain run parameters agreed at the off-chain setup stage."""

    owners: tuple[int, ...]
    rounds: int
    num_groups: int
    perm_seed: int
    train: TrainConfig
    dh: DHParams
    codec: FixedPointCodec
    test_digest: bytes
    utility_spec: str = "top1-accuracy"


@dataclass(frozen=True)
class PubKeyTx:
    owner: int
    public: int


@dataclass(frozen=True)
class MaskedUpdateTx:
    update: MaskedUpdate


@dataclass(frozen=True)
class EvalResultTx:
    """Leader's claimed round result, re-derived exactly by every verifier."""

    round: int
    global_digest: bytes
    contribution: RoundContribution


Transaction = ConfigTx | PubKeyTx | MaskedUpdateTx | EvalResultTx


@dataclass(frozen=True)
class Block:
    height: int
    proposer: int
    txs: tuple[Transaction, ...]
    state_digest: bytes
    prev_digest: bytes


class TxRejected(Exception):
    """Typed rejection raised by the state transition."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


def _ser_config(cfg: ConfigTx) -> bytes:
    parts = [_u64(len(cfg.owners))]
    parts.extend(_u64(o) for o in cfg.owners)
    parts.append(_u64(cfg.rounds))
    parts.append(_u64(cfg.num_groups))
    parts.append(_u64(cfg.perm_seed))
    parts.append(_f64(cfg.train.learning_rate))
    parts.append(_u64(cfg.train.local_epochs))
    parts.append(_u64(cfg.train.rng_seed))
    parts.append(_bigint(cfg.dh.p))
    parts.append(_bigint(cfg.dh.g))
    parts.append(_u64(cfg.codec.frac_bits))
    parts.append(_f64(cfg.codec.bound))
    parts.append(_blob(cfg.test_digest))
    parts.append(_str(cfg.utility_spec))
    return b"".join(parts)


# ---------------------------------------------------------------------------
# Chain state
# ---------------------------------------------------------------------------


@dataclass
class ChainState:
    """Full contract state; everything the digest covers lives here.

    The test set itself is off-chain context, committed by digest in the
    ConfigTx and assumed locally available to every miner.
    """

    test_set: Dataset
    config: ConfigTx | None = None
    public_keys: dict[int, int] = field(default_factory=dict)
    pending: dict[int, dict[int, MaskedUpdate]] = field(default_factory=dict)
    global_model: np.ndarray | None = None
    ledger: ContributionLedger = field(default_factory=ContributionLedger)
    round_counter: int = 0

    @classmethod
    def initial(cls, test_set: Dataset) -> "ChainState":
        model = zero_weights(test_set.num_classes, test_set.num_features)
        return cls(test_set=test_set, global_model=model)

    def copy(self) -> "ChainState":
        # Arrays, ledger, and config are replaced wholesale on update, so
        # sharing them across copies is safe.
        return ChainState(
            test_set=self.test_set,
            config=self.config,
            public_keys=dict(self.public_keys),
            pending={r: dict(m) for r, m in self.pending.items()},
            global_model=self.global_model,
            ledger=self.ledger,
            round_counter=self.round_counter,
        )

    def canonical_bytes(self) -> bytes:
        parts = [b"chain-state-v1"]
        if self.config is None:
            parts.append(b"\x00")
        else:
            parts.append(b"\x01" + _ser_config(self.config))
        parts.append(_u64(len(self.public_keys)))
        for owner in sorted(self.public_keys):
            parts.append(_u64(owner) + _bigint(self.public_keys[owner]))
        parts.append(_u64(len(self.pending)))
        for r in sorted(self.pending):
            updates = self.pending[r]
            parts.append(_u64(r) + _u64(len(updates)))
            for owner in sorted(updates):
                upd = updates[owner]
                parts.append(_u64(owner) + _u64(upd.group) + _u64_array(upd.payload))
        parts.append(_f64_array(self.global_model))
        parts.append(_ser_ledger(self.ledger))
        parts.append(_u64(self.round_counter))
        return b"".join(parts)

    def digest(self) -> bytes:
        return hashlib.sha256(self.canonical_bytes()).digest()

    def evaluator(self) -> UtilityEvaluator:
        return UtilityEvaluator(self.test_set)


def _expected_payload_length(state: ChainState) -> int:
    return weight_length(state.test_set.num_classes, state.test_set.num_features)


def _round_grouping(config: ConfigTx, round_index: int) -> Grouping:
    pi = permutation(config.perm_seed, round_index, list(config.owners))
    return grouping(pi, config.num_groups)


def _round_recompute(
    state: ChainState,
) -> tuple[Grouping, list[np.ndarray], RoundContribution, np.ndarray]:
    """Re-derive the round's group models, contributions, and global model.

    Pure function of the chain state; the proposer and every verifier call
    exactly this, which is what makes acceptance a bit-equality check.
    """
    config = state.config
    r = state.round_counter
    parts = _round_grouping(config, r)
    updates = state.pending.get(r, {})
    missing = set(config.owners) - set(updates)
    if missing:
        raise TxRejected("missing updates", f"round {r} lacks owners {sorted(missing)}")
    group_models = [
        secure_aggregate([updates[o] for o in grp], list(grp), config.codec)
        for grp in parts.groups
    ]
    # Empty-coalition model for the round's Shapley game: the untrained
    # initial model, fixed across rounds. Contributions then measure each
    # group's absolute lift rather than round-over-round deltas, which is
    # what keeps fine-grained groupings aligned with coalition retraining.
    baseline = zero_weights(state.test_set.num_classes, state.test_set.num_features)
    rc = group_sv_round(group_models, baseline, parts, state.evaluator(), r)
    # FedAvg over all owners: size-weighted mean of the group models
    new_global = average_weights(
        [(gm, float(len(grp))) for gm, grp in zip(group_models, parts.groups)]
    )
    return parts, group_models, rc, new_global


def _write_round_result(
    state: ChainState, rc: RoundContribution, new_global: np.ndarray
) -> None:
    state.ledger = accumulate(state.ledger, rc)
    state.global_model = new_global
    state.pending.pop(state.round_counter, None)
    state.round_counter += 1


def _apply_tx(state: ChainState, tx: Transaction) -> None:
    if isinstance(tx, ConfigTx):
        if state.config is not None:
            raise TxRejected("config order", "config already recorded")
        if len(set(tx.owners)) != len(tx.owners) or not tx.owners:
            raise TxRejected("config order", "owner roster invalid")
        if not 1 <= tx.num_groups <= len(tx.owners):
            raise TxRejected("config order", "group count out of range")
        if tx.rounds < 0:
            raise TxRejected("config order", "negative round count")
        if tx.test_digest != dataset_digest(state.test_set):
            raise TxRejected("test set commitment", "local test set does not match")
        state.config = tx
        return
    if state.config is None:
        raise TxRejected("config order", "config must come first")
    config = state.config
    if isinstance(tx, PubKeyTx):
        if tx.owner not in config.owners:
            raise TxRejected("unknown owner", str(tx.owner))
        if tx.owner in state.public_keys:
            raise TxRejected("duplicate public key", str(tx.owner))
        if not 1 < tx.public < config.dh.p:
            raise TxRejected("public key out of range", str(tx.owner))
        state.public_keys[tx.owner] = tx.public
        return
    if isinstance(tx, MaskedUpdateTx):
        upd = tx.update
        if len(state.public_keys) != len(config.owners):
            raise TxRejected("missing public keys", "round 0 requires all keys posted")
        if state.round_counter >= config.rounds:
            raise TxRejected("round limit", f"round {upd.round} beyond configured R")
        if upd.round != state.round_counter:
            raise TxRejected(
                "wrong round", f"got {upd.round}, current is {state.round_counter}"
            )
        if upd.owner not in config.owners:
            raise TxRejected("unknown owner", str(upd.owner))
        parts = _round_grouping(config, upd.round)
        if parts.group_of(upd.owner) != upd.group:
            raise TxRejected("wrong group", f"owner {upd.owner} claimed group {upd.group}")
        if len(upd.payload) != _expected_payload_length(state):
            raise TxRejected("payload length", str(len(upd.payload)))
        bucket = state.pending.setdefault(upd.round, {})
        if upd.owner in bucket:
            raise TxRejected("duplicate update", str(upd.owner))
        bucket[upd.owner] = upd
        return
    if isinstance(tx, EvalResultTx):
        if tx.round != state.round_counter:
            raise TxRejected(
                "wrong round", f"eval for {tx.round}, current is {state.round_counter}"
            )
        _, _, rc, new_global = _round_recompute(state)
        claimed = tx.contribution
        if (
            claimed.round != rc.round
            or claimed.per_owner != rc.per_owner
            or claimed.per_group != rc.per_group
            or tx.global_digest != model_digest(new_global)
        ):
            raise TxRejected("evaluation mismatch", f"round {tx.round}")
        _write_round_result(state, rc, new_global)
        return
    raise TxRejected("unknown transaction", type(tx).__name__)


def apply_block(state: ChainState, txs: tuple[Transaction, ...]) -> ChainState:
    """Deterministic state transition; raises TxRejected on any invalid tx."""
    new = state.copy()
    for tx in txs:
        _apply_tx(new, tx)
    return new


# ---------------------------------------------------------------------------
# Leader selection, proposal, verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinerSet:
    ids: tuple[int, ...]
    honest: tuple[bool, ...]
    selection_seed: int = 0

    def __post_init__(self):
        if not self.ids:
            raise ValueError("miner set must be non-empty")
        if len(self.ids) != len(self.honest):
            raise ValueError("honesty flags must align with miner ids")

    def is_honest(self, miner: int) -> bool:
        return self.honest[self.ids.index(miner)]

    def honest_ids(self) -> list[int]:
        return [m for m, h in zip(self.ids, self.honest) if h]


def select_leader(height: int, miners: MinerSet, retry: int = 0) -> int:
    """Seeded uniform leader choice; the retry counter rotates after a rejection."""
    rng = SplitMix64(hash_seed(miners.selection_seed, height, retry))
    return miners.ids[rng.randbelow(len(miners.ids))]


@dataclass(frozen=True)
class TamperSpec:
    """Fraudulent-leader behaviors: inflate own contribution, corrupt the model."""

    sv_delta: float = 0.1
    global_delta: float = 0.0


def _tampered_contribution(rc: RoundContribution, target: int, spec: TamperSpec) -> RoundContribution:
    per_owner = dict(rc.per_owner)
    if target not in per_owner:
        target = min(per_owner)
    per_owner[target] = per_owner[target] + spec.sv_delta
    return RoundContribution(round=rc.round, per_owner=per_owner, per_group=dict(rc.per_group))


def propose_block(
    state: ChainState,
    pending_txs: list[Transaction],
    proposer: int,
    height: int,
    tamper: TamperSpec | None = None,
) -> Block:
    """Build the block for the given pending transactions.

    If the pending updates complete the current round, the proposer runs
    the contract evaluation and appends the EvalResultTx. An honest
    proposer emits the unique correct block; with `tamper` set the claimed
    results are perturbed, which honest verifiers will reject.
    """
    prev = state.digest()
    mid = apply_block(state, tuple(pending_txs))
    txs: list[Transaction] = list(pending_txs)
    post = mid
    config = mid.config
    if config is not None and mid.round_counter < config.rounds:
        round_updates = mid.pending.get(mid.round_counter, {})
        if set(round_updates) == set(config.owners):
            _, _, rc, new_global = _round_recompute(mid)
            if tamper is not None:
                rc = _tampered_contribution(rc, proposer, tamper)
                if tamper.global_delta:
                    corrupted = new_global.copy()
                    corrupted[0] += tamper.global_delta
                    new_global = corrupted
            txs.append(
                EvalResultTx(
                    round=mid.round_counter,
                    global_digest=model_digest(new_global),
                    contribution=rc,
                )
            )
            _write_round_result(mid, rc, new_global)
            post = mid
    return Block(
        height=height,
        proposer=proposer,
        txs=tuple(txs),
        state_digest=post.digest(),
        prev_digest=prev,
    )


@dataclass(frozen=True)
class VerifyResult:
    accepted: bool
    reason: str | None = None
    state: ChainState | None = None


def verify_block(block: Block, local_state: ChainState) -> VerifyResult:
    """Re-execute the block and accept only on bit-exact digest agreement."""
    if block.prev_digest != local_state.digest():
        return VerifyResult(False, "chain linkage")
    try:
        post = apply_block(local_state, block.txs)
    except TxRejected as exc:
        return VerifyResult(False, exc.reason)
    if post.digest() != block.state_digest:
        return VerifyResult(False, "state digest mismatch")
    return VerifyResult(True, None, post)


# ---------------------------------------------------------------------------
# Protocol driver
# ---------------------------------------------------------------------------


@dataclass
class ScenarioConfig:
    """Everything a full simulated run needs."""

    owners: tuple[int, ...]
    datasets: dict[int, Dataset]
    test_set: Dataset
    rounds: int = 20
    num_groups: int = 3
    perm_seed: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    dh: DHParams = field(default_factory=DHParams)
    codec: FixedPointCodec = field(default_factory=FixedPointCodec)
    miners: MinerSet | None = None
    key_seed: int = 2024
    tamper: TamperSpec = field(default_factory=TamperSpec)
    leader_override: dict[int, int] = field(default_factory=dict)
    max_retries: int = 128

    def resolved_miners(self) -> MinerSet:
        if self.miners is not None:
            return self.miners
        ids = tuple(sorted(self.owners))
        return MinerSet(
            ids=ids,
            honest=tuple(True for _ in ids),
            selection_seed=derive_u64(b"leader-seed", self.perm_seed),
        )


@dataclass
class ProtocolStats:
    train_seconds: float = 0.0
    eval_seconds: float = 0.0
    verify_seconds: float = 0.0
    models_trained: int = 0


@dataclass
class ProtocolResult:
    state: ChainState
    blocks: list[Block]
    audit: list[dict]
    stats: ProtocolStats

    @property
    def ledger(self) -> ContributionLedger:
        return self.state.ledger


def run_protocol(scenario: ScenarioConfig) -> ProtocolResult:
    """Execute setup plus R rounds of train, mask, submit, evaluate, accept.

    A rejected proposal is retried with the next selected leader; the run
    fails only if no honest leader can be found within max_retries.
    """
    owners = tuple(sorted(scenario.owners))
    if set(scenario.datasets) != set(owners):
        raise ValueError("datasets must cover exactly the owner roster")
    if not 1 <= scenario.num_groups <= len(owners):
        raise ValueError(f"group count {scenario.num_groups} out of range [1, {len(owners)}]")
    if scenario.rounds < 0:
        raise ValueError("round count must be non-negative")
    for owner in owners:
        ds = scenario.datasets[owner]
        if ds.num_classes != scenario.test_set.num_classes:
            raise ValueError(f"owner {owner} dataset class count mismatch")
        if ds.num_features != scenario.test_set.num_features:
            raise ValueError(f"owner {owner} dataset feature count mismatch")
    miners = scenario.resolved_miners()
    if not miners.honest_ids():
        raise RuntimeError("no honest miners in the scenario")

    state = ChainState.initial(scenario.test_set)
    blocks: list[Block] = []
    audit: list[dict] = []
    stats = ProtocolStats()

    keypairs = {
        owner: keygen(scenario.dh, derive_u64(b"dh-keygen", scenario.key_seed, owner))
        for owner in owners
    }

    def commit(pending_txs: list[Transaction]) -> None:
        nonlocal state
        height = len(blocks)
        retry = 0
        while True:
            if retry > scenario.max_retries:
                raise RuntimeError(f"no honest leader accepted at height {height}")
            if retry == 0 and height in scenario.leader_override:
                leader = scenario.leader_override[height]
            else:
                leader = select_leader(height, miners, retry)
            tamper = None if miners.is_honest(leader) else scenario.tamper
            t0 = time.perf_counter()
            block = propose_block(state, pending_txs, leader, height, tamper)
            propose_seconds = time.perf_counter() - t0
            audit.append(
                {"event": "proposal", "height": height, "leader": leader, "retry": retry}
            )
            t1 = time.perf_counter()
            verdicts: dict[int, VerifyResult] = {}
            for miner in miners.honest_ids():
                verdicts[miner] = verify_block(block, state)
            stats.verify_seconds += time.perf_counter() - t1
            rejections = {m: v.reason for m, v in verdicts.items() if not v.accepted}
            if not rejections:
                stats.eval_seconds += propose_seconds
                state = next(iter(verdicts.values())).state
                blocks.append(block)
                audit.append(
                    {
                        "event": "acceptance",
                        "height": height,
                        "leader": leader,
                        "state_digest": block.state_digest.hex(),
                        "verifiers": miners.honest_ids(),
                    }
                )
                return
            reason = next(iter(rejections.values()))
            audit.append(
                {
                    "event": "rejection",
                    "height": height,
                    "leader": leader,
                    "retry": retry,
                    "reason": reason,
                    "rejecting_miners": sorted(rejections),
                }
            )
            retry += 1

    config_tx = ConfigTx(
        owners=owners,
        rounds=scenario.rounds,
        num_groups=scenario.num_groups,
        perm_seed=scenario.perm_seed,
        train=scenario.train,
        dh=scenario.dh,
        codec=scenario.codec,
        test_digest=dataset_digest(scenario.test_set),
    )
    genesis: list[Transaction] = [config_tx]
    genesis.extend(PubKeyTx(owner, keypairs[owner].public) for owner in owners)
    commit(genesis)

    for r in range(scenario.rounds):
        parts = _round_grouping(state.config, r)
        t0 = time.perf_counter()
        local = {
            owner: train_local(state.global_model, scenario.datasets[owner], scenario.train)
            for owner in owners
        }
        stats.train_seconds += time.perf_counter() - t0
        stats.models_trained += len(owners)
        update_txs: list[Transaction] = []
        for j, grp in enumerate(parts.groups):
            shared = {}
            for a in grp:
                for b in grp:
                    if a < b:
                        shared[(a, b)] = derive_shared(
                            keypairs[a], keypairs[b].public, scenario.dh, a, b
                        )
            for owner in grp:
                update_txs.append(
                    MaskedUpdateTx(
                        mask_update(
                            local[owner], owner, list(grp), shared, r, scenario.codec, j
                        )
                    )
                )
        commit(update_txs)

    return ProtocolResult(state=state, blocks=blocks, audit=audit, stats=stats)


# ---------------------------------------------------------------------------
# Export, replay, audit
# ---------------------------------------------------------------------------


def _dataset_to_json(data: Dataset) -> dict:
    return {
        "features": data.features.tolist(),
        "labels": data.labels.tolist(),
        "num_classes": data.num_classes,
    }


def _dataset_from_json(obj: dict) -> Dataset:
    return Dataset(
        np.asarray(obj["features"], dtype=np.float64),
        np.asarray(obj["labels"], dtype=np.int64),
        num_classes=int(obj["num_classes"]),
    )


def _tx_to_json(tx: Transaction) -> dict:
    if isinstance(tx, ConfigTx):
        return {
            "type": "config",
            "owners": list(tx.owners),
            "rounds": tx.rounds,
            "num_groups": tx.num_groups,
            "perm_seed": tx.perm_seed,
            "train": {
                "learning_rate": tx.train.learning_rate,
                "local_epochs": tx.train.local_epochs,
                "rng_seed": tx.train.rng_seed,
            },
            "dh": {"p": tx.dh.p, "g": tx.dh.g},
            "codec": {"frac_bits": tx.codec.frac_bits, "bound": tx.codec.bound},
            "test_digest": tx.test_digest.hex(),
            "utility_spec": tx.utility_spec,
        }
    if isinstance(tx, PubKeyTx):
        return {"type": "pubkey", "owner": tx.owner, "public": tx.public}
    if isinstance(tx, MaskedUpdateTx):
        upd = tx.update
        return {
            "type": "masked_update",
            "owner": upd.owner,
            "round": upd.round,
            "group": upd.group,
            "payload": upd.payload.tolist(),
        }
    if isinstance(tx, EvalResultTx):
        return {
            "type": "eval_result",
            "round": tx.round,
            "global_digest": tx.global_digest.hex(),
            "contribution": tx.contribution.to_json_dict(),
        }
    raise TypeError(f"unknown transaction type {type(tx).__name__}")


def _tx_from_json(obj: dict) -> Transaction:
    kind = obj["type"]
    if kind == "config":
        return ConfigTx(
            owners=tuple(int(o) for o in obj["owners"]),
            rounds=int(obj["rounds"]),
            num_groups=int(obj["num_groups"]),
            perm_seed=int(obj["perm_seed"]),
            train=TrainConfig(
                learning_rate=float(obj["train"]["learning_rate"]),
                local_epochs=int(obj["train"]["local_epochs"]),
                rng_seed=int(obj["train"]["rng_seed"]),
            ),
            dh=DHParams(p=int(obj["dh"]["p"]), g=int(obj["dh"]["g"])),
            codec=FixedPointCodec(
                frac_bits=int(obj["codec"]["frac_bits"]), bound=float(obj["codec"]["bound"])
            ),
            test_digest=bytes.fromhex(obj["test_digest"]),
            utility_spec=obj["utility_spec"],
        )
    if kind == "pubkey":
        return PubKeyTx(owner=int(obj["owner"]), public=int(obj["public"]))
    if kind == "masked_update":
        return MaskedUpdateTx(
            MaskedUpdate(
                owner=int(obj["owner"]),
                round=int(obj["round"]),
                group=int(obj["group"]),
                payload=np.asarray(obj["payload"], dtype=np.uint64),
            )
        )
    if kind == "eval_result":
        return EvalResultTx(
            round=int(obj["round"]),
            global_digest=bytes.fromhex(obj["global_digest"]),
            contribution=RoundContribution.from_json_dict(obj["contribution"]),
        )
    raise ValueError(f"unknown transaction type {kind!r}")


def block_to_json(block: Block) -> dict:
    return {
        "height": block.height,
        "proposer": block.proposer,
        "state_digest": block.state_digest.hex(),
        "prev_digest": block.prev_digest.hex(),
        "txs": [_tx_to_json(tx) for tx in block.txs],
    }


def block_from_json(obj: dict) -> Block:
    return Block(
        height=int(obj["height"]),
        proposer=int(obj["proposer"]),
        txs=tuple(_tx_from_json(t) for t in obj["txs"]),
        state_digest=bytes.fromhex(obj["state_digest"]),
        prev_digest=bytes.fromhex(obj["prev_digest"]),
    )


def export_chain(blocks: list[Block], test_set: Dataset, path: str) -> None:
    """Write the accepted block sequence (plus the shared test set) as JSON.

    Python's float repr round-trips exactly, so a replay of the exported
    file reproduces every digest bit-for-bit.
    """
    payload = {
        "format": "fedeval-chain-v1",
        "test_set": _dataset_to_json(test_set),
        "blocks": [block_to_json(b) for b in blocks],
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh)


def load_chain(path: str) -> tuple[list[Block], Dataset]:
    with open(path, "r", encoding="ascii") as fh:
        payload = json.load(fh)
    if payload.get("format") != "fedeval-chain-v1":
        raise ValueError("not a chain export file")
    test_set = _dataset_from_json(payload["test_set"])
    return [block_from_json(b) for b in payload["blocks"]], test_set


@dataclass(frozen=True)
class ReplayReport:
    ok: bool
    checks: tuple[tuple[int, bool, str], ...]
    final_state: ChainState | None


def replay_chain(blocks: list[Block], test_set: Dataset) -> ReplayReport:
    """Re-execute a block sequence from genesis on a fresh node."""
    state = ChainState.initial(test_set)
    checks: list[tuple[int, bool, str]] = []
    for expected_height, block in enumerate(blocks):
        if block.height != expected_height:
            checks.append((block.height, False, "height mismatch"))
            return ReplayReport(False, tuple(checks), None)
        result = verify_block(block, state)
        if not result.accepted:
            checks.append((block.height, False, result.reason or "rejected"))
            return ReplayReport(False, tuple(checks), None)
        checks.append((block.height, True, "digest reproduced"))
        state = result.state
    return ReplayReport(True, tuple(checks), state)


def write_audit_log(events: list[dict], path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for event in events:
            fh.write(json.dumps(event) + "\n")
