"""Experiment drivers: ground-truth valuation, similarity sweeps, timings.

The ground truth retrains a fresh model for every non-empty owner
coalition (2^n - 1 models) with the same total epoch budget as the
federated run, then applies the exact Shapley enumeration. The sweep runs
the full simulated protocol for each (sigma, group count) cell, compares
the on-chain group-based totals against the ground truth by cosine
similarity, and records wall-clock spent on training plus utility
evaluation for the runtime comparison.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .chain import ScenarioConfig, export_chain, run_protocol, write_audit_log
from .data import NoiseConfig, SplitConfig, add_noise, load_optdigits, split_owners, truncate
from .model import Dataset, TrainConfig, UtilityEvaluator, train_local, zero_weights
from .shapley import UtilityTable, native_sv

MAX_GROUND_TRUTH_OWNERS = 12


def cosine_similarity(u, v) -> float:
    """Standard cosine of the angle between two equal-length vectors."""
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("vectors must share one dimension")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.dot(a, b) / (na * nb))


def _concat(datasets: list[Dataset]) -> Dataset:
    feats = np.concatenate([d.features for d in datasets], axis=0)
    labels = np.concatenate([d.labels for d in datasets], axis=0)
    return Dataset(feats, labels, num_classes=datasets[0].num_classes)


def ground_truth_sv(
    owner_datasets: list[Dataset],
    evaluator: UtilityEvaluator,
    train_cfg: TrainConfig,
    rounds: int,
) -> list[float]:
    """Exact owner valuations from full coalition retraining.

    Each coalition model is trained from scratch on the members' pooled
    data for local_epochs * rounds total epochs; the empty coalition's
    utility is that of the untrained initial model.
    """
    n = len(owner_datasets)
    if n < 1:
        raise ValueError("need at least one owner")
    if n > MAX_GROUND_TRUTH_OWNERS:
        raise ValueError(
            f"coalition retraining limited to {MAX_GROUND_TRUTH_OWNERS} owners (2^n models)"
        )
    if rounds < 1:
        raise ValueError("training budget needs at least one round")
    budget = TrainConfig(
        learning_rate=train_cfg.learning_rate,
        local_epochs=train_cfg.local_epochs * rounds,
        rng_seed=train_cfg.rng_seed,
    )
    test = evaluator.test_set
    init = zero_weights(test.num_classes, test.num_features)
    values: dict[int, float] = {0: evaluator.utility(init)}
    for mask in range(1, 1 << n):
        members = [i for i in range(n) if mask & (1 << i)]
        pooled = _concat([owner_datasets[i] for i in members])
        model = train_local(init, pooled, budget)
        values[mask] = evaluator.utility(model)
    return native_sv(UtilityTable(n=n, values=values))


@dataclass
class ExperimentConfig:
    """Knobs for the full sweep; defaults are the desk-scale setup."""

    data_path: str
    num_owners: int = 9
    group_grid: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8, 9)
    sigma_grid: tuple[float, ...] = (0.0, 0.05, 0.1, 0.2, 0.5)
    rounds: int = 20
    perm_seed: int = 1
    split_seed: int = 11
    noise_seed: int = 17
    key_seed: int = 2024
    learning_rate: float = 0.5
    local_epochs: int = 1
    max_instances: int | None = None
    export_chains: bool = False
    out_dir: str | None = None

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.local_epochs)


@dataclass
class ExperimentReport:
    config: dict
    ground_truth: dict[str, list[float]]
    group_totals: dict[str, dict[int, list[float]]]
    similarity: dict[str, dict[int, float]]
    group_seconds: dict[str, dict[int, float]]
    native_seconds: dict[str, float]
    models_per_round: int
    native_models: int
    rounds: int
    # chain audit events from every protocol run, tagged with (sigma, m);
    # written as audit.ndjson, not embedded in report.json
    audit_events: list[dict] = field(default_factory=list, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "ground_truth": self.ground_truth,
            "group_totals": {
                s: {str(m): v for m, v in per.items()} for s, per in self.group_totals.items()
            },
            "similarity": {
                s: {str(m): v for m, v in per.items()} for s, per in self.similarity.items()
            },
            "group_seconds": {
                s: {str(m): v for m, v in per.items()} for s, per in self.group_seconds.items()
            },
            "native_seconds": self.native_seconds,
            "models_per_round": self.models_per_round,
            "native_models": self.native_models,
            "rounds": self.rounds,
        }

    def validate(self) -> list[str]:
        """Report-level invariant checks; non-empty means the run is unsound."""
        problems = []
        for sigma, per_m in self.similarity.items():
            for m, sim in per_m.items():
                if not -1.0 - 1e-12 <= sim <= 1.0 + 1e-12:
                    problems.append(f"similarity out of range at sigma={sigma}, m={m}: {sim}")
        n = self.models_per_round
        if self.native_models != (1 << n) - 1:
            problems.append(
                f"native model count {self.native_models} != 2^{n} - 1"
            )
        for sigma, values in self.ground_truth.items():
            if not all(np.isfinite(values)):
                problems.append(f"non-finite ground truth at sigma={sigma}")
        return problems


def _sigma_key(sigma: float) -> str:
    return repr(float(sigma))


def prepare_owner_data(
    data: Dataset, num_owners: int, sigma: float, split_seed: int, noise_seed: int
) -> tuple[list[Dataset], Dataset]:
    """Split once, then degrade owner i's features with noise std sigma * i."""
    owners, test = split_owners(
        data, SplitConfig(num_owners=num_owners, rng_seed=split_seed)
    )
    noise = NoiseConfig(sigma=sigma, rng_seed=noise_seed)
    return [add_noise(owners[i], i, noise) for i in range(num_owners)], test


def run_experiment_suite(cfg: ExperimentConfig) -> ExperimentReport:
    """Ground truth plus the (sigma, group count) protocol sweep."""
    data = load_optdigits(cfg.data_path)
    if cfg.max_instances is not None:
        data = truncate(data, cfg.max_instances)
    train_cfg = cfg.train_config()
    owners = tuple(range(cfg.num_owners))

    ground_truth: dict[str, list[float]] = {}
    group_totals: dict[str, dict[int, list[float]]] = {}
    similarity: dict[str, dict[int, float]] = {}
    group_seconds: dict[str, dict[int, float]] = {}
    native_seconds: dict[str, float] = {}
    audit_events: list[dict] = []

    for sigma in cfg.sigma_grid:
        key = _sigma_key(sigma)
        owner_data, test = prepare_owner_data(
            data, cfg.num_owners, sigma, cfg.split_seed, cfg.noise_seed
        )
        evaluator = UtilityEvaluator(test)

        t0 = time.perf_counter()
        gt = ground_truth_sv(owner_data, evaluator, train_cfg, cfg.rounds)
        native_seconds[key] = time.perf_counter() - t0
        ground_truth[key] = gt

        group_totals[key] = {}
        similarity[key] = {}
        group_seconds[key] = {}
        for m in cfg.group_grid:
            scenario = ScenarioConfig(
                owners=owners,
                datasets=dict(enumerate(owner_data)),
                test_set=test,
                rounds=cfg.rounds,
                num_groups=m,
                perm_seed=cfg.perm_seed,
                train=train_cfg,
                key_seed=cfg.key_seed,
            )
            result = run_protocol(scenario)
            totals = [result.ledger.total_for(i) for i in owners]
            group_totals[key][m] = totals
            similarity[key][m] = cosine_similarity(totals, gt)
            group_seconds[key][m] = (
                result.stats.train_seconds + result.stats.eval_seconds
            )
            if result.stats.models_trained != cfg.num_owners * cfg.rounds:
                raise RuntimeError("unexpected trained-model count in protocol run")
            audit_events.extend(
                {"sigma": sigma, "num_groups": m, **event} for event in result.audit
            )
            if cfg.export_chains and cfg.out_dir:
                path = os.path.join(cfg.out_dir, f"chain_sigma{sigma}_m{m}.json")
                export_chain(result.blocks, test, path)
                write_audit_log(
                    result.audit, os.path.join(cfg.out_dir, f"audit_sigma{sigma}_m{m}.ndjson")
                )

    return ExperimentReport(
        config=asdict(cfg),
        ground_truth=ground_truth,
        group_totals=group_totals,
        similarity=similarity,
        group_seconds=group_seconds,
        native_seconds=native_seconds,
        models_per_round=cfg.num_owners,
        native_models=(1 << cfg.num_owners) - 1,
        rounds=cfg.rounds,
        audit_events=audit_events,
    )


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def write_report_files(report: ExperimentReport, out_dir: str) -> None:
    """Write report.json, the three CSV views, and the chain audit trail."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="ascii") as fh:
        json.dump(report.to_json_dict(), fh, indent=2)

    with open(os.path.join(out_dir, "audit.ndjson"), "w", encoding="ascii") as fh:
        for event in report.audit_events:
            fh.write(json.dumps(event) + "\n")

    with open(os.path.join(out_dir, "fig1.csv"), "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma", "owner", "shapley_value"])
        for sigma, values in report.ground_truth.items():
            for owner, value in enumerate(values):
                writer.writerow([sigma, owner, repr(value)])

    with open(os.path.join(out_dir, "fig2.csv"), "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma", "num_groups", "cosine_similarity"])
        for sigma, per_m in report.similarity.items():
            for m in sorted(per_m):
                writer.writerow([sigma, m, repr(per_m[m])])

    with open(os.path.join(out_dir, "table1.csv"), "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma", "method", "num_groups", "seconds", "models_trained"])
        for sigma, per_m in report.group_seconds.items():
            for m in sorted(per_m):
                writer.writerow(
                    [sigma, "group", m, f"{per_m[m]:.3f}", report.models_per_round * report.rounds]
                )
            writer.writerow(
                [
                    sigma,
                    "native",
                    report.models_per_round,
                    f"{report.native_seconds[sigma]:.3f}",
                    report.native_models,
                ]
            )
