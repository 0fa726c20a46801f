"""Command-line entry points: run, ground-truth, verify-replay, tamper-demo."""

from __future__ import annotations

import os

# Timing comparisons are defined single-threaded; pin BLAS pools before
# numpy is first imported.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import json
import sys

from .chain import (
    MinerSet,
    ScenarioConfig,
    TamperSpec,
    export_chain,
    load_chain,
    replay_chain,
    run_protocol,
    write_audit_log,
)
from .data import ensure_dataset, load_optdigits, truncate
from .experiments import (
    ExperimentConfig,
    ground_truth_sv,
    prepare_owner_data,
    run_experiment_suite,
    write_report_files,
)
from .model import TrainConfig, UtilityEvaluator
from .rng import derive_u64


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", default=None, help="digits CSV; bundled demo data if omitted")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--owners", type=int, default=9)
    parser.add_argument("--rounds", type=int, default=20)
    parser.add_argument("--seed", type=int, default=1, help="permutation seed")
    parser.add_argument("--lr", type=float, default=0.5)
    parser.add_argument("--epochs", type=int, default=1, help="local epochs per round")
    parser.add_argument("--max-instances", type=int, default=None)


def _cmd_run(args: argparse.Namespace) -> int:
    os.makedirs(args.out, exist_ok=True)
    cfg = ExperimentConfig(
        data_path=ensure_dataset(args.data, args.out),
        num_owners=args.owners,
        group_grid=_int_list(args.groups),
        sigma_grid=_float_list(args.sigma),
        rounds=args.rounds,
        perm_seed=args.seed,
        learning_rate=args.lr,
        local_epochs=args.epochs,
        max_instances=args.max_instances,
        export_chains=args.export_chains,
        out_dir=args.out,
    )
    report = run_experiment_suite(cfg)
    write_report_files(report, args.out)
    problems = report.validate()
    for sigma, per_m in report.similarity.items():
        line = ", ".join(f"m={m}: {per_m[m]:.4f}" for m in sorted(per_m))
        print(f"sigma={sigma}  similarity  {line}")
    for sigma in report.native_seconds:
        print(
            f"sigma={sigma}  seconds  group(m=max)={report.group_seconds[sigma][max(report.group_seconds[sigma])]:.2f}"
            f"  native={report.native_seconds[sigma]:.2f}"
        )
    if problems:
        for problem in problems:
            print(f"INVARIANT VIOLATION: {problem}", file=sys.stderr)
        return 1
    print(f"report written to {args.out}")
    return 0


def _cmd_ground_truth(args: argparse.Namespace) -> int:
    os.makedirs(args.out, exist_ok=True)
    data = load_optdigits(ensure_dataset(args.data, args.out))
    if args.max_instances:
        data = truncate(data, args.max_instances)
    train_cfg = TrainConfig(args.lr, args.epochs)
    results = {}
    for sigma in _float_list(args.sigma):
        owner_data, test = prepare_owner_data(data, args.owners, sigma, 11, 17)
        values = ground_truth_sv(owner_data, UtilityEvaluator(test), train_cfg, args.rounds)
        results[repr(sigma)] = values
        print(f"sigma={sigma}: " + ", ".join(f"{v:.4f}" for v in values))
    with open(os.path.join(args.out, "ground_truth.json"), "w", encoding="ascii") as fh:
        json.dump(results, fh, indent=2)
    return 0


def _cmd_verify_replay(args: argparse.Namespace) -> int:
    blocks, test_set = load_chain(args.chain)
    report = replay_chain(blocks, test_set)
    for height, ok, note in report.checks:
        print(f"height {height}: {'OK' if ok else 'MISMATCH'} ({note})")
    if report.ok:
        print(f"replayed {len(blocks)} blocks; every state digest reproduced")
        return 0
    print("replay failed", file=sys.stderr)
    return 1


def _cmd_tamper_demo(args: argparse.Namespace) -> int:
    os.makedirs(args.out, exist_ok=True)
    data = load_optdigits(ensure_dataset(args.data, args.out))
    if args.max_instances:
        data = truncate(data, args.max_instances)
    owner_data, test = prepare_owner_data(data, args.owners, args.sigma_value, 11, 17)
    owners = tuple(range(args.owners))
    base = dict(
        owners=owners,
        datasets=dict(enumerate(owner_data)),
        test_set=test,
        rounds=args.rounds,
        num_groups=args.groups_value,
        perm_seed=args.seed,
        train=TrainConfig(args.lr, args.epochs),
    )
    honest = run_protocol(ScenarioConfig(**base))

    byzantine = args.byzantine
    miners = MinerSet(
        ids=owners,
        honest=tuple(o != byzantine for o in owners),
        selection_seed=derive_u64(b"leader-seed", args.seed),
    )
    scenario = ScenarioConfig(
        **base,
        miners=miners,
        tamper=TamperSpec(sv_delta=args.delta),
        leader_override={1: byzantine},
    )
    result = run_protocol(scenario)

    rejections = [e for e in result.audit if e["event"] == "rejection"]
    for event in result.audit:
        print(json.dumps(event))
    write_audit_log(result.audit, os.path.join(args.out, "audit.ndjson"))
    export_chain(result.blocks, test, os.path.join(args.out, "chain.json"))

    same_ledger = result.ledger.to_json_dict() == honest.ledger.to_json_dict()
    print(f"rejections observed: {len(rejections)}")
    print(f"final ledger equals all-honest ledger: {same_ledger}")
    if not rejections or not same_ledger:
        print("tamper demo failed to demonstrate containment", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedeval",
        description="Simulated blockchain federated learning with group Shapley accounting",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="full experiment suite")
    _add_common(run)
    run.add_argument("--groups", default="2,3,4,5,6,7,8,9", help="comma-separated group counts")
    run.add_argument("--sigma", default="0,0.05,0.1,0.2,0.5", help="comma-separated noise levels")
    run.add_argument("--export-chains", action="store_true")
    run.set_defaults(func=_cmd_run)

    gt = sub.add_parser("ground-truth", help="coalition-retraining valuation only")
    _add_common(gt)
    gt.add_argument("--sigma", default="0,0.5")
    gt.set_defaults(func=_cmd_ground_truth)

    vr = sub.add_parser("verify-replay", help="re-execute an exported block sequence")
    vr.add_argument("--chain", required=True, help="chain JSON produced by run/tamper-demo")
    vr.set_defaults(func=_cmd_verify_replay)

    td = sub.add_parser("tamper-demo", help="Byzantine leader rejection walkthrough")
    _add_common(td)
    td.add_argument("--delta", type=float, default=1e-6, help="contribution inflation")
    td.add_argument("--byzantine", type=int, default=1, help="dishonest miner id")
    td.add_argument("--sigma-value", type=float, default=0.2)
    td.add_argument("--groups-value", type=int, default=3)
    td.set_defaults(func=_cmd_tamper_demo, rounds=3)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
