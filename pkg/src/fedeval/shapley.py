"""Exact Shapley values over coalition utility tables, plus the group round.

Coalitions are bitmasks over the player set. The group round partitions
data owners into m groups by a seeded permutation, evaluates every subset
of groups on the shared test set, assigns each group its Shapley value,
and splits that value equally among members. Binomial coefficients are
exact integers with division performed per term, so a proposer and a
verifier never drift apart.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np

from .model import UtilityEvaluator
from .rng import SplitMix64, fisher_yates, hash_seed

MAX_EXACT_PLAYERS = 20
MAX_ORACLE_PLAYERS = 8
MAX_GROUPS = 16


@dataclass(frozen=True)
class UtilityTable:
    """Complete map from coalition bitmask to utility for n players."""

    n: int
    values: dict[int, float]

    def require_complete(self) -> None:
        for mask in range(1 << self.n):
            if mask not in self.values:
                raise ValueError(f"utility table missing coalition mask {mask}")


def native_sv(table: UtilityTable) -> list[float]:
    """Exact Shapley value of every player by full coalition enumeration.

    v_i = (1/n) * sum over S not containing i of
          [u(S + i) - u(S)] / C(n-1, |S|)
    """
    n = table.n
    if n < 1:
        raise ValueError("need at least one player")
    if n > MAX_EXACT_PLAYERS:
        raise ValueError(f"exact enumeration limited to {MAX_EXACT_PLAYERS} players")
    table.require_complete()
    u = table.values
    values = []
    for i in range(n):
        bit = 1 << i
        rest = ((1 << n) - 1) ^ bit
        acc = 0.0
        sub = 0
        while True:
            size = sub.bit_count()
            acc += (u[sub | bit] - u[sub]) / (n * comb(n - 1, size))
            if sub == rest:
                break
            sub = (sub - rest) & rest
        values.append(acc)
    return values


def sv_permutation_oracle(table: UtilityTable) -> list[float]:
    """Average marginal contribution over all n! orderings.

    Independent check for native_sv; costs n! walks so it is capped at
    small player counts.
    """
    n = table.n
    if n < 1:
        raise ValueError("need at least one player")
    if n > MAX_ORACLE_PLAYERS:
        raise ValueError(f"permutation oracle limited to {MAX_ORACLE_PLAYERS} players")
    table.require_complete()
    u = table.values
    totals = [0.0] * n
    for order in itertools.permutations(range(n)):
        mask = 0
        prev = u[0]
        for player in order:
            mask |= 1 << player
            current = u[mask]
            totals[player] += current - prev
            prev = current
    norm = factorial(n)
    return [t / norm for t in totals]


def permutation(seed: int, round_index: int, roster: list[int]) -> list[int]:
    """Seeded Fisher-Yates ordering of the roster for one round.

    The stream seed is the low 64 bits of SHA-256(seed || round), both as
    8-byte big-endian words, so every party derives the same ordering.
    """
    if not roster:
        raise ValueError("roster must be non-empty")
    if len(set(roster)) != len(roster):
        raise ValueError("roster contains duplicate ids")
    rng = SplitMix64(hash_seed(seed, round_index))
    return fisher_yates(sorted(roster), rng)


@dataclass(frozen=True)
class Grouping:
    """Partition of a round's permutation into contiguous groups."""

    groups: tuple[tuple[int, ...], ...]

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    def members(self) -> list[int]:
        return [owner for group in self.groups for owner in group]

    def group_of(self, owner: int) -> int:
        for j, group in enumerate(self.groups):
            if owner in group:
                return j
        raise KeyError(owner)


def grouping(pi: list[int], m: int) -> Grouping:
    """Chunk the permutation into m groups whose sizes differ by at most 1.

    The first (n mod m) groups take the extra member.
    """
    n = len(pi)
    if not 1 <= m <= n:
        raise ValueError(f"group count {m} out of range [1, {n}]")
    base, extra = divmod(n, m)
    groups = []
    start = 0
    for j in range(m):
        size = base + (1 if j < extra else 0)
        groups.append(tuple(pi[start : start + size]))
        start += size
    return Grouping(groups=tuple(groups))


def coalition_models(
    group_models: list[np.ndarray], baseline: np.ndarray
) -> dict[int, np.ndarray]:
    """Unweighted mean model for every subset of groups.

    The empty coalition maps to the designated baseline model, so every
    marginal is measured against that reference.
    """
    m = len(group_models)
    if not 1 <= m <= MAX_GROUPS:
        raise ValueError(f"group count {m} out of range [1, {MAX_GROUPS}]")
    base = np.asarray(baseline, dtype=np.float64)
    vectors = [np.asarray(g, dtype=np.float64) for g in group_models]
    for idx, v in enumerate(vectors):
        if v.shape != base.shape:
            raise ValueError(f"group model {idx} has shape {v.shape}, expected {base.shape}")
    sums: dict[int, np.ndarray] = {0: np.zeros_like(base)}
    out: dict[int, np.ndarray] = {0: base}
    for mask in range(1, 1 << m):
        low = mask & -mask
        sums[mask] = sums[mask ^ low] + vectors[low.bit_length() - 1]
        out[mask] = sums[mask] / mask.bit_count()
    return out


@dataclass(frozen=True)
class RoundContribution:
    """Per-owner and per-group Shapley values for one round."""

    round: int
    per_owner: dict[int, float]
    per_group: dict[int, float]

    def to_json_dict(self) -> dict:
        return {
            "round": self.round,
            "per_owner": {str(k): v for k, v in sorted(self.per_owner.items())},
            "per_group": {str(k): v for k, v in sorted(self.per_group.items())},
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "RoundContribution":
        return cls(
            round=int(data["round"]),
            per_owner={int(k): float(v) for k, v in data["per_owner"].items()},
            per_group={int(k): float(v) for k, v in data["per_group"].items()},
        )


def group_sv_round(
    group_models: list[np.ndarray],
    baseline: np.ndarray,
    parts: Grouping,
    evaluator: UtilityEvaluator,
    round_index: int = 0,
) -> RoundContribution:
    """Shapley value of each group for one round, split equally to members.

    Utilities are evaluated once per coalition bitmask (a single batched
    pass over the test set) and fed to the exact Shapley enumeration.
    """
    m = len(group_models)
    if m != parts.num_groups:
        raise ValueError(f"{m} group models but {parts.num_groups} groups")
    coalitions = coalition_models(group_models, baseline)
    stacked = np.stack([coalitions[mask] for mask in range(1 << m)])
    utilities = evaluator.utilities(stacked)
    table = UtilityTable(n=m, values={mask: float(utilities[mask]) for mask in range(1 << m)})
    group_values = native_sv(table)
    per_owner: dict[int, float] = {}
    per_group: dict[int, float] = {}
    for j, group in enumerate(parts.groups):
        per_group[j] = group_values[j]
        share = group_values[j] / len(group)
        for owner in group:
            per_owner[owner] = share
    return RoundContribution(round=round_index, per_owner=per_owner, per_group=per_group)


@dataclass(frozen=True)
class ContributionLedger:
    """Accumulated per-round contributions and running totals."""

    rounds: tuple[RoundContribution, ...] = ()
    totals: dict[int, float] = field(default_factory=dict)

    def total_for(self, owner: int) -> float:
        return self.totals.get(owner, 0.0)

    def to_json_dict(self) -> dict:
        return {
            "totals": {str(k): v for k, v in sorted(self.totals.items())},
            "rounds": [rc.to_json_dict() for rc in self.rounds],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ContributionLedger":
        return cls(
            rounds=tuple(RoundContribution.from_json_dict(rc) for rc in data["rounds"]),
            totals={int(k): float(v) for k, v in data["totals"].items()},
        )


def accumulate(ledger: ContributionLedger, rc: RoundContribution) -> ContributionLedger:
    """Append a round and add its values into the running totals."""
    if any(existing.round == rc.round for existing in ledger.rounds):
        raise ValueError(f"round {rc.round} already recorded")
    totals = dict(ledger.totals)
    for owner, value in rc.per_owner.items():
        totals[owner] = totals.get(owner, 0.0) + value
    return ContributionLedger(rounds=ledger.rounds + (rc,), totals=totals)
