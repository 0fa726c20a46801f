import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedeval.model import TrainConfig, UtilityEvaluator, train_local, zero_weights
from fedeval.shapley import (
    ContributionLedger,
    RoundContribution,
    UtilityTable,
    accumulate,
    coalition_models,
    group_sv_round,
    grouping,
    native_sv,
    permutation,
    sv_permutation_oracle,
)

from conftest import make_blobs

# Committed reference ordering for the pinned permutation construction
# (seed 1, round 0, roster 0..8); generated once and frozen.
GOLDEN_PERMUTATION = [2, 8, 1, 3, 6, 0, 4, 5, 7]


def random_table(n, seed):
    rng = np.random.default_rng(seed)
    return UtilityTable(n, {mask: float(rng.uniform()) for mask in range(1 << n)})


class FirstCoordinateUtility:
    """Test double: utility looked up from a model's first coordinate."""

    def __init__(self, mapping):
        self.mapping = mapping

    def utilities(self, weight_matrix):
        return np.array([self.mapping[round(float(row[0]), 9)] for row in np.atleast_2d(weight_matrix)])


class TestNativeSV:
    def test_single_player(self):
        table = UtilityTable(1, {0: 0.0, 1: 0.8})
        assert native_sv(table) == [0.8]

    def test_two_player_hand_enumeration(self):
        table = UtilityTable(2, {0b00: 0.0, 0b01: 1.0, 0b10: 2.0, 0b11: 4.0})
        assert native_sv(table) == pytest.approx([1.5, 2.5], abs=1e-12)

    @given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=2, max_value=6))
    @settings(max_examples=40, deadline=None)
    def test_additive_games_return_their_coefficients(self, seed, n):
        rng = np.random.default_rng(seed)
        # eighths sum exactly in binary, keeping the additivity check tight
        coeffs = rng.integers(-40, 40, n) / 8.0
        values = {
            mask: float(sum(coeffs[i] for i in range(n) if mask & (1 << i)))
            for mask in range(1 << n)
        }
        out = native_sv(UtilityTable(n, values))
        assert out == pytest.approx(list(coeffs), abs=1e-12)

    @given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=2, max_value=7))
    @settings(max_examples=40, deadline=None)
    def test_matches_permutation_oracle(self, seed, n):
        table = random_table(n, seed)
        assert native_sv(table) == pytest.approx(sv_permutation_oracle(table), abs=1e-9)

    @given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=2, max_value=7))
    @settings(max_examples=40, deadline=None)
    def test_efficiency(self, seed, n):
        table = random_table(n, seed)
        values = native_sv(table)
        grand = table.values[(1 << n) - 1] - table.values[0]
        assert sum(values) == pytest.approx(grand, abs=1e-9)

    @given(st.integers(min_value=0, max_value=2**32))
    @settings(max_examples=40, deadline=None)
    def test_constant_shift_leaves_values_unchanged(self, seed):
        table = random_table(5, seed)
        shifted = UtilityTable(5, {m: v + 0.37 for m, v in table.values.items()})
        a, b = native_sv(table), native_sv(shifted)
        assert a == pytest.approx(b, abs=1e-12)

    def test_null_player_gets_exact_zero(self):
        # player 2's marginal is identically zero
        base = random_table(2, 3)
        values = {}
        for mask in range(1 << 3):
            values[mask] = base.values[mask & 0b11]
        out = native_sv(UtilityTable(3, values))
        assert out[2] == 0.0

    def test_symmetric_players_get_equal_values(self):
        # utility depends only on |S|, so all players are interchangeable
        rng = np.random.default_rng(4)
        by_size = rng.uniform(0, 1, 6)
        values = {mask: float(by_size[bin(mask).count('1')]) for mask in range(1 << 5)}
        out = native_sv(UtilityTable(5, values))
        assert max(out) - min(out) <= 1e-12

    def test_incomplete_table_names_missing_mask(self):
        table = UtilityTable(2, {0: 0.0, 1: 1.0, 3: 2.0})
        with pytest.raises(ValueError, match="mask 2"):
            native_sv(table)

    def test_player_limit(self):
        with pytest.raises(ValueError, match="20"):
            native_sv(UtilityTable(21, {}))


class TestPermutationOracle:
    def test_two_player_hand_enumeration(self):
        table = UtilityTable(2, {0b00: 0.0, 0b01: 1.0, 0b10: 2.0, 0b11: 4.0})
        assert sv_permutation_oracle(table) == pytest.approx([1.5, 2.5], abs=1e-12)

    def test_constant_utility_gives_zeros(self):
        table = UtilityTable(3, {mask: 0.42 for mask in range(8)})
        assert sv_permutation_oracle(table) == [0.0, 0.0, 0.0]

    def test_player_limit(self):
        with pytest.raises(ValueError, match="8"):
            sv_permutation_oracle(UtilityTable(9, {}))


class TestPermutation:
    def test_golden_ordering(self):
        assert permutation(1, 0, list(range(9))) == GOLDEN_PERMUTATION

    def test_single_owner_identity(self):
        assert permutation(5, 3, [42]) == [42]

    def test_deterministic(self):
        assert permutation(7, 2, list(range(12))) == permutation(7, 2, list(range(12)))

    def test_round_changes_ordering(self):
        roster = list(range(16))
        assert permutation(1, 0, roster) != permutation(1, 1, roster)

    @given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=0, max_value=40))
    @settings(max_examples=60)
    def test_is_bijection_regardless_of_input_order(self, seed, r):
        roster = [9, 3, 5, 21, 7]
        out = permutation(seed, r, roster)
        assert sorted(out) == sorted(roster)
        assert out == permutation(seed, r, roster[::-1])  # canonicalized ascending first

    def test_empty_roster_rejected(self):
        with pytest.raises(ValueError):
            permutation(1, 0, [])

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            permutation(1, 0, [1, 1, 2])


class TestGrouping:
    def test_contiguous_chunks_match_worked_example(self):
        pi = ["A", "E", "H", "B", "F", "I", "C", "G", "D"]
        parts = grouping(pi, 3)
        assert parts.groups == (("A", "E", "H"), ("B", "F", "I"), ("C", "G", "D"))

    def test_one_group_is_whole_permutation(self):
        pi = [3, 1, 2]
        assert grouping(pi, 1).groups == ((3, 1, 2),)

    def test_n_groups_are_singletons(self):
        pi = [3, 1, 2]
        assert grouping(pi, 3).groups == ((3,), (1,), (2,))

    @given(st.integers(min_value=1, max_value=30), st.data())
    @settings(max_examples=80)
    def test_partition_properties(self, n, data):
        m = data.draw(st.integers(min_value=1, max_value=n))
        pi = list(range(n))
        parts = grouping(pi, m)
        assert parts.members() == pi  # concatenation reproduces the permutation
        sizes = [len(g) for g in parts.groups]
        assert max(sizes) - min(sizes) <= 1
        assert sizes == sorted(sizes, reverse=True)  # big groups come first
        assert sum(sizes) == n

    @pytest.mark.parametrize("m", [0, 4])
    def test_out_of_range_group_count_rejected(self, m):
        with pytest.raises(ValueError, match="out of range"):
            grouping([1, 2, 3], m)


class TestCoalitionModels:
    def test_singleton_coalitions_are_identities(self):
        models = [np.array([1.0, 2.0]), np.array([3.0, 4.0])]
        baseline = np.zeros(2)
        out = coalition_models(models, baseline)
        assert np.array_equal(out[0b01], models[0])
        assert np.array_equal(out[0b10], models[1])

    def test_pair_mean(self):
        out = coalition_models([np.full(3, 1.0), np.full(3, 3.0)], np.zeros(3))
        assert np.array_equal(out[0b11], np.full(3, 2.0))

    def test_powerset_size_includes_baseline(self):
        models = [np.full(2, float(i)) for i in range(3)]
        out = coalition_models(models, np.full(2, -1.0))
        assert len(out) == 8
        assert np.array_equal(out[0], np.full(2, -1.0))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            coalition_models([np.zeros(2), np.zeros(3)], np.zeros(2))

    def test_group_limit(self):
        models = [np.zeros(1)] * 17
        with pytest.raises(ValueError, match="16"):
            coalition_models(models, np.zeros(1))


class TestGroupSVRound:
    def test_single_group_game(self):
        parts = grouping([7, 9, 11], 1)
        util = FirstCoordinateUtility({0.0: 0.1, 5.0: 0.7})
        rc = group_sv_round([np.full(4, 5.0)], np.zeros(4), parts, util, round_index=2)
        assert rc.per_group == {0: pytest.approx(0.6)}
        for owner in (7, 9, 11):
            assert rc.per_owner[owner] == pytest.approx(0.6 / 3)
        assert rc.round == 2

    def test_two_group_hand_worked_values(self):
        # utilities: u(baseline)=0.1, u({1})=0.5, u({2})=0.3, u({1,2})=0.6
        util = FirstCoordinateUtility({0.0: 0.1, 10.0: 0.5, 30.0: 0.3, 20.0: 0.6})
        parts = grouping([4, 6], 2)
        rc = group_sv_round(
            [np.full(3, 10.0), np.full(3, 30.0)], np.zeros(3), parts, util
        )
        assert rc.per_group[0] == pytest.approx(0.35, abs=1e-12)
        assert rc.per_group[1] == pytest.approx(0.15, abs=1e-12)
        assert rc.per_owner == {4: pytest.approx(0.35), 6: pytest.approx(0.15)}

    def test_group_values_sum_to_grand_marginal(self):
        data = make_blobs(21, 80)
        ev = UtilityEvaluator(data)
        rng = np.random.default_rng(21)
        models = [rng.normal(0, 1, 27) for _ in range(4)]
        baseline = rng.normal(0, 1, 27)
        parts = grouping(list(range(8)), 4)
        rc = group_sv_round(models, baseline, parts, ev)
        full = ev.utility(sum(models) / 4)
        base = ev.utility(baseline)
        assert sum(rc.per_group.values()) == pytest.approx(full - base, abs=1e-12)
        assert sum(rc.per_owner.values()) == pytest.approx(
            sum(rc.per_group.values()), abs=1e-12
        )

    def test_within_group_shares_are_exactly_equal(self):
        data = make_blobs(22, 60)
        ev = UtilityEvaluator(data)
        rng = np.random.default_rng(22)
        models = [rng.normal(0, 1, 27) for _ in range(3)]
        parts = grouping(list(range(7)), 3)
        rc = group_sv_round(models, np.zeros(27), parts, ev)
        for j, grp in enumerate(parts.groups):
            shares = {rc.per_owner[o] for o in grp}
            assert shares == {rc.per_group[j] / len(grp)}

    def test_singleton_grouping_equals_native_sv_over_owner_models(self):
        """m = n: the group game must reduce to the exact per-owner game."""
        test = make_blobs(23, 120)
        ev = UtilityEvaluator(test)
        cfg = TrainConfig(0.3, 2)
        base = zero_weights(3, 8)
        models = {i: train_local(base, make_blobs(100 + i, 25), cfg) for i in range(5)}

        parts = grouping(permutation(9, 0, list(range(5))), 5)
        rc = group_sv_round([models[g[0]] for g in parts.groups], base, parts, ev)

        table = UtilityTable(
            5,
            {
                mask: ev.utility(model)
                for mask, model in coalition_models([models[i] for i in range(5)], base).items()
            },
        )
        reference = native_sv(table)
        for i in range(5):
            assert abs(rc.per_owner[i] - reference[i]) <= 1e-12

    def test_model_count_mismatch_rejected(self):
        parts = grouping([1, 2], 2)
        with pytest.raises(ValueError, match="group"):
            group_sv_round([np.zeros(3)], np.zeros(3), parts, FirstCoordinateUtility({0.0: 0.0}))


class TestLedger:
    def rc(self, r, values):
        return RoundContribution(round=r, per_owner=dict(values), per_group={0: sum(values.values())})

    def test_first_round_sets_totals(self):
        ledger = accumulate(ContributionLedger(), self.rc(0, {1: 0.5, 2: -0.25}))
        assert ledger.totals == {1: 0.5, 2: -0.25}
        assert len(ledger.rounds) == 1

    def test_opposite_rounds_cancel(self):
        ledger = ContributionLedger()
        ledger = accumulate(ledger, self.rc(0, {1: 0.5, 2: -0.25}))
        ledger = accumulate(ledger, self.rc(1, {1: -0.5, 2: 0.25}))
        assert ledger.totals == {1: 0.0, 2: 0.0}

    def test_repeated_value_accumulates_linearly(self):
        ledger = ContributionLedger()
        for r in range(12):
            ledger = accumulate(ledger, self.rc(r, {3: 0.125}))
        assert ledger.totals[3] == pytest.approx(12 * 0.125, abs=1e-12)

    def test_duplicate_round_rejected(self):
        ledger = accumulate(ContributionLedger(), self.rc(0, {1: 1.0}))
        with pytest.raises(ValueError, match="round 0"):
            accumulate(ledger, self.rc(0, {1: 2.0}))

    def test_accumulate_is_pure(self):
        empty = ContributionLedger()
        accumulate(empty, self.rc(0, {1: 1.0}))
        assert empty.totals == {} and empty.rounds == ()

    def test_unknown_owner_defaults_to_zero(self):
        assert ContributionLedger().total_for(99) == 0.0

    @given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=1, max_value=8))
    @settings(max_examples=30)
    def test_totals_equal_round_sums(self, seed, rounds):
        rng = np.random.default_rng(seed)
        ledger = ContributionLedger()
        for r in range(rounds):
            ledger = accumulate(
                ledger, self.rc(r, {i: float(rng.normal()) for i in range(4)})
            )
        for i in range(4):
            expected = sum(rc.per_owner[i] for rc in ledger.rounds)
            assert ledger.totals[i] == pytest.approx(expected, abs=1e-12)

    def test_json_roundtrip(self):
        ledger = accumulate(ContributionLedger(), self.rc(0, {1: 0.1, 2: 0.2}))
        ledger = accumulate(ledger, self.rc(1, {1: -0.05, 2: 0.125}))
        blob = json.dumps(ledger.to_json_dict())
        back = ContributionLedger.from_json_dict(json.loads(blob))
        assert back.totals == ledger.totals
        assert [rc.per_owner for rc in back.rounds] == [rc.per_owner for rc in ledger.rounds]
