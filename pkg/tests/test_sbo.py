import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orthodict.linalg import orthonormality_defect
from orthodict.sbo import (
    Assignment,
    SboConfig,
    UnionDictionary,
    block_energy,
    group_by_block,
    represent,
    sbo_init,
    sbo_train,
    worst_set,
)


def random_orthogonal(p, rng):
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    return q


def random_union(p, k, rng):
    return UnionDictionary([random_orthogonal(p, rng) for _ in range(k)])


def brute_force_choice(y, blocks, s0, kind):
    """Independent per-signal, per-block evaluation of the energy rule."""
    best_j, best_e = -1, -np.inf
    for j, q in enumerate(blocks):
        c = q.T @ y
        mags = np.sort(np.abs(c))[::-1][: min(s0, len(c))]
        e = float(np.sum(mags**2)) if kind == "squared-sum" else float(np.sum(mags))
        if e > best_e:
            best_j, best_e = j, e
    return best_j, best_e


class TestBlockEnergy:
    def test_identity_basis_vector(self):
        e1 = np.array([1.0, 0.0])
        assert block_energy(e1, np.eye(2), 1, "squared-sum") == pytest.approx(1.0)
        assert block_energy(e1, np.eye(2), 1, "abs-sum") == pytest.approx(1.0)

    def test_three_four_vector(self):
        y = np.array([3.0, 4.0])
        assert block_energy(y, np.eye(2), 2, "squared-sum") == pytest.approx(25.0)
        assert block_energy(y, np.eye(2), 2, "abs-sum") == pytest.approx(7.0)

    def test_parseval_bound(self):
        rng = np.random.default_rng(3)
        q = random_orthogonal(6, rng)
        for _ in range(20):
            y = rng.standard_normal(6)
            e = block_energy(y, q, 3, "squared-sum")
            assert e <= np.sum(y**2) + 1e-12
        # equality when the signal is sparse enough in the block's basis
        y = q[:, 1] * 2.0 - q[:, 4]
        assert block_energy(y, q, 2, "squared-sum") == pytest.approx(
            float(np.sum(y**2)), abs=1e-12
        )

    def test_rejects_bad_kind(self):
        with pytest.raises(ValueError):
            block_energy(np.ones(2), np.eye(2), 1, "other")


class TestRepresent:
    def test_single_block_assigns_everyone(self):
        rng = np.random.default_rng(0)
        d = random_union(4, 1, rng)
        a, _ = represent(rng.standard_normal((4, 9)), d, 2)
        assert np.all(a.block == 0)

    def test_exactly_sparse_signal_finds_its_block(self):
        rng = np.random.default_rng(1)
        d = random_union(4, 3, rng)
        y = (2.0 * d.blocks[2][:, 1] - 0.5 * d.blocks[2][:, 3])[:, None]
        a, code = represent(y, d, 2)
        assert a.block[0] == 2
        assert a.residual_sq[0] <= 1e-12
        oracle_j, _ = brute_force_choice(y[:, 0], d.blocks, 2, "squared-sum")
        assert oracle_j == 2

    @pytest.mark.parametrize("kind", ["squared-sum", "abs-sum"])
    def test_matches_exhaustive_oracle(self, kind):
        rng = np.random.default_rng(7)
        d = random_union(4, 3, rng)
        y = rng.standard_normal((4, 100))
        a, code = represent(y, d, 2, kind=kind)
        for j in range(100):
            oracle_j, oracle_e = brute_force_choice(y[:, j], d.blocks, 2, kind)
            assert a.block[j] == oracle_j
            assert a.energy[j] == pytest.approx(oracle_e, rel=1e-10)

    def test_tie_prefers_lowest_block(self):
        rng = np.random.default_rng(5)
        q = random_orthogonal(4, rng)
        d = UnionDictionary([q, q.copy(), np.eye(4)])
        y = q @ np.array([[3.0], [0.0], [1.0], [0.0]])
        a, _ = represent(y, d, 2)
        assert a.block[0] == 0

    def test_residual_matches_kept_coefficients(self):
        rng = np.random.default_rng(9)
        d = random_union(6, 4, rng)
        y = rng.standard_normal((6, 40))
        a, code = represent(y, d, 3)
        for j in range(40):
            expected = np.sum(y[:, j] ** 2) - np.sum(code.values[:, j] ** 2)
            assert a.residual_sq[j] == pytest.approx(
                max(expected, 0.0), abs=1e-10 * max(1.0, np.sum(y[:, j] ** 2))
            )

    def test_code_is_selection_of_winner_coefficients(self):
        rng = np.random.default_rng(11)
        d = random_union(5, 3, rng)
        y = rng.standard_normal((5, 25))
        a, code = represent(y, d, 2)
        for j in range(25):
            c = d.blocks[a.block[j]].T @ y[:, j]
            order = sorted(range(5), key=lambda i: (-abs(c[i]), i))[:2]
            assert set(code.indices[:, j]) == set(order)
            assert np.all(np.diff(code.indices[:, j]) > 0)
            np.testing.assert_allclose(code.values[:, j], c[code.indices[:, j]], atol=1e-12)

    def test_invariant_under_chunk_and_workers(self):
        rng = np.random.default_rng(13)
        d = random_union(8, 3, rng)
        y = np.asfortranarray(rng.standard_normal((8, 777)))
        ref = represent(y, d, 3, chunk_size=256, workers=1)
        for chunk, workers in [(1, 1), (64, 2), (1000, 1), (256, 4), (300, 3)]:
            a, code = represent(y, d, 3, chunk_size=chunk, workers=workers)
            np.testing.assert_array_equal(a.block, ref[0].block)
            np.testing.assert_array_equal(a.energy, ref[0].energy)
            np.testing.assert_array_equal(a.residual_sq, ref[0].residual_sq)
            np.testing.assert_array_equal(code.indices, ref[1].indices)
            np.testing.assert_array_equal(code.values, ref[1].values)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(1e-6, 1e6))
    def test_positive_scaling_keeps_choice(self, seed, scale):
        rng = np.random.default_rng(seed)
        d = random_union(4, 3, rng)
        y = rng.standard_normal((4, 8))
        for kind in ("squared-sum", "abs-sum"):
            a1, _ = represent(y, d, 2, kind=kind)
            a2, _ = represent(y * scale, d, 2, kind=kind)
            np.testing.assert_array_equal(a1.block, a2.block)

    def test_rejects_mismatched_dimension(self):
        rng = np.random.default_rng(2)
        d = random_union(4, 2, rng)
        with pytest.raises(ValueError):
            represent(rng.standard_normal((5, 3)), d, 2)

    def test_rejects_nonfinite_signals(self):
        rng = np.random.default_rng(3)
        d = random_union(4, 2, rng)
        y = rng.standard_normal((4, 5))
        y[2, 3] = np.nan
        with pytest.raises(ValueError, match="NaN"):
            represent(y, d, 2)


class TestWorstSet:
    def test_single_worst(self):
        a = Assignment(np.zeros(3, np.int64), np.zeros(3), np.array([0.1, 0.9, 0.5]))
        np.testing.assert_array_equal(worst_set(a, 1), [1])

    def test_ties_prefer_low_indices(self):
        a = Assignment(np.zeros(4, np.int64), np.zeros(4), np.full(4, 2.0))
        np.testing.assert_array_equal(worst_set(a, 2), [0, 1])

    def test_w_larger_than_m_returns_all(self):
        a = Assignment(np.zeros(3, np.int64), np.zeros(3), np.array([3.0, 1.0, 2.0]))
        got = worst_set(a, 10)
        assert sorted(got) == [0, 1, 2]

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(21)
        res = rng.random(1000)
        a = Assignment(np.zeros(1000, np.int64), np.zeros(1000), res)
        got = worst_set(a, 100)
        oracle = sorted(range(1000), key=lambda i: (-res[i], i))[:100]
        np.testing.assert_array_equal(got, oracle)

    def test_rejects_nonpositive_w(self):
        a = Assignment(np.zeros(2, np.int64), np.zeros(2), np.zeros(2))
        with pytest.raises(ValueError):
            worst_set(a, 0)


class TestGroupByBlock:
    def test_single_block_identity_permutation(self):
        y = np.arange(8.0).reshape(2, 4)
        a = Assignment(np.zeros(4, np.int64), np.zeros(4), np.zeros(4))
        grouped, ranges, perm = group_by_block(y, a, 1)
        np.testing.assert_array_equal(perm, [0, 1, 2, 3])
        np.testing.assert_array_equal(grouped, y)
        assert ranges == [(0, 4)]

    def test_hand_checked_permutation(self):
        y = np.arange(8.0).reshape(2, 4)
        a = Assignment(np.array([1, 0, 1, 0]), np.zeros(4), np.zeros(4))
        grouped, ranges, perm = group_by_block(y, a, 2)
        np.testing.assert_array_equal(perm, [1, 3, 0, 2])
        assert ranges == [(0, 2), (2, 4)]
        np.testing.assert_array_equal(grouped, y[:, [1, 3, 0, 2]])

    def test_round_trip(self):
        rng = np.random.default_rng(31)
        y = rng.standard_normal((5, 1000))
        blocks = rng.integers(0, 8, size=1000)
        a = Assignment(blocks, np.zeros(1000), np.zeros(1000))
        grouped, ranges, perm = group_by_block(y, a, 8)
        inverse = np.argsort(perm)
        np.testing.assert_array_equal(grouped[:, inverse], y)
        # every range holds exactly its block's signals, in original order
        for b in range(8):
            start, end = ranges[b]
            np.testing.assert_array_equal(perm[start:end], np.nonzero(blocks == b)[0])

    def test_empty_blocks_have_empty_ranges(self):
        y = np.ones((2, 3))
        a = Assignment(np.array([2, 2, 0]), np.zeros(3), np.zeros(3))
        _, ranges, _ = group_by_block(y, a, 4)
        assert ranges[1] == ranges[1][0:1] * 2 or ranges[1][0] == ranges[1][1]
        assert ranges[3][0] == ranges[3][1]


def sparse_in_basis(rng, q_star, t, s0, rows_cycle=True):
    p = q_star.shape[0]
    x = np.zeros((p, t))
    for j in range(t):
        rows = rng.choice(p, size=s0, replace=False)
        x[rows, j] = rng.uniform(0.5, 2.0, size=s0) * rng.choice([-1, 1], size=s0)
    return q_star @ x


class TestSboInit:
    def test_single_block_on_all_signals(self):
        rng = np.random.default_rng(41)
        y = rng.standard_normal((6, 50))
        cfg = SboConfig(s0=2, k0=1, p0=50, k_max=4, seed=3, rounds=2)
        d = sbo_init(y, cfg)
        assert d.num_blocks == 1
        assert orthonormality_defect(d.blocks[0]) <= 1e-8

    def test_bit_identical_across_runs_and_workers(self):
        rng = np.random.default_rng(43)
        y = rng.standard_normal((6, 200))
        cfg = SboConfig(s0=2, k0=4, p0=64, k_max=8, seed=9, rounds=3)
        d1 = sbo_init(y, cfg, workers=1)
        d2 = sbo_init(y, cfg, workers=4)
        d3 = sbo_init(y, cfg, workers=1)
        for q1, q2, q3 in zip(d1.blocks, d2.blocks, d3.blocks):
            np.testing.assert_array_equal(q1, q2)
            np.testing.assert_array_equal(q1, q3)

    def test_five_blocks_orthonormal(self):
        rng = np.random.default_rng(47)
        y = rng.standard_normal((8, 400))
        cfg = SboConfig(s0=3, k0=5, p0=128, k_max=8, seed=1, rounds=3)
        d = sbo_init(y, cfg)
        assert d.num_blocks == 5
        for q in d.blocks:
            assert orthonormality_defect(q) <= 1e-8

    def test_oversized_p0_warns_and_samples_with_replacement(self):
        rng = np.random.default_rng(53)
        y = rng.standard_normal((4, 10))
        cfg = SboConfig(s0=2, k0=1, p0=64, k_max=2, seed=2, rounds=1)
        with pytest.warns(UserWarning, match="replacement"):
            d = sbo_init(y, cfg)
        assert d.num_blocks == 1


class TestSboTrain:
    def test_fixed_point_stops_at_initialization(self):
        # signals whose row-energies make the start-up SVD recover the
        # planted basis exactly, so the target error is met with one block
        rng = np.random.default_rng(61)
        q_star = random_orthogonal(5, rng)
        t = 40
        x = np.zeros((5, t))
        for j in range(t):
            x[j % 5, j] = 5.0 - (j % 5) * 0.9 + 0.01 * (j // 5)
        y = q_star @ x
        cfg = SboConfig(s0=1, k0=1, p0=t, k_max=8, target_error=1e-8, seed=5, rounds=4)
        d, code, a, report = sbo_train(y, cfg)
        assert d.num_blocks == 1
        assert report.rows[-1].rmse <= 1e-8

    def test_growth_counting_contract(self):
        rng = np.random.default_rng(67)
        y = rng.standard_normal((6, 300))
        cfg = SboConfig(s0=2, k0=5, p0=64, k_max=8, target_error=0.0, seed=7, rounds=2)
        d, code, a, report = sbo_train(y, cfg)
        assert d.num_blocks == 8
        # one initialization row plus exactly three growth iterations
        assert len(report.rows) == 4
        assert [r.dictionary_size for r in report.rows] == [5, 6, 7, 8]

    def test_rmse_monotone_squared_sum(self):
        rng = np.random.default_rng(71)
        y = rng.standard_normal((8, 600))
        cfg = SboConfig(s0=3, k0=2, p0=128, k_max=10, seed=11, rounds=3)
        _, _, _, report = sbo_train(y, cfg)
        rmses = [r.rmse for r in report.rows]
        for prev, nxt in zip(rmses, rmses[1:]):
            assert nxt <= prev * (1 + 1e-12)

    def test_report_recomputation_matches(self):
        rng = np.random.default_rng(73)
        y = rng.standard_normal((6, 256))
        cfg = SboConfig(s0=2, k0=2, p0=64, k_max=6, seed=13, rounds=3)
        _, _, _, report = sbo_train(y, cfg)
        assert report.rmse_recomputed == pytest.approx(report.rmse_final, abs=1e-10)

    def test_bit_determinism_across_workers_and_chunks(self):
        rng = np.random.default_rng(79)
        y = np.asfortranarray(rng.standard_normal((8, 500)))
        outs = []
        for workers, chunk in [(1, 256), (4, 256), (1, 37), (2, 999)]:
            cfg = SboConfig(s0=3, k0=2, p0=100, k_max=6, seed=17, rounds=3,
                            chunk_size=chunk)
            d, code, a, _ = sbo_train(y, cfg, workers=workers)
            outs.append((d, code))
        ref_d, ref_c = outs[0]
        for d, c in outs[1:]:
            for q1, q2 in zip(ref_d.blocks, d.blocks):
                np.testing.assert_array_equal(q1, q2)
            np.testing.assert_array_equal(ref_c.block, c.block)
            np.testing.assert_array_equal(ref_c.indices, c.indices)
            np.testing.assert_array_equal(ref_c.values, c.values)

    def test_unused_block_is_noted(self):
        # few signals spread over many blocks: block 7 ends up serving nobody
        # in the last iteration of this seeded instance
        rng = np.random.default_rng(1000)
        y = rng.standard_normal((4, 36))
        cfg = SboConfig(s0=1, k0=3, p0=12, k_max=8, seed=0, rounds=2)
        d, code, a, report = sbo_train(y, cfg)
        assert any("no signals" in note for note in report.notes)
        assert d.num_blocks == 8

    def test_energy_kinds_both_run(self):
        rng = np.random.default_rng(89)
        y = rng.standard_normal((6, 200))
        for kind in ("squared-sum", "abs-sum"):
            cfg = SboConfig(s0=2, k0=2, p0=50, k_max=4, seed=23, rounds=2,
                            energy_kind=kind)
            d, _, _, report = sbo_train(y, cfg)
            assert d.num_blocks == 4
            assert np.isfinite(report.rmse_final)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SboConfig(s0=0).validate()
        with pytest.raises(ValueError):
            SboConfig(s0=1, k0=5, k_max=3).validate()
        with pytest.raises(ValueError):
            SboConfig(s0=1, energy_kind="nope").validate()
        with pytest.raises(ValueError):
            SboConfig(s0=1, chunk_size=0).validate()
