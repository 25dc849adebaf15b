import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bflab import process as P
from bflab._kernel import sample_edges
from bflab.errors import InvalidArgumentError, ProcessExhaustedError

ER = P.ProcessRule.erdos_renyi()
BF = P.ProcessRule.bohman_frieze()


def bf_as_bounded():
    return P.ProcessRule.bounded(1, P.bf_decision_table())


class TestNewProcess:
    def test_empty_graph(self):
        st_ = P.new_process(4, BF, seed=1)
        assert st_.m == 0
        assert st_.x1_count == 4
        assert P.susceptibility(st_, 1) == 1.0

    def test_n2_only_possible_edge(self):
        st_ = P.new_process(2, ER, seed=7)
        out = P.step(st_)
        assert out.edge == (0, 1)
        assert out.merged

    def test_degenerate_n(self):
        with pytest.raises(InvalidArgumentError):
            P.new_process(1, BF, seed=0)

    def test_bit_identical_trajectories(self):
        a = P.new_process(3000, BF, seed=99)
        b = P.new_process(3000, BF, seed=99)
        sa = P.run_until(a, 1.2)
        sb = P.run_until(b, 1.2)
        assert np.array_equal(a.parent, b.parent)
        assert np.array_equal(a.csize, b.csize)
        assert np.array_equal(a.cedges, b.cedges)
        assert sa.to_json_dict() == sb.to_json_dict()

    def test_seed_changes_trajectory(self):
        a = P.new_process(3000, BF, seed=99)
        b = P.new_process(3000, BF, seed=100)
        P.run_until(a, 1.0)
        P.run_until(b, 1.0)
        assert not np.array_equal(a.parent, b.parent)


class TestSampling:
    def test_single_absent_edge(self):
        st_ = P.new_process(3, ER, seed=5)
        P.apply_candidate_pair(st_, (0, 1), (0, 1))
        P.apply_candidate_pair(st_, (1, 2), (1, 2))
        for _ in range(5):
            e1, e2 = P.sample_candidate_pair(st_)
            assert e1 == (0, 2) and e2 == (0, 2)

    def test_exhausted(self):
        st_ = P.new_process(2, ER, seed=5)
        P.step(st_)
        with pytest.raises(ProcessExhaustedError):
            P.sample_candidate_pair(st_)
        with pytest.raises(ProcessExhaustedError):
            P.step(st_)

    def test_uniform_marginal_at_vertex(self):
        # empty graph: P[a sampled edge touches vertex v] = 2/n exactly
        n, draws = 10 ** 5, 10 ** 6
        st_ = P.new_process(n, ER, seed=2024)
        out = np.empty((draws, 2), dtype=np.int64)
        sample_edges(st_.table, st_.rng, n, out)
        hits = int(np.count_nonzero(out == 0))
        expect = draws * 2.0 / n
        z = (hits - expect) / np.sqrt(expect)
        assert abs(z) < 4.0, (hits, expect, z)

    def test_no_self_loops_and_sorted(self):
        st_ = P.new_process(50, ER, seed=3)
        for _ in range(30):
            e1, e2 = P.sample_candidate_pair(st_)
            for u, v in (e1, e2):
                assert 0 <= u < v < 50


class TestStepRule:
    def test_bf_takes_first_when_both_isolated(self):
        st_ = P.new_process(6, BF, seed=0)
        out = P.apply_candidate_pair(st_, (0, 1), (2, 3))
        assert out.chosen == "first" and out.edge == (0, 1)

    def test_bf_takes_second_otherwise(self):
        st_ = P.new_process(6, BF, seed=0)
        P.apply_candidate_pair(st_, (0, 1), (0, 1))
        out = P.apply_candidate_pair(st_, (0, 2), (3, 4))
        assert out.chosen == "second" and out.edge == (3, 4)

    def test_er_always_first(self):
        st_ = P.new_process(6, ER, seed=0)
        P.apply_candidate_pair(st_, (0, 1), (0, 1))
        out = P.apply_candidate_pair(st_, (0, 2), (3, 4))
        assert out.chosen == "first" and out.edge == (0, 2)

    def test_merged_xor_cycle(self):
        st_ = P.new_process(4, ER, seed=0)
        o1 = P.apply_candidate_pair(st_, (0, 1), (0, 1))
        assert o1.merged and not o1.cycle_created
        o2 = P.apply_candidate_pair(st_, (1, 2), (1, 2))
        o3 = P.apply_candidate_pair(st_, (0, 2), (0, 2))
        assert o3.cycle_created and not o3.merged
        assert o3.resulting_class == "unicyclic"

    def test_present_pair_rejected(self):
        st_ = P.new_process(4, ER, seed=0)
        P.apply_candidate_pair(st_, (0, 1), (0, 1))
        with pytest.raises(InvalidArgumentError):
            P.apply_candidate_pair(st_, (0, 1), (2, 3))

    def test_component_count_bookkeeping(self):
        st_ = P.new_process(30, BF, seed=8)
        while st_.m < 25:
            before = st_.component_count
            out = P.step(st_)
            after = st_.component_count
            if out.merged:
                assert after == before - 1
            else:
                assert after == before


class TestRunUntil:
    def test_step_count(self):
        st_ = P.new_process(10 ** 4, BF, seed=1)
        P.run_until(st_, 1.0)
        assert st_.m == 5000

    def test_below_current_t(self):
        st_ = P.new_process(100, ER, seed=1)
        P.run_until(st_, 1.0)
        with pytest.raises(InvalidArgumentError):
            P.run_until(st_, 0.5)

    def test_t_target_cap(self):
        st_ = P.new_process(4, ER, seed=1)
        with pytest.raises(InvalidArgumentError):
            P.run_until(st_, 3.0)

    def test_er_susceptibility_near_two(self):
        # deterministic value s_1(0.5) = 1/(1-0.5) = 2
        vals = []
        for seed in range(5):
            st_ = P.new_process(10 ** 5, ER, seed=seed, i_track=16)
            vals.append(P.run_until(st_, 0.5).s_k[0])
        vals = np.array(vals)
        se = vals.std(ddof=1) / np.sqrt(len(vals))
        assert abs(vals.mean() - 2.0) < 3 * max(se, 1e-4)

    def test_bf_x1_matches_ode_value(self):
        st_ = P.new_process(10 ** 5, BF, seed=11, i_track=16)
        g = P.run_until(st_, 1.0)
        assert abs(g.x_fraction[0] - 0.3011671422) < 0.005


class TestSusceptibility:
    def test_direct_evaluation(self):
        st_ = P.new_process(4, BF, seed=0)
        P.apply_candidate_pair(st_, (0, 1), (0, 1))   # components {2,1,1}
        assert P.susceptibility(st_, 1) == pytest.approx(1.5)

    def test_empty_graph_all_moments(self):
        st_ = P.new_process(7, ER, seed=0)
        for k in (1, 2, 3):
            assert P.susceptibility(st_, k) == 1.0

    def test_single_component(self):
        st_ = P.new_process(4, ER, seed=0)
        for e in ((0, 1), (1, 2), (2, 3)):
            P.apply_candidate_pair(st_, e, e)
        assert P.susceptibility(st_, 2) == pytest.approx(16.0)   # n^2

    def test_invalid_order(self):
        st_ = P.new_process(4, ER, seed=0)
        with pytest.raises(InvalidArgumentError):
            P.susceptibility(st_, 0)


class TestRestrictedSusceptibility:
    def _state_5_2(self):
        st_ = P.new_process(7, ER, seed=0)
        for e in ((0, 1), (1, 2), (2, 3), (3, 4), (5, 6)):
            P.apply_candidate_pair(st_, e, e)
        return st_

    def test_cap_excludes_large(self):
        assert P.restricted_susceptibility(self._state_5_2(), 3) == pytest.approx(4 / 7)

    def test_cap_above_c1_equals_s1(self):
        st_ = self._state_5_2()
        assert P.restricted_susceptibility(st_, 5) == pytest.approx(
            P.susceptibility(st_, 1))

    def test_empty_graph(self):
        st_ = P.new_process(9, ER, seed=0)
        assert P.restricted_susceptibility(st_, 1) == 1.0

    def test_bounded_by_cap(self):
        st_ = self._state_5_2()
        for L in (1, 2, 3, 4, 5):
            assert P.restricted_susceptibility(st_, L) <= L + 1e-12


class TestCensus:
    def test_empty(self):
        c = P.component_census(P.new_process(5, ER, seed=0))
        assert (c.trees, c.unicyclic, c.complex) == (5, 0, 0)
        assert c.c1 == 1 and c.c2 == 1

    def test_triangle(self):
        st_ = P.new_process(6, ER, seed=0)
        for e in ((0, 1), (1, 2), (0, 2)):
            P.apply_candidate_pair(st_, e, e)
        c = P.component_census(st_)
        assert c.unicyclic == 1 and c.complex == 0
        assert list(c.unicyclic_sizes) == [3]

    def test_k4_complex(self):
        st_ = P.new_process(4, ER, seed=0)
        for u in range(4):
            for v in range(u + 1, 4):
                P.apply_candidate_pair(st_, (u, v), (u, v))
        c = P.component_census(st_)
        assert c.complex == 1 and c.trees == 0


class TestBoundedRules:
    def test_bf_equals_bounded_k1_trajectory(self):
        # same partition and statistics; parent pointers may differ only in
        # path-compression depth (the bounded path does extra finds)
        def canonical(state):
            p = state.parent.copy()
            while True:
                pp = p[p]
                if np.array_equal(pp, p):
                    return p
                p = pp

        a = P.new_process(3000, BF, seed=4242)
        b = P.new_process(3000, bf_as_bounded(), seed=4242)
        ga = P.run_until(a, 1.2)
        gb = P.run_until(b, 1.2)
        assert np.array_equal(canonical(a), canonical(b))
        assert ga.to_json_dict() == gb.to_json_dict()

    def test_table_must_be_total(self):
        with pytest.raises(InvalidArgumentError):
            P.ProcessRule.bounded(1, (0, 1))
        with pytest.raises(InvalidArgumentError):
            P.ProcessRule.bounded(1, (0,) * 15 + (2,))

    def test_parse_rule(self):
        assert P.parse_rule("er").kind == "er"
        assert P.parse_rule("bf").kind == "bf"
        r = P.parse_rule("bounded:2")
        assert r.k == 2 and len(r.table) == 81
        with pytest.raises(InvalidArgumentError):
            P.parse_rule("bounded:x")
        with pytest.raises(InvalidArgumentError):
            P.parse_rule("magic")

    def test_bounded_k2_runs(self):
        st_ = P.new_process(500, P.parse_rule("bounded:2"), seed=6)
        g = P.run_until(st_, 0.8)
        P.check_invariants(st_)
        assert g.m == 200


class TestInvariantsUnderTrajectories:
    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(12, 120), seed=st.integers(0, 2 ** 32),
           rule_idx=st.integers(0, 2))
    def test_forest_invariants(self, n, seed, rule_idx):
        rule = (ER, BF, bf_as_bounded())[rule_idx]
        st_ = P.new_process(n, rule, seed=seed, i_track=32)
        s1_prev = 1.0
        x1_prev = n
        for _ in range(4):
            P.run_until(st_, st_.t + 0.3)
            P.check_invariants(st_)
            s1 = P.susceptibility(st_, 1)
            assert s1 >= s1_prev - 1e-12          # merging never decreases it
            s1_prev = s1
            assert st_.x1_count <= x1_prev
            x1_prev = st_.x1_count
            c = P.component_census(st_)
            assert c.c1 >= c.c2
            assert c.total == st_.component_count

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2 ** 32))
    def test_edge_conservation(self, seed):
        st_ = P.new_process(64, BF, seed=seed)
        for _ in range(80):
            P.step(st_)
        sizes_sum = int(st_.csize[st_.parent == np.arange(64)].sum())
        edges_sum = int(st_.cedges[st_.parent == np.arange(64)].sum())
        assert sizes_sum == 64
        assert edges_sum == st_.m == 80


class TestStatsSnapshot:
    def test_histogram_matches_scan(self):
        st_ = P.new_process(2000, BF, seed=77, i_track=64)
        P.run_until(st_, 1.1)
        P.check_invariants(st_)

    def test_s1_consistency_with_x_fraction(self):
        # with i_track = n the x-vector is complete: mass 1, s_1 = sum i x_i
        st_ = P.new_process(500, ER, seed=3, i_track=500)
        g = P.run_until(st_, 0.4)
        i = np.arange(1, len(g.x_fraction) + 1)
        assert float(g.x_fraction.sum()) == pytest.approx(1.0, abs=1e-12)
        assert g.s_k[0] == pytest.approx(float(np.dot(i, g.x_fraction)), abs=1e-9)

    def test_restricted_leq_s1_and_cap(self):
        st_ = P.new_process(400, BF, seed=9)
        g = P.run_until(st_, 1.0, L=10)
        assert g.s_L <= 10 + 1e-12
        assert g.s_L <= g.s_k[0] + 1e-12
