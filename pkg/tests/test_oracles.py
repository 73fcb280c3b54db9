import numpy as np
import pytest

import bruteforce as bf
from dflkit.core import DimensionError
from dflkit.oracles import (BIG_CUTOFF, DenseTSP, GridShortestPath, OracleAudit,
                            SelectOne, UncertaintyParams, instance_from_descriptor,
                            is_feasible, robust_solve, solve, top_k_solve,
                            worst_case_cost)


def bits(x):
    return tuple(int(round(v)) for v in x)


GRID22 = GridShortestPath(2, 2)


class TestGridSolve:
    def test_two_path_example(self):
        assert bits(solve(GRID22, [1, 5, 1, 1])) == (1, 0, 0, 1)

    def test_tie_breaking_rule(self):
        # both paths cost 2; the tie goes to the one using variable 0
        assert bits(solve(GRID22, [1, 1, 1, 1])) == (1, 0, 0, 1)

    def test_matches_bruteforce_random(self):
        rng = np.random.default_rng(11)
        for v, h in [(2, 2), (2, 3), (3, 3), (3, 4), (4, 4)]:
            inst = GridShortestPath(v, h)
            paths = bf.grid_paths(v, h)
            for _ in range(40):
                c = rng.normal(size=inst.n) * 10  # negatives allowed on the DAG
                assert bits(solve(inst, c)) == bf.best_decision(paths, c)

    def test_integer_tie_cases_match_bruteforce(self):
        rng = np.random.default_rng(5)
        inst = GridShortestPath(3, 3)
        paths = bf.grid_paths(3, 3)
        for _ in range(60):
            c = rng.integers(0, 3, size=inst.n).astype(float)  # many exact ties
            assert bits(solve(inst, c)) == bf.best_decision(paths, c)

    def test_positive_scaling_invariance(self):
        rng = np.random.default_rng(2)
        inst = GridShortestPath(3, 4)
        for _ in range(20):
            c = rng.normal(size=inst.n)
            a = float(rng.uniform(0.1, 50))
            assert bits(solve(inst, c)) == bits(solve(inst, a * c))
        assert bits(solve(inst, np.ones(inst.n))) == bits(solve(inst, 7.0 * np.ones(inst.n)))

    def test_dimension_and_magnitude_errors(self):
        with pytest.raises(DimensionError):
            solve(GRID22, [1, 2, 3])
        with pytest.raises(ValueError):
            solve(GRID22, np.full(4, BIG_CUTOFF))


class TestGridTopK:
    def test_two_path_example(self):
        out = top_k_solve(GRID22, [1, 5, 1, 1], 2)
        assert [bits(x) for x in out] == [(1, 0, 0, 1), (0, 1, 1, 0)]
        costs = [float(np.dot([1, 5, 1, 1], x)) for x in out]
        assert costs == [2.0, 6.0]

    def test_truncation(self):
        assert len(top_k_solve(GRID22, [1, 5, 1, 1], 5)) == 2

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(23)
        inst = GridShortestPath(3, 3)
        paths = bf.grid_paths(3, 3)
        for _ in range(30):
            c = rng.normal(size=inst.n) * 4
            got = [bits(x) for x in top_k_solve(inst, c, 4)]
            assert got == bf.k_best_decisions(paths, c, 4)

    def test_prefix_property_and_distinct(self):
        rng = np.random.default_rng(29)
        inst = GridShortestPath(3, 4)
        c = rng.normal(size=inst.n)
        full = [bits(x) for x in top_k_solve(inst, c, 6)]
        assert len(set(full)) == len(full)
        for j in range(1, 6):
            assert [bits(x) for x in top_k_solve(inst, c, j)] == full[:j]
        vals = [bf.cost_of(c, d) for d in full]
        assert vals == sorted(vals)

    def test_first_equals_solve(self):
        rng = np.random.default_rng(31)
        inst = GridShortestPath(4, 3)
        for _ in range(10):
            c = rng.normal(size=inst.n)
            assert bits(top_k_solve(inst, c, 3)[0]) == bits(solve(inst, c))

    def test_tied_costs_match_bruteforce_ordering(self):
        # full degeneracy: every path ties; ordering must follow the tie rule
        for v, h in [(2, 2), (3, 3), (3, 4)]:
            inst = GridShortestPath(v, h)
            paths = bf.grid_paths(v, h)
            got = [bits(x) for x in top_k_solve(inst, np.ones(inst.n), len(paths))]
            assert got == bf.k_best_decisions(paths, np.ones(inst.n), len(paths))
        rng = np.random.default_rng(37)
        inst = GridShortestPath(3, 3)
        paths = bf.grid_paths(3, 3)
        for _ in range(60):
            c = rng.integers(0, 3, size=inst.n).astype(float)
            got = [bits(x) for x in top_k_solve(inst, c, 6)]
            assert got == bf.k_best_decisions(paths, c, 6)

    def test_audit_partition_count(self):
        # documented: 1 root solve plus one per spawned subproblem
        inst = GridShortestPath(2, 2)
        audit = OracleAudit()
        out = top_k_solve(inst, [1.0, 5.0, 1.0, 1.0], 2, audit)
        # root (1) + first path spawns len(path)=2 subproblems
        assert len(out) == 2
        assert audit.solve_count == 3


class TestTSP:
    def test_square_perimeter(self):
        inst = DenseTSP(4, coords=[(0, 0), (1, 0), (1, 1), (0, 1)])
        c = inst.distance_costs()
        x = solve(inst, c)
        assert bits(x) == (1, 0, 1, 1, 0, 1)
        assert float(np.dot(c, x)) == pytest.approx(4.0)
        # exhaustive check over all 3 canonical tours
        assert bits(x) == bf.best_decision(bf.tsp_tours(4), c)

    def test_matches_bruteforce_random(self):
        rng = np.random.default_rng(41)
        for nn in (5, 6, 7, 8):
            inst = DenseTSP(nn)
            tours = bf.tsp_tours(nn)
            for _ in range(15):
                c = rng.normal(size=inst.n) * 3
                assert bits(solve(inst, c)) == bf.best_decision(tours, c)

    def test_all_ones_tie(self):
        # every tour ties; lex rule picks the support-smallest tour
        inst = DenseTSP(4)
        got = bits(solve(inst, np.ones(6)))
        assert got == bf.best_decision(bf.tsp_tours(4), np.ones(6))
        assert got == (1, 1, 0, 0, 1, 1)

    def test_integer_ties_match_bruteforce(self):
        rng = np.random.default_rng(43)
        inst = DenseTSP(5)
        tours = bf.tsp_tours(5)
        for _ in range(40):
            c = rng.integers(0, 2, size=inst.n).astype(float)
            assert bits(solve(inst, c)) == bf.best_decision(tours, c)

    def test_top_k_matches_bruteforce(self):
        rng = np.random.default_rng(47)
        inst = DenseTSP(6)
        tours = bf.tsp_tours(6)
        for _ in range(10):
            c = rng.normal(size=inst.n)
            got = [bits(x) for x in top_k_solve(inst, c, 5)]
            assert got == bf.k_best_decisions(tours, c, 5)

    def test_size_caps(self):
        big = DenseTSP(17)
        with pytest.raises(ValueError):
            solve(big, np.ones(big.n))
        mid = DenseTSP(11)
        with pytest.raises(ValueError):
            top_k_solve(mid, np.ones(mid.n), 2)

    def test_descriptor_roundtrip(self):
        inst = DenseTSP(4, coords=[(0.125, 0.5), (1, 0), (0.333333, 1), (0, 1)])
        back = instance_from_descriptor(inst.descriptor())
        assert back.n_nodes == 4 and back.coords == inst.coords
        grid = instance_from_descriptor("grid:3x4")
        assert (grid.v, grid.h, grid.n) == (3, 4, 17)


class TestSelectOne:
    def test_solve_and_ties(self):
        inst = SelectOne(3)
        assert bits(solve(inst, [2.0, 1.0, 1.0])) == (0, 1, 0)  # tie -> low index
        assert [bits(x) for x in top_k_solve(inst, [3.0, 1.0, 2.0], 2)] == \
            [(0, 1, 0), (0, 0, 1)]

    def test_feasibility(self):
        inst = SelectOne(3)
        assert is_feasible(inst, [0, 1, 0])
        assert not is_feasible(inst, [1, 1, 0])
        assert not is_feasible(inst, [0, 0, 0])


class TestFeasibility:
    def test_grid_examples(self):
        assert is_feasible(GRID22, [1, 0, 0, 1])
        assert not is_feasible(GRID22, [1, 0, 0, 0])  # dangling
        assert not is_feasible(GRID22, [1, 1, 1, 1])  # branching

    def test_tsp_subtours_rejected(self):
        inst = DenseTSP(4)
        # a 3-cycle plus an isolated node
        x = np.zeros(6)
        x[inst.pair_index(0, 1)] = 1
        x[inst.pair_index(1, 2)] = 1
        x[inst.pair_index(0, 2)] = 1
        assert not is_feasible(inst, x)
        # the 0/1 shadow of two disjoint 2-cycles: edges (0,1) and (2,3) only
        y = np.zeros(6)
        y[inst.pair_index(0, 1)] = 1
        y[inst.pair_index(2, 3)] = 1
        assert not is_feasible(inst, y)
        # two disjoint 3-cycles on six nodes
        inst6 = DenseTSP(6)
        z = np.zeros(inst6.n)
        for a, b in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]:
            z[inst6.pair_index(a, b)] = 1
        assert not is_feasible(inst6, z)
        assert is_feasible(inst, solve(inst, np.arange(6.0)))

    def test_all_solutions_feasible(self):
        rng = np.random.default_rng(53)
        for inst in (GridShortestPath(3, 3), DenseTSP(5), SelectOne(4)):
            for _ in range(5):
                c = rng.normal(size=inst.n)
                assert is_feasible(inst, solve(inst, c))
                for x in top_k_solve(inst, c, 3):
                    assert is_feasible(inst, x)


class TestWorstCase:
    def test_hand_example(self):
        u = UncertaintyParams(rho=0.5, gamma=1.0)
        assert worst_case_cost(GRID22, [1, 5, 1, 1], [1, 0, 0, 1], u) == 3.0
        assert worst_case_cost(GRID22, [1, 5, 1, 1], [0, 1, 1, 0], u) == 9.0

    def test_zero_rho(self):
        u = UncertaintyParams(rho=0.0, gamma=5.0)
        assert worst_case_cost(GRID22, [1, 5, 1, 1], [1, 0, 0, 1], u) == 2.0

    def test_non_binding_budget(self):
        # dyadic costs keep the scaling identity exact
        c = np.array([2.0, 8.0, 4.0, 0.5])
        u = UncertaintyParams(rho=0.5, gamma=4 * 0.5)
        x = np.array([1.0, 0.0, 0.0, 1.0])
        assert worst_case_cost(GRID22, c, x, u) == 1.5 * float(np.dot(c, x))

    def test_against_independent_lp(self):
        from scipy.optimize import linprog

        rng = np.random.default_rng(59)
        inst = GridShortestPath(2, 3)
        paths = bf.grid_paths(2, 3)
        for _ in range(25):
            c = rng.normal(size=inst.n) * 5
            x = np.array(paths[rng.integers(len(paths))], dtype=float)
            rho = float(rng.uniform(0, 1))
            gamma = float(rng.uniform(0, rho * inst.n))
            u = UncertaintyParams(rho=rho, gamma=gamma)
            # max sum |c_i| x_i zeta_i  s.t.  0 <= zeta <= rho, sum zeta <= gamma
            obj = -(np.abs(c) * x)
            res = linprog(obj, A_ub=np.ones((1, inst.n)), b_ub=[gamma],
                          bounds=[(0, rho)] * inst.n, method="highs")
            expected = float(np.dot(c, x)) - res.fun
            assert worst_case_cost(inst, c, x, u) == pytest.approx(expected, rel=1e-9)

    def test_infeasible_decision_rejected(self):
        with pytest.raises(ValueError):
            worst_case_cost(GRID22, [1, 1, 1, 1], [1, 1, 0, 0],
                            UncertaintyParams(0.5, 1.0))


class TestRobustSolve:
    def test_grid_example(self):
        u = UncertaintyParams(rho=0.5, gamma=1.0)
        assert bits(robust_solve(GRID22, [1, 5, 1, 1], u)) == (1, 0, 0, 1)

    def test_zero_rho_equals_nominal(self):
        rng = np.random.default_rng(61)
        inst = GridShortestPath(3, 3)
        for _ in range(5):
            c = rng.normal(size=inst.n)
            u = UncertaintyParams(rho=0.0, gamma=2.0)
            assert bits(robust_solve(inst, c, u)) == bits(solve(inst, c))

    def test_nonbinding_budget_equals_nominal_for_positive_costs(self):
        rng = np.random.default_rng(67)
        inst = GridShortestPath(3, 3)
        for _ in range(5):
            c = rng.uniform(0.5, 4.0, size=inst.n)
            u = UncertaintyParams(rho=0.5, gamma=0.5 * inst.n)
            assert bits(robust_solve(inst, c, u)) == bits(solve(inst, c))

    @pytest.mark.parametrize("rho", [0.0, 0.25, 0.5, 1.0])
    def test_brute_equivalence_grid(self, rho):
        rng = np.random.default_rng(71)
        for v, h in [(2, 2), (2, 3), (3, 3)]:
            inst = GridShortestPath(v, h)
            paths = [np.array(p, dtype=float) for p in bf.grid_paths(v, h)]
            for gamma in [0.0, inst.n / 8, inst.n / 4, rho * inst.n]:
                u = UncertaintyParams(rho=rho, gamma=gamma)
                for _ in range(6):
                    c = rng.normal(size=inst.n) * 3
                    got = robust_solve(inst, c, u)
                    best = min(worst_case_cost(inst, c, p, u) for p in paths)
                    assert worst_case_cost(inst, c, got, u) == best

    @pytest.mark.parametrize("nn", [5, 6, 7])
    def test_brute_equivalence_tsp(self, nn):
        rng = np.random.default_rng(73)
        inst = DenseTSP(nn)
        tours = [np.array(tr, dtype=float) for tr in bf.tsp_tours(nn)]
        for rho, gamma in [(0.25, inst.n / 8), (0.5, inst.n / 4), (1.0, inst.n / 8)]:
            u = UncertaintyParams(rho=rho, gamma=gamma)
            for _ in range(3):
                c = rng.normal(size=inst.n) * 2
                got = robust_solve(inst, c, u)
                best = min(worst_case_cost(inst, c, tr, u) for tr in tours)
                assert worst_case_cost(inst, c, got, u) == best

    def test_fractional_budget(self):
        rng = np.random.default_rng(79)
        inst = GridShortestPath(2, 3)
        paths = [np.array(p, dtype=float) for p in bf.grid_paths(2, 3)]
        for _ in range(20):
            c = rng.normal(size=inst.n) * 4
            u = UncertaintyParams(rho=0.4, gamma=1.3)  # gamma/rho = 3.25
            got = robust_solve(inst, c, u)
            best = min(worst_case_cost(inst, c, p, u) for p in paths)
            assert worst_case_cost(inst, c, got, u) == best


class TestAudit:
    def test_solve_increments_once(self):
        audit = OracleAudit()
        solve(GRID22, [1, 5, 1, 1], audit)
        assert audit.solve_count == 1
        solve(GRID22, [1, 5, 1, 1], audit)
        assert audit.solve_count == 2

    def test_robust_documented_count(self):
        audit = OracleAudit()
        c = np.array([1.0, 5.0, 1.0, 1.0])
        u = UncertaintyParams(rho=0.5, gamma=1.0)
        robust_solve(GRID22, c, u, audit)
        thresholds = {0.0} | {0.5 * abs(x) for x in c}
        assert audit.solve_count == len(thresholds)

    def test_rho_zero_single_solve(self):
        audit = OracleAudit()
        robust_solve(GRID22, [1, 2, 3, 4], UncertaintyParams(0.0, 1.0), audit)
        assert audit.solve_count == 1

    def test_tsp_topk_counts_one(self):
        inst = DenseTSP(5)
        audit = OracleAudit()
        top_k_solve(inst, np.arange(float(inst.n)), 3, audit)
        assert audit.solve_count == 1


class TestTieDeterminism:
    def test_repeated_and_fresh_instances_agree(self):
        c = np.ones(GridShortestPath(3, 3).n)
        results = {bits(solve(GridShortestPath(3, 3), c)) for _ in range(5)}
        assert len(results) == 1
        assert results.pop() == bf.best_decision(bf.grid_paths(3, 3), c)

    def test_all_ones_grid_lex(self):
        inst = GridShortestPath(3, 3)
        got = bits(solve(inst, np.ones(inst.n)))
        # lex-best support walks the top row then the last column
        expected = bf.best_decision(bf.grid_paths(3, 3), np.ones(inst.n))
        assert got == expected
