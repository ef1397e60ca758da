from dataclasses import replace

import numpy as np
import pytest

from botnet_mfg import (
    Domain,
    ModelParams,
    StateDist,
    StrategyCase,
    alpha_beta,
    classify_domain,
    enumerate_hjb,
    large_lambda_classify,
    oracle_enumerate,
    solve_case,
)
from botnet_mfg.hjb import (
    bellman_residual,
    case_thresholds,
    control_attains_min,
)
from botnet_mfg.validation import _oracle_matches, random_params, random_state

CASE_I = StrategyCase.PREFER_UNPROTECTED
CASE_II = StrategyCase.PREFER_DEFENDED
CASE_III = StrategyCase.DEFEND_SUSCEPTIBLE
CASE_IV = StrategyCase.DEFEND_INFECTED


class TestSolveCase:
    def test_zero_costs_give_zero_values(self, base_params, interior_state):
        params = replace(base_params, k_D=0.0, k_I=1e-300)
        sol = solve_case(params, interior_state, CASE_I)
        assert sol.mu == pytest.approx(0.0, abs=1e-290)
        assert np.allclose(sol.g_array(), 0.0, atol=1e-290)

    def test_case_i_average_cost_formula(self):
        # mu = beta*k_I/(beta + q_rec_U); beta = 1 and q_rec_U = 1 give 1/2
        params = ModelParams(
            q_rec_D=1.0, q_rec_U=1.0, q_inf_D=0.5, q_inf_U=1.0,
            beta_UU=0.0, beta_UD=0.0, beta_DU=0.0, beta_DD=0.0,
            lam=1.0, v_H=1.0, k_D=0.5, k_I=1.0)
        x = StateDist(0.1, 0.4, 0.2, 0.3)
        assert alpha_beta(params, x).beta == 1.0
        sol = solve_case(params, x, CASE_I)
        assert sol.mu == pytest.approx(0.5, abs=1e-14)

    def test_residual_and_min_attainment_on_random_draws(self, rng):
        for _ in range(500):
            params = random_params(rng)
            x = random_state(rng)
            for case in StrategyCase:
                sol = solve_case(params, x, case)
                if sol.valid:
                    tol = 1e-10 * max(1.0, abs(sol.mu))
                    assert bellman_residual(params, x, sol) <= tol
                    assert control_attains_min(sol)

    def test_renormalized_to_zero_minimum(self, rng):
        for _ in range(200):
            params = random_params(rng)
            x = random_state(rng)
            for case in StrategyCase:
                sol = solve_case(params, x, case)
                assert min(sol.g_array()) == pytest.approx(0.0, abs=1e-15)

    def test_slacks_match_threshold_inequalities(self, rng):
        # the g-difference margins carry the sign of the kappa-band tests
        for _ in range(300):
            params = random_params(rng)
            x = random_state(rng)
            th = case_thresholds(params, x)
            kD, kI = params.k_D, params.k_I
            signs = {
                CASE_I: (kD * th["Q"] - kI * th["A"], kD * th["Q"] - kI * th["B"]),
                CASE_II: (kI * th["A"] - kD * th["P"], kI * th["B"] - kD * th["P"]),
                CASE_III: (kD * th["P"] - kI * th["A"], kI * th["B"] - kD * th["Q"]),
                CASE_IV: (kI * th["A"] - kD * th["Q"], kD * th["P"] - kI * th["B"]),
            }
            for case, (m1, m2) in signs.items():
                sol = solve_case(params, x, case)
                for slack, margin in ((sol.slack1, m1), (sol.slack2, m2)):
                    if abs(margin) > 1e-9:
                        assert slack * margin > 0.0, (case, slack, margin)


class TestEnumerate:
    def test_equal_recovery_unique_in_d1(self, rng):
        for _ in range(500):
            params = random_params(rng, equal_recovery=True)
            x = random_state(rng)
            if classify_domain(params, x).domain is not Domain.D1:
                continue
            sols = enumerate_hjb(params, x)
            if any(s.degenerate for s in sols):
                continue
            assert len(sols) == 1

    def test_band_interior_gives_case_iii(self, equal_recovery_params):
        x = StateDist(0.1, 0.4, 0.2, 0.3)
        th = case_thresholds(equal_recovery_params, x)
        lo, hi = th["A"] / th["P"], th["B"] / th["Q"]
        assert lo < hi
        params = equal_recovery_params.with_kappa(0.5 * (lo + hi))
        sols = enumerate_hjb(params, x)
        assert [s.case for s in sols] == [CASE_III]

    def test_above_band_gives_case_i(self, equal_recovery_params):
        x = StateDist(0.1, 0.4, 0.2, 0.3)
        th = case_thresholds(equal_recovery_params, x)
        params = equal_recovery_params.with_kappa(th["B"] / th["Q"] * 1.05)
        sols = enumerate_hjb(params, x)
        assert [s.case for s in sols] == [CASE_I]

    def test_acyclic_cases_never_strictly_coexist(self, rng):
        """The aggressive search behind the two-solution question.

        The case-i and case-ii regions are kappa >= max(A,B)/Q and
        kappa <= min(A,B)/P; they overlap only where B*P <= A*Q (in D1),
        and the identity

            B*P - A*Q = lam*(r - s)*((r*s - c) + lam*(alpha + q_rec_U)),
            r = beta + q_rec_U, s = alpha + q_rec_D,
            c = beta*q_rec_D - alpha*q_rec_U,

        makes that impossible off the degenerate boundary alpha =
        q_rec_U = 0, for any recovery gap.  So no parameter point yields
        two strictly valid solutions, and the two-at-most bound is loose.
        """
        for _ in range(2000):
            # unconstrained draws, including sign-structure violations
            vals = rng.uniform(0.0, 5.0, size=8)
            params = ModelParams(
                q_rec_D=vals[0], q_rec_U=vals[1], q_inf_D=vals[2], q_inf_U=vals[3],
                beta_UU=vals[4], beta_UD=vals[5], beta_DU=vals[6], beta_DD=vals[7],
                lam=float(rng.uniform(0.1, 100.0)), v_H=float(rng.uniform(0.0, 2.0)),
                k_D=float(rng.uniform(0.0, 3.0)), k_I=1.0)
            x = random_state(rng)
            alpha, beta = alpha_beta(params, x)
            th = case_thresholds(params, x)
            r, s = beta + params.q_rec_U, alpha + params.q_rec_D
            c = beta * params.q_rec_D - alpha * params.q_rec_U
            identity = params.lam * (r - s) * ((r * s - c) + params.lam * (alpha + params.q_rec_U))
            lhs = th["B"] * th["P"] - th["A"] * th["Q"]
            assert lhs == pytest.approx(identity, rel=1e-9, abs=1e-9)

            sol_i = solve_case(params, x, CASE_I)
            sol_ii = solve_case(params, x, CASE_II)
            assert not (
                min(sol_i.slack1, sol_i.slack2) > 1e-9
                and min(sol_ii.slack1, sol_ii.slack2) > 1e-9
            )

    def test_interior_exclusivity_of_adjacent_cases(self, rng):
        pairs = ((CASE_I, CASE_III), (CASE_I, CASE_IV),
                 (CASE_II, CASE_III), (CASE_II, CASE_IV))
        for _ in range(800):
            params = random_params(rng)
            x = random_state(rng)
            sols = {case: solve_case(params, x, case) for case in StrategyCase}
            for a, b in pairs:
                strict_a = min(sols[a].slack1, sols[a].slack2) > 1e-9
                strict_b = min(sols[b].slack1, sols[b].slack2) > 1e-9
                assert not (strict_a and strict_b)

    def test_domain_gating_implications(self, rng):
        for _ in range(800):
            params = random_params(rng)
            x = random_state(rng)
            sols = {case: solve_case(params, x, case) for case in StrategyCase}
            domain = classify_domain(params, x).domain

            def strict(case):
                return min(sols[case].slack1, sols[case].slack2) > 1e-9

            if strict(CASE_I) and strict(CASE_II):
                assert domain is Domain.D1
            if strict(CASE_III) and strict(CASE_IV):
                assert domain is Domain.D2

    def test_equal_recovery_band_ordering(self, rng):
        # A/P <= B/Q and B/P >= A/Q whenever beta > alpha and the recovery
        # rates coincide
        for _ in range(500):
            params = random_params(rng, equal_recovery=True)
            x = random_state(rng)
            alpha, beta = alpha_beta(params, x)
            if beta <= alpha:
                continue
            th = case_thresholds(params, x)
            assert th["A"] / th["P"] <= th["B"] / th["Q"] + 1e-12
            assert th["B"] / th["P"] >= th["A"] / th["Q"] - 1e-12


class TestOracle:
    def test_agreement_on_random_draws(self, rng):
        for _ in range(1000):
            params = random_params(rng)
            x = random_state(rng)
            assert _oracle_matches(params, x)

    def test_zero_costs_degenerate(self, base_params, interior_state):
        params = replace(base_params, k_D=0.0, k_I=1e-300)
        sols = oracle_enumerate(params, interior_state)
        assert len(sols) == 1
        assert sols[0].degenerate
        assert sols[0].mu == pytest.approx(0.0, abs=1e-290)
        assert np.allclose(sols[0].g_array(), 0.0, atol=1e-290)

    def test_count_bound(self, rng):
        for _ in range(500):
            params = random_params(rng)
            sols = oracle_enumerate(params, random_state(rng))
            assert len(sols) <= 2


class TestLargeLambda:
    def test_equal_recovery_above_gap_threshold_is_case_i(self, rng):
        for _ in range(200):
            params = random_params(rng, lam=1e4, equal_recovery=True)
            x = random_state(rng)
            alpha, beta = alpha_beta(params, x)
            if beta <= alpha:
                continue
            threshold = (beta - alpha) / (beta + params.q_rec_U)
            pred = large_lambda_classify(params, x, kappa=threshold * 1.2)
            assert pred.cases == frozenset({CASE_I})

    def test_prediction_matches_enumeration_at_large_lambda(self, rng):
        checked = 0
        for _ in range(1000):
            params = random_params(rng, lam=1e4)
            x = random_state(rng)
            pred = large_lambda_classify(params, x)
            margins = [abs(params.kappa - t) for t in pred.thresholds.values()]
            if min(margins) <= pred.window:
                continue
            checked += 1
            actual = {s.case for s in enumerate_hjb(params, x)}
            assert actual == set(pred.cases), (params, x.as_tuple())
        assert checked > 500

    def test_vacuous_two_solution_branches(self, rng):
        # the subdomain split never produces {i, ii} or {iii, iv} jointly:
        # those bands are empty for every admissible parameter draw
        for _ in range(500):
            params = random_params(rng, lam=1e4)
            x = random_state(rng)
            pred = large_lambda_classify(params, x)
            assert pred.cases != frozenset({CASE_I, CASE_II})
            assert pred.cases != frozenset({CASE_III, CASE_IV})
