import math
import numpy as np
import pytest

from botnet_mfg import (
    ModelParams,
    StrategyCase,
    fixed_point_acyclic,
    fixed_point_mixed,
    fixed_point_mixed_asymptotic,
    kinetic_rhs,
    stability,
)
from botnet_mfg.fixedpoint import (
    bracket_roots,
    endemic_root,
    fixed_point_residual,
    mixed_quartic_coeffs,
    reconstruct_mixed_state,
    reduced_jacobian,
)
from botnet_mfg.validation import random_params

CASE_I = StrategyCase.PREFER_UNPROTECTED
CASE_II = StrategyCase.PREFER_DEFENDED
CASE_III = StrategyCase.DEFEND_SUSCEPTIBLE
CASE_IV = StrategyCase.DEFEND_INFECTED

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _mk(lam=10.0, **kw):
    base = dict(q_rec_D=1.0, q_rec_U=1.0, q_inf_D=0.5, q_inf_U=1.0,
                beta_UU=2.0, beta_UD=1.0, beta_DU=2.0, beta_DD=1.0,
                lam=lam, v_H=1.0, k_D=0.5, k_I=1.0)
    base.update(kw)
    return ModelParams(**base)


class TestEndemicRoot:
    def test_golden_ratio_case(self):
        root, interior = endemic_root(1.0, 1.0, 1.0)
        assert interior
        assert root == pytest.approx(GOLDEN, abs=1e-12)

    def test_sis_limit_without_direct_pressure(self):
        root, interior = endemic_root(2.0, 1.0, 0.0)
        assert interior
        assert root == pytest.approx(0.5, abs=1e-15)

    def test_subcritical_returns_disease_free(self):
        root, interior = endemic_root(1.0, 2.0, 0.0)
        assert root == 0.0 and not interior

    def test_zero_contact_linear_fallback(self):
        root, interior = endemic_root(0.0, 1.0, 1.0)
        assert interior
        assert root == pytest.approx(0.5)

    def test_root_is_interior_with_positive_pressure(self, rng):
        for _ in range(10_000):
            b, q, p = rng.uniform(0.0, 5.0, size=3)
            p = max(p, 1e-6)
            root, interior = endemic_root(float(b), float(q), float(p))
            assert interior
            assert 0.0 < root < 1.0
            if b > 0.0:
                poly = b * root * root + root * (q - b + p) - p
                assert abs(poly) <= 1e-12 * max(1.0, b, q, p)


class TestAcyclic:
    def test_golden_ratio_fixed_point(self):
        params = _mk(beta_UU=1.0, q_inf_U=1.0, q_rec_U=1.0)
        fp = fixed_point_acyclic(params, CASE_I)
        assert fp.x.x_UI == pytest.approx(GOLDEN, abs=1e-12)
        assert fp.x.x_DI == 0.0 and fp.x.x_DS == 0.0

    def test_no_attacker_supercritical(self):
        params = _mk(v_H=0.0, beta_UU=2.0, q_rec_U=1.0)
        fp = fixed_point_acyclic(params, CASE_I)
        assert fp.interior
        assert fp.x.x_UI == pytest.approx(0.5, abs=1e-15)

    def test_no_attacker_subcritical_flags_boundary(self):
        params = _mk(v_H=0.0, beta_UU=1.0, q_rec_U=2.0)
        fp = fixed_point_acyclic(params, CASE_I)
        assert not fp.interior
        assert fp.x.as_tuple() == (0.0, 0.0, 0.0, 1.0)
        assert fixed_point_residual(params, fp) == 0.0

    def test_case_i_eigenvalues_closed_form(self, rng):
        # xi_3 = -lam exactly; xi_2 = -lam - (q_rec_D + alpha at the point);
        # xi_1 is the slope of the surviving epidemic balance
        for _ in range(500):
            params = random_params(rng)
            fp = fixed_point_acyclic(params, CASE_I)
            xs = fp.x.x_UI
            expected = sorted([
                (1.0 - 2.0 * xs) * params.beta_UU - params.q_inf_U * params.v_H - params.q_rec_U,
                -params.lam - (params.q_rec_D + params.q_inf_D * params.v_H + xs * params.beta_UD),
                -params.lam,
            ])
            got = sorted(e.real for e in fp.eigenvalues)
            assert any(e == -params.lam for e in got)
            for a, b in zip(got, expected):
                assert a == pytest.approx(b, abs=1e-9 * max(1.0, abs(b)))
            assert all(abs(e.imag) == 0.0 for e in fp.eigenvalues)

    def test_closed_form_matches_numeric_spectrum(self, rng):
        # the reduced-Jacobian spectrum agrees with the closed forms
        for _ in range(200):
            params = random_params(rng, lam=float(rng.uniform(0.5, 50.0)))
            fp = fixed_point_acyclic(params, CASE_I)
            red = reduced_jacobian(params, fp.x, CASE_I.control, 3)
            numeric = sorted(np.linalg.eigvals(red).real)
            closed = sorted(e.real for e in fp.eigenvalues)
            for a, b in zip(numeric, closed):
                assert a == pytest.approx(b, rel=1e-8, abs=1e-8)

    def test_acyclic_always_stable(self, rng):
        for _ in range(2000):
            params = random_params(rng)
            for case in (CASE_I, CASE_II):
                assert fixed_point_acyclic(params, case).stable

    def test_stability_criterion_holds_for_closed_form_root(self, rng):
        # 2*x > 1 - (q_rec_U + q_inf_U*v_H)/beta_UU automatically
        for _ in range(10_000):
            params = random_params(rng)
            fp = fixed_point_acyclic(params, CASE_I)
            lhs = 2.0 * fp.x.x_UI
            rhs = 1.0 - (params.q_rec_U + params.q_inf_U * params.v_H) / params.beta_UU
            assert lhs > rhs


class TestMixed:
    def test_residuals_below_tolerance(self, rng):
        for _ in range(300):
            params = random_params(rng)
            for case in (CASE_III, CASE_IV):
                for fp in fixed_point_mixed(params, case):
                    assert fixed_point_residual(params, fp) <= 1e-9

    def test_quartic_degree_and_root_consistency(self, base_params):
        coeffs = mixed_quartic_coeffs(base_params)
        assert len(coeffs) == 5
        roots = bracket_roots(coeffs)
        assert roots
        for y in roots:
            x = reconstruct_mixed_state(base_params, y)
            rhs = kinetic_rhs(base_params, x, CASE_III.control)
            assert float(np.max(np.abs(rhs))) <= 1e-8

    def test_unique_point_at_large_lambda(self, rng):
        for _ in range(200):
            params = random_params(rng, lam=1000.0)
            for case in (CASE_III, CASE_IV):
                points = fixed_point_mixed(params, case)
                assert len(points) == 1
                assert points[0].stable

    def test_switch_symmetry_on_symmetric_parameters(self):
        params = _mk(q_rec_D=1.0, q_rec_U=1.0, q_inf_D=0.8, q_inf_U=0.8,
                     beta_UU=1.5, beta_UD=0.9, beta_DU=0.9, beta_DD=1.5)
        pts_iii = fixed_point_mixed(params, CASE_III)
        pts_iv = fixed_point_mixed(params, CASE_IV)
        assert len(pts_iii) == len(pts_iv)
        for a, b in zip(pts_iii, pts_iv):
            assert a.x.x_DI == pytest.approx(b.x.x_UI, abs=1e-10)
            assert a.x.x_DS == pytest.approx(b.x.x_US, abs=1e-10)

    def test_small_mass_scaling_at_large_lambda(self):
        params = _mk(lam=1000.0, q_rec_D=1.3, q_rec_U=0.9, q_inf_D=0.4)
        fp = fixed_point_mixed(params, CASE_III)[0]
        asym = fixed_point_mixed_asymptotic(params, CASE_III)
        assert abs(fp.x.x_UI - asym.x.x_UI) <= 5.0 / params.lam
        # the defended-infected sliver scales like x_UI * q_rec_U / lam
        assert fp.x.x_DI == pytest.approx(
            fp.x.x_UI * params.q_rec_U / params.lam, rel=20.0 / params.lam)


class TestAsymptotic:
    def test_golden_ratio(self):
        params = _mk(beta_UD=1.0, q_rec_U=1.0, q_inf_D=1.0)
        fp = fixed_point_mixed_asymptotic(params, CASE_III)
        assert fp.x.x_UI == pytest.approx(GOLDEN, abs=1e-12)
        assert fp.x.as_tuple()[0] == 0.0 and fp.x.as_tuple()[3] == 0.0

    def test_matches_case_ii_root_under_simplifying_assumptions(self, rng):
        # with target-only contact rates and equal recovery, the asymptotic
        # case-iii abscissa solves the same quadratic as the case-ii point
        for _ in range(200):
            b_D, b_U = sorted(rng.uniform(0.1, 4.0, size=2))
            q = float(rng.uniform(0.1, 3.0))
            inf_D, inf_U = sorted(rng.uniform(0.1, 3.0, size=2))
            params = ModelParams(
                q_rec_D=q, q_rec_U=q, q_inf_D=inf_D, q_inf_U=inf_U,
                beta_UU=b_U, beta_UD=b_D, beta_DU=b_U, beta_DD=b_D,
                lam=50.0, v_H=1.0, k_D=0.5, k_I=1.0)
            fp_iii = fixed_point_mixed_asymptotic(params, CASE_III)
            fp_ii = fixed_point_acyclic(params, CASE_II)
            assert fp_iii.x.x_UI == pytest.approx(fp_ii.x.x_DI, abs=1e-12)

    def test_convergence_rate_in_lambda(self, rng):
        # the quartic point approaches the asymptotic one like 1/lam
        lams = (10.0, 100.0, 1000.0, 10_000.0)
        for case in (CASE_III, CASE_IV):
            gaps = []
            for lam in lams:
                draws = []
                sub = np.random.default_rng(99)
                for _ in range(20):
                    params = random_params(sub, lam=lam, hi=2.0)
                    asym = fixed_point_mixed_asymptotic(params, case)
                    pts = fixed_point_mixed(params, case)
                    assert pts
                    dist = min(
                        float(np.max(np.abs(fp.x.as_array() - asym.x.as_array())))
                        for fp in pts)
                    draws.append(dist)
                gaps.append(np.mean(draws))
            slope = np.polyfit(np.log(lams), np.log(gaps), 1)[0]
            assert -1.2 <= slope <= -0.8, (case, slope, gaps)


class TestStabilityFunction:
    def test_mixed_large_lambda_stable(self, rng):
        for _ in range(100):
            params = random_params(rng, lam=2000.0)
            for case in (CASE_III, CASE_IV):
                for fp in fixed_point_mixed(params, case):
                    assert fp.stable

    def test_refill_is_idempotent(self, base_params):
        fp = fixed_point_acyclic(base_params, CASE_I)
        again = stability(base_params, fp)
        assert again.eigenvalues == fp.eigenvalues
        assert again.stable == fp.stable
