import numpy as np
import pytest

from botnet_mfg import (
    AssumptionViolation,
    ModelParams,
    StrategyCase,
    kappa_of,
    kappa_thresholds,
    kinetic_rhs,
    solve_case,
    solve_mfg,
    sweep_kappa,
)
from botnet_mfg.equilibrium import (
    SWEEP_CSV_HEADER,
    kappa_increasing,
    sweep_to_csv,
)
from botnet_mfg.validation import random_params

CASE_I = StrategyCase.PREFER_UNPROTECTED
CASE_III = StrategyCase.DEFEND_SUSCEPTIBLE


def regime_one_params(lam=2000.0):
    """kappa(z) increasing, so the case-i threshold exceeds the case-iii one:
    a gap with no equilibrium opens between them."""
    return ModelParams(
        q_rec_D=1.0, q_rec_U=1.0, q_inf_D=0.5, q_inf_U=1.0,
        beta_UU=4.0, beta_UD=0.5, beta_DU=4.0, beta_DD=0.5,
        lam=lam, v_H=1.0, k_D=0.5, k_I=1.0)


def regime_two_params(lam=2000.0):
    """kappa(z) decreasing: both equilibria coexist between the thresholds."""
    return ModelParams(
        q_rec_D=1.0, q_rec_U=1.0, q_inf_D=0.3, q_inf_U=2.0,
        beta_UU=3.0, beta_UD=3.0, beta_DU=3.0, beta_DD=3.0,
        lam=lam, v_H=1.0, k_D=0.5, k_I=1.0)


class TestSolveMfg:
    def test_consistency_of_every_equilibrium(self, rng):
        for _ in range(100):
            params = random_params(rng, lam=1000.0)
            for eq in solve_mfg(params):
                sol = solve_case(params, eq.x, eq.case)
                assert sol.valid
                assert sol.control == eq.control
                rhs = kinetic_rhs(params, eq.x, eq.control)
                assert float(np.max(np.abs(rhs))) <= 1e-9

    def test_count_and_stability_bounds_at_large_lambda(self, rng):
        for _ in range(200):
            params = random_params(rng, lam=1000.0)
            eqs = solve_mfg(params)
            assert len(eqs) <= 4
            by_case = [e.case for e in eqs]
            assert len(by_case) == len(set(by_case))
            assert all(e.stable for e in eqs)

    def test_sorted_by_mu_with_efficiency_on_argmin(self, rng):
        for _ in range(200):
            params = random_params(rng, lam=1000.0)
            eqs = solve_mfg(params)
            mus = [e.mu for e in eqs]
            assert mus == sorted(mus)
            if eqs:
                mu_min = mus[0]
                for e in eqs:
                    assert e.efficient == (e.mu <= mu_min + 1e-12 * max(1.0, abs(mu_min)))

    def test_unique_case_i_above_threshold(self):
        params = regime_one_params()
        report = kappa_thresholds(params)
        eqs = solve_mfg(params.with_kappa(report.kappa_star + 0.05))
        assert [e.case for e in eqs] == [CASE_I]

    def test_gap_between_thresholds_in_regime_one(self):
        params = regime_one_params()
        report = kappa_thresholds(params)
        mid = 0.5 * (report.kappa_bar_star + report.kappa_star)
        assert solve_mfg(params.with_kappa(mid)) == []

    def test_two_stable_equilibria_in_regime_two(self):
        params = regime_two_params()
        report = kappa_thresholds(params)
        assert report.kappa_star < report.kappa_bar_star
        mid = 0.5 * (report.kappa_star + report.kappa_bar_star)
        eqs = solve_mfg(params.with_kappa(mid))
        assert sorted(e.case.label for e in eqs) == ["i", "iii"]
        assert all(e.stable for e in eqs)


class TestKappaFunction:
    def test_direct_substitution(self):
        params = ModelParams(
            q_rec_D=1.0, q_rec_U=1.0, q_inf_D=0.5, q_inf_U=1.0,
            beta_UU=2.0, beta_UD=1.0, beta_DU=2.0, beta_DD=1.0,
            lam=10.0, v_H=1.0, k_D=0.5, k_I=1.0)
        assert kappa_of(params, 0.5) == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_requires_equal_recovery(self, base_params):
        assert not base_params.has_equal_recovery_rates
        with pytest.raises(AssumptionViolation):
            kappa_of(base_params, 0.5)

    def test_monotonicity_condition(self, rng):
        for _ in range(300):
            params = random_params(rng, equal_recovery=True)
            zs = np.linspace(0.0, 1.0, 11)
            vals = [kappa_of(params, z) for z in zs]
            diffs = np.diff(vals)
            if kappa_increasing(params):
                assert np.all(diffs >= -1e-12)
            else:
                assert np.all(diffs <= 1e-12)


class TestThresholds:
    def test_star_ordering_tracks_root_ordering(self, rng):
        # with kappa(z) increasing, the larger infected fraction gives the
        # larger threshold
        for _ in range(300):
            params = random_params(rng, equal_recovery=True)
            report = kappa_thresholds(params)
            if abs(report.x_star_UI - report.x_bar_star_UI) < 1e-9:
                continue
            bigger_root = report.x_star_UI > report.x_bar_star_UI
            if report.kappa_z_increasing:
                assert (report.kappa_star > report.kappa_bar_star) == bigger_root
            else:
                assert (report.kappa_star < report.kappa_bar_star) == bigger_root

    def test_star_values_equal_generic_thresholds_under_equal_recovery(self):
        report = kappa_thresholds(regime_one_params())
        assert report.kappa_star == pytest.approx(report.kappa_1, abs=1e-14)
        assert report.kappa_bar_star == pytest.approx(report.kappa_4, abs=1e-14)

    def test_kappa23_degenerate_under_simplifying_assumptions(self, rng):
        # target-only contact rates plus equal recovery collapse the case-ii
        # and asymptotic case-iii abscissas, so the two gap thresholds match
        for _ in range(100):
            b_D, b_U = sorted(rng.uniform(0.1, 4.0, size=2))
            q = float(rng.uniform(0.1, 3.0))
            inf_D, inf_U = sorted(rng.uniform(0.1, 3.0, size=2))
            params = ModelParams(
                q_rec_D=q, q_rec_U=q, q_inf_D=inf_D, q_inf_U=inf_U,
                beta_UU=b_U, beta_UD=b_D, beta_DU=b_U, beta_DD=b_D,
                lam=100.0, v_H=1.0, k_D=0.5, k_I=1.0)
            report = kappa_thresholds(params)
            assert report.x_star_DI == pytest.approx(report.x_bar_star_UI, abs=1e-12)
            assert report.kappa_2 == pytest.approx(report.kappa_3, abs=1e-12)

    def test_unequal_recovery_reports_generic_numbers_only(self, base_params):
        report = kappa_thresholds(base_params)
        assert report.kappa_star is None
        assert report.kappa_bar_star is None
        assert np.isfinite([report.kappa_1, report.kappa_2,
                            report.kappa_3, report.kappa_4]).all()


def _bands(rows):
    """Contiguous equilibrium-count blocks, skipping near-threshold rows."""
    clean = [r for r in rows if not r.near_bifurcation]
    blocks = []
    for row in clean:
        if not blocks or blocks[-1][0] != row.count:
            blocks.append((row.count, row.kappa, row.kappa))
        else:
            blocks[-1] = (row.count, blocks[-1][1], row.kappa)
    return blocks


class TestSweep:
    def test_rejects_bad_grid(self, base_params):
        with pytest.raises(ValueError):
            sweep_kappa(base_params, 0.5, 0.4, 10)
        with pytest.raises(ValueError):
            sweep_kappa(base_params, 0.0, 1.0, 1)

    def test_regime_one_band_pattern(self):
        params = regime_one_params()
        report = kappa_thresholds(params)
        rows = sweep_kappa(params, 0.45, 0.72, 200)
        assert [b[0] for b in _bands(rows)] == [1, 0, 1]
        window = 10.0 / params.lam
        edges = _edges(rows)
        assert min(abs(e - report.kappa_bar_star) for e in edges) <= window
        assert min(abs(e - report.kappa_star) for e in edges) <= window

    def test_regime_two_band_pattern(self):
        params = regime_two_params()
        report = kappa_thresholds(params)
        rows = sweep_kappa(params, 0.25, 0.40, 200)
        assert [b[0] for b in _bands(rows)] == [1, 2, 1]
        window = 10.0 / params.lam
        edges = _edges(rows)
        assert min(abs(e - report.kappa_star) for e in edges) <= window
        assert min(abs(e - report.kappa_bar_star) for e in edges) <= window

    def test_csv_header_and_shape(self):
        params = regime_one_params(lam=500.0)
        rows = sweep_kappa(params, 0.4, 0.7, 12)
        text = sweep_to_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == SWEEP_CSV_HEADER
        assert len(lines) == 13
        empty_ok = all(len(line.split(",")) == 7 for line in lines[1:])
        assert empty_ok


def _edges(rows):
    edges = []
    for a, b in zip(rows, rows[1:]):
        if a.count != b.count:
            edges.append(0.5 * (a.kappa + b.kappa))
    return edges
