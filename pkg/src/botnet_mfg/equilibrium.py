"""Stationary game equilibria: population states that are stationary under
a strategy which is itself individually optimal against that state.

An equilibrium pairs a fixed point of the kinetic dynamics (per case)
with a valid Bellman solution of the same case at that point.  The cost
ratio kappa = k_D/k_I is the bifurcation parameter: the case-i equilibrium
exists above a threshold kappa that depends on the case-i fixed point,
the case-iii equilibrium below a threshold at its own fixed point, and
so on.  This module synthesizes all equilibria, computes the thresholds,
and produces kappa-sweep tables for phase diagrams.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import fixedpoint as fp_mod
from . import hjb as hjb_mod
from .model import (
    ControlVector,
    ModelParams,
    StateDist,
    StrategyCase,
    alpha_beta,
    classify_domain,
)

CONSISTENCY_SLACK = -1e-9      # HJB validity slack accepted when pairing
EFFICIENCY_TIE_TOL = 1e-12
NEAR_BIFURCATION_FACTOR = 10.0  # tag sweep rows within this / lam of a threshold


class AssumptionViolation(ValueError):
    """A computation requiring equal recovery rates was asked without them."""


@dataclass(frozen=True)
class Equilibrium:
    """A consistent (state, control, values, cost) tuple with stability."""

    x: StateDist
    case: StrategyCase
    control: ControlVector
    hjb: hjb_mod.HjbSolution
    fixed_point: fp_mod.FixedPoint
    efficient: bool

    @property
    def mu(self) -> float:
        return self.hjb.mu

    @property
    def stable(self) -> bool:
        return self.fixed_point.stable

    @property
    def eigenvalues(self) -> tuple[complex, complex, complex]:
        return self.fixed_point.eigenvalues

    def to_record(self) -> dict:
        rec = {
            "case": self.case.label,
            "x_DI": self.x.x_DI, "x_DS": self.x.x_DS,
            "x_UI": self.x.x_UI, "x_US": self.x.x_US,
            "mu": self.mu,
            "g_DI": self.hjb.g_DI, "g_DS": self.hjb.g_DS,
            "g_UI": self.hjb.g_UI, "g_US": self.hjb.g_US,
        }
        for i, eig in enumerate(self.eigenvalues, start=1):
            rec[f"eig{i}_re"] = eig.real
            rec[f"eig{i}_im"] = eig.imag
        rec["stable"] = self.stable
        rec["efficient"] = self.efficient
        rec["degenerate"] = self.hjb.degenerate
        rec["slack1"] = self.hjb.slack1
        rec["slack2"] = self.hjb.slack2
        return rec


EQUILIBRIUM_CSV_FIELDS = (
    "case", "x_DI", "x_DS", "x_UI", "x_US", "mu",
    "g_DI", "g_DS", "g_UI", "g_US",
    "eig1_re", "eig1_im", "eig2_re", "eig2_im", "eig3_re", "eig3_im",
    "stable", "efficient", "degenerate", "slack1", "slack2",
)


def _case_fixed_points(params: ModelParams, case: StrategyCase) -> list[fp_mod.FixedPoint]:
    if case in (StrategyCase.PREFER_UNPROTECTED, StrategyCase.PREFER_DEFENDED):
        return [fp_mod.fixed_point_acyclic(params, case)]
    return fp_mod.fixed_point_mixed(params, case)


def solve_mfg(params: ModelParams) -> list[Equilibrium]:
    """All stationary equilibria, sorted by average cost.

    For each case, every stationary point of the dynamics is paired with
    the case's Bellman solution at that point; the pair survives when the
    solution is valid there.  An empty list is a legal outcome inside a
    bifurcation gap.
    """
    found: list[tuple[StateDist, StrategyCase, hjb_mod.HjbSolution, fp_mod.FixedPoint]] = []
    for case in StrategyCase:
        for fp in _case_fixed_points(params, case):
            try:
                sol = hjb_mod.solve_case(params, fp.x, case)
            except hjb_mod.DegenerateDenominator:
                continue
            if sol.valid and min(sol.slack1, sol.slack2) >= CONSISTENCY_SLACK:
                found.append((fp.x, case, sol, fp))

    if not found:
        return []
    mu_min = min(item[2].mu for item in found)
    tie = EFFICIENCY_TIE_TOL * max(1.0, abs(mu_min))
    out = [
        Equilibrium(x=x, case=case, control=sol.control, hjb=sol,
                    fixed_point=fp, efficient=sol.mu <= mu_min + tie)
        for (x, case, sol, fp) in found
    ]
    out.sort(key=lambda e: (e.mu, e.case.label))
    return out


def kappa_of(params: ModelParams, z: float) -> float:
    """Threshold cost ratio as a function of the infected fraction z.

    Defined for equal recovery rates:
        kappa(z) = ((q_inf_U - q_inf_D)*v_H + z*(beta_UU - beta_UD))
                   / (q_inf_U*v_H + z*beta_UU + q_rec)
    Increasing in z iff beta_UU*(q_inf_D*v_H + q) > beta_UD*(q_inf_U*v_H + q).
    """
    if not params.has_equal_recovery_rates:
        raise AssumptionViolation(
            "kappa(z) requires q_rec_D == q_rec_U; use the four generic thresholds")
    q = params.q_rec_U
    num = (params.q_inf_U - params.q_inf_D) * params.v_H + z * (params.beta_UU - params.beta_UD)
    den = params.q_inf_U * params.v_H + z * params.beta_UU + q
    return num / den


def kappa_increasing(params: ModelParams) -> bool:
    return (params.beta_UU * (params.q_inf_D * params.v_H + params.q_rec_U)
            > params.beta_UD * (params.q_inf_U * params.v_H + params.q_rec_U))


@dataclass(frozen=True)
class BifurcationReport:
    """Bifurcation thresholds in kappa and the data behind them.

    kappa_star / kappa_bar_star are defined only under equal recovery
    rates (they are then kappa(z) at the case-i and asymptotic case-iii
    infected fractions).  kappa_1..kappa_4 are the generic large-lam
    thresholds: (beta-alpha)/(beta+q_rec_U) at the case-i and case-iii
    points, delta/(alpha+q_rec_D) at the case-ii and case-iii points.
    """

    kappa_star: float | None
    kappa_bar_star: float | None
    kappa_1: float
    kappa_2: float
    kappa_3: float
    kappa_4: float
    x_star_UI: float
    x_star_DI: float
    x_bar_star_UI: float
    domains: dict[str, str]
    kappa_z_increasing: bool

    def thresholds(self) -> list[float]:
        vals = [self.kappa_1, self.kappa_2, self.kappa_3, self.kappa_4]
        if self.kappa_star is not None:
            vals += [self.kappa_star, self.kappa_bar_star]
        out: list[float] = []
        for v in vals:
            if v is not None and np.isfinite(v) and not any(abs(v - w) <= 1e-12 for w in out):
                out.append(float(v))
        return sorted(out)

    def to_record(self) -> dict:
        return {
            "kappa_star": self.kappa_star,
            "kappa_bar_star": self.kappa_bar_star,
            "kappa_1": self.kappa_1,
            "kappa_2": self.kappa_2,
            "kappa_3": self.kappa_3,
            "kappa_4": self.kappa_4,
            "x_star_UI": self.x_star_UI,
            "x_star_DI": self.x_star_DI,
            "x_bar_star_UI": self.x_bar_star_UI,
            "domains": self.domains,
            "kappa_z_increasing": self.kappa_z_increasing,
        }


def _threshold_pair(params: ModelParams, x: StateDist) -> tuple[float, float]:
    """((beta-alpha)/(beta+q_rec_U), delta/(alpha+q_rec_D)) at a state."""
    alpha, beta = alpha_beta(params, x)
    return ((beta - alpha) / (beta + params.q_rec_U),
            params.delta / (alpha + params.q_rec_D))


def kappa_thresholds(params: ModelParams) -> BifurcationReport:
    """Bifurcation thresholds from the three closed-form fixed points."""
    fp_i = fp_mod.fixed_point_acyclic(params, StrategyCase.PREFER_UNPROTECTED)
    fp_ii = fp_mod.fixed_point_acyclic(params, StrategyCase.PREFER_DEFENDED)
    fp_iii = fp_mod.fixed_point_mixed_asymptotic(params, StrategyCase.DEFEND_SUSCEPTIBLE)

    x_star_UI = fp_i.x.x_UI
    x_star_DI = fp_ii.x.x_DI
    x_bar_star_UI = fp_iii.x.x_UI

    kappa_1, _ = _threshold_pair(params, fp_i.x)
    _, kappa_2 = _threshold_pair(params, fp_ii.x)
    kappa_4, kappa_3 = _threshold_pair(params, fp_iii.x)

    if params.has_equal_recovery_rates:
        kappa_star: float | None = kappa_of(params, x_star_UI)
        kappa_bar_star: float | None = kappa_of(params, x_bar_star_UI)
    else:
        kappa_star = None
        kappa_bar_star = None

    domains = {
        "x_star_UI": classify_domain(params, fp_i.x).domain.value,
        "x_star_DI": classify_domain(params, fp_ii.x).domain.value,
        "x_bar_star_UI": classify_domain(params, fp_iii.x).domain.value,
    }
    return BifurcationReport(
        kappa_star=kappa_star,
        kappa_bar_star=kappa_bar_star,
        kappa_1=kappa_1, kappa_2=kappa_2, kappa_3=kappa_3, kappa_4=kappa_4,
        x_star_UI=x_star_UI, x_star_DI=x_star_DI, x_bar_star_UI=x_bar_star_UI,
        domains=domains,
        kappa_z_increasing=kappa_increasing(params),
    )


@dataclass(frozen=True)
class SweepRow:
    kappa: float
    count: int
    cases: tuple[str, ...]
    mu_values: tuple[float, ...]
    stable: tuple[bool, ...]
    near_bifurcation: bool

    def to_record(self) -> dict:
        return {
            "kappa": self.kappa,
            "count": self.count,
            "cases": list(self.cases),
            "mu_values": list(self.mu_values),
            "stable": list(self.stable),
            "near_bifurcation": self.near_bifurcation,
        }


SWEEP_CSV_HEADER = "kappa,count,cases,mu_min,mu_all,stable_all,near_bifurcation"


def sweep_kappa(params: ModelParams, kappa_min: float, kappa_max: float,
                steps: int) -> list[SweepRow]:
    """Equilibrium structure along a kappa grid, k_I held fixed.

    Rows whose kappa lies within 10/lam of any computed threshold are
    tagged near_bifurcation; the large-lam case classification is only
    trustworthy outside such windows.
    """
    if not (0.0 <= kappa_min < kappa_max):
        raise ValueError("need 0 <= kappa_min < kappa_max")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    thresholds = kappa_thresholds(params).thresholds()
    window = NEAR_BIFURCATION_FACTOR / params.lam
    rows = []
    for kappa in np.linspace(kappa_min, kappa_max, steps):
        kappa = float(kappa)
        eqs = solve_mfg(params.with_kappa(kappa))
        near = any(abs(kappa - t) <= window for t in thresholds)
        rows.append(SweepRow(
            kappa=kappa,
            count=len(eqs),
            cases=tuple(e.case.label for e in eqs),
            mu_values=tuple(e.mu for e in eqs),
            stable=tuple(e.stable for e in eqs),
            near_bifurcation=near,
        ))
    return rows


def sweep_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_CSV_HEADER.split(","))
    for row in rows:
        mu_min = repr(min(row.mu_values)) if row.mu_values else ""
        writer.writerow([
            repr(row.kappa),
            str(row.count),
            "+".join(row.cases),
            mu_min,
            ";".join(repr(m) for m in row.mu_values),
            ";".join("true" if s else "false" for s in row.stable),
            "true" if row.near_bifurcation else "false",
        ])
    return buf.getvalue()
