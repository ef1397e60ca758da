"""Closed-form solutions of the stationary ergodic Bellman system.

For a frozen population state x, a rational owner solves the four-line
average-cost optimality system (relative values g on the four states,
average cost mu per unit time):

    lam*min(g_UI - g_DI, 0) + q_rec_D*(g_DS - g_DI) + k_I + k_D = mu
    lam*min(g_US - g_DS, 0) + alpha*(g_DI - g_DS)   + k_D       = mu
    lam*min(g_DI - g_UI, 0) + q_rec_U*(g_US - g_UI) + k_I       = mu
    lam*min(g_DS - g_US, 0) + beta*(g_UI - g_US)                = mu

Picking the negative branch of a min corresponds to requesting a toggle
(u = 1).  Only the four strategy cases are self-consistent; each admits a
closed-form (g, mu) and a pair of inequality margins ("slacks") deciding
whether the case's control actually attains every minimum.

Writing A = (beta+lam)*q_rec_D - (alpha+lam)*q_rec_U,
        B = beta*(lam+q_rec_D) - alpha*(lam+q_rec_U),
        P = (alpha+q_rec_D)*(beta+q_rec_U+lam),
        Q = (alpha+q_rec_D+lam)*(beta+q_rec_U),
the validity regions in the cost ratio kappa = k_D/k_I are

    case i   : kappa*Q >= A  and  kappa*Q >= B
    case ii  : kappa*P <= A  and  kappa*P <= B
    case iii : kappa*P >= A  and  kappa*Q <= B
    case iv  : kappa*Q <= A  and  kappa*P >= B

B - A = lam*((beta+q_rec_U) - (alpha+q_rec_D)), so ordering of A and B is
decided by the domain D1/D2 of x.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .model import (
    CASE_CONTROLS,
    ControlVector,
    Domain,
    ModelParams,
    StateDist,
    StrategyCase,
    alpha_beta,
    classify_domain,
)

# a slack inside [-DEGENERATE_SLACK, DEGENERATE_SLACK] marks a solution
# valid-but-degenerate rather than excluding it; bifurcation scans hit
# case boundaries exactly.
DEGENERATE_SLACK = 1e-9
# closed-form denominators at or below this are treated as removable
# singularities of the formulas
DENOMINATOR_FLOOR = 1e-14
RESIDUAL_SCALE = 1e-10


class DegenerateDenominator(ArithmeticError):
    """A closed-form denominator vanished (degenerate rates or state)."""


class SingularSystem(np.linalg.LinAlgError):
    """The fixed-control linear system is rank-deficient."""


@dataclass(frozen=True)
class HjbSolution:
    """One candidate solution of the optimality system.

    g is renormalized so min(g) = 0 (relative values are defined up to an
    additive constant).  ``slack1``/``slack2`` are the signed margins of
    the case's two validity inequalities, measured as differences of g
    values; the case is ``valid`` when both are >= -1e-9 and
    ``degenerate`` when either sits within 1e-9 of zero.
    """

    case: StrategyCase | None
    g_DI: float
    g_DS: float
    g_UI: float
    g_US: float
    mu: float
    valid: bool
    degenerate: bool
    slack1: float
    slack2: float
    control: ControlVector

    @property
    def g(self) -> dict[str, float]:
        return {"DI": self.g_DI, "DS": self.g_DS, "UI": self.g_UI, "US": self.g_US}

    def g_array(self) -> np.ndarray:
        return np.array([self.g_DI, self.g_DS, self.g_UI, self.g_US])

    def to_record(self) -> dict:
        return {
            "case": self.case.label if self.case is not None else None,
            "mu": self.mu,
            "g_DI": self.g_DI,
            "g_DS": self.g_DS,
            "g_UI": self.g_UI,
            "g_US": self.g_US,
            "valid": self.valid,
            "degenerate": self.degenerate,
            "slack1": self.slack1,
            "slack2": self.slack2,
        }


CSV_FIELDS = ("case", "mu", "g_DI", "g_DS", "g_UI", "g_US",
              "valid", "degenerate", "slack1", "slack2")


def _check_denominator(value: float, what: str) -> float:
    if abs(value) <= DENOMINATOR_FLOOR:
        raise DegenerateDenominator(f"{what} = {value} is numerically zero")
    return value


def _finish(case: StrategyCase, g: dict[str, float], mu: float,
            slack1: float, slack2: float) -> HjbSolution:
    shift = min(g.values())
    valid = slack1 >= -DEGENERATE_SLACK and slack2 >= -DEGENERATE_SLACK
    degenerate = abs(slack1) <= DEGENERATE_SLACK or abs(slack2) <= DEGENERATE_SLACK
    return HjbSolution(
        case=case,
        g_DI=g["DI"] - shift, g_DS=g["DS"] - shift,
        g_UI=g["UI"] - shift, g_US=g["US"] - shift,
        mu=mu, valid=valid, degenerate=degenerate,
        slack1=slack1, slack2=slack2,
        control=CASE_CONTROLS[case],
    )


def solve_case(params: ModelParams, x: StateDist, case: StrategyCase) -> HjbSolution:
    """Closed-form (g, mu) for one strategy case at a frozen state x.

    The returned solution always satisfies the fixed-control linear system;
    ``valid`` reports whether the case's control attains the minimum in
    every line, with the signed margins in ``slack1``/``slack2``.
    """
    alpha, beta = alpha_beta(params, x)
    lam, q_D, q_U = params.lam, params.q_rec_D, params.q_rec_U
    k_D, k_I = params.k_D, params.k_I

    if case is StrategyCase.PREFER_UNPROTECTED:
        den = _check_denominator(beta + q_U, "beta + q_rec_U")
        g_UI = k_I / den
        mu = beta * g_UI
        den2 = _check_denominator(lam * den * (alpha + lam + q_D),
                                  "lam*(beta+q_rec_U)*(alpha+lam+q_rec_D)")
        g_DS = (k_D - mu) / lam + k_I * alpha * (beta + lam + q_U) / den2
        g_DI = (k_D - mu) / lam + k_I * (alpha + lam) * (beta + lam + q_U) / den2
        g = {"DI": g_DI, "DS": g_DS, "UI": g_UI, "US": 0.0}
        return _finish(case, g, mu, g_DI - g_UI, g_DS - 0.0)

    if case is StrategyCase.PREFER_DEFENDED:
        den = _check_denominator(alpha + q_D, "alpha + q_rec_D")
        g_DI = k_I / den
        mu = k_D + alpha * g_DI
        den2 = _check_denominator(lam * den * (beta + lam + q_U),
                                  "lam*(alpha+q_rec_D)*(beta+lam+q_rec_U)")
        g_US = -k_D / lam + k_I * (beta * (lam + q_D) - alpha * (lam + q_U)) / den2
        g_UI = -k_D / lam + k_I * ((beta + lam) * (lam + q_D) - alpha * q_U) / den2
        g = {"DI": g_DI, "DS": 0.0, "UI": g_UI, "US": g_US}
        return _finish(case, g, mu, g_UI - g_DI, g_US - 0.0)

    if case is StrategyCase.DEFEND_SUSCEPTIBLE:
        den = _check_denominator(
            alpha * (beta + lam + q_U) + q_U * (alpha + lam + q_D),
            "alpha*(beta+lam+q_rec_U) + q_rec_U*(alpha+lam+q_rec_D)")
        g_DI = (beta + lam + q_U) * (k_I - k_D) / den
        g_US = (k_I * (beta * (lam + q_D) - alpha * (lam + q_U))
                - k_D * (beta + q_U) * (alpha + lam + q_D)) / (lam * den)
        g_UI = (k_I * ((lam + q_D) * (lam + beta) - alpha * q_U)
                - k_D * (beta + lam + q_U) * (alpha + lam + q_D)) / (lam * den)
        mu = (k_I * alpha * (beta + lam + q_U) + k_D * q_U * (alpha + lam + q_D)) / den
        g = {"DI": g_DI, "DS": 0.0, "UI": g_UI, "US": g_US}
        return _finish(case, g, mu, g_DI - g_UI, g_US - 0.0)

    if case is StrategyCase.DEFEND_INFECTED:
        den = _check_denominator(
            beta * (alpha + lam + q_D) + q_D * (beta + lam + q_U),
            "beta*(alpha+lam+q_rec_D) + q_rec_D*(beta+lam+q_rec_U)")
        g_UI = (k_D + k_I) * (alpha + lam + q_D) / den
        g_DS = (k_D * (beta + lam + q_U) * (alpha + q_D)
                + k_I * (alpha * (lam + q_U) - beta * (lam + q_D))) / (lam * den)
        g_DI = (k_D * (beta + lam + q_U) * (alpha + lam + q_D)
                + k_I * ((alpha + lam) * (lam + q_U) - beta * q_D)) / (lam * den)
        mu = beta * g_UI
        g = {"DI": g_DI, "DS": g_DS, "UI": g_UI, "US": 0.0}
        return _finish(case, g, mu, g_UI - g_DI, g_DS - 0.0)

    raise ValueError(f"unknown case {case!r}")


def bellman_residual(params: ModelParams, x: StateDist, sol: HjbSolution) -> float:
    """Max absolute residual of the four optimality lines at (g, mu)."""
    alpha, beta = alpha_beta(params, x)
    lam = params.lam
    g_DI, g_DS, g_UI, g_US = sol.g_DI, sol.g_DS, sol.g_UI, sol.g_US
    lines = (
        lam * min(g_UI - g_DI, 0.0) + params.q_rec_D * (g_DS - g_DI)
        + params.k_I + params.k_D - sol.mu,
        lam * min(g_US - g_DS, 0.0) + alpha * (g_DI - g_DS) + params.k_D - sol.mu,
        lam * min(g_DI - g_UI, 0.0) + params.q_rec_U * (g_US - g_UI)
        + params.k_I - sol.mu,
        lam * min(g_DS - g_US, 0.0) + beta * (g_UI - g_US) - sol.mu,
    )
    return max(abs(v) for v in lines)


def control_attains_min(sol: HjbSolution, tol: float = DEGENERATE_SLACK) -> bool:
    """Whether the stored control picks the minimizing branch on every line."""
    diffs = (
        (sol.control.u_DI, sol.g_UI - sol.g_DI),
        (sol.control.u_DS, sol.g_US - sol.g_DS),
        (sol.control.u_UI, sol.g_DI - sol.g_UI),
        (sol.control.u_US, sol.g_DS - sol.g_US),
    )
    for u, diff in diffs:
        if u == 1 and diff > tol:
            return False
        if u == 0 and diff < -tol:
            return False
    return True


def case_thresholds(params: ModelParams, x: StateDist) -> dict[str, float]:
    """The four quantities A, B, P, Q deciding case validity at x."""
    alpha, beta = alpha_beta(params, x)
    lam, q_D, q_U = params.lam, params.q_rec_D, params.q_rec_U
    return {
        "A": (beta + lam) * q_D - (alpha + lam) * q_U,
        "B": beta * (lam + q_D) - alpha * (lam + q_U),
        "P": (alpha + q_D) * (beta + q_U + lam),
        "Q": (alpha + q_D + lam) * (beta + q_U),
    }


def enumerate_hjb(params: ModelParams, x: StateDist) -> list[HjbSolution]:
    """All valid case solutions at x, sorted by average cost.

    Distinct solutions never exceed two; in fact the validity bands in
    kappa partition the half-line, so off case boundaries exactly one
    case is valid (boundary hits return the coinciding solutions from the
    adjacent cases, flagged degenerate).
    """
    solutions = []
    for case in StrategyCase:
        try:
            sol = solve_case(params, x, case)
        except DegenerateDenominator:
            continue
        if sol.valid:
            solutions.append(sol)
    solutions.sort(key=lambda s: (s.mu, s.case.label))
    assert _distinct_count(solutions) <= 2, "more than two distinct solutions"
    return solutions


def _distinct_count(solutions: list[HjbSolution], tol: float = 1e-9) -> int:
    distinct: list[HjbSolution] = []
    for sol in solutions:
        if not any(
            abs(sol.mu - other.mu) <= tol
            and np.max(np.abs(sol.g_array() - other.g_array())) <= tol
            for other in distinct
        ):
            distinct.append(sol)
    return len(distinct)


ALL_CONTROLS = [ControlVector(*bits) for bits in itertools.product((0, 1), repeat=4)]


def oracle_enumerate(params: ModelParams, x: StateDist) -> list[HjbSolution]:
    """Brute-force check: solve the fixed-control linear system for all 16
    binary controls and keep those whose control attains every minimum.

    Independent of the closed forms; must agree with enumerate_hjb.
    Solutions equal up to an additive shift of g are deduplicated.
    """
    alpha, beta = alpha_beta(params, x)
    lam, q_D, q_U = params.lam, params.q_rec_D, params.q_rec_U
    k_D, k_I = params.k_D, params.k_I

    # unknowns (g_DI, g_DS, g_UI, g_US, mu); one system per control
    mats = np.zeros((16, 5, 5))
    rhs = np.zeros((16, 5))
    for i, u in enumerate(ALL_CONTROLS):
        m = mats[i]
        m[0, 0] = -lam * u.u_DI - q_D
        m[0, 1] = q_D
        m[0, 2] = lam * u.u_DI
        m[0, 4] = -1.0
        rhs[i, 0] = -(k_I + k_D)
        m[1, 0] = alpha
        m[1, 1] = -lam * u.u_DS - alpha
        m[1, 3] = lam * u.u_DS
        m[1, 4] = -1.0
        rhs[i, 1] = -k_D
        m[2, 0] = lam * u.u_UI
        m[2, 2] = -lam * u.u_UI - q_U
        m[2, 3] = q_U
        m[2, 4] = -1.0
        rhs[i, 2] = -k_I
        m[3, 1] = lam * u.u_US
        m[3, 2] = beta
        m[3, 3] = -lam * u.u_US - beta
        m[3, 4] = -1.0
        m[4, 3] = 1.0  # normalization g_US = 0

    # controls that disconnect the chain (e.g. u = 0 everywhere) make the
    # one-average-cost system rank-deficient; those are solved in the
    # least-squares sense and kept only when actually consistent
    dets = np.abs(np.linalg.det(mats))
    hadamard = np.prod(np.linalg.norm(mats, axis=2), axis=1)
    regular = dets > 1e-9 * hadamard
    sols = np.full((16, 5), np.nan)
    if regular.any():
        try:
            sols[regular] = np.linalg.solve(mats[regular], rhs[regular][..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
        if not np.all(np.isfinite(sols[regular])):
            raise SingularSystem("non-finite solution of the fixed-control system")
    for i in np.where(~regular)[0]:
        z = np.linalg.lstsq(mats[i], rhs[i], rcond=None)[0]
        residual = float(np.max(np.abs(mats[i] @ z - rhs[i])))
        if residual <= 1e-8 * max(1.0, float(np.max(np.abs(rhs[i])))):
            sols[i] = z

    kept: list[HjbSolution] = []
    for i, u in enumerate(ALL_CONTROLS):
        if not np.isfinite(sols[i]).all():
            continue
        g_DI, g_DS, g_UI, g_US, mu = sols[i]
        diffs = (
            (u.u_DI, g_UI - g_DI),
            (u.u_DS, g_US - g_DS),
            (u.u_UI, g_DI - g_UI),
            (u.u_US, g_DS - g_US),
        )
        slacks = []
        ok = True
        for ub, diff in diffs:
            margin = -diff if ub == 1 else diff
            slacks.append(margin)
            if margin < -DEGENERATE_SLACK:
                ok = False
                break
        if not ok:
            continue
        degenerate = any(abs(s) <= DEGENERATE_SLACK for s in slacks)
        shift = min(g_DI, g_DS, g_UI, g_US)
        slacks.sort()
        kept.append(HjbSolution(
            case=u.case,
            g_DI=g_DI - shift, g_DS=g_DS - shift,
            g_UI=g_UI - shift, g_US=g_US - shift,
            mu=float(mu), valid=True, degenerate=degenerate,
            slack1=slacks[0], slack2=slacks[1],
            control=u,
        ))

    deduped: list[HjbSolution] = []
    for sol in sorted(kept, key=lambda s: (s.mu, s.case.label if s.case else "z")):
        if not any(
            abs(sol.mu - other.mu) <= 1e-9
            and np.max(np.abs(sol.g_array() - other.g_array())) <= 1e-9
            for other in deduped
        ):
            deduped.append(sol)
    return deduped


@dataclass(frozen=True)
class LargeLambdaPrediction:
    """Case set predicted by the lam -> infinity limits of the validity bands."""

    cases: frozenset[StrategyCase]
    window: float  # heuristic half-width of the unreliable kappa interval
    thresholds: dict[str, float] = field(compare=False)
    domain: Domain = Domain.BOUNDARY


def large_lambda_classify(params: ModelParams, x: StateDist,
                          kappa: float | None = None) -> LargeLambdaPrediction:
    """Predict which cases are valid at x for large lam, given kappa.

    In the limit the validity regions become, with s = alpha + q_rec_D and
    r = beta + q_rec_U:

        case i   : kappa >= max(delta, beta-alpha) / r
        case ii  : kappa <= min(delta, beta-alpha) / s
        case iii : delta/s <= kappa <= (beta-alpha)/r    (nonempty in D1)
        case iv  : (beta-alpha)/s <= kappa <= delta/r    (nonempty in D2)

    The prediction is only reliable for kappa outside a window of width
    O(1/lam) around each threshold; the reported half-width max(rates)^2 /
    lam is a heuristic, not a sharp bound.
    """
    if kappa is None:
        kappa = params.kappa
    alpha, beta = alpha_beta(params, x)
    delta = params.delta
    s = alpha + params.q_rec_D
    r = beta + params.q_rec_U
    gap = beta - alpha

    thresholds = {
        "case_i_min": max(delta, gap) / r,
        "case_ii_max": min(delta, gap) / s,
        "case_iii_min": delta / s,
        "case_iii_max": gap / r,
        "case_iv_min": gap / s,
        "case_iv_max": delta / r,
    }
    cases = set()
    if kappa >= thresholds["case_i_min"]:
        cases.add(StrategyCase.PREFER_UNPROTECTED)
    if kappa <= thresholds["case_ii_max"]:
        cases.add(StrategyCase.PREFER_DEFENDED)
    if thresholds["case_iii_min"] <= kappa <= thresholds["case_iii_max"]:
        cases.add(StrategyCase.DEFEND_SUSCEPTIBLE)
    if thresholds["case_iv_min"] <= kappa <= thresholds["case_iv_max"]:
        cases.add(StrategyCase.DEFEND_INFECTED)

    # heuristic window constant: square of the fastest non-switching rate
    non_lam = max(params.q_rec_D, params.q_rec_U,
                  params.q_inf_D * params.v_H, params.q_inf_U * params.v_H,
                  params.beta_UU, params.beta_UD, params.beta_DU, params.beta_DD)
    window = non_lam ** 2 / params.lam
    return LargeLambdaPrediction(
        cases=frozenset(cases),
        window=window,
        thresholds=thresholds,
        domain=classify_domain(params, x).domain,
    )

