"""Stationary points of the kinetic dynamics per strategy case, with
linear stability from the reduced three-dimensional Jacobian.

Acyclic cases collapse to a scalar endemic-equilibrium quadratic

    Q(y) = b*y**2 + y*(q - b + p) - p,     p = direct rate, q = recovery,
                                           b = within-group contact rate,

whose unique root in (0, 1) gives the infected fraction.  The mixed cases
reduce to a quartic in x_DI, solved by sign-change bracketing plus
bisection; for large lam they collapse back to a quadratic of the same
shape.  Case iv is the mirror image of case iii under the relabeling that
swaps the defended and unprotected sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import (
    ControlVector,
    ModelParams,
    StateDist,
    StrategyCase,
    kinetic_jacobian,
    kinetic_rhs,
)

BRACKET_GRID = 1e-3      # default grid for sign-change scanning on [0, 1]
BISECT_TOL = 1e-13
RESIDUAL_TOL = 1e-9      # sup-norm bound on kinetic_rhs at a returned point
STABLE_EIG_TOL = -1e-12  # stable <=> all eigenvalue real parts below this


class DenominatorPole(ArithmeticError):
    """The back-substitution denominator q_rec_U - beta_UU*x_DI vanished."""


@dataclass(frozen=True)
class FixedPoint:
    """A stationary population state under one strategy case."""

    x: StateDist
    case: StrategyCase
    eigenvalues: tuple[complex, complex, complex]
    stable: bool
    method: str                # closed_form | quartic_numeric | large_lambda
    interior: bool = True      # False for the disease-free boundary fallback

    def to_record(self) -> dict:
        rec = {
            "case": self.case.label,
            "x_DI": self.x.x_DI, "x_DS": self.x.x_DS,
            "x_UI": self.x.x_UI, "x_US": self.x.x_US,
        }
        for i, eig in enumerate(self.eigenvalues, start=1):
            rec[f"eig{i}_re"] = eig.real
            rec[f"eig{i}_im"] = eig.imag
        rec["stable"] = self.stable
        rec["method"] = self.method
        return rec


CSV_FIELDS = ("case", "x_DI", "x_DS", "x_UI", "x_US",
              "eig1_re", "eig1_im", "eig2_re", "eig2_im", "eig3_re", "eig3_im",
              "stable", "method")


def endemic_root(contact: float, recovery: float, direct: float) -> tuple[float, bool]:
    """Root in (0, 1] of contact*y^2 + y*(recovery - contact + direct) - direct.

    Returns (root, interior).  With direct pressure the root is interior;
    without it the infection is endemic only above the contact threshold,
    otherwise the disease-free root 0 is returned with interior=False.
    A vanishing contact rate degenerates to the linear balance point.
    """
    b, q, p = contact, recovery, direct
    if b <= 0.0:
        # linear limit of the quadratic root
        if p <= 0.0:
            return 0.0, False
        return p / (q + p), True
    if p <= 0.0:
        if b > q:
            return (b - q) / b, True
        return 0.0, False
    disc = (b + p) ** 2 + q * q - 2.0 * q * (b - p)
    root = (b - q - p + math.sqrt(disc)) / (2.0 * b)
    return root, True


def fixed_point_acyclic(params: ModelParams, case: StrategyCase) -> FixedPoint:
    """Stationary point for the all-unprotected or all-defended strategy.

    Case i empties the defended states and leaves the unprotected
    epidemic balance; case ii is the mirror image.
    """
    if case is StrategyCase.PREFER_UNPROTECTED:
        root, interior = endemic_root(params.beta_UU, params.q_rec_U,
                                      params.q_inf_U * params.v_H)
        x = StateDist(0.0, 0.0, root, 1.0 - root)
    elif case is StrategyCase.PREFER_DEFENDED:
        root, interior = endemic_root(params.beta_DD, params.q_rec_D,
                                      params.q_inf_D * params.v_H)
        x = StateDist(root, 1.0 - root, 0.0, 0.0)
    else:
        raise ValueError(f"{case} is not an acyclic case")
    fp = FixedPoint(x=x, case=case, eigenvalues=(0j, 0j, 0j),
                    stable=False, method="closed_form", interior=interior)
    return stability(params, fp)


def _swap_du(params: ModelParams) -> ModelParams:
    """Relabel the defended and unprotected sides of the model."""
    return replace(
        params,
        q_rec_D=params.q_rec_U, q_rec_U=params.q_rec_D,
        q_inf_D=params.q_inf_U, q_inf_U=params.q_inf_D,
        beta_DD=params.beta_UU, beta_UU=params.beta_DD,
        beta_DU=params.beta_UD, beta_UD=params.beta_DU,
    )


def _swap_state(x: StateDist) -> StateDist:
    return StateDist(x.x_UI, x.x_US, x.x_DI, x.x_DS)


def mixed_quartic_coeffs(params: ModelParams) -> np.ndarray:
    """Ascending coefficients of the case-iii stationarity polynomial in x_DI.

    Eliminating x_UI = x_DI*(q_inf_U*v_H + beta_DU*x_DI + lam) /
    (q_rec_U - beta_UU*x_DI) from the two-equation reduced system and
    clearing the denominator squared yields a degree <= 4 polynomial.
    """
    lam, v_H = params.lam, params.v_H
    den = np.array([params.q_rec_U, -params.beta_UU])             # D(y)
    num = np.array([0.0, params.q_inf_U * v_H + lam, params.beta_DU])  # N(y)
    # susceptible-defended mass times D: D*(1 - 2y) - N
    t1 = np.polynomial.polynomial.polysub(
        np.polynomial.polynomial.polymul(den, np.array([1.0, -2.0])), num)
    # infection intensity on DS times D: (q_inf_D*v_H + beta_DD*y)*D + beta_UD*N
    t2 = np.polynomial.polynomial.polyadd(
        np.polynomial.polynomial.polymul(np.array([params.q_inf_D * v_H, params.beta_DD]), den),
        params.beta_UD * num)
    loss = (params.q_rec_D + lam) * np.polynomial.polynomial.polymul(
        np.array([0.0, 1.0]), np.polynomial.polynomial.polymul(den, den))
    poly = np.polynomial.polynomial.polysub(
        np.polynomial.polynomial.polymul(t1, t2), loss)
    out = np.zeros(5)
    out[: len(poly)] = poly
    return out


def reconstruct_mixed_state(params: ModelParams, x_DI: float) -> StateDist:
    """Full case-iii state from the x_DI abscissa.

    x_US = x_DI and x_UI follows from the switching balance.  Raises
    DenominatorPole at the back-substitution singularity.
    """
    den = params.q_rec_U - params.beta_UU * x_DI
    if abs(den) <= 1e-12 * max(1.0, params.q_rec_U, params.beta_UU):
        raise DenominatorPole(f"q_rec_U - beta_UU*x_DI vanishes at x_DI={x_DI}")
    x_UI = x_DI * (params.q_inf_U * params.v_H + params.beta_DU * x_DI + params.lam) / den
    x_DS = 1.0 - x_UI - 2.0 * x_DI
    return StateDist(x_DI, x_DS, x_UI, x_DI)


def bracket_roots(coeffs: np.ndarray, grid: float = BRACKET_GRID) -> list[float]:
    """All roots of a polynomial on [0, 1] found by sign-change scanning
    and bisection.  Exact zeros at grid nodes are kept as-is."""
    n = max(2, int(round(1.0 / grid)))
    ys = np.linspace(0.0, 1.0, n + 1)
    vals = np.polynomial.polynomial.polyval(ys, coeffs)
    roots: list[float] = []
    for i in range(n):
        lo, hi = ys[i], ys[i + 1]
        f_lo, f_hi = vals[i], vals[i + 1]
        if f_lo == 0.0:
            roots.append(float(lo))
            continue
        if f_lo * f_hi < 0.0:
            roots.append(_bisect(coeffs, float(lo), float(hi), float(f_lo)))
    if vals[-1] == 0.0:
        roots.append(1.0)
    # collapse duplicates from roots landing exactly on nodes
    out: list[float] = []
    for r in roots:
        if not out or r - out[-1] > BISECT_TOL:
            out.append(r)
    return out


def _horner(coeffs: tuple[float, ...], y: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * y + c
    return acc


def _bisect(coeffs: np.ndarray, lo: float, hi: float, f_lo: float) -> float:
    cs = tuple(float(c) for c in coeffs)
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        f_mid = _horner(cs, mid)
        if f_mid == 0.0:
            return mid
        if f_lo * f_mid < 0.0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    root = 0.5 * (lo + hi)
    # a few Newton polishing steps; the switching-rate scale makes the
    # residual budget tight for large lam
    dcs = tuple(float((i + 1) * coeffs[i + 1]) for i in range(len(coeffs) - 1))
    for _ in range(3):
        f = _horner(cs, root)
        df = _horner(dcs, root)
        if df == 0.0:
            break
        candidate = root - f / df
        if not (lo - BISECT_TOL <= candidate <= hi + BISECT_TOL):
            break
        root = candidate
    return root


def fixed_point_mixed(params: ModelParams, case: StrategyCase,
                      grid: float = BRACKET_GRID) -> list[FixedPoint]:
    """All stationary points of a mixed case at finite lam.

    Case iii solves the quartic directly; case iv solves the relabeled
    case-iii problem and swaps the coordinates back.  Roots that cannot be
    reconstructed into a simplex point (including those at the
    back-substitution pole) are discarded, as are reconstructions whose
    kinetic residual exceeds the fixed-point tolerance.
    """
    if case is StrategyCase.DEFEND_INFECTED:
        mirrored = fixed_point_mixed(_swap_du(params), StrategyCase.DEFEND_SUSCEPTIBLE, grid)
        out = []
        for fp in mirrored:
            swapped = FixedPoint(
                x=_swap_state(fp.x), case=case, eigenvalues=(0j, 0j, 0j),
                stable=False, method="quartic_numeric", interior=fp.interior)
            out.append(stability(params, swapped))
        return out
    if case is not StrategyCase.DEFEND_SUSCEPTIBLE:
        raise ValueError(f"{case} is not a mixed case")

    coeffs = mixed_quartic_coeffs(params)
    control = case.control
    points: list[FixedPoint] = []
    attempt_grid = grid
    for _ in range(3):  # doubling-refinement guard against missed brackets
        points = []
        for root in bracket_roots(coeffs, attempt_grid):
            try:
                x = reconstruct_mixed_state(params, root)
            except (DenominatorPole, ValueError):
                continue
            residual = float(np.max(np.abs(kinetic_rhs(params, x, control))))
            if residual > RESIDUAL_TOL:
                continue
            fp = FixedPoint(x=x, case=case, eigenvalues=(0j, 0j, 0j),
                            stable=False, method="quartic_numeric")
            points.append(stability(params, fp))
        if points:
            break
        attempt_grid /= 2.0
    return points


def fixed_point_mixed_asymptotic(params: ModelParams, case: StrategyCase) -> FixedPoint:
    """Large-lam limit of a mixed-case stationary point.

    The switching balance empties one state pair and the survivor solves
    an endemic quadratic: case iii infects the unprotected against the
    defended-side direct pressure, case iv mirrors it.
    """
    if case is StrategyCase.DEFEND_SUSCEPTIBLE:
        root, interior = endemic_root(params.beta_UD, params.q_rec_U,
                                      params.q_inf_D * params.v_H)
        x = StateDist(0.0, 1.0 - root, root, 0.0)
    elif case is StrategyCase.DEFEND_INFECTED:
        root, interior = endemic_root(params.beta_DU, params.q_rec_D,
                                      params.q_inf_U * params.v_H)
        x = StateDist(root, 0.0, 0.0, 1.0 - root)
    else:
        raise ValueError(f"{case} is not a mixed case")
    fp = FixedPoint(x=x, case=case, eigenvalues=(0j, 0j, 0j),
                    stable=False, method="large_lambda", interior=interior)
    return stability(params, fp)


# coordinate eliminated by the simplex constraint when reducing to 3 variables
_ELIMINATED = {
    StrategyCase.PREFER_UNPROTECTED: 3,   # x_US carries the mass
    StrategyCase.PREFER_DEFENDED: 1,      # x_DS
    StrategyCase.DEFEND_SUSCEPTIBLE: 1,   # x_DS
    StrategyCase.DEFEND_INFECTED: 3,      # x_US
}


def reduced_jacobian(params: ModelParams, x: StateDist, u: ControlVector,
                     eliminated: int) -> np.ndarray:
    """3x3 Jacobian of the dynamics restricted to the simplex.

    Eliminating coordinate j via the constraint replaces column j by its
    negative spread over the others: J_red[i, k] = J[i, k] - J[i, j].  The
    spectrum on the simplex tangent space does not depend on the choice
    of j.
    """
    full = kinetic_jacobian(params, x, u)
    keep = [i for i in range(4) if i != eliminated]
    red = np.empty((3, 3))
    for a, i in enumerate(keep):
        for b, k in enumerate(keep):
            red[a, b] = full[i, k] - full[i, eliminated]
    return red


def stability(params: ModelParams, fp: FixedPoint) -> FixedPoint:
    """Fill eigenvalues and the stability flag of a fixed point.

    Acyclic cases use the exact closed-form spectrum (one eigenvalue is
    exactly -lam); mixed cases take the roots of the cubic characteristic
    polynomial of the reduced Jacobian.
    """
    if fp.case is StrategyCase.PREFER_UNPROTECTED and fp.x.x_DI == 0.0 and fp.x.x_DS == 0.0:
        eigs = _acyclic_eigs(
            fp.x.x_UI, params.beta_UU, params.q_rec_U, params.q_inf_U * params.v_H,
            params.q_rec_D, params.q_inf_D * params.v_H, params.beta_UD, params.lam)
    elif fp.case is StrategyCase.PREFER_DEFENDED and fp.x.x_UI == 0.0 and fp.x.x_US == 0.0:
        eigs = _acyclic_eigs(
            fp.x.x_DI, params.beta_DD, params.q_rec_D, params.q_inf_D * params.v_H,
            params.q_rec_U, params.q_inf_U * params.v_H, params.beta_DU, params.lam)
    else:
        red = reduced_jacobian(params, fp.x, fp.case.control, _ELIMINATED[fp.case])
        eigs = _cubic_eigs(red)
    eigs = tuple(sorted(eigs, key=lambda z: (z.real, z.imag)))
    stable = all(z.real < STABLE_EIG_TOL for z in eigs)
    return replace(fp, eigenvalues=eigs, stable=stable)


def _acyclic_eigs(root: float, contact: float, recovery: float, direct: float,
                  other_recovery: float, other_direct: float,
                  cross_contact: float, lam: float) -> tuple[complex, ...]:
    """Closed-form spectrum at an acyclic fixed point.

    The emptied pair contributes the exact factor (xi + lam) *
    (xi + lam + other_recovery + intensity on the emptied susceptibles);
    the surviving epidemic contributes the scalar slope of its balance.
    """
    slow = (1.0 - 2.0 * root) * contact - direct - recovery
    emptied_intensity = other_direct + root * cross_contact
    return (
        complex(slow),
        complex(-lam - (other_recovery + emptied_intensity)),
        complex(-lam),
    )


def _cubic_eigs(m: np.ndarray) -> tuple[complex, ...]:
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    minors = (
        m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1]
        + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
        + m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    )
    det = float(np.linalg.det(m))
    roots = np.roots([1.0, -tr, minors, -det])
    return tuple(complex(z) for z in roots)


def fixed_point_residual(params: ModelParams, fp: FixedPoint) -> float:
    """Sup-norm of the kinetic right-hand side at the point."""
    return float(np.max(np.abs(kinetic_rhs(params, fp.x, fp.case.control))))
