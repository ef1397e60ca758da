"""Core model: parameters, state types, effective infection rates, and the
kinetic mean-field dynamics of the four-state defense game.

Each computer is in one of four states, written in the fixed coordinate
order (DI, DS, UI, US): Defended/Unprotected crossed with Infected/
Susceptible.  An attacker applies direct-infection pressure ``v_H``;
infected machines infect susceptible ones through pairwise contact at
rates ``beta_<infector><susceptible>``; owners toggle the defense system,
and a toggle decision executes after an exponential time with rate
``lam``.

The population-level dynamics is the closed ODE on the 3-simplex

    dx_DI/dt =  alpha*x_DS - q_rec_D*x_DI + lam*(u_UI*x_UI - u_DI*x_DI)
    dx_DS/dt = -alpha*x_DS + q_rec_D*x_DI + lam*(u_US*x_US - u_DS*x_DS)
    dx_UI/dt =  beta*x_US  - q_rec_U*x_UI - lam*(u_UI*x_UI - u_DI*x_DI)
    dx_US/dt = -beta*x_US  + q_rec_U*x_UI - lam*(u_US*x_US - u_DS*x_DS)

with the effective infection intensities

    alpha = q_inf_D*v_H + x_DI*beta_DD + x_UI*beta_UD   (defended targets)
    beta  = q_inf_U*v_H + x_DI*beta_DU + x_UI*beta_UU   (unprotected targets)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

STATE_NAMES = ("DI", "DS", "UI", "US")

# |sum(x) - 1| accepted on input before renormalizing; root-finders and
# integrators produce drift at this scale.
SIMPLEX_INPUT_TOL = 1e-9
# tolerance on the rate comparison separating the two solution domains
DOMAIN_BOUNDARY_TOL = 1e-12


class InvalidSimplex(ValueError):
    """Raised when a candidate distribution is not a point on the 3-simplex."""


class StepTooLarge(RuntimeError):
    """Raised when an integration step drives a component below -1e-6."""


class StrategyCase(Enum):
    """The four pure stationary strategies a rational owner can hold.

    The control bit means "request a toggle of the defense state".  Only
    four of the 16 binary controls are self-consistent with optimality:
    if leaving D is worthwhile for one D-state holder of a value function,
    entering D cannot be worthwhile for the mirror state.
    """

    PREFER_UNPROTECTED = "i"    # drop defense everywhere
    PREFER_DEFENDED = "ii"      # acquire defense everywhere
    DEFEND_SUSCEPTIBLE = "iii"  # defend while healthy, drop it when infected
    DEFEND_INFECTED = "iv"      # defend only while infected

    @property
    def label(self) -> str:
        return self.value

    @property
    def control(self) -> "ControlVector":
        return CASE_CONTROLS[self]

    @classmethod
    def from_label(cls, label: str) -> "StrategyCase":
        for case in cls:
            if case.value == label:
                return case
        raise ValueError(f"unknown strategy case {label!r}")


class Domain(Enum):
    D1 = "D1"
    D2 = "D2"
    BOUNDARY = "Boundary"


class Subdomain(Enum):
    DJ1 = "Dj1"
    DJ2 = "Dj2"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class DomainInfo:
    domain: Domain
    subdomain: Subdomain


@dataclass(frozen=True)
class ModelParams:
    """All rate and cost constants of the model.

    Rates are per unit time; ``v_H`` (attacker effort) and the cost ratio
    are dimensionless.  ``beta_XY`` is the contact infection rate from an
    X-infected machine onto a Y-susceptible one (infector first).
    """

    q_rec_D: float     # recovery rate while defended
    q_rec_U: float     # recovery rate while unprotected
    q_inf_D: float     # direct-infection coefficient while defended
    q_inf_U: float     # direct-infection coefficient while unprotected
    beta_UU: float
    beta_UD: float
    beta_DU: float
    beta_DD: float
    lam: float         # execution rate of owner decisions (config key "lambda")
    v_H: float         # attacker effort level
    k_D: float         # defense fee per unit time
    k_I: float         # infection loss per unit time

    def __post_init__(self) -> None:
        for name in CONFIG_KEYS:
            value = getattr(self, _FIELD_BY_KEY[name])
            if not math.isfinite(value) or value < 0.0:
                raise ValueError(f"parameter {name} must be finite and >= 0, got {value}")
        if self.lam <= 0.0:
            raise ValueError("lambda must be positive")
        if self.k_I <= 0.0:
            raise ValueError("k_I must be positive")

    @property
    def kappa(self) -> float:
        """Cost ratio k_D / k_I, the bifurcation parameter."""
        return self.k_D / self.k_I

    @property
    def delta(self) -> float:
        """Recovery-rate gap q_rec_D - q_rec_U."""
        return self.q_rec_D - self.q_rec_U

    @property
    def satisfies_base_assumptions(self) -> bool:
        """Sign structure one expects of a defense system that works."""
        return (
            self.q_rec_D >= self.q_rec_U
            and self.q_inf_D < self.q_inf_U
            and self.beta_UD <= self.beta_UU
            and self.beta_DD <= self.beta_DU
            and self.k_D <= self.k_I
        )

    @property
    def has_target_only_contact_rates(self) -> bool:
        """Contact rates depend only on the susceptible side's defense level."""
        return self.beta_DU == self.beta_UU and self.beta_UD == self.beta_DD

    @property
    def has_equal_recovery_rates(self) -> bool:
        return self.q_rec_D == self.q_rec_U

    @property
    def satisfies_recovery_gap_bound(self) -> bool:
        """Recovery gain from defense is smaller than the direct-infection gain.

        Under this bound every population state sits in domain D1.
        """
        return self.delta < (self.q_inf_U - self.q_inf_D) * self.v_H

    def max_rate(self) -> float:
        return max(
            self.q_rec_D, self.q_rec_U,
            self.q_inf_D * self.v_H, self.q_inf_U * self.v_H,
            self.beta_UU, self.beta_UD, self.beta_DU, self.beta_DD,
            self.lam,
        )

    def with_kappa(self, kappa: float) -> "ModelParams":
        """Copy with k_D set to kappa * k_I."""
        return replace(self, k_D=kappa * self.k_I)

    # -- flat key/value config -------------------------------------------

    def to_config_text(self) -> str:
        lines = [f"{key} = {getattr(self, _FIELD_BY_KEY[key])!r}" for key in CONFIG_KEYS]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config_text(cls, text: str) -> "ModelParams":
        values: dict[str, float] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _FIELD_BY_KEY:
                raise ValueError(f"line {lineno}: unknown parameter {key!r}")
            if key in values:
                raise ValueError(f"line {lineno}: duplicate parameter {key!r}")
            try:
                values[key] = float(value.strip())
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad number for {key!r}") from exc
        missing = [key for key in CONFIG_KEYS if key not in values]
        if missing:
            raise ValueError(f"missing parameters: {', '.join(missing)}")
        return cls(**{_FIELD_BY_KEY[key]: values[key] for key in CONFIG_KEYS})

    @classmethod
    def from_config_file(cls, path: str) -> "ModelParams":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_config_text(fh.read())


# exact external key set; "lambda" is a keyword, hence the lam field
CONFIG_KEYS = (
    "q_rec_D", "q_rec_U", "q_inf_D", "q_inf_U",
    "beta_UU", "beta_UD", "beta_DU", "beta_DD",
    "lambda", "v_H", "k_D", "k_I",
)
_FIELD_BY_KEY = {key: ("lam" if key == "lambda" else key) for key in CONFIG_KEYS}


@dataclass(frozen=True)
class StateDist:
    """A point on the 3-simplex: population fractions in the four states.

    Inputs may carry drift up to |sum - 1| <= 1e-9 and components down to
    -1e-9; they are clipped and renormalized so the stored components are
    nonnegative and sum to one within 1e-12.
    """

    x_DI: float
    x_DS: float
    x_UI: float
    x_US: float

    def __post_init__(self) -> None:
        comps = [self.x_DI, self.x_DS, self.x_UI, self.x_US]
        if any(not math.isfinite(c) for c in comps):
            raise InvalidSimplex(f"non-finite component in {comps}")
        if any(c < -SIMPLEX_INPUT_TOL or c > 1.0 + SIMPLEX_INPUT_TOL for c in comps):
            raise InvalidSimplex(f"component outside [0, 1]: {comps}")
        total = math.fsum(comps)
        if abs(total - 1.0) > SIMPLEX_INPUT_TOL:
            raise InvalidSimplex(f"components sum to {total}, not 1")
        clipped = [max(c, 0.0) for c in comps]
        total = math.fsum(clipped)
        for name, value in zip(("x_DI", "x_DS", "x_UI", "x_US"), clipped):
            object.__setattr__(self, name, value / total)

    def as_array(self) -> np.ndarray:
        return np.array([self.x_DI, self.x_DS, self.x_UI, self.x_US])

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_DI, self.x_DS, self.x_UI, self.x_US)

    @classmethod
    def from_sequence(cls, values: Sequence[float] | Iterable[float]) -> "StateDist":
        vals = list(values)
        if len(vals) != 4:
            raise InvalidSimplex(f"expected 4 components, got {len(vals)}")
        return cls(*(float(v) for v in vals))

    @property
    def infected_fraction(self) -> float:
        return self.x_DI + self.x_UI

    @property
    def defended_fraction(self) -> float:
        return self.x_DI + self.x_DS


@dataclass(frozen=True)
class ControlVector:
    """Binary toggle requests per state, in the order (DI, DS, UI, US)."""

    u_DI: int
    u_DS: int
    u_UI: int
    u_US: int

    def __post_init__(self) -> None:
        for name in ("u_DI", "u_DS", "u_UI", "u_US"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.u_DI, self.u_DS, self.u_UI, self.u_US)

    @property
    def case(self) -> StrategyCase | None:
        """The strategy case this control realizes, if any."""
        return _CASE_BY_CONTROL.get(self.as_tuple())


CASE_CONTROLS: dict[StrategyCase, ControlVector] = {
    StrategyCase.PREFER_UNPROTECTED: ControlVector(1, 1, 0, 0),
    StrategyCase.PREFER_DEFENDED: ControlVector(0, 0, 1, 1),
    StrategyCase.DEFEND_SUSCEPTIBLE: ControlVector(1, 0, 0, 1),
    StrategyCase.DEFEND_INFECTED: ControlVector(0, 1, 1, 0),
}
_CASE_BY_CONTROL = {cv.as_tuple(): case for case, cv in CASE_CONTROLS.items()}


class EffectiveRates(NamedTuple):
    alpha: float
    beta: float


def alpha_beta(params: ModelParams, x: StateDist) -> EffectiveRates:
    """Effective infection intensities seen by defended / unprotected targets."""
    alpha = params.q_inf_D * params.v_H + x.x_DI * params.beta_DD + x.x_UI * params.beta_UD
    beta = params.q_inf_U * params.v_H + x.x_DI * params.beta_DU + x.x_UI * params.beta_UU
    return EffectiveRates(alpha, beta)


def _rhs_components(
    params: ModelParams,
    x_DI: float, x_DS: float, x_UI: float, x_US: float,
    u: ControlVector,
) -> tuple[float, float, float, float]:
    """Kinetic right-hand side on raw floats (hot path for the integrator).

    Each one-way population flow is computed once; the last component
    closes the balance, so the four components sum to exactly 0.0 under
    left-to-right summation.
    """
    alpha = params.q_inf_D * params.v_H + x_DI * params.beta_DD + x_UI * params.beta_UD
    beta = params.q_inf_U * params.v_H + x_DI * params.beta_DU + x_UI * params.beta_UU
    lam = params.lam

    infect_D = x_DS * alpha            # DS -> DI
    recover_D = x_DI * params.q_rec_D  # DI -> DS
    infect_U = x_US * beta             # US -> UI
    recover_U = x_UI * params.q_rec_U  # UI -> US
    drop_I = lam * x_DI * u.u_DI       # DI -> UI
    take_I = lam * x_UI * u.u_UI       # UI -> DI
    drop_S = lam * x_DS * u.u_DS       # DS -> US
    take_S = lam * x_US * u.u_US       # US -> DS

    d_DI = (infect_D - recover_D) + (take_I - drop_I)
    d_DS = (recover_D - infect_D) + (take_S - drop_S)
    d_UI = (infect_U - recover_U) + (drop_I - take_I)
    d_US = 0.0 - ((d_DI + d_DS) + d_UI)
    return d_DI, d_DS, d_UI, d_US


def kinetic_rhs(params: ModelParams, x: StateDist, u: ControlVector) -> np.ndarray:
    """Time derivative of the population fractions under a fixed control.

    The components sum to exactly zero (mass conservation), and any
    component whose fraction is zero is nonnegative (the simplex is
    forward-invariant).
    """
    return np.array(_rhs_components(params, x.x_DI, x.x_DS, x.x_UI, x.x_US, u))


def kinetic_jacobian(params: ModelParams, x: StateDist, u: ControlVector) -> np.ndarray:
    """Analytic 4x4 Jacobian of kinetic_rhs with respect to x.

    Column sums vanish, reflecting mass conservation.
    """
    alpha, beta = alpha_beta(params, x)
    lam = params.lam
    x_DS, x_US = x.x_DS, x.x_US
    b_DD, b_UD, b_DU, b_UU = params.beta_DD, params.beta_UD, params.beta_DU, params.beta_UU

    j = np.zeros((4, 4))
    # row DI
    j[0, 0] = x_DS * b_DD - params.q_rec_D - lam * u.u_DI
    j[0, 1] = alpha
    j[0, 2] = x_DS * b_UD + lam * u.u_UI
    # row DS
    j[1, 0] = -x_DS * b_DD + params.q_rec_D
    j[1, 1] = -alpha - lam * u.u_DS
    j[1, 2] = -x_DS * b_UD
    j[1, 3] = lam * u.u_US
    # row UI
    j[2, 0] = x_US * b_DU + lam * u.u_DI
    j[2, 2] = x_US * b_UU - params.q_rec_U - lam * u.u_UI
    j[2, 3] = beta
    # row US
    j[3, 0] = -x_US * b_DU
    j[3, 1] = lam * u.u_DS
    j[3, 2] = -x_US * b_UU + params.q_rec_U
    j[3, 3] = -beta - lam * u.u_US
    return j


def default_step(params: ModelParams) -> float:
    """Fixed RK4 step: 1e-2 over the fastest rate in the parameter set."""
    return 1e-2 / params.max_rate()


def integrate(
    params: ModelParams,
    x0: StateDist,
    u: ControlVector,
    horizon: float,
    step: float | None = None,
    sample_every: int = 1,
) -> list[tuple[float, StateDist]]:
    """Integrate the kinetic ODE with classical fixed-step RK4.

    Returns the sampled trajectory [(t, state), ...]; the final state at
    ``horizon`` is always included.  Emitted states are clipped onto the
    simplex and renormalized.  Raises StepTooLarge if any intermediate
    component falls below -1e-6.
    """
    if horizon < 0.0:
        raise ValueError("horizon must be >= 0")
    if step is None:
        step = default_step(params)
    if step <= 0.0:
        raise ValueError("step must be positive")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")

    trajectory: list[tuple[float, StateDist]] = [(0.0, x0)]
    if horizon == 0.0:
        return trajectory

    n_steps = max(1, math.ceil(horizon / step))
    h_nominal = horizon / n_steps
    state = x0.as_tuple()
    for i in range(n_steps):
        state = _rk4_step(params, state, u, h_nominal)
        state = _project_simplex(state)
        t = (i + 1) * h_nominal
        if (i + 1) % sample_every == 0 or i + 1 == n_steps:
            trajectory.append((t, StateDist(*state)))
    return trajectory


def _rk4_step(
    params: ModelParams,
    state: tuple[float, float, float, float],
    u: ControlVector,
    h: float,
) -> tuple[float, float, float, float]:
    k1 = _rhs_components(params, *state, u)
    s2 = tuple(state[j] + 0.5 * h * k1[j] for j in range(4))
    k2 = _rhs_components(params, *s2, u)
    s3 = tuple(state[j] + 0.5 * h * k2[j] for j in range(4))
    k3 = _rhs_components(params, *s3, u)
    s4 = tuple(state[j] + h * k3[j] for j in range(4))
    k4 = _rhs_components(params, *s4, u)
    return tuple(
        state[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        for j in range(4)
    )


def _project_simplex(state: tuple[float, float, float, float]) -> tuple[float, float, float, float]:
    if min(state) < -1e-6:
        raise StepTooLarge(f"integration state left the simplex: {state}; shrink the step")
    clipped = tuple(max(c, 0.0) for c in state)
    total = math.fsum(clipped)
    return tuple(c / total for c in clipped)


def classify_domain(params: ModelParams, x: StateDist) -> DomainInfo:
    """Which solution domain a population state belongs to.

    D1 holds where beta + q_rec_U > alpha + q_rec_D (unprotected machines
    both catch the infection faster and shed it slower, net); D2 is the
    reverse.  The subdomain compares delta/(alpha+q_rec_D) against
    (beta-alpha)/(beta+q_rec_U).
    """
    alpha, beta = alpha_beta(params, x)
    gap = (beta + params.q_rec_U) - (alpha + params.q_rec_D)
    if abs(gap) <= DOMAIN_BOUNDARY_TOL:
        domain = Domain.BOUNDARY
    elif gap > 0.0:
        domain = Domain.D1
    else:
        domain = Domain.D2

    sub_gap = (beta - alpha) * (alpha + params.q_rec_D) - params.delta * (beta + params.q_rec_U)
    if abs(sub_gap) <= DOMAIN_BOUNDARY_TOL:
        subdomain = Subdomain.BOUNDARY
    elif sub_gap > 0.0:
        subdomain = Subdomain.DJ1
    else:
        subdomain = Subdomain.DJ2
    return DomainInfo(domain, subdomain)
