"""Stationary equilibria of a four-state defense game between computer
owners and a botnet operator, with an exact N-agent simulator for
validating the mean-field limit."""

from .model import (
    CONFIG_KEYS,
    ControlVector,
    Domain,
    DomainInfo,
    EffectiveRates,
    InvalidSimplex,
    ModelParams,
    StateDist,
    StepTooLarge,
    StrategyCase,
    Subdomain,
    alpha_beta,
    classify_domain,
    integrate,
    kinetic_jacobian,
    kinetic_rhs,
)
from .hjb import (
    DegenerateDenominator,
    HjbSolution,
    SingularSystem,
    enumerate_hjb,
    large_lambda_classify,
    oracle_enumerate,
    solve_case,
)
from .fixedpoint import (
    DenominatorPole,
    FixedPoint,
    fixed_point_acyclic,
    fixed_point_mixed,
    fixed_point_mixed_asymptotic,
    stability,
)
from .equilibrium import (
    AssumptionViolation,
    BifurcationReport,
    Equilibrium,
    SweepRow,
    kappa_of,
    kappa_thresholds,
    solve_mfg,
    sweep_kappa,
)
from .agentsim import (
    AgentCounts,
    DeviationStats,
    SimConfig,
    Trajectory,
    compare_ode,
    event_rates,
    simulate,
    simulate_myopic,
)

__version__ = "0.1.0"

__all__ = [
    "AgentCounts", "AssumptionViolation", "BifurcationReport", "CONFIG_KEYS",
    "ControlVector", "DegenerateDenominator", "DenominatorPole",
    "DeviationStats", "Domain", "DomainInfo", "EffectiveRates", "Equilibrium",
    "FixedPoint", "HjbSolution", "InvalidSimplex", "ModelParams", "SimConfig",
    "SingularSystem", "StateDist", "StepTooLarge", "StrategyCase", "Subdomain",
    "SweepRow", "Trajectory", "alpha_beta", "classify_domain", "compare_ode",
    "enumerate_hjb", "event_rates", "fixed_point_acyclic", "fixed_point_mixed",
    "fixed_point_mixed_asymptotic", "integrate", "kappa_of", "kappa_thresholds",
    "kinetic_jacobian", "kinetic_rhs", "large_lambda_classify",
    "oracle_enumerate", "simulate", "simulate_myopic", "solve_case",
    "solve_mfg", "stability", "sweep_kappa",
]
