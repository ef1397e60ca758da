"""Exact event-driven simulation of the N-agent Markov dynamics.

The population jumps one agent at a time through twelve event channels;
interaction rates carry the 1/N mean-field scaling, so event rates divided
by N reproduce the kinetic right-hand side exactly at x = n/N:

    idx  move       rate
    0    DS -> DI   n_DS * q_inf_D * v_H        direct infection, defended
    1    US -> UI   n_US * q_inf_U * v_H        direct infection, unprotected
    2    DI -> DS   n_DI * q_rec_D              recovery, defended
    3    UI -> US   n_UI * q_rec_U              recovery, unprotected
    4    DS -> DI   n_DI * n_DS * beta_DD / N   contact DI onto DS
    5    US -> UI   n_DI * n_US * beta_DU / N   contact DI onto US
    6    DS -> DI   n_UI * n_DS * beta_UD / N   contact UI onto DS
    7    US -> UI   n_UI * n_US * beta_UU / N   contact UI onto US
    8    DS -> US   lam * n_DS * u_DS           switching
    9    US -> DS   lam * n_US * u_US
    10   DI -> UI   lam * n_DI * u_DI
    11   UI -> DI   lam * n_UI * u_UI

Waiting times are exponential with the total rate; the jump channel is
drawn proportionally to the rates (the classical direct stochastic
simulation algorithm).  Randomness comes from a 64-bit PCG64 generator;
each replica uses its own stream seeded with base_seed + replica_index,
so runs are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import hjb as hjb_mod
from .model import (
    ControlVector,
    ModelParams,
    StateDist,
    integrate,
)

# channel -> (source index, destination index) in state order (DI, DS, UI, US)
EVENT_MOVES: tuple[tuple[int, int], ...] = (
    (1, 0), (3, 2), (0, 1), (2, 3),
    (1, 0), (3, 2), (1, 0), (3, 2),
    (1, 3), (3, 1), (0, 2), (2, 0),
)

MYOPIC = "myopic"


@dataclass(frozen=True)
class AgentCounts:
    """Agent head-counts per state."""

    n_DI: int
    n_DS: int
    n_UI: int
    n_US: int

    def __post_init__(self) -> None:
        for name in ("n_DI", "n_DS", "n_UI", "n_US"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v!r}")
        if self.total < 1:
            raise ValueError("need at least one agent")

    @property
    def total(self) -> int:
        return self.n_DI + self.n_DS + self.n_UI + self.n_US

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.n_DI, self.n_DS, self.n_UI, self.n_US)

    def to_dist(self) -> StateDist:
        n = self.total
        return StateDist(self.n_DI / n, self.n_DS / n, self.n_UI / n, self.n_US / n)

    @classmethod
    def from_dist(cls, n_agents: int, x: StateDist) -> "AgentCounts":
        """Round a distribution to integer counts summing to n_agents
        (largest remainders win the leftover agents)."""
        targets = [n_agents * c for c in x.as_tuple()]
        base = [math.floor(t) for t in targets]
        leftover = n_agents - sum(base)
        order = sorted(range(4), key=lambda i: (base[i] - targets[i], i))
        for i in range(leftover):
            base[order[i]] += 1
        return cls(*base)


@dataclass(frozen=True)
class SimConfig:
    """One simulation run: size, horizon, seeding, policy, sampling."""

    n_agents: int
    horizon: float
    seed: int
    policy: ControlVector | str          # a fixed control, or "myopic"
    sample_interval: float
    initial: StateDist | AgentCounts
    myopic_recompute: str = "interval"   # "interval" | "event"

    def __post_init__(self) -> None:
        if self.n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if self.sample_interval <= 0.0:
            raise ValueError("sample_interval must be positive")
        if isinstance(self.policy, str) and self.policy != MYOPIC:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.myopic_recompute not in ("interval", "event"):
            raise ValueError("myopic_recompute must be 'interval' or 'event'")

    def initial_counts(self) -> AgentCounts:
        if isinstance(self.initial, AgentCounts):
            if self.initial.total != self.n_agents:
                raise ValueError("initial counts do not sum to n_agents")
            return self.initial
        return AgentCounts.from_dist(self.n_agents, self.initial)


@dataclass(frozen=True)
class SwitchEvent:
    t: float
    old_case: str
    new_case: str
    mu: float


@dataclass
class Trajectory:
    """Sampled empirical distribution of one run."""

    times: np.ndarray
    states: np.ndarray                    # (n_samples, 4) fractions
    cases: list[str] | None = None        # active strategy per sample (myopic)
    switches: list[SwitchEvent] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def dist_at(self, i: int) -> StateDist:
        return StateDist.from_sequence(self.states[i])


def event_rates(params: ModelParams, counts: AgentCounts, u: ControlVector) -> np.ndarray:
    """The twelve channel rates at the given head-counts."""
    n_DI, n_DS, n_UI, n_US = counts.as_tuple()
    n = counts.total
    lam, v_H = params.lam, params.v_H
    return np.array([
        n_DS * params.q_inf_D * v_H,
        n_US * params.q_inf_U * v_H,
        n_DI * params.q_rec_D,
        n_UI * params.q_rec_U,
        n_DI * n_DS * params.beta_DD / n,
        n_DI * n_US * params.beta_DU / n,
        n_UI * n_DS * params.beta_UD / n,
        n_UI * n_US * params.beta_UU / n,
        lam * n_DS * u.u_DS,
        lam * n_US * u.u_US,
        lam * n_DI * u.u_DI,
        lam * n_UI * u.u_UI,
    ])


def generator_drift(params: ModelParams, counts: AgentCounts, u: ControlVector) -> np.ndarray:
    """(1/N) * sum over channels of rate * jump direction.

    Algebraically identical to kinetic_rhs at x = n/N.
    """
    rates = event_rates(params, counts, u)
    n = counts.total
    drift = np.zeros(4)
    for rate, (src, dst) in zip(rates, EVENT_MOVES):
        drift[src] -= rate
        drift[dst] += rate
    return drift / n


def _resolve_control(params: ModelParams, x: StateDist,
                     current: ControlVector, notes: list[str],
                     t: float) -> tuple[ControlVector, float | None]:
    """Myopic rule: adopt the control of the cheapest valid solution at x.

    Exact cost ties keep the incumbent control (hysteresis).  If no case
    is valid the incumbent is retained and the gap is noted.
    """
    solutions = hjb_mod.enumerate_hjb(params, x)
    if not solutions:
        notes.append(f"t={t!r}: no valid solution at x={x.as_tuple()!r}; control retained")
        return current, None
    best = solutions[0]
    for sol in solutions[1:]:
        if sol.mu < best.mu:
            best = sol
    if best.control != current and any(
        s.control == current and s.mu <= best.mu + 1e-15 for s in solutions
    ):
        return current, best.mu  # tie: keep incumbent
    return best.control, best.mu


def _run(params: ModelParams, cfg: SimConfig, myopic: bool) -> Trajectory:
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    n_DI, n_DS, n_UI, n_US = cfg.initial_counts().as_tuple()
    n = cfg.n_agents

    notes: list[str] = []
    switches: list[SwitchEvent] = []
    if myopic:
        control, _ = _resolve_control(
            params, _dist_of([n_DI, n_DS, n_UI, n_US], n),
            ControlVector(0, 0, 0, 0), notes, 0.0)
    else:
        control = cfg.policy  # type: ignore[assignment]

    # per-event constants of the rate table
    dir_D = params.q_inf_D * params.v_H
    dir_U = params.q_inf_U * params.v_H
    q_D, q_U = params.q_rec_D, params.q_rec_U
    b_DD, b_DU = params.beta_DD / n, params.beta_DU / n
    b_UD, b_UU = params.beta_UD / n, params.beta_UU / n
    lam = params.lam

    def switch_rates(u: ControlVector) -> tuple[float, float, float, float]:
        return (lam * u.u_DS, lam * u.u_US, lam * u.u_DI, lam * u.u_UI)

    s_DS, s_US, s_DI, s_UI = switch_rates(control)

    n_samples = math.floor(cfg.horizon / cfg.sample_interval + 1e-9)
    sample_times = [i * cfg.sample_interval for i in range(n_samples + 1)]
    times: list[float] = []
    states: list[tuple[float, float, float, float]] = []
    cases: list[str] = []

    t = 0.0
    next_sample = 0
    per_event = myopic and cfg.myopic_recompute == "event"
    exponential = rng.exponential
    random = rng.random

    # sampling instants interrupt the exponential clock; redrawing the
    # waiting time afterwards is exact because the clock is memoryless
    # identical-move contact channels are bundled; zero-rate channels add
    # exactly nothing to the cumulative sum, so the walk matches `total`
    bundled_moves = ((1, 0), (3, 2), (0, 1), (2, 3),
                     (1, 0), (3, 2), (1, 3), (3, 1), (0, 2), (2, 0))
    counts4 = [n_DI, n_DS, n_UI, n_US]
    del n_DI, n_DS, n_UI, n_US

    while next_sample <= n_samples:
        c_DI, c_DS, c_UI, c_US = counts4
        rates10 = (
            c_DS * dir_D,
            c_US * dir_U,
            c_DI * q_D,
            c_UI * q_U,
            c_DS * (c_DI * b_DD + c_UI * b_UD),
            c_US * (c_DI * b_DU + c_UI * b_UU),
            c_DS * s_DS,
            c_US * s_US,
            c_DI * s_DI,
            c_UI * s_UI,
        )
        total = 0.0
        for r in rates10:
            total += r
        t_event = t + exponential(1.0 / total) if total > 0.0 else math.inf

        ts = sample_times[next_sample]
        if ts <= t_event:
            t = ts
            times.append(ts)
            states.append((c_DI / n, c_DS / n, c_UI / n, c_US / n))
            cases.append(_case_label(control))
            next_sample += 1
            if myopic and not per_event:
                new_control, mu = _resolve_control(
                    params, _dist_of(counts4, n), control, notes, ts)
                if new_control != control and mu is not None:
                    switches.append(SwitchEvent(ts, _case_label(control),
                                                _case_label(new_control), mu))
                    control = new_control
                    s_DS, s_US, s_DI, s_UI = switch_rates(control)
            continue

        # execute the jump at t_event
        t = t_event
        draw = random() * total
        acc = 0.0
        chosen = -1
        last_positive = -1
        for k in range(10):
            r = rates10[k]
            if r > 0.0:
                last_positive = k
                acc += r
                if draw < acc:
                    chosen = k
                    break
        if chosen < 0:
            chosen = last_positive  # draw rounded up to the total
        src, dst = bundled_moves[chosen]
        counts4[src] -= 1
        counts4[dst] += 1
        if per_event:
            new_control, mu = _resolve_control(
                params, _dist_of(counts4, n), control, notes, t)
            if new_control != control and mu is not None:
                switches.append(SwitchEvent(t, _case_label(control),
                                            _case_label(new_control), mu))
                control = new_control
                s_DS, s_US, s_DI, s_UI = switch_rates(control)

    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        cases=cases if myopic else None,
        switches=switches,
        notes=notes,
    )


def _dist_of(counts: list[int], n: int) -> StateDist:
    return StateDist(counts[0] / n, counts[1] / n, counts[2] / n, counts[3] / n)


def _case_label(control: ControlVector) -> str:
    case = control.case
    return case.label if case is not None else "".join(str(b) for b in control.as_tuple())


def simulate(params: ModelParams, cfg: SimConfig) -> Trajectory:
    """Run the exact jump simulation under a fixed control.

    Deterministic in (params, cfg): identical seeds give identical
    trajectories.  A zero total rate freezes the state until the horizon.
    """
    if not isinstance(cfg.policy, ControlVector):
        raise ValueError("simulate requires a fixed-control policy")
    return _run(params, cfg, myopic=False)


def simulate_myopic(params: ModelParams, cfg: SimConfig) -> Trajectory:
    """Run with the control re-derived from the optimality system as the
    empirical distribution moves; every control change is logged.

    Whether the answer stays near a stationary equilibrium is an open
    question; the trajectory is evidence, not a theorem.
    """
    if cfg.policy != MYOPIC:
        raise ValueError("simulate_myopic requires policy='myopic'")
    return _run(params, cfg, myopic=True)


@dataclass(frozen=True)
class DeviationStats:
    """Sup-norm gap between empirical runs and the kinetic solution."""

    mean: float
    std: float
    per_replica: tuple[float, ...]


def compare_ode(params: ModelParams,
                trajectories: Trajectory | list[Trajectory],
                u: ControlVector,
                ode_step: float | None = None) -> DeviationStats:
    """Deviation of empirical trajectories from the kinetic ODE.

    Integrates the ODE from each trajectory's own starting state, lands
    exactly on the sample times, and takes the sup over samples of the
    max-component deviation.  Mean and standard deviation are over
    replicas.
    """
    if isinstance(trajectories, Trajectory):
        trajectories = [trajectories]
    if not trajectories:
        raise ValueError("need at least one trajectory")
    devs = []
    for traj in trajectories:
        devs.append(_sup_deviation(params, traj, u, ode_step))
    arr = np.array(devs)
    return DeviationStats(mean=float(arr.mean()),
                          std=float(arr.std(ddof=1)) if len(devs) > 1 else 0.0,
                          per_replica=tuple(devs))


def _sup_deviation(params: ModelParams, traj: Trajectory, u: ControlVector,
                   ode_step: float | None) -> float:
    if len(traj.times) < 2:
        return 0.0
    dt = float(traj.times[1] - traj.times[0])
    horizon = float(traj.times[-1])
    if ode_step is None:
        ode_step = min(dt, 1e-2 / params.max_rate())
    substeps = max(1, math.ceil(dt / ode_step))
    x0 = traj.dist_at(0)
    path = integrate(params, x0, u, horizon, step=dt / substeps, sample_every=substeps)
    ode_states = np.array([state.as_array() for _, state in path])
    if len(ode_states) != len(traj.times):
        raise RuntimeError("ODE sampling misaligned with trajectory samples")
    return float(np.max(np.abs(ode_states - traj.states)))


def replica_trajectories(params: ModelParams, cfg: SimConfig,
                         replicas: int) -> list[Trajectory]:
    """Independent runs with per-replica streams seed + 0, 1, ..."""
    out = []
    for i in range(replicas):
        cfg_i = SimConfig(
            n_agents=cfg.n_agents, horizon=cfg.horizon, seed=cfg.seed + i,
            policy=cfg.policy, sample_interval=cfg.sample_interval,
            initial=cfg.initial, myopic_recompute=cfg.myopic_recompute)
        run = simulate if isinstance(cfg.policy, ControlVector) else simulate_myopic
        out.append(run(params, cfg_i))
    return out
