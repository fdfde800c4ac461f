"""Closed-loop simulation: fixed-step RK4 plant with zero-order-hold control.

The plant integrates at ``dt`` (default 1 ms); the controller runs at
``control_rate`` (default 500 Hz), which must be a whole number of
plant steps, and its command is held between updates.  Commands are
applied as re-allocated from the clamped rotor thrusts so that rotor
limits are physically effective.

A scenario diverges when any bounded angle leaves (-pi/2, pi/2) or any
state entry exceeds 1e6; the log up to the failure is preserved on the
raised :class:`DivergenceError`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import controller as ctrl
from . import dynamics, spatial
from .controller import ControlCommand, Setpoint
from .exceptions import (
    AngleBoundsError,
    ControlStageError,
    DivergenceError,
    ScenarioFormatError,
    SingularInertiaError,
)
from .params import Gains, GeneralizedState, Params

_STATE_MAGNITUDE_LIMIT = 1e6


@dataclass
class SetpointSegment:
    """Piecewise-constant reference active from ``t_start`` onward."""

    t_start: float
    setpoint: Setpoint


@dataclass
class DisturbanceEvent:
    """Impulsive swing-rate kick applied at ``time``."""

    time: float
    sigma_dot_kick: np.ndarray

    def __post_init__(self):
        self.sigma_dot_kick = np.asarray(self.sigma_dot_kick, dtype=float)
        if self.sigma_dot_kick.shape != (2,):
            raise ValueError("sigma_dot_kick must be a 2-vector")


@dataclass
class Scenario:
    """Full description of one closed-loop run."""

    initial: GeneralizedState
    segments: list[SetpointSegment]
    gains: Gains = field(default_factory=Gains)
    params: Params = field(default_factory=Params)
    duration: float = 5.0
    dt: float = 1e-3
    control_rate: float = 500.0
    mode: str = "cascade"  # "cascade" or "attitude"
    disturbances: list[DisturbanceEvent] = field(default_factory=list)
    name: str = "scenario"

    def __post_init__(self):
        if self.dt <= 0:
            raise ScenarioFormatError(f"dt must be positive, got {self.dt}")
        if self.duration < 0:
            raise ScenarioFormatError(f"duration must be non-negative, got {self.duration}")
        if self.control_rate <= 0:
            raise ScenarioFormatError("control_rate must be positive")
        if self.mode not in ("cascade", "attitude"):
            raise ScenarioFormatError(f"unknown mode {self.mode!r}")
        period = 1.0 / self.control_rate
        n = max(1, round(period / self.dt))
        if abs(n * self.dt - period) > 1e-9 * period:
            raise ScenarioFormatError(
                f"control period {period} is not an integer multiple of dt {self.dt}"
            )
        if not self.segments:
            raise ScenarioFormatError("scenario needs at least one setpoint segment")
        self.segments = sorted(self.segments, key=lambda s: s.t_start)
        if self.segments[0].t_start > 0.0:
            raise ScenarioFormatError("first setpoint segment must start at t <= 0")
        if self.mode == "attitude":
            for seg in self.segments:
                if seg.setpoint.eta_d is None:
                    raise ScenarioFormatError(
                        "attitude mode requires eta_d in every setpoint segment"
                    )
        self.disturbances = sorted(self.disturbances, key=lambda d: d.time)

    @property
    def steps_per_control(self) -> int:
        return max(1, round(1.0 / (self.control_rate * self.dt)))

    @property
    def n_steps(self) -> int:
        return round(self.duration / self.dt)


# CSV layout: time, state, rates, then per-cycle command intermediates,
# tension, Lyapunov values and energy.  Order is fixed; new columns only
# get appended.
CSV_COLUMNS = (
    ["t"]
    + [f"q{i}" for i in range(8)]
    + [f"qd{i}" for i in range(8)]
    + ["xidot_pd_x", "xidot_pd_y", "xidot_pd_z"]
    + ["e_xidot_p_x", "e_xidot_p_y", "e_xidot_p_z"]
    + ["phi_d", "theta_d", "psi_d", "alpha_d", "beta_d"]
    + ["F_l", "tau_eta_x", "tau_eta_y", "tau_eta_z"]
    + ["F1", "F2", "F3", "F4", "saturated", "F_td"]
    + ["Ft_x", "Ft_y", "Ft_z", "Ft_mag"]
    + ["V_eta", "V_sigma", "E"]
)


class TrajectoryLog:
    """Per-plant-step record of a run; column-oriented numpy arrays."""

    def __init__(self, n_samples: int):
        self.t = np.zeros(n_samples)
        self.q = np.zeros((n_samples, 8))
        self.qdot = np.zeros((n_samples, 8))
        self.qdd = np.zeros((n_samples, 8))
        self.xidot_pd = np.zeros((n_samples, 3))
        self.e_xidot_p = np.zeros((n_samples, 3))
        self.eta_d = np.zeros((n_samples, 3))
        self.sigma_d = np.zeros((n_samples, 2))
        self.f_l = np.zeros(n_samples)
        self.tau_eta = np.zeros((n_samples, 3))
        self.rotors = np.zeros((n_samples, 4))
        self.saturated = np.zeros(n_samples, dtype=bool)
        self.f_td = np.zeros(n_samples)
        self.f_t = np.zeros((n_samples, 3))
        self.f_t_mag = np.zeros(n_samples)
        self.v_eta = np.zeros(n_samples)
        self.v_sigma = np.zeros(n_samples)
        self.energy = np.zeros(n_samples)

    def __len__(self) -> int:
        return len(self.t)

    def _truncate(self, n: int) -> "TrajectoryLog":
        for name, value in vars(self).items():
            setattr(self, name, value[:n])
        return self

    def as_matrix(self) -> np.ndarray:
        """All CSV columns as one (n, len(CSV_COLUMNS)) array."""
        return np.column_stack(
            [
                self.t,
                self.q,
                self.qdot,
                self.xidot_pd,
                self.e_xidot_p,
                self.eta_d,
                self.sigma_d,
                self.f_l,
                self.tau_eta,
                self.rotors,
                self.saturated.astype(float),
                self.f_td,
                self.f_t,
                self.f_t_mag,
                self.v_eta,
                self.v_sigma,
                self.energy,
            ]
        )

    def to_csv(self, path) -> None:
        """Write the documented fixed-order CSV (deterministic bytes)."""
        data = self.as_matrix()
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for row in data:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")

    def final_state(self) -> GeneralizedState:
        return GeneralizedState(self.q[-1].copy(), self.qdot[-1].copy())


def inject_disturbance(state: GeneralizedState, event: DisturbanceEvent) -> GeneralizedState:
    """Apply an impulsive swing-rate kick; all other state is untouched."""
    out = state.copy()
    out.qdot[6:8] += event.sigma_dot_kick
    return out


def integrate_step(q, qdot, u, params: Params, dt: float):
    """One classical RK4 step of the plant with the input held constant."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    u = np.asarray(u, dtype=float)
    k1 = dynamics.forward_dynamics(q, qdot, u, params)
    return _rk4_rest(q, qdot, u, params, dt, k1)


def _rk4_rest(q, qdot, u, params, dt, k1):
    # Remaining three stages, reusing the caller's first-stage solve.
    half = 0.5 * dt
    qd2 = qdot + half * k1
    k2 = dynamics.forward_dynamics(q + half * qdot, qd2, u, params)
    qd3 = qdot + half * k2
    k3 = dynamics.forward_dynamics(q + half * qd2, qd3, u, params)
    qd4 = qdot + dt * k3
    k4 = dynamics.forward_dynamics(q + dt * qd3, qd4, u, params)
    q_next = q + (dt / 6.0) * (qdot + 2.0 * qd2 + 2.0 * qd3 + qd4)
    qdot_next = qdot + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return q_next, qdot_next


def _state_ok(q, qdot) -> bool:
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qdot))):
        return False
    if np.max(np.abs(q)) > _STATE_MAGNITUDE_LIMIT:
        return False
    if np.max(np.abs(qdot)) > _STATE_MAGNITUDE_LIMIT:
        return False
    phi, theta = q[3], q[4]
    alpha, beta = q[6], q[7]
    hp = spatial.HALF_PI
    return abs(phi) < hp and abs(theta) < hp and abs(alpha) < hp and abs(beta) < hp


def run_scenario(scenario: Scenario) -> TrajectoryLog:
    """Integrate a scenario to completion and return its log.

    Deterministic: the same scenario always produces identical samples.
    Controller failures propagate as :class:`ControlStageError`; plant
    breakdown raises :class:`DivergenceError` carrying the partial log.
    """
    params = scenario.params
    gains = scenario.gains
    dt = scenario.dt
    n_steps = scenario.n_steps
    steps_per_ctrl = scenario.steps_per_control

    log = TrajectoryLog(n_steps + 1)
    state = scenario.initial.copy()
    state.validate()

    segments = scenario.segments
    seg_idx = 0
    events = list(scenario.disturbances)
    # Snap each event to its nearest plant step.
    event_steps = [min(max(round(e.time / dt), 0), n_steps) for e in events]
    next_event = 0

    command: ControlCommand | None = None
    u_applied = np.zeros(4)
    step_fn = ctrl.cascade_step if scenario.mode == "cascade" else ctrl.attitude_command

    for i in range(n_steps + 1):
        t = i * dt

        while next_event < len(events) and event_steps[next_event] == i:
            state = inject_disturbance(state, events[next_event])
            next_event += 1

        while seg_idx + 1 < len(segments) and segments[seg_idx + 1].t_start <= t + 1e-12:
            seg_idx += 1
        setpoint = segments[seg_idx].setpoint

        if i % steps_per_ctrl == 0:
            command = step_fn(state, setpoint, gains, params)
            f_l_app, tau_b_app = ctrl.allocate(command.rotor_thrusts, params)
            rv = spatial.euler_rate_map(state.eta)
            u_applied = np.concatenate([[f_l_app], rv.T @ tau_b_app])

        try:
            terms = dynamics.model_terms(state.q, state.qdot, params)
            drag = dynamics.drag_forces(state.q, state.qdot, params, terms)
            qdd = dynamics.forward_dynamics(state.q, state.qdot, u_applied, params, terms)
        except (AngleBoundsError, SingularInertiaError) as exc:
            raise DivergenceError(
                f"plant evaluation failed at t={t:.4f}: {exc}", t, log._truncate(i)
            ) from exc

        _log_sample(log, i, t, state, qdd, u_applied, command, setpoint,
                    gains, params, terms, drag)

        if i == n_steps:
            break

        try:
            q_next, qd_next = _rk4_rest(state.q, state.qdot, u_applied, params, dt, qdd)
        except (AngleBoundsError, SingularInertiaError) as exc:
            raise DivergenceError(
                f"integration failed at t={t:.4f}: {exc}", t, log._truncate(i + 1)
            ) from exc
        if not _state_ok(q_next, qd_next):
            raise DivergenceError(
                f"state left the model validity region at t={t + dt:.4f}",
                t + dt,
                log._truncate(i + 1),
            )
        state = GeneralizedState(q_next, qd_next)

    return log


def _log_sample(log, i, t, state, qdd, u_applied, command, setpoint,
                gains, params, terms, drag):
    log.t[i] = t
    log.q[i] = state.q
    log.qdot[i] = state.qdot
    log.qdd[i] = qdd

    errors = ctrl.compute_errors(
        state, setpoint, gains, params,
        eta_d=command.eta_d, sigma_d=command.sigma_d, terms=terms,
    )
    log.xidot_pd[i] = setpoint.xidot_pd
    log.e_xidot_p[i] = errors.e_xidot_p
    log.eta_d[i] = command.eta_d
    log.sigma_d[i] = command.sigma_d
    log.f_l[i] = command.f_l
    log.tau_eta[i] = command.tau_eta
    log.rotors[i] = command.rotor_thrusts
    log.saturated[i] = command.saturated
    log.f_td[i] = command.f_td
    log.v_eta[i] = errors.v_eta()
    log.v_sigma[i] = errors.v_sigma()

    f_t = (
        terms.Rb[:, 2] * u_applied[0]
        - params.m_q * qdd[0:3]
        + params.m_q * params.g_vec
        + drag.d_xi_q
    )
    log.f_t[i] = f_t
    log.f_t_mag[i] = float(np.linalg.norm(f_t))

    kinetic = 0.5 * float(state.qdot @ terms.M @ state.qdot)
    z_p = state.q[2] + (terms.Rb @ params.L)[2] + (terms.Rp @ params.l_vec)[2]
    potential = -params.m_q * params.g * state.q[2] - params.m_p * params.g * z_p
    log.energy[i] = kinetic + potential
