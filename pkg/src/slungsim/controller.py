"""Cascade flight controller for the offset-slung-load quadrotor.

The control objective is load-velocity tracking.  One control cycle
runs the stages below in order; every intermediate is kept on the
returned command for logging.

1. Outer loop: desired cable-tension vector from the load-velocity
   error.
2. Tension decomposition: split the vector into a scalar tension and
   the swing-angle setpoint that realizes it.
3. Middle loop: virtual swing acceleration that tracks the swing
   setpoint; the physical handle is the suspension-point acceleration.
4. Decoupler: solve for the suspension-point acceleration that delivers
   both the virtual swing input and the scalar tension, then form the
   desired thrust vector, clamp it, and extract total thrust plus
   roll/pitch setpoints.
5. Inner loop: attitude torque with exact inversion of the attitude
   dynamics, feeding forward the torque the cable exerts through the
   offset lever arm.
6. Mixer: distribute thrust and body torque to the four rotors.

All stages are pure functions of their inputs; the controller keeps no
state between cycles, so a zero-order hold amounts to reusing the
returned command.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dynamics, spatial
from .dynamics import DragSet, ModelTerms, ReducedSwingTerms
from .exceptions import (
    AllocationError,
    ControlStageError,
    SingularInertiaError,
    SlungSimError,
    ThrustRegimeError,
)
from .params import Gains, GeneralizedState, Params


@dataclass
class Setpoint:
    """References for one control cycle.

    ``eta_d`` is only consulted in attitude-only mode; the cascade
    derives roll/pitch itself and takes yaw from ``psi_d``.  The
    acceleration feedforwards default to zero, matching step-style
    references whose derivatives vanish between switching instants.
    """

    xidot_pd: np.ndarray = field(default_factory=lambda: np.zeros(3))
    psi_d: float = 0.0
    eta_d: np.ndarray | None = None
    eta_dd_d: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sigma_dd_d: np.ndarray = field(default_factory=lambda: np.zeros(2))
    xi_pdd_d: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.xidot_pd = np.asarray(self.xidot_pd, dtype=float)
        if self.eta_d is not None:
            self.eta_d = np.asarray(self.eta_d, dtype=float)
        self.eta_dd_d = np.asarray(self.eta_dd_d, dtype=float)
        self.sigma_dd_d = np.asarray(self.sigma_dd_d, dtype=float)
        self.xi_pdd_d = np.asarray(self.xi_pdd_d, dtype=float)


@dataclass
class ErrorState:
    """Tracking errors; the e_p* entries are rate errors augmented with
    gain-weighted position errors, which is what the Lyapunov analysis
    of the loops contracts on."""

    e_xidot_p: np.ndarray
    e_eta: np.ndarray
    e_peta: np.ndarray
    e_sigma: np.ndarray
    e_psigma: np.ndarray

    def v_eta(self) -> float:
        """Attitude-loop Lyapunov value 0.5 ||(e_eta, e_peta)||^2."""
        return 0.5 * (float(self.e_eta @ self.e_eta) + float(self.e_peta @ self.e_peta))

    def v_sigma(self) -> float:
        """Swing-loop Lyapunov value 0.5 ||(e_sigma, e_psigma)||^2."""
        return 0.5 * (
            float(self.e_sigma @ self.e_sigma) + float(self.e_psigma @ self.e_psigma)
        )


@dataclass
class ControlCommand:
    """Actuation plus every intermediate worth logging."""

    f_l: float                  # total thrust [N], negative in flight
    tau_eta: np.ndarray         # generalized attitude torque [N m]
    tau_b: np.ndarray           # body-frame torque sent to the mixer
    rotor_thrusts: np.ndarray   # per-rotor thrust after clamping [N]
    saturated: bool             # thrust-vector clamp or rotor clamp engaged
    f_td_vec: np.ndarray        # desired tension vector [N]
    f_td: float                 # scalar tension along the desired load axis
    sigma_d: np.ndarray         # swing setpoint [rad]
    eta_d: np.ndarray           # attitude setpoint (phi_d, theta_d, psi_d)
    eta_dd_tr: np.ndarray       # commanded attitude acceleration
    sigma_dd_v: np.ndarray      # virtual swing acceleration
    xi_dd_d: np.ndarray         # commanded suspension-point acceleration
    f_t_pred: np.ndarray        # predicted cable tension [N]
    tau_ft: np.ndarray          # tension feedforward torque [N m]
    errors: ErrorState

    @property
    def u(self) -> np.ndarray:
        """Generalized input [F_l, tau_eta] consumed by the plant."""
        return np.concatenate([[self.f_l], self.tau_eta])


def compute_errors(
    state: GeneralizedState,
    setpoint: Setpoint,
    gains: Gains,
    params: Params,
    eta_d=None,
    sigma_d=None,
    terms: ModelTerms | None = None,
) -> ErrorState:
    """Tracking errors against the given (or zero) attitude/swing setpoints.

    Rate references are zero: setpoints are piecewise constant.
    """
    if eta_d is None:
        eta_d = np.array([0.0, 0.0, setpoint.psi_d])
    if sigma_d is None:
        sigma_d = np.zeros(2)
    xidot_p = dynamics.load_velocity(state.q, state.qdot, params, terms)
    e_xidot_p = setpoint.xidot_pd - xidot_p
    e_eta = np.asarray(eta_d, dtype=float) - state.eta
    e_peta = -state.eta_dot + gains.k_eta * e_eta
    e_sigma = np.asarray(sigma_d, dtype=float) - state.sigma
    e_psigma = -state.sigma_dot + gains.k_sigma * e_sigma
    return ErrorState(e_xidot_p, e_eta, e_peta, e_sigma, e_psigma)


def outer_velocity_law(
    errors: ErrorState,
    setpoint: Setpoint,
    gains: Gains,
    params: Params,
    drag: DragSet,
    c_xi_qdot,
) -> np.ndarray:
    """Desired tension vector driving the load-velocity error to zero.

    ``c_xi_qdot`` is the translational Coriolis product (the rows of
    C qd acting on the position coordinates).
    """
    return (
        gains.k_xidot_p * errors.e_xidot_p
        + params.m_p * setpoint.xi_pdd_d
        + np.asarray(c_xi_qdot, dtype=float)
        - params.m_p * params.g_vec
        - drag.d_xi_p
    )


def tension_decompose(f_td_vec) -> tuple[float, float, float]:
    """Split a desired tension vector into magnitude and swing setpoint.

    Solving R_load(alpha_d, beta_d) [0, 0, F_td] = f_td_vec gives

        beta_d  = atan(F_x / F_z)
        alpha_d = -atan(F_y cos(beta_d) / F_z)
        F_td    = F_z / (cos(alpha_d) cos(beta_d))

    valid when F_z < 0 (cable loaded, no aggressive vertical flight);
    both angles then land strictly inside (-pi/2, pi/2) and the
    reconstruction is exact.
    """
    f = np.asarray(f_td_vec, dtype=float)
    if f[2] >= 0.0:
        raise ThrustRegimeError(
            f"tension z-component must be negative, got {f[2]:.4f}"
        )
    beta_d = float(np.arctan(f[0] / f[2]))
    alpha_d = float(np.arctan(-f[1] * np.cos(beta_d) / f[2]))
    f_td = float(f[2] / (np.cos(alpha_d) * np.cos(beta_d)))
    return f_td, alpha_d, beta_d


def middle_swing_law(
    errors: ErrorState,
    setpoint: Setpoint,
    gains: Gains,
    reduced: ReducedSwingTerms,
    drag: DragSet,
) -> np.ndarray:
    """Virtual swing acceleration tracking the swing setpoint.

    The dynamic compensation uses the swing-row Coriolis product taken
    with the full generalized rate.
    """
    k, kp = gains.k_sigma, gains.k_psigma
    feedback = (
        setpoint.sigma_dd_d
        + (1.0 - k * k) * errors.e_sigma
        + (k + kp) * errors.e_psigma
    )
    m1_diag = np.array([reduced.m_s1[0, 0], reduced.m_s1[1, 1]])
    compensation = (reduced.c_sigma_qdot + reduced.g_sigma - drag.d_sigma) / m1_diag
    return feedback + compensation


def acceleration_decoupler(
    sigma,
    sigma_dd_v,
    f_td: float,
    drag: DragSet,
    params: Params,
) -> np.ndarray:
    """Suspension-point acceleration delivering the virtual swing input
    and the scalar tension simultaneously.

    The two requirements pin the acceleration component along the cable
    (kappa, from the load's force balance along its axis) and the two
    components that rotate the cable (from sigma_dd_v); the closed-form
    solution below satisfies both exactly.
    """
    spatial.check_swing_bounds(sigma)
    if params.m_p <= 0.0:
        raise SingularInertiaError("decoupler undefined for a massless load")
    alpha, beta = float(sigma[0]), float(sigma[1])
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    load_axis = np.array([ca * sb, -sa, ca * cb])  # third row of R_inertial->load
    kappa = (f_td + load_axis @ (drag.d_xi_p + params.m_p * params.g_vec)) / params.m_p
    add_v, bdd_v = float(sigma_dd_v[0]), float(sigma_dd_v[1])
    l = params.l
    return np.array(
        [
            ca * sb * kappa - l * ca * cb * bdd_v + l * sa * sb * add_v,
            l * ca * add_v - sa * kappa,
            ca * cb * kappa + l * ca * sb * bdd_v + l * sa * cb * add_v,
        ]
    )


def desired_thrust_vector(
    xi_dd_d,
    f_td: float,
    sigma_d,
    drag: DragSet,
    params: Params,
) -> np.ndarray:
    """Unclamped thrust vector realizing the commanded suspension-point
    acceleration while reacting the cable tension at its desired attitude."""
    r_pd = spatial.rot_load_to_inertial(sigma_d)
    return (
        params.m_q * np.asarray(xi_dd_d, dtype=float)
        + r_pd @ np.array([0.0, 0.0, f_td])
        - params.m_q * params.g_vec
        - drag.d_xi_q
    )


def thrust_saturation(f_ld, f_up: float) -> tuple[np.ndarray, bool]:
    """Clamp the desired thrust vector to the total-thrust bound.

    Overlong vectors keep their vertical component and scale the
    horizontal one down to the bound; a vertical component beyond the
    bound collapses to straight-up thrust.  Returns the clamped vector
    and whether clamping occurred.
    """
    f = np.asarray(f_ld, dtype=float)
    if f_up <= 0.0:
        raise ValueError("thrust bound must be positive")
    if f[2] >= 0.0:
        raise ThrustRegimeError(
            f"desired thrust must point up (z < 0), got z = {f[2]:.4f}"
        )
    if f[2] < -f_up:
        return np.array([0.0, 0.0, -f_up]), True
    norm_sq = float(f @ f)
    if norm_sq > f_up * f_up:
        h = np.sqrt(f_up * f_up - f[2] * f[2]) / np.sqrt(norm_sq - f[2] * f[2])
        return np.array([h * f[0], h * f[1], f[2]]), True
    return f.copy(), False


def attitude_decoupler(f_ld_r, psi: float) -> tuple[float, float, float]:
    """Extract (phi_d, theta_d, F_l) so that rotating [0, 0, F_l]
    through (phi_d, theta_d, psi) reproduces the clamped thrust vector.

    Requires a negative vertical component; the solution keeps both
    tilt setpoints strictly inside (-pi/2, pi/2) and round-trips
    exactly.
    """
    f = np.asarray(f_ld_r, dtype=float)
    if f[2] >= 0.0:
        raise ThrustRegimeError(
            f"thrust vector z-component must be negative, got {f[2]:.4f}"
        )
    cpsi, spsi = np.cos(psi), np.sin(psi)
    fx = f[0] * cpsi + f[1] * spsi
    fy = -f[0] * spsi + f[1] * cpsi
    theta_d = float(np.arctan(fx / f[2]))
    phi_d = float(np.arctan(-fy * np.cos(theta_d) / f[2]))
    f_l = float(f[2] / (np.cos(phi_d) * np.cos(theta_d)))
    return phi_d, theta_d, f_l


def attitude_reference_acceleration(errors: ErrorState, gains: Gains) -> np.ndarray:
    """Commanded attitude acceleration from the augmented errors."""
    k, kp = gains.k_eta, gains.k_peta
    return (1.0 - k * k) * errors.e_eta + (k + kp) * errors.e_peta


def tension_feedforward(
    state: GeneralizedState,
    eta_dd_tr,
    sigma_dd_v,
    f_l: float,
    params: Params,
    drag: DragSet,
    terms: ModelTerms,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Predict the cable tension one cycle ahead and its torque.

    The load acceleration follows from the combined translational force
    balance of vehicle and load, with the rotation second derivatives
    evaluated at the commanded attitude/swing accelerations.  The
    resulting tension acts at the offset lever arm and its moment is
    mapped into attitude space; the inner loop must cancel it.

    Returns (tension vector, feedforward torque, predicted load accel).
    """
    eta_dot = state.eta_dot
    sigma_dot = state.sigma_dot
    eta_dd_tr = np.asarray(eta_dd_tr, dtype=float)
    sigma_dd_v = np.asarray(sigma_dd_v, dtype=float)

    rb_dd = np.einsum(
        "ijkl,i,j->kl", terms.d2Rb, eta_dot, eta_dot
    ) + np.einsum("ikl,i->kl", terms.dRb, eta_dd_tr)
    rp_dd = np.einsum(
        "ijkl,i,j->kl", terms.d2Rp, sigma_dot, sigma_dot
    ) + np.einsum("ikl,i->kl", terms.dRp, sigma_dd_v)

    xi_pdd = (
        terms.Rb[:, 2] * f_l
        + params.m_q * (rb_dd @ params.L + rp_dd @ params.l_vec)
        + drag.d_xi_q
        + drag.d_xi_p
    ) / params.total_mass + params.g_vec

    f_t = params.m_p * xi_pdd - params.m_p * params.g_vec - drag.d_xi_p
    tau_ft = terms.Rv.T @ (-dynamics._cross3(params.L, terms.Rb.T @ f_t))
    return f_t, tau_ft, xi_pdd


def inner_attitude_law(
    state: GeneralizedState,
    eta_dd_tr,
    setpoint: Setpoint,
    tau_ft,
    params: Params,
    drag: DragSet,
    terms: ModelTerms,
) -> np.ndarray:
    """Attitude torque that makes the closed attitude dynamics follow
    the commanded acceleration exactly (inversion-based)."""
    c_eta = dynamics.attitude_coriolis(state.eta, state.eta_dot, params)
    return (
        terms.Jq @ (np.asarray(eta_dd_tr, dtype=float) + setpoint.eta_dd_d)
        - np.asarray(tau_ft, dtype=float)
        + c_eta @ state.eta_dot
        - drag.d_eta
    )


def allocation_matrix(params: Params) -> np.ndarray:
    """Forward map from rotor thrusts to [F_l, tau_b] for the X layout.

    Rotors 1..4 sit front-left, rear-right, front-right, rear-left at
    arm l_r; thrust pulls along body -z, so lifting thrusts are
    positive while F_l comes out negative.
    """
    a = params.arm_diag
    c = params.c_q
    if a == 0.0 or c == 0.0:
        raise AllocationError("rotor arm and torque coefficient must be nonzero")
    return np.array(
        [
            [-1.0, -1.0, -1.0, -1.0],
            [-a, a, a, -a],
            [a, -a, a, -a],
            [c, c, -c, -c],
        ]
    )


def allocate(rotor_thrusts, params: Params) -> tuple[float, np.ndarray]:
    """Total thrust and body torque produced by the given rotor thrusts."""
    w = allocation_matrix(params) @ np.asarray(rotor_thrusts, dtype=float)
    return float(w[0]), w[1:4]


def mixer(f_l: float, tau_b, params: Params) -> tuple[np.ndarray, bool]:
    """Invert the allocation exactly, then clamp each rotor to its limits.

    Returns the clamped thrusts and whether any rotor hit a limit; the
    caller decides whether to re-derive the realized wrench from the
    clamped values.
    """
    A = allocation_matrix(params)
    wrench = np.concatenate([[float(f_l)], np.asarray(tau_b, dtype=float)])
    raw = np.linalg.solve(A, wrench)
    clamped = np.clip(raw, params.rotor_min, params.rotor_max)
    return clamped, bool(np.any(clamped != raw))


def _body_torque(tau_eta, Rv) -> np.ndarray:
    # Generalized attitude torque relates to body torque via tau_eta = Rv^T tau_b.
    return np.linalg.solve(Rv.T, np.asarray(tau_eta, dtype=float))


def cascade_step(
    state: GeneralizedState,
    setpoint: Setpoint,
    gains: Gains,
    params: Params,
) -> ControlCommand:
    """Run one full control cycle.  Pure function of its arguments."""
    state.validate()
    terms = dynamics.model_terms(state.q, state.qdot, params)
    drag = dynamics.drag_forces(state.q, state.qdot, params, terms)

    try:
        errors0 = compute_errors(state, setpoint, gains, params, terms=terms)
        c_xi_qdot = terms.C[0:3, :] @ state.qdot
        f_td_vec = outer_velocity_law(errors0, setpoint, gains, params, drag, c_xi_qdot)
    except SlungSimError as exc:
        raise ControlStageError("outer-velocity", exc) from exc

    try:
        f_td, alpha_d, beta_d = tension_decompose(f_td_vec)
        sigma_d = np.array([alpha_d, beta_d])
    except SlungSimError as exc:
        raise ControlStageError("tension-decomposition", exc) from exc

    try:
        reduced = dynamics.reduced_swing_terms(state.q, state.qdot, params, terms)
        errors = compute_errors(
            state, setpoint, gains, params, sigma_d=sigma_d, terms=terms
        )
        sigma_dd_v = middle_swing_law(errors, setpoint, gains, reduced, drag)
    except SlungSimError as exc:
        raise ControlStageError("middle-swing", exc) from exc

    try:
        xi_dd_d = acceleration_decoupler(state.sigma, sigma_dd_v, f_td, drag, params)
        f_ld = desired_thrust_vector(xi_dd_d, f_td, sigma_d, drag, params)
        f_ld_r, vec_saturated = thrust_saturation(f_ld, params.F_up)
        phi_d, theta_d, f_l = attitude_decoupler(f_ld_r, state.eta[2])
        eta_d = np.array([phi_d, theta_d, setpoint.psi_d])
    except SlungSimError as exc:
        raise ControlStageError("decoupler", exc) from exc

    try:
        errors = compute_errors(
            state, setpoint, gains, params, eta_d=eta_d, sigma_d=sigma_d, terms=terms
        )
        eta_dd_tr = attitude_reference_acceleration(errors, gains)
        f_t_pred, tau_ft, _ = tension_feedforward(
            state, eta_dd_tr, sigma_dd_v, f_l, params, drag, terms
        )
        tau_eta = inner_attitude_law(
            state, eta_dd_tr, setpoint, tau_ft, params, drag, terms
        )
    except SlungSimError as exc:
        raise ControlStageError("inner-attitude", exc) from exc

    try:
        tau_b = _body_torque(tau_eta, terms.Rv)
        rotors, rotor_saturated = mixer(f_l, tau_b, params)
    except SlungSimError as exc:
        raise ControlStageError("mixer", exc) from exc

    return ControlCommand(
        f_l=f_l,
        tau_eta=tau_eta,
        tau_b=tau_b,
        rotor_thrusts=rotors,
        saturated=vec_saturated or rotor_saturated,
        f_td_vec=f_td_vec,
        f_td=f_td,
        sigma_d=sigma_d,
        eta_d=eta_d,
        eta_dd_tr=eta_dd_tr,
        sigma_dd_v=sigma_dd_v,
        xi_dd_d=xi_dd_d,
        f_t_pred=f_t_pred,
        tau_ft=tau_ft,
        errors=errors,
    )


def attitude_command(
    state: GeneralizedState,
    setpoint: Setpoint,
    gains: Gains,
    params: Params,
) -> ControlCommand:
    """Attitude-only cycle with the outer and middle loops disabled.

    Used by attitude-step scenarios: thrust is held at the hover value,
    the swing virtual input is zero, and ``setpoint.eta_d`` is tracked
    directly.
    """
    if setpoint.eta_d is None:
        raise ControlStageError(
            "inner-attitude", ValueError("attitude mode requires setpoint.eta_d")
        )
    state.validate()
    terms = dynamics.model_terms(state.q, state.qdot, params)
    drag = dynamics.drag_forces(state.q, state.qdot, params, terms)
    sigma_d = np.zeros(2)
    sigma_dd_v = np.zeros(2)
    f_l = params.hover_thrust()

    try:
        errors = compute_errors(
            state, setpoint, gains, params,
            eta_d=setpoint.eta_d, sigma_d=sigma_d, terms=terms,
        )
        eta_dd_tr = attitude_reference_acceleration(errors, gains)
        f_t_pred, tau_ft, _ = tension_feedforward(
            state, eta_dd_tr, sigma_dd_v, f_l, params, drag, terms
        )
        tau_eta = inner_attitude_law(
            state, eta_dd_tr, setpoint, tau_ft, params, drag, terms
        )
    except SlungSimError as exc:
        raise ControlStageError("inner-attitude", exc) from exc

    try:
        tau_b = _body_torque(tau_eta, terms.Rv)
        rotors, rotor_saturated = mixer(f_l, tau_b, params)
    except SlungSimError as exc:
        raise ControlStageError("mixer", exc) from exc

    return ControlCommand(
        f_l=f_l,
        tau_eta=tau_eta,
        tau_b=tau_b,
        rotor_thrusts=rotors,
        saturated=rotor_saturated,
        f_td_vec=np.zeros(3),
        f_td=0.0,
        sigma_d=sigma_d,
        eta_d=np.asarray(setpoint.eta_d, dtype=float),
        eta_dd_tr=eta_dd_tr,
        sigma_dd_v=sigma_dd_v,
        xi_dd_d=np.zeros(3),
        f_t_pred=f_t_pred,
        tau_ft=tau_ft,
        errors=errors,
    )
