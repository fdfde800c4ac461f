import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slungsim import (
    Gains,
    GeneralizedState,
    Params,
    Setpoint,
    cascade_step,
    dynamics,
    forward_dynamics,
    hover_state,
    spatial,
)
from slungsim import controller as ctrl
from slungsim.controller import ErrorState, attitude_command
from slungsim.dynamics import DragSet, ReducedSwingTerms
from slungsim.exceptions import (
    AllocationError,
    ControlStageError,
    ThrustRegimeError,
)
from slungsim.verify import check_inner_linearization, sample_state

FORCE_XY = st.floats(-20.0, 20.0)
FORCE_Z = st.floats(-30.0, -0.1)


def _zero_errors():
    return ErrorState(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(2), np.zeros(2))


def test_errors_zero_when_tracking(params, gains):
    state = hover_state()
    errors = ctrl.compute_errors(state, Setpoint(), gains, params)
    assert np.all(errors.e_xidot_p == 0.0)
    assert np.all(errors.e_eta == 0.0)
    assert np.all(errors.e_peta == 0.0)
    assert np.all(errors.e_sigma == 0.0)
    assert np.all(errors.e_psigma == 0.0)


def test_errors_gain_weighting(params, gains):
    state = hover_state()
    eta_d = np.array([0.1, 0.0, 0.0])
    errors = ctrl.compute_errors(state, Setpoint(), gains, params, eta_d=eta_d)
    assert errors.e_peta == pytest.approx([1.36, 0.0, 0.0])


def test_errors_load_velocity_channel(params, gains):
    state = hover_state()
    sp = Setpoint(xidot_pd=np.array([1.5, 0.0, 0.0]))
    errors = ctrl.compute_errors(state, sp, gains, params)
    assert errors.e_xidot_p == pytest.approx([1.5, 0.0, 0.0])


def test_outer_law_hover(params, gains):
    f_td = ctrl.outer_velocity_law(
        _zero_errors(), Setpoint(), gains, params, DragSet.zero(), np.zeros(3)
    )
    assert f_td == pytest.approx([0.0, 0.0, -params.m_p * params.g])


def test_outer_law_is_additive_in_error(params, gains):
    errors = _zero_errors()
    errors.e_xidot_p = np.array([1.0, 0.0, 0.0])
    f_td = ctrl.outer_velocity_law(
        errors, Setpoint(), gains, params, DragSet.zero(), np.zeros(3)
    )
    assert f_td == pytest.approx([1.4, 0.0, -params.m_p * params.g])


def test_outer_law_acceleration_feedforward(params, gains):
    sp = Setpoint(xi_pdd_d=np.array([0.0, 0.0, -1.0]))
    f_td = ctrl.outer_velocity_law(
        _zero_errors(), sp, gains, params, DragSet.zero(), np.zeros(3)
    )
    assert f_td[2] == pytest.approx(-params.m_p - params.m_p * params.g)


def test_tension_decompose_straight_down():
    f_td, alpha_d, beta_d = ctrl.tension_decompose([0.0, 0.0, -0.6472])
    assert (f_td, alpha_d, beta_d) == (-0.6472, 0.0, 0.0)


def test_tension_decompose_known_roll():
    # Construct the vector from the expected answer, then recover it.
    expected = (-0.7473, np.radians(-30.0), 0.0)
    vec = spatial.rot_load_to_inertial(expected[1:]) @ np.array([0, 0, expected[0]])
    f_td, alpha_d, beta_d = ctrl.tension_decompose(vec)
    assert f_td == pytest.approx(expected[0], abs=1e-12)
    assert alpha_d == pytest.approx(expected[1], abs=1e-12)
    assert beta_d == pytest.approx(expected[2], abs=1e-12)


def test_tension_decompose_regime_error():
    with pytest.raises(ThrustRegimeError):
        ctrl.tension_decompose([1.0, 0.0, 0.1])


@settings(max_examples=300, deadline=None)
@given(FORCE_XY, FORCE_XY, FORCE_Z)
def test_tension_decompose_round_trip(fx, fy, fz):
    vec = np.array([fx, fy, fz])
    f_td, alpha_d, beta_d = ctrl.tension_decompose(vec)
    assert abs(alpha_d) < np.pi / 2 and abs(beta_d) < np.pi / 2
    rebuilt = spatial.rot_load_to_inertial((alpha_d, beta_d)) @ np.array([0, 0, f_td])
    assert np.abs(rebuilt - vec).max() < 1e-10


def test_middle_law_equilibrium(params, gains):
    reduced = dynamics.reduced_swing_terms(np.zeros(8), np.zeros(8), params)
    out = ctrl.middle_swing_law(_zero_errors(), Setpoint(), gains, reduced, DragSet.zero())
    assert out == pytest.approx([0.0, 0.0], abs=1e-15)


def test_middle_law_feedback_arithmetic(gains):
    errors = _zero_errors()
    errors.e_sigma = np.array([0.1, 0.0])
    errors.e_psigma = np.array([0.32, 0.0])
    reduced = ReducedSwingTerms(
        m_s1=np.eye(2), m_s2=np.zeros((2, 3)), m_s=np.zeros((2, 3)),
        c_sigma_qtilde=np.zeros(2), c_sigma_qdot=np.zeros(2), g_sigma=np.zeros(2),
    )
    out = ctrl.middle_swing_law(errors, Setpoint(), gains, reduced, DragSet.zero())
    assert out[0] == pytest.approx((1 - 3.2**2) * 0.1 + (3.2 + 3.2) * 0.32)
    assert out[0] == pytest.approx(1.124)


def test_decoupler_hover_is_zero(params):
    f_td = -params.m_p * params.g
    out = ctrl.acceleration_decoupler(np.zeros(2), np.zeros(2), f_td, DragSet.zero(), params)
    assert out == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)


def test_decoupler_axis_component(params):
    # kappa = 1 at zero swing commands a pure vertical acceleration.
    f_td = params.m_p * 1.0 - params.m_p * params.g
    out = ctrl.acceleration_decoupler(np.zeros(2), np.zeros(2), f_td, DragSet.zero(), params)
    assert out == pytest.approx([0.0, 0.0, 1.0], abs=1e-12)


def test_decoupler_swing_component(params):
    f_td = -params.m_p * params.g  # kappa = 0
    out = ctrl.acceleration_decoupler(
        np.zeros(2), np.array([0.0, 1.0]), f_td, DragSet.zero(), params
    )
    assert out == pytest.approx([-params.l, 0.0, 0.0], abs=1e-12)


def test_desired_thrust_hover(params):
    f_ld = ctrl.desired_thrust_vector(
        np.zeros(3), -params.m_p * params.g, np.zeros(2), DragSet.zero(), params
    )
    assert f_ld == pytest.approx([0.0, 0.0, -params.total_mass * params.g])


def test_desired_thrust_acceleration_term(params):
    base = ctrl.desired_thrust_vector(
        np.zeros(3), -params.m_p * params.g, np.zeros(2), DragSet.zero(), params
    )
    shifted = ctrl.desired_thrust_vector(
        np.array([1.0, 0.0, 0.0]), -params.m_p * params.g, np.zeros(2),
        DragSet.zero(), params,
    )
    assert (shifted - base) == pytest.approx([params.m_q, 0.0, 0.0])


def test_saturation_passthrough(params):
    f = np.array([1.0, 2.0, -10.0])
    out, saturated = ctrl.thrust_saturation(f, params.F_up)
    assert not saturated
    assert np.array_equal(out, f)


def test_saturation_vertical_cap():
    out, saturated = ctrl.thrust_saturation(np.array([5.0, -3.0, -40.0]), 20.0)
    assert saturated
    assert np.array_equal(out, [0.0, 0.0, -20.0])


def test_saturation_horizontal_scaling():
    out, saturated = ctrl.thrust_saturation(np.array([30.0, 0.0, -10.0]), 20.0)
    assert saturated
    h = np.sqrt(400.0 - 100.0) / np.sqrt(1000.0 - 100.0)
    assert h == pytest.approx(0.57735, abs=1e-5)
    assert out == pytest.approx([30.0 * h, 0.0, -10.0])
    assert np.linalg.norm(out) == pytest.approx(20.0, abs=1e-12)


def test_saturation_rejects_downward_thrust():
    with pytest.raises(ThrustRegimeError):
        ctrl.thrust_saturation(np.array([1.0, 0.0, 0.5]), 20.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(-60, 60), st.floats(-60, 60), st.floats(-80, -0.1))
def test_saturation_never_exceeds_bound(fx, fy, fz):
    out, _ = ctrl.thrust_saturation(np.array([fx, fy, fz]), 20.0)
    assert np.linalg.norm(out) <= 20.0 + 1e-9
    assert out[2] < 0.0


def test_attitude_decoupler_vertical():
    phi_d, theta_d, f_l = ctrl.attitude_decoupler([0.0, 0.0, -10.0], 0.0)
    assert (phi_d, theta_d, f_l) == (0.0, 0.0, -10.0)


def test_attitude_decoupler_known_pitch():
    phi_d, theta_d, f_l = ctrl.attitude_decoupler([1.0, 0.0, -1.0], 0.0)
    assert phi_d == pytest.approx(0.0, abs=1e-15)
    assert theta_d == pytest.approx(np.radians(-45.0), abs=1e-12)
    assert f_l == pytest.approx(-np.sqrt(2.0), abs=1e-12)


def test_attitude_decoupler_regime_error():
    with pytest.raises(ThrustRegimeError):
        ctrl.attitude_decoupler([1.0, 0.0, 0.0], 0.0)


@settings(max_examples=300, deadline=None)
@given(FORCE_XY, FORCE_XY, FORCE_Z, st.floats(-np.pi, np.pi))
def test_attitude_decoupler_round_trip(fx, fy, fz, psi):
    vec = np.array([fx, fy, fz])
    phi_d, theta_d, f_l = ctrl.attitude_decoupler(vec, psi)
    assert abs(phi_d) < np.pi / 2 and abs(theta_d) < np.pi / 2
    rebuilt = spatial.rot_body_to_inertial((phi_d, theta_d, psi)) @ np.array([0, 0, f_l])
    assert np.abs(rebuilt - vec).max() < 1e-10


def test_attitude_reference_acceleration_values(gains):
    errors = _zero_errors()
    errors.e_eta = np.array([0.1, 0.0, 0.0])
    out = ctrl.attitude_reference_acceleration(errors, gains)
    assert out == pytest.approx([(1 - 13.6**2) * 0.1, 0.0, 0.0])
    assert out[0] == pytest.approx(-18.396)

    errors = _zero_errors()
    errors.e_peta = np.array([0.0, 0.1, 0.0])
    out = ctrl.attitude_reference_acceleration(errors, gains)
    assert out == pytest.approx([0.0, 2.72, 0.0])


def test_tension_feedforward_zero_offset(params, rng):
    p = Params(L=np.zeros(3))
    st_ = sample_state(rng)
    terms = dynamics.model_terms(st_.q, st_.qdot, p)
    _, tau_ft, _ = ctrl.tension_feedforward(
        st_, np.zeros(3), np.zeros(2), -13.0, p, DragSet.zero(), terms
    )
    assert np.all(tau_ft == 0.0)


def test_tension_feedforward_hover_lever_arm(params):
    state = hover_state()
    terms = dynamics.model_terms(state.q, state.qdot, params)
    f_t, tau_ft, xi_pdd = ctrl.tension_feedforward(
        state, np.zeros(3), np.zeros(2), params.hover_thrust(), params,
        DragSet.zero(), terms,
    )
    weight = params.m_p * params.g
    assert np.abs(xi_pdd).max() < 1e-9
    assert f_t == pytest.approx([0.0, 0.0, -weight], abs=1e-12)
    # Lever arm L = (-0.12, 0, -0.05): pure pitch moment.
    assert tau_ft == pytest.approx([0.0, weight * (-params.L[0]), 0.0], abs=1e-12)
    assert tau_ft[1] == pytest.approx(0.0776952, abs=1e-7)


def test_inner_law_equilibrium_cancels_tension_torque(params, gains):
    state = hover_state()
    terms = dynamics.model_terms(state.q, state.qdot, params)
    tau_ft = np.array([0.0, 0.0776952, 0.0])
    tau_eta = ctrl.inner_attitude_law(
        state, np.zeros(3), Setpoint(), tau_ft, params, DragSet.zero(), terms
    )
    assert tau_eta == pytest.approx(-tau_ft)


def test_inner_linearization_identity(params, gains, rng):
    result = check_inner_linearization(rng, params, gains, n=50)
    assert result.passed, result.line()
    assert result.measured < 1e-8


def test_allocate_symmetric_thrust(params):
    f = 2.5
    f_l, tau_b = ctrl.allocate([f, f, f, f], params)
    assert f_l == pytest.approx(-4 * f)
    assert tau_b == pytest.approx([0.0, 0.0, 0.0], abs=1e-15)


def test_mixer_even_split_for_pure_thrust(params):
    f_l = -params.total_mass * params.g
    rotors, clamped = ctrl.mixer(f_l, np.zeros(3), params)
    assert not clamped
    assert rotors == pytest.approx(np.full(4, -f_l / 4))
    assert rotors[0] == pytest.approx(3.399165, abs=1e-6)


def test_mixer_round_trip(params, rng):
    # Yaw torque maps to large thrust differentials (1/(4 c_q)), so keep
    # the sampled wrenches inside the rotor limits.
    for _ in range(100):
        f_l = rng.uniform(-25.0, -10.0)
        tau_b = rng.uniform(-0.1, 0.1, 3)
        rotors, clamped = ctrl.mixer(f_l, tau_b, params)
        assert not clamped
        f_l_back, tau_back = ctrl.allocate(rotors, params)
        assert abs(f_l_back - f_l) < 1e-10
        assert np.abs(tau_back - tau_b).max() < 1e-10


def test_mixer_clamps_and_flags():
    p = Params(rotor_min=0.0, rotor_max=4.0)
    rotors, clamped = ctrl.mixer(-30.0, np.zeros(3), p)
    assert clamped
    assert np.all(rotors <= 4.0)


def test_allocation_requires_nonzero_coefficients():
    p = Params(c_q=0.0)
    with pytest.raises(AllocationError):
        ctrl.mixer(-10.0, np.zeros(3), p)


def test_cascade_hover_command(params, gains):
    state = hover_state()
    cmd = cascade_step(state, Setpoint(), gains, params)
    assert cmd.f_l == pytest.approx(-params.total_mass * params.g, abs=1e-6)
    expected_tau = dynamics.gravity_vector(np.zeros(8), params)[3:6]
    assert cmd.tau_eta == pytest.approx(expected_tau, abs=1e-6)
    assert cmd.sigma_d == pytest.approx([0.0, 0.0], abs=1e-12)
    assert cmd.eta_d == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)
    assert not cmd.saturated
    # Closing the loop at the equilibrium leaves the plant at rest.
    qdd = forward_dynamics(state.q, state.qdot, cmd.u, params)
    assert np.abs(qdd).max() < 1e-9


def test_cascade_is_deterministic(params, gains, rng):
    st_ = sample_state(rng, angle_limit=0.3, rate_limit=0.5)
    sp = Setpoint(xidot_pd=np.array([0.5, -0.2, 0.1]))
    first = cascade_step(st_, sp, gains, params)
    second = cascade_step(st_, sp, gains, params)
    assert first.f_l == second.f_l
    assert np.array_equal(first.tau_eta, second.tau_eta)
    assert np.array_equal(first.rotor_thrusts, second.rotor_thrusts)


def test_cascade_lateral_step_rolls_load_toward_target(params, gains):
    state = hover_state()
    sp = Setpoint(xidot_pd=np.array([0.0, 1.5, 0.0]))
    cmd = cascade_step(state, sp, gains, params)
    assert cmd.sigma_d[0] > 0.0
    # The commanded tension pulls the load toward +y.
    assert cmd.f_td_vec[1] > 0.0
    rebuilt = spatial.rot_load_to_inertial(cmd.sigma_d) @ np.array([0, 0, cmd.f_td])
    assert rebuilt[1] > 0.0


def test_cascade_stage_error_is_tagged(params, gains):
    # A huge downward velocity demand (positive z in NED) flips the
    # commanded tension, which the decomposition must reject with its
    # stage attached.
    state = hover_state()
    sp = Setpoint(xidot_pd=np.array([0.0, 0.0, 50.0]))
    with pytest.raises(ControlStageError) as excinfo:
        cascade_step(state, sp, gains, params)
    assert excinfo.value.stage == "tension-decomposition"


def test_attitude_command_requires_eta_setpoint(params, gains):
    with pytest.raises(ControlStageError):
        attitude_command(hover_state(), Setpoint(), gains, params)


def test_attitude_command_tracks_attitude(params, gains):
    sp = Setpoint(eta_d=np.radians([10.0, 30.0, 0.0]))
    cmd = attitude_command(hover_state(), sp, gains, params)
    assert cmd.f_l == pytest.approx(params.hover_thrust())
    assert np.all(cmd.eta_dd_tr[:2] != 0.0)
    assert cmd.eta_dd_tr[2] == 0.0
