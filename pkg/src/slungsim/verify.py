"""Self-verification suite: oracle and invariant checks with measured margins.

Each check returns the worst measured violation together with its
tolerance so the CLI can print one line per property.  The oracles here
deliberately avoid the analytic assembly paths they test: mass and
gravity come from finite differences of positions and potential energy,
Coriolis from finite differences of the mass matrix, and the energy
audit from integrating the unforced plant.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import controller as ctrl
from . import dynamics, spatial
from .controller import Setpoint
from .exceptions import SlungSimError
from .params import Gains, GeneralizedState, Params

_I3 = np.eye(3)


@dataclass
class PropertyResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""
    skipped: bool = False

    def line(self) -> str:
        if self.skipped:
            return f"SKIP {self.name}: {self.detail}"
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return (
            f"{status} {self.name}: measured {self.measured:.3e} "
            f"vs tolerance {self.tolerance:.3e}{extra}"
        )


def sample_state(rng: np.random.Generator, angle_limit: float = 1.2,
                 rate_limit: float = 2.0) -> GeneralizedState:
    """Random in-bounds state with comfortable margin to the angle bounds."""
    q = np.empty(8)
    q[0:3] = rng.uniform(-2.0, 2.0, 3)
    q[3:5] = rng.uniform(-angle_limit, angle_limit, 2)
    q[5] = rng.uniform(-np.pi, np.pi)
    q[6:8] = rng.uniform(-angle_limit, angle_limit, 2)
    qdot = rng.uniform(-rate_limit, rate_limit, 8)
    return GeneralizedState(q, qdot)


# ---------------------------------------------------------------------------
# Finite-difference oracles (position/potential level only)
# ---------------------------------------------------------------------------

def _load_position_raw(q: np.ndarray, params: Params) -> np.ndarray:
    Rb = spatial.rot_z(q[5]) @ spatial.rot_y(q[4]) @ spatial.rot_x(q[3])
    Rp = spatial.rot_y(q[7]) @ spatial.rot_x(q[6])
    return q[0:3] + Rb @ params.L + Rp @ params.l_vec


def fd_load_jacobian(q, params: Params, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the load position w.r.t. q."""
    q = np.asarray(q, dtype=float)
    J = np.empty((3, 8))
    for i in range(8):
        e = np.zeros(8)
        e[i] = step
        J[:, i] = (_load_position_raw(q + e, params) - _load_position_raw(q - e, params)) / (2 * step)
    return J


def fd_mass_matrix(q, params: Params, step: float = 1e-6) -> np.ndarray:
    """Mass matrix from the finite-difference load Jacobian."""
    J = fd_load_jacobian(q, params, step)
    M = params.m_p * J.T @ J
    M[0:3, 0:3] += params.m_q * _I3
    Rv = spatial.euler_rate_map(np.asarray(q)[3:6])
    M[3:6, 3:6] += Rv.T @ (params.I_q[:, None] * Rv)
    return M


def fd_gravity(q, params: Params, step: float = 1e-6) -> np.ndarray:
    """Gravity vector from finite differences of the potential energy."""
    q = np.asarray(q, dtype=float)

    def potential(qq):
        z_p = _load_position_raw(qq, params)[2]
        return -params.m_q * params.g * qq[2] - params.m_p * params.g * z_p

    G = np.empty(8)
    for i in range(8):
        e = np.zeros(8)
        e[i] = step
        G[i] = (potential(q + e) - potential(q - e)) / (2 * step)
    return G


def fd_coriolis(q, qdot, params: Params, step: float = 1e-6) -> np.ndarray:
    """Christoffel Coriolis matrix built from finite differences of M."""
    q = np.asarray(q, dtype=float)
    dM = np.zeros((8, 8, 8))
    for i in range(3, 8):
        e = np.zeros(8)
        e[i] = step
        dM[i] = (dynamics.mass_matrix(q + e, params) - dynamics.mass_matrix(q - e, params)) / (2 * step)
    qdot = np.asarray(qdot, dtype=float)
    return 0.5 * (
        np.einsum("ikj,i->kj", dM, qdot)
        + np.einsum("jki,i->kj", dM, qdot)
        - np.einsum("kij,i->kj", dM, qdot)
    )


# ---------------------------------------------------------------------------
# Property checks
# ---------------------------------------------------------------------------

def check_mass_structure(rng, params: Params, n: int = 1000) -> PropertyResult:
    """Symmetry, exact translational block, the structural zero entry,
    and positive definiteness over random in-bounds states."""
    worst_sym = 0.0
    min_eig = np.inf
    worst_block = 0.0
    worst_zero = 0.0
    total = params.total_mass
    for _ in range(n):
        st = sample_state(rng)
        M = dynamics.mass_matrix(st.q, params)
        worst_sym = max(worst_sym, float(np.abs(M - M.T).max()))
        worst_block = max(
            worst_block, float(np.abs(M[0:3, 0:3] - total * _I3).max())
        )
        worst_zero = max(worst_zero, abs(float(M[7, 1])))
        min_eig = min(min_eig, float(scipy.linalg.eigvalsh(M).min()))
    structural = max(worst_block, worst_zero)
    pd_ok = min_eig > 0.0 if params.m_p > 0 else True
    measured = max(worst_sym, structural)
    return PropertyResult(
        "mass-structure",
        worst_sym <= 1e-12 and structural == 0.0 and pd_ok,
        measured,
        1e-12,
        detail=f"min eigenvalue {min_eig:.3e}",
    )


def check_mcg_oracle(rng, params: Params, n: int = 100) -> PropertyResult:
    """Analytic M, C, G against the finite-difference oracles."""
    worst = 0.0
    for _ in range(n):
        st = sample_state(rng)
        terms = dynamics.model_terms(st.q, st.qdot, params)
        worst = max(worst, float(np.abs(terms.M - fd_mass_matrix(st.q, params)).max()))
        worst = max(worst, float(np.abs(terms.G - fd_gravity(st.q, params)).max()))
        worst = max(
            worst,
            float(np.abs(terms.C - fd_coriolis(st.q, st.qdot, params)).max()),
        )
    return PropertyResult("mcg-oracle", worst <= 1e-6, worst, 1e-6)


def check_skew_symmetry(rng, params: Params, n: int = 1000) -> PropertyResult:
    """qd^T (Mdot - 2C) qd must vanish; Mdot by directional difference."""
    eps = 1e-6
    worst = 0.0
    for _ in range(n):
        st = sample_state(rng)
        C = dynamics.coriolis_matrix(st.q, st.qdot, params)
        M_plus = dynamics.mass_matrix(st.q + eps * st.qdot, params)
        M_minus = dynamics.mass_matrix(st.q - eps * st.qdot, params)
        Mdot = (M_plus - M_minus) / (2 * eps)
        value = abs(float(st.qdot @ (Mdot - 2.0 * C) @ st.qdot))
        worst = max(worst, value / (1.0 + float(st.qdot @ st.qdot)))
    return PropertyResult("skew-symmetry", worst <= 1e-8, worst, 1e-8)


def check_swing_row_reduction(rng, params: Params, gains: Gains, n: int = 100) -> PropertyResult:
    """The suspension-point form of the swing rows must reproduce the
    full model's swing accelerations."""
    if params.m_p <= 0.0:
        return PropertyResult("swing-row-reduction", True, 0.0, 1e-8,
                              detail="massless load", skipped=True)
    worst = 0.0
    for _ in range(n):
        st = sample_state(rng)
        u = np.concatenate([[rng.uniform(-25.0, -1.0)], rng.uniform(-1.0, 1.0, 3)])
        terms = dynamics.model_terms(st.q, st.qdot, params)
        qdd = dynamics.forward_dynamics(st.q, st.qdot, u, params, terms)
        reduced = dynamics.reduced_swing_terms(st.q, st.qdot, params, terms)
        drag = dynamics.drag_forces(st.q, st.qdot, params, terms)
        rb_dd = np.einsum(
            "ijkl,i,j->kl", terms.d2Rb, st.eta_dot, st.eta_dot
        ) + np.einsum("ikl,i->kl", terms.dRb, qdd[3:6])
        xi_dd = qdd[0:3] + rb_dd @ params.L
        m1 = np.array([reduced.m_s1[0, 0], reduced.m_s1[1, 1]])
        sigma_dd = -reduced.m_s @ xi_dd - (
            reduced.c_sigma_qtilde + reduced.g_sigma - drag.d_sigma
        ) / m1
        worst = max(worst, float(np.abs(sigma_dd - qdd[6:8]).max()))
    return PropertyResult("swing-row-reduction", worst <= 1e-8, worst, 1e-8)


def check_inner_linearization(rng, params: Params, gains: Gains, n: int = 100) -> PropertyResult:
    """Substituting the inner torque into the attitude dynamics must
    return exactly the commanded acceleration."""
    worst = 0.0
    for _ in range(n):
        st = sample_state(rng)
        setpoint = Setpoint(psi_d=rng.uniform(-np.pi, np.pi))
        terms = dynamics.model_terms(st.q, st.qdot, params)
        drag = dynamics.drag_forces(st.q, st.qdot, params, terms)
        eta_d = np.array([rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), setpoint.psi_d])
        errors = ctrl.compute_errors(st, setpoint, gains, params, eta_d=eta_d, terms=terms)
        eta_dd_tr = ctrl.attitude_reference_acceleration(errors, gains)
        sigma_dd_v = rng.uniform(-2.0, 2.0, 2)
        f_l = rng.uniform(-25.0, -1.0)
        _, tau_ft, _ = ctrl.tension_feedforward(
            st, eta_dd_tr, sigma_dd_v, f_l, params, drag, terms
        )
        tau_eta = ctrl.inner_attitude_law(
            st, eta_dd_tr, setpoint, tau_ft, params, drag, terms
        )
        c_eta = dynamics.attitude_coriolis(st.eta, st.eta_dot, params)
        eta_dd = np.linalg.solve(
            terms.Jq, tau_eta + tau_ft - c_eta @ st.eta_dot + drag.d_eta
        )
        worst = max(worst, float(np.abs(eta_dd - eta_dd_tr - setpoint.eta_dd_d).max()))
    return PropertyResult("inner-linearization", worst <= 1e-8, worst, 1e-8)


def check_attitude_row_reduction(rng, params: Params, n: int = 100) -> PropertyResult:
    """Dragless: the attitude rows of the full model equal the reduced
    attitude dynamics driven by the true cable-tension torque."""
    dragless = dataclasses.replace(
        params, c_dq=np.zeros(3), c_dp=np.zeros(3), c_deta=np.zeros(3)
    )
    worst = 0.0
    for _ in range(n):
        st = sample_state(rng)
        u = np.concatenate([[rng.uniform(-25.0, -1.0)], rng.uniform(-1.0, 1.0, 3)])
        terms = dynamics.model_terms(st.q, st.qdot, dragless)
        qdd = dynamics.forward_dynamics(st.q, st.qdot, u, dragless, terms)
        f_t, _ = dynamics.cable_tension(st.q, st.qdot, qdd, u, dragless)
        tau_ft = terms.Rv.T @ (-np.cross(dragless.L, terms.Rb.T @ f_t))
        c_eta = dynamics.attitude_coriolis(st.eta, st.eta_dot, dragless)
        eta_dd = np.linalg.solve(terms.Jq, u[1:4] + tau_ft - c_eta @ st.eta_dot)
        worst = max(worst, float(np.abs(eta_dd - qdd[3:6]).max()))
    return PropertyResult("attitude-row-reduction", worst <= 1e-8, worst, 1e-8)


def check_energy_conservation(
    params: Params,
    duration: float = 1.0,
    dt: float = 1e-4,
    gravity_sign: float = 1.0,
) -> PropertyResult:
    """Unforced, dragless swing release must conserve T + V.

    ``gravity_sign`` exists as a negative control: flipping it makes the
    integrated plant inconsistent with the audited potential, and this
    check must then fail.
    """
    if params.m_p <= 0.0:
        return PropertyResult("energy-conservation", True, 0.0, 1e-6,
                              detail="massless load", skipped=True)
    p = dataclasses.replace(
        params, c_dq=np.zeros(3), c_dp=np.zeros(3), c_deta=np.zeros(3)
    )
    q = np.zeros(8)
    q[6] = np.radians(15.0)
    qd = np.zeros(8)

    def accel(qq, qqd):
        terms = dynamics.model_terms(qq, qqd, p)
        rhs = -terms.C @ qqd - gravity_sign * terms.G
        cho = scipy.linalg.cho_factor(terms.M, check_finite=False)
        return scipy.linalg.cho_solve(cho, rhs, check_finite=False), terms

    n = round(duration / dt)
    e0 = None
    worst = 0.0
    for _ in range(n + 1):
        try:
            k1, terms = accel(q, qd)
        except SlungSimError as exc:
            return PropertyResult(
                "energy-conservation", False, np.inf, 1e-6,
                detail=f"plant left validity region: {exc}",
            )
        kinetic = 0.5 * float(qd @ terms.M @ qd)
        z_p = q[2] + (terms.Rb @ p.L)[2] + (terms.Rp @ p.l_vec)[2]
        energy = kinetic - p.m_q * p.g * q[2] - p.m_p * p.g * z_p
        if e0 is None:
            e0 = energy
        worst = max(worst, abs(energy - e0) / max(abs(e0), 1.0))
        half = 0.5 * dt
        qd2 = qd + half * k1
        k2, _ = accel(q + half * qd, qd2)
        qd3 = qd + half * k2
        k3, _ = accel(q + half * qd2, qd3)
        qd4 = qd + dt * k3
        k4, _ = accel(q + dt * qd3, qd4)
        q = q + (dt / 6.0) * (qd + 2.0 * qd2 + 2.0 * qd3 + qd4)
        qd = qd + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return PropertyResult("energy-conservation", worst < 1e-6, worst, 1e-6)


def check_decoupler_roundtrips(rng, n: int = 1000) -> PropertyResult:
    """Tension decomposition and attitude extraction must reconstruct
    their input vectors."""
    worst = 0.0
    for _ in range(n):
        f_td_vec = np.array(
            [rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-30, -0.1)]
        )
        f_td, alpha_d, beta_d = ctrl.tension_decompose(f_td_vec)
        rebuilt = spatial.rot_load_to_inertial((alpha_d, beta_d)) @ np.array([0, 0, f_td])
        worst = max(worst, float(np.abs(rebuilt - f_td_vec).max()))

        f_ld = np.array(
            [rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-30, -0.1)]
        )
        psi = rng.uniform(-np.pi, np.pi)
        phi_d, theta_d, f_l = ctrl.attitude_decoupler(f_ld, psi)
        rebuilt = (
            spatial.rot_z(psi) @ spatial.rot_y(theta_d) @ spatial.rot_x(phi_d)
        ) @ np.array([0.0, 0.0, f_l])
        worst = max(worst, float(np.abs(rebuilt - f_ld).max()))
    return PropertyResult("decoupler-roundtrips", worst <= 1e-10, worst, 1e-10)


def check_mixer_roundtrip(rng, params: Params, n: int = 100) -> PropertyResult:
    """allocate(mixer(wrench)) must be the identity for feasible wrenches."""
    worst = 0.0
    for _ in range(n):
        f_l = rng.uniform(-25.0, -10.0)
        tau_b = rng.uniform(-0.1, 0.1, 3)
        rotors, clamped = ctrl.mixer(f_l, tau_b, params)
        if clamped:
            continue
        f_l_back, tau_back = ctrl.allocate(rotors, params)
        worst = max(worst, abs(f_l_back - f_l), float(np.abs(tau_back - tau_b).max()))
    return PropertyResult("mixer-roundtrip", worst <= 1e-10, worst, 1e-10)


def check_thrust_saturation(rng, params: Params, n: int = 1000) -> PropertyResult:
    """Clamped vectors never exceed the bound; in-bound vectors pass
    through untouched; scaling preserves the vertical component."""
    f_up = params.F_up
    worst = 0.0
    ok = True
    for _ in range(n):
        f = np.array(
            [rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(-60, -0.1)]
        )
        clamped, saturated = ctrl.thrust_saturation(f, f_up)
        norm = float(np.linalg.norm(clamped))
        worst = max(worst, norm - f_up)
        if np.linalg.norm(f) <= f_up:
            ok = ok and not saturated and np.array_equal(clamped, f)
        elif f[2] >= -f_up:
            ok = ok and clamped[2] == f[2]
    return PropertyResult(
        "thrust-saturation", ok and worst <= 1e-9, max(worst, 0.0), 1e-9
    )


def run_all(
    seed: int,
    params: Params | None = None,
    gains: Gains | None = None,
    corrupt: str | None = None,
) -> list[PropertyResult]:
    """Run the full property suite with one seeded generator."""
    params = params if params is not None else Params()
    gains = gains if gains is not None else Gains()
    rng = np.random.default_rng(seed)
    gravity_sign = -1.0 if corrupt == "gravity-sign" else 1.0
    results = [
        check_mass_structure(rng, params),
        check_mcg_oracle(rng, params),
        check_skew_symmetry(rng, params),
        check_swing_row_reduction(rng, params, gains),
        check_inner_linearization(rng, params, gains),
        check_attitude_row_reduction(rng, params),
        check_energy_conservation(params, gravity_sign=gravity_sign),
        check_decoupler_roundtrips(rng),
        check_mixer_roundtrip(rng, params),
        check_thrust_saturation(rng, params),
    ]
    return results
