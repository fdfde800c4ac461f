"""Lagrangian dynamics of a quadrotor with an off-center slung load.

The plant has eight degrees of freedom,

    q = [xi_q, eta, sigma],

with vehicle position ``xi_q`` in the NED inertial frame, vehicle Euler
attitude ``eta = (phi, theta, psi)`` and load swing angles
``sigma = (alpha, beta)``.  The cable attaches at a point offset from
the vehicle's center of mass by ``L`` (body frame); the cable itself is
rigid with length ``l``.  Two derived points recur everywhere:

    suspension point   xi   = xi_q + R_b @ L
    load position      xi_p = xi   + R_p @ [0, 0, l]

The equations of motion are

    M(q) qdd + C(q, qd) qd + G(q) = B(q) u + F_d(q, qd),

with ``u = [F_l, tau_eta]``: total rotor thrust along the body z axis
(negative in normal flight) and the generalized attitude torque.

The mass matrix is assembled from velocity Jacobians rather than from
expanded entries: with ``A_eta = d(R_b L)/d(eta)`` and
``A_sig = d(R_p l)/d(sigma)`` the load velocity is ``J_p qd`` for
``J_p = [I, A_eta, A_sig]``, so

    M = m_q * diag(I, 0, 0) + diag(0, J_q, 0) + m_p * J_p^T J_p,

where ``J_q = R_v^T I_q R_v`` is the attitude-space inertia.  Coriolis
terms come from the Christoffel symbols of the first kind,

    c_kj = 1/2 sum_i (dm_kj/dq_i + dm_ki/dq_j - dm_ij/dq_k) qd_i,

using closed-form partials of the rotation matrices, which gives
``qd^T (Mdot - 2C) qd = 0`` to machine precision.

Aerodynamic drag is componentwise quadratic with configurable
coefficients (zero by default).  The swing rows receive the moment the
load drag exerts about the suspension point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import spatial
from .exceptions import SingularInertiaError
from .params import GeneralizedState, Params

_I3 = np.eye(3)

# Smallest acceptable pivot when inverting the diagonal swing-inertia
# block; below this the swing coordinates are effectively massless.
_SWING_INERTIA_FLOOR = 1e-12


@dataclass
class ModelTerms:
    """Everything the plant and controller need at one state.

    ``dM`` stacks the configuration partials of the mass matrix
    (``dM[i] = dM/dq_i``; the translational slices are zero).
    """

    M: np.ndarray
    dM: np.ndarray
    C: np.ndarray
    G: np.ndarray
    Rb: np.ndarray
    dRb: np.ndarray
    d2Rb: np.ndarray
    Rp: np.ndarray
    dRp: np.ndarray
    d2Rp: np.ndarray
    A_eta: np.ndarray
    A_sig: np.ndarray
    Rv: np.ndarray
    Jq: np.ndarray


@dataclass
class DragSet:
    """Drag forces/torques split by which coordinates they act on."""

    d_xi_q: np.ndarray   # force on the vehicle [N]
    d_xi_p: np.ndarray   # force on the load [N]
    d_eta: np.ndarray    # attitude-space torque [N m]
    d_sigma: np.ndarray  # swing-space torque [N m]

    @classmethod
    def zero(cls) -> "DragSet":
        return cls(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(2))

    def generalized(self) -> np.ndarray:
        """Assemble the 8-vector entering the equations of motion."""
        out = np.empty(8)
        out[0:3] = self.d_xi_q + self.d_xi_p
        out[3:6] = self.d_eta
        out[6:8] = self.d_sigma
        return out


def model_terms(q, qdot, params: Params) -> ModelTerms:
    """Assemble M, C, G and the kinematic intermediates at (q, qd)."""
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    eta = q[3:6]
    sigma = q[6:8]
    spatial.check_attitude_bounds(eta)
    spatial.check_swing_bounds(sigma)

    Rb, dRb, d2Rb = spatial.body_rotation_stack(eta)
    Rp, dRp, d2Rp = spatial.load_rotation_stack(sigma)
    L = params.L
    lv = params.l_vec

    A_eta = (dRb @ L).T   # 3x3, column i is dRb/deta_i @ L
    A_sig = (dRp @ lv).T  # 3x2

    Jp = np.empty((3, 8))
    Jp[:, 0:3] = _I3
    Jp[:, 3:6] = A_eta
    Jp[:, 6:8] = A_sig

    Rv = spatial.euler_rate_map(eta)
    IqRv = params.I_q[:, None] * Rv
    Jq = Rv.T @ IqRv

    M = params.m_p * (Jp.T @ Jp)
    M[0:3, 0:3] += params.m_q * _I3
    M[3:6, 3:6] += Jq

    # Configuration partials of M (translations contribute nothing).
    dM = np.zeros((8, 8, 8))
    dJp_eta = np.zeros((3, 8, 3))           # transposed dJp/deta_i
    dJp_eta[:, 3:6, :] = d2Rb @ L           # (i, j, k): d2Rb[i, j] @ L
    half = dJp_eta @ Jp                     # (3, 8, 8)
    dM[3:6] = params.m_p * (half + half.transpose(0, 2, 1))

    dRv_phi, dRv_theta = spatial.euler_rate_map_partials(eta)
    dM[3, 3:6, 3:6] += dRv_phi.T @ IqRv + IqRv.T @ dRv_phi
    dM[4, 3:6, 3:6] += dRv_theta.T @ IqRv + IqRv.T @ dRv_theta

    dJp_sig = np.zeros((2, 8, 3))
    dJp_sig[:, 6:8, :] = d2Rp @ lv
    half = dJp_sig @ Jp
    dM[6:8] = params.m_p * (half + half.transpose(0, 2, 1))

    # Christoffel product: c_kj = 1/2 sum_i (dm_kj/dq_i + dm_ki/dq_j
    # - dm_ij/dq_k) qd_i, assembled from three contractions of dM.
    mdot = np.tensordot(qdot, dM, axes=(0, 0))
    term2 = (dM @ qdot).T
    term3 = np.tensordot(dM, qdot, axes=(1, 0))
    C = 0.5 * (mdot + term2 - term3)

    G = _gravity(eta, sigma, params)

    return ModelTerms(
        M=M, dM=dM, C=C, G=G,
        Rb=Rb, dRb=dRb, d2Rb=d2Rb, Rp=Rp, dRp=dRp, d2Rp=d2Rp,
        A_eta=A_eta, A_sig=A_sig, Rv=Rv, Jq=Jq,
    )


def _gravity(eta, sigma, params: Params) -> np.ndarray:
    phi, theta = eta[0], eta[1]
    alpha, beta = sigma
    lx, ly, lz = params.L
    mpg = params.m_p * params.g
    G = np.zeros(8)
    G[2] = -params.total_mass * params.g
    G[3] = mpg * (-np.cos(theta) * (np.cos(phi) * ly - np.sin(phi) * lz))
    G[4] = mpg * (
        np.cos(theta) * lx + np.sin(theta) * (np.sin(phi) * ly + np.cos(phi) * lz)
    )
    G[6] = mpg * np.sin(alpha) * np.cos(beta) * params.l
    G[7] = mpg * np.cos(alpha) * np.sin(beta) * params.l
    return G


def mass_matrix(q, params: Params) -> np.ndarray:
    """Symmetric positive-definite generalized mass matrix M(q)."""
    return model_terms(q, np.zeros(8), params).M


def coriolis_matrix(q, qdot, params: Params) -> np.ndarray:
    """Christoffel Coriolis matrix C(q, qd); C is linear in qd."""
    return model_terms(q, qdot, params).C


def gravity_vector(q, params: Params) -> np.ndarray:
    """Generalized gravity G(q) (enters the left-hand side)."""
    q = np.asarray(q, dtype=float)
    spatial.check_attitude_bounds(q[3:6])
    spatial.check_swing_bounds(q[6:8])
    return _gravity(q[3:6], q[6:8], params)


def suspension_point_velocity(q, qdot, params: Params, terms: ModelTerms | None = None) -> np.ndarray:
    if terms is None:
        terms = model_terms(q, qdot, params)
    return np.asarray(qdot)[0:3] + terms.A_eta @ np.asarray(qdot)[3:6]


def load_position(q, params: Params) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    Rb = spatial.rot_body_to_inertial(q[3:6])
    Rp = spatial.rot_load_to_inertial(q[6:8])
    return q[0:3] + Rb @ params.L + Rp @ params.l_vec


def load_velocity(q, qdot, params: Params, terms: ModelTerms | None = None) -> np.ndarray:
    if terms is None:
        terms = model_terms(q, qdot, params)
    qdot = np.asarray(qdot)
    return qdot[0:3] + terms.A_eta @ qdot[3:6] + terms.A_sig @ qdot[6:8]


def _quadratic_drag(coeff: np.ndarray, v: np.ndarray) -> np.ndarray:
    return -coeff * np.abs(v) * v


def _cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def drag_forces(q, qdot, params: Params, terms: ModelTerms | None = None) -> DragSet:
    """Componentwise-quadratic drag on vehicle, load and attitude rates.

    The swing torque is the moment of the load drag about the
    suspension point, expressed in the load frame and truncated to the
    two swing coordinates:  d_sigma = [I2 0] (l x R_p^T d_xi_p).
    """
    if not (params.c_dq.any() or params.c_dp.any() or params.c_deta.any()):
        return DragSet.zero()
    if terms is None:
        terms = model_terms(q, qdot, params)
    qdot = np.asarray(qdot)
    d_xi_q = _quadratic_drag(params.c_dq, qdot[0:3])
    v_p = load_velocity(q, qdot, params, terms)
    d_xi_p = _quadratic_drag(params.c_dp, v_p)
    d_eta = _quadratic_drag(params.c_deta, qdot[3:6])
    d_sigma = _cross3(params.l_vec, terms.Rp.T @ d_xi_p)[0:2]
    return DragSet(d_xi_q, d_xi_p, d_eta, d_sigma)


def control_effectiveness(q) -> np.ndarray:
    """Map from u = [F_l, tau_eta] to generalized forces (8x4).

    Thrust acts along the body z axis rotated into the inertial frame;
    the torque columns feed the attitude rows directly.  The swing rows
    are unactuated.
    """
    q = np.asarray(q, dtype=float)
    Rb = spatial.rot_body_to_inertial(q[3:6])
    B = np.zeros((8, 4))
    B[0:3, 0] = Rb[:, 2]
    B[3:6, 1:4] = _I3
    return B


def forward_dynamics(q, qdot, u, params: Params, terms: ModelTerms | None = None) -> np.ndarray:
    """Solve M qdd = B u + F_d - C qd - G for the accelerations.

    Uses a Cholesky factorization (M is SPD inside the angle bounds) and
    checks the solve residual; failure of either signals an invalid
    state rather than a numerical fluke.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    u = np.asarray(u, dtype=float)
    if terms is None:
        terms = model_terms(q, qdot, params)

    drag = drag_forces(q, qdot, params, terms)
    rhs = -terms.C @ qdot - terms.G + drag.generalized()
    rhs[0:3] += terms.Rb[:, 2] * u[0]
    rhs[3:6] += u[1:4]

    try:
        cho = scipy.linalg.cho_factor(terms.M, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularInertiaError(f"mass matrix not positive definite: {exc}") from exc
    qdd = scipy.linalg.cho_solve(cho, rhs, check_finite=False)

    residual = np.linalg.norm(terms.M @ qdd - rhs)
    if residual > 1e-9 * (1.0 + np.linalg.norm(rhs)):
        raise SingularInertiaError(
            f"ill-conditioned mass matrix: solve residual {residual:.3e}"
        )
    return qdd


def cable_tension(q, qdot, qddot, u, params: Params) -> tuple[np.ndarray, float]:
    """Cable tension from the vehicle's force balance.

    F_t = R F_l - m_q xi_q_dd + m_q g + D_xi_q, i.e. the force the
    vehicle transmits into the cable, reconstructed from the simulated
    acceleration exactly as an onboard estimator would from its own.
    Returns the inertial vector and its signed magnitude along the load
    axis (negative when the cable pulls the load upward).
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    qddot = np.asarray(qddot, dtype=float)
    terms = model_terms(q, qdot, params)
    drag = drag_forces(q, qdot, params, terms)
    f_t = (
        terms.Rb[:, 2] * float(u[0])
        - params.m_q * qddot[0:3]
        + params.m_q * params.g_vec
        + drag.d_xi_q
    )
    axis = terms.Rp[:, 2]
    return f_t, float(axis @ f_t)


@dataclass
class ReducedSwingTerms:
    """Blocks of the swing rows written against the suspension point.

    The swing rows of the full model are equivalent to

        sigma_dd = -m_s @ xi_dd - m_s1^{-1} (c_sigma_qtilde + g_sigma - d_sigma)

    where ``xi_dd`` is the suspension-point acceleration,
    ``m_s = m_s1^{-1} m_s2`` and ``c_sigma_qtilde`` is the swing-row
    Coriolis product taken with the attitude-rate entries masked out
    (the suspension-point coordinates absorb them).  ``c_sigma_qdot``
    is the same rows times the raw generalized rate, which is what the
    swing controller compensates.
    """

    m_s1: np.ndarray          # 2x2 diagonal swing inertia
    m_s2: np.ndarray          # 2x3 coupling to suspension acceleration
    m_s: np.ndarray           # m_s1^{-1} m_s2
    c_sigma_qtilde: np.ndarray
    c_sigma_qdot: np.ndarray
    g_sigma: np.ndarray


def reduced_swing_terms(q, qdot, params: Params, terms: ModelTerms | None = None) -> ReducedSwingTerms:
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    if terms is None:
        terms = model_terms(q, qdot, params)
    M = terms.M
    m77, m88 = M[6, 6], M[7, 7]
    if min(m77, m88) <= _SWING_INERTIA_FLOOR:
        raise SingularInertiaError(
            f"swing inertia block is singular (diag {m77:.3e}, {m88:.3e})"
        )
    m_s1 = np.diag([m77, m88])
    m_s2 = M[6:8, 0:3].copy()
    m_s2[1, 1] = 0.0  # structurally zero; avoid carrying rounding dust
    m_s = m_s2 / np.array([[m77], [m88]])

    C_sigma = terms.C[6:8, :]
    qtilde_dot = np.empty(8)
    qtilde_dot[0:3] = qdot[0:3] + terms.A_eta @ qdot[3:6]
    qtilde_dot[3:6] = 0.0
    qtilde_dot[6:8] = qdot[6:8]

    return ReducedSwingTerms(
        m_s1=m_s1,
        m_s2=m_s2,
        m_s=m_s,
        c_sigma_qtilde=C_sigma @ qtilde_dot,
        c_sigma_qdot=C_sigma @ qdot,
        g_sigma=terms.G[6:8].copy(),
    )


def attitude_inertia(eta, params: Params) -> np.ndarray:
    """Attitude-space inertia J_q = R_v^T I_q R_v."""
    Rv = spatial.euler_rate_map(eta)
    return Rv.T @ (params.I_q[:, None] * Rv)


def attitude_coriolis(eta, eta_dot, params: Params) -> np.ndarray:
    """Christoffel matrix of the attitude-only inertia J_q(eta).

    This is the Coriolis term of the decoupled attitude subsystem; the
    remaining couplings enter through the cable-tension torque.
    """
    Rv = spatial.euler_rate_map(eta)
    IqRv = params.I_q[:, None] * Rv
    dRv_phi, dRv_theta = spatial.euler_rate_map_partials(eta)
    dJ = np.zeros((3, 3, 3))
    dJ[0] = dRv_phi.T @ IqRv + IqRv.T @ dRv_phi
    dJ[1] = dRv_theta.T @ IqRv + IqRv.T @ dRv_theta
    eta_dot = np.asarray(eta_dot, dtype=float)
    return 0.5 * (
        np.einsum("ikj,i->kj", dJ, eta_dot)
        + np.einsum("jki,i->kj", dJ, eta_dot)
        - np.einsum("kij,i->kj", dJ, eta_dot)
    )


def kinetic_energy(q, qdot, params: Params) -> float:
    qdot = np.asarray(qdot, dtype=float)
    M = mass_matrix(q, params)
    return 0.5 * float(qdot @ M @ qdot)


def potential_energy(q, params: Params) -> float:
    """Gravitational potential; NED z is down, so altitude gain raises it."""
    q = np.asarray(q, dtype=float)
    z_p = load_position(q, params)[2]
    return -params.m_q * params.g * q[2] - params.m_p * params.g * z_p


def total_energy(q, qdot, params: Params) -> float:
    return kinetic_energy(q, qdot, params) + potential_energy(q, params)


def state_energy(state: GeneralizedState, params: Params) -> float:
    return total_energy(state.q, state.qdot, params)
