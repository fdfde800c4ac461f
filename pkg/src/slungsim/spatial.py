"""Rotation matrices, Euler-rate maps and their closed-form derivatives.

Frames follow NED conventions: the inertial frame has z pointing down,
the vehicle body frame is front-right-down, and the load frame hangs
below the suspension point.  Two parameterizations appear:

* vehicle attitude ``eta = (phi, theta, psi)`` with the ZYX convention,
  R = Rz(psi) @ Ry(theta) @ Rx(phi);
* load swing ``sigma = (alpha, beta)``, R = Ry(beta) @ Rx(alpha).

Roll/pitch and both swing angles are restricted to (-pi/2, pi/2); yaw
is unrestricted by the maps here and conventionally kept in (-pi, pi].

All angle derivatives of rotation matrices are analytic.  An elementary
rotation about a fixed axis satisfies d/da R(a) = K @ R(a) with K the
axis generator, so any mixed partial of a product of elementary
rotations is again a product of closed-form factors.  Numerical
differentiation appears only in the test suite.
"""

from __future__ import annotations

import numpy as np

from .exceptions import AngleBoundsError

HALF_PI = np.pi / 2.0

# Generators of rotations about the x, y, z axes (d/da R_axis(a) = K @ R).
_KX = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
_KY = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
_KZ = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def check_attitude_bounds(eta) -> None:
    """Raise AngleBoundsError unless |phi|, |theta| < pi/2."""
    phi, theta = float(eta[0]), float(eta[1])
    if not (abs(phi) < HALF_PI and abs(theta) < HALF_PI):
        raise AngleBoundsError(
            f"attitude out of bounds: phi={phi:.4f}, theta={theta:.4f} "
            f"(must lie strictly inside (-pi/2, pi/2))"
        )


def check_swing_bounds(sigma) -> None:
    """Raise AngleBoundsError unless |alpha|, |beta| < pi/2."""
    alpha, beta = float(sigma[0]), float(sigma[1])
    if not (abs(alpha) < HALF_PI and abs(beta) < HALF_PI):
        raise AngleBoundsError(
            f"swing angle out of bounds: alpha={alpha:.4f}, beta={beta:.4f} "
            f"(must lie strictly inside (-pi/2, pi/2))"
        )


def rot_body_to_inertial(eta) -> np.ndarray:
    """Body-to-inertial rotation for vehicle attitude (phi, theta, psi)."""
    check_attitude_bounds(eta)
    return rot_z(eta[2]) @ rot_y(eta[1]) @ rot_x(eta[0])


def rot_load_to_inertial(sigma) -> np.ndarray:
    """Load-to-inertial rotation for swing angles (alpha, beta)."""
    check_swing_bounds(sigma)
    return rot_y(sigma[1]) @ rot_x(sigma[0])


def euler_rate_map(eta) -> np.ndarray:
    """Map from Euler-angle rates to body angular velocity, w_b = Rv @ eta_dot.

    det(Rv) = cos(theta); the map is singular at |theta| = pi/2, which the
    bounds check excludes.  Near the boundary the matrix is still returned
    and conditioning is the caller's concern.
    """
    check_attitude_bounds(eta)
    phi, theta = eta[0], eta[1]
    cphi, sphi = np.cos(phi), np.sin(phi)
    ctheta, stheta = np.cos(theta), np.sin(theta)
    return np.array(
        [
            [1.0, 0.0, -stheta],
            [0.0, cphi, sphi * ctheta],
            [0.0, -sphi, cphi * ctheta],
        ]
    )


def euler_rate_map_partials(eta) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of the Euler-rate map w.r.t. phi and theta.

    The map does not depend on psi.
    """
    phi, theta = eta[0], eta[1]
    cphi, sphi = np.cos(phi), np.sin(phi)
    ctheta, stheta = np.cos(theta), np.sin(theta)
    d_phi = np.array(
        [
            [0.0, 0.0, 0.0],
            [0.0, -sphi, cphi * ctheta],
            [0.0, -cphi, -sphi * ctheta],
        ]
    )
    d_theta = np.array(
        [
            [0.0, 0.0, -ctheta],
            [0.0, 0.0, -sphi * stheta],
            [0.0, 0.0, -cphi * stheta],
        ]
    )
    return d_phi, d_theta


def _axis_stack_x(a: float) -> np.ndarray:
    # Derivative orders 0..2 of Rx: K_x @ R permutes/negates rows, so the
    # stack is written directly instead of via matrix products.
    c, s = np.cos(a), np.sin(a)
    out = np.zeros((3, 3, 3))
    out[0, 0, 0] = 1.0
    out[0, 1, 1] = c
    out[0, 1, 2] = -s
    out[0, 2, 1] = s
    out[0, 2, 2] = c
    out[1, 1] = -out[0, 2]
    out[1, 2] = out[0, 1]
    out[2, 1] = -out[0, 1]
    out[2, 2] = -out[0, 2]
    return out


def _axis_stack_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    out = np.zeros((3, 3, 3))
    out[0, 0, 0] = c
    out[0, 0, 2] = s
    out[0, 1, 1] = 1.0
    out[0, 2, 0] = -s
    out[0, 2, 2] = c
    out[1, 0] = out[0, 2]
    out[1, 2] = -out[0, 0]
    out[2, 0] = -out[0, 0]
    out[2, 2] = -out[0, 2]
    return out


def _axis_stack_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    out = np.zeros((3, 3, 3))
    out[0, 0, 0] = c
    out[0, 0, 1] = -s
    out[0, 1, 0] = s
    out[0, 1, 1] = c
    out[0, 2, 2] = 1.0
    out[1, 0] = -out[0, 1]
    out[1, 1] = out[0, 0]
    out[2, 0] = -out[0, 0]
    out[2, 1] = -out[0, 1]
    return out


# Fancy-index tables mapping angle indices to per-factor derivative
# orders in the product grids built below.  For the body rotation the
# grid is U[psi_order, theta_order, phi_order]; entry (i, j) of the
# second-partial table holds the orders for d2R/d(eta_i)d(eta_j).
_BODY_PSI1 = np.array([0, 0, 1])
_BODY_THETA1 = np.array([0, 1, 0])
_BODY_PHI1 = np.array([1, 0, 0])
_BODY_PSI2 = np.array([[0, 0, 1], [0, 0, 1], [1, 1, 2]])
_BODY_THETA2 = np.array([[0, 1, 0], [1, 2, 1], [0, 1, 0]])
_BODY_PHI2 = np.array([[2, 1, 1], [1, 0, 0], [1, 0, 0]])
_LOAD_BETA1 = np.array([0, 1])
_LOAD_ALPHA1 = np.array([1, 0])
_LOAD_BETA2 = np.array([[0, 1], [1, 2]])
_LOAD_ALPHA2 = np.array([[2, 1], [1, 0]])


def body_rotation_stack(eta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Body rotation with all first and second angle partials.

    Returns ``(R, dR, d2R)`` where ``dR[i] = dR/d(eta_i)`` and
    ``d2R[i, j] = d^2 R / d(eta_i) d(eta_j)``.  No bounds check; callers
    on the hot path validate once at entry.
    """
    X = _axis_stack_x(eta[0])
    Y = _axis_stack_y(eta[1])
    Z = _axis_stack_z(eta[2])
    # U[a, b, c] = d^a/dpsi^a Rz @ d^b/dtheta^b Ry @ d^c/dphi^c Rx
    ZY = Z[:, None] @ Y[None, :]
    U = ZY[:, :, None] @ X[None, None, :]
    R = U[0, 0, 0]
    dR = U[_BODY_PSI1, _BODY_THETA1, _BODY_PHI1]
    d2R = U[_BODY_PSI2, _BODY_THETA2, _BODY_PHI2]
    return R, dR, d2R


def load_rotation_stack(sigma) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Load rotation with all first and second angle partials.

    Same layout as :func:`body_rotation_stack`, indices over (alpha, beta).
    """
    X = _axis_stack_x(sigma[0])
    Y = _axis_stack_y(sigma[1])
    U = Y[:, None] @ X[None, :]  # U[b, a] = d^b Ry @ d^a Rx
    R = U[0, 0]
    dR = U[_LOAD_BETA1, _LOAD_ALPHA1]
    d2R = U[_LOAD_BETA2, _LOAD_ALPHA2]
    return R, dR, d2R


def _rotation_derivatives(stack, rates, accels):
    R, dR, d2R = stack
    Rdot = np.einsum("ikl,i->kl", dR, rates)
    Rddot = np.einsum("ijkl,i,j->kl", d2R, rates, rates) + np.einsum(
        "ikl,i->kl", dR, accels
    )
    return Rdot, Rddot


def body_rotation_derivatives(eta, eta_dot, eta_ddot):
    """First and second time derivatives of the body rotation along a
    trajectory with the given angle rates and accelerations."""
    check_attitude_bounds(eta)
    stack = body_rotation_stack(eta)
    return _rotation_derivatives(stack, np.asarray(eta_dot), np.asarray(eta_ddot))


def load_rotation_derivatives(sigma, sigma_dot, sigma_ddot):
    """Time derivatives of the load rotation; mirrors
    :func:`body_rotation_derivatives` for the two-angle parameterization."""
    check_swing_bounds(sigma)
    stack = load_rotation_stack(sigma)
    return _rotation_derivatives(stack, np.asarray(sigma_dot), np.asarray(sigma_ddot))
