"""Physical parameters, controller gains and shared state containers.

Defaults reproduce the desk-scale test platform: a 1.32 kg quadrotor
with 0.225 m arms carrying a 0.066 kg load on a 1 m cable whose
attachment point is offset from the center of mass by
L = (-0.12, 0, -0.05) m in the body frame.

Sign conventions are NED throughout: z points down, altitude gain is a
negative z rate, and hover thrust is negative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import AngleBoundsError
from . import spatial


def _vec(x, n: int, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"{name} must be a {n}-vector, got shape {a.shape}")
    return a


@dataclass
class Params:
    """Plant parameters.

    Drag coefficients are componentwise quadratic (force = -c * |v| * v)
    and default to zero: the testbench plant is dragless unless a
    scenario opts in.  ``c_q`` (rotor torque per unit thrust, in meters)
    and the thrust limits have no reference values and are configurable.
    """

    m_q: float = 1.32          # quadrotor mass [kg]
    m_p: float = 0.066         # load mass [kg]; may be 0 for a bare vehicle
    I_q: np.ndarray = field(default_factory=lambda: np.array([12.71e-3, 12.71e-3, 2.37e-3]))
    L: np.ndarray = field(default_factory=lambda: np.array([-0.12, 0.0, -0.05]))
    l: float = 1.0             # cable length [m]
    l_r: float = 0.225         # rotor arm length [m]
    c_q: float = 0.016         # rotor torque coefficient [m]
    g: float = 9.81
    c_dq: np.ndarray = field(default_factory=lambda: np.zeros(3))   # vehicle drag [N s^2/m^2]
    c_dp: np.ndarray = field(default_factory=lambda: np.zeros(3))   # load drag [N s^2/m^2]
    c_deta: np.ndarray = field(default_factory=lambda: np.zeros(3))  # rotational drag [N m s^2]
    F_up: float = 30.0         # total-thrust bound [N]
    rotor_min: float = 0.0     # per-rotor thrust limits [N]
    rotor_max: float = 15.0

    def __post_init__(self):
        self.I_q = _vec(self.I_q, 3, "I_q")
        self.L = _vec(self.L, 3, "L")
        self.c_dq = _vec(self.c_dq, 3, "c_dq")
        self.c_dp = _vec(self.c_dp, 3, "c_dp")
        self.c_deta = _vec(self.c_deta, 3, "c_deta")
        if self.m_q <= 0:
            raise ValueError(f"m_q must be positive, got {self.m_q}")
        if self.m_p < 0:
            raise ValueError(f"m_p must be non-negative, got {self.m_p}")
        if self.l <= 0 or self.l_r <= 0:
            raise ValueError("cable length and rotor arm must be positive")
        if self.g <= 0 or self.F_up <= 0:
            raise ValueError("g and F_up must be positive")
        if np.any(self.I_q <= 0):
            raise ValueError("principal moments of inertia must be positive")
        if np.any(self.c_dq < 0) or np.any(self.c_dp < 0) or np.any(self.c_deta < 0):
            raise ValueError("drag coefficients must be non-negative")
        if not self.rotor_min < self.rotor_max:
            raise ValueError("rotor_min must be below rotor_max")

    @property
    def total_mass(self) -> float:
        return self.m_q + self.m_p

    @property
    def g_vec(self) -> np.ndarray:
        """Gravity vector in NED coordinates (positive z is down)."""
        return np.array([0.0, 0.0, self.g])

    @property
    def l_vec(self) -> np.ndarray:
        """Cable vector from the suspension point to the load, load frame."""
        return np.array([0.0, 0.0, self.l])

    @property
    def arm_diag(self) -> float:
        """Moment arm of each rotor about the body x/y axes (X layout)."""
        return self.l_r / np.sqrt(2.0)

    def hover_thrust(self) -> float:
        """Total thrust balancing the weight of vehicle plus load (negative)."""
        return -self.total_mass * self.g


@dataclass
class Gains:
    """Cascade gains; every diagonal entry must be positive.

    Defaults are the tuned desk-scale values used throughout the tests.
    """

    k_eta: np.ndarray = field(default_factory=lambda: np.array([13.6, 13.6, 5.2]))
    k_peta: np.ndarray = field(default_factory=lambda: np.array([13.6, 13.6, 5.2]))
    k_sigma: np.ndarray = field(default_factory=lambda: np.array([3.2, 3.2]))
    k_psigma: np.ndarray = field(default_factory=lambda: np.array([3.2, 3.2]))
    k_xidot_p: np.ndarray = field(default_factory=lambda: np.array([1.4, 1.4, 4.0]))

    def __post_init__(self):
        self.k_eta = _vec(self.k_eta, 3, "k_eta")
        self.k_peta = _vec(self.k_peta, 3, "k_peta")
        self.k_sigma = _vec(self.k_sigma, 2, "k_sigma")
        self.k_psigma = _vec(self.k_psigma, 2, "k_psigma")
        self.k_xidot_p = _vec(self.k_xidot_p, 3, "k_xidot_p")
        for name in ("k_eta", "k_peta", "k_sigma", "k_psigma", "k_xidot_p"):
            if np.any(getattr(self, name) <= 0):
                raise ValueError(f"{name} entries must be positive")


@dataclass
class GeneralizedState:
    """Configuration and rate of the 8-DoF plant.

    ``q = [x_q, y_q, z_q, phi, theta, psi, alpha, beta]`` collects the
    vehicle position (NED), vehicle attitude and load swing angles;
    ``qdot`` is its time derivative.  This is the single source of truth
    the simulator integrates and the controller reads.
    """

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        self.q = _vec(self.q, 8, "q")
        self.qdot = _vec(self.qdot, 8, "qdot")

    @property
    def xi_q(self) -> np.ndarray:
        return self.q[0:3]

    @property
    def eta(self) -> np.ndarray:
        return self.q[3:6]

    @property
    def sigma(self) -> np.ndarray:
        return self.q[6:8]

    @property
    def xi_q_dot(self) -> np.ndarray:
        return self.qdot[0:3]

    @property
    def eta_dot(self) -> np.ndarray:
        return self.qdot[3:6]

    @property
    def sigma_dot(self) -> np.ndarray:
        return self.qdot[6:8]

    def validate(self) -> "GeneralizedState":
        if not np.all(np.isfinite(self.q)) or not np.all(np.isfinite(self.qdot)):
            raise ValueError("state contains non-finite entries")
        spatial.check_attitude_bounds(self.eta)
        spatial.check_swing_bounds(self.sigma)
        return self

    def in_bounds(self) -> bool:
        try:
            self.validate()
        except (AngleBoundsError, ValueError):
            return False
        return True

    def copy(self) -> "GeneralizedState":
        return GeneralizedState(self.q.copy(), self.qdot.copy())


def hover_state() -> GeneralizedState:
    """Vehicle level, load hanging straight down, everything at rest."""
    return GeneralizedState(np.zeros(8), np.zeros(8))
