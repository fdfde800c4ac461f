"""Metrics over trajectory logs: tracking quality, decay rates, energy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dynamics
from .params import Params
from .simulator import TrajectoryLog


def _window_mask(t: np.ndarray, window) -> np.ndarray:
    if window is None:
        return np.ones(len(t), dtype=bool)
    t0, t1 = window
    return (t >= t0) & (t <= t1)


def rmse(series, reference, window_mask=None) -> float:
    """Root-mean-square pointwise difference of two equal-length series."""
    series = np.asarray(series, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if series.shape != reference.shape:
        raise ValueError("series and reference must have equal length")
    if window_mask is not None:
        series = series[window_mask]
        reference = reference[window_mask]
    if series.size == 0:
        raise ValueError("empty window")
    return float(np.sqrt(np.mean((series - reference) ** 2)))


def settling_time(t, series, target: float, band_fraction: float) -> float:
    """First time after which the series never leaves the settling band.

    The band is ``target * (1 +/- band_fraction)``; for a zero target the
    fraction is read as an absolute tolerance.  Returns ``math.inf`` when
    the series is still outside the band at the end of the log.
    """
    if not 0.0 < band_fraction < 1.0:
        raise ValueError("band_fraction must lie in (0, 1)")
    t = np.asarray(t, dtype=float)
    series = np.asarray(series, dtype=float)
    tol = abs(target) * band_fraction if target != 0.0 else band_fraction
    inside = np.abs(series - target) <= tol
    if not inside[-1]:
        return math.inf
    # Index of the last excursion; settled ever after.
    outside = np.nonzero(~inside)[0]
    if outside.size == 0:
        return 0.0  # settled from the start
    return float(t[outside[-1] + 1] - t[0])


def overshoot(series, initial: float, target: float) -> float:
    """Peak excursion beyond the target, percent of the step size.

    Monotone approaches and peaks short of the target report 0.
    """
    if target == initial:
        raise ValueError("degenerate step: target equals initial value")
    series = np.asarray(series, dtype=float)
    direction = 1.0 if target > initial else -1.0
    peak_excess = float(np.max((series - target) * direction))
    return max(peak_excess, 0.0) / abs(target - initial) * 100.0


def decay_rate_fit(t, values, window=None) -> tuple[float, float]:
    """Least-squares exponential decay rate of a positive series.

    Fits log(values) against time; returns (rate, rms residual) where a
    positive rate means decay.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = _window_mask(t, window)
    t, values = t[mask], values[mask]
    if values.size < 2:
        raise ValueError("need at least two samples to fit a rate")
    if np.any(values <= 0.0):
        raise ValueError("decay fit requires strictly positive values")
    logv = np.log(values)
    slope, intercept = np.polyfit(t, logv, 1)
    residual = float(np.sqrt(np.mean((slope * t + intercept - logv) ** 2)))
    return float(-slope), residual


@dataclass
class EnergyAudit:
    """Recomputed energy along a log and its balance against input work."""

    energy: np.ndarray        # E(t) recomputed from q, qd
    drift: np.ndarray         # (E - E0) / max(|E0|, 1)
    dEdt: np.ndarray          # central-difference energy rate (interior samples)
    work_rate: np.ndarray     # qd . (B u + F_d) at interior samples
    t_interior: np.ndarray


def energy_audit(log: TrajectoryLog, params: Params) -> EnergyAudit:
    """Recompute total energy per sample and compare its rate with the
    work rate of thrust, torque and drag."""
    n = len(log)
    energy = np.empty(n)
    work = np.empty(n)
    for i in range(n):
        q, qd = log.q[i], log.qdot[i]
        terms = dynamics.model_terms(q, qd, params)
        kinetic = 0.5 * float(qd @ terms.M @ qd)
        z_p = q[2] + (terms.Rb @ params.L)[2] + (terms.Rp @ params.l_vec)[2]
        energy[i] = kinetic - params.m_q * params.g * q[2] - params.m_p * params.g * z_p
        drag = dynamics.drag_forces(q, qd, params, terms)
        generalized = drag.generalized()
        generalized[0:3] += terms.Rb[:, 2] * log.f_l[i]
        generalized[3:6] += log.tau_eta[i]
        work[i] = float(qd @ generalized)
    scale = max(abs(energy[0]), 1.0)
    drift = (energy - energy[0]) / scale
    if n >= 3:
        dEdt = (energy[2:] - energy[:-2]) / (log.t[2:] - log.t[:-2])
        t_interior = log.t[1:-1]
        work_interior = work[1:-1]
    else:
        dEdt = np.zeros(0)
        t_interior = np.zeros(0)
        work_interior = np.zeros(0)
    return EnergyAudit(energy, drift, dEdt, work_interior, t_interior)


def _channel_metrics(t, actual, desired, band_fraction=0.1):
    """Settling/overshoot/RMSE for one velocity channel of a log."""
    changes = np.nonzero(np.diff(desired) != 0.0)[0]
    step_idx = int(changes[-1] + 1) if changes.size else 0
    target = float(desired[-1])
    t_seg = t[step_idx:]
    a_seg = actual[step_idx:]
    out = {
        "rmse": rmse(a_seg, desired[step_idx:]),
        "target": target,
    }
    if target != 0.0 or step_idx > 0:
        initial = float(actual[step_idx])
        try:
            out["overshoot_pct"] = overshoot(a_seg, initial, target)
        except ValueError:
            out["overshoot_pct"] = None
        out["settling_time_s"] = settling_time(t_seg, a_seg, target, band_fraction)
    else:
        out["overshoot_pct"] = None
        out["settling_time_s"] = settling_time(t_seg, a_seg, target, band_fraction)
    return out


def compute_metrics(log: TrajectoryLog, params: Params, band_fraction: float = 0.1) -> dict:
    """Standard metric report for a finished run.

    Tension statistics use the second half of the log as the steady
    window; decay rates are fitted over the first half second.
    """
    n = len(log)
    t = log.t
    actual_velocity = log.xidot_pd - log.e_xidot_p
    channels = {}
    for ch, name in enumerate(("xdot_p", "ydot_p", "zdot_p")):
        channels[name] = _channel_metrics(
            t, actual_velocity[:, ch], log.xidot_pd[:, ch], band_fraction
        )

    half = n // 2
    swing_deg = np.degrees(log.q[:, 6:8])
    tension_window = slice(half, n)
    report = {
        "duration_s": float(t[-1] - t[0]) if n else 0.0,
        "samples": n,
        "velocity": channels,
        "swing_rmse_deg": {
            "alpha": rmse(swing_deg[:, 0], np.degrees(log.sigma_d[:, 0])),
            "beta": rmse(swing_deg[:, 1], np.degrees(log.sigma_d[:, 1])),
        },
        "swing_max_abs_deg": float(np.max(np.abs(swing_deg))) if n else 0.0,
        "tension_mean_n": float(np.mean(log.f_t_mag[tension_window])),
        "tension_std_n": float(np.std(log.f_t_mag[tension_window])),
        "tension_window_s": [float(t[half]), float(t[-1])] if n else [0.0, 0.0],
        "energy_initial_j": float(log.energy[0]) if n else 0.0,
        "energy_final_j": float(log.energy[-1]) if n else 0.0,
        "energy_max_rel_drift": float(
            np.max(np.abs(log.energy - log.energy[0])) / max(abs(log.energy[0]), 1.0)
        ) if n else 0.0,
        "saturation_rate": float(np.mean(log.saturated)) if n else 0.0,
    }

    for key, series in (("v_eta", log.v_eta), ("v_sigma", log.v_sigma)):
        fit = None
        window = (t[0], t[0] + 0.5) if n > 2 else None
        mask = _window_mask(t, window) if window else np.ones(n, dtype=bool)
        if n > 2 and np.all(series[mask] > 0.0):
            rate, residual = decay_rate_fit(t, series, window)
            fit = {"rate": rate, "residual": residual}
        report[f"{key}_decay"] = fit
    return report
