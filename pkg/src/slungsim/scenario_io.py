"""Scenario files: a flat dotted-key text format.

One ``key = value`` pair per line; ``#`` starts a comment; values are
numbers, comma-separated vectors, or bare words.  Angular quantities
cross the file boundary in degrees (keys carry a ``_deg`` suffix) and
are converted to radians on load; everything else is SI.

Example::

    name = velocity-step
    duration = 7.0
    mode = cascade
    initial.sigma_deg = 0, 0
    setpoint.0.t = 0
    setpoint.0.xidot_pd = 0, 0, 0
    setpoint.1.t = 1.0
    setpoint.1.xidot_pd = 0, 1.5, 0
    params.L = -0.12, 0, -0.05
    gains.k_sigma = 3.2, 3.2

``params.*`` and ``gains.*`` keys override the defaults; vector fields
accept component addressing as ``params.L_x`` / ``params.L_0``.
"""

from __future__ import annotations

import dataclasses
from importlib import resources

import numpy as np

from .controller import Setpoint
from .exceptions import ScenarioFormatError
from .params import Gains, GeneralizedState, Params
from .simulator import DisturbanceEvent, Scenario, SetpointSegment

_COMPONENT_SUFFIXES = {"x": 0, "y": 1, "z": 2}

_SCENARIO_KEYS = {"name", "duration", "dt", "control_rate", "mode"}
_INITIAL_KEYS = {
    "xi_q", "xi_q_dot", "eta_deg", "eta_dot_deg", "sigma_deg", "sigma_dot_deg",
}
_SETPOINT_KEYS = {
    "t", "xidot_pd", "psi_d_deg", "eta_d_deg",
    "eta_dd_d_deg", "sigma_dd_d_deg", "xi_pdd_d",
}
_DISTURBANCE_KEYS = {"t", "sigma_dot_kick_deg"}


def _parse_value(raw: str, line: int):
    raw = raw.strip()
    if not raw:
        raise ScenarioFormatError("missing value", line)
    if "," in raw:
        try:
            return [float(p) for p in raw.split(",")]
        except ValueError as exc:
            raise ScenarioFormatError(f"bad vector value {raw!r}: {exc}", line) from exc
    try:
        return float(raw)
    except ValueError:
        return raw  # bare word (name, mode)


def parse_config_text(text: str) -> dict[str, tuple[object, int]]:
    """Parse dotted-key config text into ``{key: (value, line_number)}``."""
    entries: dict[str, tuple[object, int]] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioFormatError(f"expected 'key = value', got {line!r}", lineno)
        key, raw_value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ScenarioFormatError("empty key", lineno)
        if key in entries:
            raise ScenarioFormatError(f"duplicate key {key!r}", lineno)
        entries[key] = (_parse_value(raw_value, lineno), lineno)
    return entries


def _as_vector(value, n: int, key: str, line: int) -> np.ndarray:
    if isinstance(value, float):
        value = [value]
    if not isinstance(value, list) or len(value) != n:
        raise ScenarioFormatError(f"{key} must be a {n}-vector", line)
    return np.asarray(value, dtype=float)


def _split_component(name: str):
    if "_" not in name:
        return None
    base, suffix = name.rsplit("_", 1)
    if suffix in _COMPONENT_SUFFIXES:
        return base, _COMPONENT_SUFFIXES[suffix]
    if suffix.isdigit():
        return base, int(suffix)
    return None


def _build_dataclass(cls, entries: dict[str, tuple[object, int]], prefix: str):
    """Instantiate Params/Gains from defaults plus dotted overrides."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    instance = cls()
    kwargs = {name: getattr(instance, name) for name in fields}
    for key, (value, line) in entries.items():
        name = key[len(prefix):]
        if name in fields:
            current = kwargs[name]
            if isinstance(current, np.ndarray):
                kwargs[name] = _as_vector(value, current.shape[0], key, line)
            else:
                if not isinstance(value, float):
                    raise ScenarioFormatError(f"{key} must be a number", line)
                kwargs[name] = value
            continue
        split = _split_component(name)
        if split is not None and split[0] in fields:
            base, idx = split
            current = np.array(kwargs[base], dtype=float)
            if idx >= current.shape[0]:
                raise ScenarioFormatError(f"{key}: index {idx} out of range", line)
            if not isinstance(value, float):
                raise ScenarioFormatError(f"{key} must be a number", line)
            current[idx] = value
            kwargs[base] = current
            continue
        raise ScenarioFormatError(f"unknown {prefix.rstrip('.')} field {name!r}", line)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ScenarioFormatError(str(exc)) from exc


def _group_indexed(entries, prefix: str, allowed: set[str]):
    """Collect setpoint.N.* / disturbance.N.* entries into per-index dicts."""
    groups: dict[int, dict[str, tuple[object, int]]] = {}
    for key, payload in entries.items():
        parts = key.split(".")
        if len(parts) != 3:
            raise ScenarioFormatError(
                f"expected {prefix}.<index>.<field>, got {key!r}", payload[1]
            )
        _, idx_str, field = parts
        if not idx_str.isdigit():
            raise ScenarioFormatError(f"{key}: index must be an integer", payload[1])
        if field not in allowed:
            raise ScenarioFormatError(f"{key}: unknown field {field!r}", payload[1])
        groups.setdefault(int(idx_str), {})[field] = payload
    return [groups[i] for i in sorted(groups)]


def apply_overrides(entries: dict[str, tuple[object, int]], sets: list[str]) -> None:
    """Apply ``--set key=value`` pairs; only params.* and gains.* may be set."""
    for item in sets:
        if "=" not in item:
            raise ScenarioFormatError(f"override must look like key=value, got {item!r}")
        key, raw_value = item.split("=", 1)
        key = key.strip()
        if not (key.startswith("params.") or key.startswith("gains.")):
            raise ScenarioFormatError(
                f"only params.* and gains.* keys may be overridden, got {key!r}"
            )
        entries[key] = (_parse_value(raw_value, 0), 0)


def params_gains_from_sets(sets: list[str] | None) -> tuple[Params, Gains]:
    """Defaults plus ``--set`` overrides, without a scenario file."""
    entries: dict[str, tuple[object, int]] = {}
    if sets:
        apply_overrides(entries, sets)
    params = _build_dataclass(
        Params, {k: v for k, v in entries.items() if k.startswith("params.")}, "params."
    )
    gains = _build_dataclass(
        Gains, {k: v for k, v in entries.items() if k.startswith("gains.")}, "gains."
    )
    return params, gains


def build_scenario(entries: dict[str, tuple[object, int]]) -> Scenario:
    """Validate parsed entries and assemble a Scenario."""
    params_entries = {k: v for k, v in entries.items() if k.startswith("params.")}
    gains_entries = {k: v for k, v in entries.items() if k.startswith("gains.")}
    params = _build_dataclass(Params, params_entries, "params.")
    gains = _build_dataclass(Gains, gains_entries, "gains.")

    def scalar(key: str, default: float) -> float:
        if key not in entries:
            return default
        value, line = entries[key]
        if not isinstance(value, float):
            raise ScenarioFormatError(f"{key} must be a number", line)
        return value

    name = entries.get("name", ("scenario", 0))[0]
    mode = entries.get("mode", ("cascade", 0))[0]
    duration = scalar("duration", 5.0)
    dt = scalar("dt", 1e-3)
    control_rate = scalar("control_rate", 500.0)

    q0 = np.zeros(8)
    qd0 = np.zeros(8)
    initial_entries = {k: v for k, v in entries.items() if k.startswith("initial.")}
    for key, (value, line) in initial_entries.items():
        field = key[len("initial."):]
        if field not in _INITIAL_KEYS:
            raise ScenarioFormatError(f"unknown initial field {field!r}", line)
        if field == "xi_q":
            q0[0:3] = _as_vector(value, 3, key, line)
        elif field == "xi_q_dot":
            qd0[0:3] = _as_vector(value, 3, key, line)
        elif field == "eta_deg":
            q0[3:6] = np.radians(_as_vector(value, 3, key, line))
        elif field == "eta_dot_deg":
            qd0[3:6] = np.radians(_as_vector(value, 3, key, line))
        elif field == "sigma_deg":
            q0[6:8] = np.radians(_as_vector(value, 2, key, line))
        elif field == "sigma_dot_deg":
            qd0[6:8] = np.radians(_as_vector(value, 2, key, line))

    setpoint_entries = {k: v for k, v in entries.items() if k.startswith("setpoint.")}
    segments = []
    for group in _group_indexed(setpoint_entries, "setpoint", _SETPOINT_KEYS):
        if "t" not in group:
            raise ScenarioFormatError("setpoint segment missing 't'")
        t_start = float(group["t"][0])
        kwargs = {}
        if "xidot_pd" in group:
            value, line = group["xidot_pd"]
            kwargs["xidot_pd"] = _as_vector(value, 3, "xidot_pd", line)
        if "psi_d_deg" in group:
            kwargs["psi_d"] = float(np.radians(group["psi_d_deg"][0]))
        if "eta_d_deg" in group:
            value, line = group["eta_d_deg"]
            kwargs["eta_d"] = np.radians(_as_vector(value, 3, "eta_d_deg", line))
        if "eta_dd_d_deg" in group:
            value, line = group["eta_dd_d_deg"]
            kwargs["eta_dd_d"] = np.radians(_as_vector(value, 3, "eta_dd_d_deg", line))
        if "sigma_dd_d_deg" in group:
            value, line = group["sigma_dd_d_deg"]
            kwargs["sigma_dd_d"] = np.radians(_as_vector(value, 2, "sigma_dd_d_deg", line))
        if "xi_pdd_d" in group:
            value, line = group["xi_pdd_d"]
            kwargs["xi_pdd_d"] = _as_vector(value, 3, "xi_pdd_d", line)
        segments.append(SetpointSegment(t_start, Setpoint(**kwargs)))
    if not segments:
        segments = [SetpointSegment(0.0, Setpoint())]

    disturbance_entries = {k: v for k, v in entries.items() if k.startswith("disturbance.")}
    disturbances = []
    for group in _group_indexed(disturbance_entries, "disturbance", _DISTURBANCE_KEYS):
        if "t" not in group or "sigma_dot_kick_deg" not in group:
            raise ScenarioFormatError(
                "disturbance needs both 't' and 'sigma_dot_kick_deg'"
            )
        value, line = group["sigma_dot_kick_deg"]
        kick = np.radians(_as_vector(value, 2, "sigma_dot_kick_deg", line))
        disturbances.append(DisturbanceEvent(float(group["t"][0]), kick))

    recognised = (
        _SCENARIO_KEYS
        | {k for k in entries if k.startswith(("params.", "gains.", "initial.",
                                               "setpoint.", "disturbance."))}
    )
    for key, (_, line) in entries.items():
        if key not in recognised:
            raise ScenarioFormatError(f"unknown key {key!r}", line)

    return Scenario(
        initial=GeneralizedState(q0, qd0),
        segments=segments,
        gains=gains,
        params=params,
        duration=duration,
        dt=dt,
        control_rate=control_rate,
        mode=str(mode),
        disturbances=disturbances,
        name=str(name),
    )


def load_scenario(path, sets: list[str] | None = None) -> Scenario:
    """Read a scenario file and apply CLI overrides."""
    with open(path, "r", encoding="utf-8") as fh:
        entries = parse_config_text(fh.read())
    if sets:
        apply_overrides(entries, sets)
    return build_scenario(entries)


def builtin_scenario_names() -> list[str]:
    root = resources.files("slungsim.scenarios")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def load_builtin_scenario(name: str, sets: list[str] | None = None) -> Scenario:
    """Load one of the bundled scenarios by bare name."""
    ref = resources.files("slungsim.scenarios").joinpath(f"{name}.cfg")
    if not ref.is_file():
        raise ScenarioFormatError(
            f"no bundled scenario {name!r}; available: {', '.join(builtin_scenario_names())}"
        )
    entries = parse_config_text(ref.read_text(encoding="utf-8"))
    if sets:
        apply_overrides(entries, sets)
    return build_scenario(entries)
