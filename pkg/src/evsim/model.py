"""Mechanism data model: skeleton and membrane specs, runtime state, and
JSON configuration loading with strict validation.

Units are SI throughout (m, kg, N, Pa, rad). Angles in configuration
documents must carry an explicit unit key, ``{"deg": x}`` or
``{"rad": x}``; bare numbers are rejected to avoid silent degree/radian
mixups. Spec objects are immutable after construction and safe to share
across threads; :class:`MechanismState` is a value type that pipeline
stages copy rather than mutate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

from .errors import ConfigError

GRAVITY = 9.81  # m/s^2

# Tolerance for derived-length identities (total_length, feed halving).
LENGTH_TOL = 1e-9


class Phase(Enum):
    STOWED = "Stowed"
    PRESSURIZED = "Pressurized"
    EXTENDING = "Extending"
    BENDING = "Bending"
    LOCKED = "Locked"
    LIFTING = "Lifting"
    UNBENDING = "Unbending"
    RETRACTING = "Retracting"


@dataclass(frozen=True)
class LinkSpec:
    """Geometry, mass, joint limits and friction data for one skeleton link.

    Defaults describe the desk-scale prototype: 27 mm axis spacing, an
    asymmetric 0..90 deg pitch range (the lower stop carries gravity, the
    upper range folds the link back at the tip), +-30 deg yaw, and a
    friction annulus sized so that 150 N on the center wire holds about
    1.6 N*m per joint.

    ``backlash`` and ``clearance_stiffness`` govern sag below the pitch
    stop: the joint first moves through ``backlash`` radians of free play
    from pin clearance, then deforms elastically at
    ``clearance_stiffness``. Both default to values calibrated against
    the measured prototype deflections (see calibrate.py).
    """

    axis_spacing: float = 0.027           # m between consecutive joint axes
    link_mass: float = 0.0191             # kg per link
    bend_wire_radius: float = 0.020       # m, side-wire offset from joint center (free parameter)
    jam_contact_radius: float = 0.01524   # m, effective radius of the friction annulus
    friction_coeff: float = 0.7           # at the jammed contact faces
    pitch_min: float = 0.0                # rad, load-bearing hard stop
    pitch_max: float = math.pi / 2        # rad, fold-up limit
    yaw_min: float = -math.pi / 6         # rad
    yaw_max: float = math.pi / 6          # rad
    backlash: float = 4.1e-3              # rad free play per joint (calibrated)
    clearance_stiffness: float = 1350.0   # N*m/rad past the pitch stop (calibrated)
    link_thickness: float = 0.02          # m, radial packing thickness when reeled

    def invariant_violations(self) -> list[str]:
        v = []
        if not self.axis_spacing > 0:
            v.append("axis_spacing > 0")
        if not self.link_mass >= 0:
            v.append("link_mass >= 0")
        if not self.bend_wire_radius > 0:
            v.append("bend_wire_radius > 0")
        if not self.jam_contact_radius > 0:
            v.append("jam_contact_radius > 0")
        if self.pitch_min != 0.0 or not self.pitch_max >= 0.0:
            v.append("pitch_min = 0 <= pitch_max")
        if not (self.yaw_min == -self.yaw_max and self.yaw_max > 0):
            v.append("yaw_min = -yaw_max < 0 < yaw_max")
        if not self.friction_coeff >= 0:
            v.append("friction_coeff >= 0")
        if not self.backlash >= 0:
            v.append("backlash >= 0")
        if not self.clearance_stiffness > 0:
            v.append("clearance_stiffness > 0")
        if not self.link_thickness > 0:
            v.append("link_thickness > 0")
        return v


@dataclass(frozen=True)
class ChainSpec:
    """A skeleton of ``n_links`` identical links.

    ``total_length`` is derived (n_links * axis_spacing) and stored for
    convenience; a configured value must agree to within 1 nm.
    """

    link: LinkSpec = field(default_factory=LinkSpec)
    n_links: int = 37
    total_length: float | None = None

    def __post_init__(self):
        if self.total_length is None:
            object.__setattr__(self, "total_length",
                               self.n_links * self.link.axis_spacing)

    def invariant_violations(self) -> list[str]:
        v = self.link.invariant_violations()
        if not self.n_links >= 1:
            v.append("n_links >= 1")
        elif abs(self.total_length - self.n_links * self.link.axis_spacing) > LENGTH_TOL:
            v.append("total_length = n_links * axis_spacing within 1e-9 m")
        return v


@dataclass(frozen=True)
class MembraneSpec:
    """Everting membrane tube: radius, fold-offset constants, and the
    coefficient scaling the joint stiffness contributed by pressurization.

    ``offset_a`` and ``offset_b`` size the fold allowance at the tip
    (total offset length 2a + 2b); they depend on link thickness and
    joint spacing and are free inputs here. ``pressure_stiffness_coeff``
    converts pressure * radius^3 into a per-joint torsional stiffness.
    """

    radius: float = 0.04                    # m (80 mm diameter tube)
    offset_a: float = 0.008                 # m
    offset_b: float = 0.027                 # m
    pressure_stiffness_coeff: float = 205.0  # dimensionless (calibrated)
    min_extension_pressure: float = 4000.0  # Pa required before feeding out
    areal_mass: float = 0.0                 # kg/m^2, reserved (0 = massless membrane)

    def invariant_violations(self) -> list[str]:
        v = []
        if not self.radius > 0:
            v.append("radius > 0")
        if not self.offset_a >= 0:
            v.append("offset_a >= 0")
        if not self.offset_b >= 0:
            v.append("offset_b >= 0")
        if not self.pressure_stiffness_coeff >= 0:
            v.append("pressure_stiffness_coeff >= 0")
        if not self.min_extension_pressure >= 0:
            v.append("min_extension_pressure >= 0")
        if not self.areal_mass >= 0:
            v.append("areal_mass >= 0")
        return v


@dataclass(frozen=True)
class WireState:
    """Tensions in the two side bending wires and the center jamming wire."""

    tension_left: float = 0.0    # N
    tension_right: float = 0.0   # N
    tension_center: float = 0.0  # N

    def invariant_violations(self) -> list[str]:
        v = []
        if self.tension_left < 0 or self.tension_right < 0 or self.tension_center < 0:
            v.append("wire tensions >= 0 (wires cannot push)")
        return v


@dataclass(frozen=True)
class LoadCase:
    """External point loads hung on the deployed boom.

    ``point_loads`` is a tuple of (arc_position m, mass kg) pairs measured
    along the boom from the base.
    """

    point_loads: tuple[tuple[float, float], ...] = ()
    gravity: float = GRAVITY

    def invariant_violations(self, deployed_length: float | None = None) -> list[str]:
        v = []
        for i, (pos, mass) in enumerate(self.point_loads):
            if pos < 0:
                v.append(f"point_loads[{i}]: arc_position >= 0")
            elif deployed_length is not None and pos > deployed_length + LENGTH_TOL:
                v.append(f"point_loads[{i}]: arc_position <= deployed_length")
            if mass < 0:
                v.append(f"point_loads[{i}]: mass >= 0")
        return v

    @property
    def total_mass(self) -> float:
        return sum(m for _, m in self.point_loads)


@dataclass(frozen=True)
class MechanismState:
    """Snapshot of the mechanism between actions.

    ``deployed_length`` is the everted length and always equals half the
    membrane feed. Angle lists hold one entry per deployed joint; links
    still folded at the tip are not represented individually.
    """

    feed: float = 0.0             # m of membrane payed out from the spool
    deployed_length: float = 0.0  # m everted (= feed / 2)
    pressure: float = 0.0         # Pa gauge
    pitch_angles: tuple[float, ...] = ()
    yaw_angles: tuple[float, ...] = ()
    wires: WireState = field(default_factory=WireState)
    locked: bool = False
    phase: Phase = Phase.STOWED


@dataclass(frozen=True)
class SolverSettings:
    tolerance_rad: float = 1e-8
    max_iterations: int = 10_000

    def invariant_violations(self) -> list[str]:
        v = []
        if not self.tolerance_rad > 0:
            v.append("tolerance_rad > 0")
        if not self.max_iterations >= 1:
            v.append("max_iterations >= 1")
        return v


@dataclass(frozen=True)
class ScenarioSettings:
    """Defaults for the experiment harness and the operation sequence."""

    gravity: float = GRAVITY
    weight_position: float = 0.4        # m from base where test weights hang
    jam_tension: float = 150.0          # N on the center wire when locking
    object_reaction: float = 10.0       # N pushed back by a wrapped object
    conforming_moment: float = 0.5      # N*m per joint to conform to an object
    imperfection_offset: float | None = None  # m lateral offset seeding buckling (None = backlash * axis_spacing)
    reel_length: float = 0.97           # m of skeleton wound onto the storage reel
    reel_inner_radius: float = 0.04     # m
    sequence_pressure: float = 6000.0   # Pa used by the canonical action script
    sequence_feed: float = 0.8          # m membrane feed in the canonical script
    calibration_free: tuple[str, ...] = (
        "clearance_stiffness", "backlash", "pressure_stiffness_coeff")

    def invariant_violations(self) -> list[str]:
        v = []
        if not self.gravity >= 0:
            v.append("gravity >= 0")
        if self.weight_position < 0:
            v.append("weight_position >= 0")
        if self.jam_tension < 0:
            v.append("jam_tension >= 0")
        if self.object_reaction < 0:
            v.append("object_reaction >= 0")
        if self.conforming_moment < 0:
            v.append("conforming_moment >= 0")
        if self.imperfection_offset is not None and self.imperfection_offset < 0:
            v.append("imperfection_offset >= 0")
        if not self.reel_length >= 0:
            v.append("reel_length >= 0")
        if not self.reel_inner_radius > 0:
            v.append("reel_inner_radius > 0")
        known = {"clearance_stiffness", "backlash", "pressure_stiffness_coeff"}
        for name in self.calibration_free:
            if name not in known:
                v.append(f"calibration_free: unknown parameter '{name}'")
        return v


@dataclass(frozen=True)
class MechanismConfig:
    """Validated bundle of every spec the simulator needs."""

    chain: ChainSpec = field(default_factory=ChainSpec)
    membrane: MembraneSpec = field(default_factory=MembraneSpec)
    wires: WireState = field(default_factory=WireState)
    solver: SolverSettings = field(default_factory=SolverSettings)
    scenario: ScenarioSettings = field(default_factory=ScenarioSettings)
    # (angle_deg, factor) pairs derating holding torque at bent joints;
    # empty means no derating.
    derating: tuple[tuple[float, float], ...] = ()

    @property
    def imperfection_offset(self) -> float:
        if self.scenario.imperfection_offset is not None:
            return self.scenario.imperfection_offset
        return self.chain.link.backlash * self.chain.link.axis_spacing


# ---------------------------------------------------------------------------
# Configuration parsing
# ---------------------------------------------------------------------------

def _parse_angle(value: Any, path: str) -> float:
    if isinstance(value, dict) and len(value) == 1:
        (unit, x), = value.items()
        if unit == "deg" and isinstance(x, (int, float)):
            return math.radians(float(x))
        if unit == "rad" and isinstance(x, (int, float)):
            return float(x)
    raise ConfigError(f'{path}: angle must be {{"deg": x}} or {{"rad": x}}')


def _parse_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number")
    return float(value)


def _parse_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer")
    return value


def _check_keys(doc: dict, known: set[str], path: str) -> None:
    for key in doc:
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown field")


def _section(doc: dict, name: str) -> dict:
    sub = doc.get(name, {})
    if not isinstance(sub, dict):
        raise ConfigError(f"{name}: expected an object")
    return sub


_CHAIN_FIELDS = {
    "axis_spacing": _parse_number, "link_mass": _parse_number,
    "bend_wire_radius": _parse_number, "jam_contact_radius": _parse_number,
    "friction_coeff": _parse_number, "pitch_min": _parse_angle,
    "pitch_max": _parse_angle, "yaw_min": _parse_angle, "yaw_max": _parse_angle,
    "backlash": _parse_angle, "clearance_stiffness": _parse_number,
    "link_thickness": _parse_number,
}

_MEMBRANE_FIELDS = {
    "radius": _parse_number, "offset_a": _parse_number, "offset_b": _parse_number,
    "pressure_stiffness_coeff": _parse_number,
    "min_extension_pressure": _parse_number, "areal_mass": _parse_number,
}

_WIRE_FIELDS = {
    "tension_left": _parse_number, "tension_right": _parse_number,
    "tension_center": _parse_number,
}

_SOLVER_FIELDS = {"tolerance_rad": _parse_number, "max_iterations": _parse_int}

_SCENARIO_FIELDS = {
    "gravity": _parse_number, "weight_position": _parse_number,
    "jam_tension": _parse_number, "object_reaction": _parse_number,
    "conforming_moment": _parse_number, "imperfection_offset": _parse_number,
    "reel_length": _parse_number, "reel_inner_radius": _parse_number,
    "sequence_pressure": _parse_number, "sequence_feed": _parse_number,
}


def _parse_fields(doc: dict, fields: dict, path: str) -> dict:
    out = {}
    for key, value in doc.items():
        out[key] = fields[key](value, f"{path}.{key}")
    return out


def config_from_dict(doc: dict) -> MechanismConfig:
    """Build a validated config from a parsed JSON document.

    Absent fields take the prototype defaults; unknown fields and
    invariant violations raise :class:`ConfigError` naming the field.
    """
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected an object")
    _check_keys(doc, {"chain", "membrane", "wires", "solver", "scenario"}, "config")

    chain_doc = _section(doc, "chain")
    _check_keys(chain_doc, set(_CHAIN_FIELDS) | {"n_links", "total_length"}, "chain")
    link_kwargs = _parse_fields(
        {k: v for k, v in chain_doc.items() if k in _CHAIN_FIELDS},
        _CHAIN_FIELDS, "chain")
    link = replace(LinkSpec(), **link_kwargs)
    chain_kwargs: dict[str, Any] = {"link": link}
    if "n_links" in chain_doc:
        chain_kwargs["n_links"] = _parse_int(chain_doc["n_links"], "chain.n_links")
    if "total_length" in chain_doc:
        chain_kwargs["total_length"] = _parse_number(
            chain_doc["total_length"], "chain.total_length")
    chain = ChainSpec(**chain_kwargs)

    mem_doc = _section(doc, "membrane")
    _check_keys(mem_doc, set(_MEMBRANE_FIELDS), "membrane")
    membrane = replace(MembraneSpec(),
                       **_parse_fields(mem_doc, _MEMBRANE_FIELDS, "membrane"))

    wires_doc = dict(_section(doc, "wires"))
    _check_keys(wires_doc, set(_WIRE_FIELDS) | {"derating"}, "wires")
    derating_doc = wires_doc.pop("derating", [])
    wires = replace(WireState(), **_parse_fields(wires_doc, _WIRE_FIELDS, "wires"))
    derating = _parse_derating(derating_doc)

    solver_doc = _section(doc, "solver")
    _check_keys(solver_doc, set(_SOLVER_FIELDS), "solver")
    solver = replace(SolverSettings(),
                     **_parse_fields(solver_doc, _SOLVER_FIELDS, "solver"))

    scen_doc = dict(_section(doc, "scenario"))
    _check_keys(scen_doc, set(_SCENARIO_FIELDS) | {"calibration_free"}, "scenario")
    cal_free = scen_doc.pop("calibration_free", None)
    scenario = replace(ScenarioSettings(),
                       **_parse_fields(scen_doc, _SCENARIO_FIELDS, "scenario"))
    if cal_free is not None:
        if (not isinstance(cal_free, list)
                or not all(isinstance(s, str) for s in cal_free)):
            raise ConfigError("scenario.calibration_free: expected a list of names")
        scenario = replace(scenario, calibration_free=tuple(cal_free))

    config = MechanismConfig(chain=chain, membrane=membrane, wires=wires,
                             solver=solver, scenario=scenario, derating=derating)
    violations = config_invariant_violations(config)
    if violations:
        raise ConfigError("; ".join(violations))
    return config


def _parse_derating(doc: Any) -> tuple[tuple[float, float], ...]:
    if not isinstance(doc, list):
        raise ConfigError("wires.derating: expected a list of [angle_deg, factor] pairs")
    pairs = []
    for i, item in enumerate(doc):
        if (not isinstance(item, (list, tuple)) or len(item) != 2
                or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in item)):
            raise ConfigError(f"wires.derating[{i}]: expected [angle_deg, factor]")
        angle, factor = float(item[0]), float(item[1])
        if factor < 0:
            raise ConfigError(f"wires.derating[{i}]: factor >= 0")
        pairs.append((angle, factor))
    pairs.sort(key=lambda p: p[0])
    return tuple(pairs)


def config_invariant_violations(config: MechanismConfig) -> list[str]:
    v = []
    v += [f"chain: {s}" for s in config.chain.invariant_violations()]
    v += [f"membrane: {s}" for s in config.membrane.invariant_violations()]
    v += [f"wires: {s}" for s in config.wires.invariant_violations()]
    v += [f"solver: {s}" for s in config.solver.invariant_violations()]
    v += [f"scenario: {s}" for s in config.scenario.invariant_violations()]
    return v


def load_config(text: str | None) -> MechanismConfig:
    """Parse a JSON configuration document; empty input means all defaults."""
    if text is None or text.strip() == "":
        return MechanismConfig()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"configuration is not valid JSON: {e}") from e
    return config_from_dict(doc)


def config_to_dict(config: MechanismConfig) -> dict:
    """Serialize a config so that loading the result reproduces it exactly.

    Angles are emitted with explicit {"rad": x} unit keys.
    """
    link = config.chain.link
    return {
        "chain": {
            "axis_spacing": link.axis_spacing,
            "link_mass": link.link_mass,
            "bend_wire_radius": link.bend_wire_radius,
            "jam_contact_radius": link.jam_contact_radius,
            "friction_coeff": link.friction_coeff,
            "pitch_min": {"rad": link.pitch_min},
            "pitch_max": {"rad": link.pitch_max},
            "yaw_min": {"rad": link.yaw_min},
            "yaw_max": {"rad": link.yaw_max},
            "backlash": {"rad": link.backlash},
            "clearance_stiffness": link.clearance_stiffness,
            "link_thickness": link.link_thickness,
            "n_links": config.chain.n_links,
            "total_length": config.chain.total_length,
        },
        "membrane": {
            "radius": config.membrane.radius,
            "offset_a": config.membrane.offset_a,
            "offset_b": config.membrane.offset_b,
            "pressure_stiffness_coeff": config.membrane.pressure_stiffness_coeff,
            "min_extension_pressure": config.membrane.min_extension_pressure,
            "areal_mass": config.membrane.areal_mass,
        },
        "wires": {
            "tension_left": config.wires.tension_left,
            "tension_right": config.wires.tension_right,
            "tension_center": config.wires.tension_center,
            "derating": [list(p) for p in config.derating],
        },
        "solver": {
            "tolerance_rad": config.solver.tolerance_rad,
            "max_iterations": config.solver.max_iterations,
        },
        "scenario": {
            "gravity": config.scenario.gravity,
            "weight_position": config.scenario.weight_position,
            "jam_tension": config.scenario.jam_tension,
            "object_reaction": config.scenario.object_reaction,
            "conforming_moment": config.scenario.conforming_moment,
            **({"imperfection_offset": config.scenario.imperfection_offset}
               if config.scenario.imperfection_offset is not None else {}),
            "reel_length": config.scenario.reel_length,
            "reel_inner_radius": config.scenario.reel_inner_radius,
            "sequence_pressure": config.scenario.sequence_pressure,
            "sequence_feed": config.scenario.sequence_feed,
            "calibration_free": list(config.scenario.calibration_free),
        },
    }


# ---------------------------------------------------------------------------
# State helpers
# ---------------------------------------------------------------------------

def deployed_joint_count(deployed_length: float, chain: ChainSpec) -> int:
    """Number of fully everted links for a given deployed length.

    Uses a 1e-9 m slack so that lengths that are an exact multiple of the
    axis spacing up to float rounding land on the intended count.
    """
    spacing = chain.link.axis_spacing
    return int(math.floor(deployed_length / spacing + LENGTH_TOL / spacing))


def initial_state(config: MechanismConfig) -> MechanismState:
    return MechanismState(wires=config.wires)


def validate_state(state: MechanismState, config: MechanismConfig) -> list[str]:
    """Return all invariant violations of ``state``; empty list means valid.

    Violations are data, not errors: callers decide what to do with them.
    """
    link = config.chain.link
    v: list[str] = []
    if abs(state.deployed_length - state.feed / 2.0) > LENGTH_TOL:
        v.append("deployed_length = feed/2 within 1e-9 m")
    if state.feed < 0:
        v.append("feed >= 0")
    if state.deployed_length > config.chain.total_length + LENGTH_TOL:
        v.append("deployed_length <= total_length")
    if state.pressure < 0:
        v.append("pressure >= 0")
    v += state.wires.invariant_violations()
    if state.locked and not state.wires.tension_center > 0:
        v.append("locked requires tension_center > 0")

    expected = deployed_joint_count(state.deployed_length, config.chain)
    if len(state.pitch_angles) != expected:
        v.append(f"pitch_angles: expected {expected} entries for the deployed joints")
    if len(state.yaw_angles) != expected:
        v.append(f"yaw_angles: expected {expected} entries for the deployed joints")

    lo = link.pitch_min - link.backlash - 1e-12
    hi = link.pitch_max + 1e-12
    for i, a in enumerate(state.pitch_angles):
        if not lo <= a <= hi:
            v.append(f"pitch_angles[{i}] outside [pitch_min - backlash, pitch_max]")
    for i, a in enumerate(state.yaw_angles):
        if not link.yaw_min - 1e-12 <= a <= link.yaw_max + 1e-12:
            v.append(f"yaw_angles[{i}] outside [yaw_min, yaw_max]")
    return v


def state_from_dict(doc: dict, config: MechanismConfig) -> MechanismState:
    """Parse a MechanismState from a JSON document (for the validate surface)."""
    if not isinstance(doc, dict):
        raise ConfigError("state: expected an object")
    known = {"feed", "deployed_length", "pressure", "pitch_angles", "yaw_angles",
             "wires", "locked", "phase"}
    _check_keys(doc, known, "state")

    def angles(key: str) -> tuple[float, ...]:
        raw = doc.get(key, [])
        if not isinstance(raw, list):
            raise ConfigError(f"state.{key}: expected a list of angles")
        return tuple(_parse_angle(a, f"state.{key}[{i}]") for i, a in enumerate(raw))

    wires_doc = _section(doc, "wires")
    _check_keys(wires_doc, set(_WIRE_FIELDS), "state.wires")
    wires = replace(config.wires, **_parse_fields(wires_doc, _WIRE_FIELDS, "state.wires"))

    feed = _parse_number(doc.get("feed", 0.0), "state.feed")
    deployed = (_parse_number(doc["deployed_length"], "state.deployed_length")
                if "deployed_length" in doc else feed / 2.0)
    phase_name = doc.get("phase", Phase.STOWED.value)
    try:
        phase = Phase(phase_name)
    except ValueError:
        raise ConfigError(f"state.phase: unknown phase '{phase_name}'") from None
    locked = doc.get("locked", False)
    if not isinstance(locked, bool):
        raise ConfigError("state.locked: expected a boolean")
    return MechanismState(
        feed=feed, deployed_length=deployed,
        pressure=_parse_number(doc.get("pressure", 0.0), "state.pressure"),
        pitch_angles=angles("pitch_angles"), yaw_angles=angles("yaw_angles"),
        wires=wires, locked=locked, phase=phase)
