"""Fit the three free joint-law parameters (clearance stiffness, backlash,
membrane pressure coefficient) to the measured prototype deflections.

The default targets are the four reported scalars: about 100 mm of
self-weight tip sag at zero pressure, a 15..20 percent sag reduction at
10 kPa, and sag reductions of 13.3 percent (0.5 kg payload) and
19.6 percent (0.15 kg payload) from 150 N of jamming tension. Reductions
are measured against the straight, gravity-free position.

The objective (sum of squared tolerance-normalized residuals) is
non-smooth because of the backlash step, so the optimizer is
derivative-free: a coarse grid pass followed by rounds of
coordinate-wise scans with a shrinking bracket. Grids and scan order are
fixed, so a given config always fits to the same parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .equilibrium import StiffnessModel, solve_pitch_deflection
from .errors import CalibrationError, ConfigError
from .model import LoadCase, MechanismConfig

# The membrane coefficient is capped so that a membrane-only column can
# still buckle under its own retraction tension at full deployment
# (Euler load below p*pi*r^2), which the prototype exhibits.
BOUNDS = {
    "clearance_stiffness": (100.0, 30000.0),
    "backlash": (0.0, 0.02),
    "pressure_stiffness_coeff": (0.0, 250.0),
}

_COARSE_GRID = {
    "clearance_stiffness": np.geomspace(150.0, 25000.0, 12),
    "backlash": np.linspace(0.0, 0.012, 10),
    "pressure_stiffness_coeff": np.linspace(0.0, 250.0, 6),
}

_DESCENT_ROUNDS = 4
_SCAN_POINTS = 13


@dataclass(frozen=True)
class CalibrationTarget:
    description: str
    observable: str   # key into the observable registry
    target: float
    tolerance: float

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ConfigError(f"target '{self.description}': tolerance > 0")


@dataclass(frozen=True)
class TargetOutcome:
    target: CalibrationTarget
    fitted: float

    @property
    def residual(self) -> float:
        return self.fitted - self.target.target

    @property
    def normalized(self) -> float:
        return self.residual / self.target.tolerance

    @property
    def within_tolerance(self) -> bool:
        return abs(self.residual) <= self.target.tolerance


@dataclass(frozen=True)
class CalibrationResult:
    params: dict[str, float]
    outcomes: tuple[TargetOutcome, ...]
    objective: float
    evaluations: int

    @property
    def within_count(self) -> int:
        return sum(o.within_tolerance for o in self.outcomes)


def default_targets(config: MechanismConfig) -> list[CalibrationTarget]:
    pos = config.scenario.weight_position
    jam = config.scenario.jam_tension
    return [
        CalibrationTarget("self-weight tip sag, unpressurized",
                          "self_weight_sag_m", 0.100, 0.015),
        CalibrationTarget("sag reduction from 10 kPa pressurization",
                          "pressure_reduction_10kpa", 0.175, 0.025),
        CalibrationTarget(
            f"sag reduction from {jam:g} N jamming, 0.5 kg at {pos:g} m",
            "jam_reduction_500g", 0.133, 0.03),
        CalibrationTarget(
            f"sag reduction from {jam:g} N jamming, 0.15 kg at {pos:g} m",
            "jam_reduction_150g", 0.196, 0.03),
    ]


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

def _sag(config: MechanismConfig, stiffness: StiffnessModel, *,
         pressure: float = 0.0, jam: float = 0.0, mass: float = 0.0) -> float:
    loads = LoadCase(point_loads=((config.scenario.weight_position, mass),)
                     if mass > 0 else (), gravity=config.scenario.gravity)
    result = solve_pitch_deflection(config.chain, config.membrane, stiffness,
                                    loads, pressure, jam, config.solver)
    return result.tip_deflection


def _self_weight_sag(config, stiffness):
    return _sag(config, stiffness)


def _pressure_reduction(config, stiffness):
    base = _sag(config, stiffness)
    if base <= 0:
        return 0.0
    return 1.0 - _sag(config, stiffness, pressure=10_000.0) / base


def _jam_reduction(config, stiffness, mass):
    jam = config.scenario.jam_tension
    base = _sag(config, stiffness, mass=mass)
    if base <= 0:
        return 0.0
    return 1.0 - _sag(config, stiffness, mass=mass, jam=jam) / base


OBSERVABLES = {
    "self_weight_sag_m": _self_weight_sag,
    "pressure_reduction_10kpa": _pressure_reduction,
    "jam_reduction_500g": lambda c, s: _jam_reduction(c, s, 0.5),
    "jam_reduction_150g": lambda c, s: _jam_reduction(c, s, 0.15),
}


def evaluate_targets(config: MechanismConfig, stiffness: StiffnessModel,
                     targets: list[CalibrationTarget]) -> list[TargetOutcome]:
    outcomes = []
    for target in targets:
        fn = OBSERVABLES.get(target.observable)
        if fn is None:
            raise ConfigError(
                f"target '{target.description}': unknown observable "
                f"'{target.observable}' (known: {sorted(OBSERVABLES)})")
        outcomes.append(TargetOutcome(target, fn(config, stiffness)))
    return outcomes


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

def _stiffness_with(config: MechanismConfig, params: dict[str, float]) -> StiffnessModel:
    return StiffnessModel(
        clearance_stiffness=params["clearance_stiffness"],
        backlash=params["backlash"],
        membrane_coeff=params["pressure_stiffness_coeff"],
        membrane_radius=config.membrane.radius)


def apply_params(config: MechanismConfig, params: dict[str, float]) -> MechanismConfig:
    """Return a config with fitted parameters written back into the specs."""
    link = replace(config.chain.link,
                   clearance_stiffness=params["clearance_stiffness"],
                   backlash=params["backlash"])
    chain = replace(config.chain, link=link)
    membrane = replace(config.membrane,
                       pressure_stiffness_coeff=params["pressure_stiffness_coeff"])
    return replace(config, chain=chain, membrane=membrane)


def calibrate(config: MechanismConfig,
              targets: list[CalibrationTarget] | None = None) -> CalibrationResult:
    """Fit the free parameters; pinned parameters keep their config value.

    Raises :class:`CalibrationError` when even the best point misses
    every target by more than half the target value.
    """
    targets = list(targets) if targets is not None else default_targets(config)
    free = list(config.scenario.calibration_free)
    if len(targets) < len(free):
        raise ConfigError(
            f"calibration needs at least {len(free)} targets for "
            f"{len(free)} free parameters, got {len(targets)}")

    link = config.chain.link
    current = {
        "clearance_stiffness": link.clearance_stiffness,
        "backlash": link.backlash,
        "pressure_stiffness_coeff": config.membrane.pressure_stiffness_coeff,
    }
    evaluations = 0

    def objective(params: dict[str, float]) -> tuple[float, list[TargetOutcome]]:
        nonlocal evaluations
        evaluations += 1
        outcomes = evaluate_targets(config, _stiffness_with(config, params), targets)
        return sum(o.normalized ** 2 for o in outcomes), outcomes

    best_obj, best_out = objective(current)
    best = dict(current)

    if free:
        # Coarse grid over the free axes only.
        grids = [np.asarray(_COARSE_GRID[name]) for name in free]
        mesh = np.meshgrid(*grids, indexing="ij")
        for idx in np.ndindex(mesh[0].shape):
            candidate = dict(best)
            for axis, name in enumerate(free):
                candidate[name] = float(mesh[axis][idx])
            obj, out = objective(candidate)
            if obj < best_obj - 1e-15:
                best_obj, best_out, best = obj, out, candidate

        # Coordinate descent with a shrinking scan bracket.
        widths = {name: (BOUNDS[name][1] - BOUNDS[name][0]) / 6.0 for name in free}
        for _ in range(_DESCENT_ROUNDS):
            for name in free:
                lo = max(BOUNDS[name][0], best[name] - widths[name])
                hi = min(BOUNDS[name][1], best[name] + widths[name])
                for value in np.linspace(lo, hi, _SCAN_POINTS):
                    candidate = dict(best)
                    candidate[name] = float(value)
                    obj, out = objective(candidate)
                    if obj < best_obj - 1e-15:
                        best_obj, best_out, best = obj, out, candidate
                widths[name] *= 0.35

    result = CalibrationResult(params=best, outcomes=tuple(best_out),
                               objective=best_obj, evaluations=evaluations)
    half_missed = all(abs(o.residual) > 0.5 * abs(o.target.target)
                      for o in result.outcomes)
    if half_missed:
        raise CalibrationError(
            "no parameter set within bounds came within 50% of any target",
            report=result)
    return result
